from __future__ import annotations

import numpy as np
import pytest

from spdelab.integrator import (
    BrownianPath,
    increments_from_csv,
    integrate,
    path_to_csv,
    sample_brownian,
    simulate,
    states_from_csv,
    stochastic_convolution,
    trajectory_to_csv,
)
from spdelab.model import ModelSpec, NoiseConfig, NumericalAbort
from spdelab.models import gl_model, rd_model
from spdelab.spectral import Basis, LocalPolynomial


def linear_model(M=9, g_rows=(), nu=1.0):
    b = Basis(M, nu=nu)
    G = np.array(g_rows, dtype=float).reshape(len(g_rows), M)
    return ModelSpec(b, LocalPolynomial((0.0,)), NoiseConfig(G))


class TestBrownian:
    def test_empty_channels(self):
        p = sample_brownian(3, 10, 0.1, 0)
        assert p.increments.shape == (10, 0)

    def test_deterministic(self):
        a, b = sample_brownian(42, 100, 1e-3, 3), sample_brownian(42, 100, 1e-3, 3)
        assert np.array_equal(a.increments, b.increments)
        assert not np.array_equal(a.increments, sample_brownian(43, 100, 1e-3, 3).increments)

    def test_unit_variance(self):
        dt = 1e-3
        p = sample_brownian(7, 100_000, dt, 1)
        assert abs(np.var(p.increments[:, 0] / np.sqrt(dt)) - 1.0) < 0.02

    def test_values_start_at_zero(self):
        p = sample_brownian(1, 5, 0.2, 2)
        W = p.values()
        assert not W[0].any() and np.allclose(W[-1], p.increments.sum(0))

    def test_invalid_arguments(self):
        with pytest.raises(ValueError):
            sample_brownian(0, 5, 0.0, 1)
        with pytest.raises(ValueError):
            sample_brownian(0, -1, 0.1, 1)


class TestSimulate:
    def test_linear_decay_is_exact(self):
        m = linear_model()
        k = 3
        path = sample_brownian(0, 200, 1e-2, 0)
        tr = simulate(m.basis.unit(k), path, m)
        expect = np.exp(-m.basis.eigenvalues[k] * tr.times)
        assert np.allclose(tr.states[:, k], expect, rtol=1e-13, atol=0)
        assert np.count_nonzero(tr.states[:, np.arange(9) != k]) == 0

    def test_constant_fixed_point(self):
        eta = 0.8
        m = gl_model(nu=1.0, eta=eta, g_list=(), M=9, s=0.0)
        u0 = np.sqrt(eta) * m.basis.project(np.ones_like)
        tr = simulate(u0, sample_brownian(0, 500, 1e-3, 0), m)
        assert np.allclose(tr.states, u0, atol=1e-13)

    def test_strong_order(self):
        """Self-convergence against the half-step solution on a common path;
        the order is the least-squares slope over five refinements."""
        m = gl_model(M=16, s=0.0)
        u0 = 0.5 * m.basis.project(np.cos)
        T = 0.5
        dts = [0.02, 0.01, 0.005, 0.0025, 0.00125, 0.000625]
        fine = dts[-1]
        errs = []
        for seed in range(30):
            inc = sample_brownian(seed, int(round(T / fine)), fine, m.d).increments
            sols = []
            for dt in dts:
                r = int(round(dt / fine))
                sols.append(integrate(m, u0, inc.reshape(-1, r, m.d).sum(axis=1), dt)[-1])
            errs.append([np.linalg.norm(a - b) for a, b in zip(sols[:-1], sols[1:])])
        e = np.mean(errs, axis=0)
        order = np.polyfit(np.log(dts[:-1]), np.log(e), 1)[0]
        assert order >= 0.9

    def test_flow_property(self):
        m = gl_model(M=12)
        path = sample_brownian(5, 400, 1e-3, m.d)
        u0 = np.random.default_rng(0).standard_normal(12) * 0.3
        full = simulate(u0, path, m)
        p1, p2 = path.split(200)
        a = simulate(u0, p1, m)
        b = simulate(a.final, p2, m)
        assert np.array_equal(full.states[200:], b.states)

    def test_determinism(self):
        m = gl_model(M=12)
        u0 = np.zeros(12)
        a = simulate(u0, sample_brownian(9, 300, 1e-3, 3), m)
        b = simulate(u0, sample_brownian(9, 300, 1e-3, 3), m)
        assert np.array_equal(a.states, b.states)

    @pytest.mark.parametrize("eta", [0.0, -0.5])
    def test_energy_dissipation(self, eta):
        m = gl_model(nu=0.5, eta=eta, g_list=(), M=16, s=0.0)
        u0 = np.random.default_rng(1).standard_normal(16)
        tr = simulate(u0, sample_brownian(0, 1000, 1e-3, 0), m)
        n = np.linalg.norm(tr.states, axis=1)
        assert np.all(np.diff(n) <= 1e-15)

    def test_blowup_ceiling(self):
        m = rd_model((0.0, 0.0, 0.0, 1.0), M=5)
        with pytest.raises(NumericalAbort):
            simulate(3.0 * m.basis.unit(0), sample_brownian(0, 2000, 1e-2, 0), m)

    def test_adaptive_substeps_handle_huge_data(self):
        m = gl_model(M=9, s=0.0, g_list=())
        u0 = 1e3 * m.basis.project(lambda x: 1 + 0.5 * np.cos(x))
        with pytest.raises(NumericalAbort):
            simulate(u0, sample_brownian(0, 100, 1e-2, 0), m)
        tr = simulate(u0, sample_brownian(0, 100, 1e-2, 0), m, adaptive_substeps=True)
        assert np.all(np.isfinite(tr.states))

    def test_shape_validation(self):
        m = gl_model(M=8)
        with pytest.raises(ValueError):
            simulate(np.zeros(8), sample_brownian(0, 5, 0.1, 1), m)


class TestStochasticConvolution:
    def test_trivial_cases(self):
        m = linear_model(g_rows=())
        p = sample_brownian(0, 10, 0.1, 0)
        assert not stochastic_convolution(m.basis, m.noise, p, 0, 10).any()
        m1 = linear_model(g_rows=[np.eye(9)[2]])
        p1 = sample_brownian(0, 10, 0.1, 1)
        assert not stochastic_convolution(m1.basis, m1.noise, p1, 4, 4).any()
        with pytest.raises(ValueError):
            stochastic_convolution(m1.basis, m1.noise, p1, 5, 4)

    def test_variance_closed_form(self):
        k = 1
        m = linear_model(g_rows=[np.eye(9)[k]])
        lam = m.basis.eigenvalues[k]
        S, dt, n = 500, 1e-3, 10_000
        t = S * dt
        vals = np.array([
            stochastic_convolution(m.basis, m.noise, sample_brownian(i, S, dt, 1), 0, S)[k]
            for i in range(n)
        ])
        expect = (1 - np.exp(-2 * lam * t)) / (2 * lam)
        var = vals.var(ddof=1)
        se = var * np.sqrt(2.0 / (n - 1))
        assert abs(var - expect) <= 3 * se

    def test_linearity_in_noise(self):
        rng = np.random.default_rng(0)
        m = linear_model(M=11, g_rows=rng.standard_normal((2, 11)))
        p = sample_brownian(3, 300, 1e-3, 2)
        u0 = rng.standard_normal(11)
        zero = BrownianPath(0, 300, 1e-3, np.zeros((300, 2)))
        diff = simulate(u0, p, m).final - simulate(u0, zero, m).final
        assert np.allclose(diff, stochastic_convolution(m.basis, m.noise, p, 0, 300), atol=1e-12)


class TestCSV:
    def test_roundtrip_exact(self):
        m = gl_model(M=6)
        p = sample_brownian(2, 20, 1e-3, 3)
        tr = simulate(np.random.default_rng(0).standard_normal(6), p, m)
        t, states = states_from_csv(trajectory_to_csv(tr))
        assert np.array_equal(states, tr.states) and np.array_equal(t, tr.times)
        assert np.array_equal(increments_from_csv(path_to_csv(p)), p.increments)
