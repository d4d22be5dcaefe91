from __future__ import annotations

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from spdelab.integrator import sample_brownian, simulate
from spdelab.malliavin import (
    ConeSpec,
    MalliavinMatrix,
    assemble_adjoint,
    assemble_forward,
    cone_min,
    cone_min_full,
    projected_remainder_bound,
    regularized_inverse_apply,
    tail_estimate,
)
from spdelab.model import ModelSpec, NoiseConfig
from spdelab.models import gl_model
from spdelab.spectral import Basis, LocalPolynomial


from cone_oracle import brute_force_2x2, random_psd


def linear_model(M, rows, s=0.0, nu=1.0):
    b = Basis(M, nu=nu)
    return ModelSpec(b, LocalPolynomial((0.0,)), NoiseConfig(np.eye(M)[rows]), s=s)


class TestAssembly:
    def test_no_noise_gives_zero(self):
        m = gl_model(M=8, g_list=())
        tr = simulate(np.ones(8) * 0.1, sample_brownian(0, 100, 1e-2, 0), m)
        assert not assemble_forward(tr).hat.any()
        assert not assemble_adjoint(tr).hat.any()

    @pytest.mark.parametrize("nu,k", [(1.0, 0), (0.5, 1)])
    def test_linear_closed_form(self, nu, k):
        m = linear_model(9, [k], nu=nu)
        dt, S = 1e-3, 1000
        tr = simulate(np.zeros(9), sample_brownian(0, S, dt, 1), m)
        lam = m.basis.eigenvalues[k]
        expect = (1 - np.exp(-2 * lam * S * dt)) / (2 * lam)
        for mat in (assemble_forward(tr), assemble_adjoint(tr)):
            assert abs(mat.hat[k, k] - expect) <= 2 * dt * expect
            off = mat.hat.copy()
            off[k, k] = 0
            assert not off.any()

    def test_discrete_sum_is_exact(self):
        """With N = 0 the matrix is the right-point Riemann sum, exactly."""
        m = linear_model(9, [4], s=1.0)
        dt, S = 1e-2, 150
        tr = simulate(np.zeros(9), sample_brownian(0, S, dt, 1), m)
        lam = m.basis.eigenvalues[4]
        riemann = dt * np.sum(np.exp(-2 * lam * dt * np.arange(S)))
        assert assemble_forward(tr).hat[4, 4] == pytest.approx(lam**2 * riemann, rel=1e-12)

    @pytest.mark.parametrize("s", [0.0, 1.0])
    def test_forward_adjoint_agree(self, s):
        m = gl_model(M=16, s=s)
        tr = simulate(0.3 * np.ones(16), sample_brownian(4, 500, 1e-3, m.d), m)
        a, b = assemble_forward(tr, 100, 500), assemble_adjoint(tr, 100, 500)
        assert np.linalg.norm(a.hat - b.hat) <= 1e-8 * np.linalg.norm(a.hat)
        assert np.array_equal(a.hat, a.hat.T)
        assert a.is_psd() and b.is_psd()

    def test_quadratic_form_matches_adjoint_sum(self):
        from spdelab.flows import backward_adjoint

        m = gl_model(M=10, s=1.0)
        tr = simulate(np.zeros(10), sample_brownian(2, 200, 1e-3, m.d), m)
        phi = np.random.default_rng(0).standard_normal(10)
        K = backward_adjoint(m, tr.states, tr.dt, 0, 200, phi, record=True)
        direct = tr.dt * np.sum(m.basis.inner(K[1:, None, :], m.G[None], m.s) ** 2)
        assert assemble_forward(tr).quad(phi) == pytest.approx(direct, rel=1e-10)

    def test_operator_is_self_adjoint_in_Hs(self):
        m = gl_model(M=10, s=1.0)
        tr = simulate(np.zeros(10), sample_brownian(2, 200, 1e-3, m.d), m)
        op = assemble_forward(tr).operator()
        rng = np.random.default_rng(1)
        a, b = rng.standard_normal((2, 10))
        assert m.basis.inner(op @ a, b, 1.0) == pytest.approx(m.basis.inner(a, op @ b, 1.0), rel=1e-10)


class TestConeMin:
    def test_diagonal_example(self):
        M = np.diag([1.0, 0.0])
        assert cone_min(M, ConeSpec((0,), 0.5)) == pytest.approx(0.25, abs=1e-12)
        assert brute_force_2x2(M, 0.5) == pytest.approx(0.25, abs=1e-8)

    def test_identity_projection_gives_lambda_min(self):
        rng = np.random.default_rng(0)
        for _ in range(20):
            M = random_psd(rng, 7)
            val = cone_min(M, ConeSpec(tuple(range(7)), rng.uniform(0.1, 0.9)))
            assert abs(val - np.linalg.eigvalsh(M)[0]) <= 1e-8 * max(1.0, np.trace(M))

    def test_isotropic(self):
        for idx in ((0,), (1, 3), (0, 1, 2, 3, 4)):
            assert cone_min(np.eye(5), ConeSpec(idx, 0.3)) == pytest.approx(1.0, abs=1e-12)

    def test_duality_gap_random(self):
        rng = np.random.default_rng(1)
        for _ in range(100):
            n = int(rng.integers(2, 12))
            M = random_psd(rng, n, int(rng.integers(1, n + 1)))
            idx = tuple(rng.choice(n, int(rng.integers(1, n + 1)), replace=False))
            r = cone_min_full(M, ConeSpec(idx, rng.uniform(0.05, 0.95)))
            assert r.gap <= 1e-6 * max(abs(r.value), 1e-8 * np.linalg.eigvalsh(M)[-1])

    def test_brute_force_2x2(self):
        rng = np.random.default_rng(2)
        for _ in range(20):
            M = random_psd(rng, 2)
            a = rng.uniform(0.1, 0.9)
            assert abs(cone_min(M, ConeSpec((0,), a)) - brute_force_2x2(M, a)) <= 1e-4

    @given(st.integers(0, 2**31), st.floats(0.05, 0.9), st.floats(0.01, 0.09))
    @settings(max_examples=40, deadline=None)
    def test_monotone_in_alpha(self, seed, a, da):
        rng = np.random.default_rng(seed)
        M = random_psd(rng, 6, 3)
        small = cone_min(M, ConeSpec((0, 2), a))
        large = cone_min(M, ConeSpec((0, 2), min(a + da, 0.99)))
        assert large >= small - 1e-10 * np.trace(M)

    def test_feasible_minimiser(self):
        rng = np.random.default_rng(3)
        M = random_psd(rng, 8, 4)
        cone = ConeSpec((1, 5), 0.6)
        r = cone_min_full(M, cone)
        assert np.linalg.norm(r.x) == pytest.approx(1.0)
        assert np.linalg.norm(r.x[[1, 5]]) >= 0.6 - 1e-12
        assert r.x @ M @ r.x == pytest.approx(r.value, rel=1e-12)

    def test_rejects_non_psd(self):
        with pytest.raises(ValueError):
            cone_min(np.diag([1.0, -1.0]), ConeSpec((0,), 0.5))

    def test_invalid_alpha(self):
        with pytest.raises(ValueError):
            ConeSpec((0,), 1.0)

    def test_empty_projection(self):
        assert cone_min(np.eye(3), ConeSpec((), 0.5)) == np.inf


class TestRegularizedInverse:
    def test_examples(self):
        v = np.array([1.0, -2.0, 3.0])
        assert np.allclose(regularized_inverse_apply(np.zeros((3, 3)), 1.0, v), v)
        assert np.allclose(regularized_inverse_apply(np.eye(3), 1.0, v), v / 2)
        with pytest.raises(ValueError):
            regularized_inverse_apply(np.eye(3), 0.0, v)

    def test_residual(self):
        # beta >= 1e-4 keeps the residual evaluation itself above round-off
        rng = np.random.default_rng(4)
        for _ in range(50):
            M = random_psd(rng, 10, 4)
            v = rng.standard_normal(10)
            beta = 10 ** rng.uniform(-4, 0)
            x = regularized_inverse_apply(M, beta, v)
            assert np.linalg.norm(M @ x + beta * x - v) <= 1e-10 * np.linalg.norm(v)

    def test_operator_form(self):
        rng = np.random.default_rng(5)
        scale = np.linspace(1, 5, 6)
        mat = MalliavinMatrix(random_psd(rng, 6), scale)
        v = rng.standard_normal(6)
        x = regularized_inverse_apply(mat, 0.1, v)
        assert np.allclose(mat.operator() @ x + 0.1 * x, v)


class TestRemainderCertificate:
    def test_random_instances(self):
        rng = np.random.default_rng(6)
        for _ in range(100):
            n = int(rng.integers(3, 10))
            M = random_psd(rng, n, int(rng.integers(1, n + 1)))
            idx = tuple(rng.choice(n, int(rng.integers(1, n)), replace=False))
            r = projected_remainder_bound(M, idx, rng.uniform(0.05, 0.9), 10 ** rng.uniform(-6, 0))
            assert r["norm"] <= r["bound"] + 1e-8


class TestTail:
    def test_no_noise_tail_is_one(self):
        m = gl_model(M=8, g_list=())
        out = tail_estimate(m, np.zeros(8), ConeSpec((0, 1), 0.5), [1e-3, 1e-1], 5, 0, T=0.1, dt=1e-2)
        assert [row["rate"] for row in out["table"]] == [1.0, 1.0]

    def test_linear_spanning_noise(self):
        idx = [0, 1, 2]
        m = linear_model(9, idx)
        T, dt, alpha = 1.0, 1e-2, 0.5
        lam = m.basis.eigenvalues[idx]
        S = int(T / dt)
        diag = dt * np.array([np.sum(np.exp(-2 * l * dt * np.arange(S))) for l in lam])
        floor = alpha**2 * diag.min()
        out = tail_estimate(m, np.zeros(9), ConeSpec(tuple(idx), alpha), [0.5 * floor, 0.999 * floor, 1.001 * floor],
                            4, 0, T=T, dt=dt)
        assert np.allclose(out["values"], floor, rtol=1e-10)
        assert [row["rate"] for row in out["table"]] == [0.0, 0.0, 1.0]
        assert out["table"][0]["upper95"] > 0
