from __future__ import annotations

import numpy as np
import pytest

from spdelab.brackets import (
    BracketSet,
    ClosureCapExceeded,
    PolyVectorField,
    cone_certificate,
    generate_constant_set,
    lie_bracket,
    quadratic_form_QN,
    span_rank,
    taylor_coefficient,
)
from spdelab.models import forcing_field, gl_model
from spdelab.multiindex import MultiIndex, multi_indices
from spdelab.spectral import Basis, LocalPolynomial

from trig_oracle import GEN_1, GEN_COS, GEN_SIN, INV2, rank_mod_p, trig_closure, trig_mul


def test_trig_oracle_identities():
    # cos^2 = 1/2 + cos(2x)/2 and sin*cos = sin(2x)/2
    c2, s2 = trig_mul(GEN_COS, GEN_COS)
    assert list(c2[:3]) == [INV2, 0, INV2] and not s2.any()
    c, s = trig_mul(GEN_SIN, GEN_COS)
    assert not c.any() and list(s[:3]) == [0, 0, INV2]


# ------------------------------------------------------------- vector fields


def random_field(basis, rng, degree=3):
    u = PolyVectorField.state(basis)
    cs = [PolyVectorField.constant(basis, rng.standard_normal(basis.M), f"c{i}") for i in range(3)]
    out = 0.7 * cs[0] + PolyVectorField.product(u, cs[1]).linear()
    if degree >= 2:
        out = out + 0.3 * PolyVectorField.product(u, u, cs[2])
    if degree >= 3:
        out = out - PolyVectorField.product(u, u, u)
    return out


@pytest.fixture(scope="module")
def small():
    b = Basis(9, nu=0.7)
    rng = np.random.default_rng(0)
    gs = [forcing_field(b, n) for n in ("1", "cos", "sin")]
    return b, rng, gs


class TestLieBracket:
    def test_constants_commute(self, small):
        b, rng, gs = small
        P, Q = (PolyVectorField.constant(b, g) for g in gs[:2])
        br = lie_bracket(P, Q)
        assert br.is_zero() and not br(rng.standard_normal(9)).any()

    def test_constant_with_cube(self, small):
        b, rng, gs = small
        u = PolyVectorField.state(b)
        g = PolyVectorField.constant(b, gs[1])
        br = lie_bracket(g, PolyVectorField.product(u, u, u))
        x = rng.standard_normal(9)
        expect = 3 * PolyVectorField.product(u, u, g)(x)
        assert np.allclose(br(x), expect, atol=1e-13)
        assert br.degree == 2

    def test_antisymmetry(self, small):
        b, rng, _ = small
        P, Q = random_field(b, rng), random_field(b, rng, 2)
        x = rng.standard_normal(9)
        assert np.allclose(lie_bracket(P, Q)(x), -lie_bracket(Q, P)(x), atol=1e-12, rtol=0)

    def test_degree_bound(self, small):
        b, rng, _ = small
        P, Q = random_field(b, rng), random_field(b, rng, 2)
        assert lie_bracket(P, Q).degree <= P.degree + Q.degree - 1

    def test_drift_matches_model(self):
        from spdelab.spectral import eval_N

        m = gl_model(M=12)
        F = PolyVectorField.drift(m.basis, m.f)
        x = np.random.default_rng(1).standard_normal(12)
        assert np.allclose(F(x), -m.basis.eigenvalues * x + eval_N(m.basis, x, m.f), atol=1e-12)

    def test_derivative_matches_finite_difference(self, small):
        b, rng, _ = small
        P, V = random_field(b, rng), random_field(b, rng, 2)
        x = rng.standard_normal(9)
        h = 1e-5
        fd = (P(x + h * V(x)) - P(x - h * V(x))) / (2 * h)
        assert np.allclose(P.derivative(V)(x), fd, rtol=1e-6, atol=1e-7)


class TestTaylor:
    def test_conventions(self, small):
        b, rng, gs = small
        Q = random_field(b, rng)
        x = rng.standard_normal(9)
        assert np.array_equal(taylor_coefficient(Q, MultiIndex(), gs)(x), Q(x))
        assert taylor_coefficient(Q, MultiIndex.of(0, 1, 2, 0), gs).is_zero()

    def test_cube_second_coefficient(self, small):
        """Pointwise oracle from expanding (u + a g_k + b g_j)^3."""
        b, rng, gs = small
        u = PolyVectorField.state(b)
        Q = PolyVectorField.product(u, u, u)
        x = rng.standard_normal(9)
        gk, gj = (PolyVectorField.constant(b, g) for g in gs[1:])
        # distinct labels: coefficient of a*b is 6 u g_k g_j
        assert np.allclose(taylor_coefficient(Q, MultiIndex.of(1, 2), gs)(x),
                           6 * PolyVectorField.product(u, gk, gj)(x), atol=1e-13)
        # repeated label: coefficient of a^2 is 3 u g_k^2
        assert np.allclose(taylor_coefficient(Q, MultiIndex.of(1, 1), gs)(x),
                           3 * PolyVectorField.product(u, gk, gk)(x), atol=1e-13)

    @pytest.mark.parametrize("seed", range(5))
    def test_expansion_identity(self, small, seed):
        b, _, gs = small
        rng = np.random.default_rng(seed)
        Q = random_field(b, rng)
        v, w = rng.standard_normal(9), rng.standard_normal(3)
        lhs = Q(v + w @ np.array(gs))
        rhs = sum(taylor_coefficient(Q, a, gs)(v) * np.prod(w[list(a.items)]) for a in multi_indices(3, Q.degree))
        assert np.linalg.norm(lhs - rhs) <= 1e-10 * np.linalg.norm(lhs)


class TestJacobiIdentity:
    """D_{g_k}[Q_a, F_s] = (a(k)+1)[Q_{a+k}, F_s] + (s(k)+1)[Q_a, F_{s+k}]."""

    @pytest.mark.parametrize("seed", range(6))
    def test_multiplicity_form_holds(self, small, seed):
        b, _, gs = small
        rng = np.random.default_rng(100 + seed)
        Q = random_field(b, rng)
        F = PolyVectorField.drift(b, LocalPolynomial((0.0, 1.5, 0.0, -1.0)))
        a = MultiIndex(tuple(rng.integers(0, 3, rng.integers(0, 2))))
        s = MultiIndex(tuple(rng.integers(0, 3, rng.integers(0, 2))))
        k = int(rng.integers(0, 3))
        gk = PolyVectorField.constant(b, gs[k])
        x = rng.standard_normal(9)
        lhs = lie_bracket(taylor_coefficient(Q, a, gs), taylor_coefficient(F, s, gs)).derivative(gk)(x)
        rhs = ((a.count(k) + 1) * lie_bracket(taylor_coefficient(Q, a | k, gs), taylor_coefficient(F, s, gs))
               + (s.count(k) + 1) * lie_bracket(taylor_coefficient(Q, a, gs), taylor_coefficient(F, s | k, gs)))(x)
        assert np.linalg.norm(lhs - rhs) <= 1e-10 * max(np.linalg.norm(lhs), 1.0)

    def test_length_form_differs(self, small):
        """Weighting by |a|+1 instead of a(k)+1 breaks the identity when the
        new label is not already in the multi-index."""
        b, rng, gs = small
        u = PolyVectorField.state(b)
        Q = PolyVectorField.product(u, u, u)
        F = PolyVectorField.drift(b, LocalPolynomial((0.0, 1.0, 0.0, -1.0)))
        a, s, k = MultiIndex.of(1), MultiIndex(), 2
        gk = PolyVectorField.constant(b, gs[k])
        x = rng.standard_normal(9)
        lhs = lie_bracket(taylor_coefficient(Q, a, gs), F).derivative(gk)(x)
        t1 = lie_bracket(taylor_coefficient(Q, a | k, gs), F)(x)
        t2 = lie_bracket(taylor_coefficient(Q, a, gs), taylor_coefficient(F, s | k, gs))(x)
        assert np.allclose(lhs, t1 + t2, atol=1e-12)
        assert not np.allclose(lhs, (len(a) + 1) * t1 + (len(s) + 1) * t2, atol=1e-6)


# ------------------------------------------------------------- closure


def gl_generators(M):
    b = Basis(M)
    return b, [forcing_field(b, n) for n in ("1", "cos", "sin")]


class TestClosure:
    def test_constant_generator_is_closed(self):
        b, gs = gl_generators(17)
        bs = generate_constant_set(b, gs[:1], depth=4)
        assert len(bs) == 1

    def test_cosine_depth_two(self):
        b, gs = gl_generators(17)
        bs = generate_constant_set(b, gs[:2], depth=2)
        support = [0, b.index(1), b.index(2), b.index(3)]
        A = bs.matrix()
        assert span_rank(bs, support)[0] == 4 == len(bs)
        assert np.abs(np.delete(A, support, axis=1)).max() < 1e-14
        oracle = trig_closure([GEN_1, GEN_COS], 17, 2)
        assert rank_mod_p(oracle) == 4 and not np.delete(np.array(oracle), support, axis=1).any()

    def test_gl_depth_three_full_rank_against_oracle(self):
        M = 32
        b, gs = gl_generators(M)
        bs = generate_constant_set(b, gs, depth=3)
        oracle = trig_closure([GEN_1, GEN_COS, GEN_SIN], M, 3)
        rank, smin = span_rank(bs, b.modes_up_to(8))
        assert rank == 17 and smin > 0
        assert rank_mod_p([o[b.modes_up_to(8)] for o in oracle]) == 17
        # the whole family of low-mode projections agrees with the exact closure
        for k in range(b.kmax + 1):
            idx = b.modes_up_to(k)
            assert span_rank(bs, idx)[0] == rank_mod_p([o[idx] for o in oracle])

    def test_spans_grow_with_depth(self):
        b, gs = gl_generators(32)
        ranks = [span_rank(generate_constant_set(b, gs, d), range(32))[0] for d in (1, 2, 3)]
        assert ranks == [3, 7, 19]

    def test_permutation_invariant_span(self):
        b, gs = gl_generators(24)
        a = generate_constant_set(b, gs, 3).matrix()
        c = generate_constant_set(b, gs[::-1], 3).matrix()
        Pa = np.linalg.pinv(a) @ a
        Pc = np.linalg.pinv(c) @ c
        assert np.allclose(Pa, Pc, atol=1e-9)

    def test_reevaluation_from_tags_is_exact(self):
        b, gs = gl_generators(20)
        bs = generate_constant_set(b, gs, 3, names=["1", "cos", "sin"])
        gens = dict(zip(["1", "cos", "sin"], gs))
        for i in range(len(bs)):
            assert np.array_equal(bs.reevaluate(i, gens), bs.fields[i])
        assert bs.tags[3].startswith("N(")

    def test_collinear_mode_keeps_same_span(self):
        b, gs = gl_generators(20)
        full = generate_constant_set(b, gs, 3, prune="collinear")
        lean = generate_constant_set(b, gs, 3)
        assert len(full) > len(lean)
        assert span_rank(full, range(20))[0] == span_rank(lean, range(20))[0]
        cos = np.abs(full.matrix() @ full.matrix().T - np.eye(len(full)))
        assert cos.max() <= 1 - 1e-10

    def test_cap(self):
        b, gs = gl_generators(20)
        with pytest.raises(ClosureCapExceeded):
            generate_constant_set(b, gs, 3, max_candidates=5)

    def test_report(self):
        import json

        b, gs = gl_generators(20)
        rep = json.loads(generate_constant_set(b, gs, 2).to_json(b.modes_up_to(2)))
        assert rep["rank"] == 5 and rep["fields"][0]["depth"] == 1


class TestSpanRankAndQuadraticForm:
    def test_empty(self):
        assert span_rank(BracketSet(Basis(5)), [0, 1]) == (0, 0.0)

    def test_orthonormal(self):
        b = Basis(7)
        idx = [0, 2, 3]
        bs = BracketSet(b, fields=[b.unit(i) for i in idx], tags=["a", "b", "c"],
                        parents=[None] * 3, depths=[1] * 3)
        assert span_rank(bs, idx) == (3, 1.0)

    def test_quadratic_form(self):
        b = Basis(7)
        bs = BracketSet(b, fields=[b.unit(1)], tags=["e1"], parents=[None], depths=[1])
        assert quadratic_form_QN(bs, b.unit(1)) == 1.0
        assert quadratic_form_QN(bs, b.unit(3)) == 0.0

    def test_cone_certificate(self):
        b, gs = gl_generators(24)
        full = generate_constant_set(b, gs, 3)
        assert cone_certificate(full, b.modes_up_to(2), 0.5) > 0
        poor = generate_constant_set(b, gs[:1], 3)
        assert cone_certificate(poor, b.modes_up_to(1), 0.5) == pytest.approx(0.0, abs=1e-12)


class TestMultiIndex:
    def test_counting_laws(self):
        a, c = MultiIndex.of(2, 0, 2), MultiIndex.of(1, 2)
        u = a | c
        assert len(u) == len(a) + len(c)
        assert u.contains(a) and u.contains(c) and not a.contains(c)
        assert a.factorial() == 2 and u.count(2) == 3
        assert MultiIndex.of(3, 1) == MultiIndex.of(1, 3)
