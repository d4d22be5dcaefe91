"""Polynomial vector fields on the truncated basis, their Lie brackets and
Taylor coefficients, and the closure of constant forcing directions under
the leading multilinear part of the nonlinearity.

A vector field is an expression tree over the state ``u``: constant fields,
Galerkin-projected pointwise products, the linear part ``-L`` and linear
combinations. Derivatives follow the product rule on the tree, so they are
the exact derivatives of the truncated vector fields.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from itertools import combinations_with_replacement

import numpy as np

from .malliavin import ConeSpec, cone_min
from .multiindex import MultiIndex
from .spectral import Basis, LocalPolynomial, eval_multilinear

COLLINEAR_TOL = 1e-10
SPAN_TOL = 1e-9
RANK_RTOL = 1e-8


# ---------------------------------------------------------------- expressions


class _Expr:
    __slots__ = ()


@dataclass(frozen=True, eq=False)
class _State(_Expr):
    pass


@dataclass(frozen=True, eq=False)
class _Const(_Expr):
    value: np.ndarray
    tag: str


@dataclass(frozen=True, eq=False)
class _Prod(_Expr):
    factors: tuple


@dataclass(frozen=True, eq=False)
class _Lin(_Expr):
    child: _Expr


@dataclass(frozen=True, eq=False)
class _Sum(_Expr):
    terms: tuple  # of (coefficient, expression)


_ZERO = _Sum(())
_STATE = _State()


def _is_zero(e: _Expr) -> bool:
    return isinstance(e, _Sum) and not e.terms


def _sum(pairs) -> _Expr:
    flat = []
    for c, e in pairs:
        if c == 0 or _is_zero(e):
            continue
        if isinstance(e, _Sum):
            flat.extend((c * c2, e2) for c2, e2 in e.terms)
        else:
            flat.append((c, e))
    if len(flat) == 1 and flat[0][0] == 1:
        return flat[0][1]
    return _Sum(tuple(flat))


def _prod(factors) -> _Expr:
    factors = tuple(factors)
    if any(_is_zero(f) for f in factors):
        return _ZERO
    return _Prod(factors)


def _lin(child: _Expr) -> _Expr:
    return _ZERO if _is_zero(child) else _Lin(child)


def _degree(e: _Expr) -> int:
    if isinstance(e, _State):
        return 1
    if isinstance(e, _Const):
        return 0
    if isinstance(e, _Prod):
        return sum(_degree(f) for f in e.factors)
    if isinstance(e, _Lin):
        return _degree(e.child)
    return max((_degree(t) for _, t in e.terms), default=-1)


def _derive(e: _Expr, v: _Expr) -> _Expr:
    """Directional derivative ``DE(u) v(u)`` as a new expression."""
    if isinstance(e, _State):
        return v
    if isinstance(e, _Const):
        return _ZERO
    if isinstance(e, _Prod):
        terms = []
        for i, f in enumerate(e.factors):
            df = _derive(f, v)
            if not _is_zero(df):
                terms.append((1.0, _prod(e.factors[:i] + (df,) + e.factors[i + 1:])))
        return _sum(terms)
    if isinstance(e, _Lin):
        return _lin(_derive(e.child, v))
    return _sum((c, _derive(t, v)) for c, t in e.terms)


def _evaluate(e: _Expr, basis: Basis, u: np.ndarray, cache: dict) -> np.ndarray:
    key = id(e)
    if key in cache:
        return cache[key]
    if isinstance(e, _State):
        out = u
    elif isinstance(e, _Const):
        out = e.value
    elif isinstance(e, _Prod):
        vals = [_evaluate(f, basis, u, cache) for f in e.factors]
        P = basis.grid_size(len(vals))
        grid = basis.to_grid(vals[0], P)
        for v in vals[1:]:
            grid = grid * basis.to_grid(v, P)
        out = basis.from_grid(grid, P)
    elif isinstance(e, _Lin):
        out = -basis.eigenvalues * _evaluate(e.child, basis, u, cache)
    else:
        out = np.zeros(basis.M)
        for c, t in e.terms:
            out = out + c * _evaluate(t, basis, u, cache)
    cache[key] = out
    return out


def _describe(e: _Expr) -> str:
    if isinstance(e, _State):
        return "u"
    if isinstance(e, _Const):
        return e.tag
    if isinstance(e, _Prod):
        return "*".join(_describe(f) for f in e.factors)
    if isinstance(e, _Lin):
        return f"-L({_describe(e.child)})"
    if not e.terms:
        return "0"
    return " + ".join(f"{c:g}*({_describe(t)})" for c, t in e.terms)


# ---------------------------------------------------------------- vector fields


@dataclass(frozen=True, eq=False)
class PolyVectorField:
    """Polynomial vector field ``u -> P(u)`` on a truncated basis.

    Build fields with :meth:`state`, :meth:`constant`, :meth:`product`,
    :meth:`linear` and arithmetic; call the field on a coefficient vector to
    evaluate it.
    """

    basis: Basis
    expr: _Expr = field(repr=False)

    @classmethod
    def zero(cls, basis: Basis) -> "PolyVectorField":
        return cls(basis, _ZERO)

    @classmethod
    def state(cls, basis: Basis) -> "PolyVectorField":
        return cls(basis, _STATE)

    @classmethod
    def constant(cls, basis: Basis, value, tag: str = "g") -> "PolyVectorField":
        value = np.array(value, dtype=float)
        if value.shape != (basis.M,):
            raise ValueError("constant field has the wrong shape")
        value.setflags(write=False)
        return cls(basis, _Const(value, tag))

    @staticmethod
    def product(*fields: "PolyVectorField") -> "PolyVectorField":
        """Galerkin projection of the pointwise product."""
        basis = _common_basis(fields)
        return PolyVectorField(basis, _prod(f.expr for f in fields))

    def linear(self) -> "PolyVectorField":
        """``-L`` applied to this field."""
        return PolyVectorField(self.basis, _lin(self.expr))

    @classmethod
    def drift(cls, basis: Basis, f: LocalPolynomial) -> "PolyVectorField":
        """``F(u) = -L u + N(u)`` for the local polynomial ``f``."""
        return cls.state(basis).linear() + cls.nonlinearity(basis, f)

    @classmethod
    def nonlinearity(cls, basis: Basis, f: LocalPolynomial) -> "PolyVectorField":
        u = cls.state(basis)
        out = cls.zero(basis)
        for m, c in enumerate(f.coefficients):
            if c == 0:
                continue
            if m == 0:
                term = cls.constant(basis, eval_multilinear(basis, [], LocalPolynomial((1.0,))), "1")  # function 1
            else:
                term = cls.product(*([u] * m))
            out = out + c * term
        return out

    @property
    def degree(self) -> int:
        """Polynomial degree (``-1`` for the zero field)."""
        return _degree(self.expr)

    def is_zero(self) -> bool:
        return _is_zero(self.expr)

    def __call__(self, u) -> np.ndarray:
        u = np.asarray(u, dtype=float)
        return np.array(_evaluate(self.expr, self.basis, u, {}), dtype=float)

    def derivative(self, direction: "PolyVectorField") -> "PolyVectorField":
        """The field ``u -> DP(u) direction(u)``."""
        _common_basis((self, direction))
        return PolyVectorField(self.basis, _derive(self.expr, direction.expr))

    def __add__(self, other: "PolyVectorField") -> "PolyVectorField":
        _common_basis((self, other))
        return PolyVectorField(self.basis, _sum([(1.0, self.expr), (1.0, other.expr)]))

    def __sub__(self, other: "PolyVectorField") -> "PolyVectorField":
        _common_basis((self, other))
        return PolyVectorField(self.basis, _sum([(1.0, self.expr), (-1.0, other.expr)]))

    def __rmul__(self, c: float) -> "PolyVectorField":
        return PolyVectorField(self.basis, _sum([(float(c), self.expr)]))

    def __neg__(self) -> "PolyVectorField":
        return -1.0 * self

    def describe(self) -> str:
        return _describe(self.expr)


def _common_basis(fields) -> Basis:
    fields = tuple(fields)
    if not fields:
        raise ValueError("at least one field is required")
    b = fields[0].basis
    if any(f.basis is not b and (f.basis.M != b.M or not np.array_equal(f.basis.eigenvalues, b.eigenvalues))
           for f in fields):
        raise ValueError("fields live on different bases")
    return b


def lie_bracket(P: PolyVectorField, Q: PolyVectorField) -> PolyVectorField:
    """``[P, Q](u) = DQ(u) P(u) - DP(u) Q(u)``."""
    return Q.derivative(P) - P.derivative(Q)


def taylor_coefficient(Q: PolyVectorField, alpha: MultiIndex, g_list) -> PolyVectorField:
    """``Q_alpha = D^{|alpha|} Q (g_{alpha_1}, ..., g_{alpha_l}) / alpha!``.

    ``g_list`` holds constant fields (arrays or constant PolyVectorFields);
    ``alpha`` indexes into it. ``Q_alpha = 0`` when ``|alpha| > deg Q``.
    """
    alpha = alpha if isinstance(alpha, MultiIndex) else MultiIndex(tuple(alpha))
    if len(alpha) > Q.degree:
        return PolyVectorField.zero(Q.basis)
    gs = [g if isinstance(g, PolyVectorField) else PolyVectorField.constant(Q.basis, g, f"g{i}")
          for i, g in enumerate(g_list)]
    out = Q
    for k in alpha:
        out = out.derivative(gs[k])
    return (1.0 / alpha.factorial()) * out if len(alpha) else out


# ---------------------------------------------------------------- constant closure


class ClosureCapExceeded(RuntimeError):
    """The number of candidate products exceeded the configured limit."""


@dataclass
class BracketSet:
    """Unit-norm constant fields with their construction history.

    ``parents[i]`` is ``None`` for a forcing direction, otherwise the indices
    of the earlier members whose product (divided by its norm) gives field i.
    """

    basis: Basis
    fields: list = field(default_factory=list)
    tags: list = field(default_factory=list)
    parents: list = field(default_factory=list)
    depths: list = field(default_factory=list)
    depth: int = 1
    degree: int = 3
    candidates: int = 0

    def __len__(self) -> int:
        return len(self.fields)

    def matrix(self) -> np.ndarray:
        return np.array(self.fields).reshape(len(self.fields), self.basis.M)

    def reevaluate(self, i: int, generators=None, _memo=None) -> np.ndarray:
        """Rebuild field ``i`` from the forcing directions through its tag
        history (bitwise equal to the stored field)."""
        memo = {} if _memo is None else _memo
        if i in memo:
            return memo[i]
        if self.parents[i] is None:
            if generators is None:
                out = self.fields[i]
            else:
                out = _normalise(np.asarray(generators[self.tags[i]], dtype=float))
        else:
            args = [self.reevaluate(j, generators, memo) for j in self.parents[i]]
            out = _normalise(_leading_product(self.basis, args))
        memo[i] = out
        return out

    def report(self, indices=None) -> dict:
        rows = []
        for i, h in enumerate(self.fields):
            row = {"tag": self.tags[i], "depth": self.depths[i]}
            if indices is not None:
                row["projection_norm"] = float(np.linalg.norm(np.asarray(h)[list(indices)]))
            rows.append(row)
        out = {"depth": self.depth, "size": len(self), "candidates": self.candidates, "fields": rows}
        if indices is not None:
            rank, smin = span_rank(self, indices)
            out.update(rank=rank, sigma_min=smin, projection_size=len(indices))
        return out

    def to_json(self, indices=None) -> str:
        return json.dumps(self.report(indices), indent=2, sort_keys=True)


def _normalise(v: np.ndarray) -> np.ndarray:
    return v / np.linalg.norm(v)


def _leading_product(basis: Basis, args) -> np.ndarray:
    # unit coefficient: signs and constant factors do not change the span
    return eval_multilinear(basis, args, LocalPolynomial((0.0,) * len(args) + (1.0,)))


def generate_constant_set(
    basis: Basis,
    g_list,
    depth: int,
    degree: int = 3,
    names=None,
    max_candidates: int = 200_000,
    prune: str = "span",
) -> BracketSet:
    """Close the forcing directions under ``(h_1..h_m) -> N_m(h_1..h_m)``.

    Depth 1 is the forcing set itself; each further level adds the projected
    ``m``-fold products of members of the previous level. Candidates that are
    collinear with a member (cosine above ``1 - 1e-10``) are dropped; with
    ``prune="span"`` (default) so are candidates already in the span, which
    leaves the span of every later level unchanged by multilinearity.

    Raises
    ------
    ClosureCapExceeded
        If a level would evaluate more than ``max_candidates`` products.
    """
    if depth < 1:
        raise ValueError("depth must be at least 1")
    if prune not in ("span", "collinear"):
        raise ValueError("prune must be 'span' or 'collinear'")
    if degree < 1:
        raise ValueError("degree must be positive")
    g_list = [np.asarray(g, dtype=float) for g in g_list]
    names = list(names) if names is not None else [f"g{i}" for i in range(len(g_list))]
    out = BracketSet(basis, depth=depth, degree=degree)
    ortho = np.zeros((0, basis.M))

    def admit(v, tag, parents, level):
        nonlocal ortho
        nv = np.linalg.norm(v)
        if nv <= 1e-12:
            return
        unit = v / nv
        if out.fields and np.max(np.abs(out.matrix() @ unit)) > 1 - COLLINEAR_TOL:
            return
        r = unit
        for _ in range(2):  # Gram-Schmidt with one re-orthogonalisation pass
            r = r - ortho.T @ (ortho @ r)
        nr = np.linalg.norm(r)
        if prune == "span" and nr <= SPAN_TOL:
            return
        if nr > SPAN_TOL:
            ortho = np.vstack([ortho, r / nr])
        out.fields.append(unit)
        out.tags.append(tag)
        out.parents.append(parents)
        out.depths.append(level)

    for g, name in zip(g_list, names):
        admit(g, name, None, 1)
    fresh_from = 0
    for level in range(2, depth + 1):
        n = len(out.fields)
        combos = [c for c in combinations_with_replacement(range(n), degree) if c[-1] >= fresh_from]
        out.candidates += len(combos)
        if len(combos) > max_candidates:
            raise ClosureCapExceeded(
                f"level {level} needs {len(combos)} products (limit {max_candidates}); "
                f"set size {n}, degree {degree}")
        for c in combos:
            v = _leading_product(basis, [out.fields[j] for j in c])
            tag = "N(" + ",".join(out.tags[j] for j in c) + ")"
            admit(v, tag, c, level)
        fresh_from = n
    return out


def span_rank(bset: BracketSet, indices) -> tuple[int, float]:
    """Rank and smallest singular value of the set restricted to ``indices``.

    Rows are the restrictions of the set's fields; the rank counts singular
    values above ``1e-8 * sigma_max``.
    """
    indices = list(indices)
    if not len(bset) or not indices:
        return 0, 0.0
    sv = np.linalg.svd(bset.matrix()[:, indices], compute_uv=False)
    if sv[0] == 0:
        return 0, 0.0
    return int(np.sum(sv > RANK_RTOL * sv[0])), float(sv[-1])


def quadratic_form_QN(bset: BracketSet, phi, s: float = 0.0) -> float:
    """``sum_Q <phi, Q>^2`` over the set (``H_s`` inner product)."""
    if not len(bset):
        return 0.0
    return float(np.sum(bset.basis.inner(bset.matrix(), np.asarray(phi)[None, :], s) ** 2))


def quadratic_form_matrix(bset: BracketSet) -> np.ndarray:
    """Matrix of :func:`quadratic_form_QN` at ``s = 0``."""
    A = bset.matrix()
    return A.T @ A


def cone_certificate(bset: BracketSet, indices, alpha: float) -> float:
    """Lower bound of ``<phi, Q_N phi>`` over unit ``phi`` whose projection
    onto ``indices`` has norm at least ``alpha``; positive when the set has
    full rank on those indices."""
    return cone_min(quadratic_form_matrix(bset), ConeSpec(tuple(indices), alpha))
