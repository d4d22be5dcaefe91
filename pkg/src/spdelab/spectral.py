"""Real Fourier basis on the circle, the diagonal operator L and polynomial
nonlinearities evaluated by dealiased collocation.

Fields are plain ``numpy`` arrays of coefficients with shape ``(..., M)``;
leading axes are batch axes. Index 0 is the constant mode, then the pairs
``cos(kx), sin(kx)`` for ``k = 1, 2, ...``, normalised in
``L^2(S^1, dx)`` with ``S^1 = [0, 2 pi)``: ``e_0 = 1/sqrt(2 pi)`` and
``e_{2k-1} = cos(kx)/sqrt(pi)``, ``e_{2k} = sin(kx)/sqrt(pi)``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

SQRT2 = np.sqrt(2.0)
# basis function = _UNIT * (1, sqrt2 cos, sqrt2 sin)
_UNIT = 1.0 / np.sqrt(2.0 * np.pi)

CONST, COS, SIN = 0, 1, 2


def _frozen(a: np.ndarray) -> np.ndarray:
    a = np.array(a)
    a.setflags(write=False)
    return a


def mode_labels(M: int) -> tuple[np.ndarray, np.ndarray]:
    """Wavenumber and parity (CONST, COS, SIN) of each basis index."""
    idx = np.arange(M)
    k = (idx + 1) // 2
    parity = np.where(idx == 0, CONST, np.where(idx % 2 == 1, COS, SIN))
    return k, parity


@lru_cache(maxsize=64)
def _eval_matrix(M: int, P: int) -> np.ndarray:
    x = 2.0 * np.pi * np.arange(P) / P
    k, parity = mode_labels(M)
    E = np.empty((P, M))
    E[:, parity == CONST] = 1.0
    E[:, parity == COS] = SQRT2 * np.cos(np.outer(x, k[parity == COS]))
    E[:, parity == SIN] = SQRT2 * np.sin(np.outer(x, k[parity == SIN]))
    return _frozen(E * _UNIT)


@lru_cache(maxsize=64)
def _product_tables(M: int):
    """Gather tables turning cosine/sine moments of a weight into the matrix
    ``D[a, b] = int w e_a e_b dx`` through product-to-sum identities."""
    k, par = mode_labels(M)
    ia1 = np.zeros((M, M), int)
    ia2 = np.zeros((M, M), int)
    ib1 = np.zeros((M, M), int)
    ib2 = np.zeros((M, M), int)
    ca1 = np.zeros((M, M))
    ca2 = np.zeros((M, M))
    cb1 = np.zeros((M, M))
    cb2 = np.zeros((M, M))
    for a in range(M):
        for b in range(M):
            pa, pb, ka, kb = par[a], par[b], k[a], k[b]
            if pa == CONST and pb == CONST:
                ca1[a, b] = 1.0
            elif CONST in (pa, pb):
                kk = ka + kb
                if COS in (pa, pb):
                    ia1[a, b], ca1[a, b] = kk, SQRT2
                else:
                    ib1[a, b], cb1[a, b] = kk, SQRT2
            elif pa == COS and pb == COS:
                ia1[a, b], ca1[a, b] = abs(ka - kb), 1.0
                ia2[a, b], ca2[a, b] = ka + kb, 1.0
            elif pa == SIN and pb == SIN:
                ia1[a, b], ca1[a, b] = abs(ka - kb), 1.0
                ia2[a, b], ca2[a, b] = ka + kb, -1.0
            else:
                # cos(jx) sin(kx) = [sin((k+j)x) + sin((k-j)x)] / 2
                j, kk = (ka, kb) if pa == COS else (kb, ka)
                ib1[a, b], cb1[a, b] = j + kk, 1.0
                ib2[a, b], cb2[a, b] = abs(kk - j), float(np.sign(kk - j))
    return tuple(_frozen(t) for t in (ia1, ia2, ib1, ib2, ca1, ca2, cb1, cb2))


@dataclass(frozen=True, eq=False)
class Basis:
    """Truncated eigenbasis of ``L = nu (c - d^2/dx^2)`` on the circle.

    Parameters
    ----------
    M : int
        Number of retained modes.
    nu : float
        Diffusion coefficient.
    shift : float
        The constant ``c``; ``c = 1/nu`` gives ``lambda_min = 1``.
    """

    M: int
    nu: float = 1.0
    shift: float | None = None
    eigenvalues: np.ndarray = field(init=False, repr=False)
    wavenumbers: np.ndarray = field(init=False, repr=False)
    parity: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        if self.M < 1:
            raise ValueError("M must be positive")
        if self.nu <= 0:
            raise ValueError("nu must be positive")
        c = 1.0 / self.nu if self.shift is None else float(self.shift)
        object.__setattr__(self, "shift", c)
        k, parity = mode_labels(self.M)
        lam = self.nu * (k.astype(float) ** 2 + c)
        if lam.min() < 1.0 - 1e-12:
            raise ValueError("shift too small: need every eigenvalue >= 1")
        object.__setattr__(self, "eigenvalues", _frozen(lam))
        object.__setattr__(self, "wavenumbers", _frozen(k))
        object.__setattr__(self, "parity", _frozen(parity))

    @property
    def kmax(self) -> int:
        return int(self.wavenumbers[-1])

    def grid_size(self, degree: int) -> int:
        """Collocation points making degree-``degree`` Galerkin products exact."""
        return max(degree + 1, 4) * self.kmax + 1

    def grid(self, P: int) -> np.ndarray:
        return 2.0 * np.pi * np.arange(P) / P

    def eval_matrix(self, P: int) -> np.ndarray:
        return _eval_matrix(self.M, P)

    def to_grid(self, u: np.ndarray, P: int) -> np.ndarray:
        return np.asarray(u) @ self.eval_matrix(P).T

    def from_grid(self, values: np.ndarray, P: int) -> np.ndarray:
        """Galerkin projection of grid values (exact for band-limited data)."""
        return np.asarray(values) @ self.eval_matrix(P) * (2.0 * np.pi / P)

    def project(self, fn, P: int | None = None) -> np.ndarray:
        """Coefficients of a callable ``fn(x)`` by trapezoidal quadrature."""
        P = P or max(self.grid_size(3), 64)
        return self.from_grid(fn(self.grid(P)), P)

    def index(self, k: int, kind: str = "cos") -> int:
        """Basis index of ``cos(kx)`` / ``sin(kx)`` (``k = 0`` is the constant)."""
        if k == 0:
            return 0
        i = 2 * k - 1 if kind == "cos" else 2 * k
        if i >= self.M:
            raise IndexError(f"mode {kind}({k}x) not retained with M={self.M}")
        return i

    def modes_up_to(self, k: int) -> list[int]:
        """Indices of all modes with wavenumber at most ``k``."""
        return [int(i) for i in np.flatnonzero(self.wavenumbers <= k)]

    def weights(self, s: float) -> np.ndarray:
        """Diagonal of the ``H_s`` Gram matrix, ``lambda^(2s)``."""
        return self.eigenvalues ** (2.0 * s)

    def inner(self, u, v, s: float = 0.0) -> np.ndarray:
        return np.sum(np.asarray(u) * np.asarray(v) * self.weights(s), axis=-1)

    def unit(self, i: int) -> np.ndarray:
        e = np.zeros(self.M)
        e[i] = 1.0
        return e


def interpolation_norm(basis: Basis, u, gamma: float) -> np.ndarray:
    """``(sum_k lambda_k^(2 gamma) c_k^2)^(1/2)``, vectorised over batch axes."""
    u = np.asarray(u, dtype=float)
    x = basis.eigenvalues**gamma * u
    return np.linalg.norm(x) if x.ndim == 1 else np.linalg.norm(x, axis=-1)


def apply_semigroup(basis: Basis, u, t: float) -> np.ndarray:
    """``exp(-L t) u``."""
    if t < 0:
        raise ValueError("semigroup time must be nonnegative")
    return np.asarray(u, dtype=float) * np.exp(-basis.eigenvalues * t)


@dataclass(frozen=True, eq=False)
class LocalPolynomial:
    """Scalar reaction polynomial ``f(v) = sum_j f_j v^j``.

    ``s`` is the exponent of the ambient space ``H_s`` whose inner product
    defines adjoints.
    """

    coefficients: tuple[float, ...]
    s: float = 0.0

    def __post_init__(self):
        c = tuple(float(x) for x in self.coefficients)
        if not c:
            c = (0.0,)
        if not all(np.isfinite(c)):
            raise ValueError("polynomial coefficients must be finite")
        object.__setattr__(self, "coefficients", c)

    @property
    def degree(self) -> int:
        return len(self.coefficients) - 1

    @property
    def leading(self) -> float:
        return self.coefficients[-1]

    def is_dissipative(self) -> bool:
        """Odd degree with negative leading coefficient."""
        return self.degree % 2 == 1 and self.leading < 0

    def derivative(self, order: int = 1) -> "LocalPolynomial":
        c = np.polynomial.polynomial.polyder(np.array(self.coefficients), order)
        return LocalPolynomial(tuple(c) if len(c) else (0.0,), self.s)

    def __call__(self, v):
        return np.polynomial.polynomial.polyval(v, np.array(self.coefficients))

    def is_zero(self) -> bool:
        return not any(self.coefficients)


def _P(basis: Basis, f: LocalPolynomial) -> int:
    return basis.grid_size(max(f.degree, 1))


def eval_N(basis: Basis, u, f: LocalPolynomial) -> np.ndarray:
    """Galerkin projection of ``x -> f(u(x))``."""
    P = _P(basis, f)
    return basis.from_grid(f(basis.to_grid(u, P)), P)


def eval_DN(basis: Basis, u, v, f: LocalPolynomial) -> np.ndarray:
    """Galerkin projection of ``f'(u) v``."""
    P = _P(basis, f)
    w = f.derivative()(basis.to_grid(u, P))
    return basis.from_grid(w * basis.to_grid(v, P), P)


def eval_DN_adjoint(basis: Basis, u, v, f: LocalPolynomial, s: float | None = None) -> np.ndarray:
    """Adjoint of ``eval_DN(u, .)`` in ``H_s``: ``L^(-2s) P[f'(u) L^(2s) v]``."""
    s = f.s if s is None else s
    wts = basis.weights(s)
    return eval_DN(basis, u, np.asarray(v) * wts, f) / wts


def eval_D2N(basis: Basis, u, v, w, f: LocalPolynomial) -> np.ndarray:
    """Galerkin projection of ``f''(u) v w``."""
    P = _P(basis, f)
    g = f.derivative(2)(basis.to_grid(u, P))
    return basis.from_grid(g * (basis.to_grid(v, P) * basis.to_grid(w, P)), P)


def eval_multilinear(basis: Basis, fields, f: LocalPolynomial) -> np.ndarray:
    """Symmetric ``m``-linear part of ``f`` on ``m = len(fields)`` arguments,
    i.e. ``f_m h_1 ... h_m`` projected onto the basis."""
    m = len(fields)
    coeff = f.coefficients[m] if m < len(f.coefficients) else 0.0
    if m == 0:
        # the constant function f_0
        return coeff * np.sqrt(2.0 * np.pi) * basis.unit(0)
    P = basis.grid_size(m)
    # canonical order makes the floating-point product permutation invariant
    fields = sorted((np.asarray(h, dtype=float) for h in fields), key=lambda h: h.tobytes())
    prod = basis.to_grid(fields[0], P)
    for h in fields[1:]:
        prod = prod * basis.to_grid(h, P)
    return coeff * basis.from_grid(prod, P)


def multiplication_matrix(basis: Basis, w_grid: np.ndarray) -> np.ndarray:
    """Galerkin matrix ``D[a, b] = int w e_a e_b dx`` of pointwise
    multiplication by grid values ``w`` (shape ``(..., P)``).

    Exact when ``w`` is band-limited to ``P - 1 - 2 kmax``. Built from the
    real FFT of ``w`` so the batched cost is ``O(P log P + M^2)``.
    """
    w_grid = np.asarray(w_grid, dtype=float)
    P = w_grid.shape[-1]
    K = basis.kmax
    if P // 2 < 2 * K:
        raise ValueError("grid too coarse for the product table")
    wh = np.fft.rfft(w_grid, axis=-1)[..., : 2 * K + 1] / P
    A, B = wh.real, -wh.imag
    ia1, ia2, ib1, ib2, ca1, ca2, cb1, cb2 = _product_tables(basis.M)
    return A[..., ia1] * ca1 + A[..., ia2] * ca2 + B[..., ib1] * cb1 + B[..., ib2] * cb2


def multiplication_matrix_direct(basis: Basis, w_grid: np.ndarray) -> np.ndarray:
    """Same as :func:`multiplication_matrix` by explicit quadrature."""
    w_grid = np.asarray(w_grid, dtype=float)
    P = w_grid.shape[-1]
    E = basis.eval_matrix(P)
    return np.einsum("pa,...p,pb->...ab", E, w_grid, E) * (2.0 * np.pi / P)


def DN_matrix(basis: Basis, u, f: LocalPolynomial) -> np.ndarray:
    """Matrix of ``v -> eval_DN(u, v)`` in coefficient coordinates."""
    P = _P(basis, f)
    return multiplication_matrix(basis, f.derivative()(basis.to_grid(u, P)))
