"""Wiener polynomials ``Z_A(t) = sum_alpha A_alpha(t) W_alpha(t)`` on ``[0, 1]``.

Tools to evaluate ``Z_A`` on a grid, classify a sample against the
smallness/oscillation dichotomy, estimate how often the oscillation outcome
occurs, and build the interpolation example that shows the exponents are
close to sharp. Channels of ``W`` are labelled ``0..d-1``; a multi-index
``alpha`` selects the monomial ``W_alpha = prod_{j in alpha} W_j`` with
``W_() = 1``.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import partial
from enum import Enum
from typing import Callable, Mapping

import numpy as np
from scipy import sparse
from scipy.optimize import linprog

from .integrator import BrownianPath, brownian_increments, path_seed
from .multiindex import MultiIndex, multi_indices
from .stats import loglog_slope, mean_stderr, power_law_mle, wilson, zero_event_bound

LIP_SLACK = 1e-9


def grid_lipschitz(values: np.ndarray) -> float:
    """Largest difference quotient of samples on the uniform grid of ``[0, 1]``."""
    v = np.asarray(values, dtype=float)
    if v.shape[-1] < 2:
        return 0.0
    return float(np.abs(np.diff(v, axis=-1)).max() * (v.shape[-1] - 1))


@dataclass(frozen=True, eq=False)
class CoefficientProcess:
    """Samples of a coefficient on the uniform grid of ``[0, 1]`` with a
    declared Lipschitz constant that the samples must respect."""

    values: np.ndarray
    lipschitz: float

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        if v.ndim != 1 or v.size < 2:
            raise ValueError("coefficient needs a 1-D grid with at least two points")
        measured = grid_lipschitz(v)
        if measured > self.lipschitz + LIP_SLACK:
            raise ValueError(f"grid Lipschitz constant {measured:.6g} exceeds declared {self.lipschitz:.6g}")
        object.__setattr__(self, "values", v)

    @classmethod
    def constant(cls, value: float, n: int) -> "CoefficientProcess":
        return cls(np.full(n, float(value)), 0.0)

    @classmethod
    def from_values(cls, values) -> "CoefficientProcess":
        """Declare the measured grid Lipschitz constant."""
        v = np.asarray(values, dtype=float)
        return cls(v, grid_lipschitz(v))

    @property
    def n(self) -> int:
        return self.values.size

    def sup(self) -> float:
        return float(np.abs(self.values).max())

    def measured_lipschitz(self) -> float:
        return grid_lipschitz(self.values)

    def __add__(self, other: "CoefficientProcess") -> "CoefficientProcess":
        return CoefficientProcess(self.values + other.values, self.lipschitz + other.lipschitz)

    def __rmul__(self, c: float) -> "CoefficientProcess":
        return CoefficientProcess(c * self.values, abs(c) * self.lipschitz)


Coefficients = Mapping[MultiIndex, CoefficientProcess]


class Outcome(str, Enum):
    PREMISE_FAILS = "PREMISE_FAILS"
    BRANCH_SMALL = "BRANCH_SMALL"
    BRANCH_LIP = "BRANCH_LIP"
    OSC_EVENT = "OSC_EVENT"


def path_values(W) -> np.ndarray:
    """Path samples ``(n, d)`` from a :class:`BrownianPath` on ``[0, 1]`` or an array."""
    if isinstance(W, BrownianPath):
        if not np.isclose(W.T, 1.0):
            raise ValueError("Wiener polynomials live on [0, 1]")
        return W.values()
    W = np.asarray(W, dtype=float)
    return W[:, None] if W.ndim == 1 else W


def unit_interval_path(seed: int, i: int, steps: int, d: int) -> np.ndarray:
    """Values ``(steps + 1, d)`` of the ``i``-th Brownian path of an ensemble on ``[0, 1]``."""
    W = np.zeros((steps + 1, d))
    np.cumsum(brownian_increments(path_seed(seed, i), steps, 1.0 / steps, d), axis=0, out=W[1:])
    return W


def monomial(W: np.ndarray, alpha: MultiIndex) -> np.ndarray:
    """``W_alpha(t) = prod_{j in alpha} W_j(t)`` with ``W_() = 1``."""
    out = np.ones(W.shape[0])
    for j in alpha:
        if j >= W.shape[1]:
            raise ValueError(f"multi-index label {j} exceeds the {W.shape[1]} channels")
        out = out * W[:, j]
    return out


def eval_Z(A: Coefficients, W) -> np.ndarray:
    """Pointwise ``sum_alpha A_alpha(t) W_alpha(t)`` on the grid of ``W``."""
    Wv = path_values(W)
    Z = np.zeros(Wv.shape[0])
    for alpha, a in A.items():
        if a.n != Wv.shape[0]:
            raise ValueError("coefficient and path grids differ")
        Z += a.values * monomial(Wv, alpha)
    return Z


@dataclass(frozen=True)
class DichotomyStats:
    """The three norms the classifier compares against thresholds."""

    sup_Z: float
    sup_A: float
    lip_A: float
    degree: int


def dichotomy_stats(A: Coefficients, W) -> DichotomyStats:
    Z = eval_Z(A, W)
    sup_A = max((a.sup() for a in A.values()), default=0.0)
    lip_A = max((a.measured_lipschitz() for a in A.values()), default=0.0)
    degree = max((len(alpha) for alpha in A), default=0)
    return DichotomyStats(float(np.abs(Z).max()), sup_A, lip_A, degree)


def classify_stats(st: DichotomyStats, eps: float, m: int) -> Outcome:
    """Outcome for precomputed norms (see :func:`dichotomy_classify`)."""
    if not 0.0 < eps <= 1.0:
        raise ValueError("eps must lie in (0, 1]")
    if m < 0:
        raise ValueError("m must be nonnegative")
    if st.degree > m:
        raise ValueError(f"coefficients of order {st.degree} exceed m = {m}")
    if st.sup_Z > eps:
        return Outcome.PREMISE_FAILS
    if st.sup_A <= eps ** (3.0**-m):
        return Outcome.BRANCH_SMALL
    if st.lip_A >= eps ** (-(3.0 ** -(m + 1))):
        return Outcome.BRANCH_LIP
    return Outcome.OSC_EVENT


def dichotomy_classify(A: Coefficients, W, eps: float, m: int) -> Outcome:
    """Classify one sample against the dichotomy.

    ``PREMISE_FAILS`` if ``sup|Z| > eps``; otherwise ``BRANCH_SMALL`` if every
    coefficient is below ``eps^(3^-m)``, ``BRANCH_LIP`` if some coefficient
    has grid Lipschitz constant at least ``eps^(-3^-(m+1))``, and
    ``OSC_EVENT`` (the negligible outcome) if neither holds.
    """
    return classify_stats(dichotomy_stats(A, W), eps, m)


# -- generator families ----------------------------------------------------

Generator = Callable[[int], tuple[dict, np.ndarray]]


def _log_uniform(rng, lo: float, hi: float) -> float:
    return float(np.exp(rng.uniform(np.log(lo), np.log(hi))))


def fit_lipschitz_coefficients(
    W: np.ndarray,
    m: int,
    lip: float,
    anchor: tuple[int, float],
    knots: int = 32,
    stride: int = 16,
) -> dict:
    """Coefficients making ``Z_A`` as small as possible under a Lipschitz cap.

    Every ``A_alpha`` with ``|alpha| <= m`` is piecewise linear on ``knots``
    equal intervals, bounded by 1 in modulus, with slope at most ``lip``. The
    coefficient number ``anchor[0]`` (in :func:`spdelab.multiindex.multi_indices`
    order) is pinned to 1 at the knot nearest ``anchor[1]``. The linear
    program minimises ``max |Z_A|`` over every ``stride``-th grid point, so
    the result is then checked on the full grid it was not fitted to.
    Returns ``{multi-index: values}`` on the grid of ``W``.
    """
    n, d = W.shape
    idx = list(multi_indices(d, m))
    p, K = len(idx), knots + 1
    X = np.stack([monomial(W, a) for a in idx], axis=1)
    t = np.linspace(0.0, 1.0, n)
    hat = np.maximum(0.0, 1.0 - np.abs(t[:, None] - np.linspace(0.0, 1.0, K)[None, :]) * knots)
    rows = np.arange(0, n, stride)
    Zrow = (X[rows][:, :, None] * hat[rows][:, None, :]).reshape(rows.size, p * K)
    ones = np.ones((rows.size, 1))
    slope = sparse.kron(sparse.eye(p), sparse.diags([-knots, knots], [0, 1], shape=(K - 1, K)))
    slope = sparse.hstack([slope, sparse.csr_matrix((p * (K - 1), 1))])
    A_ub = sparse.vstack([
        sparse.csr_matrix(np.hstack([Zrow, -ones])),
        sparse.csr_matrix(np.hstack([-Zrow, -ones])),
        slope,
        -slope,
    ]).tocsr()
    b_ub = np.concatenate([np.zeros(2 * rows.size), np.full(2 * p * (K - 1), lip)])
    cost = np.zeros(p * K + 1)
    cost[-1] = 1.0
    bounds = [(-1.0, 1.0)] * (p * K) + [(0.0, None)]
    j, t0 = anchor
    bounds[int(j) * K + int(round(t0 * knots))] = (1.0, 1.0)
    res = linprog(cost, A_ub=A_ub, b_ub=b_ub, bounds=bounds, method="highs")
    if res.status != 0:
        raise RuntimeError(f"coefficient fit failed: {res.message}")
    vals = res.x[:-1].reshape(p, K) @ hat.T
    return dict(zip(idx, vals))


@dataclass(frozen=True)
class CoefficientFamily:
    """Generator ``i -> (A, W)`` of coefficient/path pairs on ``steps + 1`` points.

    Families:

    ``zero``
        ``A = 0``.
    ``deterministic``
        ``A_() = sin(2 pi t) / 2`` and ``A_alpha = 1/2`` for one top-order
        ``alpha``; independent of the path.
    ``constant``
        Time-constant coefficients on every ``|alpha| <= m``, Gaussian with
        a log-uniform overall scale.
    ``fitted``
        Coefficients from :func:`fit_lipschitz_coefficients` for the sample
        path, with a log-uniform slope cap in ``lip_range``, the best (smallest
        ``sup|Z| / sup|A|``) of ``anchors`` random anchors, and a log-uniform
        overall scale in ``scale_range``. This family looks
        for small ``Z`` with large, slowly varying coefficients, which is
        where the oscillation outcome lives.

    Randomness for sample ``i`` is drawn from ``path_seed(seed, i)``.
    """

    name: str
    m: int
    d: int = 1
    steps: int = 2048
    seed: int = 0
    scale_range: tuple[float, float] = (1e-3, 1.5)
    lip_range: tuple[float, float] = (1.0, 4.0)
    knots: int = 32
    stride: int = 16
    anchors: int = 3

    def __post_init__(self):
        if self.name not in ("zero", "deterministic", "constant", "fitted"):
            raise ValueError(f"unknown coefficient family {self.name!r}")
        if self.name == "deterministic" and self.m < 1:
            raise ValueError("family 'deterministic' needs m >= 1")

    def __call__(self, i: int):
        n = self.steps + 1
        W = unit_interval_path(self.seed, i, self.steps, self.d)
        rng = np.random.default_rng((*path_seed(self.seed, i), 1))
        if self.name == "zero":
            return {}, W
        if self.name == "deterministic":
            t = np.linspace(0.0, 1.0, n)
            return {
                MultiIndex(): CoefficientProcess.from_values(0.5 * np.sin(2 * np.pi * t)),
                MultiIndex((0,) * self.m): CoefficientProcess.constant(0.5, n),
            }, W
        c = _log_uniform(rng, *self.scale_range)
        if self.name == "constant":
            return {
                alpha: CoefficientProcess.constant(c * rng.standard_normal(), n)
                for alpha in multi_indices(self.d, self.m)
            }, W
        lip = _log_uniform(rng, *self.lip_range)
        p = sum(1 for _ in multi_indices(self.d, self.m))
        best, best_ratio = None, np.inf
        for _ in range(self.anchors):
            anchor = (int(rng.integers(p)), float(rng.uniform()))
            fit = fit_lipschitz_coefficients(W, self.m, lip, anchor, self.knots, self.stride)
            sup_A = max(np.abs(v).max() for v in fit.values())
            ratio = np.abs(sum(v * monomial(W, a) for a, v in fit.items())).max() / sup_A
            if ratio < best_ratio:
                best, best_ratio = fit, ratio
        return {alpha: CoefficientProcess.from_values(c * v) for alpha, v in best.items()}, W


def coefficient_family(name: str, m: int, **kwargs) -> CoefficientFamily:
    return CoefficientFamily(name, m, **kwargs)


# -- rates -----------------------------------------------------------------


def required_dt(eps_min: float) -> float:
    """Grid spacing at which sup-norm discretisation stays below ``eps_min / 10``."""
    return eps_min**2 / 100.0


BRIDGE_SIGMAS = 6.0
MAX_REFINE_POINTS = 2_000_000


def certified_sup(A: Coefficients, W, eps_grid, rng, sigmas: float = BRIDGE_SIGMAS) -> float:
    """Supremum of ``|Z_A|`` certified against the thresholds in ``eps_grid``.

    The path is refined between grid points by exact Brownian-bridge
    midpoints (Levy construction), with coefficients interpolated linearly.
    An interval is bisected while ``|Z|`` could still cross the smallest
    threshold ``eps*`` above the running supremum and its length exceeds
    ``required_dt(eps*)``. "Could cross" uses a bound on the excursion of
    each monomial when the path moves at most ``|dW| + sigmas sqrt(h)``
    from an endpoint. Returns the supremum over all sampled points, so the
    decision ``sup|Z| <= eps`` for every ``eps`` in the grid is made at the
    resolution that threshold requires. Raises ``RuntimeError`` when the
    refinement needs more than ``MAX_REFINE_POINTS`` bridge points.
    """
    sup, ok = refine_sup(A, W, eps_grid, rng, sigmas)
    if not ok:
        raise RuntimeError("supremum certification exceeded its refinement budget")
    return sup


def refine_sup(A: Coefficients, W, eps_grid, rng, sigmas: float = BRIDGE_SIGMAS,
               budget: int = MAX_REFINE_POINTS) -> tuple[float, bool]:
    """:func:`certified_sup` that stops at the budget instead of raising.

    Returns ``(sup, certified)``; an uncertified value is the supremum over
    every point sampled before the budget ran out.
    """
    Wv = path_values(W)
    n, d = Wv.shape
    labels = list(A)
    if not labels:
        return 0.0, True
    eps = np.sort(np.asarray(eps_grid, dtype=float))
    coef = np.stack([A[a].values for a in labels], axis=1)
    orders = np.array([len(a) for a in labels])

    def z_of(Wp, Ap):
        return np.sum(Ap * np.stack([monomial(Wp, a) for a in labels], axis=1), axis=1)

    Z = z_of(Wv, coef)
    sup = float(np.abs(Z).max())

    def target(sup):
        above = eps[eps >= sup]
        return float(above[0]) if above.size else None

    def active(Wl, Wr, Al, Ar, Zl, Zr, h, eps_star):
        if eps_star is None or h <= required_dt(eps_star):
            return np.zeros(Zl.shape[0], dtype=bool)
        R = np.maximum(np.abs(Wl).max(axis=1), np.abs(Wr).max(axis=1))
        delta = np.abs(Wr - Wl).max(axis=1) + sigmas * np.sqrt(h)
        reach = (R + delta)[:, None] ** orders[None, :]
        base = R[:, None] ** orders[None, :]
        margin = np.sum(np.maximum(np.abs(Al), np.abs(Ar)) * (reach - base) + np.abs(Ar - Al) * reach, axis=1)
        return np.minimum(np.abs(Zl), np.abs(Zr)) + margin > eps_star

    h = 1.0 / (n - 1)
    Wl, Wr, Al, Ar, Zl, Zr = Wv[:-1], Wv[1:], coef[:-1], coef[1:], Z[:-1], Z[1:]
    keep = active(Wl, Wr, Al, Ar, Zl, Zr, h, target(sup))
    drawn = 0
    while keep.any():
        Wl, Wr, Al, Ar, Zl, Zr = (x[keep] for x in (Wl, Wr, Al, Ar, Zl, Zr))
        k = Zl.shape[0]
        drawn += k
        if drawn > budget:
            return sup, False
        Wm = 0.5 * (Wl + Wr) + 0.5 * np.sqrt(h) * rng.standard_normal((k, d))
        Am = 0.5 * (Al + Ar)
        Zm = z_of(Wm, Am)
        sup = max(sup, float(np.abs(Zm).max()))
        h *= 0.5
        Wl, Wr = np.concatenate([Wl, Wm]), np.concatenate([Wm, Wr])
        Al, Ar = np.concatenate([Al, Am]), np.concatenate([Am, Ar])
        Zl, Zr = np.concatenate([Zl, Zm]), np.concatenate([Zm, Zr])
        keep = active(Wl, Wr, Al, Ar, Zl, Zr, h, target(sup))
    return sup, True


def osc_rate_estimate(
    generator: Generator,
    eps_grid,
    m: int,
    samples: int,
    seed: int = 0,
    resolution: str = "certify",
    map_fn=map,
) -> dict:
    """Frequency of ``OSC_EVENT`` over ``eps_grid``.

    Rates are reported both conditioned on the premise ``sup|Z| <= eps``
    (denominator = premise-holding samples) and unconditioned. Each row has
    Wilson intervals. ``slope`` is the maximum-likelihood power-law exponent
    of the conditioned rate over all cells, empty ones included
    (:func:`spdelab.stats.power_law_mle`); ``slope_fit`` is the least-squares
    fit over cells holding events.

    The supremum of ``Z`` must be resolved to ``required_dt`` of each
    threshold. With ``resolution="certify"`` this is done per sample by
    :func:`certified_sup` (bridge randomness from ``(seed, i)``); with
    ``"grid"`` the generator's own grid must already be fine enough.
    Samples whose certification would exceed ``MAX_REFINE_POINTS`` keep
    their finest sampled supremum and are counted in ``uncertified``.
    """
    if resolution not in ("certify", "grid"):
        raise ValueError("resolution must be 'certify' or 'grid'")
    eps = np.sort(np.asarray(eps_grid, dtype=float))[::-1]
    stats = list(map_fn(partial(_sample_stats, generator, eps, seed, resolution == "certify"), range(samples)))
    n_points = stats[0][1] if stats else 2
    uncertified = sum(not ok for _, _, ok in stats)
    dt = 1.0 / (n_points - 1)
    if resolution == "grid" and dt > required_dt(eps.min()) * (1 + 1e-12):
        raise ValueError(f"grid dt = {dt:.3g} is coarser than required {required_dt(eps.min()):.3g}")
    rows = []
    for e in eps:
        outcomes = [classify_stats(st, e, m) for st, _, _ in stats]
        premise = sum(o is not Outcome.PREMISE_FAILS for o in outcomes)
        osc = sum(o is Outcome.OSC_EVENT for o in outcomes)
        lo, hi = wilson(osc, premise)
        rows.append({
            "eps": float(e),
            "samples": samples,
            "premise": int(premise),
            "osc": int(osc),
            "small": sum(o is Outcome.BRANCH_SMALL for o in outcomes),
            "lip": sum(o is Outcome.BRANCH_LIP for o in outcomes),
            "rate": osc / premise if premise else float("nan"),
            "wilson_low": lo,
            "wilson_high": hi,
            "upper95": zero_event_bound(premise) if osc == 0 else hi,
            "rate_unconditioned": osc / samples,
        })
    ok = [r for r in rows if r["premise"] > 0]
    e_ok, k_ok, n_ok = ([r[key] for r in ok] for key in ("eps", "osc", "premise"))
    return {
        "table": rows,
        "slope": power_law_mle(e_ok, k_ok, n_ok),
        "slope_fit": loglog_slope(e_ok, k_ok, n_ok),
        "m": m,
        "grid_dt": dt,
        "resolution": resolution,
        "uncertified": uncertified,
    }


def _sample_stats(generator: Generator, eps, seed: int, certify: bool, i: int):
    A, W = generator(i)
    st = dichotomy_stats(A, W)
    ok = True
    if certify:
        sup, ok = refine_sup(A, W, eps, np.random.default_rng((*path_seed(seed, i), 2)))
        st = DichotomyStats(sup, st.sup_A, st.lip_A, st.degree)
    return st, W.shape[0], ok


def small_ball_rate(d: int, eps_grid, kappa: float, samples: int, seed: int = 0, steps: int = 4096) -> dict:
    """``P(sup_t |<a, W(t)>| < eps^kappa |a|)`` for random constant directions ``a``.

    By rotation invariance this is the small-ball probability of a scalar
    Brownian motion; the estimate is reported with Wilson intervals and the
    log-log slope of the rate.
    """
    eps = np.sort(np.asarray(eps_grid, dtype=float))[::-1]
    sups = np.empty(samples)
    for i in range(samples):
        W = unit_interval_path(seed, i, steps, d)
        a = np.random.default_rng((*path_seed(seed, i), 1)).standard_normal(d)
        sups[i] = np.abs(W @ a).max() / np.linalg.norm(a)
    counts = [int((sups < e**kappa).sum()) for e in eps]
    rows = []
    for e, k in zip(eps, counts):
        lo, hi = wilson(k, samples)
        rows.append({"eps": float(e), "count": k, "rate": k / samples, "wilson_low": lo, "wilson_high": hi})
    return {
        "table": rows,
        "slope": power_law_mle(eps, counts, samples),
        "slope_fit": loglog_slope(eps, counts, samples),
        "kappa": kappa,
    }


# -- near-sharp example ----------------------------------------------------


@dataclass(frozen=True, eq=False)
class AdversarialExample:
    A: dict
    Z: np.ndarray
    sup_Z: float
    sup_A: float
    lip_A: float
    spacing_steps: int


def interpolate_on_blocks(x: np.ndarray, spacing_steps: int) -> np.ndarray:
    """Piecewise-linear interpolation of grid samples through every
    ``spacing_steps``-th point and the last point. A final interval shorter
    than half the spacing is merged into its neighbour, so every interval
    has between half and one and a half times the spacing."""
    n = x.shape[0]
    spacing = max(int(spacing_steps), 1)
    nodes = np.arange(0, n, spacing)
    if nodes[-1] != n - 1:
        if nodes.size > 1 and 2 * (n - 1 - nodes[-1]) < spacing:
            nodes = nodes[:-1]
        nodes = np.append(nodes, n - 1)
    idx = np.arange(n)
    return np.interp(idx, nodes, x[nodes])


def adversarial_example(theta: float, eps: float, W) -> AdversarialExample:
    """``Z = eps^(1 - theta/2) (W_theta - W)`` written as a Wiener polynomial.

    ``W_theta`` interpolates channel 0 linearly over intervals of length
    ``eps^theta`` (rounded to whole grid steps). The coefficients are
    ``A_() = eps^(1-theta/2) W_theta``, Lipschitz on that scale, and
    ``A_(0) = -eps^(1-theta/2)``.
    """
    if not 0.0 < theta < 1.0 + 1e-12:
        raise ValueError("theta must lie in (0, 1]")
    if not 0.0 < eps <= 1.0:
        raise ValueError("eps must lie in (0, 1]")
    Wv = path_values(W)
    n = Wv.shape[0]
    spacing = max(int(round(eps**theta * (n - 1))), 1)
    amp = eps ** (1.0 - theta / 2.0)
    Wth = interpolate_on_blocks(Wv[:, 0], spacing)
    A = {
        MultiIndex(): CoefficientProcess.from_values(amp * Wth),
        MultiIndex.of(0): CoefficientProcess.constant(-amp, n),
    }
    Z = eval_Z(A, Wv)
    st = dichotomy_stats(A, Wv)
    return AdversarialExample(A, Z, st.sup_Z, st.sup_A, st.lip_A, spacing)


def adversarial_scaling(theta: float, eps_grid, samples: int, seed: int = 0, steps: int = 2**16) -> dict:
    """Mean ``sup|Z|`` and ``Lip(A_())`` of the interpolation example over
    ``eps_grid`` and their fitted power-law exponents in ``eps``."""
    eps = np.asarray(eps_grid, dtype=float)
    supZ = np.empty((samples, eps.size))
    lip = np.empty_like(supZ)
    for i in range(samples):
        W = unit_interval_path(seed, i, steps, 1)
        for j, e in enumerate(eps):
            ex = adversarial_example(theta, e, W)
            supZ[i, j] = ex.sup_Z
            lip[i, j] = ex.A[MultiIndex()].measured_lipschitz()
    mZ, sZ = mean_stderr(supZ)
    mL, sL = mean_stderr(lip)
    x = np.log(eps)
    return {
        "theta": theta,
        "table": [
            {"eps": float(e), "sup_Z": float(a), "sup_Z_se": float(b), "lip_A": float(c), "lip_A_se": float(d)}
            for e, a, b, c, d in zip(eps, mZ, sZ, mL, sL)
        ],
        "sup_Z_exponent": float(np.polyfit(x, np.log(mZ), 1)[0]),
        "lip_exponent": float(np.polyfit(x, np.log(mL), 1)[0]),
    }
