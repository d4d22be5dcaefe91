"""Forced stationary profiles and the large-forcing control experiment.

The control drives the solution onto the critical point ``v0`` of the
energy ``E(v) = <v, L v>/2 - int F(v) - eps^-gamma <g, v>`` (``F' = f``) by
switching on the forcing ``eps^-gamma g`` during ``[1, 2]``, then lets both
``u`` and the target flow freely for one more unit of time.

Everything is done on the Galerkin truncation. Fields of size
``eps^(-gamma/3)`` are handled in the rescaled variable
``w = eps^(gamma/3) v``, in which the energy reads
``E_w(w) = delta <w, L w>/2 - int F_w(w) - <g, w>`` with
``delta = eps^(2 gamma/3)`` and ``F_w' = f_w``,
``f_w(w) = sum_j f_j eps^((3-j) gamma/3) w^j``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.integrate import solve_ivp
from scipy.optimize import minimize

from .model import ModelSpec, NumericalAbort
from .spectral import Basis, DN_matrix, LocalPolynomial, eval_N, interpolation_norm, multiplication_matrix

FORCING_CEILING = 1e150


class ProfileNotConverged(NumericalAbort):
    """The energy descent stopped above the residual tolerance."""


def forcing_scale(eps: float, gamma: float, g_norm: float = 1.0) -> float:
    """``eps^-gamma``, rejected when it or the resulting fields overflow."""
    if not (eps > 0 and np.isfinite(eps)):
        raise ValueError(f"eps must be positive, got {eps!r}")
    if gamma <= 0:
        raise ValueError("gamma must be positive")
    with np.errstate(over="ignore"):
        a = float(np.float64(eps) ** -gamma)
    if not np.isfinite(a) or a * max(g_norm, 1.0) > FORCING_CEILING:
        raise NumericalAbort(f"forcing eps^-gamma = {eps}^-{gamma} overflows (ceiling {FORCING_CEILING:.0e})")
    return a


def _scaled_poly(f: LocalPolynomial, scale: float) -> LocalPolynomial:
    """``f_w(w) = f(scale w) / scale^3``."""
    return LocalPolynomial(tuple(c * scale ** (j - 3) for j, c in enumerate(f.coefficients)))


class _Energy:
    """Galerkin energy in the rescaled variable with exact quadrature."""

    def __init__(self, basis: Basis, f: LocalPolynomial, g: np.ndarray, delta: float):
        self.basis, self.f, self.g, self.delta = basis, f, g, delta
        self.F = LocalPolynomial(tuple(np.polynomial.polynomial.polyint(np.array(f.coefficients))))
        self.P = basis.grid_size(max(f.degree, 1))
        self.lam = basis.eigenvalues

    def __call__(self, w):
        vals = self.F(self.basis.to_grid(w, self.P))
        return 0.5 * self.delta * np.dot(w * self.lam, w) - np.sum(vals) * 2 * np.pi / self.P - self.g @ w

    def grad(self, w):
        return self.delta * self.lam * w - eval_N(self.basis, w, self.f) - self.g

    def hess(self, w):
        return self.delta * np.diag(self.lam) - DN_matrix(self.basis, w, self.f)


@dataclass(frozen=True, eq=False)
class ProfileResult:
    """Critical point ``v0`` of the forced energy and its diagnostics.

    ``residual`` is the ``L^2`` norm of ``-L v0 + N(v0) + eps^-gamma g``;
    ``tolerance`` is the bound it was required to meet.
    """

    v0: np.ndarray
    scale: float
    residual: float
    tolerance: float
    energy: float
    min_curvature: float
    iterations: int
    starts: int

    @property
    def w0(self) -> np.ndarray:
        return self.v0 / self.scale


def _descend(E: _Energy, w0: np.ndarray, gtol: float, max_iter: int):
    """Trust-region Newton descent followed by plain Newton polishing."""
    res = minimize(E, w0, jac=E.grad, hess=E.hess, method="trust-exact",
                   options={"gtol": gtol, "maxiter": max_iter})
    w, it = res.x, res.nit
    gn = np.linalg.norm(E.grad(w))
    for _ in range(20):
        if gn <= 1e-3 * gtol:
            break
        try:
            step = np.linalg.solve(E.hess(w), E.grad(w))
        except np.linalg.LinAlgError:
            break
        trial = w - step
        tn = np.linalg.norm(E.grad(trial))
        if not tn < gn:
            break
        w, gn, it = trial, tn, it + 1
    return w, gn, it


def stationary_profile(
    model: ModelSpec,
    g,
    eps: float,
    gamma: float,
    init=None,
    restarts: int = 3,
    seed: int = 0,
    rtol: float = 1e-8,
    atol: float = 1e-10,
    max_iter: int = 500,
) -> ProfileResult:
    """Critical point of the forced energy by descent on its Galerkin truncation.

    Parameters
    ----------
    g : array (M,)
        Forcing profile in coefficients.
    init : array (M,), optional
        Starting field in the original units. When given, only this start
        is used. Otherwise the descent starts from the pointwise cube root
        of the forcing and from ``restarts`` random fields, and the lowest
        energy critical point wins.
    rtol, atol : float
        Required residual ``<= rtol eps^-gamma ||g|| + atol``.

    Raises
    ------
    ProfileNotConverged
        No start reached the tolerance; the message carries the best residual.
    """
    if not model.f.is_dissipative():
        raise ValueError("the energy is coercive only for a dissipative reaction term")
    basis = model.basis
    g = np.asarray(g, dtype=float)
    if g.shape != (basis.M,):
        raise ValueError("forcing has the wrong shape")
    gn = float(np.linalg.norm(g))
    a = forcing_scale(eps, gamma, gn)
    scale = a ** (1.0 / 3.0)
    E = _Energy(basis, _scaled_poly(model.f, scale), g, scale**-2)
    tol = rtol * a * gn + atol
    gtol_w = tol / a

    if init is not None:
        starts = [np.asarray(init, dtype=float) / scale]
    else:
        P = E.P
        starts = [basis.from_grid(np.cbrt(basis.to_grid(g, P) / -model.f.leading), P)]
        rng = np.random.default_rng(seed)
        amp = max(np.abs(starts[0]).max(), 1.0)
        starts += [amp * rng.standard_normal(basis.M) / (1.0 + basis.wavenumbers) for _ in range(restarts)]

    best = None
    total = 0
    for w_start in starts:
        w, res_w, it = _descend(E, w_start, 0.1 * gtol_w, max_iter)
        total += it
        cand = (res_w <= gtol_w, -E(w) if res_w <= gtol_w else -np.inf, -res_w, w)
        if best is None or cand[:3] > best[:3]:
            best = cand
    ok, _, neg_res, w = best
    residual = -neg_res * a
    if not ok:
        raise ProfileNotConverged(
            f"energy descent stopped at residual {residual:.3e} > tolerance {tol:.3e} "
            f"after {total} iterations from {len(starts)} starts"
        )
    w = np.array(w)
    curv = float(np.linalg.eigvalsh(E.hess(w))[0]) * scale**2
    return ProfileResult(scale * w, scale, residual, tol, float(E(w)) * scale**4,
                         curv, total, len(starts))


def stationary_residual(model: ModelSpec, v0, g, eps: float, gamma: float) -> float:
    """``L^2`` norm of ``-L v0 + N(v0) + eps^-gamma g``, evaluated directly."""
    basis = model.basis
    r = -basis.eigenvalues * v0 + eval_N(basis, v0, model.f) + forcing_scale(eps, gamma) * np.asarray(g)
    return float(np.linalg.norm(r))


# -- controlled flow ----------------------------------------------------------

_RADAU = {"method": "Radau", "rtol": 1e-9}


def _log_time_solve(rhs, jac, z0, t: float, t0: float, atol: float, what: str, dense: bool = False):
    """Integrate ``z' = rhs(z)`` over ``[0, t]`` in the clock ``s = log(t0 + time)``.

    Large data collapse under the cubic on the time scale ``t0 ~ 1/|z0|^2``
    and then decay like a power of time, which is smooth in log time.
    ``rhs`` and ``jac`` receive ``(s, z)``.
    """
    sol = solve_ivp(
        lambda s, z: np.exp(s) * rhs(s, z), (np.log(t0), np.log(t0 + t)), z0,
        jac=lambda s, z: np.exp(s) * jac(s, z), atol=atol, dense_output=dense, **_RADAU,
    )
    if sol.status != 0:
        raise NumericalAbort(f"{what} failed: {sol.message}")
    return sol if dense else sol.y[:, -1]


def _collapse_time(model: ModelSpec, u0) -> float:
    P = model.basis.grid_size(max(model.f.degree, 1))
    slope = np.abs(model.f.derivative()(model.basis.to_grid(u0, P))).max()
    return 1.0 / max(slope, 1.0)


def _free_flow(model: ModelSpec, u0, t: float, atol: float = 1e-10, dense: bool = False):
    """Unforced deterministic flow ``u' = -L u + N(u)`` for time ``t``.

    With ``dense`` the solver result is returned; its clock is
    ``log(t0 + time)`` with ``t0 = sol.t[0]`` exponentiated.
    """
    basis, f = model.basis, model.f
    lam = basis.eigenvalues
    u0 = np.asarray(u0, dtype=float)
    return _log_time_solve(
        lambda _, u: -lam * u + eval_N(basis, u, f),
        lambda _, u: DN_matrix(basis, u, f) - np.diag(lam),
        u0, t, _collapse_time(model, u0), atol, "free flow", dense,
    )


def _tangent_flow(model: ModelSpec, v0, xi0, t: float, path=None):
    """Free flow from ``v0`` and its linearisation applied to ``xi0``.

    The base flow is solved first (or taken from ``path``, a dense result of
    :func:`_free_flow`); the tangent equation along it is linear.
    """
    basis, f = model.basis, model.f
    lam = basis.eigenvalues
    P = basis.grid_size(max(f.degree, 1))
    df = f.derivative()
    path = _free_flow(model, v0, t, dense=True) if path is None else path

    def A(s):
        return multiplication_matrix(basis, df(basis.to_grid(path.sol(s), P))) - np.diag(lam)

    t0 = float(np.exp(path.t[0]))
    xi = _log_time_solve(lambda s, x: A(s) @ x, lambda s, _: A(s), np.asarray(xi0, dtype=float),
                         t, t0, 1e-14, "tangent flow")
    return path.y[:, -1], xi


def _relax(E: _Energy, w0: np.ndarray, e0: np.ndarray, tau: float, linear_tol: float):
    """Deviation ``e = w - w0`` under the forced rescaled flow for time ``tau``.

    The nonlinear flow is integrated until ``||e|| <= linear_tol``; the rest
    is exact propagation by the Hessian. Returns ``(log_norm, direction,
    tau_nonlinear, slowest_rate)`` with ``e(tau) = exp(log_norm) direction``
    and ``||direction|| = 1``.
    """
    basis, f = E.basis, E.f
    lam, d = E.lam, E.delta
    P = E.P

    def rhs(_, e):
        # f(w0 + e) - f(w0) without cancellation of the large parts
        x = basis.to_grid(w0, P)
        y = basis.to_grid(e, P)
        df = np.zeros_like(y)
        for j, c in enumerate(f.coefficients):
            if j and c:
                # (x + y)^j - x^j = sum_{i>=1} binom(j, i) x^(j-i) y^i
                df += c * sum(float(math.comb(j, i)) * x ** (j - i) * y**i for i in range(1, j + 1))
        return -d * lam * e + basis.from_grid(df, P)

    def jac(_, e):
        return DN_matrix(basis, w0 + e, f) - d * np.diag(lam)

    def small(_, e):
        return np.linalg.norm(e) - linear_tol

    small.terminal, small.direction = True, -1
    e0 = np.asarray(e0, dtype=float)
    t_lin = 0.0
    if np.linalg.norm(e0) > linear_tol:
        sol = solve_ivp(rhs, (0.0, tau), e0, jac=jac, events=small, atol=1e-3 * linear_tol, **_RADAU)
        if sol.status < 0:
            raise NumericalAbort(f"forced relaxation failed: {sol.message}")
        e0 = sol.y[:, -1]
        t_lin = float(sol.t[-1])
    mu, Q = np.linalg.eigh(E.hess(w0))
    c = Q.T @ e0
    rest = tau - t_lin
    with np.errstate(divide="ignore"):
        a = np.log(np.abs(c)) - mu * rest
    amax = np.max(a)
    if not np.isfinite(amax):
        return -np.inf, np.zeros_like(e0), t_lin, float(mu[0])
    vec = Q @ (np.sign(c) * np.exp(a - amax))
    n = np.linalg.norm(vec)
    return amax + np.log(n), vec / n, t_lin, float(mu[0])


@dataclass(frozen=True, eq=False)
class ReachRow:
    eps: float
    u0_norm: float
    log10_error: float
    error: float
    deviation_at_1: float
    log10_deviation_at_2: float
    target_norm: float
    relaxation_rate: float
    profile_residual: float

    def to_dict(self) -> dict:
        return dict(self.__dict__)


def reachability_experiment(
    model: ModelSpec,
    u0_list,
    g,
    eps_list,
    gamma: float,
    linear_tol: float = 1e-9,
) -> dict:
    """Drive every ``u0`` towards the target ``v`` with the three-phase control.

    Phases: free flow on ``[0, 1]``; forcing ``eps^-gamma g`` on ``[1, 2]``;
    free flow on ``[2, 3]``. The target ``v`` is the free flow for unit
    time from ``v0 = stationary_profile(g, eps, gamma)``. All distances are
    ``H^1`` norms (interpolation exponent 1/2).

    The final distance is astronomically small for moderate ``eps``, so it
    is carried as a logarithm: the forced phase is integrated until the
    deviation from ``v0`` is linear, then propagated exactly by the energy
    Hessian, and the last phase uses the linearised flow along ``v``.

    Returns
    -------
    dict
        ``table`` (rows per ``(eps, u0)``), ``decreasing`` (final error
        strictly decreasing as ``eps`` decreases, for every ``u0``), and
        ``u0_spread`` (per ``eps``, ratio of largest to smallest error).
    """
    basis = model.basis
    g = np.asarray(g, dtype=float)
    eps_list = [float(e) for e in eps_list]
    for e in eps_list:
        forcing_scale(e, gamma, float(np.linalg.norm(g)))
    u0_list = [np.asarray(u, dtype=float) for u in u0_list]
    u1_list = [_free_flow(model, u, 1.0) for u in u0_list]
    h1 = lambda x: float(interpolation_norm(basis, x, 0.5))

    rows = []
    for eps in eps_list:
        prof = stationary_profile(model, g, eps, gamma)
        a = forcing_scale(eps, gamma)
        sc = prof.scale
        E = _Energy(basis, _scaled_poly(model.f, sc), g, sc**-2)
        path = _free_flow(model, prof.v0, 1.0, dense=True)
        target = path.y[:, -1]
        for u0, u1 in zip(u0_list, u1_list):
            log_e2, dir2, _, mu = _relax(E, prof.w0, (u1 - prof.v0) / sc, sc**2, linear_tol)
            log_e2 += np.log(sc)
            if np.isfinite(log_e2) and log_e2 > np.log(linear_tol * sc):
                # still nonlinear at the end of the forcing window
                u2 = prof.v0 + np.exp(log_e2) * dir2
                diff = _free_flow(model, u2, 1.0) - target
                log_err = np.log(h1(diff))
            elif np.isfinite(log_e2):
                _, xi = _tangent_flow(model, prof.v0, dir2, 1.0, path)
                log_err = log_e2 + np.log(h1(xi))
            else:
                log_err = -np.inf
            rows.append(ReachRow(
                eps, h1(u0), float(log_err / np.log(10)), float(np.exp(log_err)),
                h1(u1 - prof.v0), float(log_e2 / np.log(10)), h1(target),
                float(mu * sc**2), prof.residual / (a * np.linalg.norm(g)),
            ))

    n0 = len(u0_list)
    by_u0 = [[r.log10_error for r in rows[i::n0]] for i in range(n0)]
    order = np.argsort(eps_list)[::-1]
    decreasing = all(np.all(np.diff(np.array(v)[order]) < 0) for v in by_u0)
    spread = {}
    for k, eps in enumerate(eps_list):
        vals = [r.log10_error for r in rows[k * n0:(k + 1) * n0]]
        spread[eps] = float(10 ** (max(vals) - min(vals)))
    return {
        "table": [r.to_dict() for r in rows],
        "decreasing": bool(decreasing),
        "u0_spread": spread,
        "gamma": gamma,
    }


def scaled_initial_conditions(basis: Basis, norms, seed: int = 0) -> list[np.ndarray]:
    """One smooth random profile rescaled to each requested ``H^1`` norm."""
    rng = np.random.default_rng(seed)
    prof = rng.standard_normal(basis.M) / (1.0 + basis.wavenumbers) ** 2
    prof /= interpolation_norm(basis, prof, 0.5)
    return [float(n) * prof for n in norms]
