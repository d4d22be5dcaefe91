"""Malliavin covariance matrices, their cone-restricted minimum and tails.

Matrices are stored in ``H_s``-orthonormal coordinates: with
``Lambda = diag(lambda^s)`` the stored matrix is ``Mhat = Lambda X Lambda``
where ``X = sum_i dt (J_{t_{i+1},t} G^T)(J_{t_{i+1},t} G^T)^T`` in coefficient
coordinates. ``Mhat`` is symmetric PSD and ``<M phi, phi>_s`` equals
``(Lambda phi)^T Mhat (Lambda phi)``. Coordinate projections commute with
``Lambda``, so cones defined by basis indices look the same in both systems.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.linalg import cho_factor, cho_solve, eigh
from scipy.optimize import minimize_scalar

from .flows import adjoint_of, step_matrix
from .integrator import Trajectory, brownian_increments, path_seed, step_factors
from .model import ModelSpec, NumericalAbort
from .spectral import eval_N
from .stats import loglog_slope, tail_table


@dataclass(frozen=True, eq=False)
class MalliavinMatrix:
    """Symmetric PSD matrix in ``H_s``-orthonormal coordinates."""

    hat: np.ndarray
    scale: np.ndarray
    s_idx: int = 0
    t_idx: int = 0
    seed: object = None

    @property
    def M(self) -> int:
        return self.hat.shape[-1]

    def operator(self) -> np.ndarray:
        """Coefficient-coordinate matrix of ``phi -> M phi``."""
        return self.hat * self.scale[None, :] / self.scale[:, None]

    def quad(self, phi) -> float:
        x = self.scale * np.asarray(phi)
        return float(x @ self.hat @ x)

    def eigvalsh(self) -> np.ndarray:
        return np.linalg.eigvalsh(self.hat)

    def is_psd(self, rtol: float = 1e-10) -> bool:
        return bool(self.eigvalsh()[0] >= -rtol * max(np.trace(self.hat), 0.0))


def _finish(hat: np.ndarray) -> np.ndarray:
    return 0.5 * (hat + np.swapaxes(hat, -1, -2))


def _window(traj: Trajectory, s_idx: int, t_idx: int) -> None:
    if s_idx > t_idx:
        raise ValueError("indices out of order")
    if s_idx < 0 or t_idx > traj.S:
        raise IndexError("window outside the trajectory")


def forward_gram(model: ModelSpec, states: np.ndarray, dt: float, s_idx: int, t_idx: int) -> np.ndarray:
    """Coefficient Gram ``X`` via ``X_{j+1} = A_j X_j A_j^T + dt G^T G``; batched."""
    batch = states.shape[:-2]
    X = np.zeros(batch + (model.M, model.M))
    GG = dt * model.G.T @ model.G
    for j in range(s_idx, t_idx):
        A = step_matrix(model, states[..., j, :], dt)
        X = A @ X @ np.swapaxes(A, -1, -2) + GG
    return X


def to_hat(model: ModelSpec, X: np.ndarray) -> np.ndarray:
    lam_s = model.basis.eigenvalues ** model.s
    return _finish(X * lam_s[:, None] * lam_s[None, :])


def assemble_forward(traj: Trajectory, s_idx: int = 0, t_idx: int | None = None) -> MalliavinMatrix:
    """``sum_k sum_i dt (J_{t_{i+1},t} g_k) (x) (J_{t_{i+1},t} g_k)`` by forward recursion."""
    t_idx = traj.S if t_idx is None else t_idx
    _window(traj, s_idx, t_idx)
    model = traj.model
    X = forward_gram(model, traj.states, traj.dt, s_idx, t_idx)
    return MalliavinMatrix(to_hat(model, X), model.basis.eigenvalues**model.s, s_idx, t_idx, traj.path.seed)


def adjoint_hat(model: ModelSpec, states: np.ndarray, dt: float, s_idx: int, t_idx: int) -> np.ndarray:
    """``Mhat[a, b] = sum_i dt <G^* K_{t_{i+1},t} e_a, G^* K_{t_{i+1},t} e_b>``
    from one backward sweep per ``H_s``-orthonormal basis vector."""
    batch = states.shape[:-2]
    lam_s = model.basis.eigenvalues ** model.s
    w = model.weights
    Q = np.broadcast_to(np.diag(1.0 / lam_s), batch + (model.M, model.M)).copy()
    Gw = (model.G * w).T  # <g_k, q>_s = q @ Gw[:, k]
    hat = np.zeros(batch + (model.M, model.M))
    for j in range(t_idx - 1, s_idx - 1, -1):
        R = Q @ Gw
        hat += dt * R @ np.swapaxes(R, -1, -2)
        As = adjoint_of(model, step_matrix(model, states[..., j, :], dt))
        Q = Q @ np.swapaxes(As, -1, -2)
    return _finish(hat)


def assemble_adjoint(traj: Trajectory, s_idx: int = 0, t_idx: int | None = None) -> MalliavinMatrix:
    """Same matrix from ``<M phi, phi> = sum_i dt sum_k <g_k, K_{t_{i+1},t} phi>^2``."""
    t_idx = traj.S if t_idx is None else t_idx
    _window(traj, s_idx, t_idx)
    model = traj.model
    hat = adjoint_hat(model, traj.states, traj.dt, s_idx, t_idx)
    return MalliavinMatrix(hat, model.basis.eigenvalues**model.s, s_idx, t_idx, traj.path.seed)


# ---------------------------------------------------------------------------
# cone-restricted minimum


@dataclass(frozen=True)
class ConeSpec:
    """Unit vectors with ``||Pi x|| >= alpha``; ``Pi`` projects on basis indices."""

    indices: tuple[int, ...]
    alpha: float

    def __post_init__(self):
        if not 0.0 < self.alpha < 1.0:
            raise ValueError("alpha must lie strictly between 0 and 1")
        idx = tuple(sorted(set(int(i) for i in self.indices)))
        object.__setattr__(self, "indices", idx)

    def projector(self, M: int) -> np.ndarray:
        P = np.zeros((M, M))
        P[list(self.indices), list(self.indices)] = 1.0
        return P


@dataclass(frozen=True)
class ConeResult:
    value: float
    dual: float
    mu: float
    x: np.ndarray
    gap: float


def _as_hat(M) -> np.ndarray:
    return np.asarray(M.hat if isinstance(M, MalliavinMatrix) else M, dtype=float)


def _two_dim_min(Mm, Pm, alpha2, w1, w2):
    """Exact minimum of ``x^T M x`` over unit ``x`` in ``span(w1, w2)``
    (orthonormal) subject to ``x^T Pi x >= alpha2``."""
    B = np.stack([w1, w2], axis=1)
    m = B.T @ Mm @ B
    p = B.T @ Pm @ B
    # x(t) = cos t w1 + sin t w2; quadratic forms become a + b cos 2t + c sin 2t
    fa, fb, fc = 0.5 * (m[0, 0] + m[1, 1]), 0.5 * (m[0, 0] - m[1, 1]), m[0, 1]
    qa, qb, qc = 0.5 * (p[0, 0] + p[1, 1]), 0.5 * (p[0, 0] - p[1, 1]), p[0, 1]
    cands = [np.arctan2(-fc, -fb)]  # unconstrained minimiser of f in 2t
    r = np.hypot(qb, qc)
    if r > 0:
        c = (alpha2 - qa) / r
        if abs(c) <= 1.0:
            ph = np.arctan2(qc, qb)
            d = np.arccos(c)
            cands += [ph + d, ph - d]
    best = None
    for th in cands:
        q = qa + qb * np.cos(th) + qc * np.sin(th)
        if q < alpha2 - 1e-13:
            continue
        val = fa + fb * np.cos(th) + fc * np.sin(th)
        if best is None or val < best[0]:
            best = (val, th)
    if best is None:
        return None
    t = 0.5 * best[1]
    x = np.cos(t) * w1 + np.sin(t) * w2
    return float(x @ Mm @ x), x


def _polish(Mm, Pm, alpha2, x, iters=200):
    """Projected gradient on ``{||x|| = 1, x^T Pi x >= alpha2}``."""
    idx = np.diag(Pm) > 0
    best_val = float(x @ Mm @ x)
    best = x
    step = 0.5 / max(np.linalg.norm(Mm, 2), 1e-300)
    for _ in range(iters):
        y = x - step * (Mm @ x)
        y = y / np.linalg.norm(y)
        # restore the constraint by rescaling the two orthogonal parts
        pin = np.linalg.norm(y[idx])
        if pin**2 < alpha2:
            pout = np.linalg.norm(y[~idx])
            if pin == 0:
                break
            y = y.copy()
            y[idx] *= np.sqrt(alpha2) / pin
            if pout > 0:
                y[~idx] *= np.sqrt(1 - alpha2) / pout
        val = float(y @ Mm @ y)
        if val < best_val - 1e-16 * abs(best_val):
            best_val, best = val, y
            x = y
        else:
            step *= 0.5
            if step < 1e-18:
                break
    return best_val, best


def cone_min_full(M, cone: ConeSpec, restarts: int = 0, seed: int = 0, gap_tol: float = 1e-6) -> ConeResult:
    """Minimum of ``<x, M x>`` over unit ``x`` with ``||Pi x||^2 >= alpha^2``.

    The dual ``max_{mu >= 0} lambda_min(M - mu Pi) + mu alpha^2`` is concave
    in ``mu`` and has no gap for a single quadratic constraint. A feasible
    primal point is recovered from the minimising eigenvectors on both sides
    of the dual optimum and optionally polished by projected gradient.
    """
    Mm = _as_hat(M)
    n = Mm.shape[0]
    tr = float(np.trace(Mm))
    evals = np.linalg.eigvalsh(Mm)
    if evals[0] < -1e-10 * max(tr, 0.0) - 1e-300:
        raise ValueError("matrix is not positive semidefinite")
    if not cone.indices:
        return ConeResult(np.inf, np.inf, 0.0, np.zeros(n), 0.0)
    if any(i < 0 or i >= n for i in cone.indices):
        raise IndexError("cone index outside the matrix")
    Pm = cone.projector(n)
    a2 = cone.alpha**2

    def dual(mu):
        return np.linalg.eigvalsh(Mm - mu * Pm)[0] + mu * a2

    mu_max = max(2.0 * tr / a2, 2.0 * tr / (1.0 - a2))
    if mu_max <= 0:
        mu_star = 0.0
    else:
        res = minimize_scalar(lambda m: -dual(m), bounds=(0.0, mu_max), method="bounded",
                              options={"xatol": 1e-13 * mu_max, "maxiter": 500})
        mu_star = float(res.x) if -res.fun > dual(0.0) else 0.0
    dval = float(dual(mu_star))

    # primal recovery
    h = max(1e-9 * mu_max, 1e-15)
    cands = []
    for mu in (mu_star, max(mu_star - h, 0.0), mu_star + h):
        _, V = eigh(Mm - mu * Pm)
        cands.extend([V[:, 0], V[:, 1]] if n > 1 else [V[:, 0]])
    best = None
    for i in range(len(cands)):
        for j in range(i + 1, len(cands)):
            w1 = cands[i]
            w2 = cands[j] - (cands[j] @ w1) * w1
            nw = np.linalg.norm(w2)
            if nw < 1e-8:
                continue
            r = _two_dim_min(Mm, Pm, a2, w1, w2 / nw)
            if r is not None and (best is None or r[0] < best[0]):
                best = r
    if best is None:
        x = np.zeros(n)
        x[cone.indices[0]] = 1.0
        best = (float(Mm[cone.indices[0], cone.indices[0]]), x)
    pval, x = _polish(Mm, Pm, a2, best[1])
    rng = np.random.default_rng(seed)
    for _ in range(restarts):
        z = rng.standard_normal(n)
        z /= np.linalg.norm(z)
        z[list(cone.indices)] += np.sign(z[list(cone.indices)]) + (z[list(cone.indices)] == 0)
        z /= np.linalg.norm(z)
        v, y = _polish(Mm, Pm, a2, z)
        if np.linalg.norm(Pm @ y) ** 2 >= a2 - 1e-12 and v < pval:
            pval, x = v, y
    gap = pval - dval
    scale = max(abs(pval), 1e-8 * max(evals[-1], 0.0), 1e-300)
    if gap > gap_tol * scale:
        raise NumericalAbort(f"cone minimum duality gap {gap:.3e} exceeds tolerance")
    return ConeResult(pval, dval, mu_star, x, gap)


def cone_min(M, cone: ConeSpec, **kw) -> float:
    """Primal value of :func:`cone_min_full`."""
    return cone_min_full(M, cone, **kw).value


def regularized_inverse_apply(M, beta: float, v) -> np.ndarray:
    """Solve ``(M + beta) x = v`` by Cholesky factorisation.

    For a :class:`MalliavinMatrix`, ``v`` and ``x`` are coefficient vectors
    and ``M`` acts as an operator on ``H_s``; a bare array is used as is.
    """
    if not beta > 0:
        raise ValueError("beta must be positive")
    v = np.asarray(v, dtype=float)
    if isinstance(M, MalliavinMatrix):
        c = cho_factor(M.hat + beta * np.eye(M.M))
        flat = (v * M.scale).reshape(-1, M.M)
        return cho_solve(c, flat.T).T.reshape(v.shape) / M.scale
    M = np.asarray(M, dtype=float)
    c = cho_factor(M + beta * np.eye(M.shape[0]))
    return cho_solve(c, v.reshape(-1, M.shape[0]).T).T.reshape(v.shape)


def resolvent_remainder(M, beta: float) -> np.ndarray:
    """``R = beta (beta + M)^{-1}`` in orthonormal coordinates."""
    Mm = _as_hat(M)
    return beta * regularized_inverse_apply(Mm, beta, np.eye(Mm.shape[0]))


def projected_remainder_bound(M, indices, delta: float, beta: float) -> dict:
    """Compare ``||Pi R||`` with ``max(delta, sqrt(beta / gamma))`` where
    ``gamma`` is the cone minimum of ``M`` over ``(Pi, delta)``."""
    Mm = _as_hat(M)
    gamma = cone_min(Mm, ConeSpec(tuple(indices), delta))
    R = resolvent_remainder(Mm, beta)
    lhs = float(np.linalg.norm(R[list(indices), :], 2)) if len(indices) else 0.0
    rhs = max(delta, np.sqrt(beta / gamma)) if gamma > 0 else np.inf
    return {"norm": lhs, "bound": float(rhs), "gamma": float(gamma)}


# ---------------------------------------------------------------------------
# Monte Carlo tail


def ensemble_hat(model: ModelSpec, u0: np.ndarray, increments: np.ndarray, dt: float,
                 ceiling: float = 1e8) -> np.ndarray:
    """Malliavin matrices of a batch of paths, streamed without storing states.

    ``increments`` has shape ``(B, S, d)``; returns ``(B, M, M)``.
    """
    basis, f = model.basis, model.f
    B, S, _ = increments.shape
    E, phi1 = step_factors(basis, dt)
    u = np.broadcast_to(np.asarray(u0, float), (B, model.M)).copy()
    X = np.zeros((B, model.M, model.M))
    GG = dt * model.G.T @ model.G
    noise = increments @ model.G
    for j in range(S):
        A = step_matrix(model, u, dt)
        X = A @ X @ np.swapaxes(A, -1, -2) + GG
        u = E * u + phi1 * eval_N(basis, u, f) + noise[:, j]
        n = np.sqrt(np.max(np.sum(u * u, axis=-1)))
        if not np.isfinite(n) or n > ceiling:
            raise NumericalAbort(f"state norm {n:.3e} exceeded ceiling at step {j}")
    return to_hat(model, X)


def _increments_for(seed: int, samples, S: int, dt: float, d: int) -> np.ndarray:
    return np.stack([brownian_increments(path_seed(seed, i), S, dt, d) for i in samples])


def cone_min_samples(model, u0, cone, n_samples, seed, T=1.0, dt=1e-3, chunk=100, map_fn=map):
    """``cone_min`` of the time-``T`` Malliavin matrix for independent paths.

    ``map_fn`` may be a parallel map; chunks are processed independently
    and concatenated in order, so results do not depend on it.
    """
    S = int(round(T / dt))
    starts = list(range(0, n_samples, chunk))
    jobs = [(model, u0, cone, range(a, min(a + chunk, n_samples)), seed, S, dt) for a in starts]
    out = list(map_fn(_cone_chunk, jobs))
    return np.concatenate(out) if out else np.zeros(0)


def _cone_chunk(job):
    model, u0, cone, samples, seed, S, dt = job
    inc = _increments_for(seed, samples, S, dt, model.d)
    if model.d == 0:
        hats = np.zeros((len(samples), model.M, model.M))
    else:
        hats = ensemble_hat(model, u0, inc, dt)
    return np.array([cone_min(h, cone) for h in hats])


def tail_estimate(model, u0, cone: ConeSpec, eps_grid, n_samples: int, seed: int,
                  T: float = 1.0, dt: float = 1e-3, map_fn=map) -> dict:
    """Empirical ``P(cone_min <= eps)`` with standard errors and log-log slope.

    Cells without events carry the one-sided 95% upper bound instead of a
    point estimate; the slope fit falls back to those bounds (see
    :func:`spdelab.stats.loglog_slope`).
    """
    values = cone_min_samples(model, u0, cone, n_samples, seed, T, dt, map_fn=map_fn)
    eps_grid = np.asarray(eps_grid, dtype=float)
    counts = np.array([(values <= e).sum() for e in eps_grid])
    table = tail_table(eps_grid, counts, n_samples)
    slope = loglog_slope(eps_grid, counts, n_samples)
    return {"table": table, "slope": slope, "values": values}
