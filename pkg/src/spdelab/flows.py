"""Linearisations of the discrete flow along stored trajectories.

All maps are the exact derivatives (or ``H_s`` adjoints) of the
exponential-Euler step, so that finite differences of :func:`simulate` and
duality identities hold to round-off. With ``A_j = e^{-L dt} + phi1 DN(u_j)``
the Jacobian is ``J_{s,t} = A_{t-1} ... A_s`` and the adjoint is
``K_{s,t} = A_s^* ... A_{t-1}^*``.

Array-level functions take ``states`` of shape ``(..., S + 1, M)`` so that
Monte Carlo code can run them over a batch of paths.
"""

from __future__ import annotations

import numpy as np

from .integrator import Trajectory, step_factors
from .model import ModelSpec
from .spectral import DN_matrix, eval_D2N, eval_DN, eval_DN_adjoint


def _check_window(s_idx: int, t_idx: int, S: int) -> None:
    if s_idx > t_idx:
        raise ValueError("flow indices out of order")
    if s_idx < 0 or t_idx > S:
        raise IndexError("flow window outside the trajectory")


def step_matrix(model: ModelSpec, u: np.ndarray, dt: float) -> np.ndarray:
    """Matrix of the linearised step ``A = e^{-L dt} + phi1 DN(u)``, batched."""
    E, phi1 = step_factors(model.basis, dt)
    A = phi1[:, None] * DN_matrix(model.basis, u, model.f)
    A[..., np.arange(model.M), np.arange(model.M)] += E
    return A


def adjoint_of(model: ModelSpec, A: np.ndarray) -> np.ndarray:
    """``H_s`` adjoint ``W^{-1} A^T W`` of coefficient matrices."""
    w = model.weights
    return np.swapaxes(A, -1, -2) * w[None, :] / w[:, None]


def forward_tangent(model, states, dt, s_idx, t_idx, phi, record=False):
    """``J_{s,t} phi`` (or all ``J_{s,r} phi`` for ``s <= r <= t``)."""
    _check_window(s_idx, t_idx, states.shape[-2] - 1)
    basis, f = model.basis, model.f
    E, phi1 = step_factors(basis, dt)
    v = np.array(phi, dtype=float)
    out = [v] if record else None
    for j in range(s_idx, t_idx):
        v = E * v + phi1 * eval_DN(basis, states[..., j, :], v, f)
        if record:
            out.append(v)
    return np.stack(out, axis=-2) if record else v


def backward_adjoint(model, states, dt, s_idx, t_idx, phi, record=False):
    """``K_{s,t} phi``; with ``record`` returns ``K_{r,t} phi`` for all ``r``."""
    _check_window(s_idx, t_idx, states.shape[-2] - 1)
    basis, f = model.basis, model.f
    E, phi1 = step_factors(basis, dt)
    v = np.array(phi, dtype=float)
    out = [v] if record else None
    for j in range(t_idx - 1, s_idx - 1, -1):
        v = E * v + eval_DN_adjoint(basis, states[..., j, :], phi1 * v, f, model.s)
        if record:
            out.append(v)
    return np.stack(out[::-1], axis=-2) if record else v


def jacobian_apply(traj: Trajectory, s_idx: int, t_idx: int, phi) -> np.ndarray:
    """``J_{s,t} phi`` along the trajectory (``phi`` may carry batch axes)."""
    return forward_tangent(traj.model, traj.states, traj.dt, s_idx, t_idx, phi)


def jacobian_matrix(traj: Trajectory, s_idx: int, t_idx: int) -> np.ndarray:
    """Dense ``J_{s,t}`` assembled column by column."""
    cols = jacobian_apply(traj, s_idx, t_idx, np.eye(traj.model.M))
    return cols.T


def second_variation(traj: Trajectory, s_idx: int, t_idx: int, phi, psi) -> np.ndarray:
    """``J^(2)_{s,t}(phi, psi)``: second derivative of the discrete flow."""
    model, states, dt = traj.model, traj.states, traj.dt
    _check_window(s_idx, t_idx, traj.S)
    basis, f = model.basis, model.f
    E, phi1 = step_factors(basis, dt)
    a = np.array(phi, dtype=float)
    b = np.array(psi, dtype=float)
    z = np.zeros(np.broadcast_shapes(a.shape, b.shape))
    for j in range(s_idx, t_idx):
        u = states[j]
        z = E * z + phi1 * (eval_DN(basis, u, z, f) + eval_D2N(basis, u, a, b, f))
        a = E * a + phi1 * eval_DN(basis, u, a, f)
        b = E * b + phi1 * eval_DN(basis, u, b, f)
    return z


def adjoint_apply(traj: Trajectory, s_idx: int, t_idx: int, phi) -> np.ndarray:
    """``K_{s,t} phi``, the ``H_s`` adjoint of ``J_{s,t}``."""
    return backward_adjoint(traj.model, traj.states, traj.dt, s_idx, t_idx, phi)


def malliavin_deriv(traj: Trajectory, h: np.ndarray, s_idx: int = 0, t_idx: int | None = None) -> np.ndarray:
    """Directional Malliavin derivative ``sum_i J_{t_{i+1}, t} G h_i dt``.

    ``h`` has shape ``(t_idx - s_idx, d)``: one control value per step.
    This is the derivative of the final state when the increments are
    shifted by ``h_i dt``.
    """
    t_idx = traj.S if t_idx is None else t_idx
    _check_window(s_idx, t_idx, traj.S)
    model, dt = traj.model, traj.dt
    h = np.asarray(h, dtype=float).reshape(t_idx - s_idx, model.d)
    basis, f = model.basis, model.f
    E, phi1 = step_factors(basis, dt)
    y = np.zeros(model.M)
    for n, j in enumerate(range(s_idx, t_idx)):
        y = E * y + phi1 * eval_DN(basis, traj.states[j], y, f) + dt * (h[n] @ model.G)
    return y


# ------------------------------------------------------------- diagnostics


def duality_defect(traj: Trajectory, phi, psi, s_idx: int = 0, t_idx: int | None = None) -> float:
    """``sup_r |<J_{s,r} phi, K_{r,t} psi>_s - <phi, K_{s,t} psi>_s|`` over the grid,
    relative to ``||phi||_s ||psi||_s``."""
    model = traj.model
    t_idx = traj.S if t_idx is None else t_idx
    Jphi = forward_tangent(model, traj.states, traj.dt, s_idx, t_idx, phi, record=True)
    Kpsi = backward_adjoint(model, traj.states, traj.dt, s_idx, t_idx, psi, record=True)
    pairing = model.basis.inner(Jphi, Kpsi, model.s)
    ref = model.basis.inner(np.asarray(phi, dtype=float), Kpsi[0], model.s)
    return float(np.max(np.abs(pairing - ref)) / (model.norm(phi) * model.norm(psi)))


def _observed_order(errs) -> float:
    errs = np.asarray(errs, dtype=float)
    if np.any(errs <= 0):
        return float("inf")
    return float(np.min(np.log2(errs[:-1] / errs[1:])))


def derivative_oracle_report(traj: Trajectory, seed: int = 0, h_small=(1e-5, 1e-3, 1e-5),
                             ladders=((4e-2, 2e-2, 1e-2), (4e-2, 2e-2, 1e-2), (0.4, 0.2, 0.1))) -> dict:
    """Compare the three linearisations with central differences of :func:`simulate`.

    For each map returns the relative error at a small step and the
    observed order ``min log2(e_h / e_{h/2})`` along a halving ladder of
    steps large enough for truncation error to dominate round-off.
    Directions are drawn from ``seed``.
    """
    from .integrator import simulate

    model, path = traj.model, traj.path
    u0 = traj.states[0]
    rng = np.random.default_rng(seed)
    phi, psi = rng.standard_normal((2, model.M))
    h_dir = rng.standard_normal((path.S, model.d))
    final = lambda x, p=path: simulate(x, p, model).final

    def fd_jac(h):
        return (final(u0 + h * phi) - final(u0 - h * phi)) / (2 * h)

    def fd_second(h):
        f = lambda a, b: final(u0 + a * h * phi + b * h * psi)
        return (f(1, 1) - f(1, -1) - f(-1, 1) + f(-1, -1)) / (4 * h * h)

    def fd_malliavin(e):
        v = e * h_dir * path.dt
        return (final(u0, path.shifted(v)) - final(u0, path.shifted(-v))) / (2 * e)

    exact = {
        "jacobian": jacobian_apply(traj, 0, path.S, phi),
        "second_variation": second_variation(traj, 0, path.S, phi, psi),
        "malliavin_deriv": malliavin_deriv(traj, h_dir),
    }
    fds = {"jacobian": fd_jac, "second_variation": fd_second, "malliavin_deriv": fd_malliavin}
    out = {}
    for (name, ref), h0, ladder in zip(exact.items(), h_small, ladders):
        fd = fds[name]
        scale = np.linalg.norm(ref)
        errs = [float(np.linalg.norm(fd(h) - ref)) for h in ladder]
        out[name] = {
            "h": float(h0),
            "rel_error": float(np.linalg.norm(fd(h0) - ref) / scale) if scale else float(np.linalg.norm(fd(h0))),
            "ladder": [float(h) for h in ladder],
            "ladder_errors": errs,
            "order": _observed_order(errs),
        }
    return out
