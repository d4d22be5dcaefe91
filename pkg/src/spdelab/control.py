"""Block-adapted control transferring an initial-condition variation onto
the noise, the residual recursion, and Monte Carlo checks of the resulting
smoothing estimate.

Time is split into blocks of ``block_steps`` steps. On even blocks
``[a, b)`` the control is

    h_i = G^* K_{i+1,b} (M + beta)^{-1} J_{a,b} rho_a,    a <= i < b,

where ``M`` is the block Malliavin matrix; on odd blocks ``h = 0``. The
residual obeys ``rho_b = J_{a,b} rho_a - A_{a,b} h = beta (M + beta)^{-1}
J_{a,b} rho_a`` on even blocks and ``rho_b = J_{a,b} rho_a`` on odd ones.
All operators are the exact discrete ones of :mod:`spdelab.flows`, so the
identities hold to round-off.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass, field

import numpy as np

from .flows import adjoint_of, backward_adjoint, forward_tangent, step_matrix
from .integrator import brownian_increments, integrate, path_seed, step_factors
from .malliavin import ConeSpec, cone_min, forward_gram, to_hat
from .model import ModelSpec
from .spectral import eval_DN, multiplication_matrix
from .stats import mean_stderr


def beta_choice(delta: float, U_value, C_value: float = 1.0, pbar: float = 10.0):
    """Regularisation ``beta = delta^3 / (U * C^(1/pbar))``."""
    if not 0.0 < delta < 1.0:
        raise ValueError("delta must lie in (0, 1)")
    if C_value <= 0 or pbar <= 0:
        raise ValueError("C and pbar must be positive")
    return delta**3 / (np.asarray(U_value, dtype=float) * C_value ** (1.0 / pbar))


def U_function(model: ModelSpec, mode: str = "one", eta_U: float = 0.1):
    """Weight ``U(u)`` entering :func:`beta_choice`: ``1`` or
    ``exp(eta_U ||u||_s^(1/n))`` with ``n`` the polynomial degree."""
    if mode == "one":
        return lambda u: np.ones(np.shape(u)[:-1])
    if mode == "exp":
        n = max(model.f.degree, 1)
        return lambda u: np.exp(eta_U * model.norm(u) ** (1.0 / n))
    raise ValueError(f"unknown U mode {mode!r}")


@dataclass(frozen=True)
class ControlSettings:
    """Parameters of the block control."""

    delta: float = 0.1
    indices: tuple[int, ...] = ()
    C: float = 1.0
    pbar: float = 10.0
    U_mode: str = "one"
    eta_U: float = 0.1

    @property
    def active(self) -> bool:
        return len(self.indices) > 0


@dataclass
class ControlHistory:
    """Output of :func:`run_control` for a batch of ``P`` paths.

    ``rho[:, n]`` is the residual at the start of block ``n``; ``h`` holds one
    ``d``-vector per step; ``blocks`` lists per-even-block diagnostics with
    one value per path.
    """

    rho: np.ndarray
    h: np.ndarray
    beta: np.ndarray
    blocks: list = field(default_factory=list)
    block_steps: int = 0


def _GstarW(model: ModelSpec) -> np.ndarray:
    # G^* phi = phi @ Gw with <g_k, phi>_s
    return (model.G * model.weights).T


def _drive(model, states, dt, a, b, h):
    """``A_{a,b} h = sum_i J_{i+1,b} G^T h_i dt`` for batched states."""
    basis, f = model.basis, model.f
    E, phi1 = step_factors(basis, dt)
    y = np.zeros(states.shape[:-2] + (model.M,))
    for n, j in enumerate(range(a, b)):
        y = E * y + phi1 * eval_DN(basis, states[..., j, :], y, f) + dt * (h[..., n, :] @ model.G)
    return y


def _hs_opnorm(lam_s, A):
    """Operator norm in ``H_s`` of coefficient matrices ``A`` (batched)."""
    return np.linalg.norm(lam_s[:, None] * A / lam_s[None, :], ord=2, axis=(-2, -1))


def _jacobian_block(model, states, dt, a, b):
    eye = np.broadcast_to(np.eye(model.M), states.shape[:-2] + (model.M, model.M))
    cols = forward_tangent(model, states[..., None, :, :], dt, a, b, eye)
    return np.swapaxes(cols, -1, -2)


def run_control(model: ModelSpec, states: np.ndarray, dt: float, xi, settings: ControlSettings,
                block_steps: int, n_blocks: int | None = None, diagnostics: bool = True,
                full_diagnostics: bool = False) -> ControlHistory:
    """Run the block control along stored trajectories.

    Parameters
    ----------
    states : array (P, S + 1, M) or (S + 1, M)
    xi : array (M,) or (P, M)
        Initial variation ``rho_0``.
    block_steps : int
        Steps per unit block.
    diagnostics : bool
        Record, on every even block, the cone minimum of the block matrix,
        ``||beta (M + beta)^{-1}||``, ``||Pi R||`` against
        ``max(delta, sqrt(beta / gamma))`` and the mismatch between the two
        expressions of ``rho_{2n+1}``.
    full_diagnostics : bool
        Also record ``||J_odd R J_even||`` (dense block Jacobians).
    """
    single = states.ndim == 2
    states = np.asarray(states, dtype=float)[None] if single else np.asarray(states, dtype=float)
    P, S = states.shape[0], states.shape[1] - 1
    n_blocks = S // block_steps if n_blocks is None else n_blocks
    if n_blocks * block_steps > S:
        raise ValueError("trajectory shorter than the requested blocks")
    lam_s = model.basis.eigenvalues ** model.s
    Gw = _GstarW(model)
    U = U_function(model, settings.U_mode, settings.eta_U)
    cone = ConeSpec(tuple(settings.indices), settings.delta) if settings.active else None

    rho = np.broadcast_to(np.asarray(xi, dtype=float), (P, model.M)).copy()
    rhos = [rho]
    h = np.zeros((P, S, model.d))
    betas = np.zeros((P, n_blocks))
    blocks = []
    for n in range(n_blocks):
        a, b = n * block_steps, (n + 1) * block_steps
        Jrho = forward_tangent(model, states, dt, a, b, rho)
        if n % 2 == 1 or not settings.active or model.d == 0:
            rho = Jrho
            rhos.append(rho)
            continue
        beta = beta_choice(settings.delta, U(states[:, a]), settings.C, settings.pbar)
        betas[:, n] = beta
        hat = to_hat(model, forward_gram(model, states, dt, a, b))
        reg = hat + beta[:, None, None] * np.eye(model.M)
        z = np.linalg.solve(reg, (lam_s * Jrho)[..., None])[..., 0]
        y = z / lam_s
        K = backward_adjoint(model, states, dt, a + 1, b, y, record=True)
        h[:, a:b] = K @ Gw
        rho = Jrho - _drive(model, states, dt, a, b, h[:, a:b])
        closed = beta[:, None] * y
        if diagnostics:
            info = _block_diagnostics(hat, beta, cone, settings.delta)
            den = np.maximum(np.linalg.norm(closed, axis=-1), 1e-300)
            info["rho_mismatch"] = np.linalg.norm(rho - closed, axis=-1) / den
            info["block"] = n
            if full_diagnostics and b + block_steps <= S:
                R = beta[:, None, None] * np.linalg.inv(reg)
                Rc = R * lam_s[None, :] / lam_s[:, None]  # coefficient coordinates
                Xi = _jacobian_block(model, states, dt, b, b + block_steps) @ Rc @ _jacobian_block(model, states, dt, a, b)
                info["xi_norm"] = _hs_opnorm(lam_s, Xi)
            blocks.append(info)
        rhos.append(rho)
    hist = ControlHistory(np.stack(rhos, axis=1), h, betas, blocks, block_steps)
    if single:
        hist.rho, hist.h, hist.beta = hist.rho[0], hist.h[0], hist.beta[0]
        hist.blocks = [{k: (v[0] if isinstance(v, np.ndarray) else v) for k, v in blk.items()} for blk in blocks]
    return hist


def _block_diagnostics(hat, beta, cone, delta):
    P, M = hat.shape[0], hat.shape[-1]
    ev, V = np.linalg.eigh(hat)
    r = beta[:, None] / (beta[:, None] + ev)
    R = (V * r[:, None, :]) @ np.swapaxes(V, -1, -2)
    gamma = np.array([cone_min(hm, cone) for hm in hat])
    idx = list(cone.indices)
    proj = np.linalg.norm(R[:, idx, :], ord=2, axis=(-2, -1))
    with np.errstate(divide="ignore"):
        bound = np.where(gamma > 0, np.maximum(delta, np.sqrt(beta / np.where(gamma > 0, gamma, 1.0))), np.inf)
    return {
        "remainder_norm": np.max(np.abs(r), axis=-1),
        "cone_min": gamma,
        "projected_remainder": proj,
        "remainder_bound": bound,
    }


# ---------------------------------------------------------------- Monte Carlo


def ensemble_increments(seed, samples, S: int, dt: float, d: int) -> np.ndarray:
    return np.stack([brownian_increments(path_seed(seed, i), S, dt, d) for i in samples])


def rho_decay_estimate(model: ModelSpec, u0, xi, settings: ControlSettings, n_max: int, samples: int,
                       seed: int, dt: float = 1e-2, block: float = 1.0, chunk: int = 100,
                       measure_jacobian: bool = True, map_fn=map) -> dict:
    """Monte Carlo decay of ``E ||rho_{2n}||_s`` for ``n = 0..n_max``.

    Returns the table rows and the fitted geometric rate per double block
    (fit over ``n >= 1``). With ``measure_jacobian`` it also returns
    ``E ||J_{0,2n}||_s`` and its fitted rate, the uncontrolled contraction
    the residual is compared with.
    """
    B = _block_steps(block, dt)
    S = 2 * n_max * B
    jobs = [(model, u0, xi, settings, range(a, min(a + chunk, samples)), seed, S, dt, B, n_max, measure_jacobian)
            for a in range(0, samples, chunk)]
    parts = list(map_fn(_decay_chunk, jobs))
    norms = np.concatenate([p[0] for p in parts])
    jn = np.concatenate([p[1] for p in parts]) if measure_jacobian else None
    rows = []
    for n in range(n_max + 1):
        m, se = mean_stderr(norms[:, n])
        rows.append({"n": n, "mean_norm": float(m), "stderr": float(se)})
    means = np.array([r["mean_norm"] for r in rows])
    out = {"table": rows, "rate": _geometric_rate(means), "norms": norms}
    if measure_jacobian:
        jmeans = jn.mean(axis=0)
        out["jacobian_table"] = [float(x) for x in jmeans]
        out["jacobian_rate"] = _geometric_rate(jmeans)
    return out


def _geometric_rate(means) -> float:
    n = np.arange(len(means))
    ok = (n >= 1) & (means > 0)
    if ok.sum() < 2:
        return float("nan")
    return float(np.exp(np.polyfit(n[ok], np.log(means[ok]), 1)[0]))


def _block_steps(block: float, dt: float) -> int:
    B = int(round(block / dt))
    if B < 1 or abs(B * dt - block) > 1e-9 * block:
        raise ValueError("block length must be a multiple of dt")
    return B


def _decay_chunk(job):
    model, u0, xi, settings, samples, seed, S, dt, B, n_max, measure = job
    inc = ensemble_increments(seed, samples, S, dt, model.d)
    states = integrate(model, u0, inc, dt)
    hist = run_control(model, states, dt, xi, settings, B, 2 * n_max, diagnostics=False)
    lam_s = model.basis.eigenvalues ** model.s
    norms = model.norm(hist.rho[:, ::2])
    if not measure:
        return norms, None
    J = np.broadcast_to(np.eye(model.M), states.shape[:-2] + (model.M, model.M)).copy()
    jn = [np.ones(states.shape[0])]
    for k in range(n_max):
        J = _jacobian_block(model, states, dt, 2 * k * B, (2 * k + 2) * B) @ J
        jn.append(_hs_opnorm(lam_s, J))
    jn = np.stack(jn, axis=1)
    return norms, jn


# ---------------------------------------------------------------- derivatives of the control


@dataclass
class ControlDerivative:
    """Control of one path together with its derivative in the increments.

    ``Dh[i, k, j, l] = d h_{i,k} / d dW_{j,l}``; ``rho_T`` is the final
    residual and ``J_xi`` the variation ``J_{0,T} xi``.
    """

    h: np.ndarray
    Dh: np.ndarray
    rho_T: np.ndarray
    J_xi: np.ndarray
    final: np.ndarray


def _dA(model, u, U, phi1):
    """Derivatives of ``A(u)`` along the rows of ``U``: ``(P, Ndir, M, M)``.

    ``dA`` is linear in the direction, so the ``M`` derivative matrices along
    basis vectors are formed once and contracted with ``U``.
    """
    basis, f = model.basis, model.f
    M = basis.M
    P = basis.grid_size(max(f.degree, 1))
    E = basis.eval_matrix(P)
    w = f.derivative(2)(basis.to_grid(u, P))[..., None, :] * E.T  # (P, M, grid)
    D = (E.T * w[..., None, :]) @ E * (phi1[:, None] * (2.0 * np.pi / P))  # (P, M, M, M)
    Pn, N = U.shape[0], U.shape[1]
    return (U @ D.reshape(Pn, M, M * M)).reshape(Pn, N, M, M)


def _mv(A, v):
    """Batched ``A @ v`` for ``A`` of shape ``(P, [N,] M, M)`` and ``v`` ``(P, M)``."""
    if A.ndim == 3:
        return (A @ v[..., None])[..., 0]
    P, N, M, _ = A.shape
    return (A.reshape(P, N * M, M) @ v[:, :, None]).reshape(P, N, M)


def control_with_derivative(model: ModelSpec, u0, increments: np.ndarray, dt: float, xi,
                            settings: ControlSettings, block_steps: int, n_blocks: int) -> ControlDerivative:
    """Forward-mode differentiation of the block control with respect to
    every increment ``dW_{j,l}``; ``increments`` is ``(S, d)`` or batched
    ``(P, S, d)``.

    Exact for the discrete scheme: state tangents ``du``, step-matrix
    derivatives ``dA = phi1 D^2N(u)[du, .]``, and their propagation through
    ``J rho``, the block Gram matrix, the regularised solve and the adjoint
    sweep that produces ``h``.
    """
    if settings.U_mode != "one":
        raise NotImplementedError("state-dependent U is not differentiated")
    increments = np.asarray(increments, dtype=float)
    single = increments.ndim == 2
    if single:
        increments = increments[None]
    Pn, S, d = increments.shape
    M = model.M
    states = integrate(model, u0, increments, dt)
    _, phi1 = step_factors(model.basis, dt)
    lam_s = model.basis.eigenvalues ** model.s
    w = model.weights
    Gw = _GstarW(model)
    GG = dt * model.G.T @ model.G
    controlled = [n for n in range(0, n_blocks, 2)] if settings.active and model.d > 0 else []
    # increments after the last controlled block cannot influence h
    tangent_steps = (controlled[-1] + 1) * block_steps if controlled else 0
    N = tangent_steps * d
    beta = float(beta_choice(settings.delta, 1.0, settings.C, settings.pbar))
    T = lambda A: np.swapaxes(A, -1, -2)  # noqa: E731

    Ut = np.zeros((Pn, N, M))  # tangent of u_j for each increment direction
    rho = np.broadcast_to(np.asarray(xi, dtype=float), (Pn, M)).copy()
    Drho = np.zeros((Pn, N, M))
    Jxi = rho.copy()
    h = np.zeros((Pn, S, d))
    Dh = np.zeros((Pn, S, d, N))

    for n in range(n_blocks):
        a, b = n * block_steps, (n + 1) * block_steps
        control = n % 2 == 0 and settings.active and model.d > 0
        v, Dv = rho, Drho
        X = np.zeros((Pn, M, M))
        DX = np.zeros((Pn, N, M, M))
        saved = []
        for j in range(a, b):
            A = step_matrix(model, states[:, j], dt)
            At = T(A)
            tangent = j < tangent_steps
            dA = _dA(model, states[:, j], Ut, phi1) if tangent else None
            if control:
                saved.append(Ut)
                XAt = X @ At
                dAXAt = (dA.reshape(Pn, -1, M) @ XAt).reshape(Pn, -1, M, M)
                AA = np.einsum("pij,plk->pjkil", A, A).reshape(Pn, M * M, M * M)
                DX = (DX.reshape(Pn, -1, M * M) @ AA).reshape(DX.shape) + dAXAt + T(dAXAt)
                X = A @ X @ At + GG
            if tangent:
                Dv = Dv @ At + _mv(dA, v)
            v = _mv(A, v)
            Jxi = _mv(A, Jxi)
            if tangent:
                Ut = Ut @ At
                Ut[:, j * d:(j + 1) * d] += model.G
        if not control:
            rho, Drho = v, Dv
            continue
        scale = lam_s[:, None] * lam_s[None, :]
        hat = X * scale
        hat = 0.5 * (hat + T(hat))
        Dhat = DX * scale
        Dhat = 0.5 * (Dhat + T(Dhat))
        reg = hat + beta * np.eye(M)
        z = np.linalg.solve(reg, (lam_s * v)[..., None])[..., 0]
        rhs = Dv * lam_s - _mv(Dhat, z)
        Dz = T(np.linalg.solve(reg, T(rhs)))
        q, Dq = z / lam_s, Dz / lam_s
        for i in range(b - 1, a - 1, -1):
            h[:, i] = q @ Gw
            Dh[:, i] = T(Dq @ Gw)
            As = adjoint_of(model, step_matrix(model, states[:, i], dt))
            dA = _dA(model, states[:, i], saved[i - a], phi1)
            dAs = T(dA) * w[None, None, None, :] / w[None, None, :, None]
            Dq = Dq @ T(As) + _mv(dAs, q)
            q = _mv(As, q)
        rho, Drho = beta * z / lam_s, beta * Dz / lam_s
    Dh = np.concatenate([Dh, np.zeros((Pn, S, d, S * d - N))], axis=-1).reshape(Pn, S, d, S, d)
    out = ControlDerivative(h, Dh, rho, Jxi, states[:, -1])
    if single:
        out = ControlDerivative(h[0], Dh[0], rho[0], Jxi[0], states[0, -1])
    return out


def skorokhod_terms(h: np.ndarray, Dh: np.ndarray, increments: np.ndarray, dt: float) -> dict:
    """Discrete Skorokhod integral and the two terms of its second moment.

    ``delta = sum_i h_i . dW_i - dt sum_{i,k} dh_{i,k}/d dW_{i,k}``;
    ``ito = dt sum ||h_i||^2``; ``hs = dt^2 sum ||D h||^2`` (upper-bound
    correction); ``cross = dt^2 sum_{ij} <D_j h_i, (D_i h_j)^T>`` (exact
    correction, so ``E delta^2 = E (ito + cross)``).
    """
    h = np.asarray(h, dtype=float)
    S, d = h.shape
    Dm = np.asarray(Dh, dtype=float).reshape(S * d, S * d)
    return {
        "delta": float(np.sum(h * increments) - dt * np.trace(Dm)),
        "ito": float(dt * np.sum(h * h)),
        "hs": float(dt * dt * np.sum(Dm * Dm)),
        "cross": float(dt * dt * np.sum(Dm * Dm.T)),
    }


def skorokhod_cost_estimate(records) -> dict:
    """Aggregate per-path :func:`skorokhod_terms` into the cost estimate
    ``E dt sum ||h||^2 + E dt^2 sum ||D h||^2`` with standard errors."""
    records = list(records)
    if not records:
        raise ValueError("no samples")
    ito = np.array([r["ito"] for r in records])
    hs = np.array([r["hs"] for r in records])
    d2 = np.array([r["delta"] ** 2 for r in records])
    out = {}
    for name, x in (("ito", ito), ("correction", hs), ("estimate", ito + hs), ("delta_sq", d2)):
        m, se = mean_stderr(x)
        out[name] = float(m)
        out[name + "_stderr"] = float(se)
    out["samples"] = len(records)
    return out


def _functional(name: str):
    """Test functionals ``phi(u)`` of the first coefficient and their gradients."""
    if name == "coord":
        return (lambda u: u[1]), (lambda u: np.eye(len(u))[1])
    if name == "tanh":
        return (lambda u: np.tanh(u[1])), (lambda u: np.eye(len(u))[1] / np.cosh(u[1]) ** 2)
    if name == "const":
        return (lambda u: 1.0), (lambda u: np.zeros(len(u)))
    raise ValueError(f"unknown functional {name!r}")


def ibp_samples(model, u0, xi, settings, n_pairs: int, samples, seed: int, dt: float, block: float = 1.0,
                functionals=("coord", "tanh")) -> dict:
    """Per-path terms of ``D_xi phi(u_T) = phi(u_T) delta(h) + Dphi(u_T) rho_T``
    with ``T = 2 n_pairs`` blocks, on common random numbers."""
    B = _block_steps(block, dt)
    S = 2 * n_pairs * B
    samples = list(samples)
    inc = ensemble_increments(seed, samples, S, dt, model.d)
    cd = control_with_derivative(model, u0, inc, dt, xi, settings, B, 2 * n_pairs)
    costs = [skorokhod_terms(cd.h[p], cd.Dh[p], inc[p], dt) for p in range(len(samples))]
    delta = np.array([c["delta"] for c in costs])
    out = {}
    for name in functionals:
        phi, dphi = _functional(name)
        g = np.array([dphi(u) for u in cd.final])
        vals = np.array([phi(u) for u in cd.final], dtype=float)
        out[name] = {
            "lhs": np.sum(g * cd.J_xi, axis=-1),
            "skorokhod": vals * delta,
            "residual": np.sum(g * cd.rho_T, axis=-1),
        }
    out["costs"] = costs
    return out


def _ibp_chunk(job):
    return ibp_samples(*job)


def ibp_identity_check(model: ModelSpec, u0, xi, settings: ControlSettings, n_pairs: int, samples: int,
                       seed: int, dt: float = 2e-2, block: float = 1.0, functionals=("coord", "tanh"),
                       z_max: float = 3.0, chunk: int = 25, map_fn=map) -> dict:
    """Monte Carlo test of ``E D_xi phi(u_T) = E phi(u_T) delta(h) + E Dphi(u_T) rho_T``.

    The identity is tested on the path-wise difference of the two sides
    (common random numbers); it holds when the mean difference lies
    within ``z_max`` standard errors of zero. Also returns the Skorokhod
    cost estimate of the control.
    """
    jobs = [(model, u0, xi, settings, n_pairs, range(a, min(a + chunk, samples)), seed, dt, block, tuple(functionals))
            for a in range(0, samples, chunk)]
    parts = list(map_fn(_ibp_chunk, jobs))
    rows = []
    for name in functionals:
        cols = {k: np.concatenate([q[name][k] for q in parts]) for k in ("lhs", "skorokhod", "residual")}
        rhs = cols["skorokhod"] + cols["residual"]
        row = {"functional": name}
        for key, x in (("lhs", cols["lhs"]), ("rhs", rhs), ("skorokhod", cols["skorokhod"]),
                       ("remainder", cols["residual"]), ("difference", cols["lhs"] - rhs)):
            m, se = mean_stderr(x)
            row[key] = float(m)
            row[key + "_stderr"] = float(se)
        se = row["difference_stderr"]
        row["z"] = float(row["difference"] / se) if se > 0 else (0.0 if row["difference"] == 0 else float("inf"))
        row["holds"] = bool(abs(row["z"]) <= z_max)
        rows.append(row)
    cost = skorokhod_cost_estimate([c for q in parts for c in q["costs"]])
    return {"table": rows, "holds": all(r["holds"] for r in rows), "cost": cost, "samples": samples,
            "T": 2 * n_pairs * block}


def gradient_bound_check(model: ModelSpec, u0, functional: str, n_max: int, samples: int, seed: int,
                         settings: ControlSettings, dt: float = 2e-2, block: float = 1.0,
                         probes=None, chunk: int = 25, map_fn=map) -> dict:
    """Both sides of the approximate integration by parts for each probe.

    For each ``n <= n_max`` and probe ``xi`` reports ``E D_xi phi(u_{2n})``,
    ``E phi(u_{2n}) delta(h)``, ``E Dphi(u_{2n}) rho_{2n}`` and the residual
    ``lhs - (skorokhod + remainder)`` with its standard error (common
    random numbers, so the residual is estimated path by path).
    """
    M = model.M
    if probes is None:
        probes = [np.eye(M)[i] for i in settings.indices]
        r = np.random.default_rng(seed).standard_normal(M)
        probes.append(r / model.norm(r))
    rows = []
    for n in range(1, n_max + 1):
        for p, xi in enumerate(probes):
            jobs = [(model, u0, xi, settings, n, range(a, min(a + chunk, samples)), seed, dt, block, (functional,))
                    for a in range(0, samples, chunk)]
            parts = list(map_fn(_ibp_chunk, jobs))
            lhs = np.concatenate([q[functional]["lhs"] for q in parts])
            sk = np.concatenate([q[functional]["skorokhod"] for q in parts])
            rem = np.concatenate([q[functional]["residual"] for q in parts])
            row = {"n": n, "probe": p}
            for name, x in (("lhs", lhs), ("skorokhod", sk), ("remainder", rem), ("residual", lhs - sk - rem)):
                m, se = mean_stderr(x)
                row[name] = float(m)
                row[name + "_stderr"] = float(se)
            rows.append(row)
    worst = {}
    for n in range(1, n_max + 1):
        sel = [r for r in rows if r["n"] == n]
        worst[n] = max(abs(r["lhs"]) for r in sel)
    return {"table": rows, "max_lhs": worst}


# ---------------------------------------------------------------- constants


@dataclass
class SmoothingConstants:
    """Empirical stand-ins for the constants of the smoothing argument."""

    C_J: float = float("nan")
    C_Pi: float = float("nan")
    C_L: float = float("nan")
    eta: float = 0.0
    eta_prime: float = 0.0
    kappa: float = 1.0
    kappa_tilde: float = 1.0
    delta: float = 0.1
    pbar: float = 10.0
    qbar: float = 2.0

    def gap(self) -> float:
        """``C_Pi - C_J - 2 kappa C_L`` (positive when the strict inequality holds)."""
        return self.C_Pi - self.C_J - 2.0 * self.kappa * self.C_L

    def inequality_holds(self) -> bool:
        return bool(self.gap() > 0)

    def to_dict(self) -> dict:
        out = asdict(self)
        out["gap"] = self.gap()
        out["inequality_holds"] = self.inequality_holds()
        return out


def estimate_smoothing_constants(model: ModelSpec, u0, indices, samples: int, seed: int, dt: float = 1e-2,
                                 C_L: float = 0.0, settings: ControlSettings | None = None) -> SmoothingConstants:
    """``C_J = log E ||J_{0,1}||_s`` and ``C_Pi = -log E ||(1 - Pi) J_{0,1}||_s``
    over unit-time Jacobians; the remaining constants come from
    ``settings`` and the caller."""
    settings = settings or ControlSettings(indices=tuple(indices))
    B = _block_steps(1.0, dt)
    inc = ensemble_increments(seed, range(samples), B, dt, model.d)
    states = integrate(model, u0, inc, dt)
    J = _jacobian_block(model, states, dt, 0, B)
    lam_s = model.basis.eigenvalues ** model.s
    high = np.ones(model.M, dtype=bool)
    high[list(indices)] = False
    Jh = J * high[:, None]
    return SmoothingConstants(
        C_J=float(np.log(np.mean(_hs_opnorm(lam_s, J)))),
        C_Pi=float(-np.log(np.mean(_hs_opnorm(lam_s, Jh)))),
        C_L=float(C_L),
        delta=settings.delta,
        pbar=settings.pbar,
    )
