"""Concrete models: stochastic Ginzburg-Landau and scalar reaction-diffusion
equations on the circle."""

from __future__ import annotations

import numpy as np

from .brackets import generate_constant_set, span_rank
from .integrator import brownian_increments, integrate, path_seed
from .model import ModelSpec, NoiseConfig
from .spectral import Basis, LocalPolynomial

_FORCING_FUNCS = {
    "1": lambda x: np.ones_like(x),
    "cos": np.cos,
    "sin": np.sin,
}


def forcing_field(basis: Basis, name: str) -> np.ndarray:
    """Coefficients of a named forcing profile.

    Accepts ``"1"``, ``"cos"``, ``"sin"``, and ``"cosK"`` / ``"sinK"`` for
    wavenumber ``K`` (unit amplitude as functions of ``x``).
    """
    name = name.strip()
    if name in _FORCING_FUNCS:
        fn = _FORCING_FUNCS[name]
    elif name[:3] in ("cos", "sin") and name[3:].isdigit():
        k = int(name[3:])
        fn = (lambda x, k=k: np.cos(k * x)) if name[:3] == "cos" else (lambda x, k=k: np.sin(k * x))
    else:
        raise ValueError(f"unknown forcing profile {name!r}")
    out = basis.project(fn)
    out[np.abs(out) < 1e-14] = 0.0
    return out


def rd_model(
    coefficients,
    nu: float = 1.0,
    g_list=(),
    M: int = 32,
    s: float = 0.0,
    name: str = "reaction-diffusion",
) -> ModelSpec:
    """``du = nu u_xx dt + f(u) dt + G dW`` with ``f`` given by its
    coefficients. The diagonal shift ``nu c`` is moved from ``L`` into ``N``."""
    basis = Basis(M, nu=nu)
    shifted = list(float(c) for c in coefficients) + [0.0] * max(0, 2 - len(coefficients))
    shifted[1] += nu * basis.shift
    G = _directions(basis, g_list)
    f = LocalPolynomial(tuple(shifted), s)
    return ModelSpec(basis, f, NoiseConfig(G), s, nu, 0.0, name, {"reaction": tuple(coefficients)})


def gl_model(
    nu: float = 1.0,
    eta: float = 1.0,
    g_list=("1", "cos", "sin"),
    M: int = 32,
    s: float = 1.0,
) -> ModelSpec:
    """Stochastic real Ginzburg-Landau ``du = (nu u_xx + eta u - u^3) dt + G dW``.

    With ``L = nu (c - d^2/dx^2)`` and ``c = 1/nu`` every eigenvalue is at
    least one, and ``N(u) = (eta + 1) u - u^3``.
    """
    m = rd_model((0.0, eta, 0.0, -1.0), nu, g_list, M, s, "ginzburg-landau")
    return ModelSpec(m.basis, m.f, m.noise, s, nu, eta, m.name, {"g_list": _names(g_list)})


def _names(g_list):
    return [g if isinstance(g, str) else "custom" for g in g_list]


def _directions(basis: Basis, g_list) -> np.ndarray:
    rows = []
    for g in g_list:
        rows.append(forcing_field(basis, g) if isinstance(g, str) else np.asarray(g, dtype=float))
    return np.array(rows).reshape(len(rows), basis.M)


def check_dissipativity(model: ModelSpec) -> bool:
    """Odd degree and negative leading coefficient of the reaction term."""
    return model.f.is_dissipative()


# -- a priori and Lyapunov checks --------------------------------------------


def dissipativity_spot_check(
    f: LocalPolynomial, samples: int = 20000, seed: int = 0, radius: float = 10.0, c: float | None = None
) -> dict:
    """Spot-check ``f(u + v) u <= C (1 + |v|^(n+1)) - c |u|^(n+1)`` on scalars.

    ``c`` defaults to ``|f_n| / 4``; ``C`` is fitted as the largest ratio
    over random pairs in ``[-R, R]^2`` and re-measured with ``10 R``. The
    bound holds with a finite constant when the refit grows by less than a
    factor 2. ``R`` is ``radius`` or, if larger, four times the Cauchy
    bound ``1 + max |f_j / f_n|`` on the roots of ``f``, so that the
    leading term dominates well inside the fitting box.
    """
    n = f.degree
    c = abs(f.leading) / 4.0 if c is None else float(c)
    coeffs = np.asarray(f.coefficients, dtype=float)
    if n > 0 and f.leading != 0:
        radius = max(radius, 4.0 * (1.0 + np.abs(coeffs[:n] / f.leading).max()))
    rng = np.random.default_rng(seed)

    def fitted(R):
        # uniform pairs plus log-spread magnitudes to reach the corners
        uv = rng.uniform(-R, R, size=(samples, 2))
        mag = R ** rng.uniform(-1, 1, size=(samples, 2)) * rng.choice([-1.0, 1.0], size=(samples, 2))
        u, v = np.concatenate([uv, mag]).T
        ratio = (f(u + v) * u + c * np.abs(u) ** (n + 1)) / (1.0 + np.abs(v) ** (n + 1))
        return float(max(ratio.max(), 0.0))

    C, C_wide = fitted(radius), fitted(10.0 * radius)
    growth = C_wide / C if C > 0 else (1.0 if C_wide == 0 else np.inf)
    return {"c": c, "C": C, "C_wide": C_wide, "growth": growth, "radius": float(radius),
            "holds": bool(growth < 2.0)}


def _profile(basis: Basis, name: str) -> np.ndarray:
    """Initial-condition shapes with unit sup norm."""
    P = max(basis.grid_size(3), 64)
    x = basis.grid(P)
    shapes = {
        "const": np.ones_like(x),
        "bump": 0.5 + 0.5 * np.cos(x),
        "wave": np.cos(x) + 0.5 * np.sin(2 * x),
    }
    if name not in shapes:
        raise ValueError(f"unknown profile {name!r}")
    u = basis.from_grid(shapes[name], P)
    return u / sup_norm(basis, u)


def sup_norm(basis: Basis, u, P: int | None = None) -> np.ndarray:
    """``max_x |u(x)|`` on a collocation grid finer than the retained modes."""
    P = P or max(4 * basis.kmax + 1, 64)
    return np.abs(basis.to_grid(u, P)).max(axis=-1)


def _increments(model: ModelSpec, seed: int, samples, S: int, dt: float) -> np.ndarray:
    return np.stack([brownian_increments(path_seed(seed, i), S, dt, model.d) for i in samples])


def final_states(model: ModelSpec, u0, samples: int, seed: int, T: float = 1.0, dt: float = 1e-3,
                 chunk: int = 64) -> np.ndarray:
    """``u(T)`` for sample paths ``0..samples-1`` (sub-stepped for large data)."""
    S = int(round(T / dt))
    out = []
    for start in range(0, samples, chunk):
        idx = range(start, min(start + chunk, samples))
        inc = _increments(model, seed, idx, S, dt)
        out.append(integrate(model, u0, inc, dt, adaptive_substeps=True)[:, -1])
    return np.concatenate(out) if out else np.zeros((0, model.M))


def apriori_bound_check(
    model: ModelSpec,
    u0_norms=(0.0, 1.0, 10.0, 1e3),
    samples: int = 20,
    seed: int = 0,
    T: float = 1.0,
    dt: float = 1e-3,
    profile: str = "bump",
    exponent: float | None = None,
) -> dict:
    """Pathwise check of the a priori sup-norm bound.

    The bound is ``||u(t)||_inf <= C (b0 / (1 + t b0^p)^(1/p) + S(t))`` with
    ``b0 = ||u0||_inf``, ``S(t) = 1 + sup_{r <= t} ||W_L(r)||_inf`` for the
    stochastic convolution ``W_L`` and ``p = exponent`` (default: degree
    minus one, the rate of ``u' = -u^n``). ``C`` is fitted as the largest
    ratio over the first half of the samples and the second half is counted
    for violations.

    Returns
    -------
    dict
        ``C``, ``C_by_u0``, ``C_spread`` (max / min of ``C_by_u0`` over
        nonzero data), ``violations``, ``checked`` and ``final_sup`` (mean
        ``||u(T)||_inf`` per initial norm).
    """
    basis = model.basis
    p = float(model.f.degree - 1 if exponent is None else exponent)
    if p <= 0:
        raise ValueError("bound exponent must be positive")
    S = int(round(T / dt))
    t = dt * np.arange(S + 1)
    shape = _profile(basis, profile)
    inc = _increments(model, seed, range(samples), S, dt)
    linear = model.with_f(LocalPolynomial((0.0,)))
    W = integrate(linear, np.zeros(basis.M), inc, dt)
    Sup = 1.0 + np.maximum.accumulate(sup_norm(basis, W), axis=-1)

    ratios, finals = {}, {}
    for r in u0_norms:
        u0 = float(r) * shape
        b0 = float(sup_norm(basis, u0))
        states = integrate(model, u0, inc, dt, adaptive_substeps=True)
        sup_u = sup_norm(basis, states)
        with np.errstate(over="ignore"):
            decay = b0 / (1.0 + t * b0**p) ** (1.0 / p)
        ratios[float(r)] = sup_u / (decay + Sup)
        finals[float(r)] = float(sup_u[:, -1].mean())

    half = max(samples // 2, 1)
    by_u0 = {r: float(x[:half].max()) for r, x in ratios.items()}
    C = max(by_u0.values())
    held_out = [x[half:] for x in ratios.values() if samples > 1]
    violations = int(sum(np.sum(x > C * (1 + 1e-9)) for x in held_out))
    checked = int(sum(x.size for x in held_out))
    nonzero = [c for r, c in by_u0.items() if r > 0 and c > 0]
    return {
        "C": C,
        "C_by_u0": by_u0,
        "C_spread": max(nonzero) / min(nonzero) if nonzero else 1.0,
        "violations": violations,
        "checked": checked,
        "final_sup": finals,
        "exponent": p,
    }


def _lyapunov_V(model: ModelSpec, V):
    if V in (None, "norm"):
        n = model.f.degree
        return lambda u: model.norm(u) ** (1.0 / n)
    if V == "zero":
        return lambda u: np.zeros(np.shape(u)[:-1])
    if callable(V):
        return V
    raise ValueError(f"unknown Lyapunov function {V!r}")


def _fit_line(x, y, se):
    """Weighted least squares ``y = a x + b``; returns ``(a, b, se_a, se_b)``.

    Weights are ``1 / se^2``; with no sampling noise the residual scatter
    sets the errors.
    """
    x, y, se = (np.asarray(z, dtype=float) for z in (x, y, se))
    if np.all(se > 0):
        w = 1.0 / se**2
    else:
        w = np.ones_like(x)
    X = np.stack([x, np.ones_like(x)], axis=1)
    A = X.T @ (w[:, None] * X)
    coef = np.linalg.solve(A, X.T @ (w * y))
    cov = np.linalg.inv(A)
    if not np.all(se > 0):
        dof = max(len(x) - 2, 1)
        cov = cov * float(np.sum((y - X @ coef) ** 2)) / dof
    err = np.sqrt(np.diag(cov))
    return float(coef[0]), float(coef[1]), float(err[0]), float(err[1])


def lyapunov_check(
    model: ModelSpec,
    V=None,
    eta_guess: float = 0.5,
    samples: int = 200,
    seed: int = 0,
    V_grid=(0.0, 2.0, 4.0, 6.0, 8.0),
    T: float = 1.0,
    dt: float = 1e-3,
    profile: str = "wave",
) -> dict:
    """Fit ``log E exp V(u_1) <= eta' V(u_0) + C_L`` over a grid of initial data.

    Initial conditions are a fixed profile scaled so that ``V(u_0)`` runs
    over ``V_grid`` (for the default ``V = ||u||_s^(1/n)``, ``n`` the
    degree). ``eta'`` is the weighted least-squares slope of the Monte
    Carlo log-moments against ``V(u_0)`` over the upper half of the grid,
    where the large-data behaviour shows (``eta_all`` uses every point);
    ``C_L`` is the smallest intercept making the fitted line an upper bound
    on every grid point. The form holds when ``eta' < 1`` and ``C_L`` is
    finite.

    ``eta_guess`` is reported back together with whether the bound with
    that slope and the fitted ``C_L`` also holds.
    """
    Vf = _lyapunov_V(model, V)
    shape = _profile(model.basis, profile)
    rows = []
    for target in V_grid:
        target = float(target)
        if V in (None, "norm"):
            u0 = target ** model.f.degree * shape / model.norm(shape)
        else:
            u0 = target * shape
        v0 = float(Vf(u0))
        final = final_states(model, u0, samples, seed, T, dt)
        ev = np.exp(Vf(final))
        mean, se = float(ev.mean()), float(ev.std(ddof=1) / np.sqrt(samples)) if samples > 1 else 0.0
        rows.append({"V0": v0, "log_moment": float(np.log(mean)), "stderr": se / mean, "mean_exp_V": mean,
                     "stderr_exp_V": se})
    x = np.array([r["V0"] for r in rows])
    y = np.array([r["log_moment"] for r in rows])
    se = np.array([r["stderr"] for r in rows])
    tail = x >= np.median(x)
    if np.ptp(x[tail]) == 0:
        eta, icpt, eta_se, icpt_se = 0.0, float(y.mean()), 0.0, float(se.max(initial=0.0))
        eta_all = 0.0
    else:
        eta, icpt, eta_se, icpt_se = _fit_line(x[tail], y[tail], se[tail])
        eta_all = _fit_line(x, y, se)[0]
    C_L = float(np.max(y - eta * x))
    C_guess = float(np.max(y - eta_guess * x))
    return {
        "table": rows,
        "eta": eta,
        "eta_stderr": eta_se,
        "eta_all": eta_all,
        "C_L": C_L,
        "C_L_stderr": icpt_se,
        "holds": bool(eta < 1.0 and np.isfinite(C_L)),
        "eta_guess": eta_guess,
        "C_L_at_guess": C_guess,
        "samples": samples,
    }


def lyapunov_stability(model: ModelSpec, samples: int = 200, seed: int = 0, **kw) -> dict:
    """Refit with twice the samples; fits should move by under two stderr."""
    a = lyapunov_check(model, samples=samples, seed=seed, **kw)
    b = lyapunov_check(model, samples=2 * samples, seed=seed, **kw)
    se = np.hypot(a["eta_stderr"], b["eta_stderr"])
    se_c = np.hypot(a["C_L_stderr"], b["C_L_stderr"])
    moved = abs(a["eta"] - b["eta"])
    moved_c = abs(a["C_L"] - b["C_L"])
    return {
        "single": a,
        "double": b,
        "eta_shift": moved,
        "C_L_shift": moved_c,
        "stable": bool(moved <= 2 * se + 1e-12 and moved_c <= 2 * se_c + 1e-12),
    }


def bracket_density_report(model: ModelSpec, depth: int, cutoffs=None) -> dict:
    """Span of the constant bracket closure against low-mode projections.

    Runs the constant closure of the forcing directions under the model's
    multilinear products and reports, for each wavenumber cutoff ``K``,
    the rank and smallest singular value of the set restricted to the modes
    with wavenumber at most ``K``.
    """
    basis = model.basis
    bset = generate_constant_set(basis, list(model.G), depth, degree=max(model.f.degree, 1),
                                 names=model.meta.get("g_list"))
    cutoffs = range(basis.kmax + 1) if cutoffs is None else cutoffs
    rows = []
    for K in cutoffs:
        idx = basis.modes_up_to(int(K))
        rank, smin = span_rank(bset, idx)
        rows.append({"K": int(K), "modes": len(idx), "rank": rank, "sigma_min": smin, "full": rank == len(idx)})
    return {"depth": depth, "size": len(bset), "table": rows}
