"""Registry of command-line experiments.

Each experiment owns a parameter schema, defaults for the shared model and
numerics sections, the CSV columns it writes, and a ``run`` function that
returns tables (lists of flat rows) plus a JSON summary. Monte Carlo work
is dispatched through ``map_fn`` in fixed chunks, so results do not depend
on the number of workers.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any, Callable, Literal

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, ValidationError

from .config import ConfigError, ExperimentConfig, ModelConfig, format_validation_error
from .model import ModelSpec, NoiseConfig
from .spectral import Basis, LocalPolynomial


class _Params(BaseModel):
    model_config = ConfigDict(extra="forbid")


@dataclass
class Result:
    tables: dict[str, list[dict]]
    summary: dict
    passed: bool | None = None


@dataclass
class Experiment:
    name: str
    description: str
    tags: tuple[str, ...]
    params: type[_Params]
    columns: dict[str, str]
    run: Callable[[ExperimentConfig, Any, Callable], Result]
    defaults: dict = field(default_factory=dict)

    def parse_params(self, cfg: ExperimentConfig):
        try:
            return self.params.model_validate(cfg.params)
        except ValidationError as exc:
            msg = format_validation_error(exc)
            raise ConfigError(f"params: {msg}") from exc

    def full_defaults(self) -> dict:
        base = {"experiment": self.name, "params": self.params().model_dump(mode="json")}
        from .config import deep_merge

        return deep_merge(base, self.defaults)


REGISTRY: dict[str, Experiment] = {}


def register(exp: Experiment) -> Experiment:
    REGISTRY[exp.name] = exp
    return exp


def get_experiment(name: str) -> Experiment:
    if name not in REGISTRY:
        raise KeyError(f"unknown experiment {name!r}; known: {', '.join(sorted(REGISTRY))}")
    return REGISTRY[name]


def list_experiments(names=None) -> list[dict]:
    """Registry entries (name, description, tags). An empty or missing
    filter lists everything; an unknown name raises ``KeyError``."""
    selected = sorted(REGISTRY) if not names else list(names)
    return [
        {"name": e.name, "description": e.description, "tags": list(e.tags)}
        for e in (get_experiment(n) for n in selected)
    ]


# ------------------------------------------------------------------ helpers


def build_model(mc: ModelConfig) -> ModelSpec:
    from .models import gl_model, rd_model

    if mc.kind == "gl":
        return gl_model(mc.nu, mc.eta, tuple(mc.g_list), mc.M, mc.s)
    if mc.kind == "rd":
        if mc.coefficients is None:
            raise ConfigError("model.coefficients: required for kind 'rd'")
        return rd_model(mc.coefficients, mc.nu, tuple(mc.g_list), mc.M, mc.s)
    basis = Basis(mc.M, nu=mc.nu)
    from .models import forcing_field

    G = np.array([forcing_field(basis, g) for g in mc.g_list]).reshape(len(mc.g_list), mc.M)
    return ModelSpec(basis, LocalPolynomial((0.0,), mc.s), NoiseConfig(G), mc.s, mc.nu, 0.0, "linear")


def steps(cfg: ExperimentConfig) -> int:
    S = int(round(cfg.numerics.T / cfg.numerics.dt))
    if S < 1 or abs(S * cfg.numerics.dt - cfg.numerics.T) > 1e-9 * cfg.numerics.T:
        raise ConfigError("numerics: T must be a positive multiple of dt")
    return S


def initial_condition(model: ModelSpec, kind: str, scale: float, seed: int) -> np.ndarray:
    M = model.M
    if kind == "zero":
        return np.zeros(M)
    if kind == "ones":
        return scale * np.ones(M)
    if kind == "random":
        rng = np.random.default_rng((seed, 7919))
        k = np.asarray(model.basis.wavenumbers, dtype=float)
        return scale * rng.standard_normal(M) / (1.0 + k) ** 2
    raise ConfigError(f"params.u0: unknown initial condition {kind!r}")


def tol(cfg: ExperimentConfig, key: str, default: float) -> float:
    return float(cfg.tolerances.get(key, default))


# -------------------------------------------------------------- experiments


class SimulateParams(_Params):
    u0: Literal["zero", "ones", "random"] = "ones"
    u0_scale: float = 1.0


def run_simulate(cfg, p: SimulateParams, map_fn) -> Result:
    from .integrator import sample_brownian, simulate

    model = build_model(cfg.model)
    S = steps(cfg)
    u0 = initial_condition(model, p.u0, p.u0_scale, cfg.seed)
    traj = simulate(u0, sample_brownian(cfg.seed, S, cfg.numerics.dt, model.d), model)
    rows = [{"t": float(t), **{f"c_{k + 1}": float(x) for k, x in enumerate(u)}}
            for t, u in zip(traj.times, traj.states)]
    summary = {"steps": S, "d": model.d, "final_norm": float(model.norm(traj.final))}
    passed = None
    if cfg.model.kind == "linear" and model.d == 0:
        lam = model.basis.eigenvalues
        exact = np.exp(-np.outer(traj.times, lam)) * u0
        err = float(np.max(np.abs(traj.states - exact)) / max(np.max(np.abs(u0)), 1e-300))
        summary["closed_form_max_rel_error"] = err
        passed = err <= tol(cfg, "closed_form", 1e-12)
    return Result({"trajectory": rows}, summary, passed)


class FlowsParams(_Params):
    pairs: int = Field(50, ge=1)
    u0_scale: float = 0.4


def run_flows(cfg, p: FlowsParams, map_fn) -> Result:
    from .flows import derivative_oracle_report, duality_defect
    from .integrator import sample_brownian, simulate

    model = build_model(cfg.model)
    S = steps(cfg)
    u0 = p.u0_scale * np.random.default_rng((cfg.seed, 1)).standard_normal(model.M)
    traj = simulate(u0, sample_brownian(cfg.seed, S, cfg.numerics.dt, model.d), model)
    report = derivative_oracle_report(traj, seed=cfg.seed)
    limits = {"jacobian": 1e-4, "second_variation": 1e-3, "malliavin_deriv": 1e-4}
    order_min = tol(cfg, "order", 1.9)
    rows = []
    for name, r in report.items():
        lim = tol(cfg, name, limits[name])
        rows.append({"map": name, "h": r["h"], "rel_error": r["rel_error"], "tolerance": lim,
                     "order": r["order"], "order_min": order_min,
                     "pass": bool(r["rel_error"] <= lim and r["order"] >= order_min)})
    rng = np.random.default_rng((cfg.seed, 2))
    dual_tol = tol(cfg, "duality", 1e-5)
    drows = []
    for i in range(p.pairs):
        phi, psi = rng.standard_normal((2, model.M))
        drows.append({"pair": i, "defect": duality_defect(traj, phi, psi)})
    worst = max(r["defect"] for r in drows)
    passed = all(r["pass"] for r in rows) and worst <= dual_tol
    summary = {"oracles": {r["map"]: r["pass"] for r in rows}, "duality_max": worst, "duality_tolerance": dual_tol}
    return Result({"oracles": rows, "duality": drows}, summary, passed)


class AssembleParams(_Params):
    trajectories: int = Field(20, ge=1)
    u0_scale: float = 0.3
    closed_form_modes: list[int] = Field(default_factory=lambda: [0])


def run_assemble(cfg, p: AssembleParams, map_fn) -> Result:
    from .integrator import BrownianPath, brownian_increments, path_seed, sample_brownian, simulate
    from .malliavin import assemble_adjoint, assemble_forward

    model = build_model(cfg.model)
    S, dt = steps(cfg), cfg.numerics.dt
    frob_tol, psd_tol = tol(cfg, "frobenius", 1e-8), tol(cfg, "psd", 1e-10)
    rows = []
    for i in range(p.trajectories):
        u0 = p.u0_scale * np.random.default_rng((cfg.seed, i, 1)).standard_normal(model.M)
        path = BrownianPath(cfg.seed, S, dt, brownian_increments(path_seed(cfg.seed, i), S, dt, model.d))
        traj = simulate(u0, path, model)
        a, b = assemble_forward(traj).hat, assemble_adjoint(traj).hat
        scale = np.linalg.norm(a)
        rel = float(np.linalg.norm(a - b) / scale) if scale else float(np.linalg.norm(b))
        lam_min, trace = float(np.linalg.eigvalsh(a)[0]), float(np.trace(a))
        lam_adj = float(np.linalg.eigvalsh(b)[0])
        psd = min(lam_min, lam_adj) >= -psd_tol * max(trace, 0.0)
        rows.append({"path": i, "frobenius_rel": rel, "lambda_min": lam_min, "lambda_min_adjoint": lam_adj,
                     "trace": trace, "pass": bool(rel <= frob_tol and psd)})
    # linear closed form: N = 0, one forcing direction e_k, L2 coordinates
    basis = Basis(model.M, nu=cfg.model.nu)
    crows = []
    for k in p.closed_form_modes:
        if not 0 <= k < model.M:
            raise ConfigError(f"params.closed_form_modes: index {k} outside 0..{model.M - 1}")
        lin = ModelSpec(basis, LocalPolynomial((0.0,)), NoiseConfig(np.eye(model.M)[[k]]), 0.0)
        traj = simulate(np.zeros(model.M), sample_brownian(cfg.seed, S, dt, 1), lin)
        lam = float(basis.eigenvalues[k])
        exact = (1 - np.exp(-2 * lam * S * dt)) / (2 * lam)
        entry = float(assemble_forward(traj).hat[k, k])
        rel = abs(entry - exact) / exact
        lim = tol(cfg, "closed_form", 2 * dt)
        crows.append({"mode": k, "lambda": lam, "entry": entry, "closed_form": float(exact),
                      "rel_error": float(rel), "tolerance": lim, "pass": bool(rel <= lim)})
    passed = all(r["pass"] for r in rows + crows)
    summary = {"max_frobenius_rel": max(r["frobenius_rel"] for r in rows),
               "min_psd_margin": min(r["lambda_min"] / r["trace"] if r["trace"] else 0.0 for r in rows),
               "closed_form_max_rel": max((r["rel_error"] for r in crows), default=0.0)}
    return Result({"assembly": rows, "closed_form": crows}, summary, passed)


class TailParams(_Params):
    alpha: float = Field(0.5, gt=0, le=1)
    projection_modes: int = Field(2, ge=0)
    eps: list[float] = Field(default_factory=lambda: [float(x) for x in np.geomspace(1e-4, 1e-2, 5)])
    u0: Literal["zero", "ones", "random"] = "zero"


def run_tail(cfg, p: TailParams, map_fn) -> Result:
    from .malliavin import ConeSpec, tail_estimate

    model = build_model(cfg.model)
    steps(cfg)
    cone = ConeSpec(tuple(model.basis.modes_up_to(p.projection_modes)), p.alpha)
    u0 = initial_condition(model, p.u0, 1.0, cfg.seed)
    out = tail_estimate(model, u0, cone, p.eps, cfg.numerics.samples, cfg.seed, cfg.numerics.T,
                        cfg.numerics.dt, map_fn=map_fn)
    slope = out["slope"]
    passed = bool(np.isfinite(slope["slope"]) and slope["slope"] >= tol(cfg, "slope", 1.0))
    values = out["values"]
    summary = {"slope": slope, "samples": cfg.numerics.samples,
               "cone_min_quantiles": {str(q): float(np.quantile(values, q)) for q in (0.01, 0.1, 0.5)}}
    return Result({"tail": out["table"]}, summary, passed)


class BracketParams(_Params):
    depth: int = Field(3, ge=1)
    cutoffs: list[int] | None = None


def run_brackets(cfg, p: BracketParams, map_fn) -> Result:
    from .models import bracket_density_report

    model = build_model(cfg.model)
    rep = bracket_density_report(model, p.depth, p.cutoffs)
    last = rep["table"][-1]
    return Result({"ranks": rep["table"]}, {"depth": rep["depth"], "size": rep["size"], "final": last},
                  bool(all(r["full"] for r in rep["table"])))


class DecayParams(_Params):
    projection_modes: int | None = 2
    delta: float = Field(0.1, gt=0)
    n_max: int = Field(8, ge=1)
    xi_mode: int = Field(1, ge=0)
    block: float = Field(1.0, gt=0)


def _settings(model, projection_modes, delta):
    from .control import ControlSettings

    idx = () if projection_modes is None else tuple(model.basis.modes_up_to(projection_modes))
    return ControlSettings(delta=delta, indices=idx)


def _unit(model, k):
    if k >= model.M:
        raise ConfigError(f"params.xi_mode: index {k} outside 0..{model.M - 1}")
    xi = np.eye(model.M)[k]
    return xi / model.norm(xi)


def run_decay(cfg, p: DecayParams, map_fn) -> Result:
    from .control import rho_decay_estimate

    model = build_model(cfg.model)
    st = _settings(model, p.projection_modes, p.delta)
    out = rho_decay_estimate(model, np.zeros(model.M), _unit(model, p.xi_mode), st, p.n_max,
                             cfg.numerics.samples, cfg.seed, cfg.numerics.dt, p.block, cfg.numerics.chunk,
                             map_fn=map_fn)
    rows = [dict(r, jacobian_mean=j) for r, j in zip(out["table"], out["jacobian_table"])]
    rate, jrate = out["rate"], out["jacobian_rate"]
    summary = {"rate": rate, "jacobian_rate": jrate, "controlled": st.active,
               "rate_ratio": rate / jrate if jrate else float("nan")}
    passed = rate < 1
    if not st.active:
        passed = passed and abs(rate / jrate - 1) <= tol(cfg, "rate_match", 0.1)
    return Result({"decay": rows}, summary, bool(passed))


class CostParams(_Params):
    projection_modes: int | None = 2
    delta: float = Field(0.1, gt=0)
    n_pairs: int = Field(1, ge=1)
    xi_mode: int = Field(1, ge=0)
    block: float = Field(1.0, gt=0)
    functionals: list[Literal["coord", "tanh", "const"]] = Field(default_factory=lambda: ["coord", "tanh"])


def run_cost(cfg, p: CostParams, map_fn) -> Result:
    from .control import ibp_identity_check

    model = build_model(cfg.model)
    st = _settings(model, p.projection_modes, p.delta)
    out = ibp_identity_check(model, np.zeros(model.M), _unit(model, p.xi_mode), st, p.n_pairs,
                             cfg.numerics.samples, cfg.seed, cfg.numerics.dt, p.block, tuple(p.functionals),
                             z_max=tol(cfg, "z_max", 3.0), chunk=cfg.numerics.chunk, map_fn=map_fn)
    c = out["cost"]
    crow = [{"quantity": q, "mean": c[q], "stderr": c[q + "_stderr"]}
            for q in ("ito", "correction", "estimate", "delta_sq")]
    return Result({"ibp": out["table"], "cost": crow}, {"T": out["T"], "samples": out["samples"]},
                  out["holds"])


class GradientParams(_Params):
    functional: Literal["coord", "tanh", "const"] = "tanh"
    projection_modes: int | None = 2
    delta: float = Field(0.1, gt=0)
    n_max: int = Field(2, ge=1)
    block: float = Field(1.0, gt=0)


def run_gradient(cfg, p: GradientParams, map_fn) -> Result:
    from .control import gradient_bound_check

    model = build_model(cfg.model)
    st = _settings(model, p.projection_modes, p.delta)
    out = gradient_bound_check(model, np.zeros(model.M), p.functional, p.n_max, cfg.numerics.samples, cfg.seed,
                               st, cfg.numerics.dt, p.block, chunk=cfg.numerics.chunk, map_fn=map_fn)
    z = tol(cfg, "z_max", 3.0)
    rows = []
    for r in out["table"]:
        se = r["residual_stderr"]
        ok = abs(r["residual"]) <= z * se if se > 0 else r["residual"] == 0
        rows.append({**r, "pass": bool(ok)})
    summary = {"max_lhs": {str(k): v for k, v in out["max_lhs"].items()}}
    return Result({"gradient": rows}, summary, all(r["pass"] for r in rows))


class RateParams(_Params):
    m: int = Field(1, ge=0)
    family: Literal["zero", "deterministic", "constant", "fitted"] = "fitted"
    eps: list[float] = Field(default_factory=lambda: [float(x) for x in np.geomspace(1e-3, 1e-1, 9)])
    path_steps: int = Field(2048, ge=2)
    resolution: Literal["certify", "grid"] = "certify"


def run_rate(cfg, p: RateParams, map_fn) -> Result:
    from .wiener import coefficient_family, osc_rate_estimate

    try:
        gen = coefficient_family(p.family, p.m, seed=cfg.seed, steps=p.path_steps)
    except ValueError as exc:
        raise ConfigError(f"params: {exc}") from exc
    out = osc_rate_estimate(gen, p.eps, p.m, cfg.numerics.samples, cfg.seed, p.resolution, map_fn=map_fn)
    summary = {"m": p.m, "family": p.family, "slope": out["slope"], "slope_fit": out["slope_fit"],
               "uncertified": out["uncertified"], "grid_dt": out["grid_dt"]}
    osc_total = sum(r["osc"] for r in out["table"])
    if p.m == 0:
        passed = osc_total == 0
    else:
        s = out["slope"]["slope"]
        passed = bool(np.isfinite(s) and s >= tol(cfg, "slope", 1.0)) if osc_total else None
    return Result({"rate": out["table"]}, summary, passed)


class AdversaryParams(_Params):
    theta: float = Field(0.5, gt=0, lt=1)
    eps: list[float] = Field(default_factory=lambda: [float(x) for x in np.geomspace(1e-3, 1e-2, 4)])
    path_steps: int = Field(2**14, ge=16)


def run_adversary(cfg, p: AdversaryParams, map_fn) -> Result:
    from .wiener import adversarial_scaling

    out = adversarial_scaling(p.theta, p.eps, cfg.numerics.samples, cfg.seed, p.path_steps)
    expo = out["sup_Z_exponent"]
    passed = abs(expo - 1.0) <= tol(cfg, "exponent", 0.1)
    summary = {"theta": p.theta, "sup_Z_exponent": expo, "lip_exponent": out["lip_exponent"]}
    return Result({"scaling": out["table"]}, summary, bool(passed))


class ReachParams(_Params):
    forcing: str = "cos"
    gamma: float = Field(13.0, gt=0)
    eps: list[float] = Field(default_factory=lambda: [0.3, 0.1, 0.03])
    u0_norms: list[float] = Field(default_factory=lambda: [1.0, 10.0, 100.0])


def run_reach(cfg, p: ReachParams, map_fn) -> Result:
    from .models import forcing_field
    from .reachability import reachability_experiment, scaled_initial_conditions

    model = build_model(cfg.model)
    try:
        g = forcing_field(model.basis, p.forcing)
    except ValueError as exc:
        raise ConfigError(f"params.forcing: {exc}") from exc
    u0s = scaled_initial_conditions(model.basis, p.u0_norms, seed=cfg.seed)
    out = reachability_experiment(model, u0s, g, p.eps, p.gamma)
    spread = {str(k): v for k, v in out["u0_spread"].items()}
    limit = tol(cfg, "u0_spread", 2.0)
    ok_spread = all(v <= limit for v in out["u0_spread"].values())
    summary = {"decreasing": out["decreasing"], "u0_spread": spread, "u0_spread_limit": limit,
               "insensitive": bool(ok_spread), "gamma": p.gamma}
    return Result({"reach": out["table"]}, summary, bool(out["decreasing"] and ok_spread))


class LyapunovParams(_Params):
    u0_norms: list[float] = Field(default_factory=lambda: [1.0, 10.0, 1e3])
    apriori_profile: Literal["const", "bump", "wave"] = "const"
    apriori_noise: bool = False
    apriori_samples: int = Field(1, ge=1)
    V_grid: list[float] = Field(default_factory=lambda: [0.0, 2.0, 4.0, 6.0, 8.0])
    eta_guess: float = 0.5
    profile: Literal["const", "bump", "wave"] = "wave"


def run_lyapunov(cfg, p: LyapunovParams, map_fn) -> Result:
    from .models import apriori_bound_check, lyapunov_stability

    model = build_model(cfg.model)
    n = cfg.numerics
    am = model if p.apriori_noise else model.with_noise(np.zeros((0, model.M)))
    ap = apriori_bound_check(am, tuple(p.u0_norms), p.apriori_samples, cfg.seed, n.T, n.dt, p.apriori_profile)
    sups = ap["final_sup"]
    vals = np.array(list(sups.values()))
    variation = float((vals.max() - vals.min()) / vals.max()) if vals.max() > 0 else 0.0
    arows = [{"u0_norm": float(k), "final_sup": float(v), "C": float(ap["C_by_u0"].get(k, float("nan")))}
             for k, v in sups.items()]
    ly = lyapunov_stability(model, n.samples, cfg.seed, V_grid=tuple(p.V_grid), eta_guess=p.eta_guess,
                            T=n.T, dt=n.dt, profile=p.profile)
    single, double = ly["single"], ly["double"]
    lrows = [dict(r, samples=single["samples"]) for r in single["table"]]
    lrows += [dict(r, samples=double["samples"]) for r in double["table"]]
    limit = tol(cfg, "variation", 0.1)
    finite = all(np.isfinite(r["mean_exp_V"]) for r in lrows)
    summary = {
        "final_sup_variation": variation, "variation_limit": limit, "apriori_violations": ap["violations"],
        "eta": single["eta"], "eta_stderr": single["eta_stderr"], "C_L": single["C_L"],
        "eta_double": double["eta"], "C_L_double": double["C_L"], "eta_shift": ly["eta_shift"],
        "C_L_shift": ly["C_L_shift"], "stable": ly["stable"], "finite": bool(finite),
    }
    passed = variation < limit and finite and ly["stable"] and single["holds"]
    return Result({"apriori": arows, "lyapunov": lrows}, summary, bool(passed))


_TRAJ = "trajectory.csv: t, c_1..c_M (coefficients in the orthonormal Fourier basis, mode order 1, cos1, sin1, ...)"

register(Experiment(
    "simulate", "Integrate one Galerkin path with the exponential-Euler scheme",
    ("integrator", "mild solutions"), SimulateParams, {"trajectory": _TRAJ}, run_simulate,
    {"model": {"M": 16}},
))
register(Experiment(
    "flows-check", "Finite-difference oracles for Jacobian, second variation and Malliavin derivative, plus duality",
    ("linearisation", "adjoint flow", "duality"), FlowsParams,
    {"oracles": "oracles.csv: map, h, rel_error, tolerance, order, order_min, pass",
     "duality": "duality.csv: pair, defect (sup over the grid, relative to |phi| |psi|)"},
    run_flows, {"model": {"M": 16}},
))
register(Experiment(
    "malliavin-assemble", "Forward versus adjoint assembly of the Malliavin matrix and the linear closed form",
    ("malliavin matrix", "adjoint flow"), AssembleParams,
    {"assembly": "assembly.csv: path, frobenius_rel, lambda_min, lambda_min_adjoint, trace, pass",
     "closed_form": "closed_form.csv: mode, lambda, entry, closed_form, rel_error, tolerance, pass"},
    run_assemble, {"model": {"M": 16}},
))
register(Experiment(
    "malliavin-tail", "Empirical small-value tail of the cone-restricted Malliavin eigenvalue",
    ("malliavin matrix", "hormander condition", "cone"), TailParams,
    {"tail": "tail.csv: eps, count, n, rate, stderr, wilson_low, wilson_high, upper95"},
    run_tail, {"model": {"M": 16}, "numerics": {"samples": 2000, "chunk": 100}},
))
register(Experiment(
    "brackets", "Rank of the constant bracket set against low-mode projections",
    ("hormander condition", "lie brackets", "polynomial fields"), BracketParams,
    {"ranks": "ranks.csv: K, modes, rank, sigma_min, full"},
    run_brackets, {"model": {"M": 17}},
))
register(Experiment(
    "control-decay", "Decay of the control residual over double blocks",
    ("control", "smoothing", "asymptotic strong feller"), DecayParams,
    {"decay": "decay.csv: n, mean_norm, stderr, jacobian_mean"},
    run_decay, {"model": {"M": 16}, "numerics": {"dt": 1e-2, "samples": 100}},
))
register(Experiment(
    "cost-estimate", "Integration-by-parts identity and Skorokhod cost of the control",
    ("control", "skorokhod integral", "integration by parts"), CostParams,
    {"ibp": "ibp.csv: functional, lhs, rhs, skorokhod, remainder, difference (each with _stderr), z, holds",
     "cost": "cost.csv: quantity (ito, correction, estimate, delta_sq), mean, stderr"},
    run_cost, {"model": {"M": 8}, "numerics": {"dt": 2e-2, "samples": 200}},
))
register(Experiment(
    "gradient-bound", "Both sides of the approximate integration by parts per probe direction",
    ("control", "gradient bound", "asymptotic strong feller"), GradientParams,
    {"gradient": "gradient.csv: n, probe, lhs, skorokhod, remainder, residual (each with _stderr), pass"},
    run_gradient, {"model": {"M": 8}, "numerics": {"dt": 2e-2, "samples": 100}},
))
register(Experiment(
    "wienerpoly-rate", "Frequency of the oscillation outcome for Wiener polynomials",
    ("wiener polynomials", "dichotomy"), RateParams,
    {"rate": "rate.csv: eps, samples, premise, osc, small, lip, rate, wilson_low, wilson_high, upper95, "
             "rate_unconditioned"},
    run_rate, {"numerics": {"samples": 500, "chunk": 50}},
))
register(Experiment(
    "wienerpoly-adversary", "Interpolation example: scaling of sup|Z| and Lip(A) in eps",
    ("wiener polynomials", "sharpness"), AdversaryParams,
    {"scaling": "scaling.csv: eps, sup_Z, sup_Z_se, lip_A, lip_A_se"},
    run_adversary, {"numerics": {"samples": 12}},
))
register(Experiment(
    "gl-reach", "Three-phase control driving Ginzburg-Landau data to a target",
    ("ginzburg-landau", "irreducibility", "reachability"), ReachParams,
    {"reach": "reach.csv: eps, u0_norm, log10_error, error, deviation_at_1, log10_deviation_at_2, "
              "target_norm, relaxation_rate, profile_residual"},
    run_reach, {"model": {"M": 32, "g_list": ["cos"]}},
))
register(Experiment(
    "lyapunov", "A priori sup bound uniformity and exponential Lyapunov moments",
    ("ginzburg-landau", "a priori bounds", "lyapunov"), LyapunovParams,
    {"apriori": "apriori.csv: u0_norm, final_sup, C",
     "lyapunov": "lyapunov.csv: V0, log_moment, stderr, mean_exp_V, stderr_exp_V, samples"},
    run_lyapunov, {"model": {"M": 16}, "numerics": {"dt": 2e-3, "samples": 40}},
))
