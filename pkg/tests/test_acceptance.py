"""Acceptance criteria at their stated tolerances.

Each test records one pass/fail line (printed in the terminal summary)
before asserting. Experiments run through the same harness as the CLI.
"""

from __future__ import annotations

import os

import numpy as np
import pytest

from cone_oracle import brute_force_2x2, random_psd
from trig_oracle import GEN_1, GEN_COS, GEN_SIN, rank_mod_p, trig_closure

from spdelab import cli
from spdelab.config import parse_assignment, resolve
from spdelab.config import deep_merge
from spdelab.experiments import REGISTRY, get_experiment
from spdelab.malliavin import ConeSpec, cone_min, cone_min_full, projected_remainder_bound
from spdelab.spectral import Basis

pytestmark = pytest.mark.slow


def config(name, *sets, **top):
    flags = dict(top)
    for s in sets:
        flags = deep_merge(flags, parse_assignment(s))
    return resolve(get_experiment(name).full_defaults(), {}, flags)


def execute(name, *sets, **top):
    return cli.execute(config(name, *sets, **top))


def test_c01_linear_closed_form(record):
    rows = execute("malliavin-assemble", "params.trajectories=1").tables["closed_form"]
    rows += execute("malliavin-assemble", "params.trajectories=1", "model.nu=0.5",
                    "params.closed_form_modes=[0, 1, 2]").tables["closed_form"]
    worst = max(r["rel_error"] / r["tolerance"] for r in rows)
    lams = sorted({r["lambda"] for r in rows})
    ok = all(r["pass"] for r in rows) and all(r["tolerance"] == 2e-3 for r in rows)
    record(1, ok, f"lambda in {lams}: max rel error = {worst:.3f} x (2 dt)")
    assert ok


@pytest.fixture(scope="module")
def assembly():
    return execute("malliavin-assemble")


def test_c02_forward_adjoint(record, assembly):
    rows = assembly.tables["assembly"]
    worst = max(r["frobenius_rel"] for r in rows)
    ok = len(rows) == 20 and worst <= 1e-8
    record(2, ok, f"{len(rows)} GL paths: max relative Frobenius difference {worst:.2e} (<= 1e-8)")
    assert ok


@pytest.fixture(scope="module")
def flows():
    return execute("flows-check")


def test_c03_duality(record, flows):
    d = flows.tables["duality"]
    worst = max(r["defect"] for r in d)
    ok = len(d) == 50 and worst <= 1e-5
    record(3, ok, f"50 pairs, sup over grid: {worst:.2e} |phi||psi| (<= 1e-5)")
    assert ok


def test_c04_derivative_oracles(record, flows):
    rows = {r["map"]: r for r in flows.tables["oracles"]}
    limits = {"jacobian": 1e-4, "second_variation": 1e-3, "malliavin_deriv": 1e-4}
    ok = all(rows[k]["rel_error"] <= v and rows[k]["order"] >= 1.9 for k, v in limits.items())
    detail = ", ".join(f"{k} err {rows[k]['rel_error']:.1e} order {rows[k]['order']:.3f}" for k in limits)
    record(4, ok, detail)
    assert ok


def test_c05_psd_and_cone_solver(record, assembly):
    rows = assembly.tables["assembly"]
    psd = all(min(r["lambda_min"], r["lambda_min_adjoint"]) >= -1e-10 * r["trace"] for r in rows)
    rng = np.random.default_rng(2024)
    ident_err, gaps, brute_err = 0.0, 0.0, 0.0
    for _ in range(100):
        n = int(rng.integers(2, 12))
        M = random_psd(rng, n, int(rng.integers(1, n + 1)))
        val = cone_min(M, ConeSpec(tuple(range(n)), rng.uniform(0.05, 0.95)))
        ident_err = max(ident_err, abs(val - np.linalg.eigvalsh(M)[0]) / max(1.0, np.trace(M)))
        idx = tuple(rng.choice(n, int(rng.integers(1, n + 1)), replace=False))
        r = cone_min_full(M, ConeSpec(idx, rng.uniform(0.05, 0.95)))
        gaps = max(gaps, r.gap / max(abs(r.value), 1e-8 * np.linalg.eigvalsh(M)[-1]))
        M2 = random_psd(rng, 2)
        a = rng.uniform(0.1, 0.9)
        brute_err = max(brute_err, abs(cone_min(M2, ConeSpec((0,), a)) - brute_force_2x2(M2, a)))
    ok = psd and ident_err <= 1e-8 and gaps <= 1e-6 and brute_err <= 1e-4
    record(5, ok, f"PSD {psd}; Pi=I vs lambda_min {ident_err:.1e}; rel gap {gaps:.1e}; 2x2 brute {brute_err:.1e}")
    assert ok


def test_c06_remainder_certificate(record):
    rng = np.random.default_rng(606)
    worst, used = -np.inf, 0
    while used < 100:
        n = int(rng.integers(3, 10))
        M = random_psd(rng, n, int(rng.integers(1, n + 1)))
        idx = tuple(int(i) for i in rng.choice(n, int(rng.integers(1, n)), replace=False))
        r = projected_remainder_bound(M, idx, rng.uniform(0.05, 0.9), 10 ** rng.uniform(-6, 0))
        if not r["gamma"] > 0:
            continue  # premise (positive cone minimum) fails
        used += 1
        worst = max(worst, r["norm"] - r["bound"])
    ok = worst <= 1e-8
    record(6, ok, f"100 instances: max(||Pi R|| - bound) = {worst:.2e} (<= 1e-8)")
    assert ok


def test_c07_bracket_closure(record):
    res = execute("brackets")
    final = res.summary["final"]
    b = Basis(17)
    oracle = trig_closure([GEN_1, GEN_COS, GEN_SIN], 17, 3)
    exact = rank_mod_p([o[b.modes_up_to(8)] for o in oracle])
    ok = final["K"] == 8 and final["rank"] == 17 and final["sigma_min"] > 0 and exact == 17
    record(7, ok, f"depth 3 rank {final['rank']} on modes <= 8, sigma_min {final['sigma_min']:.2e}, "
                  f"exact GF(p) rank {exact}")
    assert ok


def test_c08_malliavin_tail(record):
    res = execute("malliavin-tail")
    slope = res.summary["slope"]["slope"]
    ok = res.summary["samples"] == 2000 and slope >= 1.0
    record(8, ok, f"2000 paths, log-log slope over [1e-4, 1e-2] = {slope:.3f} (>= 1)")
    assert ok


def test_c09_rho_decay(record):
    diss = execute("control-decay", "params.projection_modes=null", "model.nu=2", "model.eta=-0.5",
                   "params.n_max=5", numerics={"samples": 200})
    ctrl = execute("control-decay", numerics={"samples": 200})
    r, j = diss.summary["rate"], diss.summary["jacobian_rate"]
    ok_d = r < 1 and abs(r / j - 1) <= 0.1
    ok_c = ctrl.summary["rate"] < 1 and ctrl.summary["controlled"] and len(ctrl.tables["decay"]) == 9
    ok = ok_d and ok_c
    record(9, ok, f"dissipative rate {r:.4f} vs Jacobian {j:.4f} ({abs(r / j - 1):.1%}); "
                  f"controlled rate {ctrl.summary['rate']:.2e} over n <= 8")
    assert ok


def test_c10_ibp_identity(record):
    res = execute("cost-estimate", model={"M": 12}, numerics={"samples": 1000, "chunk": 50})
    rows = {r["functional"]: r for r in res.tables["ibp"]}
    ok = set(rows) == {"coord", "tanh"} and all(abs(r["z"]) <= 3 for r in rows.values())
    record(10, ok, ", ".join(f"{k}: z = {r['z']:+.2f}" for k, r in rows.items()) + " (|z| <= 3, 1000 paths)")
    assert ok


def test_c11_wiener_dichotomy(record):
    common = {"seed": 11, "numerics": {"samples": 5000}}
    slopes = {}
    for m in (1, 2):
        res = execute("wienerpoly-rate", f"params.m={m}", **common)
        slopes[m] = res.summary["slope"]["slope"]
    osc0 = 0
    for fam in ("constant", "fitted"):
        res = execute("wienerpoly-rate", "params.m=0", f"params.family={fam}", seed=11, numerics={"samples": 500})
        osc0 += sum(r["osc"] for r in res.tables["rate"])
    adv = execute("wienerpoly-adversary").summary["sup_Z_exponent"]
    ok = slopes[1] >= 1 and slopes[2] >= 1 and osc0 == 0 and abs(adv - 1) <= 0.1
    record(11, ok, f"slopes m=1 {slopes[1]:.2f}, m=2 {slopes[2]:.2f} (>= 1); m=0 OSC events {osc0}; "
                   f"adversarial sup|Z| exponent {adv:.3f}")
    assert ok


@pytest.mark.xfail(strict=True, reason="u0 spread of the final error exceeds 2 (slow Hessian modes at the "
                                        "zeros of the forcing carry u0-dependent weight)")
def test_c12_gl_reachability(record):
    res = execute("gl-reach")
    s = res.summary
    spread = max(s["u0_spread"].values())
    ok = s["decreasing"] and spread <= 2.0
    record(12, ok, f"strictly decreasing {s['decreasing']}; max u0 spread factor {spread:.2f} (<= 2)")
    assert ok


def test_c13_lyapunov(record):
    res = execute("lyapunov", numerics={"samples": 200, "dt": 1e-3})
    s = res.summary
    ok = s["final_sup_variation"] < 0.1 and s["finite"] and s["stable"]
    record(13, ok, f"sup-norm variation {s['final_sup_variation']:.1%} (< 10%); E exp(V) finite {s['finite']}; "
                   f"doubling shifts eta {s['eta_shift']:.1e}, C_L {s['C_L_shift']:.1e} (stable {s['stable']})")
    assert ok


SMALL = {
    "simulate": ["--T", "0.1"],
    "flows-check": ["--T", "0.1", "--set", "params.pairs=3"],
    "malliavin-assemble": ["--T", "0.1", "--set", "params.trajectories=2"],
    "malliavin-tail": ["--samples", "40", "--chunk", "15"],
    "brackets": [],
    "control-decay": ["--samples", "8", "--chunk", "3", "--set", "params.n_max=2"],
    "cost-estimate": ["--samples", "9", "--chunk", "4"],
    "gradient-bound": ["--samples", "6", "--chunk", "4", "--set", "params.n_max=1"],
    "wienerpoly-rate": ["--samples", "12", "--set", "params.path_steps=256"],
    "wienerpoly-adversary": ["--samples", "2", "--set", "params.path_steps=2048"],
    "gl-reach": ["--M", "17", "--set", "params.eps=[0.6, 0.4]", "--set", "params.u0_norms=[1, 10]"],
    "lyapunov": ["--samples", "3", "--dt", "0.01", "--set", "params.V_grid=[0, 2, 4]"],
}


def test_c14_determinism(record, tmp_path):
    assert set(SMALL) == set(REGISTRY)
    differing = []
    for name, args in SMALL.items():
        runs = []
        for k, workers in enumerate((1, 1, 2)):
            root = tmp_path / f"{name}-{k}"
            assert cli.main([name, *args, "--output-dir", str(root), "--workers", str(workers)]) == 0
            (d,) = os.listdir(root)
            runs.append({f: (root / d / f).read_bytes() for f in sorted(os.listdir(root / d))})
        if not (runs[0] == runs[1] == runs[2]):
            differing.append(name)
    ok = not differing
    record(14, ok, f"{len(SMALL)} experiments rerun (1, 1, 2 workers): byte-identical"
           + ("" if ok else f"; differing: {differing}"))
    assert ok
