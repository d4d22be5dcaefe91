"""Command-line front end: ``spdelab <experiment> [options]``.

Configuration precedence (later wins): experiment defaults, then the YAML
file given by ``--config``, then flags (``--seed``, ``--M``, ``--dt``,
``--T``, ``--samples``, ``--chunk`` and any number of ``--set key=value``).

Outputs go to ``<output-dir>/<experiment>-<hash12>/``: ``config.yaml``
(resolved configuration), ``summary.json`` and one CSV per table. The
output directory defaults to ``$SPDELAB_OUTPUT_DIR`` or
``./spdelab-output``. Files are written into a temporary directory and
renamed into place, so a failed run leaves no partial outputs.

Exit codes: 0 success, 2 configuration error, 3 numerical abort.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import os
import shutil
import sys
import tempfile
from concurrent.futures import ProcessPoolExecutor

import numpy as np
import yaml

from . import __version__
from .config import ConfigError, ExperimentConfig, deep_merge, load_file, parse_assignment, resolve
from .experiments import REGISTRY, Result, get_experiment, list_experiments
from .model import NumericalAbort

EXIT_OK, EXIT_CONFIG, EXIT_NUMERICAL = 0, 2, 3
ENV_OUTPUT = "SPDELAB_OUTPUT_DIR"
DEFAULT_OUTPUT = "spdelab-output"


# ------------------------------------------------------------ serialisation


def _plain(x):
    """JSON-safe copy: numpy scalars to Python, non-finite floats to strings."""
    if isinstance(x, dict):
        return {str(k): _plain(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_plain(v) for v in x]
    if isinstance(x, np.ndarray):
        return _plain(x.tolist())
    if isinstance(x, (bool, np.bool_)):
        return bool(x)
    if isinstance(x, (int, np.integer)):
        return int(x)
    if isinstance(x, (float, np.floating)):
        x = float(x)
        return x if math.isfinite(x) else repr(x)
    return x


def dumps_json(data) -> str:
    return json.dumps(_plain(data), sort_keys=True, indent=2) + "\n"


def _cell(v) -> str:
    if v is None:
        return ""
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return str(v)


def table_csv(rows: list[dict], config_hash: str, seed: int) -> str:
    """CSV with two ``#`` header lines carrying the config hash and seed;
    columns in first-seen order."""
    cols: list[str] = []
    for r in rows:
        cols += [k for k in r if k not in cols]
    buf = io.StringIO()
    buf.write(f"# config_hash: {config_hash}\n# seed: {seed}\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(cols)
    for r in rows:
        w.writerow([_cell(r.get(c)) for c in cols])
    return buf.getvalue()


def render_outputs(cfg: ExperimentConfig, result: Result) -> dict[str, str]:
    """File name to content, fully determined by ``cfg`` and ``result``."""
    h, seed = cfg.hash(), cfg.seed
    files = {
        "config.yaml": f"# config_hash: {h}\n# seed: {seed}\n"
                       + yaml.safe_dump(cfg.canonical(), sort_keys=True, default_flow_style=False),
        "summary.json": dumps_json({
            "experiment": cfg.experiment,
            "config_hash": h,
            "seed": seed,
            "version": __version__,
            "passed": result.passed,
            "summary": result.summary,
        }),
    }
    for name, rows in result.tables.items():
        files[f"{name}.csv"] = table_csv(rows, h, seed)
    return files


def output_root(cfg: ExperimentConfig) -> str:
    return cfg.output_dir or os.environ.get(ENV_OUTPUT) or DEFAULT_OUTPUT


def write_atomic(root: str, name: str, files: dict[str, str]) -> str:
    """Write ``files`` into ``root/name`` via a temporary sibling directory."""
    os.makedirs(root, exist_ok=True)
    target = os.path.join(root, name)
    tmp = tempfile.mkdtemp(prefix=f".{name}.", dir=root)
    try:
        for fname, text in files.items():
            with open(os.path.join(tmp, fname), "w", encoding="utf-8", newline="") as fh:
                fh.write(text)
        old = None
        if os.path.exists(target):
            old = tempfile.mkdtemp(prefix=f".{name}.old.", dir=root)
            os.rmdir(old)
            os.rename(target, old)
        os.rename(tmp, target)
        if old:
            shutil.rmtree(old, ignore_errors=True)
    except BaseException:
        shutil.rmtree(tmp, ignore_errors=True)
        raise
    return target


# ------------------------------------------------------------------ running


def execute(cfg: ExperimentConfig, workers: int = 1) -> Result:
    """Run the configured experiment; ``workers > 1`` maps Monte Carlo chunks
    over a process pool (ordered, so results are worker-count independent)."""
    exp = get_experiment(cfg.experiment)
    params = exp.parse_params(cfg)
    if workers <= 1:
        return exp.run(cfg, params, map)
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return exp.run(cfg, params, lambda fn, jobs: pool.map(fn, jobs))


def run(cfg: ExperimentConfig, workers: int = 1) -> tuple[str, Result]:
    """Execute and write outputs; returns the run directory and the result."""
    result = execute(cfg, workers)
    files = render_outputs(cfg, result)
    path = write_atomic(output_root(cfg), f"{cfg.experiment}-{cfg.hash()[:12]}", files)
    return path, result


def build_config(name: str, args: argparse.Namespace) -> ExperimentConfig:
    exp = get_experiment(name)
    file_data = load_file(args.config) if args.config else {}
    if "experiment" in file_data and file_data["experiment"] != name:
        raise ConfigError(f"experiment: config file is for {file_data['experiment']!r}, not {name!r}")
    flags: dict = {}
    for key, section in (("seed", None), ("M", "model"), ("dt", "numerics"), ("T", "numerics"),
                         ("samples", "numerics"), ("chunk", "numerics")):
        v = getattr(args, key)
        if v is not None:
            flags = deep_merge(flags, {section: {key: v}} if section else {key: v})
    if args.output_dir is not None:
        flags["output_dir"] = args.output_dir
    for item in args.set or []:
        flags = deep_merge(flags, parse_assignment(item))
    return resolve(exp.full_defaults(), file_data, flags)


# ---------------------------------------------------------------------- CLI


def _experiment_epilog(name: str) -> str:
    exp = REGISTRY[name]
    lines = ["output files (CSV columns):"]
    lines += [f"  {text}" for text in exp.columns.values()]
    lines.append("  summary.json: experiment, config_hash, seed, version, passed, summary")
    lines.append("  config.yaml: resolved configuration")
    lines.append("every CSV starts with '# config_hash: ...' and '# seed: ...' lines.")
    lines.append("")
    lines.append("resolved defaults:")
    defaults = resolve(exp.full_defaults()).canonical()
    lines += ["  " + ln for ln in yaml.safe_dump(defaults, sort_keys=True).splitlines()]
    lines.append("")
    lines.append("precedence: defaults < --config file < flags (--set a.b=value, --seed, --M, ...).")
    return "\n".join(lines)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="spdelab",
        description="Numerical experiments for Galerkin SPDEs. Exit codes: 0 success, 2 config error, "
                    f"3 numerical abort. Output directory defaults to ${ENV_OUTPUT}.",
    )
    parser.add_argument("--version", action="version", version=f"spdelab {__version__}")
    sub = parser.add_subparsers(dest="command", required=True, metavar="command")
    ls = sub.add_parser("list-experiments", help="list registered experiments")
    ls.add_argument("names", nargs="*", help="experiments to show (default: all)")
    ls.add_argument("--json", action="store_true", help="print JSON instead of text")
    for name in sorted(REGISTRY):
        exp = REGISTRY[name]
        p = sub.add_parser(name, help=exp.description, description=exp.description,
                           epilog=_experiment_epilog(name), formatter_class=argparse.RawDescriptionHelpFormatter)
        p.add_argument("--config", help="YAML configuration file")
        p.add_argument("--set", action="append", metavar="KEY=VALUE",
                       help="override any field, e.g. params.alpha=0.4 or model.g_list=[cos]")
        p.add_argument("--seed", type=int)
        p.add_argument("--M", type=int, help="number of Galerkin modes")
        p.add_argument("--dt", type=float)
        p.add_argument("--T", type=float)
        p.add_argument("--samples", type=int)
        p.add_argument("--chunk", type=int, help="Monte Carlo chunk size (fixed, independent of workers)")
        p.add_argument("--output-dir", help=f"output root (default ${ENV_OUTPUT} or ./{DEFAULT_OUTPUT})")
        p.add_argument("--workers", type=int, default=1, help="worker processes for Monte Carlo chunks")
        p.add_argument("--print-config", action="store_true", help="print the resolved config and exit")
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.command == "list-experiments":
        try:
            entries = list_experiments(args.names)
        except KeyError as exc:
            print(f"error: {exc.args[0]}", file=sys.stderr)
            return EXIT_CONFIG
        if args.json:
            sys.stdout.write(dumps_json(entries))
        else:
            for e in entries:
                print(f"{e['name']:<22} {e['description']}  [{', '.join(e['tags'])}]")
        return EXIT_OK
    try:
        if args.workers < 1:
            raise ConfigError("--workers must be at least 1")
        cfg = build_config(args.command, args)
        if args.print_config:
            sys.stdout.write(yaml.safe_dump(cfg.model_dump(mode="json"), sort_keys=True))
            return EXIT_OK
        path, result = run(cfg, args.workers)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except NumericalAbort as exc:
        print(f"numerical abort: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except (FloatingPointError, np.linalg.LinAlgError) as exc:
        print(f"numerical abort: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except ValueError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    status = {True: "PASS", False: "FAIL", None: "DONE"}[result.passed]
    print(f"{status} {cfg.experiment} -> {path}")
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
