"""Command-line front end: ``monosched {thresholds,simulate,verify,figure}``.

Exit codes: 0 success, 1 verification failure, 2 configuration error,
3 numerical non-convergence, 4 incompatible policy/table.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import os
import sys
import time
from pathlib import Path

from . import __version__
from .channel import DEFAULT_QUADRATURE, QuadratureConfig, model_from_dict, canonical_model, validate
from .checks import DEFAULT_ORDERS, dp_suite, policy_suite, threshold_suite
from .errors import ConfigError, InvalidCost, ModelError, QuadratureNotConverged, TableMismatch
from .montecarlo import ExperimentConfig, compare_report, gain_matrix, run_experiment, slot_fractions
from .policies import PolicySpec, policy_from_dict
from .thresholds import MonomialCost, TableKind, fmt, xi_table, zeta_table

EXIT_OK, EXIT_VERIFY, EXIT_CONFIG, EXIT_NUMERIC, EXIT_MISMATCH = 0, 1, 2, 3, 4


def _float_list(text: str) -> list[float]:
    try:
        return [float(x) for x in text.split(",") if x.strip()]
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from exc


def _tol_pairs(text: str) -> tuple[str, float]:
    key, sep, value = text.partition("=")
    if not sep:
        raise argparse.ArgumentTypeError(f"expected key=value, got {text!r}")
    return key.strip(), float(value)


def load_config(path: str | None) -> dict:
    if path is None:
        return {}
    try:
        doc = json.loads(Path(path).read_text())
    except FileNotFoundError as exc:
        raise ConfigError(f"config file not found: {path}") from exc
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    if not isinstance(doc, dict):
        raise ConfigError("config must be a JSON object")
    return doc


def _quadrature(doc: dict) -> QuadratureConfig:
    q = doc.get("quadrature")
    if not q:
        return DEFAULT_QUADRATURE
    try:
        return QuadratureConfig(**q)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"bad quadrature section: {exc}") from exc


def _model(doc: dict):
    if "model" not in doc:
        return canonical_model()
    return model_from_dict(doc["model"])


def _order(doc: dict) -> float | None:
    cost = doc.get("cost")
    if cost is None:
        return None
    try:
        return float(cost["n"] if isinstance(cost, dict) else cost)
    except (KeyError, TypeError, ValueError) as exc:
        raise ConfigError(f"bad cost section: {exc}") from exc


def _seed(flag: int | None, doc: dict) -> int:
    if flag is not None:
        return flag
    mc = doc.get("mc") or {}
    if "seed" in mc:
        return int(mc["seed"])
    return int(os.environ.get("SCHED_SEED", "0"))


def _emit(text: str, out: str | None) -> list[str]:
    if out is None:
        sys.stdout.write(text)
        return []
    Path(out).parent.mkdir(parents=True, exist_ok=True)
    Path(out).write_text(text)
    return [out]


def write_manifest(path: Path, command: str, config: dict, seed: int | None, outputs: list[str], started: float, argv):
    manifest = {
        "command": command,
        "config": config,
        "version": __version__,
        "master_seed": seed,
        "outputs": outputs,
        "wall_clock_seconds": time.time() - started,
        "argv": list(argv),
    }
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(manifest, indent=2) + "\n")


def _csv(header, rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([fmt(v) if isinstance(v, float) else ("" if v is None else v) for v in row])
    return buf.getvalue()


def cmd_thresholds(args) -> dict:
    doc = load_config(args.config)
    model = validate(_model(doc), _quadrature(doc))
    orders = args.n or ([_order(doc)] if _order(doc) else None)
    if not orders:
        raise ConfigError("no monomial order given (use --n or a cost section)")
    T = args.horizon or doc.get("horizon")
    if not T:
        raise ConfigError("no horizon given (use --horizon or a horizon field)")
    rows = []
    for n in orders:
        cost = MonomialCost(n)
        build = xi_table if args.kind == "xi" else zeta_table
        table = build(model, cost, int(T), _quadrature(doc))
        rows.extend((n, t, value, eta) for t, value, eta in table.rows())
    outputs = _emit(_csv(["n", "t", "value", "eta"], rows), args.out)
    resolved = {"model": model.to_dict(), "n": orders, "horizon": int(T), "kind": args.kind}
    return {"config": resolved, "outputs": outputs, "seed": None}


def build_experiment(doc: dict, episodes: int | None, seed: int) -> ExperimentConfig:
    qcfg = _quadrature(doc)
    model = validate(_model(doc), qcfg)
    n = _order(doc)
    if n is None:
        raise ConfigError("config needs a cost section with n")
    cost = MonomialCost(n)
    try:
        T = int(doc["horizon"])
        budget = float(doc["budget"])
        policy_docs = doc["policies"]
    except (KeyError, TypeError, ValueError) as exc:
        raise ConfigError(f"config needs horizon, budget and policies: {exc}") from exc
    mc = doc.get("mc") or {}
    if episodes is None:
        episodes = int(mc.get("episodes", 1000))

    def build_table(kind, c):
        build = xi_table if kind is TableKind.PRIMAL_XI else zeta_table
        return build(model, c, T, qcfg)

    policies = tuple(policy_from_dict(p, cost, build_table) for p in policy_docs)
    try:
        return ExperimentConfig(
            model, cost, T, budget, policies, episodes, seed,
            problem=doc.get("problem", "primal"), keep_totals=bool(mc.get("traces", False)),
        )
    except TableMismatch:
        raise
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc


def cmd_simulate(args) -> dict:
    doc = load_config(args.config)
    seed = _seed(args.seed, doc)
    if args.traces:
        doc.setdefault("mc", {})["traces"] = True
    cfg = build_experiment(doc, args.episodes, seed)
    summary = run_experiment(cfg)
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    payload = summary.to_dict()
    payload["ranking"] = compare_report(summary).to_dict()
    payload["episodes"] = cfg.episodes
    payload["master_seed"] = seed
    (out_dir / "summary.json").write_text(json.dumps(payload, indent=2) + "\n")
    outputs = [str(out_dir / "summary.json")]
    if cfg.keep_totals:
        summary.write_totals_csv(out_dir / "traces.csv")
        outputs.append(str(out_dir / "traces.csv"))
    for s in summary.stats:
        pred = "" if s.closed_form_prediction is None else f"  closed form {s.closed_form_prediction:.10g}"
        print(f"{s.name:>18}: mean {s.mean:.10g} +/- {s.std_error:.3g}{pred}")
    resolved = {
        "model": cfg.model.to_dict(),
        "cost": {"n": cfg.cost.n},
        "horizon": cfg.T,
        "budget": cfg.budget,
        "problem": cfg.problem,
        "policies": [p.name for p in cfg.policies],
        "mc": {"episodes": cfg.episodes, "seed": seed, "traces": cfg.keep_totals},
        "threads": args.threads,
    }
    return {"config": resolved, "outputs": outputs, "seed": seed, "manifest_path": out_dir / "manifest.json"}


def cmd_verify(args) -> dict:
    tol = dict(args.tol or [])
    orders = args.n or list(DEFAULT_ORDERS)
    suites = ["thresholds", "policy", "dp"] if args.suite == "all" else [args.suite]
    checks = []
    for suite in suites:
        if suite == "thresholds":
            checks += threshold_suite(orders, tol)
        elif suite == "policy":
            checks += policy_suite(orders, tol)
        else:
            dp_orders = [n for n in orders if n in (2.0, 2.67)] or [2.0, 2.67]
            checks += dp_suite(dp_orders, tol, grid_points=args.grid)
    lines = [c.line() for c in checks]
    failed = sum(not c.passed for c in checks)
    lines.append(f"{len(checks) - failed}/{len(checks)} checks passed")
    report = "\n".join(lines) + "\n"
    sys.stdout.write(report)
    outputs = []
    if args.out:
        outputs = _emit(report, args.out)
    resolved = {"suite": args.suite, "n": orders, "tol": tol, "grid": args.grid}
    return {"config": resolved, "outputs": outputs, "seed": None, "exit": EXIT_VERIFY if failed else EXIT_OK}


def cmd_figure(args) -> dict:
    doc = load_config(args.config)
    qcfg = _quadrature(doc)
    model = validate(_model(doc), qcfg)
    orders = args.n or [2.0, 2.67, 5.0, 100.0]
    T = args.horizon
    seed = None
    if args.which == "eta":
        header = ["n", "t", "inv_xi_root", "eta"]
        rows = []
        for n in orders:
            table = xi_table(model, MonomialCost(n), T, qcfg)
            rows += [(n, t, table.state[t - 1], eta) for t, _, eta in table.rows()]
    elif args.which == "xi":
        header = ["n", "t", "xi"]
        rows = []
        for n in orders:
            table = xi_table(model, MonomialCost(n), T, qcfg)
            rows += [(n, t, v) for t, v, _ in table.rows()]
    else:
        seed = _seed(args.seed, doc)
        header = ["n", "t", "mean_fraction"]
        rows = []
        gains = gain_matrix(model, seed, args.episodes, T)
        for n in orders:
            cost = MonomialCost(n)
            spec = PolicySpec("causal_primal", cost, xi_table(model, cost, T, qcfg))
            frac = slot_fractions(spec, gains)
            rows += [(n, T - j, float(frac[j])) for j in range(T)]
    outputs = _emit(_csv(header, rows), args.out)
    resolved = {"which": args.which, "model": model.to_dict(), "n": orders, "horizon": T}
    if seed is not None:
        resolved["episodes"] = args.episodes
    return {"config": resolved, "outputs": outputs, "seed": seed}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="monosched", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("thresholds", help="tabulate xi or zeta constants as CSV")
    p.add_argument("config", help="JSON config with a model section")
    p.add_argument("--n", type=_float_list, help="comma-separated monomial orders")
    p.add_argument("--horizon", type=int)
    p.add_argument("--kind", choices=["xi", "zeta"], default="xi")
    p.add_argument("--out")
    p.set_defaults(func=cmd_thresholds)

    p = sub.add_parser("simulate", help="run a seeded Monte Carlo experiment")
    p.add_argument("config")
    p.add_argument("--episodes", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--traces", action="store_true", help="also write per-episode totals")
    p.add_argument("--threads", type=int, default=1, help="worker cap (recorded; runs vectorized in one process)")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("verify", help="run the invariant suites")
    p.add_argument("--suite", choices=["thresholds", "policy", "dp", "all"], default="all")
    p.add_argument("--n", type=_float_list)
    p.add_argument("--tol", type=_tol_pairs, action="append", help="override a tolerance, e.g. dp=0.01")
    p.add_argument("--grid", type=int, default=256, help="DP state/action grid size")
    p.add_argument("--out")
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("figure", help="emit plot data as CSV")
    p.add_argument("--which", choices=["eta", "xi", "policy-vs-t"], required=True)
    p.add_argument("--config", help="JSON config with a model section (default: truncated exponential at 0.001)")
    p.add_argument("--n", type=_float_list)
    p.add_argument("--horizon", type=int, default=20)
    p.add_argument("--episodes", type=int, default=2000)
    p.add_argument("--seed", type=int)
    p.add_argument("--out")
    p.set_defaults(func=cmd_figure)
    return parser


def main(argv=None) -> int:
    argv = sys.argv[1:] if argv is None else list(argv)
    parser = build_parser()
    args = parser.parse_args(argv)
    started = time.time()
    try:
        result = args.func(args)
    except (ConfigError, ModelError, InvalidCost) as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except QuadratureNotConverged as exc:
        print(f"numerical error: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except TableMismatch as exc:
        print(f"incompatible policy/table: {exc}", file=sys.stderr)
        return EXIT_MISMATCH
    manifest_path = result.get("manifest_path")
    if manifest_path is None and result["outputs"]:
        manifest_path = Path(result["outputs"][0] + ".manifest.json")
    if manifest_path is not None:
        write_manifest(Path(manifest_path), args.command, result["config"], result["seed"], result["outputs"], started, argv)
    return result.get("exit", EXIT_OK)


if __name__ == "__main__":
    sys.exit(main())
