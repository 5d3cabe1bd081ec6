"""Command-line interface: ``frailtyfit {simulate,fit,benchmark,report}``.

Exit codes: 0 success (for ``fit``: converged), 1 input error, 2 the fit did
not converge.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

import numpy as np

from .data import DataError, load_csv, write_csv
from .estimators import ALIASES, METHODS, FitConfig, fit, resolve_method
from .inference import ci_log_theta, ci_wald
from .montecarlo import MonteCarloReport, run_grid
from .simulate import (SimulationScenario, bundled_scenarios, calibrate_censoring, generate, load_scenarios,
                       stream, write_sidecar)

EXIT_OK, EXIT_INPUT, EXIT_NOT_CONVERGED = 0, 1, 2


class InputError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_INPUT, f"{self.prog}: error: {message}\n")


def _method_list(text: str) -> list[str]:
    try:
        return [resolve_method(m.strip()) for m in text.split(",") if m.strip()]
    except ValueError as exc:
        raise argparse.ArgumentTypeError(str(exc)) from None


def build_parser() -> argparse.ArgumentParser:
    method_names = sorted([*METHODS, *ALIASES])
    common = _Parser(add_help=False)
    common.add_argument("--seed", type=int, default=1, help="master random seed (default 1)")
    common.add_argument("--threads", type=int, default=1, help="worker processes for replicates (default 1)")
    common.add_argument("--out", help="output file (simulate, fit, report) or directory (benchmark)")

    parser = _Parser(prog="frailtyfit", description="Shared gamma frailty models for clustered survival data.")
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("simulate", parents=[common], help="draw one dataset to CSV plus a JSON sidecar")
    p.add_argument("--scenario", default="table4_c20",
                   help="scenario JSON path or bundled name (default table4_c20)")
    p.add_argument("--replicate", type=int, default=0, help="replicate index of the random stream (default 0)")

    p = sub.add_parser("fit", parents=[common], help="fit a model to a CSV dataset")
    p.add_argument("--data", required=True, help="CSV with header cluster,time,status,x1..xp")
    p.add_argument("--method", default="em", choices=method_names,
                   help="estimator; hl is an alias of ppl (default em)")
    p.add_argument("--level", type=float, default=0.95, help="confidence level (default 0.95)")

    p = sub.add_parser("benchmark", parents=[common], help="Monte Carlo comparison over replicates")
    p.add_argument("--scenario", required=True, help="scenario JSON path or bundled name, e.g. table4_c20")
    p.add_argument("--reps", type=int, default=200, help="replicates per scenario (default 200)")
    p.add_argument("--methods", type=_method_list, default=list(METHODS),
                   help="comma-separated methods (default em,ppl,mml,pfl)")
    p.add_argument("--level", type=float, default=0.95, help="confidence level (default 0.95)")

    p = sub.add_parser("report", parents=[common], help="print tables from a saved benchmark report")
    p.add_argument("path", help="report.json or the benchmark output directory")

    sub.add_parser("scenarios", help="list bundled scenario names")
    return parser


def _check_level(level: float) -> None:
    if not 0 < level < 1:
        raise InputError("level must lie in (0, 1)")


def cmd_simulate(args) -> int:
    if not args.out:
        raise InputError("--out is required for simulate")
    scenarios = load_scenarios(args.scenario)
    if len(scenarios) != 1:
        raise InputError("simulate takes a file with exactly one scenario")
    sc = scenarios[0]
    rate = calibrate_censoring(sc)
    data, z = generate(sc, stream(args.seed, 0, args.replicate), cens_rate=rate)
    out = Path(args.out)
    write_csv(data, out)
    sidecar = out.with_suffix(".json")
    write_sidecar(sc, z, rate, sidecar, {"seed": args.seed, "replicate": args.replicate})
    print(f"wrote {out} ({data.n} subjects, {data.g} clusters, "
          f"{100 * (1 - data.status.mean()):.1f}% censored) and {sidecar}")
    return EXIT_OK


def fit_summary(f, level: float) -> dict:
    out = f.to_dict()
    cis = {}
    for k, (b, se) in enumerate(zip(f.beta, f.se_beta if f.se_beta is not None else [None] * len(f.beta))):
        if se is not None and np.isfinite(se) and se > 0:
            cis[f"beta{k + 1}"] = ci_wald(float(b), float(se), level)._asdict()
    if f.se_theta is not None and f.se_theta > 0:
        cis["theta_ci1"] = ci_wald(f.theta, f.se_theta, level)._asdict()
        cis["theta_ci2"] = ci_log_theta(f.theta, f.se_theta, level)._asdict()
    out["confidence_intervals"] = cis
    out["level"] = level
    return out


def _print_fit(summary: dict) -> None:
    est, se, cis = summary["estimates"], summary["standard_errors"], summary["confidence_intervals"]
    pct = f"{100 * summary['level']:g}%"
    print(f"{'param':<8}{'estimate':>12}{'se':>12}   {pct} CI")
    for name, value in est.items():
        s = se.get(name)
        s_txt = "-" if s is None else f"{s:.5f}"
        ci = cis.get(name)
        ci_txt = f"({ci['lower']:.5f}, {ci['upper']:.5f})" if ci else ""
        print(f"{name:<8}{value:>12.5f}{s_txt:>12}   {ci_txt}")
    for key, label in (("theta_ci1", "theta CI (wald)"), ("theta_ci2", "theta CI (log)")):
        if key in cis:
            print(f"{label:<16}({cis[key]['lower']:.5f}, {cis[key]['upper']:.5f})")
    status = "converged" if summary["converged"] else "NOT converged"
    print(f"{status}; iterations {summary['n_iters']}; loglik {summary['loglik']:.6f}; "
          f"time {summary['wall_time']:.3f}s")
    for msg in summary["diagnostics"]:
        print(f"  diagnostic: {msg}")


def cmd_fit(args) -> int:
    _check_level(args.level)
    method = resolve_method(args.method)
    if args.method.lower() in ALIASES:
        print(f"{args.method} ≡ {method} (the h-likelihood equals the penalized partial likelihood "
              f"up to a constant; running {method})")
    data = load_csv(args.data)
    f = fit(data, method, FitConfig())
    summary = fit_summary(f, args.level)
    summary["requested_method"] = args.method
    print(f"method {method}: n={data.n}, clusters={data.g}, events={int(data.status.sum())}")
    _print_fit(summary)
    if args.out:
        Path(args.out).write_text(json.dumps(summary, indent=2) + "\n", encoding="utf-8")
    return EXIT_OK if f.converged else EXIT_NOT_CONVERGED


def cmd_benchmark(args) -> int:
    if args.reps < 1:
        raise InputError("reps must be ≥ 1")
    if args.threads < 1:
        raise InputError("threads must be ≥ 1")
    _check_level(args.level)
    if not args.methods:
        raise InputError("no methods given")
    scenarios = load_scenarios(args.scenario)
    report = run_grid(scenarios, args.methods, args.reps, args.seed, parallelism=args.threads, level=args.level)
    print(report.to_text())
    if args.out:
        paths = report.write(args.out)
        print("wrote " + ", ".join(str(p) for p in paths.values()))
    return EXIT_OK


def cmd_report(args) -> int:
    path = Path(args.path)
    if path.is_dir():
        path = path / "report.json"
    try:
        obj = json.loads(path.read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as exc:
        raise InputError(f"cannot read report {path}: {exc}") from None
    report = MonteCarloReport.from_dict(obj)
    timing_path = path.with_name("timing.json")
    timing = json.loads(timing_path.read_text(encoding="utf-8")) if timing_path.exists() else {}
    text = report.to_text(timing)
    print(text)
    if args.out:
        Path(args.out).write_text(text + "\n", encoding="utf-8")
    return EXIT_OK


def cmd_scenarios(args) -> int:
    for name in bundled_scenarios():
        print(name)
    return EXIT_OK


COMMANDS = {"simulate": cmd_simulate, "fit": cmd_fit, "benchmark": cmd_benchmark, "report": cmd_report,
            "scenarios": cmd_scenarios}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return COMMANDS[args.command](args)
    except (InputError, DataError, FileNotFoundError, ValueError, KeyError, json.JSONDecodeError) as exc:
        msg = exc.args[0] if isinstance(exc, KeyError) and exc.args else exc
        print(f"error: {msg}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
