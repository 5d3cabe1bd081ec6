"""Monte Carlo comparison of estimators over simulated scenario grids.

Every replicate draws one dataset from its own Philox stream
``(seed, scenario_index, replicate)`` and all requested methods are fitted to
that same dataset. Moment summaries use converged fits only; cells without
enough converged fits are reported as ``None``.

The JSON report (``SCHEMA_VERSION``) holds no timing information, so it is a
pure function of the inputs. Wall times go to a separate timing file and to
the text tables.
"""

from __future__ import annotations

import csv
import json
import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Optional, Sequence

import numpy as np

from .estimators import FitConfig, fit, resolve_method
from .inference import ci_log_theta, ci_wald, covers
from .simulate import SimulationScenario, calibrate_censoring, generate, stream

log = logging.getLogger(__name__)

SCHEMA_VERSION = "frailtyfit.montecarlo/1"
PARAMETERS = ("beta1", "beta2", "beta3", "theta", "alpha", "lambda")


@dataclass
class ReplicateResult:
    scenario: int
    replicate: int
    method: str
    converged: bool
    estimates: dict
    standard_errors: dict
    wall_time: float
    n_iters: int = 0
    censored_fraction: float = math.nan
    error: Optional[str] = None


def _fit_replicate(task) -> list[ReplicateResult]:
    s, r, sc, rate, methods, seed, cfg = task
    data, _ = generate(sc, stream(seed, s, r), cens_rate=rate)
    cens = 1.0 - float(data.status.mean())
    out = []
    for m in methods:
        try:
            f = fit(data, m, cfg)
        except (ValueError, ArithmeticError, np.linalg.LinAlgError) as exc:
            out.append(ReplicateResult(s, r, m, False, {}, {}, math.nan, 0, cens, f"{type(exc).__name__}: {exc}"))
            continue
        out.append(ReplicateResult(s, r, m, f.converged, f.params(), f.standard_errors(),
                                   f.wall_time, f.n_iters, cens))
    return out


def _mean(x):
    return float(np.mean(x)) if len(x) else None


def aggregate(estimates: Sequence[float], truth: float, ses: Optional[Sequence[Optional[float]]] = None) -> dict:
    """Summary cells for one parameter over converged replicates.

    ``emp_se`` divides by ``n - 1`` and needs two estimates; every other moment
    needs one. ``mse`` is ``mean((est - truth)^2)``; ``rmse`` is its root.
    """
    est = np.asarray(estimates, dtype=float)
    n = est.shape[0]
    cell = {"n": n, "mean": None, "bias": None, "median": None, "emp_se": None, "mse": None,
            "rmse": None, "mean_se": None, "median_se": None}
    if n >= 1:
        err = est - truth
        mse = float(np.mean(err**2))
        cell.update(mean=float(est.mean()), bias=float(est.mean() - truth), median=float(np.median(est)),
                    mse=mse, rmse=math.sqrt(mse))
    if n >= 2:
        cell["emp_se"] = float(math.sqrt(np.sum((est - est.mean()) ** 2) / (n - 1)))
    if ses is not None:
        s = np.asarray([v for v in ses if v is not None and math.isfinite(v)], dtype=float)
        if s.size:
            cell["mean_se"] = float(s.mean())
            cell["median_se"] = float(np.median(s))
    return cell


def coverage(results: Sequence[ReplicateResult], truth: dict, level: float) -> dict:
    """Percent of converged fits whose interval covers the truth; missing SEs count as misses."""
    n = len(results)
    if n == 0:
        return {}
    hits: dict[str, int] = {}
    for res in results:
        for name, value in res.estimates.items():
            if name.startswith("beta"):
                se = res.standard_errors.get(name)
                hits[name] = hits.get(name, 0) + (bool(se) and covers(ci_wald(value, se, level), truth[name]))
        th, se = res.estimates["theta"], res.standard_errors.get("theta")
        ok = se is not None and se > 0
        hits["theta_ci1"] = hits.get("theta_ci1", 0) + (ok and covers(ci_wald(th, se, level), truth["theta"]))
        hits["theta_ci2"] = hits.get("theta_ci2", 0) + (ok and covers(ci_log_theta(th, se, level), truth["theta"]))
    return {k: 100.0 * v / n for k, v in sorted(hits.items())}


@dataclass
class MonteCarloReport:
    seed: int
    reps: int
    methods: list
    level: float
    scenarios: list  # per-scenario dicts, see ``build``
    results: list = field(default_factory=list, repr=False)

    @classmethod
    def build(cls, scenarios: Sequence[SimulationScenario], rates: Sequence[float], methods: Sequence[str],
              reps: int, seed: int, level: float, results: list[ReplicateResult]) -> "MonteCarloReport":
        blocks = []
        for s, (sc, rate) in enumerate(zip(scenarios, rates)):
            truth = sc.truth()
            mine = [r for r in results if r.scenario == s]
            cens = sorted({(r.replicate, r.censored_fraction) for r in mine})
            per_method = {}
            for m in methods:
                fits = [r for r in mine if r.method == m]
                ok = [r for r in fits if r.converged]
                params = {}
                for name in PARAMETERS:
                    have = [r for r in ok if name in r.estimates]
                    cell = aggregate([r.estimates[name] for r in have], truth[name],
                                     [r.standard_errors.get(name) for r in have])
                    cell["truth"] = truth[name]
                    params[name] = cell
                per_method[m] = {
                    "n_fits": len(fits),
                    "n_converged": len(ok),
                    "convergence_rate": 100.0 * len(ok) / len(fits) if fits else None,
                    "n_errors": sum(r.error is not None for r in fits),
                    "coverage": coverage(ok, truth, level),
                    "parameters": params,
                }
            blocks.append({
                "scenario": sc.to_dict(),
                "censoring_rate": rate,
                "observed_censoring": _mean([c for _, c in cens]),
                "methods": per_method,
            })
        return cls(seed, reps, list(methods), level, blocks, results)

    def to_dict(self) -> dict:
        return {"schema_version": SCHEMA_VERSION, "seed": self.seed, "reps": self.reps,
                "methods": self.methods, "level": self.level, "scenarios": self.scenarios}

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n"

    def timing(self) -> dict:
        """Mean wall time (seconds) per scenario and method, over all successful fits."""
        out = {}
        for s, block in enumerate(self.scenarios):
            name = block["scenario"]["name"]
            out[name] = {}
            for m in self.methods:
                t = [r.wall_time for r in self.results if r.scenario == s and r.method == m
                     and math.isfinite(r.wall_time)]
                out[name][m] = _mean(t)
        return out

    def to_text(self, timing: Optional[dict] = None) -> str:
        if timing is None:
            timing = self.timing() if self.results else {}
        cols = ("mean", "bias", "mean_se", "median", "median_se", "emp_se", "mse", "rmse")
        lines = []
        for block in self.scenarios:
            sc = block["scenario"]
            lines.append(f"scenario {sc['name']}: g={sc['g']} n_i={sc['n_i']} censoring={sc['censoring']:.2f} "
                         f"(observed {_fmt(block['observed_censoring'])}), reps={self.reps}, seed={self.seed}")
            lines.append(f"{'method':<7}{'param':<8}" + "".join(f"{c:>11}" for c in cols))
            for m, mb in block["methods"].items():
                for name in PARAMETERS:
                    cell = mb["parameters"][name]
                    if cell["n"] == 0:
                        continue
                    lines.append(f"{m:<7}{name:<8}" + "".join(f"{_fmt(cell[c]):>11}" for c in cols))
            lines.append("")
            cps = sorted({k for mb in block["methods"].values() for k in mb["coverage"]})
            lines.append(f"{'method':<7}{'conv%':>8}{'time_s':>10}" + "".join(f"{'CP ' + k:>15}" for k in cps))
            for m, mb in block["methods"].items():
                t = timing.get(sc["name"], {}).get(m)
                lines.append(f"{m:<7}{_fmt(mb['convergence_rate'], 1):>8}{_fmt(t, 4):>10}"
                             + "".join(f"{_fmt(mb['coverage'].get(k), 2):>15}" for k in cps))
            lines.append("")
        return "\n".join(lines)

    def write_raw_csv(self, path: str | Path) -> None:
        """One row per (scenario, replicate, method) with estimates and SEs."""
        names = {s: b["scenario"]["name"] for s, b in enumerate(self.scenarios)}
        header = ["scenario", "replicate", "method", "converged", "n_iters", "censored_fraction"]
        header += [f"est_{p}" for p in PARAMETERS] + [f"se_{p}" for p in PARAMETERS] + ["wall_time", "error"]
        with Path(path).open("w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh)
            w.writerow(header)
            for r in self.results:
                w.writerow([names[r.scenario], r.replicate, r.method, int(r.converged), r.n_iters,
                            repr(r.censored_fraction)]
                           + [_csv(r.estimates.get(p)) for p in PARAMETERS]
                           + [_csv(r.standard_errors.get(p)) for p in PARAMETERS]
                           + [repr(r.wall_time), r.error or ""])

    def write(self, out_dir: str | Path) -> dict:
        """Write report.json, timing.json, tables.txt and estimates.csv; return the paths."""
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        paths = {"report": out / "report.json", "timing": out / "timing.json",
                 "tables": out / "tables.txt", "estimates": out / "estimates.csv"}
        paths["report"].write_text(self.to_json(), encoding="utf-8")
        paths["timing"].write_text(json.dumps(self.timing(), indent=2, sort_keys=True) + "\n", encoding="utf-8")
        paths["tables"].write_text(self.to_text() + "\n", encoding="utf-8")
        self.write_raw_csv(paths["estimates"])
        return paths

    @classmethod
    def from_dict(cls, obj: dict) -> "MonteCarloReport":
        if obj.get("schema_version") != SCHEMA_VERSION:
            raise ValueError(f"unsupported report schema {obj.get('schema_version')!r}")
        return cls(obj["seed"], obj["reps"], obj["methods"], obj["level"], obj["scenarios"])

    def estimates(self, scenario: int, method: str, name: str, converged_only: bool = True) -> np.ndarray:
        """Per-replicate estimates of one parameter, ordered by replicate."""
        return np.array([r.estimates[name] for r in self.results
                         if r.scenario == scenario and r.method == method and name in r.estimates
                         and (r.converged or not converged_only)])


def _fmt(v, digits: int = 4) -> str:
    return "-" if v is None else f"{v:.{digits}f}"


def _csv(v) -> str:
    return "" if v is None else repr(float(v))


def run_grid(scenarios: Sequence[SimulationScenario], methods: Iterable[str], reps: int, seed: int,
             parallelism: int = 1, cfg: FitConfig = FitConfig(), level: float = 0.95) -> MonteCarloReport:
    """Fit every method to ``reps`` datasets per scenario and aggregate.

    Results do not depend on ``parallelism``: each replicate has a fixed
    random stream and results are sorted before aggregation.
    """
    if reps < 1:
        raise ValueError("reps must be >= 1")
    if parallelism < 1:
        raise ValueError("parallelism must be >= 1")
    methods = [resolve_method(m) for m in methods]
    methods = list(dict.fromkeys(methods))
    scenarios = list(scenarios)
    rates = [calibrate_censoring(sc) for sc in scenarios]
    tasks = [(s, r, sc, rate, methods, seed, cfg)
             for s, (sc, rate) in enumerate(zip(scenarios, rates)) for r in range(reps)]
    results: list[ReplicateResult] = []
    if parallelism == 1:
        for k, task in enumerate(tasks, 1):
            results.extend(_fit_replicate(task))
            if k % 50 == 0:
                log.info("%d/%d replicates", k, len(tasks))
    else:
        with ProcessPoolExecutor(max_workers=parallelism) as pool:
            chunk = max(1, len(tasks) // (8 * parallelism))
            for batch in pool.map(_fit_replicate, tasks, chunksize=chunk):
                results.extend(batch)
    order = {m: k for k, m in enumerate(methods)}
    results.sort(key=lambda x: (x.scenario, x.replicate, order[x.method]))
    return MonteCarloReport.build(scenarios, rates, methods, reps, seed, level, results)
