"""``sben`` command line: run, audit, compare and sweep scenario configs."""

from __future__ import annotations

import argparse
import csv
import json
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path
from typing import Optional, Sequence

import numpy as np
from pydantic import ValidationError

from sbenpy.audit import audit_scenario
from sbenpy.cli.config import RunConfig, load_config
from sbenpy.errors import (
    AdmissibilityError,
    ConfigError,
    ConstructionError,
    SolverError,
    UnsupportedOperation,
)
from sbenpy.extended import to_float
from sbenpy.path import DiscretePath
from sbenpy.scenarios import Scenario, TimeSeries, run_scenario, series_from_path

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_SOLVER = 3

PI_BUDGET_FACTOR = 1e-6


def _fmt(v: float) -> str:
    return format(float(v), ".17g")


def write_timeseries(series: TimeSeries, path: Path) -> None:
    """``t, <observables>, gap, dissipation``; row ``k`` carries the step ending at ``t_k``."""
    gaps = np.concatenate([[0.0], series.gaps])
    diss = np.concatenate([[0.0], series.dissipation])
    with path.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["t", *series.columns, "gap", "dissipation"])
        for t, row, g, d in zip(series.times, series.table, gaps, diss):
            w.writerow([_fmt(t), *map(_fmt, row), _fmt(g), _fmt(d)])


def write_residuals(series: TimeSeries, path: Path) -> None:
    with path.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["step", "t0", "t1", "dissipation_term", "pairing_term", "gap"])
        for r in series.profile:
            w.writerow([r.index, _fmt(series.times[r.index]), _fmt(series.times[r.index + 1]),
                        _fmt(to_float(r.dissipation_term)), _fmt(to_float(r.pairing_term)), _fmt(to_float(r.gap))])


def pi_budget(series: TimeSeries, scenario: Scenario) -> float:
    """``1e-6`` times the run's energy scale (peak ``|H|`` or total dissipation, at least 1)."""
    h = max(abs(scenario.system.H(t, z)) for t, z in zip(series.path.times, series.path.nodes))
    return PI_BUDGET_FACTOR * max(1.0, h, series.total_dissipation)


def _write_json(obj, path: Path) -> None:
    path.write_text(json.dumps(obj, indent=2, sort_keys=True) + "\n")


def _partial_series(scenario: Scenario, cfg: RunConfig, solver: str, exc: SolverError) -> Optional[TimeSeries]:
    nodes = exc.partial
    if len(nodes) < 2:
        return None
    times = cfg.times()[: len(nodes)]
    try:
        return series_from_path(scenario, DiscretePath(times, tuple(nodes), nodes[0]), solver)
    except Exception:
        return None


def _export(series: TimeSeries, out: Path, formats, suffix: str = "") -> list[str]:
    written = []
    if "csv" in formats:
        write_timeseries(series, out / f"timeseries{suffix}.csv")
        write_residuals(series, out / f"residuals{suffix}.csv")
        written += [f"timeseries{suffix}.csv", f"residuals{suffix}.csv"]
    return written


def execute(cfg: RunConfig, out: Path, solver: Optional[str] = None, dt: Optional[float] = None,
            suffix: str = "") -> tuple[int, dict, Optional[TimeSeries]]:
    """Run one solve and write its artifacts; returns ``(exit code, summary, series)``."""
    solver = solver or cfg.solver.name
    out.mkdir(parents=True, exist_ok=True)
    summary = {
        "scenario": cfg.scenario.type,
        "solver": solver,
        "dt": dt or cfg.time.dt,
        "t_end": cfg.time.t_end,
        "seed": cfg.seed,
    }
    try:
        scenario = cfg.build_scenario()
        ocfg = cfg.oracle_config(dt)
    except (ConstructionError, ValueError) as exc:
        raise ConfigError(str(exc)) from exc
    start = time.perf_counter()
    try:
        series = run_scenario(scenario, ocfg, solver, cfg.solver.global_iters)
    except ConstructionError as exc:
        raise ConfigError(str(exc)) from exc
    except (SolverError, AdmissibilityError, UnsupportedOperation) as exc:
        summary["wall_time_s"] = time.perf_counter() - start
        partial = _partial_series(scenario, cfg, solver, exc) if isinstance(exc, SolverError) else None
        summary.update(status="failed", error=str(exc), partial=partial is not None,
                       failed_step=getattr(exc, "step", None))
        if partial is not None:
            summary["steps_completed"] = int(partial.path.n_steps)
            summary["files"] = _export(partial, out, cfg.output.formats, suffix)
        _write_json(summary, out / f"summary{suffix}.json")
        return EXIT_SOLVER, summary, None
    summary["wall_time_s"] = time.perf_counter() - start
    budget = pi_budget(series, scenario)
    summary.update(
        status="ok",
        partial=False,
        n_steps=int(series.path.n_steps),
        total_pi=series.total_pi,
        pi_budget=budget,
        pi_within_budget=bool(series.total_pi <= budget),
        total_dissipation=series.total_dissipation,
        max_step_gap=float(np.max(series.gaps)) if series.gaps.size else 0.0,
    )
    if series.global_history is not None:
        summary["global_history"] = [float(v) for v in series.global_history]
    summary["files"] = _export(series, out, cfg.output.formats, suffix)
    if "json" in cfg.output.formats:
        _write_json(summary, out / f"summary{suffix}.json")
    return EXIT_OK, summary, series


def compare(cfg: RunConfig, out: Path, against: str = "oracle") -> tuple[int, dict]:
    code, _, main_series = execute(cfg, out)
    if code:
        return code, {}
    code, _, ref = execute(cfg, out, solver=against, suffix=f"_{against}")
    if code:
        return code, {}
    report = {"solver": cfg.solver.name, "against": against, "columns": {}}
    for name in main_series.columns:
        a, b = main_series.column(name), ref.column(name)
        dev = float(np.max(np.abs(a - b)))
        scale = float(np.max(np.abs(b)))
        report["columns"][name] = {"max_abs_deviation": dev,
                                   "max_rel_deviation": dev / scale if scale > 0 else dev}
    report["max_rel_deviation"] = max(c["max_rel_deviation"] for c in report["columns"].values())
    _write_json(report, out / "comparison.json")
    return EXIT_OK, report


def sweep(cfg: RunConfig, out: Path, dts: Sequence[float]) -> tuple[int, dict]:
    rows = []
    worst = EXIT_OK
    for dt in dts:
        code, summary, series = execute(cfg, out / f"dt_{_fmt(dt)}", dt=dt)
        worst = max(worst, code)
        row = {"dt": dt, "status": summary["status"]}
        if series is not None:
            row.update(total_pi=series.total_pi, total_dissipation=series.total_dissipation,
                       final_state=dict(zip(series.columns, map(float, series.table[-1]))))
        rows.append(row)
    report = {"solver": cfg.solver.name, "runs": rows}
    _write_json(report, out / "sweep.json")
    return worst, report


def audit(cfg: RunConfig, out: Path, samples: int) -> dict:
    try:
        scenario = cfg.build_scenario()
    except (ConstructionError, ValueError) as exc:
        raise ConfigError(str(exc)) from exc
    report = audit_scenario(scenario, n=samples, seed=cfg.seed)
    out.mkdir(parents=True, exist_ok=True)
    _write_json(report, out / "audit.json")
    return report


def _run_one(config_path: str, root: Optional[str], isolate: bool) -> int:
    try:
        cfg = load_config(config_path)
        out = cfg.output_dir(root)
        if isolate:
            out = out / Path(config_path).stem
        code, summary, _ = execute(cfg, out)
    except (ConfigError, ValidationError) as exc:
        print(f"{config_path}: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    if code:
        flag = " (partial outputs written)" if summary.get("partial") else ""
        print(f"{config_path}: solver failure: {summary['error']}{flag}", file=sys.stderr)
    else:
        print(f"{config_path}: ok  Pi={summary['total_pi']:.3e}  dissipation={summary['total_dissipation']:.6g}"
              f"  -> {out}")
    return code


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="sben", description=__doc__)
    ap.add_argument("--output-root", help="base for relative output directories (default: $SBEN_OUTPUT_ROOT or .)")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", help="solve one or more configs and export the time series")
    p.add_argument("configs", nargs="+")
    p.add_argument("--jobs", type=int, default=1, help="run configs concurrently in separate processes")

    p = sub.add_parser("audit", help="audit the scenario's dissipation law")
    p.add_argument("config")
    p.add_argument("--samples", type=int, default=2000)

    p = sub.add_parser("compare", help="run the configured solver and a reference solver")
    p.add_argument("config")
    p.add_argument("--against", default="oracle", choices=["oracle", "sben-incremental", "sben-global"])

    p = sub.add_parser("sweep", help="repeat a run over several time steps")
    p.add_argument("config")
    p.add_argument("--dt-list", type=float, nargs="+", required=True)
    return ap


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    root = args.output_root

    if args.command == "run":
        if args.jobs < 1:
            print("--jobs must be at least 1", file=sys.stderr)
            return EXIT_CONFIG
        isolate = len(args.configs) > 1
        if args.jobs == 1 or len(args.configs) == 1:
            codes = [_run_one(c, root, isolate) for c in args.configs]
        else:
            with ProcessPoolExecutor(max_workers=args.jobs) as pool:
                codes = list(pool.map(_run_one, args.configs, [root] * len(args.configs),
                                      [isolate] * len(args.configs)))
        return max(codes)

    try:
        cfg = load_config(args.config)
        out = cfg.output_dir(root)
        if args.command == "audit":
            report = audit(cfg, out, args.samples)
            print(json.dumps(report, indent=2, sort_keys=True))
            return EXIT_OK
        if args.command == "compare":
            code, report = compare(cfg, out, args.against)
        else:
            if any(dt <= 0 for dt in args.dt_list):
                raise ConfigError("every dt in --dt-list must be positive")
            code, report = sweep(cfg, out, args.dt_list)
    except ConfigError as exc:
        print(f"{args.config}: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    if code:
        print(f"{args.config}: solver failure, see {out}", file=sys.stderr)
    else:
        print(json.dumps(report, indent=2, sort_keys=True))
    return code


if __name__ == "__main__":
    sys.exit(main())
