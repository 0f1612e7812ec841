"""Command-line entry point: run experiment grids and parameter sweeps.

``asymloc run --preset canonical_medium --out results/`` executes the
filter x planner grid and writes one per-step CSV per combination plus a
summary CSV mirrored to stdout. ``asymloc sweep --parameter eta --values
3,4,5,6,7 ...`` re-runs the grid per value and writes one table.

Flags override config-file keys. Every output CSV starts with a comment
line carrying the resolved seed and preset so results can be replayed
exactly; the fully resolved config itself is written next to the CSVs.
"""

from __future__ import annotations

import argparse
import dataclasses
import sys
from pathlib import Path

from .config import ConfigError, ExperimentConfig, SweepSpec, dump_config, parse_config
from .experiment import (GridSpec, format_summary_table, run_grid, sweep,
                         write_cell_csv, write_summary_csv, write_sweep_csv)
from .filters import FILTER_KINDS
from .planners import PLANNER_KINDS
from .sim_env import PRESETS, get_preset


def _add_common_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", type=Path, help="INI config file (flags override its keys)")
    p.add_argument("--preset", choices=sorted(PRESETS),
                   help="scenario preset (required unless --config provides one)")
    p.add_argument("--seed", type=int, help="base RNG seed; run i uses seed+i")
    p.add_argument("--runs", type=int, help="Monte Carlo runs per combination")
    p.add_argument("--steps", type=int, help="simulation steps per run")
    p.add_argument("--out", type=Path, help="output directory (default: results)")
    p.add_argument("--filters", help=f"comma list from {FILTER_KINDS}")
    p.add_argument("--planners", help=f"comma list from {PLANNER_KINDS}")
    p.add_argument("--threshold", type=float, help="settle threshold in meters (default 2.5)")
    p.add_argument("--jobs", type=int, help="worker processes (default 1)")
    p.add_argument("--no-timing", action="store_true",
                   help="write planner-cost columns as 0.0 so output bytes are fully reproducible")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="asymloc",
        description="Robust range/bearing target search simulator: asymmetric "
                    "one-sided filtering, observability diagnostics, active planners.")
    sub = parser.add_subparsers(dest="command", required=True)
    run_p = sub.add_parser("run", help="run a filter x planner grid and write CSVs")
    _add_common_flags(run_p)
    sweep_p = sub.add_parser("sweep", help="run the grid once per parameter value")
    _add_common_flags(sweep_p)
    sweep_p.add_argument("--parameter", help="sweep parameter name")
    sweep_p.add_argument("--values", help="comma list of sweep values")
    return parser


def _config_from_args(args: argparse.Namespace) -> ExperimentConfig:
    if args.config is not None:
        cfg = parse_config(Path(args.config).read_text())
        if args.preset is not None and args.preset != cfg.preset:
            # --preset on top of --config restarts from that preset's scenario,
            # keeping only the config's seed/steps
            scenario = dataclasses.replace(get_preset(args.preset),
                                           seed=cfg.scenario.seed, steps=cfg.scenario.steps)
            cfg = dataclasses.replace(cfg, preset=args.preset, scenario=scenario)
    else:
        if args.preset is None:
            raise ConfigError("either --config or --preset is required")
        cfg = parse_config(f"[experiment]\npreset = {args.preset}\n")

    scenario_fields = {}
    if args.seed is not None:
        scenario_fields["seed"] = args.seed
    if args.steps is not None:
        scenario_fields["steps"] = args.steps
    if scenario_fields:
        cfg = dataclasses.replace(cfg, scenario=dataclasses.replace(cfg.scenario, **scenario_fields))
    if args.runs is not None:
        cfg = dataclasses.replace(cfg, n_runs=args.runs)
    if args.out is not None:
        cfg = dataclasses.replace(cfg, out_dir=str(args.out))
    if args.filters is not None:
        cfg = dataclasses.replace(cfg, filters=_split_list(args.filters, FILTER_KINDS, "filters"))
    if args.planners is not None:
        cfg = dataclasses.replace(cfg, planners=_split_list(args.planners, PLANNER_KINDS, "planners"))
    if args.threshold is not None:
        cfg = dataclasses.replace(cfg, threshold=args.threshold)
    if args.jobs is not None:
        cfg = dataclasses.replace(cfg, n_jobs=args.jobs)
    if args.no_timing:
        cfg = dataclasses.replace(cfg, timing=False)
    if getattr(args, "parameter", None) is not None or getattr(args, "values", None) is not None:
        if args.parameter is None or args.values is None:
            raise ConfigError("sweep needs both --parameter and --values")
        values = tuple(float(v) for v in args.values.split(",") if v.strip())
        cfg = dataclasses.replace(cfg, sweep=SweepSpec(args.parameter, values))
    return cfg


def _split_list(raw: str, allowed: tuple[str, ...], what: str) -> tuple[str, ...]:
    items = tuple(s.strip() for s in raw.split(",") if s.strip())
    for item in items:
        if item not in allowed:
            raise ConfigError(f"--{what}: unknown entry {item!r}; expected from {allowed}")
    if not items:
        raise ConfigError(f"--{what}: empty list")
    return items


def _to_grid(cfg: ExperimentConfig) -> GridSpec:
    return GridSpec(scenario=cfg.scenario, filters=cfg.filters, planners=cfg.planners,
                    n_runs=cfg.n_runs, threshold=cfg.threshold,
                    filter_params=cfg.filter_params, planner_cfg=cfg.planner_cfg,
                    n_jobs=cfg.n_jobs)


def cmd_run(cfg: ExperimentConfig) -> int:
    out = Path(cfg.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    (out / "config.ini").write_text(dump_config(cfg))
    results = run_grid(_to_grid(cfg))
    cells = [results[(f, p)] for f in cfg.filters for p in cfg.planners]
    seed = cfg.scenario.seed
    for cell in cells:
        path = out / f"{cell.filter_kind}_{cell.planner_kind}.csv"
        write_cell_csv(path, cell.metrics, seed=seed, preset=cfg.preset, timing=cfg.timing)
    write_summary_csv(out / "summary.csv", cells, seed=seed, preset=cfg.preset,
                      timing=cfg.timing)
    print(format_summary_table(cells, timing=cfg.timing))
    return 0


def cmd_sweep(cfg: ExperimentConfig) -> int:
    if cfg.sweep is None:
        raise ConfigError("sweep requires a [sweep] config section or --parameter/--values")
    out = Path(cfg.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    (out / "config.ini").write_text(dump_config(cfg))
    rows = sweep(cfg.sweep.parameter, cfg.sweep.values, _to_grid(cfg))
    path = out / f"sweep_{cfg.sweep.parameter}.csv"
    write_sweep_csv(path, rows, seed=cfg.scenario.seed, preset=cfg.preset, timing=cfg.timing)
    header = f"{'parameter':<10} {'value':>8}  {'combination':<24} {'final_rmse_m':>12}  {'steps_to_2p5m':>13}  {'avg_cost_ms':>11}"
    print(header)
    for r in rows:
        steps = "none" if r.metrics.steps_to_threshold is None else str(r.metrics.steps_to_threshold)
        cost = r.metrics.mean_cost_per_step * 1e3 if cfg.timing else 0.0
        print(f"{r.parameter:<10} {r.value:>8.3g}  {r.filter_kind + ' (' + r.planner_kind + ')':<24} "
              f"{r.metrics.final_rmse:>12.4f}  {steps:>13}  {cost:>11.4f}")
    return 0


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = _config_from_args(args)
        if args.command == "run":
            return cmd_run(cfg)
        return cmd_sweep(cfg)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
