"""Command line entry point: generate, run, sweep, summarize, validate-config."""

from __future__ import annotations

import argparse
import logging
import sys
from dataclasses import replace
from pathlib import Path

from ..scenario import generate_scenario
from .config import SWEEP_VARIABLES, ConfigError, RunConfig, SweepBlock, config_from_dict, load_config
from .experiment import emit_outputs, load_table, run_experiment, summarize


def _common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--seed", type=int, default=None, help="master seed (overrides the config)")
    p.add_argument("--workers", type=int, default=1, help="worker processes over drops")
    p.add_argument("--out-dir", type=Path, default=None, help="output directory (overrides the config)")


def _load(args) -> RunConfig:
    cfg = load_config(args.config) if args.config else config_from_dict({})
    if args.seed is not None:
        cfg = replace(cfg, monte_carlo=replace(cfg.monte_carlo, master_seed=args.seed))
    if getattr(args, "drops", None):
        cfg = replace(cfg, monte_carlo=replace(cfg.monte_carlo, n_drops=args.drops))
    return cfg


def _out_dir(args, cfg: RunConfig) -> Path:
    return args.out_dir if args.out_dir is not None else Path(cfg.output.directory)


def _parse_values(text: str) -> tuple:
    vals = []
    for tok in text.split(","):
        tok = tok.strip()
        num = float(tok)
        vals.append(int(num) if num.is_integer() and "e" not in tok.lower() and "." not in tok else num)
    return tuple(vals)


def cmd_generate(args) -> int:
    cfg = _load(args)
    sc = cfg.scenario
    seed = cfg.monte_carlo.master_seed
    scenario = generate_scenario(
        sc.M, sc.K, sc.L, area_side=sc.area_side, seed=seed, shadow_sigma_db=sc.shadow_sigma_db, path_loss=sc.path_loss
    )
    out = _out_dir(args, cfg)
    out.mkdir(parents=True, exist_ok=True)
    path = out / f"scenario_seed{seed}.json"
    scenario.save(path)
    print(path)
    return 0


def _execute(cfg: RunConfig, args) -> int:
    table = run_experiment(cfg, workers=args.workers)
    summary = summarize(table)
    for p in emit_outputs(table, summary, cfg, _out_dir(args, cfg)):
        print(p)
    return 0


def cmd_run(args) -> int:
    return _execute(_load(args), args)


def cmd_sweep(args) -> int:
    cfg = _load(args)
    sweep = SweepBlock(variable=args.var, values=_parse_values(args.values), total_antennas=args.total_antennas)
    return _execute(replace(cfg, sweep=sweep), args)


def cmd_summarize(args) -> int:
    table = load_table(args.results_dir)
    summary = summarize(table)
    cfg = load_config(args.config) if args.config else None
    out = args.out_dir or args.results_dir
    for p in emit_outputs(table, summary, cfg, out):
        print(p)
    return 0


def cmd_validate(args) -> int:
    cfg = load_config(args.config)
    print(f"ok {cfg.digest()[:12]}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="cfwmmse", description=__doc__)
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("generate", help="draw one scenario and save it as JSON")
    p.add_argument("--config", type=Path)
    _common(p)
    p.set_defaults(func=cmd_generate)

    p = sub.add_parser("run", help="run the experiment described by a config")
    p.add_argument("--config", type=Path)
    p.add_argument("--drops", type=int, help="override monte_carlo.n_drops")
    _common(p)
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("sweep", help="run a one-variable sweep")
    p.add_argument("--config", type=Path)
    p.add_argument("--var", required=True, choices=SWEEP_VARIABLES)
    p.add_argument("--values", required=True, help="comma separated, e.g. 1,2,4")
    p.add_argument("--total-antennas", type=int, help="with --var M: keep L*M fixed")
    p.add_argument("--drops", type=int, help="override monte_carlo.n_drops")
    _common(p)
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("summarize", help="recompute summaries from an existing results directory")
    p.add_argument("results_dir", type=Path)
    p.add_argument("--config", type=Path)
    _common(p)
    p.set_defaults(func=cmd_summarize)

    p = sub.add_parser("validate-config", help="check a config file")
    p.add_argument("config", type=Path)
    p.set_defaults(func=cmd_validate)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
