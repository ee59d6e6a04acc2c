"""Command-line surface: test-set generation, benchmarking, MC sweeps,
fine-tuning data export, and trace replay."""
from __future__ import annotations

import argparse
import sys
from pathlib import Path

from . import __version__
from .bench import (
    build_test_set,
    export_finetune_data,
    hardest_scenarios,
    load_test_set,
    mc_sweep,
    run_benchmark,
)
from .config import ConfigError, load_config, resolve_map
from .demand import DemandModel, load_scenario
from .fleet import SimulationError

LOAD_CHOICES = ("low", "medium", "high")


def _add_common(parser: argparse.ArgumentParser) -> None:
    parser.add_argument(
        "--map",
        default=None,
        help="map file path or bundled id (default: sf-midtown-42)",
    )
    parser.add_argument("--config", default=None, help="run config JSON file")
    parser.add_argument("--seed", type=int, default=None, help="root seed override")
    parser.add_argument(
        "--out", default="out", help="output directory (default: ./out)"
    )


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="taxiroll",
        description="Multi-agent taxi dispatch simulation and rollout planning",
    )
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen-testset", help="generate and persist scenario sets")
    _add_common(p)
    p.add_argument("--load", default="all", choices=(*LOAD_CHOICES, "all"))
    p.add_argument("--n", type=int, default=None, help="scenarios per load level")

    p = sub.add_parser("bench", help="head-to-head policy benchmark")
    _add_common(p)
    p.add_argument(
        "--policies",
        required=True,
        help="comma list: greedy | ia-ra | stay | llm:<strategy> | rollout:<base>",
    )
    p.add_argument("--load", default="medium", choices=LOAD_CHOICES)
    p.add_argument(
        "--scenarios", default=None, help="directory of scenario_##.json files"
    )
    p.add_argument("--hardest", type=int, default=0, metavar="K",
                   help="keep only the K hardest scenarios (by greedy cost)")
    p.add_argument("--mc", type=int, default=None, help="MC samples override")
    p.add_argument("--t-h", type=int, default=None, help="lookahead horizon override")
    p.add_argument("--workers", type=int, default=None)

    p = sub.add_parser("sweep-mc", help="cost vs number of MC futures")
    _add_common(p)
    p.add_argument("--base", required=True, help="rollout base policy spec")
    p.add_argument("--mc", required=True, help="comma list of ascending MC counts")
    p.add_argument("--load", default="medium", choices=LOAD_CHOICES)
    p.add_argument("--scenarios", default=None)

    p = sub.add_parser("export-finetune", help="rollout-labelled chat records")
    _add_common(p)
    p.add_argument("--base", default="ia-ra", help="rollout base policy spec")
    p.add_argument("--n-traj", type=int, default=8, help="trajectories to export")
    p.add_argument("--load", default="medium", choices=LOAD_CHOICES)
    p.add_argument("--scenarios", default=None)
    p.add_argument("--mc", type=int, default=None, help="MC samples override")
    p.add_argument("--t-h", type=int, default=None, help="lookahead horizon override")

    p = sub.add_parser("replay", help="verify an exported trace against a scenario")
    _add_common(p)
    p.add_argument("--scenario", required=True, help="scenario JSON file")
    p.add_argument("--trace", required=True, help="trace JSONL file")

    return parser


def _setup(args):
    run_cfg = load_config(args.config)
    if args.seed is not None:
        run_cfg.seed = args.seed
    g = resolve_map(args.map)
    return run_cfg, g


def _scenarios_for(args, run_cfg, g):
    if args.scenarios:
        return load_test_set(args.scenarios, g)
    model = DemandModel(arrival_rate=run_cfg.rate_for(args.load))
    return build_test_set(
        args.load, run_cfg.test_scenarios, g, model, run_cfg.seed, run_cfg.horizon
    )


def _cmd_gen_testset(args) -> int:
    run_cfg, g = _setup(args)
    levels = LOAD_CHOICES if args.load == "all" else (args.load,)
    n = args.n if args.n is not None else run_cfg.test_scenarios
    out_dir = Path(args.out) / "testset"
    total = 0
    for level in levels:
        model = DemandModel(arrival_rate=run_cfg.rate_for(level))
        scenarios = build_test_set(
            level, n, g, model, run_cfg.seed, run_cfg.horizon, out_dir=out_dir
        )
        total += len(scenarios)
        print(f"{level}: {len(scenarios)} scenarios -> {out_dir / level}")
    print(f"wrote {total} scenario files")
    return 0


def _cmd_bench(args) -> int:
    run_cfg, g = _setup(args)
    if args.mc is not None:
        run_cfg.mc_samples = args.mc
    if args.t_h is not None:
        run_cfg.t_h = args.t_h
    scenarios = _scenarios_for(args, run_cfg, g)
    if args.hardest:
        scenarios = hardest_scenarios(
            scenarios, g, args.hardest, run_cfg.agents, run_cfg.seed
        )
    specs = [s.strip() for s in args.policies.split(",") if s.strip()]
    report = run_benchmark(specs, scenarios, g, run_cfg, workers=args.workers)
    print(report.table())
    paths = report.write(args.out)
    print("\nwrote " + ", ".join(str(p) for p in paths))
    return 0


def _cmd_sweep_mc(args) -> int:
    run_cfg, g = _setup(args)
    try:
        mc_list = [int(x) for x in args.mc.split(",") if x.strip()]
    except ValueError:
        raise ConfigError(f"--mc must be a comma list of integers: {args.mc!r}")
    scenarios = _scenarios_for(args, run_cfg, g)
    curve = mc_sweep(args.base, scenarios, mc_list, g, run_cfg, out_dir=args.out)
    for mc, cost in curve:
        print(f"mc={mc:>6}  mean cost {cost:.2f}")
    return 0


def _cmd_export_finetune(args) -> int:
    run_cfg, g = _setup(args)
    if args.mc is not None:
        run_cfg.mc_samples = args.mc
    if args.t_h is not None:
        run_cfg.t_h = args.t_h
    scenarios = _scenarios_for(args, run_cfg, g)[: args.n_traj]
    out_path = Path(args.out) / "finetune.jsonl"
    count = export_finetune_data(scenarios, args.base, g, run_cfg, out_path)
    print(f"wrote {count} records from {len(scenarios)} trajectories -> {out_path}")
    return 0


def _cmd_replay(args) -> int:
    from .bench import verify_trace_file

    run_cfg, g = _setup(args)
    scenario = load_scenario(Path(args.scenario).read_bytes(), g)
    steps = verify_trace_file(args.trace, scenario, g, run_cfg.agents)
    print(f"replay OK: {steps} steps verified")
    return 0


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    handlers = {
        "gen-testset": _cmd_gen_testset,
        "bench": _cmd_bench,
        "sweep-mc": _cmd_sweep_mc,
        "export-finetune": _cmd_export_finetune,
        "replay": _cmd_replay,
    }
    try:
        return handlers[args.command](args)
    except (ConfigError, SimulationError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
