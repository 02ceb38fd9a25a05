"""Command-line surface: train, evaluate, plot, replay.

Examples:
    swarmav train --scenario 3U1O --method maca --seed 7 --steps 100000 --out runs/m7
    swarmav evaluate --checkpoint runs/m7 --scenario 3U1O --episodes 100 --eas on --seed 3
    swarmav plot --run runs/m7
    swarmav replay --episode runs/m7/eval/trace_000.csv --svg out.svg

Every command is deterministic for a fixed config and seed; only --timing
adds wall-clock measurements, reported separately from the CSV outputs.
"""

from __future__ import annotations

import argparse
import os
import sys

from .config import build_train_config, parse_config_file
from .credit import ADVANTAGE_KINDS
from .env import SCENARIOS, spawn_episode, write_trace_csv
from .evaluate import evaluate, measure_response_time, write_metrics_csv, write_metrics_summary
from .plots import render_outputs, render_trajectory_svg
from .env import read_trace_csv
from .trainer import load_manifest, load_policies, train


def _collect_overrides(args) -> dict[str, object]:
    overrides: dict[str, object] = {}
    if args.config:
        overrides.update(parse_config_file(args.config))
    for item in args.set or []:
        key, _, value = item.partition("=")
        if not _ or not key.strip():
            raise SystemExit(f"--set expects key=value, got {item!r}")
        from .config import parse_value

        overrides[key.strip()] = parse_value(value)
    return overrides


def _cmd_train(args) -> int:
    overrides = _collect_overrides(args)
    if args.method:
        overrides["advantage.kind"] = args.method
    if args.seed is not None:
        overrides["train.seed"] = args.seed
    if args.steps is not None:
        overrides["train.total_env_steps"] = args.steps
    cfg, _ = build_train_config(args.scenario, overrides)
    result = train(cfg, args.out, resume=args.resume)
    print(f"trained {result.env_steps} env steps over {result.episodes} episodes -> {result.out_dir}")
    if result.curve_rows:
        last = result.curve_rows[-1]
        print(f"final greedy mean return: {last['mean_return']:.3f}")
    return 0


def _cmd_evaluate(args) -> int:
    cfg, policies = load_policies(args.checkpoint)
    scenario = args.scenario or cfg.scenario
    if scenario != cfg.scenario:
        raise SystemExit(
            f"checkpoint was trained on scenario {cfg.scenario}, not {scenario}; "
            "evaluation rejected"
        )
    eas_on = args.eas == "on"
    out_dir = args.out or os.path.join(args.checkpoint, "eval")
    os.makedirs(out_dir, exist_ok=True)

    result = evaluate(
        cfg, policies, episodes=args.episodes, eas_on=eas_on, seed=args.seed,
        collect_traces=args.traces > 0,
    )
    write_metrics_csv(os.path.join(out_dir, "metrics.csv"), result)
    write_metrics_summary(os.path.join(out_dir, "metrics_summary.csv"), result.metrics)
    for ep in range(min(args.traces, len(result.records))):
        write_trace_csv(os.path.join(out_dir, f"trace_{ep:03d}.csv"), result.records[ep].trace)

    m = result.metrics
    print(f"episodes:            {m.episodes}")
    print(f"failure rate:        {m.failure_rate:.3f}")
    print(f"mean return:         {m.mean_return:.3f}")
    print(f"min UAV-UAV (mean):  {m.min_uav_uav:.2f} m")
    print(f"min UAV-obs (mean):  {m.min_uav_obs:.2f} m")
    print(f"energy surrogate:    {m.energy_surrogate:.1f}")
    print(f"EAS intervention:    {m.eas_intervention_rate:.4f}")

    if args.timing:
        world = spawn_episode(cfg.env, seed=args.seed)
        us = measure_response_time(policies[0], world, 0, cfg.env,
                                   iterations=args.timing_iterations, with_eas=eas_on)
        with open(os.path.join(out_dir, "timing.txt"), "w") as fh:
            fh.write(f"median_decision_us {us:.2f}\n")
        print(f"median decision:     {us:.1f} us (wall clock, non-reproducible)")
    return 0


def _cmd_plot(args) -> int:
    written = render_outputs(args.run)
    if not written:
        print(f"nothing to plot under {args.run}")
        return 1
    for kind, path in sorted(written.items()):
        print(f"{kind}: {path}")
    return 0


def _cmd_replay(args) -> int:
    rows = read_trace_csv(args.episode)
    svg = render_trajectory_svg(rows)
    with open(args.svg, "w") as fh:
        fh.write(svg)
    print(f"wrote {args.svg}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="swarmav", description=__doc__,
                                     formatter_class=argparse.RawDescriptionHelpFormatter)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("train", help="train a run and write curve + checkpoints")
    p.add_argument("--scenario", default="2U1O", choices=sorted(SCENARIOS))
    p.add_argument("--method", choices=ADVANTAGE_KINDS, default=None,
                   help="credit-assignment method (default from config: maca)")
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--steps", type=int, default=None, help="total environment steps")
    p.add_argument("--out", required=True, help="run directory")
    p.add_argument("--config", default=None, help="plain-text config file")
    p.add_argument("--set", action="append", metavar="KEY=VALUE",
                   help="override a single config key, e.g. --set train.gamma=0.9")
    p.add_argument("--resume", action="store_true",
                   help="continue from the run directory's last checkpoint")
    p.set_defaults(func=_cmd_train)

    p = sub.add_parser("evaluate", help="benchmark a trained checkpoint")
    p.add_argument("--checkpoint", required=True, help="run directory holding checkpoints/")
    p.add_argument("--scenario", default=None, choices=sorted(SCENARIOS))
    p.add_argument("--episodes", type=int, default=100)
    p.add_argument("--eas", choices=("on", "off"), default="on")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", default=None, help="output directory (default <checkpoint>/eval)")
    p.add_argument("--traces", type=int, default=0, help="export the first N episode traces")
    p.add_argument("--timing", action="store_true",
                   help="also measure decision latency (wall clock; non-reproducible)")
    p.add_argument("--timing-iterations", type=int, default=1000)
    p.set_defaults(func=_cmd_evaluate)

    p = sub.add_parser("plot", help="render SVGs and summary tables for a run directory")
    p.add_argument("--run", required=True)
    p.set_defaults(func=_cmd_plot)

    p = sub.add_parser("replay", help="render one episode trace CSV as an SVG")
    p.add_argument("--episode", required=True, help="trace CSV path")
    p.add_argument("--svg", required=True, help="output SVG path")
    p.set_defaults(func=_cmd_replay)
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
