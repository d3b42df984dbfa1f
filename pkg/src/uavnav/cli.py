"""Command-line entry point.

Subcommands: topmap (gridded outage-probability preview), train (one
training run), eval (greedy rollouts of a checkpoint plus the
straight-line reference), compare (train several replay variants and
merge their learning curves) and buffers-selftest (statistical health
checks of the replay buffers).

Exit codes: 0 success, 2 configuration error, 3 training divergence.
"""

from __future__ import annotations

import argparse
import os
import sys

import numpy as np

from . import radio, replay, trainer
from .agent import DivergenceError, load_checkpoint
from .config import ConfigError, RunConfig, default_config, derive_seed, echo_config, load_config
from .world import build_world, eval_start_positions


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="uavnav", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, variant_flag=True):
        p.add_argument("--config", help="flat key=value config file")
        p.add_argument("--profile", choices=("paper", "desk"), help="base parameter profile")
        p.add_argument("--seed", type=int, help="learning master seed")
        p.add_argument("--out", help="output directory")
        if variant_flag:
            p.add_argument("--variant", choices=("qier", "er", "per"), help="replay variant")

    common(sub.add_parser("train", help="run one training run"))
    common(sub.add_parser("topmap", help="export the gridded TOP preview"), variant_flag=False)

    p_eval = sub.add_parser("eval", help="greedy evaluation of a checkpoint")
    common(p_eval)
    p_eval.add_argument("--checkpoint", required=True, help="checkpoint .npz from train")

    p_cmp = sub.add_parser("compare", help="train and compare replay variants")
    common(p_cmp, variant_flag=False)
    p_cmp.add_argument(
        "--variants", default="qier,er,per", help="comma-separated variants to train"
    )

    sub.add_parser("buffers-selftest", help="statistical self-tests of the buffers")
    return parser


def _resolve(args) -> RunConfig:
    if args.config:
        cfg = load_config(args.config, profile=args.profile)
    else:
        cfg = default_config(args.profile or "paper")
    if args.seed is not None:
        cfg.seed = args.seed
    if getattr(args, "variant", None):
        cfg.variant = args.variant
    return cfg.validate()


def _out_dir(args, cfg: RunConfig, suffix: str) -> str:
    out = args.out or os.path.join("runs", f"{suffix}_{cfg.profile}_seed{cfg.seed}")
    os.makedirs(out, exist_ok=True)
    return out


def _cmd_train(args) -> int:
    cfg = _resolve(args)
    out = _out_dir(args, cfg, f"train_{cfg.variant}")
    result = trainer.run_training(cfg, out_dir=out, progress=True)
    reached = sum(1 for l in result.episodes if l.terminal == "destination")
    print(f"run dir: {out}")
    print(f"episodes: {len(result.episodes)}, destination reached: {reached}")
    print(f"checkpoint: {result.checkpoint_path}")
    return 0


def _cmd_topmap(args) -> int:
    cfg = _resolve(args)
    out = _out_dir(args, cfg, "topmap")
    world = build_world(cfg)
    tmap = radio.build_top_map(
        world.buildings,
        world.sectors,
        world.radio,
        world.fading,
        world.airspace,
        resolution=cfg.topmap_resolution,
        altitude=cfg.flight_altitude,
        seed=derive_seed(cfg.env_seed, "topmap"),
        los_pitch=cfg.los_pitch,
    )
    echo_config(cfg, os.path.join(out, "config_resolved.txt"))
    radio.save_top_map(
        tmap,
        os.path.join(out, "topmap.csv"),
        os.path.join(out, "topmap.meta"),
        os.path.join(out, "topmap.pgm"),
    )
    print(f"topmap {tmap.values.shape[1]}x{tmap.values.shape[0]} at "
          f"{cfg.topmap_resolution:g} m -> {out}")
    return 0


def _cmd_eval(args) -> int:
    cfg = _resolve(args)
    out = _out_dir(args, cfg, "eval")
    params, fingerprint = load_checkpoint(args.checkpoint)
    world = build_world(cfg)
    starts = eval_start_positions(cfg, world)
    echo_config(cfg, os.path.join(out, "config_resolved.txt"))
    logs = trainer.evaluate_policy(params, starts, cfg, world=world, out_dir=out)
    straight = [
        trainer.straight_line_metrics(s, cfg, world=world, episode=i)
        for i, s in enumerate(starts)
    ]
    trainer.write_episodes_csv(straight, os.path.join(out, "straight_episodes.csv"))
    reached = sum(1 for l in logs if l.terminal == "destination")
    mean_eod = float(np.mean([l.eod_hat for l in logs]))
    mean_eod_sl = float(np.mean([l.eod_hat for l in straight]))
    print(f"checkpoint fingerprint: {fingerprint}")
    print(f"greedy policy: {reached}/{len(logs)} reached, mean EOD {mean_eod:.3f} s")
    print(f"straight line: mean EOD {mean_eod_sl:.3f} s")
    return 0


def _cmd_compare(args) -> int:
    cfg = _resolve(args)
    variants = [v.strip() for v in args.variants.split(",") if v.strip()]
    for v in variants:
        if v not in ("qier", "er", "per"):
            raise ConfigError(f"unknown variant {v!r}")
    out = _out_dir(args, cfg, "compare")
    echo_config(cfg, os.path.join(out, "config_resolved.txt"))
    logs_by_variant = {}
    for v in variants:
        import dataclasses

        vcfg = dataclasses.replace(cfg, variant=v)
        print(f"training variant {v} ...")
        result = trainer.run_training(vcfg, out_dir=os.path.join(out, v), progress=True)
        logs_by_variant[v] = result.episodes
    trainer.write_returns_ma_csv(
        logs_by_variant, os.path.join(out, "returns_ma.csv"), cfg.ma_window
    )
    bounds = _default_slots(cfg.episodes)
    with open(os.path.join(out, "comparison_slots.csv"), "w") as f:
        f.write(
            "variant,slot_first,slot_last,episodes,mean_time_cost_s,mean_eod_s,mean_objective\n"
        )
        for v, logs in logs_by_variant.items():
            for row in trainer.aggregate_slots(logs, bounds, cfg.slot_seconds):
                f.write(
                    f"{v},{row['slot_first']},{row['slot_last']},{row['episodes']},"
                    f"{row['mean_time_cost_s']!r},{row['mean_eod_s']!r},"
                    f"{row['mean_objective']!r}\n"
                )
    print(f"comparison written to {out}")
    return 0


def _default_slots(episodes: int) -> list[tuple]:
    """Four slots mirroring the 70/80/90/100% breakdown of the run."""
    cuts = [0, int(0.7 * episodes), int(0.8 * episodes), int(0.9 * episodes), episodes]
    return [(cuts[i] + 1, cuts[i + 1]) for i in range(4) if cuts[i + 1] > cuts[i]]


def _cmd_selftest(_args) -> int:
    results = replay.self_test()
    ok = True
    for name, passed, detail in results:
        print(f"{'PASS' if passed else 'FAIL'}  {name}: {detail}")
        ok = ok and passed
    return 0 if ok else 1


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    handlers = {
        "train": _cmd_train,
        "topmap": _cmd_topmap,
        "eval": _cmd_eval,
        "compare": _cmd_compare,
        "buffers-selftest": _cmd_selftest,
    }
    try:
        return handlers[args.command](args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except FileNotFoundError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except DivergenceError as exc:
        print(f"training diverged: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
