"""Command-line entry point: training, evaluation, baselines, the jaywalk
ablation sweep, and the selfcheck oracle suites.

Seed-set files are newline-delimited integers so every method can be compared
on exactly the same scenarios. Every artifact embeds the config hash and
seed, and two runs with equal hash + seed produce identical artifacts.
"""
from __future__ import annotations

import argparse
import dataclasses
import sys
from pathlib import Path

try:
    import tomllib
except ModuleNotFoundError:  # python < 3.11
    import tomli as tomllib

from . import metrics as metricsmod
from . import oracles
from . import trainer as trainermod
from .trainer import TrainConfig, desk_config

_CONFIG_FIELDS = {f.name: f.type for f in dataclasses.fields(TrainConfig)}


def load_config(path) -> TrainConfig:
    """TOML config; absent keys take the full-scale defaults, unknown or
    duplicate keys are rejected."""
    with open(path, "rb") as fh:
        try:
            data = tomllib.load(fh)
        except tomllib.TOMLDecodeError as exc:
            raise ValueError(f"{path}: {exc}") from exc
    return make_config(data, source=str(path))


def make_config(data: dict, source: str = "overrides", base: TrainConfig | None = None) -> TrainConfig:
    unknown = set(data) - set(_CONFIG_FIELDS)
    if unknown:
        raise ValueError(f"{source}: unknown config keys: {sorted(unknown)}")
    cfg = dataclasses.replace(base or TrainConfig(), **data)
    cfg.validate()
    return cfg


def _coerce(field: str, raw: str):
    target = TrainConfig.__dataclass_fields__[field].type
    if target is int or target == "int":
        return int(raw)
    if target is float or target == "float":
        return float(raw)
    return raw


def parse_overrides(pairs: list[str]) -> dict:
    out = {}
    for pair in pairs:
        key, sep, value = pair.partition("=")
        if not sep:
            raise ValueError(f"override must be key=value, got {pair!r}")
        if key not in _CONFIG_FIELDS:
            raise ValueError(f"unknown config key: {key}")
        out[key] = _coerce(key, value)
    return out


def read_seed_file(path, n_episodes: int | None) -> list[int]:
    seeds = [int(line) for line in Path(path).read_text().split()]
    if n_episodes is not None and len(seeds) != n_episodes:
        raise ValueError(f"seed file {path} has {len(seeds)} seeds, expected {n_episodes}")
    return seeds


def default_seeds(base: int, n: int) -> list[int]:
    return [base + i for i in range(n)]


def _cmd_train(args) -> int:
    if args.config:
        cfg = load_config(args.config)
    elif args.desk:
        cfg = desk_config()
    else:
        cfg = TrainConfig()
    overrides = parse_overrides(args.set or [])
    if args.desk and args.config:
        raise ValueError("--desk and --config are mutually exclusive")
    if args.mode:
        overrides["mode"] = args.mode
    if args.seed is not None:
        overrides["seed"] = args.seed
    if overrides:
        cfg = make_config(overrides, base=cfg)
    out = Path(args.out)
    checkpoints = trainermod.train(cfg, out)
    print(f"trained {cfg.updates} updates ({cfg.mode}); final checkpoint: {checkpoints[-1]}")
    return 0


def _eval_common(args, sdc_spec: str, ped_spec: str) -> int:
    if args.seeds:
        seeds = read_seed_file(args.seeds, args.episodes)
    else:
        seeds = default_seeds(args.seed, args.episodes)
    report, logs = metricsmod.evaluate(
        sdc_spec, ped_spec, args.episodes, seeds, args.multiplier, workers=args.workers
    )
    meta = {
        "sdc": sdc_spec,
        "peds": ped_spec,
        "multiplier": args.multiplier,
        "seed_set_hash": metricsmod.seed_set_hash(seeds),
    }
    metricsmod.save_eval_artifacts(args.out, report, logs, seeds, meta)
    print(
        f"episodes={report.episodes} goal={report.goal_rate:.3f} "
        f"collision={report.collision_rate:.3f} timeout={report.timeout_rate:.3f}"
    )
    print(f"report: {Path(args.out) / 'report.json'}")
    return 0


def _cmd_eval(args) -> int:
    return _eval_common(args, args.sdc, args.peds)


def _cmd_baseline(args) -> int:
    if args.name not in ("random", "constant", "rule", "rule-brake"):
        raise ValueError(f"unknown baseline: {args.name}")
    return _eval_common(args, args.name, args.peds)


def _cmd_ablate(args) -> int:
    multipliers = [float(m) for m in args.multipliers.split(",")]
    for m in multipliers:
        if not 0.0 <= m <= 1.0:
            raise ValueError(f"multiplier out of range [0, 1]: {m}")
    if args.seeds:
        seeds = read_seed_file(args.seeds, args.episodes)
    else:
        seeds = default_seeds(args.seed, args.episodes)
    sweep = metricsmod.ablation_sweep(
        args.sdc, args.peds, multipliers, args.episodes, seeds, workers=args.workers
    )
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    metricsmod.write_ablation_csv(out / "ablation.csv", sweep)
    for m, rep in sweep:
        metricsmod.write_report(out / f"report_m{m:g}.json", rep)
        print(
            f"multiplier={m:g}: goal={rep.goal_rate:.3f} collision={rep.collision_rate:.3f} "
            f"jaywalk_share={rep.attribution['jaywalk_share']:.3f}"
        )
    print(f"table: {out / 'ablation.csv'}")
    return 0


def _cmd_selfcheck(args) -> int:
    return oracles.run_selfcheck(verbose=True, workers=args.workers)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="jaysim",
        description="intersection co-training simulator and behavior-gap metrics",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("train", help="run co-training or single-agent vehicle training")
    p.add_argument("--config", help="TOML config file (full-scale defaults for absent keys)")
    p.add_argument("--desk", action="store_true", help="reduced scale: 32 envs x 64 steps x 300 updates")
    p.add_argument("--mode", choices=["co-train", "single-agent"])
    p.add_argument("--seed", type=int)
    p.add_argument("--out", default="runs/train")
    p.add_argument("--set", action="append", metavar="KEY=VALUE", help="config override (repeatable)")
    p.set_defaults(fn=_cmd_train)

    def eval_args(p):
        p.add_argument("--episodes", type=int, default=100)
        p.add_argument("--seeds", help="newline-delimited seed file (shared across methods)")
        p.add_argument("--seed", type=int, default=0, help="base for derived seeds when no file given")
        p.add_argument("--multiplier", type=float, default=0.25)
        p.add_argument("--workers", type=int, default=1)
        p.add_argument("--out", default="runs/eval")

    p = sub.add_parser("eval", help="fixed-seed evaluation of a policy pair")
    p.add_argument("--sdc", required=True, help="checkpoint path or baseline name")
    p.add_argument("--peds", default="always-go", help="checkpoint path or 'always-go'")
    eval_args(p)
    p.set_defaults(fn=_cmd_eval)

    p = sub.add_parser("baseline", help="evaluate a non-learning vehicle baseline")
    p.add_argument("--name", required=True, choices=["random", "constant", "rule", "rule-brake"])
    p.add_argument("--peds", default="always-go")
    eval_args(p)
    p.set_defaults(fn=_cmd_baseline)

    p = sub.add_parser("ablate", help="jaywalk-rate ablation sweep")
    p.add_argument("--sdc", required=True)
    p.add_argument("--peds", default="always-go")
    p.add_argument("--multipliers", default="0,0.25,1.0")
    eval_args(p)
    p.set_defaults(fn=_cmd_ablate)

    p = sub.add_parser("selfcheck", help="run the oracle suites")
    p.add_argument("--workers", type=int, default=1)
    p.set_defaults(fn=_cmd_selfcheck)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.fn(args)
    except (ValueError, FileNotFoundError, RuntimeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
