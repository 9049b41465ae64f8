"""Desk-scale pipeline: co-train and single-agent runs, then a shared-seed
comparison of the learned vehicles against the non-learning baselines and a
2x2 vehicle/pedestrian pairing matrix.

Usage: python scripts/run_desk_pipeline.py [--out runs/desk] [--seed 0]
       [--episodes 100] [--skip-single-agent] [--workers N]
"""
import argparse
import json
import sys
import time
from pathlib import Path

from jaysim import metrics, trainer


def main() -> int:
    ap = argparse.ArgumentParser()
    ap.add_argument("--out", default="runs/desk")
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--episodes", type=int, default=100)
    ap.add_argument("--workers", type=int, default=1)
    ap.add_argument("--skip-single-agent", action="store_true")
    args = ap.parse_args()

    out = Path(args.out)
    seeds = [args.seed * 1_000_000 + 40_000 + i for i in range(args.episodes)]

    runs = {}
    modes = ["co-train"] if args.skip_single_agent else ["co-train", "single-agent"]
    for mode in modes:
        t0 = time.time()
        cfg = trainer.desk_config(seed=args.seed, mode=mode)
        ckpts = trainer.train(cfg, out / mode)
        runs[mode] = str(ckpts[-1])
        print(f"[{mode}] trained in {(time.time() - t0) / 60:.1f} min -> {ckpts[-1]}")

    rows = []

    def add(label, sdc, peds):
        rep, _ = metrics.evaluate(sdc, peds, args.episodes, seeds, 0.25, workers=args.workers)
        rows.append((label, rep.goal_rate, rep.collision_rate, rep.timeout_rate))
        print(f"{label:28s} goal={rep.goal_rate:5.2f} collision={rep.collision_rate:5.2f}")
        return rep

    for name in ("random", "constant", "rule", "rule-brake"):
        add(f"baseline/{name}", name, "always-go")
    marl = runs["co-train"]
    add("marl -> marl peds", marl, marl)
    add("marl -> always-go", marl, "always-go")
    if "single-agent" in runs:
        single = runs["single-agent"]
        add("single-agent -> always-go", single, "always-go")
        add("single-agent -> marl peds", single, marl)

    (out / "comparison.json").write_text(
        json.dumps(
            [{"policy": r[0], "goal": r[1], "collision": r[2], "timeout": r[3]} for r in rows],
            indent=2,
        )
        + "\n"
    )
    print(f"table: {out / 'comparison.json'}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
