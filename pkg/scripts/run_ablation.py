"""Jaywalk-rate ablation: evaluate one policy pair across multipliers on a
shared seed set and print the goal/collision table.

Usage: python scripts/run_ablation.py --sdc <ckpt|baseline> [--peds <ckpt|always-go>]
       [--multipliers 0,0.25,1.0] [--episodes 100] [--out runs/ablation]
"""
import argparse
import sys
from pathlib import Path

from jaysim import metrics


def main() -> int:
    ap = argparse.ArgumentParser()
    ap.add_argument("--sdc", required=True)
    ap.add_argument("--peds", default="always-go")
    ap.add_argument("--multipliers", default="0,0.25,1.0")
    ap.add_argument("--episodes", type=int, default=100)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--workers", type=int, default=1)
    ap.add_argument("--out", default="runs/ablation")
    args = ap.parse_args()

    multipliers = [float(m) for m in args.multipliers.split(",")]
    seeds = [args.seed * 1_000_000 + 60_000 + i for i in range(args.episodes)]
    sweep = metrics.ablation_sweep(
        args.sdc, args.peds, multipliers, args.episodes, seeds, workers=args.workers
    )
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    metrics.write_ablation_csv(out / "ablation.csv", sweep)
    print(f"{'multiplier':>10} {'goal':>6} {'collision':>9} {'jaywalk share':>13}")
    for m, rep in sweep:
        print(
            f"{m:>10g} {rep.goal_rate:>6.2f} {rep.collision_rate:>9.2f} "
            f"{rep.attribution['jaywalk_share']:>13.3f}"
        )
    print(f"table: {out / 'ablation.csv'}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
