"""How many CG steps per X-update are enough? Rolling MAPE vs n_x on paired seeds."""
import argparse

import numpy as np

from notmf import ModelConfig, make_synthetic, rolling_forecast
from notmf.evaluation import score_forecast


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--seeds", type=int, default=10)
    ap.add_argument("--cg-iters", default="1,3,5,10,15")
    ap.add_argument("--horizon", type=int, default=1)
    args = ap.parse_args()
    levels = [int(v) for v in args.cg_iters.split(",")]

    table = np.zeros((len(levels), args.seeds))
    for s in range(args.seeds):
        Y, _ = make_synthetic(seed=s)
        for j, n in enumerate(levels):
            cfg = ModelConfig(rank=4, order=2, season=28, cg_iters=n, seed=s)
            fc = rolling_forecast(Y, cfg, 392, args.horizon, 28 // args.horizon)
            table[j, s] = score_forecast(Y, fc).mape

    ref = table[-1]
    print(f"{'n_x':>4s} {'MAPE':>8s} {'vs last':>9s} {'paired se':>10s}")
    for n, row in zip(levels, table):
        diff = row - ref
        se = diff.std(ddof=1) / np.sqrt(len(diff)) if len(diff) > 1 else float("nan")
        print(f"{n:4d} {row.mean():8.3f} {diff.mean():+9.4f} {se:10.4f}")


if __name__ == "__main__":
    main()
