"""Objective trace of the alternating updates, inexact CG vs tight CG, written as CSV."""
import argparse
import csv
import sys

from notmf import ModelConfig, fit, make_synthetic

ap = argparse.ArgumentParser(description=__doc__)
ap.add_argument("--seed", type=int, default=1)
ap.add_argument("--iters", type=int, default=50)
args = ap.parse_args()

Y, _ = make_synthetic(seed=args.seed)
Y = Y.columns(392)
base = ModelConfig(rank=4, order=2, season=28, outer_iters=args.iters, seed=args.seed)
traces = {
    "cg5": fit(Y, base).objective_trace,
    "cg_tight": fit(Y, base.replace(cg_iters=1000, cg_tol=1e-12)).objective_trace,
}
w = csv.writer(sys.stdout, lineterminator="\n")
w.writerow(["iteration", *traces])
for i, vals in enumerate(zip(*traces.values()), 1):
    w.writerow([i, *(repr(v) for v in vals)])
