"""Staged strategy on the unit disk minus the points 4**-k (k <= 8) against an
opponent pulling toward the origin; prints the escape rate and its bound."""
import argparse
import json

import numpy as np

from tugwar import geometry as geo
from tugwar.estimator import staged_escape_experiment


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--i", type=int, default=4)
    ap.add_argument("--delta", type=float, default=0.3)
    ap.add_argument("--stage-eps", type=float, default=0.02)
    ap.add_argument("--n-samples", type=int, default=20_000)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--start-radius", type=float, default=5e-4)
    args = ap.parse_args()
    D = geo.ball_minus_point_sequence(ratio=0.25, k_max=8)
    x = args.start_radius * np.array([np.cos(2.0), np.sin(2.0)])
    rep = staged_escape_experiment(D, D.punctures, (0.0, 0.0), x, p=4.0, i=args.i, delta=args.delta,
                                   stage_eps=args.stage_eps, n_samples=args.n_samples, seed=args.seed)
    e = rep.escape
    print(f"escape {e.mean:.4f} +- {e.stderr:.4f}  bound {rep.bound:.4f}  margin {rep.margin:.4f}")
    print(f"theta1 {rep.theta1:.4f}  c {rep.c:.4f}  game eps {rep.game_eps:.3e}")
    print(json.dumps(rep.plan, indent=1))


if __name__ == "__main__":
    main()
