"""Stage infima theta_k for a geometric plan (radii 4**-k) and a squares plan
(radii 2**-(2**k))."""
import argparse

import numpy as np

from tugwar.strategies import select_subsequence, theta


def on_line(radii):
    return np.array([[r, 0.0] for r in radii])


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--eps", type=float, default=0.02, help="stage solver eps (normalized frame)")
    ap.add_argument("--p", type=float, default=4.0)
    ap.add_argument("--stages", type=int, nargs="+", default=[1, 2, 3])
    args = ap.parse_args()
    plans = {
        "geometric": select_subsequence(on_line(0.25 ** np.arange(6)), (0.0, 0.0)),
        "squares": select_subsequence(on_line([2.0 ** -(2 ** k) for k in range(5)]), (0.0, 0.0)),
    }
    for name, plan in plans.items():
        vals = [theta(plan, k, args.p, args.eps) for k in args.stages if k in plan.stages]
        print(name, " ".join(f"theta_{k}={v:.6f}" for k, v in zip(args.stages, vals)))


if __name__ == "__main__":
    main()
