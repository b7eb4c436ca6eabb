"""Measure of one boundary point as the mollifier width shrinks: a point on
the unit circle versus the puncture of the punctured disk."""
import argparse

import numpy as np

from tugwar import boundary as bd
from tugwar import geometry as geo
from tugwar.estimator import estimate_measure


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--eps", type=float, default=0.02)
    ap.add_argument("--deltas", type=float, nargs="+", default=[0.4, 0.2, 0.1])
    ap.add_argument("--p", type=float, default=4.0)
    args = ap.parse_args()
    disk = estimate_measure(geo.ball(), bd.point((1, 0)), (0, 0), [args.eps], args.deltas, p=args.p)
    punct = estimate_measure(geo.punctured_ball(), bd.point((0, 0)), (0.5, 0.0), [args.eps],
                             args.deltas, p=args.p)
    a, b = disk.estimates(), punct.estimates()
    print("delta    disk      ratio   punctured")
    for k, d in enumerate(args.deltas):
        ratio = "" if k == 0 else f"{a[k - 1] / a[k]:.3f}"
        print(f"{d:<8g} {a[k]:.5f}  {ratio:<7} {b[k]:.5f}")
    print(f"punctured closed form {1 - 0.5 ** ((args.p - 2) / (args.p - 1)):.5f}")
    np.savetxt("point_contrast.csv", np.column_stack([args.deltas, a, b]), delimiter=",",
               header="delta,disk,punctured", comments="")


if __name__ == "__main__":
    main()
