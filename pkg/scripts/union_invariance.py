"""Measure of a quarter arc with and without three extra boundary points on
the unit disk (p = 4)."""
import argparse

import numpy as np

from tugwar import boundary as bd
from tugwar import geometry as geo
from tugwar.estimator import union_experiments


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--eps", type=float, default=0.01)
    ap.add_argument("--delta", type=float, default=0.05)
    ap.add_argument("--x0", type=float, nargs=2, default=[0.0, 0.0])
    args = ap.parse_args()
    ang = np.array([np.pi, 1.25 * np.pi, 1.5 * np.pi])
    E = bd.finite_point_set(np.stack([np.cos(ang), np.sin(ang)], 1))
    F = bd.arc(theta1=0.0, theta2=np.pi / 2)
    rep = union_experiments(geo.ball(), [E], F, args.x0, p=4.0, eps_list=[args.eps],
                            delta_list=[args.delta])
    print(f"omega(E)     {rep.union_E.estimates()[-1]:.5f}")
    print(f"omega(F)     {rep.F.estimates()[-1]:.5f}")
    print(f"omega(E u F) {rep.E_and_F.estimates()[-1]:.5f}")
    print(f"gap {rep.gap:.5f} (tolerance {rep.tolerance})")


if __name__ == "__main__":
    main()
