"""Value of the mollified puncture indicator at radius 0.5 on the punctured
unit disk (p = 4) against the closed form, as eps halves."""
import argparse
import time

from tugwar import boundary as bd
from tugwar import geometry as geo
from tugwar.game import GameParams
from tugwar.oracles import punctured_ball_value
from tugwar.solver import solve


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--eps", type=float, nargs="+", default=[0.08, 0.04, 0.02])
    ap.add_argument("--p", type=float, default=4.0)
    args = ap.parse_args()
    D = geo.punctured_ball()
    exact = punctured_ball_value(args.p, 2, 0.5)
    print(f"closed form {exact:.6f}")
    print("eps      value     error     seconds")
    for eps in args.eps:
        params = GameParams(2, args.p, eps)
        f = bd.mollified_indicator(D, bd.point((0, 0)), params.band)
        t = time.perf_counter()
        v = solve(D, f, params).evaluate((0.5, 0.0))
        print(f"{eps:<8g} {v:.6f}  {abs(v - exact):.6f}  {time.perf_counter() - t:.1f}")


if __name__ == "__main__":
    main()
