"""How often a valid residual certificate survives shift_squared(d, delta).

A shift adds delta to every squared inter distance but 2*delta to the squared
threshold 2*beta, so survival requires min_inter^2 > 2*beta + delta.  The
table compares observed survival with that prediction.
"""
import argparse

import numpy as np

from clusterkit.generators import generate_pseudo
from clusterkit.separability import is_residually_separable
from clusterkit.transforms import shift_squared


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--instances", type=int, default=200)
    ap.add_argument("--margin", type=float, default=1.1)
    ap.add_argument("--deltas", default="0.01,0.1,1,10,100")
    args = ap.parse_args()
    deltas = [float(x) for x in args.deltas.split(",")]
    rng = np.random.default_rng(0)
    cases = []
    for t in range(args.instances):
        sizes = [int(x) for x in rng.integers(2, 6, size=int(rng.integers(2, 5)))]
        cases.append(generate_pseudo(sizes, rng=t, criterion="residual", gap_margin=args.margin))
    print(f"{'delta':>8} {'survived':>9} {'predicted':>10} {'agree':>6}")
    for delta in deltas:
        survived = predicted = agree = 0
        for d, g in cases:
            before = is_residually_separable(d, g)
            ok = is_residually_separable(shift_squared(d, delta), g).valid
            pred = before.min_inter**2 > 2 * before.beta_value + delta
            survived += ok
            predicted += pred
            agree += ok == pred
        print(f"{delta:8g} {survived:9d} {predicted:10d} {agree:6d}")


if __name__ == "__main__":
    main()
