"""Seeding hit-all frequency against the product bound over an (m, k) grid."""
import argparse

from clusterkit.clustering import estimate_hitting_probability, hitting_probability_bound
from clusterkit.generators import generate_euclidean


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--grid", default="50:2,50:3,20:4,10:5", help="comma list of m:k")
    ap.add_argument("--trials", type=int, default=10_000)
    ap.add_argument("--mode", default="dsquared", choices=["dsquared", "residual_dsquared"])
    ap.add_argument("--margin", type=float, default=1.05)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()
    print(f"{'m':>4} {'k':>3} {'bound':>9} {'estimate':>9} {'99% CI':>21} {'floor':>9}  verdict")
    for item in args.grid.split(","):
        m, k = (int(x) for x in item.split(":"))
        data, g, _ = generate_euclidean([m] * k, 2, 1.0, args.margin, args.seed)
        est = estimate_hitting_probability(data.distances(), g, args.mode, args.trials, args.seed)
        bound = hitting_probability_bound(m, k)
        floor = bound - 3 * est.stderr
        verdict = "ok" if est.estimate >= floor else "BELOW"
        print(
            f"{m:>4} {k:>3} {bound:9.6f} {est.estimate:9.6f} "
            f"[{est.ci_low:8.6f}, {est.ci_high:8.6f}] {floor:9.6f}  {verdict}"
        )


if __name__ == "__main__":
    main()
