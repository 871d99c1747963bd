"""Search for an instance whose variational certificate is destroyed by a
squared shift while its residual certificate survives.

Writes the first hit to tests/fixtures/variational_loss.json.
"""
import argparse
from pathlib import Path

import numpy as np

from clusterkit import _jsonfmt
from clusterkit.core import Criterion
from clusterkit.generators import generate_euclidean
from clusterkit.separability import certify
from clusterkit.transforms import shift_squared

DELTAS = np.geomspace(1e-2, 1e4, 61)


def search(max_seed: int):
    for seed in range(max_seed):
        rng = np.random.default_rng(seed)
        sizes = [int(s) for s in rng.integers(2, 5, size=int(rng.integers(2, 4)))]
        data, g, cert = generate_euclidean(sizes, 2, 1.0, 1.2, seed, Criterion.RESIDUAL)
        d = data.distances()
        if not (certify(d, g, Criterion.VARIATIONAL).valid and cert.valid):
            continue
        for delta in DELTAS:
            shifted = shift_squared(d, float(delta))
            if not certify(shifted, g, Criterion.VARIATIONAL).valid:
                assert certify(shifted, g, Criterion.RESIDUAL).valid
                return seed, sizes, d, g, float(delta)
    return None


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--max-seed", type=int, default=200)
    ap.add_argument("--out", default=str(Path(__file__).parents[1] / "tests/fixtures/variational_loss.json"))
    args = ap.parse_args()
    hit = search(args.max_seed)
    if hit is None:
        raise SystemExit("no instance found")
    seed, sizes, d, g, delta = hit
    payload = {
        "seed": seed,
        "sizes": sizes,
        "delta": delta,
        "matrix": d.to_dict(),
        "partition": g.to_dict(),
    }
    Path(args.out).write_text(_jsonfmt.dumps(payload) + "\n")
    print(f"seed={seed} sizes={sizes} delta={delta:.6g} -> {args.out}")


if __name__ == "__main__":
    main()
