"""Sweeps that exercise scale invariance, convergent consistency and
range richness of the range detector."""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .clustering import DEFAULT_RESTARTS, DetectionResult, detect_range
from .core import Criterion, DistanceMatrix, Partition
from .generators import richness_witness
from .separability import enumerate_partitions
from .transforms import TransformKind, TransformSpec, scale, validate_transform

SHRINK_CHOICES = (0.3, 0.7, 1.0)
GROWTH_CHOICES = (1.0, 2.0, 10.0)


@dataclass
class SweepReport:
    name: str
    total: int = 0
    preserved: int = 0
    failures: list[dict] = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return self.total > 0 and self.preserved == self.total

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "total": self.total,
            "preserved": self.preserved,
            "passed": self.passed,
            "failures": self.failures,
        }


def same_outcome(a: DetectionResult, b: DetectionResult) -> bool:
    return a.partition == b.partition and a.level == b.level


def scale_invariance(
    d: DistanceMatrix,
    k_max: int,
    criterion: Criterion | str,
    alphas: Sequence[float] = (1e-3, 1e3),
    restarts: int = DEFAULT_RESTARTS,
    seed: int = 0,
) -> SweepReport:
    base = detect_range(d, k_max, criterion, restarts, seed)
    rep = SweepReport("scale_invariance")
    for alpha in alphas:
        other = detect_range(scale(d, alpha), k_max, criterion, restarts, seed)
        rep.total += 1
        if same_outcome(base, other):
            rep.preserved += 1
        else:
            rep.failures.append({"alpha": alpha, "level": other.level})
    return rep


def random_consistency_spec(
    g: Partition, kind: TransformKind | str, rng: np.random.Generator
) -> TransformSpec:
    """Shrink per cluster from {0.3, 0.7, 1.0}, one growth factor from {1, 2, 10}."""
    shrink = tuple(float(rng.choice(SHRINK_CHOICES)) for _ in g.clusters)
    growth = float(rng.choice(GROWTH_CHOICES))
    return TransformSpec(kind=kind, shrink=shrink, growth=growth, reference_partition=g)


def consistency_sweep(
    d: DistanceMatrix,
    k_max: int,
    criterion: Criterion | str,
    n_specs: int = 10,
    kind: TransformKind | str | None = None,
    restarts: int = DEFAULT_RESTARTS,
    seed: int = 0,
    name: str | None = None,
) -> SweepReport:
    """Detect, transform around the detected clustering, detect again.

    ``kind`` defaults to plain convergent consistency for the variational
    criterion and the keep-min variant for the residual one.
    """
    criterion = Criterion(criterion)
    if kind is None:
        kind = (
            TransformKind.CONVERGENT
            if criterion is Criterion.VARIATIONAL
            else TransformKind.CONVERGENT_KEEP_MIN
        )
    kind = TransformKind(kind)
    rep = SweepReport(name or f"consistency[{kind.value}]")
    base = detect_range(d, k_max, criterion, restarts, seed)
    if base.partition is None:
        rep.failures.append({"reason": "no range clustering detected on the input"})
        return rep
    gen = np.random.default_rng(seed)
    for t in range(n_specs):
        spec = random_consistency_spec(base.partition, kind, gen)
        d2 = spec.apply(d)
        rep.total += 1
        valid = validate_transform(d, d2, base.partition, kind).passed
        other = detect_range(d2, k_max, criterion, restarts, seed)
        if valid and same_outcome(base, other):
            rep.preserved += 1
        else:
            rep.failures.append(
                {"trial": t, "spec": spec.to_dict(), "transform_valid": valid, "level": other.level}
            )
    return rep


def richness_sweep(
    sizes: Sequence[int] = (4, 5, 6, 7, 8),
    criterion: Criterion | str = Criterion.VARIATIONAL,
    restarts: int = DEFAULT_RESTARTS,
    seed: int = 0,
) -> SweepReport:
    """Every partition (blocks >= 2, k >= 2) of every listed set size must be
    returned exactly by the detector on its two-valued witness."""
    rep = SweepReport("range_richness")
    for n in sizes:
        k_max = n // 2
        for k in range(2, k_max + 1):
            for g in enumerate_partitions(n, k, 2):
                res = detect_range(richness_witness(g), k_max, criterion, restarts, seed)
                rep.total += 1
                if res.partition == g and res.level == k:
                    rep.preserved += 1
                else:
                    rep.failures.append({"partition": g.to_dict()["clusters"], "level": res.level})
    return rep
