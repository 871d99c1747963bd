"""Distance transforms (scaling, consistency variants, squared shift) and a
validator that checks what each transform promises."""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Sequence

import numpy as np

from . import _jsonfmt
from .core import DistanceMatrix, Partition, PartitionError, inter_cluster_mask, min_distance

_RTOL = 1e-12


class TransformKind(str, Enum):
    SCALE = "scale"
    CONSISTENCY = "consistency"
    CONVERGENT = "convergent_consistency"
    CONVERGENT_KEEP_MIN = "convergent_consistency_keep_min"
    SQUARED_SHIFT = "squared_shift"


_CONSISTENCY_KINDS = {
    TransformKind.CONSISTENCY,
    TransformKind.CONVERGENT,
    TransformKind.CONVERGENT_KEEP_MIN,
}


def scale(d: DistanceMatrix, alpha: float) -> DistanceMatrix:
    if not alpha > 0:
        raise ValueError("alpha must be positive")
    return DistanceMatrix(d.entries * alpha, d.labels)


def shift_squared(d: DistanceMatrix, delta: float) -> DistanceMatrix:
    """Add ``delta`` to every squared off-diagonal distance."""
    if delta < 0:
        raise ValueError("delta must be non-negative")
    out = np.sqrt(d.squared + delta)
    np.fill_diagonal(out, 0.0)
    return DistanceMatrix(out, d.labels)


def _growth_table(growth: float | np.ndarray, n: int) -> np.ndarray:
    g = np.broadcast_to(np.asarray(growth, dtype=float), (n, n)).copy()
    if not np.array_equal(g, g.T):
        raise ValueError("per-pair growth table must be symmetric")
    return g


def _check_shrink(shrink: float | Sequence[float], k: int) -> np.ndarray:
    s = np.broadcast_to(np.asarray(shrink, dtype=float), (k,)).copy()
    if np.any(~(s > 0)) or np.any(s > 1):
        raise ValueError("shrink factors must lie in (0, 1]")
    return s


def _reshape(
    d: DistanceMatrix,
    g: Partition,
    shrink: float | Sequence[float],
    growth: float | np.ndarray,
    anchors: np.ndarray | None,
) -> DistanceMatrix:
    if g.n != d.n:
        raise PartitionError("partition does not match the matrix")
    s = _check_shrink(shrink, g.k)
    grow = _growth_table(growth, d.n)
    inter = inter_cluster_mask(g)
    if np.any(grow[inter] < 1):
        raise ValueError("inter-cluster growth factors must be >= 1")
    out = d.entries.copy()
    out[inter] = d.entries[inter] * grow[inter]
    for j, c in enumerate(g.clusters):
        idx = np.array(c)
        block = d.entries[np.ix_(idx, idx)]
        if anchors is None:
            # plain Kleinberg consistency: uniform multiplicative shrink
            new = block * s[j]
        else:
            a = anchors[j]
            new = a + (block - a) * s[j]
        np.fill_diagonal(new, 0.0)
        out[np.ix_(idx, idx)] = new
    # mirror the upper triangle so rounding cannot break symmetry
    iu = np.triu_indices(d.n, 1)
    out.T[iu] = out[iu]
    return DistanceMatrix(out, d.labels)


def consistency(
    d: DistanceMatrix,
    g: Partition,
    shrink: float | Sequence[float] = 1.0,
    growth: float | np.ndarray = 1.0,
) -> DistanceMatrix:
    """Kleinberg consistency: intra distances of cluster j times ``shrink[j]``,
    inter distances times ``growth`` (>= 1)."""
    return _reshape(d, g, shrink, growth, None)


def _intra_minima(d: DistanceMatrix, g: Partition) -> np.ndarray:
    mins = []
    for c in g.clusters:
        block = d.entries[np.ix_(c, c)]
        mins.append(block[~np.eye(len(c), dtype=bool)].min() if len(c) > 1 else 0.0)
    return np.array(mins)


def convergent_consistency(
    d: DistanceMatrix,
    g: Partition,
    shrink: float | Sequence[float] = 1.0,
    growth: float | np.ndarray = 1.0,
) -> DistanceMatrix:
    """Discrete convergent consistency.

    Intra distance t of cluster j becomes ``m_j + (t - m_j) * shrink[j]`` with
    m_j the cluster's smallest intra distance, so the fractional reduction
    ``(1 - shrink)(t - m_j) / t`` grows with t.  Inter distances are
    multiplied by their growth factor.
    """
    return _reshape(d, g, shrink, growth, _intra_minima(d, g))


def convergent_consistency_keep_min(
    d: DistanceMatrix,
    g: Partition,
    shrink: float | Sequence[float] = 1.0,
    growth: float | np.ndarray = 1.0,
) -> DistanceMatrix:
    """Convergent consistency anchored at the global minimum distance.

    No intra distance falls below sigma(d), so sigma is preserved whenever it
    is attained inside a cluster (always the case for separable inputs).
    Raises ValueError when every pair at sigma is inter-cluster and grows.
    """
    anchor = min_distance(d)
    out = _reshape(d, g, shrink, growth, np.full(g.k, anchor))
    if min_distance(out) != anchor:
        raise ValueError(
            "sigma is attained only between clusters and grows; keep-min cannot hold it fixed"
        )
    return out


@dataclass(frozen=True, eq=False)
class TransformSpec:
    kind: TransformKind
    alpha: float | None = None
    shrink: tuple[float, ...] | None = None
    growth: float | np.ndarray | None = None
    delta: float | None = None
    reference_partition: Partition | None = None

    def __post_init__(self) -> None:
        kind = TransformKind(self.kind)
        object.__setattr__(self, "kind", kind)
        need = {
            TransformKind.SCALE: {"alpha"},
            TransformKind.SQUARED_SHIFT: {"delta"},
        }.get(kind, {"shrink", "growth", "reference_partition"})
        for name in ("alpha", "shrink", "growth", "delta", "reference_partition"):
            present = getattr(self, name) is not None
            if present != (name in need):
                state = "requires" if name in need else "does not take"
                raise ValueError(f"{kind.value} transform {state} '{name}'")
        if self.shrink is not None:
            object.__setattr__(self, "shrink", tuple(float(x) for x in self.shrink))

    def apply(self, d: DistanceMatrix) -> DistanceMatrix:
        if self.kind is TransformKind.SCALE:
            return scale(d, self.alpha)
        if self.kind is TransformKind.SQUARED_SHIFT:
            return shift_squared(d, self.delta)
        fn = {
            TransformKind.CONSISTENCY: consistency,
            TransformKind.CONVERGENT: convergent_consistency,
            TransformKind.CONVERGENT_KEEP_MIN: convergent_consistency_keep_min,
        }[self.kind]
        return fn(d, self.reference_partition, self.shrink, self.growth)

    def to_dict(self) -> dict:
        out: dict = {"kind": self.kind.value}
        if self.alpha is not None:
            out["alpha"] = self.alpha
        if self.delta is not None:
            out["delta"] = self.delta
        if self.shrink is not None:
            out["shrink"] = list(self.shrink)
        if self.growth is not None:
            g = np.asarray(self.growth, dtype=float)
            out["growth"] = float(g) if g.ndim == 0 else g.tolist()
        if self.reference_partition is not None:
            out["reference_partition"] = self.reference_partition.to_dict()["clusters"]
        return out

    @classmethod
    def from_dict(cls, data: dict) -> TransformSpec:
        growth = data.get("growth")
        if isinstance(growth, list):
            growth = np.asarray(growth, dtype=float)
        ref = data.get("reference_partition")
        return cls(
            kind=TransformKind(data["kind"]),
            alpha=data.get("alpha"),
            shrink=data.get("shrink"),
            growth=growth,
            delta=data.get("delta"),
            reference_partition=None if ref is None else Partition(tuple(tuple(c) for c in ref)),
        )

    def to_json(self) -> str:
        return _jsonfmt.dumps(self.to_dict())

    @classmethod
    def from_json(cls, text: str) -> TransformSpec:
        return cls.from_dict(json.loads(text))


# ---------------------------------------------------------------------------
# validation


@dataclass(frozen=True)
class CheckResult:
    name: str
    passed: bool
    witness: tuple | None = None

    def to_dict(self) -> dict:
        return {"name": self.name, "passed": self.passed, "witness": self.witness}


@dataclass(frozen=True)
class TransformReport:
    kind: TransformKind
    checks: tuple[CheckResult, ...] = field(default_factory=tuple)

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)

    def __getitem__(self, name: str) -> CheckResult:
        for c in self.checks:
            if c.name == name:
                return c
        raise KeyError(name)

    def to_dict(self) -> dict:
        return {
            "kind": self.kind.value,
            "passed": self.passed,
            "checks": [c.to_dict() for c in self.checks],
        }


def _first_pair(mask: np.ndarray) -> tuple[int, int] | None:
    hits = np.argwhere(np.triu(mask, 1))
    return None if len(hits) == 0 else (int(hits[0][0]), int(hits[0][1]))


def _percentages_monotone(
    before: np.ndarray, after: np.ndarray, cluster: Sequence[int]
) -> tuple | None:
    """Witness ``(pair_short, pair_long)`` where the shorter pair lost a larger
    fraction than the longer one, else None.  Equal distances are unconstrained."""
    idx = list(cluster)
    iu = np.triu_indices(len(idx), 1)
    t = before[np.ix_(idx, idx)][iu]
    p = 1.0 - after[np.ix_(idx, idx)][iu] / t
    pairs = [(idx[a], idx[b]) for a, b in zip(*iu)]
    order = np.argsort(t, kind="stable")
    best_p, best_at = -math.inf, None
    pos = 0
    while pos < len(order):
        end = pos
        while end < len(order) and t[order[end]] == t[order[pos]]:
            end += 1
        group = order[pos:end]
        for g_i in group:
            if best_at is not None and p[g_i] < best_p - _RTOL:
                return pairs[best_at], pairs[g_i]
        top = group[np.argmax(p[group])]
        if p[top] > best_p:
            best_p, best_at = p[top], top
        pos = end
    return None


def validate_transform(
    before: DistanceMatrix,
    after: DistanceMatrix,
    g: Partition,
    kind: TransformKind | str,
) -> TransformReport:
    """Check ``after`` against the promises of ``kind`` relative to ``before``.

    Consistency kinds: inter entries did not shrink, intra entries did not
    grow.  Convergent kinds add the monotone-percentage check per cluster and
    keep-min adds sigma preservation.  Scale and squared shift are checked
    for a uniform ratio / uniform squared offset.
    """
    kind = TransformKind(kind)
    if before.n != after.n:
        raise ValueError("matrices differ in size")
    if g.n != before.n:
        raise PartitionError("partition does not match the matrices")
    b, a = before.entries, after.entries
    off = ~np.eye(before.n, dtype=bool)
    checks: list[CheckResult] = []
    if kind in _CONSISTENCY_KINDS:
        inter = inter_cluster_mask(g)
        bad = inter & (a < b * (1 - _RTOL))
        checks.append(CheckResult("inter_not_decreased", not bad.any(), _first_pair(bad)))
        bad = off & ~inter & (a > b * (1 + _RTOL))
        checks.append(CheckResult("intra_not_increased", not bad.any(), _first_pair(bad)))
    if kind in (TransformKind.CONVERGENT, TransformKind.CONVERGENT_KEEP_MIN):
        witness = None
        for c in g.clusters:
            witness = _percentages_monotone(b, a, c)
            if witness is not None:
                break
        checks.append(CheckResult("reduction_monotone", witness is None, witness))
    if kind is TransformKind.CONVERGENT_KEEP_MIN:
        s0, s1 = min_distance(before), min_distance(after)
        ok = math.isclose(s0, s1, rel_tol=_RTOL, abs_tol=0.0)
        checks.append(CheckResult("sigma_unchanged", ok, None if ok else (s0, s1)))
    if kind is TransformKind.SCALE:
        r = a[off] / b[off]
        ok = bool(np.allclose(r, r[0], rtol=1e-12, atol=0.0))
        checks.append(CheckResult("uniform_ratio", ok, None if ok else (float(r.min()), float(r.max()))))
    if kind is TransformKind.SQUARED_SHIFT:
        diff = a[off] ** 2 - b[off] ** 2
        scale_ = max(1.0, float(np.abs(a[off] ** 2).max()))
        ok = bool(np.ptp(diff) <= 1e-12 * scale_) and bool(diff.min() >= -1e-12 * scale_)
        checks.append(
            CheckResult("uniform_squared_shift", ok, None if ok else (float(diff.min()), float(diff.max())))
        )
    return TransformReport(kind, tuple(checks))
