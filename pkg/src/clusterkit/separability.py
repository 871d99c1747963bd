"""Variational / residual separability tests and the brute-force partition oracle."""
from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Iterator

import numpy as np

from .core import (
    Criterion,
    DistanceMatrix,
    Partition,
    PartitionError,
    SeparabilityCertificate,
    beta,
    min_distance,
    min_inter_cluster_distance,
    quality,
)

ORACLE_CAP = 14
TIE_RTOL = 1e-12


class OracleCapError(ValueError):
    """Instance too large for exhaustive enumeration."""


def _require_split(g: Partition) -> None:
    if g.k < 2:
        raise PartitionError("separability needs at least two clusters")


def is_variationally_separable(d: DistanceMatrix, g: Partition) -> SeparabilityCertificate:
    """Every inter-cluster distance must exceed ``sqrt(2 Q)``."""
    _require_split(g)
    q = quality(d, g)
    return SeparabilityCertificate(
        criterion=Criterion.VARIATIONAL,
        threshold=math.sqrt(2.0 * q),
        min_inter=min_inter_cluster_distance(d, g),
        q_value=q,
        sigma=min_distance(d),
        beta_value=beta(d, g),
        proper=g.is_proper,
    )


def is_residually_separable(d: DistanceMatrix, g: Partition) -> SeparabilityCertificate:
    """Every inter-cluster distance must exceed ``sqrt(2 beta)``."""
    _require_split(g)
    q = quality(d, g)
    b = beta(d, g)
    return SeparabilityCertificate(
        criterion=Criterion.RESIDUAL,
        threshold=math.sqrt(2.0 * max(b, 0.0)),
        min_inter=min_inter_cluster_distance(d, g),
        q_value=q,
        sigma=min_distance(d),
        beta_value=b,
        proper=g.is_proper,
    )


def certify(d: DistanceMatrix, g: Partition, criterion: Criterion | str) -> SeparabilityCertificate:
    if Criterion(criterion) is Criterion.VARIATIONAL:
        return is_variationally_separable(d, g)
    return is_residually_separable(d, g)


# ---------------------------------------------------------------------------
# enumeration


@lru_cache(maxsize=16)
def partition_labels(n: int, k: int, min_size: int = 2) -> np.ndarray:
    """All restricted-growth label strings for partitions of n points into
    exactly k blocks of size >= min_size, as a read-only (count, n) int8 table.

    Rows are in lexicographic order of the label strings, which is also the
    canonical order of :func:`enumerate_partitions`.
    """
    if n > ORACLE_CAP:
        raise OracleCapError(f"n={n} exceeds the oracle cap of {ORACLE_CAP}")
    if n < 1 or k < 1 or min_size < 1:
        raise ValueError("n, k and min_size must be positive")
    if k * min_size > n:
        out = np.zeros((0, n), dtype=np.int8)
        out.setflags(write=False)
        return out
    labels = np.zeros((1, 1), dtype=np.int8)
    counts = np.zeros((1, k), dtype=np.int16)
    counts[0, 0] = 1
    for pos in range(1, n):
        remaining = n - pos - 1
        n_open = counts.astype(bool).sum(axis=1)
        rows, new_labels = [], []
        for lab in range(k):
            # a label may be used if it is already open, or is the next new one
            ok = n_open >= lab
            rows.append(np.nonzero(ok)[0])
            new_labels.append(np.full(ok.sum(), lab, dtype=np.int8))
        rows_a = np.concatenate(rows)
        labs_a = np.concatenate(new_labels)
        order = np.lexsort((labs_a, rows_a))
        rows_a, labs_a = rows_a[order], labs_a[order]
        new_counts = counts[rows_a].copy()
        new_counts[np.arange(len(rows_a)), labs_a] += 1
        # prune: blocks still short of min_size plus unopened blocks must fit
        short = np.where(new_counts > 0, np.maximum(min_size - new_counts, 0), 0).sum(axis=1)
        unopened = (new_counts == 0).sum(axis=1)
        feasible = short + unopened * min_size <= remaining
        labels = np.concatenate([labels[rows_a], labs_a[:, None]], axis=1)[feasible]
        counts = new_counts[feasible]
    labels = np.ascontiguousarray(labels)
    labels.setflags(write=False)
    return labels


def enumerate_partitions(n: int, k: int, min_size: int = 2) -> Iterator[Partition]:
    """Yield every partition of ``{0..n-1}`` into k blocks of size >= min_size."""
    for row in partition_labels(n, k, min_size):
        yield Partition.from_labels(row, min_size=min_size)


def count_partitions(n: int, k: int, min_size: int = 1) -> int:
    """Independent recursive count: the block holding the last point has size s."""

    @lru_cache(maxsize=None)
    def t(m: int, j: int) -> int:
        if m == 0:
            return 1 if j == 0 else 0
        if j == 0:
            return 0
        return sum(math.comb(m - 1, s - 1) * t(m - s, j - 1) for s in range(min_size, m + 1))

    return t(n, k)


# ---------------------------------------------------------------------------
# oracle


@dataclass(frozen=True)
class OracleResult:
    best_partition: Partition
    best_value: float
    unique: bool
    partitions_examined: int


def batch_quality(sq: np.ndarray, labels: np.ndarray, k: int, chunk: int = 65536) -> np.ndarray:
    """Q for many label strings at once; ``sq`` is the squared distance table."""
    out = np.empty(len(labels))
    for start in range(0, len(labels), chunk):
        lab = labels[start : start + chunk]
        acc = np.zeros(len(lab))
        for j in range(k):
            m = (lab == j).astype(float)
            size = m.sum(axis=1)
            within = np.einsum("ai,ai->a", m @ sq, m)
            acc += np.divide(within, 2 * size, out=np.zeros_like(within), where=size > 0)
        out[start : start + chunk] = acc
    return out


def brute_force_optimal(d: DistanceMatrix, k: int, min_size: int = 2) -> OracleResult:
    """Exhaustive minimization of Q over all k-block partitions.

    Ties within a relative 1e-12 make the result non-unique; the
    canonically first tied partition is returned.
    """
    if d.n > ORACLE_CAP:
        raise OracleCapError(f"n={d.n} exceeds the oracle cap of {ORACLE_CAP}")
    labels = partition_labels(d.n, k, min_size)
    if len(labels) == 0:
        raise ValueError(f"no partition of {d.n} points into {k} blocks of size >= {min_size}")
    values = batch_quality(d.squared, labels, k)
    best = float(values.min())
    tol = TIE_RTOL * max(abs(best), np.finfo(float).tiny)
    tied = np.nonzero(values <= best + tol)[0]
    return OracleResult(
        best_partition=Partition.from_labels(labels[tied[0]], min_size=min_size),
        best_value=best,
        unique=len(tied) == 1,
        partitions_examined=len(labels),
    )


def oracle_separable(
    d: DistanceMatrix, k: int, criterion: Criterion | str
) -> tuple[bool, Partition | None]:
    """Exact test whether some k-partition (blocks >= 2) of d is certified.

    A certified partition is always the Q-minimizer, so only the oracle's
    optimum needs checking.
    """
    if k < 2 or 2 * k > d.n:
        return False, None
    res = brute_force_optimal(d, k, 2)
    cert = certify(d, res.best_partition, criterion)
    return cert.valid, res.best_partition
