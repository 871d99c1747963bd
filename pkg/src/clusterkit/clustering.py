"""Distance-only k-means: seeding, Lloyd iteration and range-k_x detection."""
from __future__ import annotations

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from enum import Enum
from typing import Callable, Sequence

import numpy as np
from scipy import stats

from .core import (
    Criterion,
    DistanceMatrix,
    Partition,
    SeparabilityCertificate,
    min_distance,
)
from .separability import ORACLE_CAP, certify, oracle_separable

DEFAULT_RESTARTS = 20
LLOYD_MAX_ITER = 100
# Relative slack when comparing successive Lloyd objectives.
_Q_RTOL = 1e-12


class EmptyClusterError(RuntimeError):
    """A Lloyd iteration left a cluster without members."""


class SeedingMode(str, Enum):
    DSQUARED = "dsquared"
    RESIDUAL_DSQUARED = "residual_dsquared"


def mode_for(criterion: Criterion | str) -> SeedingMode:
    if Criterion(criterion) is Criterion.VARIATIONAL:
        return SeedingMode.DSQUARED
    return SeedingMode.RESIDUAL_DSQUARED


# ---------------------------------------------------------------------------
# random streams


def root_seed(rng: int | np.random.Generator | None) -> int:
    if rng is None:
        return 0
    if isinstance(rng, np.random.Generator):
        return int(rng.integers(0, 2**63))
    return int(rng)


def substream(seed: int, *keys: int) -> np.random.Generator:
    """Independent generator for task ``keys`` under the run seed."""
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=tuple(int(k) for k in keys)))


def _as_generator(rng: int | np.random.Generator | None) -> np.random.Generator:
    if isinstance(rng, np.random.Generator):
        return rng
    return np.random.default_rng(rng)


def thread_count() -> int:
    try:
        return max(1, int(os.environ.get("CLUSTERKIT_THREADS", "1")))
    except ValueError:
        return 1


def _pmap(fn: Callable, items: Sequence) -> list:
    """Map in task order; threads only when CLUSTERKIT_THREADS > 1."""
    workers = thread_count()
    if workers == 1 or len(items) < 2:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, items))


# ---------------------------------------------------------------------------
# kernel distances and Lloyd


def kernel_point_to_cluster(d: DistanceMatrix, i: int, cluster: Sequence[int]) -> float:
    """Squared distance from point i to the implicit centroid of ``cluster``.

    Can be negative when d is not Euclidean; returned as is.
    """
    idx = list(cluster)
    if not idx:
        raise ValueError("cluster is empty")
    sq = d.squared
    m = len(idx)
    to_members = float(sq[i, idx].sum()) / m
    spread = float(sq[np.ix_(idx, idx)].sum()) / (2 * m * m)
    return to_members - spread


def _kernel_table(sq: np.ndarray, labels: np.ndarray, k: int) -> np.ndarray:
    member = np.zeros((len(labels), k))
    member[np.arange(len(labels)), labels] = 1.0
    sizes = member.sum(axis=0)
    if np.any(sizes == 0):
        raise EmptyClusterError(f"cluster {int(np.argmin(sizes))} is empty")
    to_members = (sq @ member) / sizes
    spread = np.einsum("ij,ik,kj->j", member, sq, member) / (2 * sizes**2)
    return to_members - spread


def _labels_quality(sq: np.ndarray, labels: np.ndarray, k: int) -> float:
    total = 0.0
    for j in range(k):
        idx = np.nonzero(labels == j)[0]
        total += float(sq[np.ix_(idx, idx)].sum()) / (2 * len(idx))
    return total


def nearest_seed_labels(d: DistanceMatrix, seeds: Sequence[int]) -> np.ndarray:
    """Assign every point to its closest seed; ties go to the earlier seed."""
    return np.argmin(d.entries[:, list(seeds)], axis=1)


@dataclass(frozen=True)
class LloydRun:
    partition: Partition
    q_trace: tuple[float, ...]
    iterations: int
    converged: bool

    @property
    def proper(self) -> bool:
        return self.partition.is_proper


def lloyd_run(
    d: DistanceMatrix,
    initial: Partition | Sequence[int],
    max_iter: int = LLOYD_MAX_ITER,
) -> LloydRun:
    """Batch kernel Lloyd iteration from seeds or from a partition.

    Stops at a fixed point, at ``max_iter``, or when a batch step would raise
    Q (possible for non-Euclidean d), in which case the last state is kept so
    the recorded objective never increases.
    """
    if isinstance(initial, Partition):
        if initial.n != d.n:
            raise ValueError("initial partition does not match the matrix")
        labels = initial.labels()
        k = initial.k
    else:
        seeds = list(initial)
        labels = nearest_seed_labels(d, seeds)
        k = len(seeds)
    if k < 2:
        raise ValueError("Lloyd iteration needs k >= 2")
    sq = d.squared
    _kernel_table(sq, labels, k)  # empty-cluster check on the start state
    q = _labels_quality(sq, labels, k)
    trace = [q]
    converged = False
    for _ in range(max_iter):
        table = _kernel_table(sq, labels, k)
        best = table.min(axis=1)
        keep = table[np.arange(d.n), labels] <= best
        new = np.where(keep, labels, np.argmin(table, axis=1))
        if np.array_equal(new, labels):
            converged = True
            break
        if np.bincount(new, minlength=k).min() == 0:
            raise EmptyClusterError("a cluster emptied during reassignment")
        q_new = _labels_quality(sq, new, k)
        if q_new > q * (1.0 + _Q_RTOL):
            converged = True
            break
        labels, q = new, q_new
        trace.append(q)
    return LloydRun(
        partition=Partition.from_labels(labels, min_size=1),
        q_trace=tuple(trace),
        iterations=len(trace) - 1,
        converged=converged,
    )


def kernel_lloyd(
    d: DistanceMatrix, initial: Partition | Sequence[int], max_iter: int = LLOYD_MAX_ITER
) -> Partition:
    return lloyd_run(d, initial, max_iter).partition


# ---------------------------------------------------------------------------
# seeding


@dataclass(frozen=True)
class SeedingRun:
    seeds: tuple[int, ...]
    mode: SeedingMode
    rng_seed: int | None = None
    hit_all: bool | None = None
    fallback_draws: int = 0


def hits_all(seeds: Sequence[int], reference: Partition) -> bool:
    lab = reference.labels()
    return len({int(lab[s]) for s in seeds}) == reference.k


def _seed(
    d: DistanceMatrix,
    k: int,
    rng: int | np.random.Generator | None,
    mode: SeedingMode,
    reference: Partition | None,
) -> SeedingRun:
    if not 1 <= k <= d.n:
        raise ValueError(f"k={k} must lie in [1, {d.n}]")
    rng_seed = None if isinstance(rng, np.random.Generator) else rng
    gen = _as_generator(rng)
    sq = d.squared
    floor = min_distance(d) ** 2 if mode is SeedingMode.RESIDUAL_DSQUARED and d.n > 1 else 0.0
    seeds = [int(gen.integers(d.n))]
    nearest = sq[seeds[0]].copy()
    fallback = 0
    while len(seeds) < k:
        w = np.maximum(nearest - floor, 0.0)
        w[seeds] = 0.0
        total = w.sum()
        if total > 0.0:
            nxt = int(gen.choice(d.n, p=w / total))
        else:
            pool = np.setdiff1d(np.arange(d.n), seeds)
            nxt = int(pool[gen.integers(len(pool))])
            fallback += 1
        seeds.append(nxt)
        nearest = np.minimum(nearest, sq[nxt])
    return SeedingRun(
        seeds=tuple(seeds),
        mode=mode,
        rng_seed=rng_seed,
        hit_all=None if reference is None else hits_all(seeds, reference),
        fallback_draws=fallback,
    )


def kmeanspp_seed(
    d: DistanceMatrix,
    k: int,
    rng: int | np.random.Generator | None = None,
    reference: Partition | None = None,
) -> SeedingRun:
    """k-means++: uniform first seed, then draws proportional to D^2."""
    return _seed(d, k, rng, SeedingMode.DSQUARED, reference)


def res_kmeanspp_seed(
    d: DistanceMatrix,
    k: int,
    rng: int | np.random.Generator | None = None,
    reference: Partition | None = None,
) -> SeedingRun:
    """Residual k-means++: weights ``max(0, D^2 - sigma^2)``.

    When every weight is zero the next seed is uniform among unseeded points
    and ``fallback_draws`` counts it.
    """
    return _seed(d, k, rng, SeedingMode.RESIDUAL_DSQUARED, reference)


def seed(d, k, rng, mode: SeedingMode | str, reference=None) -> SeedingRun:
    return _seed(d, k, rng, SeedingMode(mode), reference)


# ---------------------------------------------------------------------------
# hitting probability


def hitting_probability_bound(m: int, k: int) -> float:
    """Lower bound on the chance that seeding hits all k clusters of size >= m."""
    if m < 1 or k < 1:
        raise ValueError("m and k must be positive")
    p = 1.0
    for i in range(1, k):
        p *= 1.0 - 1.0 / (m * (k - i) + 1)
    return p


@dataclass(frozen=True)
class HittingEstimate:
    estimate: float
    ci_low: float
    ci_high: float
    hits: int
    trials: int
    confidence: float = 0.99

    @property
    def stderr(self) -> float:
        p = self.estimate
        return math.sqrt(p * (1 - p) / self.trials)

    def to_dict(self) -> dict:
        return {
            "estimate": self.estimate,
            "ci_low": self.ci_low,
            "ci_high": self.ci_high,
            "hits": self.hits,
            "trials": self.trials,
            "confidence": self.confidence,
            "stderr": self.stderr,
        }


def estimate_hitting_probability(
    d: DistanceMatrix,
    g: Partition,
    mode: SeedingMode | str = SeedingMode.DSQUARED,
    trials: int = 10_000,
    rng: int | np.random.Generator | None = 0,
) -> HittingEstimate:
    """Monte Carlo frequency of seedings that touch every cluster of g,
    with a Clopper-Pearson 99% interval."""
    if trials < 1:
        raise ValueError("trials must be >= 1")
    mode = SeedingMode(mode)
    base = root_seed(rng)

    def one(t: int) -> bool:
        return bool(_seed(d, g.k, substream(base, t), mode, g).hit_all)

    hits = sum(_pmap(one, range(trials)))
    ci = stats.binomtest(hits, trials).proportion_ci(confidence_level=0.99, method="exact")
    return HittingEstimate(hits / trials, float(ci.low), float(ci.high), hits, trials)


# ---------------------------------------------------------------------------
# range detection


@dataclass(frozen=True)
class SubclusterCheck:
    cluster: tuple[int, ...]
    k_sub: int
    method: str  # "oracle" | "heuristic"
    separable: bool

    def to_dict(self) -> dict:
        return {
            "cluster": list(self.cluster),
            "k_sub": self.k_sub,
            "method": self.method,
            "separable": self.separable,
        }


@dataclass(frozen=True)
class LevelEvidence:
    k: int
    partition: Partition | None
    certificate: SeparabilityCertificate | None
    restart_q: tuple[float | None, ...]

    @property
    def certified(self) -> bool:
        return self.certificate is not None and self.certificate.valid

    def to_dict(self) -> dict:
        return {
            "k": self.k,
            "partition": None if self.partition is None else self.partition.to_dict()["clusters"],
            "certificate": None if self.certificate is None else self.certificate.to_dict(),
            "restart_q": list(self.restart_q),
        }


@dataclass(frozen=True)
class DetectionResult:
    partition: Partition | None
    level: int
    criterion: Criterion
    k_max: int
    certificates: tuple[LevelEvidence, ...] = ()
    subcluster_checks: tuple[SubclusterCheck, ...] = ()
    rng_seed: int = 0
    restarts: int = DEFAULT_RESTARTS

    @property
    def found(self) -> bool:
        return self.partition is not None

    def to_dict(self) -> dict:
        return {
            "found": self.found,
            "partition": None if self.partition is None else self.partition.to_dict()["clusters"],
            "level": self.level,
            "criterion": self.criterion.value,
            "k_max": self.k_max,
            "rng_seed": self.rng_seed,
            "restarts": self.restarts,
            "levels": [ev.to_dict() for ev in self.certificates],
            "subcluster_checks": [c.to_dict() for c in self.subcluster_checks],
        }


def best_of_restarts(
    d: DistanceMatrix,
    k: int,
    mode: SeedingMode,
    restarts: int,
    seed: int,
    keys: tuple[int, ...] = (),
) -> tuple[Partition | None, tuple[float | None, ...]]:
    """Seeded Lloyd from ``restarts`` independent seedings; lowest Q wins.

    Runs that empty a cluster or end with a singleton are recorded as ``None``.
    Ties keep the earliest restart.
    """

    def attempt(r: int) -> tuple[Partition | None, float | None]:
        run = _seed(d, k, substream(seed, *keys, r), mode, None)
        try:
            res = lloyd_run(d, run.seeds)
        except EmptyClusterError:
            return None, None
        if not res.proper:
            return None, None
        return res.partition, res.q_trace[-1]

    outcomes = _pmap(attempt, range(restarts))
    best, best_q = None, math.inf
    for part, q in outcomes:
        if part is not None and q < best_q:
            best, best_q = part, q
    return best, tuple(q for _, q in outcomes)


def is_k_separable(
    d: DistanceMatrix,
    k: int,
    criterion: Criterion,
    restarts: int = DEFAULT_RESTARTS,
    seed: int = 0,
    keys: tuple[int, ...] = (),
) -> tuple[bool, str]:
    """Whether some k-partition of d (blocks >= 2) is certified.

    Exact for n <= ORACLE_CAP; otherwise best-of-restarts, which can miss a
    separable split but never reports a false one.
    """
    if k < 2 or 2 * k > d.n:
        return False, "oracle"
    if d.n <= ORACLE_CAP:
        ok, _ = oracle_separable(d, k, criterion)
        return ok, "oracle"
    part, _ = best_of_restarts(d, k, mode_for(criterion), restarts, seed, keys)
    if part is None:
        return False, "heuristic"
    return certify(d, part, criterion).valid, "heuristic"


def detect_range(
    d: DistanceMatrix,
    k_max: int,
    criterion: Criterion | str = Criterion.VARIATIONAL,
    restarts: int = DEFAULT_RESTARTS,
    rng: int | np.random.Generator | None = 0,
) -> DetectionResult:
    """Find the level-k range clustering of d for k in ``2..k_max``.

    Every k is tried with seeded Lloyd restarts; the best-Q partition of each
    k is certified.  The largest certified k whose clusters admit no
    certified sub-split into ``2..k_max-k+1`` parts is returned.
    """
    if k_max < 2:
        raise ValueError("k_max must be >= 2")
    criterion = Criterion(criterion)
    mode = mode_for(criterion)
    seed = root_seed(rng)
    evidence: list[LevelEvidence] = []
    for k in range(2, min(k_max, d.n // 2) + 1):
        part, qs = best_of_restarts(d, k, mode, restarts, seed, (k,))
        cert = None if part is None else certify(d, part, criterion)
        evidence.append(LevelEvidence(k, part, cert, qs))

    checks: list[SubclusterCheck] = []
    for ev in sorted((e for e in evidence if e.certified), key=lambda e: -e.k):
        clean = True
        for ci, cluster in enumerate(ev.partition.clusters):
            sub = d.submatrix(cluster)
            for k_sub in range(2, k_max - ev.k + 2):
                if 2 * k_sub > len(cluster):
                    break
                sep, method = is_k_separable(
                    sub, k_sub, criterion, restarts, seed, (1000 + ev.k, ci, k_sub)
                )
                checks.append(SubclusterCheck(cluster, k_sub, method, sep))
                if sep:
                    clean = False
                    break
            if not clean:
                break
        if clean:
            return DetectionResult(
                ev.partition, ev.k, criterion, k_max, tuple(evidence), tuple(checks), seed, restarts
            )
    return DetectionResult(None, 0, criterion, k_max, tuple(evidence), tuple(checks), seed, restarts)
