"""Datasets with a planted, certified cluster structure."""
from __future__ import annotations

import math
from typing import Sequence

import numpy as np

from .core import (
    Criterion,
    DistanceMatrix,
    EmbeddedDataset,
    Partition,
    SeparabilityCertificate,
    pairwise_distances,
)
from .separability import certify


class GenerationError(RuntimeError):
    """Requested structure could not be built."""


def _check_sizes(sizes: Sequence[int]) -> list[int]:
    sizes = [int(s) for s in sizes]
    if not sizes:
        raise ValueError("sizes must be non-empty")
    if any(s < 2 for s in sizes):
        raise ValueError("every cluster needs at least two points")
    return sizes


def planted_partition(sizes: Sequence[int]) -> Partition:
    """Consecutive index blocks of the given sizes."""
    out, start = [], 0
    for s in sizes:
        out.append(tuple(range(start, start + s)))
        start += s
    return Partition(tuple(out))


def _ball(rng: np.random.Generator, count: int, dim: int, radius: float) -> np.ndarray:
    x = rng.normal(size=(count, dim))
    x /= np.linalg.norm(x, axis=1, keepdims=True)
    r = radius * rng.random(count) ** (1.0 / dim)
    return x * r[:, None]


def _directions(k: int, dim: int) -> np.ndarray:
    # axis j mod dim, stretched by the wrap count: pairwise gaps are >= 1
    u = np.zeros((k, dim))
    for j in range(k):
        u[j, j % dim] = 1.0 + j // dim
    return u


def generate_euclidean(
    sizes: Sequence[int],
    dim: int,
    spread: float,
    gap_margin: float,
    rng: int | np.random.Generator | None = None,
    criterion: Criterion | str = Criterion.VARIATIONAL,
) -> tuple[EmbeddedDataset, Partition, SeparabilityCertificate]:
    """Uniform-ball clusters pushed apart until certified with ``gap_margin``.

    The centre scale doubles until ``min_inter > gap_margin * threshold``,
    then bisects to within 1% of the smallest such scale.
    """
    sizes = _check_sizes(sizes)
    if dim < 1:
        raise ValueError("dim must be >= 1")
    if not spread > 0:
        raise ValueError("spread must be positive (coincident points are not allowed)")
    if not gap_margin > 1:
        raise ValueError("gap_margin must exceed 1")
    criterion = Criterion(criterion)
    gen = np.random.default_rng(rng)
    g = planted_partition(sizes)
    offsets = np.concatenate([_ball(gen, s, dim, spread) for s in sizes])
    centres = np.repeat(_directions(len(sizes), dim), sizes, axis=0)

    def build(scale: float) -> tuple[np.ndarray, SeparabilityCertificate | None]:
        coords = offsets + scale * centres
        try:
            d = pairwise_distances(coords)
        except ValueError:
            return coords, None
        return coords, certify(d, g, criterion)

    def ok(cert: SeparabilityCertificate | None) -> bool:
        return cert is not None and cert.proper and cert.min_inter > gap_margin * cert.threshold

    lo, hi = 0.0, spread
    coords, cert = build(hi)
    for _ in range(200):
        if ok(cert):
            break
        lo, hi = hi, 2.0 * hi
        coords, cert = build(hi)
    else:
        raise GenerationError("centre pushing did not certify the instance")
    while hi - lo > 0.01 * hi:
        mid = 0.5 * (lo + hi)
        c_mid, cert_mid = build(mid)
        if ok(cert_mid):
            hi, coords, cert = mid, c_mid, cert_mid
        else:
            lo = mid
    return EmbeddedDataset(coords), g, cert


def generate_two_valued(
    sizes: Sequence[int], intra: float, inter: float
) -> tuple[DistanceMatrix, Partition]:
    """``intra`` inside clusters, ``inter`` across.

    Closed forms: Q = (n-k) intra^2 / 2, sigma = intra, beta = intra^2.
    """
    sizes = _check_sizes(sizes)
    if not (inter > intra > 0):
        raise ValueError("need inter > intra > 0")
    g = planted_partition(sizes)
    lab = g.labels()
    entries = np.where(lab[:, None] == lab[None, :], float(intra), float(inter))
    np.fill_diagonal(entries, 0.0)
    return DistanceMatrix(entries), g


def richness_witness(g: Partition, intra: float = 1.0) -> DistanceMatrix:
    """Two-valued distance for which ``g`` is the certified range clustering."""
    if not g.is_proper or g.k < 2:
        raise ValueError("witness needs k >= 2 clusters of size >= 2")
    inter = intra * (math.sqrt(g.n - g.k) + 1.0)
    lab = g.labels()
    entries = np.where(lab[:, None] == lab[None, :], float(intra), inter)
    np.fill_diagonal(entries, 0.0)
    return DistanceMatrix(entries)


def generate_pseudo(
    sizes: Sequence[int],
    rng: int | np.random.Generator | None = None,
    criterion: Criterion | str = Criterion.RESIDUAL,
    gap_margin: float = 1.1,
    intra_range: tuple[float, float] = (1.0, 2.0),
) -> tuple[DistanceMatrix, Partition]:
    """Random non-Euclidean pseudo-distance with a certified planted partition.

    Intra distances are uniform on ``intra_range``; inter distances are
    uniform on ``[m, 2m]`` with ``m = gap_margin * threshold``.  Inter values
    exceed every intra value, so sigma and Q are fixed before they are drawn.
    """
    sizes = _check_sizes(sizes)
    gen = np.random.default_rng(rng)
    g = planted_partition(sizes)
    n = g.n
    lab = g.labels()
    same = lab[:, None] == lab[None, :]
    lo, hi = intra_range
    u = gen.uniform(lo, hi, size=(n, n))
    u = np.triu(u, 1)
    u = u + u.T
    base = DistanceMatrix(np.where(same, u, hi))
    if g.k < 2:
        return base, g
    thr = certify(base, g, criterion).threshold
    floor = max(gap_margin * thr, hi)
    v = gen.uniform(floor, 2 * floor, size=(n, n))
    v = np.triu(v, 1)
    v = v + v.T
    d = DistanceMatrix(np.where(same, u, v))
    if not certify(d, g, criterion).valid:
        raise GenerationError("planted partition failed its certificate")
    return d, g


def generate_residual_only(
    sizes: Sequence[int],
    rng: int | np.random.Generator | None = None,
    max_tries: int = 50,
) -> tuple[DistanceMatrix, Partition]:
    """Instance that is residually but not variationally separable.

    Starts from near-uniform intra distances (so sigma stays close to every
    intra value and beta falls below Q) and draws inter distances between
    the two thresholds.  The noise level halves on each failed try.
    """
    sizes = _check_sizes(sizes)
    if sum(sizes) > 64:
        raise ValueError("total size must be <= 64")
    if len(sizes) < 2:
        raise ValueError("need at least two clusters")
    gen = np.random.default_rng(rng)
    g = planted_partition(sizes)
    n = g.n
    lab = g.labels()
    same = lab[:, None] == lab[None, :]
    noise = 0.2
    for _ in range(max_tries):
        u = np.triu(1.0 + noise * gen.random((n, n)), 1)
        u = u + u.T
        base = DistanceMatrix(np.where(same, u, 2.0 + noise))
        var = certify(base, g, Criterion.VARIATIONAL)
        res = certify(base, g, Criterion.RESIDUAL)
        low = res.threshold * (1 + 1e-6)
        high = var.threshold
        if low < high:
            v = np.triu(gen.uniform(low, high, size=(n, n)), 1)
            v = v + v.T
            d = DistanceMatrix(np.where(same, u, v))
            if certify(d, g, Criterion.RESIDUAL).valid and not certify(
                d, g, Criterion.VARIATIONAL
            ).valid:
                return d, g
        noise *= 0.5
    raise GenerationError(f"no residual-only instance for sizes {sizes}")
