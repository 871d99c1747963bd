"""Distance matrices, partitions and the scalar functionals Q, sigma and beta.

Everything here works on a pseudo-distance: a symmetric table with a zero
diagonal and strictly positive off-diagonal entries.  The triangle inequality
is never assumed.
"""
from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from . import _jsonfmt

# Relative margin applied to the strict separability inequalities.
CERT_MARGIN = 1e-9


class DistanceError(ValueError):
    """Input violates the pseudo-distance axioms."""


class PartitionError(ValueError):
    """Malformed partition or partition/matrix mismatch."""


@dataclass(frozen=True, eq=False)
class DistanceMatrix:
    """Symmetric n x n pseudo-distance table.

    The array is copied and made read-only on construction.
    """

    entries: np.ndarray
    labels: tuple[str, ...] | None = None

    def __post_init__(self) -> None:
        arr = np.array(self.entries, dtype=float, copy=True)
        if arr.ndim != 2 or arr.shape[0] != arr.shape[1]:
            raise DistanceError(f"distance table must be square, got shape {arr.shape}")
        n = arr.shape[0]
        if n < 1:
            raise DistanceError("distance table is empty")
        if not np.all(np.isfinite(arr)):
            raise DistanceError("distance table has non-finite entries")
        if np.any(np.diag(arr) != 0.0):
            raise DistanceError("diagonal must be zero")
        if not np.array_equal(arr, arr.T):
            i, j = np.argwhere(arr != arr.T)[0]
            raise DistanceError(f"table is not symmetric at ({i}, {j})")
        off = ~np.eye(n, dtype=bool)
        if np.any(arr[off] <= 0.0):
            i, j = np.argwhere((arr <= 0.0) & off)[0]
            raise DistanceError(f"off-diagonal entry ({i}, {j}) is not positive")
        arr.setflags(write=False)
        object.__setattr__(self, "entries", arr)
        if self.labels is not None:
            labels = tuple(str(x) for x in self.labels)
            if len(labels) != n:
                raise DistanceError("labels length does not match n")
            object.__setattr__(self, "labels", labels)

    @property
    def n(self) -> int:
        return self.entries.shape[0]

    @property
    def squared(self) -> np.ndarray:
        return self.entries**2

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, DistanceMatrix):
            return NotImplemented
        return np.array_equal(self.entries, other.entries) and self.labels == other.labels

    def submatrix(self, idx: Sequence[int]) -> DistanceMatrix:
        idx = list(idx)
        return DistanceMatrix(self.entries[np.ix_(idx, idx)])

    # serialization -----------------------------------------------------

    def to_dict(self) -> dict:
        out: dict = {"n": self.n, "entries": self.entries.tolist()}
        if self.labels is not None:
            out["labels"] = list(self.labels)
        return out

    @classmethod
    def from_dict(cls, data: dict) -> DistanceMatrix:
        try:
            entries = data["entries"]
        except (KeyError, TypeError) as exc:
            raise DistanceError("matrix JSON needs an 'entries' field") from exc
        arr = np.asarray(entries, dtype=float)
        if "n" in data and arr.ndim == 2 and int(data["n"]) != arr.shape[0]:
            raise DistanceError("'n' does not match the entries table")
        return cls(arr, data.get("labels"))

    def to_json(self) -> str:
        return _jsonfmt.dumps(self.to_dict())

    @classmethod
    def from_json(cls, text: str) -> DistanceMatrix:
        return cls.from_dict(json.loads(text))

    def to_csv(self) -> str:
        return "".join(",".join(f"{v:.17g}" for v in row) + "\n" for row in self.entries)

    @classmethod
    def from_csv(cls, text: str) -> DistanceMatrix:
        rows = [r for r in csv.reader(io.StringIO(text)) if r]
        try:
            arr = np.array([[float(v) for v in r] for r in rows])
        except ValueError as exc:
            raise DistanceError(f"bad CSV field: {exc}") from exc
        return cls(arr)

    @classmethod
    def load(cls, path: str | Path) -> DistanceMatrix:
        path = Path(path)
        text = path.read_text()
        if path.suffix.lower() == ".csv":
            return cls.from_csv(text)
        return cls.from_json(text)


@dataclass(frozen=True)
class Partition:
    """Split of ``{0..n-1}`` into disjoint clusters, stored canonically.

    Each cluster is sorted ascending and clusters are ordered by their
    smallest element, so two partitions compare equal iff they are the same
    set partition.  ``min_size`` defaults to 2; enumeration and Lloyd
    iterations build partitions with ``min_size=1`` where singletons are legal.
    """

    clusters: tuple[tuple[int, ...], ...]
    min_size: int = field(default=2, compare=False, repr=False)

    def __post_init__(self) -> None:
        cl = [tuple(sorted(int(i) for i in c)) for c in self.clusters]
        if not cl:
            raise PartitionError("partition has no clusters")
        cl.sort(key=lambda c: c[0] if c else -1)
        flat = [i for c in cl for i in c]
        n = len(flat)
        if sorted(flat) != list(range(n)):
            raise PartitionError("clusters must be disjoint and cover 0..n-1")
        for c in cl:
            if len(c) < max(1, self.min_size):
                raise PartitionError(f"cluster {list(c)} has fewer than {self.min_size} points")
        object.__setattr__(self, "clusters", tuple(cl))

    @classmethod
    def from_labels(cls, labels: Iterable[int], min_size: int = 2) -> Partition:
        groups: dict[int, list[int]] = {}
        for i, lab in enumerate(labels):
            groups.setdefault(int(lab), []).append(i)
        return cls(tuple(tuple(g) for g in groups.values()), min_size=min_size)

    @property
    def k(self) -> int:
        return len(self.clusters)

    @property
    def n(self) -> int:
        return sum(len(c) for c in self.clusters)

    @property
    def sizes(self) -> tuple[int, ...]:
        return tuple(len(c) for c in self.clusters)

    @property
    def is_proper(self) -> bool:
        """All clusters have at least two points."""
        return all(len(c) >= 2 for c in self.clusters)

    def labels(self) -> np.ndarray:
        out = np.empty(self.n, dtype=int)
        for j, c in enumerate(self.clusters):
            out[list(c)] = j
        return out

    def to_dict(self) -> dict:
        return {"clusters": [list(c) for c in self.clusters]}

    @classmethod
    def from_dict(cls, data: dict, min_size: int = 2) -> Partition:
        try:
            clusters = data["clusters"]
        except (KeyError, TypeError) as exc:
            raise PartitionError("partition JSON needs a 'clusters' field") from exc
        return cls(tuple(tuple(c) for c in clusters), min_size=min_size)

    def to_json(self) -> str:
        return _jsonfmt.dumps(self.to_dict())

    @classmethod
    def from_json(cls, text: str) -> Partition:
        return cls.from_dict(json.loads(text))


class Criterion(str, Enum):
    VARIATIONAL = "variational"
    RESIDUAL = "residual"


@dataclass(frozen=True)
class SeparabilityCertificate:
    criterion: Criterion
    threshold: float
    min_inter: float
    q_value: float
    sigma: float
    beta_value: float | None = None
    proper: bool = True

    @property
    def valid(self) -> bool:
        return self.proper and self.min_inter > self.threshold * (1.0 + CERT_MARGIN)

    @property
    def ratio(self) -> float:
        return self.min_inter / self.threshold

    def to_dict(self) -> dict:
        return {
            "criterion": self.criterion.value,
            "threshold": self.threshold,
            "min_inter": self.min_inter,
            "q": self.q_value,
            "beta": self.beta_value,
            "sigma": self.sigma,
            "valid": self.valid,
        }

    @classmethod
    def from_dict(cls, data: dict) -> SeparabilityCertificate:
        return cls(
            criterion=Criterion(data["criterion"]),
            threshold=float(data["threshold"]),
            min_inter=float(data["min_inter"]),
            q_value=float(data["q"]),
            sigma=float(data["sigma"]),
            beta_value=None if data.get("beta") is None else float(data["beta"]),
        )


@dataclass(frozen=True, eq=False)
class EmbeddedDataset:
    """Coordinates in R^dim; row i is point i."""

    coords: np.ndarray

    def __post_init__(self) -> None:
        arr = np.array(self.coords, dtype=float, copy=True)
        if arr.ndim == 1:
            arr = arr[:, None]
        if arr.ndim != 2:
            raise ValueError("coords must be a 2-D table")
        arr.setflags(write=False)
        object.__setattr__(self, "coords", arr)

    @property
    def n(self) -> int:
        return self.coords.shape[0]

    @property
    def dim(self) -> int:
        return self.coords.shape[1]

    def distances(self) -> DistanceMatrix:
        return pairwise_distances(self.coords)

    def to_dict(self) -> dict:
        return {"dim": self.dim, "coords": self.coords.tolist()}

    @classmethod
    def from_dict(cls, data: dict) -> EmbeddedDataset:
        coords = np.asarray(data["coords"], dtype=float).reshape(-1, int(data["dim"]))
        return cls(coords)


def pairwise_distances(coords: np.ndarray) -> DistanceMatrix:
    """Euclidean distance table of the rows of ``coords``."""
    x = np.asarray(coords, dtype=float)
    if x.ndim == 1:
        x = x[:, None]
    diff = x[:, None, :] - x[None, :, :]
    return DistanceMatrix(np.sqrt(np.einsum("ijk,ijk->ij", diff, diff)))


def _check(d: DistanceMatrix, g: Partition) -> None:
    if g.n != d.n:
        raise PartitionError(f"partition covers {g.n} points but matrix has {d.n}")


def quality(d: DistanceMatrix, g: Partition) -> float:
    """k-means objective in pairwise form.

    Sum over clusters of ``sum_{i,l in C} d(i,l)^2 / (2 |C|)``, over ordered
    pairs, accumulated row-major.
    """
    _check(d, g)
    sq = d.squared
    total = 0.0
    for c in g.clusters:
        idx = list(c)
        total += float(sq[np.ix_(idx, idx)].sum()) / (2 * len(c))
    return total


def quality_euclidean(points: EmbeddedDataset | np.ndarray, g: Partition) -> float:
    """Centroid-form objective: squared distances of points to cluster means."""
    x = np.asarray(getattr(points, "coords", points), dtype=float)
    if x.ndim == 1:
        x = x[:, None]
    if x.shape[0] != g.n:
        raise PartitionError(f"partition covers {g.n} points but there are {x.shape[0]}")
    total = 0.0
    for c in g.clusters:
        if not c:
            raise PartitionError("empty cluster")
        block = x[list(c)]
        total += float(((block - block.mean(axis=0)) ** 2).sum())
    return total


def min_distance(d: DistanceMatrix) -> float:
    """sigma(d): smallest off-diagonal entry."""
    if d.n < 2:
        raise DistanceError("need at least two points")
    return float(d.entries[~np.eye(d.n, dtype=bool)].min())


def beta(d: DistanceMatrix, g: Partition) -> float:
    """Residual functional ``2 Q - (n - k - 1) sigma^2``."""
    q = quality(d, g)
    s = min_distance(d)
    return 2.0 * q - (d.n - g.k - 1) * s * s


def inter_cluster_mask(g: Partition) -> np.ndarray:
    lab = g.labels()
    return lab[:, None] != lab[None, :]


def min_inter_cluster_distance(d: DistanceMatrix, g: Partition) -> float:
    _check(d, g)
    if g.k < 2:
        raise PartitionError("a single cluster has no inter-cluster pairs")
    return float(d.entries[inter_cluster_mask(g)].min())


def quality_lower_bound(d: DistanceMatrix, g: Partition) -> float:
    """``(n - k) sigma^2 / 2``, a lower bound on Q for any partition."""
    s = min_distance(d)
    return (d.n - g.k) * s * s / 2.0


def rel_close(a: float, b: float, rtol: float) -> bool:
    return math.isclose(a, b, rel_tol=rtol, abs_tol=0.0) or a == b
