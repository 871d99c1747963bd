"""Euclidean embeddability of pseudo-distances.

Classical double-centering turns squared distances into a Gram matrix; the
matrix is embeddable iff that Gram matrix is positive semi-definite.  Adding
``delta`` to every squared off-diagonal distance adds ``delta/2`` to each
eigenvalue orthogonal to the all-ones vector, which gives the smallest shift
restoring embeddability.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import DistanceMatrix, EmbeddedDataset
from .transforms import shift_squared

PSD_RTOL = 1e-10
JACOBI_MAX_SWEEPS = 60


class NotEmbeddableError(ValueError):
    """Gram matrix has a genuinely negative eigenvalue."""


def gram_matrix(d: DistanceMatrix) -> np.ndarray:
    """``-1/2 J D2 J`` with J the centering projector."""
    n = d.n
    if n < 2:
        raise ValueError("need at least two points")
    sq = d.squared
    centered = sq - sq.mean(axis=0, keepdims=True)
    centered = centered - centered.mean(axis=1, keepdims=True)
    g = -0.5 * centered
    return 0.5 * (g + g.T)


def _round_robin(n: int) -> list[list[tuple[int, int]]]:
    """n-1 rounds of disjoint index pairs covering every pair once (n even)."""
    players = list(range(n))
    rounds = []
    for _ in range(n - 1):
        rounds.append([tuple(sorted((players[i], players[n - 1 - i]))) for i in range(n // 2)])
        players = [players[0], players[-1]] + players[1:-1]
    return rounds


def symmetric_eigen(mat: np.ndarray, tol: float = 1e-12) -> tuple[np.ndarray, np.ndarray]:
    """Eigen-decomposition of a real symmetric matrix by parallel-order Jacobi.

    Every round applies ``n/2`` disjoint plane rotations at once (round-robin
    ordering), so the sweep order and therefore the output are fixed for a
    given input.  Returns eigenvalues in descending order and the matching
    orthonormal eigenvectors as columns.
    """
    a = np.array(mat, dtype=float, copy=True)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ValueError("matrix must be square")
    n = a.shape[0]
    norm = float(np.linalg.norm(a))
    if not np.allclose(a, a.T, rtol=0.0, atol=1e-12 * max(norm, 1.0)):
        raise ValueError("matrix is not symmetric")
    a = 0.5 * (a + a.T)
    v = np.eye(n)
    if n == 1 or norm == 0.0:
        return np.diag(a).copy(), v
    size = n + (n % 2)
    rounds = [
        [(p, q) for p, q in rnd if q < n]
        for rnd in _round_robin(size)
    ]
    # sweep until off-diagonal mass is far below tol, or stops shrinking (roundoff floor)
    target = 1e-3 * tol * norm
    prev = np.inf
    for _ in range(JACOBI_MAX_SWEEPS):
        off = float(np.linalg.norm(a - np.diag(np.diag(a))))
        if off <= target or off >= prev:
            break
        prev = off
        for rnd in rounds:
            if not rnd:
                continue
            p = np.array([x for x, _ in rnd])
            q = np.array([y for _, y in rnd])
            apq = a[p, q]
            active = np.abs(apq) > 1e-300
            if not active.any():
                continue
            p, q, apq = p[active], q[active], apq[active]
            tau = (a[q, q] - a[p, p]) / (2.0 * apq)
            t = np.where(tau >= 0, 1.0, -1.0) / (np.abs(tau) + np.hypot(1.0, tau))
            c = 1.0 / np.sqrt(1.0 + t * t)
            s = t * c
            rot = np.eye(n)
            rot[p, p] = c
            rot[q, q] = c
            rot[p, q] = s
            rot[q, p] = -s
            a = rot.T @ a @ rot
            a = 0.5 * (a + a.T)
            v = v @ rot
    w = np.diag(a).copy()
    order = np.argsort(-w, kind="stable")
    return w[order], v[:, order]


@dataclass(frozen=True)
class GramAnalysis:
    eigenvalues: tuple[float, ...]
    min_eigenvalue: float
    is_psd: bool
    required_delta: float

    def to_dict(self) -> dict:
        return {
            "eigenvalues": list(self.eigenvalues),
            "min_eigenvalue": self.min_eigenvalue,
            "is_psd": self.is_psd,
            "required_delta": self.required_delta,
        }


def _band(eigenvalues: np.ndarray, rtol: float) -> float:
    return rtol * max(1.0, float(eigenvalues.max()))


def analyze(d: DistanceMatrix, tol: float = PSD_RTOL) -> GramAnalysis:
    """Embeddability verdict and the minimal squared shift that restores it."""
    w, _ = symmetric_eigen(gram_matrix(d))
    lam_min = float(w.min())
    psd = lam_min >= -_band(w, tol)
    return GramAnalysis(
        eigenvalues=tuple(float(x) for x in w),
        min_eigenvalue=lam_min,
        is_psd=psd,
        required_delta=0.0 if psd else 2.0 * -lam_min,
    )


def embed(d: DistanceMatrix, tol: float = PSD_RTOL) -> EmbeddedDataset:
    """Coordinates whose Euclidean distances reproduce d.

    Only directions with eigenvalue above the tolerance band are kept, so the
    reported dimension is the numerical rank of the Gram matrix.
    """
    w, v = symmetric_eigen(gram_matrix(d))
    band = _band(w, tol)
    if w.min() < -band:
        raise NotEmbeddableError(
            f"smallest Gram eigenvalue {w.min():.3g} is negative; shift squared distances first"
        )
    keep = w > band
    coords = v[:, keep] * np.sqrt(w[keep])
    if coords.shape[1] == 0:
        coords = np.zeros((d.n, 1))
    return EmbeddedDataset(coords)


def euclideanize(d: DistanceMatrix, tol: float = PSD_RTOL) -> tuple[EmbeddedDataset, float]:
    """Shift squared distances just enough to be embeddable, then embed."""
    info = analyze(d, tol)
    delta = info.required_delta
    shifted = shift_squared(d, delta) if delta > 0 else d
    return embed(shifted, tol), delta
