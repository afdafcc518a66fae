"""Assignment of daily relative profiles to reference profiles, and k-means for building references."""

from __future__ import annotations

from typing import Dict, List, Mapping, NamedTuple, Sequence, Tuple

import numpy as np


class ClusteringError(ValueError):
    pass


def reference_set(refs: Mapping[str, Sequence[float]], tol: float = 1e-9) -> Dict[str, np.ndarray]:
    """Validate labelled relative profiles (positive values, maximum 1)."""
    out = {}
    length = None
    for label, values in refs.items():
        v = np.asarray(values, dtype=float)
        if length is None:
            length = v.size
        if v.ndim != 1 or v.size != length:
            raise ClusteringError(f"reference {label!r} has the wrong length")
        if np.any(v <= 0) or abs(v.max() - 1.0) > tol:
            raise ClusteringError(f"reference {label!r} must lie in (0, 1] with maximum 1")
        out[str(label)] = v
    return out


def classify(series: Sequence[float], refs: Mapping[str, np.ndarray]) -> Tuple[str, float]:
    """Label of the nearest reference by Euclidean distance; ties go to the smallest label."""
    if not refs:
        raise ClusteringError("empty reference set")
    x = np.asarray(series, dtype=float)
    best = None
    for label in sorted(refs):
        ref = np.asarray(refs[label], dtype=float)
        if ref.shape != x.shape:
            raise ClusteringError(f"series and reference {label!r} differ in length")
        d = float(np.sqrt(np.sum((x - ref) ** 2)))
        if best is None or d < best[1]:
            best = (label, d)
    return best


class KMeansResult(NamedTuple):
    centroids: np.ndarray
    assignment: np.ndarray
    distortions: List[float]


def _sq_dist(x: np.ndarray, c: np.ndarray) -> np.ndarray:
    return np.sum((x[:, None, :] - c[None, :, :]) ** 2, axis=2)


def _kmeans_pp(x: np.ndarray, k: int, rng: np.random.Generator) -> np.ndarray:
    centroids = [x[rng.integers(len(x))]]
    for _ in range(1, k):
        d2 = _sq_dist(x, np.array(centroids)).min(axis=1)
        total = d2.sum()
        if total == 0:
            break
        centroids.append(x[rng.choice(len(x), p=d2 / total)])
    return np.array(centroids)


def kmeans_longitudinal(series, k: int, seed: int = 0, max_iter: int = 100) -> KMeansResult:
    """Lloyd iterations from a seeded k-means++ start.

    ``distortions`` records the total squared distance after each assignment step.
    """
    x = np.asarray(series, dtype=float)
    if x.ndim != 2:
        raise ClusteringError("series must be a 2-D array (one row per series)")
    distinct = len(np.unique(x, axis=0))
    if k < 1 or k > distinct:
        raise ClusteringError(f"k={k} must lie in 1..{distinct} (number of distinct series)")
    rng = np.random.default_rng(seed)
    centroids = _kmeans_pp(x, k, rng)
    assignment = None
    distortions: List[float] = []
    for _ in range(max_iter):
        d2 = _sq_dist(x, centroids)
        new = np.argmin(d2, axis=1)
        distortions.append(float(d2[np.arange(len(x)), new].sum()))
        if assignment is not None and np.array_equal(new, assignment):
            break
        assignment = new
        for j in range(k):
            members = x[assignment == j]
            if len(members):
                centroids[j] = members.mean(axis=0)
    return KMeansResult(centroids, assignment, distortions)


def distortion(series, centroids, assignment) -> float:
    x = np.asarray(series, dtype=float)
    c = np.asarray(centroids, dtype=float)
    return float(np.sum((x - c[np.asarray(assignment)]) ** 2))
