"""Density estimation and clustering used by the factor analyses."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from . import kernels


class DegenerateInputError(ValueError):
    """Input has no spread (KDE) or yields an undefined clustering index."""


# -- kernel density estimation --------------------------------------------------


@dataclass(frozen=True)
class KdeProfile:
    grid: np.ndarray
    density: np.ndarray
    bandwidth: float
    local_maxima: list[int]
    local_minima: list[int]

    @property
    def integral(self) -> float:
        return float(np.trapezoid(self.density, self.grid))

    def as_dict(self) -> dict:
        return {
            "bandwidth": self.bandwidth,
            "local_maxima": [float(self.grid[i]) for i in self.local_maxima],
            "local_minima": [float(self.grid[i]) for i in self.local_minima],
            "multimodal": is_multimodal(self),
        }


def silverman_bandwidth(values: np.ndarray) -> float:
    """``0.9 * min(std, IQR / 1.34) * n ** (-1/5)``.

    Falls back to the standard deviation when the IQR collapses to zero
    (more than half of the values tied), which would otherwise give h = 0.
    """
    n = len(values)
    sigma = float(np.std(values, ddof=1))
    q75, q25 = np.percentile(values, [75, 25])
    iqr = float(q75 - q25)
    spread = min(sigma, iqr / 1.34) if iqr > 0 else sigma
    return 0.9 * spread * n ** (-0.2)


def _find_extrema(y: np.ndarray) -> tuple[list[int], list[int]]:
    # collapse plateaus into runs, then compare each interior run to its neighbors
    starts = [0]
    for i in range(1, len(y)):
        if y[i] != y[i - 1]:
            starts.append(i)
    ends = starts[1:] + [len(y)]
    vals = [y[s] for s in starts]
    maxima, minima = [], []
    for r in range(1, len(starts) - 1):
        mid = (starts[r] + ends[r] - 1) // 2
        if vals[r] > vals[r - 1] and vals[r] > vals[r + 1]:
            maxima.append(mid)
        elif vals[r] < vals[r - 1] and vals[r] < vals[r + 1]:
            minima.append(mid)
    return maxima, minima


def kde(values: Sequence[float], grid_size: int = 512, bandwidth: float | None = None) -> KdeProfile:
    """Gaussian KDE with Silverman bandwidth on a grid spanning ``[min - 3h, max + 3h]``."""
    x = np.asarray(values, dtype=np.float64)
    if x.ndim != 1 or len(x) < 2:
        raise DegenerateInputError("KDE needs at least 2 values")
    if not np.all(np.isfinite(x)):
        raise ValueError("KDE input must be finite")
    if np.ptp(x) == 0:
        raise DegenerateInputError("KDE undefined for constant input")
    if grid_size < 3:
        raise ValueError("grid_size must be >= 3")
    h = silverman_bandwidth(x) if bandwidth is None else float(bandwidth)
    if not h > 0:
        raise DegenerateInputError("non-positive bandwidth")
    grid = np.linspace(x.min() - 3 * h, x.max() + 3 * h, grid_size)
    density = np.zeros(grid_size)
    norm = 1.0 / (len(x) * h * math.sqrt(2 * math.pi))
    for chunk in np.array_split(x, max(1, len(x) // 2048 + 1)):
        z = (grid[:, None] - chunk[None, :]) / h
        density += np.exp(-0.5 * z * z).sum(axis=1)
    density *= norm
    maxima, minima = _find_extrema(density)
    return KdeProfile(grid, density, h, maxima, minima)


def is_multimodal(profile: KdeProfile) -> bool:
    return len(profile.local_maxima) >= 2


# -- clustering ---------------------------------------------------------------------


@dataclass(frozen=True)
class KMeansConfig:
    restarts: int = 50
    max_iters: int = 300
    tol: float = 1e-6
    seed: int = 0


@dataclass
class ClusteringResult:
    k: int
    labels: np.ndarray
    centroids: np.ndarray
    wcss: float
    silhouette: float | None = None
    davies_bouldin: float | None = None
    per_k_scores: dict = field(default_factory=dict)
    seed: int = 0
    n_iter: int = 0
    wcss_history: list[float] = field(default_factory=list)
    ids: Sequence[str] | None = None

    @property
    def assignments(self) -> dict:
        keys = self.ids if self.ids is not None else range(len(self.labels))
        return {key: int(lab) for key, lab in zip(keys, self.labels)}

    @property
    def sizes(self) -> list[int]:
        return np.bincount(self.labels, minlength=self.k).tolist()


def _sq_dists(points: np.ndarray, centers: np.ndarray) -> np.ndarray:
    diff = points[:, None, :] - centers[None, :, :]
    return np.einsum("ijk,ijk->ij", diff, diff)


def _kmeanspp(points: np.ndarray, k: int, rng: np.random.Generator) -> np.ndarray:
    n = len(points)
    chosen = [int(rng.integers(n))]
    d2 = _sq_dists(points, points[chosen]).min(axis=1)
    for _ in range(1, k):
        total = d2.sum()
        if total > 0:
            idx = int(rng.choice(n, p=d2 / total))
        else:
            remaining = np.setdiff1d(np.arange(n), chosen)
            idx = int(rng.choice(remaining))
        chosen.append(idx)
        d2 = np.minimum(d2, _sq_dists(points, points[[idx]])[:, 0])
    return points[chosen].copy()


def _lloyd(points: np.ndarray, centers: np.ndarray, max_iters: int, tol: float):
    k = len(centers)
    labels = None
    history = []
    it = 0
    for it in range(1, max_iters + 1):
        d2 = _sq_dists(points, centers)
        new_labels = d2.argmin(axis=1)
        counts = np.bincount(new_labels, minlength=k)
        for c in np.flatnonzero(counts == 0):
            # reseed the empty cluster at the point farthest from its own centroid
            far = d2[np.arange(len(points)), new_labels]
            far[counts[new_labels] <= 1] = -1.0
            p = int(np.argmax(far))
            counts[new_labels[p]] -= 1
            new_labels[p] = c
            counts[c] = 1
            d2[p, :] = np.inf
            d2[p, c] = 0.0
        new_centers = np.zeros_like(centers)
        np.add.at(new_centers, new_labels, points)
        new_centers /= counts[:, None]
        history.append(float(_sq_dists(points, new_centers)[np.arange(len(points)), new_labels].sum()))
        shift = float(np.sqrt(((new_centers - centers) ** 2).sum(axis=1)).max())
        stable = labels is not None and np.array_equal(new_labels, labels)
        labels, centers = new_labels, new_centers
        if stable or shift < tol:
            break
    return labels, centers, history, it


def _canonical(labels: np.ndarray, centers: np.ndarray):
    order = np.lexsort(centers.T[::-1])
    remap = np.empty(len(order), dtype=np.int64)
    remap[order] = np.arange(len(order))
    return remap[labels], centers[order]


def kmeans(points, k: int, cfg: KMeansConfig = KMeansConfig()) -> ClusteringResult:
    """Best-of-``restarts`` Lloyd k-means with k-means++ seeding.

    Cluster ids are ordered by centroid coordinates so results do not depend
    on row order or restart scheduling.
    """
    X = np.ascontiguousarray(points, dtype=np.float64)
    if X.ndim != 2 or X.shape[1] < 1:
        raise ValueError("points must be an (n, d) matrix with d >= 1")
    n = len(X)
    if k < 1:
        raise ValueError("k must be >= 1")
    if n < k:
        raise ValueError(f"cannot form {k} clusters from {n} points")
    if not np.all(np.isfinite(X)):
        raise ValueError("features must be finite")
    best = None
    for r in range(cfg.restarts):
        rng = np.random.default_rng([cfg.seed, k, r])
        centers = _kmeanspp(X, k, rng)
        labels, centers, history, it = _lloyd(X, centers, cfg.max_iters, cfg.tol)
        wcss = history[-1]
        if best is None or wcss < best[0]:
            best = (wcss, labels, centers, history, it)
    wcss, labels, centers, history, it = best
    labels, centers = _canonical(labels, centers)
    return ClusteringResult(
        k=k, labels=labels, centroids=centers, wcss=wcss, seed=cfg.seed,
        n_iter=it, wcss_history=history,
    )


def _check_labels(points, labels):
    X = np.ascontiguousarray(points, dtype=np.float64)
    lab = np.asarray(labels)
    if len(lab) != len(X):
        raise ValueError("labels and points differ in length")
    uniq, codes = np.unique(lab, return_inverse=True)
    if len(uniq) < 2:
        raise DegenerateInputError("validity indices need at least 2 clusters")
    return X, codes.astype(np.int64), len(uniq)


def silhouette(points, labels) -> float:
    """Mean silhouette width (Euclidean). Points in singleton clusters score 0."""
    X, codes, k = _check_labels(points, labels)
    sizes = np.bincount(codes, minlength=k).astype(np.float64)
    sums = kernels.cluster_distance_sums(X, codes, k)
    n = len(X)
    own = sizes[codes]
    a = np.where(own > 1, sums[np.arange(n), codes] / np.maximum(own - 1, 1), 0.0)
    mean_other = sums / sizes[None, :]
    mean_other[np.arange(n), codes] = np.inf
    b = mean_other.min(axis=1)
    denom = np.maximum(a, b)
    with np.errstate(invalid="ignore", divide="ignore"):
        s = np.where((own > 1) & (denom > 0), (b - a) / denom, 0.0)
    return float(s.mean())


def davies_bouldin(points, labels) -> float:
    """Davies-Bouldin index; raises if two centroids coincide."""
    X, codes, k = _check_labels(points, labels)
    centers = np.array([X[codes == c].mean(axis=0) for c in range(k)])
    scatter = np.array(
        [np.sqrt(((X[codes == c] - centers[c]) ** 2).sum(axis=1)).mean() for c in range(k)]
    )
    sep = np.sqrt(_sq_dists(centers, centers))
    off = ~np.eye(k, dtype=bool)
    if np.any(sep[off] == 0):
        raise DegenerateInputError("Davies-Bouldin undefined: coincident cluster centroids")
    ratio = np.where(off, (scatter[:, None] + scatter[None, :]) / np.where(off, sep, 1.0), -np.inf)
    return float(ratio.max(axis=1).mean())


def select_k(points, k_range: Iterable[int] = range(2, 11), cfg: KMeansConfig = KMeansConfig()) -> ClusteringResult:
    """Fit every k and keep the highest silhouette.

    Ties go to the lower Davies-Bouldin index, then the smaller k.
    """
    X = np.ascontiguousarray(points, dtype=np.float64)
    n = len(X)
    ks = sorted(set(int(k) for k in k_range))
    if not ks:
        raise ValueError("empty k range")
    if ks[0] < 2 or ks[-1] > n - 1:
        raise ValueError(f"k range must lie within [2, {n - 1}] for {n} points")
    results = {}
    for k in ks:
        res = kmeans(X, k, cfg)
        res.silhouette = silhouette(X, res.labels)
        try:
            res.davies_bouldin = davies_bouldin(X, res.labels)
        except DegenerateInputError:
            res.davies_bouldin = None
        results[k] = res

    def key(k):
        r = results[k]
        db = r.davies_bouldin if r.davies_bouldin is not None else math.inf
        return (-r.silhouette, db, k)

    chosen = results[min(ks, key=key)]
    chosen.per_k_scores = {k: (results[k].silhouette, results[k].davies_bouldin) for k in ks}
    return chosen
