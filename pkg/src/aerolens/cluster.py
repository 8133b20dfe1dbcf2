"""K-means (Lloyd's algorithm) with elbow-method k selection and silhouette.

Everything here is deterministic for a fixed seed: k-means++ seeding, 10
restarts decided by WCSS (ties go to the lowest restart index), and
empty-cluster repair by re-seeding at the point farthest from its centroid.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .data import NormalizationParams
from .errors import (
    CorruptDocumentError,
    DimensionMismatchError,
    SchemaVersionMismatchError,
    SingleClusterError,
    TooFewPointsError,
)
from .seeding import derive_seed, rng_from

__all__ = [
    "ClusterModel",
    "ElbowCurve",
    "kmeans_fit",
    "assign",
    "silhouette",
    "elbow_select",
    "save_cluster_model",
    "load_cluster_model",
]

CLUSTER_SCHEMA_VERSION = 1


@dataclass
class ClusterModel:
    """Fitted K-means state.

    ``normalization`` is the scaling under which the centroids live; ``None``
    means the model operates directly on raw feature space.
    """

    k: int
    centroids: np.ndarray
    wcss: float
    iterations_run: int
    seed: int
    normalization: Optional[NormalizationParams] = None

    def __post_init__(self) -> None:
        self.centroids = np.asarray(self.centroids, dtype=float)
        if self.k < 1:
            raise ValueError("k must be >= 1")
        if not np.all(np.isfinite(self.centroids)):
            raise ValueError("centroids must be finite")
        if self.wcss < 0:
            raise ValueError("wcss must be >= 0")


@dataclass(frozen=True)
class ElbowCurve:
    """(k, wcss) diagnostics plus the selected k."""

    points: tuple[tuple[int, float], ...]
    chosen_k: int

    def __post_init__(self) -> None:
        ks = [k for k, _ in self.points]
        if any(b <= a for a, b in zip(ks, ks[1:])):
            raise ValueError("k values must be strictly increasing")


def _squared_distances(X: np.ndarray, centroids: np.ndarray) -> np.ndarray:
    """(n, k) squared Euclidean distances."""
    diff = X[:, None, :] - centroids[None, :, :]
    return np.einsum("nkd,nkd->nk", diff, diff)


def _kmeanspp_init(X: np.ndarray, k: int, rng: np.random.Generator) -> np.ndarray:
    """k-means++ seeding: spread initial centroids proportionally to D²."""
    n = X.shape[0]
    centroids = np.empty((k, X.shape[1]))
    centroids[0] = X[rng.integers(n)]
    d2 = np.sum((X - centroids[0]) ** 2, axis=1)
    for i in range(1, k):
        total = d2.sum()
        if total > 0:
            idx = rng.choice(n, p=d2 / total)
        else:
            idx = rng.integers(n)  # all mass used up: duplicates everywhere
        centroids[i] = X[idx]
        d2 = np.minimum(d2, np.sum((X - centroids[i]) ** 2, axis=1))
    return centroids


def _lloyd(
    X: np.ndarray, k: int, rng: np.random.Generator, max_iter: int, tol: float
) -> tuple[np.ndarray, np.ndarray, float, int]:
    """One restart of Lloyd's algorithm. Returns (centroids, labels, wcss, iters)."""
    centroids = _kmeanspp_init(X, k, rng)
    labels = np.zeros(X.shape[0], dtype=int)
    prev_wcss = np.inf
    iterations = 0
    for _ in range(max_iter):
        iterations += 1
        d2 = _squared_distances(X, centroids)
        labels = np.argmin(d2, axis=1)  # argmin takes the lowest index on ties

        # Re-seed any empty cluster at the point farthest from its centroid.
        point_cost = d2[np.arange(X.shape[0]), labels].copy()
        for c in range(k):
            if np.any(labels == c):
                continue
            far = int(np.argmax(point_cost))
            if point_cost[far] <= 0:
                continue  # every point sits exactly on a centroid; leave empty
            centroids[c] = X[far]
            labels[far] = c
            point_cost[far] = 0.0

        wcss = float(np.sum((X - centroids[labels]) ** 2))
        # Lloyd monotonicity, allowing for float round-off.
        assert not np.isfinite(prev_wcss) or wcss <= prev_wcss + 1e-9 * max(1.0, prev_wcss)
        prev_wcss = wcss

        new_centroids = centroids.copy()
        for c in range(k):
            members = labels == c
            if np.any(members):
                new_centroids[c] = X[members].mean(axis=0)
        shift = float(np.max(np.sqrt(np.sum((new_centroids - centroids) ** 2, axis=1))))
        centroids = new_centroids
        if shift < tol:
            break

    d2 = _squared_distances(X, centroids)
    labels = np.argmin(d2, axis=1)
    wcss = float(d2[np.arange(X.shape[0]), labels].sum())
    return centroids, labels, wcss, iterations


def kmeans_fit(
    X: np.ndarray,
    k: int,
    seed: int = 0,
    max_iter: int = 300,
    tol: float = 1e-6,
    n_restarts: int = 10,
    normalization: Optional[NormalizationParams] = None,
) -> ClusterModel:
    """Best-of-``n_restarts`` K-means fit, deterministic per seed."""
    X = np.asarray(X, dtype=float)
    if X.ndim != 2:
        raise DimensionMismatchError("expected a 2-D matrix")
    if X.shape[0] < k:
        raise TooFewPointsError(f"{X.shape[0]} rows < k={k}")
    if max_iter < 1:
        raise ValueError("max_iter must be >= 1")
    if tol < 0:
        raise ValueError("tol must be >= 0")

    best: Optional[tuple[np.ndarray, float, int]] = None
    for restart in range(n_restarts):
        rng = rng_from(derive_seed(seed, "kmeans", restart))
        centroids, _, wcss, iters = _lloyd(X, k, rng, max_iter, tol)
        if best is None or wcss < best[1]:  # strict: ties keep the earliest restart
            best = (centroids, wcss, iters)
    assert best is not None
    centroids, wcss, iters = best
    return ClusterModel(
        k=k,
        centroids=centroids,
        wcss=wcss,
        iterations_run=iters,
        seed=seed,
        normalization=normalization,
    )


def assign(model: ClusterModel, X: np.ndarray) -> np.ndarray:
    """Nearest-centroid label per row (squared Euclidean; ties → lowest index)."""
    X = np.asarray(X, dtype=float)
    if X.ndim != 2 or X.shape[1] != model.centroids.shape[1]:
        raise DimensionMismatchError(
            f"expected {model.centroids.shape[1]} columns, got {X.shape[1] if X.ndim == 2 else X.ndim}"
        )
    return np.argmin(_squared_distances(X, model.centroids), axis=1)


def silhouette(X: np.ndarray, labels: np.ndarray, chunk: int = 512) -> float:
    """Mean silhouette score ((b-a)/max(a,b)); singleton clusters score 0.

    Distances are computed block-by-block so large inputs never materialize
    a full n×n matrix.
    """
    X = np.asarray(X, dtype=float)
    labels = np.asarray(labels)
    unique = np.unique(labels)
    if unique.size < 2:
        raise SingleClusterError("silhouette needs at least 2 distinct labels")

    n = X.shape[0]
    sizes = {int(c): int(np.sum(labels == c)) for c in unique}
    sq_norms = np.sum(X**2, axis=1)
    scores = np.zeros(n)
    for start in range(0, n, chunk):
        stop = min(start + chunk, n)
        block = X[start:stop]
        blk_labels = labels[start:stop]
        d = np.sqrt(
            np.maximum(
                sq_norms[start:stop, None] - 2 * block @ X.T + sq_norms[None, :], 0.0
            )
        )
        a = np.zeros(stop - start)
        b = np.full(stop - start, np.inf)
        singleton = np.zeros(stop - start, dtype=bool)
        for c in unique:
            mask = labels == c
            size = sizes[int(c)]
            sum_to_c = d[:, mask].sum(axis=1)
            own = blk_labels == c
            if size > 1:
                a[own] = sum_to_c[own] / (size - 1)  # self distance is 0
            else:
                singleton |= own
            b[~own] = np.minimum(b[~own], sum_to_c[~own] / size)
        denom = np.maximum(a, b)
        with np.errstate(invalid="ignore"):
            s = np.where(denom > 0, (b - a) / denom, 0.0)
        s[singleton] = 0.0
        scores[start:stop] = s
    return float(scores.mean())


def elbow_select(
    X: np.ndarray, k_min: int, k_max: int, seed: int = 0, **fit_kwargs
) -> ElbowCurve:
    """Fit each k in [k_min, k_max] and pick the knee of the WCSS curve.

    The knee is the k maximizing the discrete second difference
    ``wcss(k-1) - 2*wcss(k) + wcss(k+1)``.  At the boundaries, where a
    centered difference does not exist, one-sided estimates keep every k
    eligible: the left edge extends the curve flat (selecting k_min only
    when the curve is already flat there, i.e. k_min suffices), the right
    edge reuses the last computable difference.  Ties go to the smallest k.
    """
    X = np.asarray(X, dtype=float)
    if not 2 <= k_min < k_max:
        raise ValueError("need 2 <= k_min < k_max")
    if k_max > X.shape[0]:
        raise TooFewPointsError(f"k_max={k_max} exceeds {X.shape[0]} rows")

    ks = list(range(k_min, k_max + 1))
    wcss = [
        kmeans_fit(X, k, seed=derive_seed(seed, "elbow", k), **fit_kwargs).wcss for k in ks
    ]

    m = len(ks)
    if m < 3:
        return ElbowCurve(tuple(zip(ks, wcss)), chosen_k=ks[0])
    d2 = np.empty(m)
    d2[0] = wcss[1] - wcss[0]  # flat extension: wcss(k_min - 1) := wcss(k_min)
    for i in range(1, m - 1):
        d2[i] = wcss[i - 1] - 2 * wcss[i] + wcss[i + 1]
    d2[m - 1] = wcss[m - 3] - 2 * wcss[m - 2] + wcss[m - 1]
    chosen = ks[int(np.argmax(d2))]  # argmax returns the first (smallest k) on ties
    return ElbowCurve(tuple(zip(ks, wcss)), chosen_k=chosen)


# --- persistence ------------------------------------------------------------


def cluster_model_to_dict(model: ClusterModel) -> dict:
    return {
        "schema_version": CLUSTER_SCHEMA_VERSION,
        "kind": "cluster-model",
        "k": int(model.k),
        "centroids": [[float(v) for v in row] for row in model.centroids],
        "wcss": float(model.wcss),
        "iterations_run": int(model.iterations_run),
        "seed": int(model.seed),
        "normalization": model.normalization.to_dict() if model.normalization else None,
    }


def cluster_model_from_dict(doc: dict) -> ClusterModel:
    try:
        version = doc["schema_version"]
        if version > CLUSTER_SCHEMA_VERSION:
            raise SchemaVersionMismatchError(
                f"cluster model schema {version} is newer than supported {CLUSTER_SCHEMA_VERSION}"
            )
        normalization = (
            NormalizationParams.from_dict(doc["normalization"]) if doc["normalization"] else None
        )
        return ClusterModel(
            k=int(doc["k"]),
            centroids=np.asarray(doc["centroids"], dtype=float),
            wcss=float(doc["wcss"]),
            iterations_run=int(doc["iterations_run"]),
            seed=int(doc["seed"]),
            normalization=normalization,
        )
    except (KeyError, TypeError, ValueError) as exc:
        raise CorruptDocumentError(f"malformed cluster model document: {exc}") from exc


def save_cluster_model(model: ClusterModel, path: str) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        json.dump(cluster_model_to_dict(model), fh, indent=2, sort_keys=True)
        fh.write("\n")


def load_cluster_model(path: str) -> ClusterModel:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            doc = json.load(fh)
    except json.JSONDecodeError as exc:
        raise CorruptDocumentError(f"cluster model JSON does not parse: {exc}") from exc
    if not isinstance(doc, dict):
        raise CorruptDocumentError("cluster model document must be a JSON object")
    return cluster_model_from_dict(doc)
