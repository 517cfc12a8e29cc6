"""Embedding clustering: Lloyd k-means, simplified silhouette, k selection,
cluster-to-category merging, selfie subclustering and face-count splitting.

The silhouette variant replaces mean distances to cluster members with
distances to cluster centroids, which drops the quadratic cost of the
exact coefficient.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .corpus import Dataset, apply_assignments
from .errors import ConfigError, PreconditionError, SchemaError
from .taxonomy import (
    EXCLUDED,
    MULTI_FACE,
    ONE_FACE,
    SELFIE,
    SELFIE_SUBCATEGORIES,
    Taxonomy,
)


@dataclass(frozen=True)
class Clustering:
    k: int
    centroids: np.ndarray          # (k, d); centroid j is the mean of its members
    labels: np.ndarray             # (n,) cluster index per input point
    objective: float               # sum of squared distances to assigned centroids
    iterations_run: int
    reseeds: int = 0               # empty-cluster repairs performed
    objective_history: tuple[float, ...] = ()   # per-iteration objectives


@dataclass(frozen=True)
class SilhouetteCurve:
    points: tuple[tuple[int, float], ...]   # ordered (k, score) pairs


@dataclass(frozen=True)
class CategoryModel:
    taxonomy: Taxonomy
    merge_map: dict[int, str]      # cluster index -> category label
    centroids: np.ndarray

    def labels_in_use(self) -> tuple[str, ...]:
        return tuple(sorted(set(self.merge_map.values())))


def _kmeans_pp_init(pts: np.ndarray, k: int, rng: np.random.Generator) -> np.ndarray:
    """k-means++ seeding; D^2 sampling is invariant to uniform scaling."""
    n = len(pts)
    centroids = np.empty((k, pts.shape[1]))
    first = rng.integers(n)
    centroids[0] = pts[first]
    d2 = np.sum((pts - centroids[0]) ** 2, axis=1)
    for j in range(1, k):
        total = d2.sum()
        if total <= 0.0:
            idx = rng.integers(n)
        else:
            idx = rng.choice(n, p=d2 / total)
        centroids[j] = pts[idx]
        d2 = np.minimum(d2, np.sum((pts - centroids[j]) ** 2, axis=1))
    return centroids


def _sq_dists(pts: np.ndarray, centroids: np.ndarray) -> np.ndarray:
    """(n, k) squared Euclidean distances, computed without large temporaries."""
    # ||p - c||^2 = ||p||^2 - 2 p.c + ||c||^2; clip negatives from rounding
    d2 = (
        np.sum(pts**2, axis=1)[:, None]
        - 2.0 * pts @ centroids.T
        + np.sum(centroids**2, axis=1)[None, :]
    )
    return np.maximum(d2, 0.0)


def kmeans(points, k: int, seed: int, max_iter: int = 300, tol: float = 1e-6) -> Clustering:
    """Lloyd's algorithm with k-means++ seeding.

    Deterministic under a fixed seed.  Empty clusters are re-seeded at the
    point farthest from its assigned centroid.  Iterates until the relative
    objective improvement falls below tol or max_iter is reached; the
    returned centroids are exactly the means of their assigned points.
    """
    pts = np.asarray(points, dtype=float)
    if pts.ndim != 2:
        pts = pts.reshape(len(pts), -1)
    n = len(pts)
    if k < 1 or k > n:
        raise ValueError(f"k={k} must be in [1, {n}]")
    rng = np.random.default_rng(seed)
    centroids = _kmeans_pp_init(pts, k, rng)
    prev_obj = np.inf
    labels = np.zeros(n, dtype=int)
    reseeds = 0
    iterations = 0
    history: list[float] = []
    for iterations in range(1, max_iter + 1):
        d2 = _sq_dists(pts, centroids)
        labels = np.argmin(d2, axis=1)
        assigned = d2[np.arange(n), labels]
        for j in range(k):
            if not np.any(labels == j):
                idx = int(np.argmax(assigned))
                labels[idx] = j
                assigned[idx] = -np.inf   # do not pick the same point again
                reseeds += 1
        centroids = np.stack([pts[labels == j].mean(axis=0) for j in range(k)])
        obj = float(_sq_dists(pts, centroids)[np.arange(n), labels].sum())
        assert obj <= prev_obj + 1e-9, "k-means objective increased"
        history.append(obj)
        if prev_obj < np.inf and prev_obj - obj <= tol * max(prev_obj, 1e-300):
            prev_obj = obj
            break
        prev_obj = obj
    return Clustering(k, centroids, labels, prev_obj, iterations, reseeds, tuple(history))


def simplified_silhouette(points, clustering: Clustering) -> float:
    """Mean silhouette with centroid-substituted distances.

    Per point: a = distance to its own centroid, b = minimum distance to
    any other centroid, s = (b - a) / max(a, b), with s = 0 when both are
    zero.  Scores lie in [-1, 1].
    """
    pts = np.asarray(points, dtype=float)
    if pts.ndim != 2:
        pts = pts.reshape(len(pts), -1)
    if clustering.k < 2:
        raise ValueError("simplified silhouette needs k >= 2")
    if len(pts) != len(clustering.labels):
        raise ValueError("clustering does not cover the given points")
    dist = np.sqrt(_sq_dists(pts, clustering.centroids))
    n = len(pts)
    a = dist[np.arange(n), clustering.labels]
    masked = dist.copy()
    masked[np.arange(n), clustering.labels] = np.inf
    b = masked.min(axis=1)
    denom = np.maximum(a, b)
    s = np.where(denom > 0.0, (b - a) / np.where(denom > 0.0, denom, 1.0), 0.0)
    return float(s.mean())


def largest_drop_k(curve: SilhouetteCurve) -> int:
    """The k immediately preceding the largest consecutive score drop.

    Ties break toward smaller k; a flat curve yields the smallest k.
    """
    pts = curve.points
    if len(pts) < 2:
        raise ValueError("curve must contain at least 2 scanned k values")
    drops = [pts[i][1] - pts[i + 1][1] for i in range(len(pts) - 1)]
    return pts[int(np.argmax(drops))][0]  # argmax takes the first maximum


def select_k(points, k_range: tuple[int, int], step: int, seed: int) -> tuple[int, SilhouetteCurve]:
    """Scan k over the inclusive range and pick the elbow.

    The selected k is the one immediately preceding the largest consecutive
    score drop; ties break toward smaller k.  The full curve is returned
    for audit.
    """
    pts = np.asarray(points, dtype=float)
    lo, hi = k_range
    ks = list(range(lo, hi + 1, step))
    if len(ks) < 2:
        raise ValueError("k range must contain at least 2 scanned values")
    if lo < 2 or hi > len(pts) - 1:
        raise ValueError(f"k range must lie within [2, {len(pts) - 1}]")
    scores = [simplified_silhouette(pts, kmeans(pts, k, seed)) for k in ks]
    curve = SilhouetteCurve(tuple(zip(ks, scores)))
    return largest_drop_k(curve), curve


def apply_merge_map(clustering: Clustering, merge_map: dict[int, str], taxonomy: Taxonomy) -> CategoryModel:
    """Attach category labels to clusters, keeping centroids for assignment."""
    for j in range(clustering.k):
        if j not in merge_map:
            raise ConfigError(f"merge map has no entry for cluster index {j}")
    valid = set(taxonomy.all_labels) | set(SELFIE_SUBCATEGORIES)
    for j, label in merge_map.items():
        if label not in valid:
            raise ConfigError(f"cluster {j} mapped to unknown category {label!r}")
    # selfie subcategory clusters merge into the Selfie super-category
    merged = {
        j: (SELFIE if label in SELFIE_SUBCATEGORIES else label)
        for j, label in merge_map.items()
    }
    return CategoryModel(taxonomy, merged, clustering.centroids.copy())


def nearest_centroid(embeddings: np.ndarray, centroids: np.ndarray) -> np.ndarray:
    """Index of the nearest centroid per row; ties go to the lower index."""
    return np.argmin(_sq_dists(embeddings, centroids), axis=1)


def assign_categories(d: Dataset, model: CategoryModel) -> Dataset:
    """Label every image with its nearest centroid's merged category."""
    if model.centroids.shape[1] != d.embedding_dim:
        raise SchemaError(
            f"model dimension {model.centroids.shape[1]} != dataset {d.embedding_dim}"
        )
    ids = sorted(d.images)
    emb = np.array([d.images[i].embedding for i in ids])
    idx = nearest_centroid(emb, model.centroids)
    assignments = {iid: model.merge_map[int(j)] for iid, j in zip(ids, idx)}
    return apply_assignments(d, assignments)


def subcluster_selfies(
    d: Dataset,
    subcategory_names: tuple[str, ...] = SELFIE_SUBCATEGORIES,
    seed: int = 0,
    k: int = 4,
) -> tuple[dict[str, str], Clustering]:
    """Split Selfie images into k subcategories by k-means on embeddings.

    Subcategory naming (which cluster is which) comes from config, not the
    data; `subcategory_names[j]` names cluster j.
    """
    if len(subcategory_names) != k:
        raise ConfigError(f"need {k} subcategory names, got {len(subcategory_names)}")
    ids = sorted(i for i, img in d.images.items() if img.category == SELFIE)
    if len(ids) < k:
        raise ValueError(f"need at least {k} selfie images, have {len(ids)}")
    emb = np.array([d.images[i].embedding for i in ids])
    clustering = kmeans(emb, k, seed)
    mapping = {iid: subcategory_names[int(j)] for iid, j in zip(ids, clustering.labels)}
    return mapping, clustering


def split_by_face_count(d: Dataset) -> dict[str, str]:
    """Tag every Selfie image one-face / multi-face / excluded.

    Images with no face count or zero detected faces are excluded from
    face-based measures.
    """
    if not d.categorized:
        raise PreconditionError("images must be categorized before face splitting")
    tags = {}
    for iid in sorted(d.images):
        img = d.images[iid]
        if img.category != SELFIE:
            continue
        if img.face_count is None or img.face_count == 0:
            tags[iid] = EXCLUDED
        elif img.face_count == 1:
            tags[iid] = ONE_FACE
        else:
            tags[iid] = MULTI_FACE
    return tags
