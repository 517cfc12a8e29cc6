"""Pearson correlation between category frequencies and group mean-profile
comparisons."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .charmetrics import UserProfile
from .errors import UndefinedResultError
from .taxonomy import Taxonomy


@dataclass(frozen=True)
class CorrelationMatrix:
    labels: tuple[str, ...]
    values: np.ndarray                 # square, symmetric, unit diagonal
    excluded: tuple[str, ...] = ()     # zero-variance categories left out


@dataclass(frozen=True)
class GroupComparison:
    labels: tuple[str, ...]
    mean_a: np.ndarray
    mean_b: np.ndarray
    difference: np.ndarray             # mean_a - mean_b componentwise
    mean_inertia: tuple[float | None, float | None] = (None, None)
    mean_singleness: tuple[float | None, float | None] = (None, None)


def pearson(x, y) -> float:
    """Standard Pearson correlation coefficient of two equal-length vectors."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if x.shape != y.shape or x.ndim != 1 or len(x) < 2:
        raise ValueError("pearson needs two equal-length vectors of length >= 2")
    dx = x - x.mean()
    dy = y - y.mean()
    sx = np.sqrt(np.dot(dx, dx))
    sy = np.sqrt(np.dot(dy, dy))
    if sx == 0.0 or sy == 0.0:
        raise UndefinedResultError("pearson undefined for zero-variance input")
    return float(np.dot(dx, dy) / (sx * sy))


def frequency_table(profiles: dict[str, UserProfile], taxonomy: Taxonomy) -> tuple[tuple[str, ...], np.ndarray]:
    """(labels, users x categories matrix) of full frequencies incl. Selfie."""
    users = sorted(profiles)
    rows = np.array([[float(v) for v in profiles[u].full_freq] for u in users])
    return taxonomy.all_labels, rows


def pearson_matrix(profiles: dict[str, UserProfile], taxonomy: Taxonomy) -> CorrelationMatrix:
    """Category-by-category Pearson matrix over users' full frequencies.

    Zero-variance categories are excluded and flagged rather than emitted
    as NaN columns.
    """
    if len(profiles) < 2:
        raise ValueError("pearson matrix needs at least 2 users")
    labels, rows = frequency_table(profiles, taxonomy)
    variance = rows.var(axis=0)
    keep = [i for i, v in enumerate(variance) if v > 0.0]
    excluded = tuple(labels[i] for i in range(len(labels)) if i not in keep)
    kept_labels = tuple(labels[i] for i in keep)
    m = len(keep)
    values = np.eye(m)
    for a in range(m):
        for b in range(a + 1, m):
            r = pearson(rows[:, keep[a]], rows[:, keep[b]])
            values[a, b] = r
            values[b, a] = r
    return CorrelationMatrix(kept_labels, values, excluded)


def _mean_defined(values) -> float | None:
    defined = [float(v) for v in values if v is not None]
    return sum(defined) / len(defined) if defined else None


def compare_groups(
    pos: dict[str, UserProfile],
    neg: dict[str, UserProfile],
    taxonomy: Taxonomy,
) -> GroupComparison:
    """Componentwise mean frequency vectors of two user sets and their difference."""
    if not pos or not neg:
        raise ValueError("both groups must be nonempty")
    labels, rows_a = frequency_table(pos, taxonomy)
    _, rows_b = frequency_table(neg, taxonomy)
    mean_a = rows_a.mean(axis=0)
    mean_b = rows_b.mean(axis=0)
    return GroupComparison(
        labels,
        mean_a,
        mean_b,
        mean_a - mean_b,
        mean_inertia=(
            _mean_defined(p.inertia_feature for p in pos.values()),
            _mean_defined(p.inertia_feature for p in neg.values()),
        ),
        mean_singleness=(
            _mean_defined(p.singleness_feature for p in pos.values()),
            _mean_defined(p.singleness_feature for p in neg.values()),
        ),
    )
