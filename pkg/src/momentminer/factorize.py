"""NMF user typing, high-level attribute profiles and rankings, and
attribute prediction from the seven selfie-posting measures.
"""
from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from .charmetrics import SelfieMeasures, UserProfile
from .errors import ConfigError, UndefinedResultError
from .learn import CvResult, kfold_cv, quantile_label
from .stats import pearson
from .taxonomy import Taxonomy


@dataclass(frozen=True)
class NmfModel:
    V: np.ndarray
    W: np.ndarray                      # users x r type weights
    H: np.ndarray                      # r x categories type profiles
    r: int
    iterations: int
    error: float                       # final Frobenius norm of V - WH
    error_history: tuple[float, ...]


@dataclass(frozen=True)
class AttributeSchema:
    """Named attributes, each a disjoint bundle of taxonomy categories."""

    attributes: dict[str, tuple[str, ...]]

    def validated(self, taxonomy: Taxonomy) -> "AttributeSchema":
        seen: dict[str, str] = {}
        for name, cats in self.attributes.items():
            for c in cats:
                if c not in taxonomy.categories:
                    raise ConfigError(f"attribute {name!r} lists unknown category {c!r}")
                if c in seen:
                    raise ConfigError(
                        f"category {c!r} appears in both {seen[c]!r} and {name!r}"
                    )
                seen[c] = name
        return self

    @property
    def names(self) -> tuple[str, ...]:
        return tuple(self.attributes)


DEFAULT_SCHEMA = AttributeSchema({
    "Travel": ("Landscape Photo", "Tourist Photo", "Building"),
    "Cosmetic": ("Cosmetic", "Cosmetics Ad", "Cosmetic Tips"),
    "Children": ("Child", "Baby"),
    "Living Goods": ("Shoes", "Clothes", "Sunglass & Handbag", "Necklace & Bracelet"),
    "WeChat": ("WeChat Moment", "Motto", "WeChat Expression", "QR-code",
               "WeChat Wallet", "Chat Screenshot", "Other Ad", "Comic", "Essay"),
    "Food": ("Snack", "Fruit & Cake", "Meal"),
})

REDUCED_SCHEMA = AttributeSchema({
    "Travel": ("Building", "Landscape Photo"),
    "Cosmetic": ("Cosmetic", "Cosmetics Ad"),
    "Children": ("Child", "Baby"),
    "Living Goods": ("Clothes", "Shoes"),
    "WeChat": ("Chat Screenshot", "Motto"),
    "Food": ("Meal", "Snack"),
})


@dataclass(frozen=True)
class TypeProfile:
    type_index: int
    member_count: int
    attribute_means: dict[str, Fraction]
    normalized: dict[str, float | None]   # None when the attribute is degenerate


_EPS = 1e-12


def nmf(V, r: int = 5, max_iter: int = 500, tol: float = 1e-6, seed: int = 0) -> NmfModel:
    """Non-negative factorization V ~ WH by multiplicative updates.

    Minimizes the Frobenius norm with the classic Lee-Seung update pair;
    the error is nonincreasing across iterations.  W and H are initialized
    uniformly at random in (0, 1] under the seed.
    """
    V = np.asarray(V, dtype=float)
    if V.ndim != 2:
        raise ValueError("V must be a matrix")
    if np.any(V < 0.0):
        raise ValueError("V must be entrywise non-negative")
    if not 1 <= r <= min(V.shape):
        raise ValueError(f"rank {r} must be in [1, {min(V.shape)}]")
    rng = np.random.default_rng(seed)
    n, m = V.shape
    W = 1.0 - rng.random((n, r))   # uniform in (0, 1]
    H = 1.0 - rng.random((r, m))
    history = []
    prev = np.linalg.norm(V - W @ H)
    history.append(float(prev))
    iterations = 0
    for iterations in range(1, max_iter + 1):
        H *= (W.T @ V) / (W.T @ W @ H + _EPS)
        W *= (V @ H.T) / (W @ H @ H.T + _EPS)
        err = float(np.linalg.norm(V - W @ H))
        assert err <= history[-1] + 1e-9, "NMF error increased"
        history.append(err)
        if history[-2] - err <= tol * max(history[-2], _EPS):
            break
    return NmfModel(V, W, H, r, iterations, history[-1], tuple(history))


def assign_user_types(model: NmfModel) -> np.ndarray:
    """Type index per user: argmax over the W row, ties to the lower index."""
    return np.argmax(model.W, axis=1)


def attribute_values(profile: UserProfile, schema: AttributeSchema, taxonomy: Taxonomy) -> dict[str, Fraction]:
    """Per attribute, the sum of the user's frequencies over its categories."""
    return {
        name: sum((profile.freq[taxonomy.index(c)] for c in cats), Fraction(0))
        for name, cats in schema.attributes.items()
    }


def type_attribute_profile(
    assignments: dict[str, int],
    profiles: dict[str, UserProfile],
    schema: AttributeSchema,
    taxonomy: Taxonomy,
    r: int,
) -> tuple[list[TypeProfile], tuple[str, ...]]:
    """Mean attribute vector per user type, min-max normalized across types.

    Normalization maps each attribute's smallest type mean to 0 and largest
    to 1.  Empty types are excluded from normalization; attributes whose
    means coincide across all nonempty types are flagged as degenerate.
    Returns (profiles per type, flagged attribute names).
    """
    members: dict[int, list[str]] = {t: [] for t in range(r)}
    for u, t in assignments.items():
        members[int(t)].append(u)
    nonempty = [t for t in range(r) if members[t]]
    if len(nonempty) < 2:
        raise UndefinedResultError("normalization needs at least 2 nonempty types")
    means: dict[int, dict[str, Fraction]] = {}
    for t in nonempty:
        total = {name: Fraction(0) for name in schema.names}
        for u in members[t]:
            vals = attribute_values(profiles[u], schema, taxonomy)
            for name in schema.names:
                total[name] += vals[name]
        means[t] = {name: total[name] / len(members[t]) for name in schema.names}
    flagged = []
    norm: dict[int, dict[str, float | None]] = {t: {} for t in nonempty}
    for name in schema.names:
        vals = [means[t][name] for t in nonempty]
        lo, hi = min(vals), max(vals)
        if lo == hi:
            flagged.append(name)
            for t in nonempty:
                norm[t][name] = None
        else:
            for t in nonempty:
                norm[t][name] = float((means[t][name] - lo) / (hi - lo))
    out = [
        TypeProfile(t, len(members[t]), means[t], norm[t])
        for t in nonempty
    ]
    return out, tuple(flagged)


def type_selfie_profile(
    assignments: dict[str, int],
    profiles: dict[str, UserProfile],
    r: int,
) -> dict[int, dict[str, tuple[float | None, int]]]:
    """Per type, the mean of each selfie measure over members.

    Undefined member values are excluded from the mean; each entry is
    (mean or None, count of defined members).
    """
    members: dict[int, list[str]] = {t: [] for t in range(r)}
    for u, t in assignments.items():
        members[int(t)].append(u)
    out: dict[int, dict[str, tuple[float | None, int]]] = {}
    for t in range(r):
        row = {}
        for name in SelfieMeasures.MEASURE_NAMES:
            vals = [
                float(profiles[u].selfie_measures.as_dict()[name])
                for u in members[t]
                if profiles[u].selfie_measures.as_dict()[name] is not None
            ]
            row[name] = (sum(vals) / len(vals) if vals else None, len(vals))
        out[t] = row
    return out


def attribute_rank(
    type_profiles: list[TypeProfile],
    type_selfie: dict[int, dict[str, tuple[float | None, int]]],
    measure: str,
) -> list[tuple[str, float]]:
    """Attributes ordered by Pearson correlation with a selfie measure.

    Correlation is taken across user types between the normalized
    attribute values and the per-type measure means.  Degenerate
    attributes are skipped; ties break by attribute name.
    """
    if measure not in SelfieMeasures.MEASURE_NAMES:
        raise ValueError(f"unknown measure {measure!r}")
    types = [tp.type_index for tp in type_profiles]
    if len(types) < 3:
        raise ValueError("attribute ranking needs at least 3 types")
    y = []
    for t in types:
        mean, _count = type_selfie[t][measure]
        if mean is None:
            raise UndefinedResultError(f"measure {measure!r} undefined for type {t}")
        y.append(mean)
    if max(y) == min(y):
        raise UndefinedResultError(f"measure {measure!r} has zero variance across types")
    ranked = []
    by_type = {tp.type_index: tp for tp in type_profiles}
    for name in type_profiles[0].normalized:
        xs = [by_type[t].normalized[name] for t in types]
        if any(v is None for v in xs):
            continue
        ranked.append((name, pearson(xs, y)))
    ranked.sort(key=lambda item: (-item[1], item[0]))
    return ranked


def predict_attribute(
    profiles: dict[str, UserProfile],
    attribute: str,
    schema: AttributeSchema,
    taxonomy: Taxonomy,
    q: float = 0.25,
    C: float = 1.0,
    folds: int = 10,
    seed: int = 0,
) -> tuple[CvResult, tuple[str, ...]]:
    """Predict high/low attribute preference from the 7 selfie measures.

    Users with any undefined measure are excluded (returned for audit).
    Labels come from quantile_label on the attribute value.
    """
    if attribute not in schema.attributes:
        raise ValueError(f"unknown attribute {attribute!r}")
    usable = []
    excluded = []
    for u in sorted(profiles):
        measures = profiles[u].selfie_measures.as_dict()
        if any(v is None for v in measures.values()):
            excluded.append(u)
        else:
            usable.append(u)
    values = {
        u: float(attribute_values(profiles[u], schema, taxonomy)[attribute])
        for u in usable
    }
    positive, negative = quantile_label(usable, values, q)
    labeled = list(positive) + list(negative)
    X = np.array([
        [float(profiles[u].selfie_measures.as_dict()[name])
         for name in SelfieMeasures.MEASURE_NAMES]
        for u in labeled
    ])
    y = np.array([1.0] * len(positive) + [-1.0] * len(negative))
    cv = kfold_cv(X, y, folds=folds, C=C, seed=seed)
    return cv, tuple(excluded)
