"""Per-user posting metrics: occurrence, frequency, inertia, singleness,
the F/I/S feature vector and the seven selfie-posting measures.

An occurrence of a category is its presence in a moment, counted once per
moment regardless of image multiplicity.  All metrics are exact integer
ratios (fractions.Fraction) internally; callers convert to floats at the
boundary.  A zero denominator yields an explicit undefined value (None),
never 0.
"""
from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction

from .corpus import Dataset, Moment
from .errors import PreconditionError, UndefinedResultError
from .taxonomy import (
    FACEMASK_SELFIE,
    HOLDING_SELFIE,
    INDOOR_SELFIE,
    MULTI_FACE,
    ONE_FACE,
    OUTDOOR_SELFIE,
    SELFIE,
    Taxonomy,
)


@dataclass(frozen=True)
class SelfieMeasures:
    selfie_frequency: Fraction | None
    selfie_inertia: Fraction | None
    selfie_singleness: Fraction | None
    group_tendency: Fraction | None
    outdoor_tendency: Fraction | None
    holding_tendency: Fraction | None
    facemask_tendency: Fraction | None
    subcategory_occurrences: dict[str, int]
    face_occurrences: dict[str, int]
    selfie_occurrences: int

    MEASURE_NAMES = (
        "selfie_frequency",
        "selfie_inertia",
        "selfie_singleness",
        "group_tendency",
        "outdoor_tendency",
        "holding_tendency",
        "facemask_tendency",
    )

    def as_dict(self) -> dict[str, Fraction | None]:
        return {name: getattr(self, name) for name in self.MEASURE_NAMES}


@dataclass(frozen=True)
class UserProfile:
    user_id: str
    freq: tuple[Fraction, ...]                 # F-feature over taxonomy.categories
    sparse: bool                               # True when the user has no non-selfie occurrence
    inertia_feature: Fraction | None           # I-feature, >= 1 when defined
    singleness_feature: Fraction | None        # S-feature, in [0, 1] when defined
    selfie_measures: SelfieMeasures
    full_freq: tuple[Fraction, ...]            # frequencies over categories + Selfie, all moments


def _moment_categories(d: Dataset, m: Moment) -> list[str]:
    cats = []
    for iid in m.image_ids:
        c = d.images[iid].category
        if c is None:
            raise PreconditionError(f"image {iid} in moment {m.moment_id} is uncategorized")
        cats.append(c)
    return cats


def occurrences(d: Dataset, m: Moment) -> set[str]:
    """Categories occurring in a moment (each counted once)."""
    return set(_moment_categories(d, m))


def _occurrence_counts(d: Dataset, user_id: str) -> dict[str, int]:
    counts: dict[str, int] = {}
    for m in d.user_moments(user_id):
        for c in occurrences(d, m):
            counts[c] = counts.get(c, 0) + 1
    return counts


def category_frequency(d: Dataset, user_id: str, include_selfie: bool = True) -> dict[str, Fraction]:
    """Share of the user's occurrences belonging to each category.

    With include_selfie=False, selfie images are removed first and the
    shares are taken over non-selfie categories only.
    """
    counts = _occurrence_counts(d, user_id)
    if not include_selfie:
        counts.pop(SELFIE, None)
    total = sum(counts.values())
    if total == 0:
        raise UndefinedResultError(f"user {user_id} has no occurrences under this filter")
    return {c: Fraction(n, total) for c, n in counts.items()}


def category_inertia(d: Dataset, user_id: str, category: str) -> Fraction:
    """Images of the category divided by its occurrence count; >= 1."""
    occ = 0
    imgs = 0
    for m in d.user_moments(user_id):
        cats = _moment_categories(d, m)
        if category in cats:
            occ += 1
        imgs += sum(1 for c in cats if c == category)
    if occ == 0:
        raise UndefinedResultError(f"category {category!r} never occurs for user {user_id}")
    return Fraction(imgs, occ)


def category_singleness(d: Dataset, user_id: str, category: str) -> Fraction:
    """Fraction of the category's moments that contain only that category."""
    with_cat = 0
    only_cat = 0
    for m in d.user_moments(user_id):
        cats = occurrences(d, m)
        if category in cats:
            with_cat += 1
            if cats == {category}:
                only_cat += 1
    if with_cat == 0:
        raise UndefinedResultError(f"category {category!r} never occurs for user {user_id}")
    return Fraction(only_cat, with_cat)


def f_feature(d: Dataset, user_id: str, taxonomy: Taxonomy) -> tuple[tuple[Fraction, ...], bool]:
    """Frequency vector over non-selfie categories, selfie images removed.

    Returns (vector, sparse): an all-selfie user gets an all-zero vector
    with the sparse flag set instead of an error.
    """
    counts = _occurrence_counts(d, user_id)
    counts.pop(SELFIE, None)
    total = sum(counts.values())
    if total == 0:
        return tuple(Fraction(0) for _ in taxonomy.categories), True
    return tuple(Fraction(counts.get(c, 0), total) for c in taxonomy.categories), False


def i_feature(d: Dataset, user_id: str) -> Fraction:
    """Non-selfie images divided by non-selfie occurrences; >= 1."""
    occ = 0
    imgs = 0
    for m in d.user_moments(user_id):
        cats = _moment_categories(d, m)
        occ += len({c for c in cats if c != SELFIE})
        imgs += sum(1 for c in cats if c != SELFIE)
    if occ == 0:
        raise UndefinedResultError(f"user {user_id} has no non-selfie occurrences")
    return Fraction(imgs, occ)


def s_feature(d: Dataset, user_id: str) -> Fraction:
    """Single-category share of the user's selfie-free moments."""
    selfie_free = 0
    single = 0
    for m in d.user_moments(user_id):
        cats = occurrences(d, m)
        if SELFIE in cats:
            continue
        selfie_free += 1
        if len(cats) == 1:
            single += 1
    if selfie_free == 0:
        raise UndefinedResultError(f"user {user_id} has no selfie-free moments")
    return Fraction(single, selfie_free)


def _ratio(num: int, den: int) -> Fraction | None:
    return None if den == 0 else Fraction(num, den)


def selfie_measures(
    d: Dataset,
    user_id: str,
    subcategories: dict[str, str],
    face_tags: dict[str, str],
) -> SelfieMeasures:
    """The seven selfie-posting measures for one user.

    `subcategories` maps selfie image ids to their subcategory label and
    `face_tags` to one-face/multi-face/excluded.  Tendency numerators and
    denominators count occurrences at moment level.
    """
    counts = _occurrence_counts(d, user_id)
    total = sum(counts.values())
    selfie_occ = counts.get(SELFIE, 0)

    selfie_imgs = 0
    selfie_only = 0
    sub_occ = {c: 0 for c in (INDOOR_SELFIE, OUTDOOR_SELFIE, HOLDING_SELFIE, FACEMASK_SELFIE)}
    face_occ = {ONE_FACE: 0, MULTI_FACE: 0}
    for m in d.user_moments(user_id):
        cats = occurrences(d, m)
        if SELFIE not in cats:
            continue
        if cats == {SELFIE}:
            selfie_only += 1
        subs_here = set()
        faces_here = set()
        for iid in m.image_ids:
            if d.images[iid].category != SELFIE:
                continue
            selfie_imgs += 1
            sub = subcategories.get(iid)
            if sub is not None:
                subs_here.add(sub)
            tag = face_tags.get(iid)
            if tag in face_occ:
                faces_here.add(tag)
        for sub in subs_here:
            if sub in sub_occ:
                sub_occ[sub] += 1
        for tag in faces_here:
            face_occ[tag] += 1

    indoor = sub_occ[INDOOR_SELFIE]
    return SelfieMeasures(
        selfie_frequency=_ratio(selfie_occ, total),
        selfie_inertia=_ratio(selfie_imgs, selfie_occ),
        selfie_singleness=_ratio(selfie_only, selfie_occ),
        group_tendency=_ratio(face_occ[MULTI_FACE], face_occ[ONE_FACE] + face_occ[MULTI_FACE]),
        outdoor_tendency=_ratio(sub_occ[OUTDOOR_SELFIE], sub_occ[OUTDOOR_SELFIE] + indoor),
        holding_tendency=_ratio(sub_occ[HOLDING_SELFIE], sub_occ[HOLDING_SELFIE] + indoor),
        facemask_tendency=_ratio(sub_occ[FACEMASK_SELFIE], sub_occ[FACEMASK_SELFIE] + indoor),
        subcategory_occurrences=dict(sub_occ),
        face_occurrences=dict(face_occ),
        selfie_occurrences=selfie_occ,
    )


def build_profile(
    d: Dataset,
    user_id: str,
    taxonomy: Taxonomy,
    subcategories: dict[str, str] | None = None,
    face_tags: dict[str, str] | None = None,
) -> UserProfile:
    freq, sparse = f_feature(d, user_id, taxonomy)
    try:
        inertia = i_feature(d, user_id)
    except UndefinedResultError:
        inertia = None
    try:
        singleness = s_feature(d, user_id)
    except UndefinedResultError:
        singleness = None
    counts = _occurrence_counts(d, user_id)
    total = sum(counts.values())
    full = tuple(
        Fraction(counts.get(c, 0), total) if total else Fraction(0)
        for c in taxonomy.all_labels
    )
    measures = selfie_measures(d, user_id, subcategories or {}, face_tags or {})
    return UserProfile(user_id, freq, sparse, inertia, singleness, measures, full)


def build_profiles(
    d: Dataset,
    taxonomy: Taxonomy,
    subcategories: dict[str, str] | None = None,
    face_tags: dict[str, str] | None = None,
) -> dict[str, UserProfile]:
    """Profiles for every user in the dataset, keyed by user id."""
    return {
        u: build_profile(d, u, taxonomy, subcategories, face_tags) for u in d.users
    }
