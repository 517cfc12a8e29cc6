"""Shared fixtures: hand-built datasets with known category layouts."""
from __future__ import annotations

import pytest

from momentminer.corpus import Dataset, ImageRecord, Moment, _build_dataset
from momentminer.taxonomy import SELFIE, Taxonomy


def make_dataset(moments_spec, dim: int = 2, face_counts=None) -> Dataset:
    """Build a categorized Dataset from [(user_id, [category, ...]), ...].

    Moment and image ids are generated in order; embeddings are zeros.
    face_counts, when given, maps image ids to face counts.
    """
    face_counts = face_counts or {}
    moments = {}
    images = {}
    per_user_counter: dict[str, int] = {}
    for user_id, cats in moments_spec:
        mi = per_user_counter.get(user_id, 0)
        per_user_counter[user_id] = mi + 1
        mid = f"{user_id}-m{mi}"
        image_ids = []
        for ii, cat in enumerate(cats):
            iid = f"{mid}-i{ii}"
            images[iid] = ImageRecord(
                image_id=iid,
                user_id=user_id,
                moment_id=mid,
                embedding=(0.0,) * dim,
                face_count=face_counts.get(iid),
                category=cat,
            )
            image_ids.append(iid)
        moments[mid] = Moment(mid, user_id, tuple(image_ids))
    return _build_dataset(dim, moments, images)


@pytest.fixture
def u1_dataset() -> Dataset:
    """One user, three moments: [selfie, meal], [meal, meal], [flower]."""
    return make_dataset([
        ("u1", [SELFIE, "Meal"]),
        ("u1", ["Meal", "Meal"]),
        ("u1", ["Flower"]),
    ])


@pytest.fixture
def u1_taxonomy() -> Taxonomy:
    return Taxonomy(("Meal", "Flower"))
