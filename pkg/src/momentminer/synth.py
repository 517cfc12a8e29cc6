"""Synthetic corpus generator with planted ground truth, plus a brute-force
metric oracle.

The generator emits datasets in the corpus JSONL format with embeddings
drawn from well-separated per-category Gaussian blobs.  A planted rule
ties a selfie-posting measure to a set of marker categories: "high" users
draw the measure from a high mode and tilt their category preference
toward the markers, "low" users do the opposite.  The oracle recomputes
every user metric with naive nested loops and exact rationals, sharing no
code with charmetrics.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from .corpus import Dataset, ImageRecord, Moment, _build_dataset
from .errors import ConfigError
from .taxonomy import (
    EXCLUDED,
    FACEMASK_SELFIE,
    HOLDING_SELFIE,
    INDOOR_SELFIE,
    MULTI_FACE,
    ONE_FACE,
    OUTDOOR_SELFIE,
    REDUCED_CATEGORIES,
    SELFIE,
    SELFIE_SUBCATEGORIES,
)

MEASURES = (
    "selfie_frequency",
    "selfie_inertia",
    "selfie_singleness",
    "group_tendency",
    "outdoor_tendency",
    "holding_tendency",
    "facemask_tendency",
)


@dataclass(frozen=True)
class PlantedRule:
    """Tie one selfie measure to a set of marker categories."""

    measure: str
    categories: tuple[str, ...]


@dataclass(frozen=True)
class SynthConfig:
    n_users: int = 40
    moments_per_user: tuple[int, int] = (12, 24)
    images_per_moment: tuple[float, ...] = (
        0.25, 0.20, 0.15, 0.12, 0.10, 0.08, 0.05, 0.03, 0.02,
    )
    embedding_dim: int = 8
    categories: tuple[str, ...] = REDUCED_CATEGORIES
    blob_separation: float = 10.0
    blob_spread: float = 1.0
    selfie_moment_prob: float = 0.3
    planted_rule: PlantedRule | None = None
    seed: int = 0

    def check(self) -> "SynthConfig":
        if self.n_users < 1:
            raise ConfigError("n_users must be positive")
        if self.moments_per_user[0] < 1 or self.moments_per_user[0] > self.moments_per_user[1]:
            raise ConfigError("moments_per_user range is invalid")
        probs = np.asarray(self.images_per_moment, dtype=float)
        if len(probs) != 9 or np.any(probs < 0) or abs(probs.sum() - 1.0) > 1e-9:
            raise ConfigError("images_per_moment must be 9 probabilities summing to 1")
        if not 0.0 <= self.selfie_moment_prob <= 1.0:
            raise ConfigError("selfie_moment_prob must be in [0, 1]")
        if self.planted_rule is not None:
            if self.planted_rule.measure not in MEASURES:
                raise ConfigError(f"unknown planted measure {self.planted_rule.measure!r}")
            unknown = [c for c in self.planted_rule.categories if c not in self.categories]
            if unknown:
                raise ConfigError(f"planted categories not in taxonomy: {unknown}")
        if SELFIE in self.categories or set(self.categories) & set(SELFIE_SUBCATEGORIES):
            raise ConfigError("config categories must be non-selfie labels")
        return self


@dataclass(frozen=True)
class GroundTruth:
    user_group: dict[str, str]        # high | low | none
    image_category: dict[str, str]    # fine label: subcategory name for selfies
    blob_centers: dict[str, tuple[float, ...]] = field(default_factory=dict)

    def subcategories(self) -> dict[str, str]:
        return {
            iid: c for iid, c in self.image_category.items()
            if c in SELFIE_SUBCATEGORIES
        }


_BASE_SUBCAT_PROBS = {
    INDOOR_SELFIE: 0.40,
    OUTDOOR_SELFIE: 0.20,
    HOLDING_SELFIE: 0.20,
    FACEMASK_SELFIE: 0.20,
}

_TENDENCY_TARGET = {
    "outdoor_tendency": OUTDOOR_SELFIE,
    "holding_tendency": HOLDING_SELFIE,
    "facemask_tendency": FACEMASK_SELFIE,
}


def _user_params(rule: PlantedRule | None, group: str, cfg: SynthConfig,
                 rng: np.random.Generator) -> dict:
    """Per-user sampling parameters, shifted by the planted rule."""
    n_cats = len(cfg.categories)
    alpha = np.full(n_cats, 2.0)
    params = {
        "selfie_prob": cfg.selfie_moment_prob,
        "subcat_probs": dict(_BASE_SUBCAT_PROBS),
        "multi_face_prob": 0.15,
        "selfie_imgs": (1, 3),
        "selfie_only_prob": 0.3,
    }
    if rule is not None:
        marker = [i for i, c in enumerate(cfg.categories) if c in rule.categories]
        if group == "high":
            alpha[:] = 0.8
            alpha[marker] = 12.0
        else:
            alpha[:] = 2.0
            alpha[marker] = 0.2
        m = rule.measure
        if m == "selfie_frequency":
            params["selfie_prob"] = 0.65 if group == "high" else 0.08
        elif m == "selfie_inertia":
            params["selfie_imgs"] = (5, 9) if group == "high" else (1, 1)
        elif m == "selfie_singleness":
            params["selfie_only_prob"] = 0.9 if group == "high" else 0.0
        elif m == "group_tendency":
            params["multi_face_prob"] = 0.85 if group == "high" else 0.05
        elif m in _TENDENCY_TARGET:
            target = _TENDENCY_TARGET[m]
            probs = {c: 0.1 for c in _BASE_SUBCAT_PROBS}
            if group == "high":
                probs[target] = 0.70
                probs[INDOOR_SELFIE] = 0.10
            else:
                probs[target] = 0.05
                probs[INDOOR_SELFIE] = 0.65
            rest = 1.0 - probs[target] - probs[INDOOR_SELFIE]
            others = [c for c in _BASE_SUBCAT_PROBS if c not in (target, INDOOR_SELFIE)]
            for c in others:
                probs[c] = rest / len(others)
            params["subcat_probs"] = probs
    params["cat_pref"] = rng.dirichlet(alpha)
    return params


def _blob_centers(labels, cfg: SynthConfig, rng: np.random.Generator) -> dict[str, np.ndarray]:
    """Random centers with pairwise distance >= separation * spread."""
    min_dist = cfg.blob_separation * cfg.blob_spread
    centers: list[np.ndarray] = []
    for _ in labels:
        for _attempt in range(1000):
            c = rng.normal(0.0, min_dist, cfg.embedding_dim)
            if all(np.linalg.norm(c - prev) >= min_dist for prev in centers):
                centers.append(c)
                break
        else:
            raise ConfigError("could not place separated blob centers; raise embedding_dim")
    return dict(zip(labels, centers))


def generate(cfg: SynthConfig) -> tuple[Dataset, GroundTruth]:
    """Generate a categorized dataset and its planted ground truth.

    Deterministic under cfg.seed: the same config yields byte-identical
    JSONL after save_dataset.  Image categories are the true super-level
    labels (subcategory detail lives in the ground truth).
    """
    cfg.check()
    rng = np.random.default_rng(cfg.seed)
    fine_labels = tuple(cfg.categories) + SELFIE_SUBCATEGORIES
    centers = _blob_centers(fine_labels, cfg, rng)
    subcat_names = list(SELFIE_SUBCATEGORIES)

    moments: dict[str, Moment] = {}
    images: dict[str, ImageRecord] = {}
    user_group: dict[str, str] = {}
    image_category: dict[str, str] = {}

    for ui in range(cfg.n_users):
        uid = f"u{ui:03d}"
        group = "none"
        if cfg.planted_rule is not None:
            group = "high" if rng.random() < 0.5 else "low"
        user_group[uid] = group
        params = _user_params(cfg.planted_rule, group, cfg, rng)
        n_moments = int(rng.integers(cfg.moments_per_user[0], cfg.moments_per_user[1] + 1))
        for mi in range(n_moments):
            mid = f"{uid}-m{mi:03d}"
            n_img = int(rng.choice(9, p=cfg.images_per_moment)) + 1
            fine: list[str] = []
            if rng.random() < params["selfie_prob"]:
                if rng.random() < params["selfie_only_prob"]:
                    n_selfie = n_img
                else:
                    lo, hi = params["selfie_imgs"]
                    n_selfie = min(n_img, int(rng.integers(lo, hi + 1)))
                sub_p = [params["subcat_probs"][c] for c in subcat_names]
                for _ in range(n_selfie):
                    fine.append(subcat_names[int(rng.choice(4, p=sub_p))])
            for _ in range(n_img - len(fine)):
                fine.append(cfg.categories[int(rng.choice(len(cfg.categories), p=params["cat_pref"]))])
            image_ids = []
            for ii, label in enumerate(fine):
                iid = f"{mid}-i{ii}"
                emb = centers[label] + rng.normal(0.0, cfg.blob_spread, cfg.embedding_dim)
                is_selfie = label in SELFIE_SUBCATEGORIES
                face_count = None
                if is_selfie:
                    if rng.random() < params["multi_face_prob"]:
                        face_count = 2 + int(rng.integers(3))
                    else:
                        face_count = 1
                images[iid] = ImageRecord(
                    image_id=iid,
                    user_id=uid,
                    moment_id=mid,
                    embedding=tuple(float(v) for v in emb),
                    face_count=face_count,
                    category=SELFIE if is_selfie else label,
                )
                image_category[iid] = label
                image_ids.append(iid)
            moments[mid] = Moment(mid, uid, tuple(image_ids))

    dataset = _build_dataset(cfg.embedding_dim, moments, images)
    truth = GroundTruth(
        user_group,
        image_category,
        {k: tuple(float(x) for x in v) for k, v in centers.items()},
    )
    return dataset, truth


def face_tags_from_counts(d: Dataset) -> dict[str, str]:
    """Face-split tags for selfie images, derived from their face counts."""
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


def save_ground_truth(truth: GroundTruth, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for uid in sorted(truth.user_group):
            fh.write(json.dumps({"kind": "truth_user", "user_id": uid,
                                 "group": truth.user_group[uid]}) + "\n")
        for iid in sorted(truth.image_category):
            fh.write(json.dumps({"kind": "truth_image", "image_id": iid,
                                 "category": truth.image_category[iid]}) + "\n")


def load_ground_truth(path) -> GroundTruth:
    user_group: dict[str, str] = {}
    image_category: dict[str, str] = {}
    with open(path, "r", encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if not line:
                continue
            rec = json.loads(line)
            if rec["kind"] == "truth_user":
                user_group[rec["user_id"]] = rec["group"]
            elif rec["kind"] == "truth_image":
                image_category[rec["image_id"]] = rec["category"]
    return GroundTruth(user_group, image_category)


# ---------------------------------------------------------------------------
# Brute-force oracle.  Deliberately naive and independent of charmetrics:
# every quantity is recounted from raw moments with explicit loops and
# Fraction arithmetic so that equality against charmetrics is meaningful.
# ---------------------------------------------------------------------------

def oracle_metrics(
    d: Dataset,
    subcategories: dict[str, str] | None = None,
    face_tags: dict[str, str] | None = None,
) -> dict[str, dict]:
    """Exact per-user occurrence/frequency/inertia/singleness tables.

    Returns, per user: occurrence counts, frequencies (all categories
    including Selfie), per-category inertia and singleness, the F vector
    (as a category->Fraction dict), I and S scalars, and the seven selfie
    measures.  Undefined quantities are None.
    """
    subcategories = subcategories or {}
    face_tags = face_tags or {}
    results: dict[str, dict] = {}
    for uid in d.users:
        user_moment_cats: list[list[str]] = []
        user_moment_ids: list[list[str]] = []
        for mid in sorted(d.moments):
            moment = d.moments[mid]
            if moment.user_id != uid:
                continue
            cats = []
            iids = []
            for iid in moment.image_ids:
                cats.append(d.images[iid].category)
                iids.append(iid)
            user_moment_cats.append(cats)
            user_moment_ids.append(iids)

        occurrence: dict[str, int] = {}
        image_count: dict[str, int] = {}
        only_count: dict[str, int] = {}
        for cats in user_moment_cats:
            present = []
            for c in cats:
                if c not in present:
                    present.append(c)
            for c in present:
                occurrence[c] = occurrence.get(c, 0) + 1
                if len(present) == 1:
                    only_count[c] = only_count.get(c, 0) + 1
            for c in cats:
                image_count[c] = image_count.get(c, 0) + 1

        total_occ = 0
        for c in occurrence:
            total_occ += occurrence[c]
        frequency = {c: Fraction(occurrence[c], total_occ) for c in occurrence}
        inertia = {c: Fraction(image_count[c], occurrence[c]) for c in occurrence}
        singleness = {c: Fraction(only_count.get(c, 0), occurrence[c]) for c in occurrence}

        nonselfie_occ = 0
        for c in occurrence:
            if c != SELFIE:
                nonselfie_occ += occurrence[c]
        if nonselfie_occ == 0:
            f_vec = {}
            i_val = None
        else:
            f_vec = {
                c: Fraction(occurrence[c], nonselfie_occ)
                for c in occurrence if c != SELFIE
            }
            nonselfie_imgs = 0
            for c in image_count:
                if c != SELFIE:
                    nonselfie_imgs += image_count[c]
            i_val = Fraction(nonselfie_imgs, nonselfie_occ)

        selfie_free = 0
        selfie_free_single = 0
        for cats in user_moment_cats:
            if SELFIE in cats:
                continue
            selfie_free += 1
            distinct = []
            for c in cats:
                if c not in distinct:
                    distinct.append(c)
            if len(distinct) == 1:
                selfie_free_single += 1
        s_val = Fraction(selfie_free_single, selfie_free) if selfie_free else None

        selfie_occ = occurrence.get(SELFIE, 0)
        selfie_imgs = image_count.get(SELFIE, 0)
        selfie_only = only_count.get(SELFIE, 0)
        sub_occ = {c: 0 for c in SELFIE_SUBCATEGORIES}
        one_face_occ = 0
        multi_face_occ = 0
        for cats, iids in zip(user_moment_cats, user_moment_ids):
            subs_here: list[str] = []
            tags_here: list[str] = []
            for c, iid in zip(cats, iids):
                if c != SELFIE:
                    continue
                sub = subcategories.get(iid)
                if sub is not None and sub not in subs_here:
                    subs_here.append(sub)
                tag = face_tags.get(iid)
                if tag in (ONE_FACE, MULTI_FACE) and tag not in tags_here:
                    tags_here.append(tag)
            for sub in subs_here:
                if sub in sub_occ:
                    sub_occ[sub] += 1
            if ONE_FACE in tags_here:
                one_face_occ += 1
            if MULTI_FACE in tags_here:
                multi_face_occ += 1

        def ratio(num, den):
            return Fraction(num, den) if den else None

        measures = {
            "selfie_frequency": ratio(selfie_occ, total_occ),
            "selfie_inertia": ratio(selfie_imgs, selfie_occ),
            "selfie_singleness": ratio(selfie_only, selfie_occ),
            "group_tendency": ratio(multi_face_occ, one_face_occ + multi_face_occ),
            "outdoor_tendency": ratio(
                sub_occ[OUTDOOR_SELFIE], sub_occ[OUTDOOR_SELFIE] + sub_occ[INDOOR_SELFIE]
            ),
            "holding_tendency": ratio(
                sub_occ[HOLDING_SELFIE], sub_occ[HOLDING_SELFIE] + sub_occ[INDOOR_SELFIE]
            ),
            "facemask_tendency": ratio(
                sub_occ[FACEMASK_SELFIE], sub_occ[FACEMASK_SELFIE] + sub_occ[INDOOR_SELFIE]
            ),
        }
        results[uid] = {
            "occurrence": occurrence,
            "frequency": frequency,
            "inertia": inertia,
            "singleness": singleness,
            "f": f_vec,
            "i": i_val,
            "s": s_val,
            "measures": measures,
        }
    return results
