"""Dataset model, JSONL ingestion/serialization, validation, sparsity filter.

A dataset is one JSONL file: a header line declaring the embedding
dimension, then moment and image records in any order.  Category
assignments live in a sidecar JSONL so the raw corpus file never changes.
Datasets are immutable after load; every operation returns a new one.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field, replace

from .errors import ParseError, PreconditionError, SchemaError

MAX_MOMENT_IMAGES = 9


@dataclass(frozen=True)
class ImageRecord:
    image_id: str
    user_id: str
    moment_id: str
    embedding: tuple[float, ...]
    face_count: int | None = None
    category: str | None = None


@dataclass(frozen=True)
class Moment:
    moment_id: str
    user_id: str
    image_ids: tuple[str, ...]
    timestamp: str | None = None


@dataclass(frozen=True)
class Dataset:
    embedding_dim: int
    users: tuple[str, ...]
    moments: dict[str, Moment]
    images: dict[str, ImageRecord]

    def user_moments(self, user_id: str) -> list[Moment]:
        """Moments of one user, ordered by moment id."""
        return [m for mid, m in sorted(self.moments.items()) if m.user_id == user_id]

    def moment_images(self, moment: Moment) -> list[ImageRecord]:
        return [self.images[iid] for iid in moment.image_ids]

    @property
    def categorized(self) -> bool:
        return all(img.category is not None for img in self.images.values())


@dataclass(frozen=True)
class ValidationReport:
    errors: tuple[str, ...] = ()
    warnings: tuple[str, ...] = ()

    @property
    def ok(self) -> bool:
        return not self.errors


def _build_dataset(embedding_dim, moments, images) -> Dataset:
    """Cross-check the reference graph and assemble an immutable Dataset."""
    for img in images.values():
        if len(img.embedding) != embedding_dim:
            raise SchemaError(
                f"image {img.image_id}: embedding length {len(img.embedding)} "
                f"!= declared dimension {embedding_dim}"
            )
        m = moments.get(img.moment_id)
        if m is None:
            raise SchemaError(
                f"image {img.image_id} references absent moment {img.moment_id}"
            )
        if img.image_id not in m.image_ids:
            raise SchemaError(
                f"image {img.image_id} not listed by its moment {img.moment_id}"
            )
        if img.user_id != m.user_id:
            raise SchemaError(
                f"image {img.image_id} user {img.user_id} != moment user {m.user_id}"
            )
    owner = {}
    for m in moments.values():
        if not m.image_ids:
            raise SchemaError(f"moment {m.moment_id} has no images")
        for iid in m.image_ids:
            if iid not in images:
                raise SchemaError(
                    f"moment {m.moment_id} references absent image {iid}"
                )
            if iid in owner:
                raise SchemaError(
                    f"image {iid} listed by moments {owner[iid]} and {m.moment_id}"
                )
            owner[iid] = m.moment_id
    users = tuple(sorted({m.user_id for m in moments.values()}))
    return Dataset(embedding_dim, users, dict(moments), dict(images))


def load_dataset(path) -> Dataset:
    """Parse a corpus JSONL file into a Dataset.

    Raises ParseError (with line number) on malformed lines and
    SchemaError on dimension mismatches or dangling references.
    """
    moments: dict[str, Moment] = {}
    images: dict[str, ImageRecord] = {}
    embedding_dim = None
    with open(path, "r", encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                rec = json.loads(line)
            except json.JSONDecodeError as exc:
                raise ParseError(line_no, f"invalid JSON ({exc.msg})") from exc
            if not isinstance(rec, dict) or "kind" not in rec:
                raise ParseError(line_no, "record must be an object with a 'kind'")
            kind = rec["kind"]
            try:
                if kind == "header":
                    embedding_dim = int(rec["embedding_dim"])
                    if embedding_dim <= 0:
                        raise ParseError(line_no, "embedding_dim must be positive")
                elif kind == "moment":
                    m = Moment(
                        moment_id=str(rec["moment_id"]),
                        user_id=str(rec["user_id"]),
                        image_ids=tuple(str(i) for i in rec["image_ids"]),
                        timestamp=rec.get("timestamp"),
                    )
                    moments[m.moment_id] = m
                elif kind == "image":
                    fc = rec.get("face_count")
                    img = ImageRecord(
                        image_id=str(rec["image_id"]),
                        user_id=str(rec["user_id"]),
                        moment_id=str(rec["moment_id"]),
                        embedding=tuple(float(v) for v in rec["embedding"]),
                        face_count=None if fc is None else int(fc),
                    )
                    images[img.image_id] = img
                else:
                    raise ParseError(line_no, f"unknown record kind {kind!r}")
            except (KeyError, TypeError, ValueError) as exc:
                raise ParseError(line_no, f"bad {kind} record: {exc}") from exc
    if embedding_dim is None:
        raise SchemaError("missing header record with embedding_dim")
    return _build_dataset(embedding_dim, moments, images)


def save_dataset(d: Dataset, path) -> None:
    """Write a Dataset back to corpus JSONL, deterministically ordered."""
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(json.dumps({"kind": "header", "embedding_dim": d.embedding_dim}) + "\n")
        for mid in sorted(d.moments):
            m = d.moments[mid]
            rec = {
                "kind": "moment",
                "moment_id": m.moment_id,
                "user_id": m.user_id,
                "image_ids": list(m.image_ids),
            }
            if m.timestamp is not None:
                rec["timestamp"] = m.timestamp
            fh.write(json.dumps(rec) + "\n")
        for iid in sorted(d.images):
            img = d.images[iid]
            rec = {
                "kind": "image",
                "image_id": img.image_id,
                "user_id": img.user_id,
                "moment_id": img.moment_id,
                "embedding": list(img.embedding),
            }
            if img.face_count is not None:
                rec["face_count"] = img.face_count
            fh.write(json.dumps(rec) + "\n")


def save_assignments(assignments: dict[str, str], path) -> None:
    """Write image->category assignments to a sidecar JSONL."""
    with open(path, "w", encoding="utf-8") as fh:
        for iid in sorted(assignments):
            fh.write(
                json.dumps(
                    {"kind": "assignment", "image_id": iid, "category": assignments[iid]}
                )
                + "\n"
            )


def load_assignments(path) -> dict[str, str]:
    out: dict[str, str] = {}
    with open(path, "r", encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                rec = json.loads(line)
            except json.JSONDecodeError as exc:
                raise ParseError(line_no, f"invalid JSON ({exc.msg})") from exc
            if rec.get("kind") != "assignment":
                raise ParseError(line_no, "expected an assignment record")
            out[str(rec["image_id"])] = str(rec["category"])
    return out


def apply_assignments(d: Dataset, assignments: dict[str, str]) -> Dataset:
    """Return a new Dataset whose images carry the given category labels."""
    missing = sorted(set(d.images) - set(assignments))
    if missing:
        raise SchemaError(f"no category assigned for image {missing[0]}")
    images = {
        iid: replace(img, category=assignments[iid]) for iid, img in d.images.items()
    }
    return Dataset(d.embedding_dim, d.users, dict(d.moments), images)


def validate(d: Dataset) -> ValidationReport:
    """List every invariant violation; violations are data, not failures."""
    errors: list[str] = []
    warnings: list[str] = []
    owner: dict[str, list[str]] = {}
    for mid in sorted(d.moments):
        m = d.moments[mid]
        if not m.image_ids:
            errors.append(f"moment {mid}: no images")
        if len(m.image_ids) > MAX_MOMENT_IMAGES:
            warnings.append(f"moment {mid}: {len(m.image_ids)} images (platform max 9)")
        for iid in m.image_ids:
            owner.setdefault(iid, []).append(mid)
            if iid not in d.images:
                errors.append(f"moment {mid}: dangling image id {iid}")
            elif d.images[iid].user_id != m.user_id:
                errors.append(f"moment {mid}: image {iid} belongs to a different user")
    for iid in sorted(d.images):
        img = d.images[iid]
        if len(img.embedding) != d.embedding_dim:
            errors.append(
                f"image {iid}: embedding length {len(img.embedding)} != {d.embedding_dim}"
            )
        if img.moment_id not in d.moments:
            errors.append(f"image {iid}: dangling moment id {img.moment_id}")
        owners = owner.get(iid, [])
        if len(owners) == 0:
            errors.append(f"image {iid}: not listed by any moment")
        elif len(owners) > 1:
            errors.append(f"image {iid}: listed by multiple moments {owners}")
        if img.face_count is not None and img.face_count < 0:
            errors.append(f"image {iid}: negative face_count")
        if img.face_count is None:
            warnings.append(f"image {iid}: missing face_count")
    return ValidationReport(tuple(errors), tuple(warnings))


def user_occurrence_total(d: Dataset, user_id: str) -> int:
    """Total category-occurrence count over the user's moments.

    Each category present in a moment counts once for that moment,
    regardless of image multiplicity.
    """
    total = 0
    for m in d.user_moments(user_id):
        cats = {d.images[iid].category for iid in m.image_ids}
        if None in cats:
            raise PreconditionError(f"moment {m.moment_id} has uncategorized images")
        total += len(cats)
    return total


def filter_users_by_min_occurrence(d: Dataset, threshold: int = 50) -> Dataset:
    """Drop users whose total category-occurrence count is below threshold.

    The comparison is strict: a user with exactly `threshold` occurrences
    is retained.  The input dataset is not modified.
    """
    if not d.categorized:
        raise PreconditionError("all images must be categorized before filtering")
    keep = {u for u in d.users if user_occurrence_total(d, u) >= threshold}
    moments = {mid: m for mid, m in d.moments.items() if m.user_id in keep}
    images = {iid: im for iid, im in d.images.items() if im.user_id in keep}
    return Dataset(d.embedding_dim, tuple(sorted(keep)), moments, images)
