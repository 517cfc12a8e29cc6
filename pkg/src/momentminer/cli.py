"""Batch pipeline CLI.

Subcommands: synth | cluster | characterize | correlate | tasks |
factorize | report.  Every stage reads its inputs from --out, writes file
artifacts back to it, and is deterministic under a fixed --seed.  Exit
codes: 0 success, 2 missing input, 3 invalid config, 4 undefined result;
failures emit a machine-readable error JSON on stderr.
"""
from __future__ import annotations

import argparse
import csv
import hashlib
import json
import os
import sys
from fractions import Fraction
from pathlib import Path

import numpy as np

from . import charmetrics, cluster, corpus, factorize, learn, stats, synth
from .charmetrics import SelfieMeasures, UserProfile
from .errors import ConfigError, MinerError, UndefinedResultError
from .taxonomy import (
    FULL_CATEGORIES,
    REDUCED_CATEGORIES,
    SELFIE,
    SELFIE_SUBCATEGORIES,
    Taxonomy,
)

SCHEMA_VERSION = 1

EXIT_MISSING_INPUT = 2
EXIT_BAD_CONFIG = 3
EXIT_UNDEFINED = 4


class MissingInputError(MinerError):
    def __init__(self, path):
        super().__init__(f"missing input file: {path}")
        self.path = str(path)


def _load_config(path: str | None) -> dict:
    if path is None:
        return {}
    p = Path(path)
    if not p.exists():
        raise MissingInputError(p)
    try:
        if p.suffix == ".toml":
            try:
                import tomllib
            except ModuleNotFoundError:
                import tomli as tomllib

            with open(p, "rb") as fh:
                return tomllib.load(fh)
        with open(p, "r", encoding="utf-8") as fh:
            return json.load(fh)
    except (json.JSONDecodeError, ValueError) as exc:
        raise ConfigError(f"cannot parse config {p}: {exc}") from exc


def _require(path: Path) -> Path:
    if not path.exists():
        raise MissingInputError(path)
    return path


def _taxonomy_from_config(cfg: dict) -> Taxonomy:
    choice = cfg.get("taxonomy", "reduced")
    if choice == "reduced":
        return Taxonomy(REDUCED_CATEGORIES)
    if choice == "full":
        return Taxonomy(FULL_CATEGORIES)
    if isinstance(choice, (list, tuple)):
        return Taxonomy(tuple(str(c) for c in choice))
    raise ConfigError(f"taxonomy must be 'reduced', 'full', or a list, got {choice!r}")


def _frac_str(v: Fraction | None) -> str | None:
    return None if v is None else str(v)


def _parse_frac(s) -> Fraction | None:
    return None if s is None else Fraction(s)


# ---------------------------------------------------------------------------
# profile (de)serialization
# ---------------------------------------------------------------------------

def profiles_to_json(profiles: dict[str, UserProfile], taxonomy: Taxonomy) -> dict:
    users = {}
    for uid in sorted(profiles):
        p = profiles[uid]
        m = p.selfie_measures
        users[uid] = {
            "freq": [str(v) for v in p.freq],
            "sparse": p.sparse,
            "inertia": _frac_str(p.inertia_feature),
            "singleness": _frac_str(p.singleness_feature),
            "full_freq": [str(v) for v in p.full_freq],
            "measures": {k: _frac_str(v) for k, v in m.as_dict().items()},
            "subcategory_occurrences": m.subcategory_occurrences,
            "face_occurrences": m.face_occurrences,
            "selfie_occurrences": m.selfie_occurrences,
        }
    return {
        "schema_version": SCHEMA_VERSION,
        "taxonomy": list(taxonomy.categories),
        "users": users,
    }


def profiles_from_json(doc: dict) -> tuple[dict[str, UserProfile], Taxonomy]:
    taxonomy = Taxonomy(tuple(doc["taxonomy"]))
    profiles = {}
    for uid, rec in doc["users"].items():
        measures = {k: _parse_frac(v) for k, v in rec["measures"].items()}
        sm = SelfieMeasures(
            subcategory_occurrences=dict(rec["subcategory_occurrences"]),
            face_occurrences=dict(rec["face_occurrences"]),
            selfie_occurrences=int(rec["selfie_occurrences"]),
            **measures,
        )
        profiles[uid] = UserProfile(
            user_id=uid,
            freq=tuple(Fraction(v) for v in rec["freq"]),
            sparse=bool(rec["sparse"]),
            inertia_feature=_parse_frac(rec["inertia"]),
            singleness_feature=_parse_frac(rec["singleness"]),
            selfie_measures=sm,
            full_freq=tuple(Fraction(v) for v in rec["full_freq"]),
        )
    return profiles, taxonomy


def _write_json(path: Path, doc) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(doc, fh, sort_keys=True, indent=1)
        fh.write("\n")


# ---------------------------------------------------------------------------
# subcommands
# ---------------------------------------------------------------------------

def cmd_synth(cfg: dict, seed: int, out: Path) -> list[Path]:
    rule = None
    if "planted_rule" in cfg:
        rule = synth.PlantedRule(
            measure=cfg["planted_rule"]["measure"],
            categories=tuple(cfg["planted_rule"].get("categories", ())),
        )
    categories = cfg.get("categories")
    if categories == "full":
        categories = FULL_CATEGORIES
    elif categories in (None, "reduced"):
        categories = REDUCED_CATEGORIES
    else:
        categories = tuple(str(c) for c in categories)
    scfg = synth.SynthConfig(
        n_users=int(cfg.get("n_users", 40)),
        moments_per_user=tuple(cfg.get("moments_per_user", (12, 24))),
        embedding_dim=int(cfg.get("embedding_dim", 8)),
        categories=categories,
        blob_separation=float(cfg.get("blob_separation", 10.0)),
        blob_spread=float(cfg.get("blob_spread", 1.0)),
        selfie_moment_prob=float(cfg.get("selfie_moment_prob", 0.3)),
        planted_rule=rule,
        seed=seed,
    )
    dataset, truth = synth.generate(scfg)
    corpus.save_dataset(dataset, out / "dataset.jsonl")
    synth.save_ground_truth(truth, out / "groundtruth.jsonl")
    return [out / "dataset.jsonl", out / "groundtruth.jsonl"]


def _majority_merge_map(clustering, ids, truth: synth.GroundTruth) -> dict[int, str]:
    """Label each cluster by the majority true category of its members."""
    votes: dict[int, dict[str, int]] = {}
    for iid, lab in zip(ids, clustering.labels):
        true = truth.image_category[iid]
        votes.setdefault(int(lab), {}).setdefault(true, 0)
        votes[int(lab)][true] += 1
    return {
        j: max(sorted(v), key=lambda c: v[c])
        for j, v in votes.items()
    }


def cmd_cluster(cfg: dict, seed: int, out: Path) -> list[Path]:
    dataset = corpus.load_dataset(_require(out / "dataset.jsonl"))
    taxonomy = _taxonomy_from_config(cfg)
    ids = sorted(dataset.images)
    points = np.array([dataset.images[i].embedding for i in ids])

    truth = None
    truth_path = out / "groundtruth.jsonl"
    if truth_path.exists():
        truth = synth.load_ground_truth(truth_path)

    curve = None
    if "k" in cfg:
        k = int(cfg["k"])
    elif truth is not None:
        k = len(set(truth.image_category.values()))
    elif "k_range" in cfg:
        lo, hi = cfg["k_range"]
        k, curve = cluster.select_k(points, (int(lo), int(hi)), int(cfg.get("k_step", 1)), seed)
    else:
        raise ConfigError("cluster needs 'k', 'k_range', or a ground-truth sidecar")

    clustering = cluster.kmeans(points, k, seed)
    if curve is None:
        score = cluster.simplified_silhouette(points, clustering) if k >= 2 else 0.0
        curve = cluster.SilhouetteCurve(((k, score),))
    with open(out / "silhouette.csv", "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(["k", "score"])
        for kk, s in curve.points:
            w.writerow([kk, repr(s)])

    if "merge_map" in cfg:
        with open(_require(Path(cfg["merge_map"])), "r", encoding="utf-8") as fh:
            raw = json.load(fh)
        merge_map = {int(j): str(lab) for j, lab in raw.items()}
    elif truth is not None:
        merge_map = _majority_merge_map(clustering, ids, truth)
    else:
        raise ConfigError("cluster needs 'merge_map' or a ground-truth sidecar")

    model = cluster.apply_merge_map(clustering, merge_map, taxonomy)
    categorized = cluster.assign_categories(dataset, model)
    assignments = {iid: categorized.images[iid].category for iid in ids}
    corpus.save_assignments(assignments, out / "assignments.jsonl")

    sub_names = tuple(cfg.get("subcategory_names", SELFIE_SUBCATEGORIES))
    subcats, _sub_clustering = cluster.subcluster_selfies(categorized, sub_names, seed)
    _write_json(out / "selfie_subcats.json", subcats)

    face_tags = cluster.split_by_face_count(categorized)
    _write_json(out / "face_split.json", face_tags)

    _write_json(out / "category_model.json", {
        "schema_version": SCHEMA_VERSION,
        "k": k,
        "taxonomy": list(taxonomy.categories),
        "merge_map": {str(j): lab for j, lab in sorted(model.merge_map.items())},
        "centroids": [[repr(float(v)) for v in row] for row in model.centroids],
    })
    return [out / "assignments.jsonl", out / "silhouette.csv",
            out / "selfie_subcats.json", out / "face_split.json",
            out / "category_model.json"]


def cmd_characterize(cfg: dict, seed: int, out: Path) -> list[Path]:
    dataset = corpus.load_dataset(_require(out / "dataset.jsonl"))
    assignments = corpus.load_assignments(_require(out / "assignments.jsonl"))
    with open(_require(out / "selfie_subcats.json"), encoding="utf-8") as fh:
        subcats = json.load(fh)
    with open(_require(out / "face_split.json"), encoding="utf-8") as fh:
        face_tags = json.load(fh)
    with open(_require(out / "category_model.json"), encoding="utf-8") as fh:
        taxonomy = Taxonomy(tuple(json.load(fh)["taxonomy"]))
    dataset = corpus.apply_assignments(dataset, assignments)
    min_occ = int(cfg.get("min_occurrence", 0))
    if min_occ > 0:
        dataset = corpus.filter_users_by_min_occurrence(dataset, min_occ)
    profiles = charmetrics.build_profiles(dataset, taxonomy, subcats, face_tags)
    _write_json(out / "profiles.json", profiles_to_json(profiles, taxonomy))

    with open(out / "profiles.csv", "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        header = (["user_id"] + [f"freq:{c}" for c in taxonomy.categories]
                  + ["inertia", "singleness"] + list(SelfieMeasures.MEASURE_NAMES))
        w.writerow(header)
        for uid in sorted(profiles):
            p = profiles[uid]
            row = [uid] + [repr(float(v)) for v in p.freq]
            row.append("" if p.inertia_feature is None else repr(float(p.inertia_feature)))
            row.append("" if p.singleness_feature is None else repr(float(p.singleness_feature)))
            for name in SelfieMeasures.MEASURE_NAMES:
                v = p.selfie_measures.as_dict()[name]
                row.append("" if v is None else repr(float(v)))
            w.writerow(row)
    return [out / "profiles.json", out / "profiles.csv"]


def _load_profiles(out: Path) -> tuple[dict[str, UserProfile], Taxonomy]:
    with open(_require(out / "profiles.json"), encoding="utf-8") as fh:
        return profiles_from_json(json.load(fh))


def cmd_correlate(cfg: dict, seed: int, out: Path) -> list[Path]:
    profiles, taxonomy = _load_profiles(out)
    matrix = stats.pearson_matrix(profiles, taxonomy)
    with open(out / "correlation.csv", "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(["category"] + list(matrix.labels))
        for i, lab in enumerate(matrix.labels):
            w.writerow([lab] + [repr(float(v)) for v in matrix.values[i]])
        for lab in matrix.excluded:
            w.writerow([lab] + ["excluded:zero-variance"])
    return [out / "correlation.csv"]


_TABLE_FUSIONS = (("F",), ("I",), ("S",), ("F", "I"), ("F", "S"), ("S", "I"), ("F", "S", "I"))


def cmd_tasks(cfg: dict, seed: int, out: Path) -> list[Path]:
    profiles, _taxonomy = _load_profiles(out)
    C = float(cfg.get("C", 1.0))
    q = float(cfg.get("q", 0.25))
    folds = int(cfg.get("folds", 10))
    grid = []
    for task in ("R1", "R2", "R3"):
        grid.extend((task, fusion) for fusion in _TABLE_FUSIONS)
    for task in ("R4", "R5", "R6a", "R6b"):
        grid.append((task, ("F",)))
    rows = []
    detail = {}
    for task, fusion in grid:
        key = f"{task}:{'+'.join(fusion)}"
        try:
            result = learn.run_task(task, fusion, profiles, q=q, C=C, folds=folds, seed=seed)
        except MinerError as exc:
            rows.append([task, "+".join(fusion), "", str(exc)])
            continue
        rows.append([task, "+".join(fusion), repr(result.cv.mean_accuracy), ""])
        detail[key] = {
            "measure": result.labeled.measure,
            "positive": list(result.labeled.positive),
            "negative": list(result.labeled.negative),
            "fold_accuracies": [repr(a) for a in result.cv.fold_accuracies],
            "mean_accuracy": repr(result.cv.mean_accuracy),
            "dropped_users": list(result.dropped_users),
        }
    with open(out / "tasks.csv", "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(["task", "fusion", "mean_accuracy", "note"])
        w.writerows(rows)
    _write_json(out / "tasks_folds.json", {"schema_version": SCHEMA_VERSION, "results": detail})
    return [out / "tasks.csv", out / "tasks_folds.json"]


def _schema_from_config(cfg: dict, taxonomy: Taxonomy) -> factorize.AttributeSchema:
    if "attribute_schema" in cfg:
        with open(_require(Path(cfg["attribute_schema"])), encoding="utf-8") as fh:
            raw = json.load(fh)
        schema = factorize.AttributeSchema({k: tuple(v) for k, v in raw.items()})
    elif set(taxonomy.categories) == set(FULL_CATEGORIES):
        schema = factorize.DEFAULT_SCHEMA
    else:
        schema = factorize.REDUCED_SCHEMA
    return schema.validated(taxonomy)


def cmd_factorize(cfg: dict, seed: int, out: Path) -> list[Path]:
    profiles, taxonomy = _load_profiles(out)
    schema = _schema_from_config(cfg, taxonomy)
    r = int(cfg.get("r", 5))
    users = sorted(profiles)
    V = np.array([[float(v) for v in profiles[u].freq] for u in users])
    model = factorize.nmf(V, r=r, seed=seed)
    types = factorize.assign_user_types(model)
    assignments = {u: int(t) for u, t in zip(users, types)}
    type_profiles, flagged = factorize.type_attribute_profile(
        assignments, profiles, schema, taxonomy, r
    )
    type_selfie = factorize.type_selfie_profile(assignments, profiles, r)

    with open(out / "radar.csv", "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(["type", "members"] + list(schema.names))
        for tp in type_profiles:
            w.writerow([tp.type_index, tp.member_count]
                       + ["" if tp.normalized[n] is None else repr(tp.normalized[n])
                          for n in schema.names])
    with open(out / "selfie_profiles.csv", "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(["type"] + list(SelfieMeasures.MEASURE_NAMES))
        for t in sorted(type_selfie):
            row = [t]
            for name in SelfieMeasures.MEASURE_NAMES:
                mean, _n = type_selfie[t][name]
                row.append("" if mean is None else repr(mean))
            w.writerow(row)
    with open(out / "attribute_rank.csv", "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(["measure", "rank", "attribute", "pearson_r"])
        for name in SelfieMeasures.MEASURE_NAMES:
            try:
                ranking = factorize.attribute_rank(type_profiles, type_selfie, name)
            except (MinerError, ValueError) as exc:
                w.writerow([name, "", "", f"undefined: {exc}"])
                continue
            for rank, (attr, rval) in enumerate(ranking, start=1):
                w.writerow([name, rank, attr, repr(rval)])
    with open(out / "attribute_cv.csv", "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(["attribute", "mean_accuracy", "excluded_users"])
        for attr in schema.names:
            try:
                cv, excluded = factorize.predict_attribute(
                    profiles, attr, schema, taxonomy,
                    q=float(cfg.get("q", 0.25)), C=float(cfg.get("C", 1.0)),
                    folds=int(cfg.get("folds", 10)), seed=seed,
                )
            except MinerError as exc:
                w.writerow([attr, "", f"undefined: {exc}"])
                continue
            w.writerow([attr, repr(cv.mean_accuracy), len(excluded)])
    return [out / "radar.csv", out / "selfie_profiles.csv",
            out / "attribute_rank.csv", out / "attribute_cv.csv"]


_REPORT_FILES = (
    "dataset.jsonl", "groundtruth.jsonl", "assignments.jsonl", "silhouette.csv",
    "selfie_subcats.json", "face_split.json", "category_model.json",
    "profiles.json", "profiles.csv", "correlation.csv", "tasks.csv",
    "tasks_folds.json", "radar.csv", "selfie_profiles.csv",
    "attribute_rank.csv", "attribute_cv.csv",
)


def cmd_report(cfg: dict, seed: int, out: Path) -> list[Path]:
    _require(out / "dataset.jsonl")
    artifacts = {}
    for name in _REPORT_FILES:
        p = out / name
        if not p.exists():
            continue
        digest = hashlib.sha256(p.read_bytes()).hexdigest()
        artifacts[name] = {"sha256": digest, "bytes": p.stat().st_size}
    threads = os.environ.get("MINER_THREADS")
    _write_json(out / "report.json", {
        "schema_version": SCHEMA_VERSION,
        "seed": seed,
        "threads_cap": None if threads is None else int(threads),
        "artifacts": artifacts,
    })
    return [out / "report.json"]


COMMANDS = {
    "synth": cmd_synth,
    "cluster": cmd_cluster,
    "characterize": cmd_characterize,
    "correlate": cmd_correlate,
    "tasks": cmd_tasks,
    "factorize": cmd_factorize,
    "report": cmd_report,
}


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="miner",
        description="Moment-image behaviour mining pipeline (batch, deterministic)",
    )
    parser.add_argument("command", choices=sorted(COMMANDS))
    parser.add_argument("--config", default=None, help="JSON or TOML config file")
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--out", default=".", help="artifact directory")
    args = parser.parse_args(argv)

    out = Path(args.out)
    try:
        config = _load_config(args.config)
        out.mkdir(parents=True, exist_ok=True)
        written = COMMANDS[args.command](config, args.seed, out)
    except MissingInputError as exc:
        json.dump({"error": "missing_input", "path": exc.path}, sys.stderr)
        sys.stderr.write("\n")
        return EXIT_MISSING_INPUT
    except ConfigError as exc:
        json.dump({"error": "bad_config", "detail": str(exc)}, sys.stderr)
        sys.stderr.write("\n")
        return EXIT_BAD_CONFIG
    except UndefinedResultError as exc:
        json.dump({"error": "undefined_result", "detail": str(exc)}, sys.stderr)
        sys.stderr.write("\n")
        return EXIT_UNDEFINED
    for p in written:
        print(p)
    return 0


if __name__ == "__main__":
    sys.exit(main())
