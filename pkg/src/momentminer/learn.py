"""Quantile labeling, task filters, linear SVM trained by SMO, stratified
10-fold cross-validation, and the R1-R6 task harness with feature fusion.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .charmetrics import UserProfile
from .errors import PreconditionError, UndefinedResultError
from .taxonomy import (
    FACEMASK_SELFIE,
    HOLDING_SELFIE,
    INDOOR_SELFIE,
    MULTI_FACE,
    ONE_FACE,
    OUTDOOR_SELFIE,
)

TASKS = ("R1", "R2", "R3", "R4", "R5", "R6a", "R6b")

TASK_MEASURES = {
    "R1": "selfie_frequency",
    "R2": "selfie_inertia",
    "R3": "selfie_singleness",
    "R4": "group_tendency",
    "R5": "outdoor_tendency",
    "R6a": "holding_tendency",
    "R6b": "facemask_tendency",
}

FUSION_BLOCKS = ("F", "I", "S")


@dataclass(frozen=True)
class LabeledTask:
    task: str
    measure: str
    positive: tuple[str, ...]
    negative: tuple[str, ...]
    fusion: tuple[str, ...]


@dataclass(frozen=True)
class SvmModel:
    w: np.ndarray
    b: float
    C: float
    tol: float
    max_passes: int
    n_support: int

    def decision(self, X) -> np.ndarray:
        return np.asarray(X, dtype=float) @ self.w + self.b

    def predict(self, X) -> np.ndarray:
        return np.where(self.decision(X) >= 0.0, 1, -1)


@dataclass(frozen=True)
class CvResult:
    fold_accuracies: tuple[float, ...]
    mean_accuracy: float
    seed: int
    fold_indices: tuple[tuple[int, ...], ...] = ()


@dataclass(frozen=True)
class TaskResult:
    labeled: LabeledTask
    cv: CvResult
    dropped_users: tuple[str, ...] = ()   # users lacking a required feature block


def quantile_label(users, measures: dict[str, float], q: float = 0.25) -> tuple[tuple[str, ...], tuple[str, ...]]:
    """Top floor(qN) users as positive, bottom floor(qN) as negative.

    Sorting is descending by measure with ties broken by user id ascending,
    so labeling is deterministic and invariant under strictly monotone
    transforms of the measure.
    """
    users = list(users)
    if not 0.0 < q <= 0.5:
        raise ValueError("q must be in (0, 0.5]")
    undefined = sorted(u for u in users if measures.get(u) is None)
    if undefined:
        raise PreconditionError(f"measure undefined for users: {undefined}")
    order = sorted(users, key=lambda u: (-float(measures[u]), u))
    n_lab = math.floor(q * len(users))
    positive = tuple(order[:n_lab])
    negative = tuple(order[len(order) - n_lab:])
    return positive, negative


def filter_for_task(task: str, users, profiles: dict[str, UserProfile]):
    """Apply the task's sparsity pre-filter.

    R1 keeps everyone.  R2/R3 drop the bottom third by selfie occurrence
    count.  R4-R6 drop the bottom quarter by the occurrence sum of the
    task's two subcategories.  Ties break by user id.
    """
    users = list(users)
    if task == "R1":
        return users
    if task in ("R2", "R3"):
        key = {u: profiles[u].selfie_measures.selfie_occurrences for u in users}
        n_drop = len(users) // 3
    elif task in ("R4", "R5", "R6a", "R6b"):
        def pair_count(u):
            m = profiles[u].selfie_measures
            if task == "R4":
                return m.face_occurrences[ONE_FACE] + m.face_occurrences[MULTI_FACE]
            sub = m.subcategory_occurrences
            other = {"R5": OUTDOOR_SELFIE, "R6a": HOLDING_SELFIE, "R6b": FACEMASK_SELFIE}[task]
            return sub[other] + sub[INDOOR_SELFIE]

        key = {u: pair_count(u) for u in users}
        n_drop = len(users) // 4
    else:
        raise ValueError(f"unknown task {task!r}")
    order = sorted(users, key=lambda u: (key[u], u))
    return order[n_drop:]


def train_svm(X, y, C: float = 1.0, tol: float = 1e-3, max_passes: int = 10, seed: int = 0) -> SvmModel:
    """Linear soft-margin SVM trained by sequential minimal optimization.

    Simplified SMO: sweep examples, pick the KKT violators, pair each with
    a random second index, and solve the two-variable subproblem in closed
    form.  Terminates after max_passes sweeps without any alpha update.
    Deterministic under a fixed seed.
    """
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float)
    if X.ndim != 2 or len(X) != len(y):
        raise ValueError("X must be 2-D with one label per row")
    if not np.all(np.isfinite(X)):
        raise ValueError("feature rows must be finite")
    classes = set(np.unique(y))
    if classes != {-1.0, 1.0}:
        raise ValueError("labels must contain both +1 and -1")
    rng = np.random.default_rng(seed)
    n = len(y)
    K = X @ X.T
    alpha = np.zeros(n)
    b = 0.0
    passes = 0
    while passes < max_passes:
        changed = 0
        for i in range(n):
            Ei = float((alpha * y) @ K[:, i]) + b - y[i]
            if (y[i] * Ei < -tol and alpha[i] < C) or (y[i] * Ei > tol and alpha[i] > 0):
                j = int(rng.integers(n - 1))
                if j >= i:
                    j += 1
                Ej = float((alpha * y) @ K[:, j]) + b - y[j]
                ai_old, aj_old = alpha[i], alpha[j]
                if y[i] != y[j]:
                    L = max(0.0, aj_old - ai_old)
                    H = min(C, C + aj_old - ai_old)
                else:
                    L = max(0.0, ai_old + aj_old - C)
                    H = min(C, ai_old + aj_old)
                if L >= H:
                    continue
                eta = 2.0 * K[i, j] - K[i, i] - K[j, j]
                if eta >= 0.0:
                    continue
                aj = aj_old - y[j] * (Ei - Ej) / eta
                aj = min(H, max(L, aj))
                if abs(aj - aj_old) < 1e-5:
                    continue
                ai = ai_old + y[i] * y[j] * (aj_old - aj)
                alpha[i], alpha[j] = ai, aj
                b1 = b - Ei - y[i] * (ai - ai_old) * K[i, i] - y[j] * (aj - aj_old) * K[i, j]
                b2 = b - Ej - y[i] * (ai - ai_old) * K[i, j] - y[j] * (aj - aj_old) * K[j, j]
                if 0.0 < ai < C:
                    b = b1
                elif 0.0 < aj < C:
                    b = b2
                else:
                    b = 0.5 * (b1 + b2)
                changed += 1
        passes = passes + 1 if changed == 0 else 0
    w = (alpha * y) @ X
    return SvmModel(w, float(b), C, tol, max_passes, int(np.sum(alpha > 1e-8)))


def stratified_folds(y, folds: int, seed: int) -> tuple[tuple[int, ...], ...]:
    """Disjoint, exhaustive folds with per-class counts within +-1."""
    y = np.asarray(y)
    if len(y) < folds:
        raise ValueError(f"need at least {folds} samples, have {len(y)}")
    rng = np.random.default_rng(seed)
    assignment: list[list[int]] = [[] for _ in range(folds)]
    offset = 0
    for cls in sorted(set(y.tolist())):
        idx = np.flatnonzero(y == cls)
        rng.shuffle(idx)
        # continue dealing where the previous class stopped so no fold
        # stays empty when per-class counts are below the fold count
        for pos, i in enumerate(idx):
            assignment[(offset + pos) % folds].append(int(i))
        offset = (offset + len(idx)) % folds
    return tuple(tuple(sorted(f)) for f in assignment)


def _standardize(train: np.ndarray, test: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Z-score both splits using training statistics only."""
    mu = train.mean(axis=0)
    sd = train.std(axis=0)
    sd = np.where(sd > 0.0, sd, 1.0)
    return (train - mu) / sd, (test - mu) / sd


def kfold_cv(X, y, folds: int = 10, C: float = 1.0, seed: int = 0,
             tol: float = 1e-3, max_passes: int = 10) -> CvResult:
    """Stratified k-fold cross-validated accuracy of the linear SVM.

    Each fold's features are z-scored with statistics fitted on the
    training folds only.
    """
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float)
    fold_idx = stratified_folds(y, folds, seed)
    accuracies = []
    for f, test_idx in enumerate(fold_idx):
        test_idx = np.array(test_idx, dtype=int)
        train_mask = np.ones(len(y), dtype=bool)
        train_mask[test_idx] = False
        Xtr, Xte = _standardize(X[train_mask], X[test_idx])
        model = train_svm(Xtr, y[train_mask], C=C, tol=tol, max_passes=max_passes,
                          seed=seed + f)
        accuracies.append(float(np.mean(model.predict(Xte) == y[test_idx])))
    return CvResult(tuple(accuracies), float(np.mean(accuracies)), seed, fold_idx)


def feature_rows(profiles: dict[str, UserProfile], users, fusion) -> tuple[np.ndarray, tuple[str, ...], tuple[str, ...]]:
    """Concatenated F/I/S blocks for the given users.

    Returns (rows, dropped, kept): users missing a required block
    (undefined I or S) are dropped and reported.  Block order is always
    F, I, S regardless of fusion order.
    """
    fusion = tuple(b for b in FUSION_BLOCKS if b in set(fusion))
    if not fusion:
        raise ValueError("fusion must select at least one of F, I, S")
    rows = []
    kept = []
    dropped = []
    for u in users:
        p = profiles[u]
        row: list[float] = []
        ok = True
        for block in fusion:
            if block == "F":
                row.extend(float(v) for v in p.freq)
            elif block == "I":
                if p.inertia_feature is None:
                    ok = False
                    break
                row.append(float(p.inertia_feature))
            elif block == "S":
                if p.singleness_feature is None:
                    ok = False
                    break
                row.append(float(p.singleness_feature))
        if ok:
            rows.append(row)
            kept.append(u)
        else:
            dropped.append(u)
    return np.array(rows, dtype=float), tuple(dropped), tuple(kept)


def run_task(task: str, fusion, profiles: dict[str, UserProfile],
             q: float = 0.25, C: float = 1.0, folds: int = 10, seed: int = 0) -> TaskResult:
    """Full harness for one research task.

    Applies the task pre-filter, quantile-labels on the task measure,
    builds fused feature rows and runs stratified 10-fold CV.
    """
    if task not in TASK_MEASURES:
        raise ValueError(f"unknown task {task!r}")
    measure_name = TASK_MEASURES[task]
    users = filter_for_task(task, sorted(profiles), profiles)
    measures = {u: profiles[u].selfie_measures.as_dict()[measure_name] for u in users}
    undefined = sorted(u for u in users if measures[u] is None)
    if undefined:
        raise UndefinedResultError(
            f"{measure_name} undefined for filtered users: {undefined[:5]}"
        )
    positive, negative = quantile_label(users, measures, q)
    labeled_users = list(positive) + list(negative)
    X, dropped, kept = feature_rows(profiles, labeled_users, fusion)
    pos_set = set(positive)
    y = np.array([1.0 if u in pos_set else -1.0 for u in kept])
    cv = kfold_cv(X, y, folds=folds, C=C, seed=seed)
    labeled = LabeledTask(task, measure_name, positive, negative,
                          tuple(b for b in FUSION_BLOCKS if b in set(fusion)))
    return TaskResult(labeled, cv, dropped)
