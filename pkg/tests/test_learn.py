import itertools

import numpy as np
import pytest

from momentminer.charmetrics import build_profiles
from momentminer.errors import PreconditionError
from momentminer.learn import (
    feature_rows,
    filter_for_task,
    kfold_cv,
    quantile_label,
    run_task,
    stratified_folds,
    train_svm,
)
from momentminer.synth import PlantedRule, SynthConfig, face_tags_from_counts, generate
from momentminer.taxonomy import SELFIE, Taxonomy

from conftest import make_dataset


def test_quantile_label_fixture():
    users = [f"u{i}" for i in range(1, 9)]
    measures = {f"u{i}": float(i) for i in range(1, 9)}
    pos, neg = quantile_label(users, measures, q=0.25)
    assert set(pos) == {"u8", "u7"}
    assert set(neg) == {"u1", "u2"}


def test_quantile_label_tie_breaks_by_user_id():
    users = ["b", "a", "d", "c"]
    measures = {u: 1.0 for u in users}
    pos, neg = quantile_label(users, measures, q=0.25)
    assert pos == ("a",)
    assert neg == ("d",)


def test_quantile_label_monotone_transform_invariance():
    rng = np.random.default_rng(0)
    users = [f"u{i}" for i in range(12)]
    vals = rng.normal(size=12)
    m1 = dict(zip(users, vals))
    m2 = {u: float(np.exp(3.0 * v)) for u, v in m1.items()}
    assert quantile_label(users, m1) == quantile_label(users, m2)


def test_quantile_label_rejects_undefined_and_bad_q():
    with pytest.raises(PreconditionError):
        quantile_label(["a", "b"], {"a": 1.0, "b": None})
    with pytest.raises(ValueError):
        quantile_label(["a", "b"], {"a": 1.0, "b": 2.0}, q=0.6)


def selfie_count_profiles(counts):
    """One user per entry: n selfie moments plus one Meal moment."""
    spec = []
    for u, n in counts.items():
        spec.extend([(u, [SELFIE])] * n)
        spec.append((u, ["Meal"]))
    d = make_dataset(spec)
    return build_profiles(d, Taxonomy(("Meal",)))


def test_filter_r2_drops_bottom_third_by_selfie_occurrence():
    counts = {f"u{i}": i for i in range(1, 10)}  # selfie occurrences 1..9
    profiles = selfie_count_profiles(counts)
    kept = filter_for_task("R2", sorted(profiles), profiles)
    assert sorted(kept) == [f"u{i}" for i in range(4, 10)]  # drops 1,2,3


def test_filter_r1_is_identity():
    profiles = selfie_count_profiles({"a": 1, "b": 2})
    assert filter_for_task("R1", ["b", "a"], profiles) == ["b", "a"]


def test_filter_r5_uses_subcategory_pair(u1_taxonomy):
    from momentminer.taxonomy import INDOOR_SELFIE, OUTDOOR_SELFIE

    # users differ only in how many outdoor/indoor selfie moments they post
    spec, subs = [], {}
    plan = {"a": 1, "b": 2, "c": 3, "d": 4, "e": 5, "f": 6, "g": 7, "h": 8}
    for u, n in plan.items():
        for j in range(n):
            spec.append((u, [SELFIE]))
        spec.append((u, ["Meal"]))
    d = make_dataset(spec)
    for iid, img in d.images.items():
        if img.category == SELFIE:
            subs[iid] = OUTDOOR_SELFIE
    profiles = build_profiles(d, Taxonomy(("Meal",)), subs, {})
    kept = filter_for_task("R5", sorted(profiles), profiles)
    # 8 users, drop bottom quarter (2): a and b
    assert sorted(kept) == ["c", "d", "e", "f", "g", "h"]


def test_filter_unknown_task():
    with pytest.raises(ValueError):
        filter_for_task("R9", [], {})


def test_svm_separable_pair():
    X = np.array([[-1.0], [1.0]])
    y = np.array([-1.0, 1.0])
    model = train_svm(X, y, seed=0)
    assert model.w[0] > 0
    assert (model.predict(X) == y).all()


def test_svm_deterministic():
    rng = np.random.default_rng(1)
    X = rng.normal(size=(40, 3))
    y = np.where(X[:, 0] > 0, 1.0, -1.0)
    a = train_svm(X, y, seed=5)
    b = train_svm(X, y, seed=5)
    assert np.array_equal(a.w, b.w) and a.b == b.b


def test_svm_rejects_single_class_and_nonfinite():
    with pytest.raises(ValueError):
        train_svm([[0.0], [1.0]], [1.0, 1.0])
    with pytest.raises(ValueError):
        train_svm([[np.nan], [1.0]], [1.0, -1.0])


def brute_force_linear_accuracy(X, y):
    """Best training accuracy of any linear separator through point pairs."""
    n = len(X)
    best = max(np.mean(y == 1), np.mean(y == -1))
    for i, j in itertools.combinations(range(n), 2):
        w = X[j] - X[i]
        if not w.any():
            continue
        mid = 0.5 * (X[i] + X[j])
        scores = (X - mid) @ w
        for sgn in (1.0, -1.0):
            pred = np.where(sgn * scores >= 0, 1.0, -1.0)
            best = max(best, float(np.mean(pred == y)))
    return best


def test_svm_xor_matches_linear_ceiling():
    X = np.array([[0.0, 0.0], [1.0, 1.0], [0.0, 1.0], [1.0, 0.0]] * 10)
    y = np.array([1.0, 1.0, -1.0, -1.0] * 10)
    ceiling = brute_force_linear_accuracy(X[:4], y[:4])
    assert ceiling <= 0.75
    model = train_svm(X, y, seed=0)
    assert np.mean(model.predict(X) == y) <= ceiling + 1e-12


def margin_data(seed, n=200, dim=4, margin=1.0):
    rng = np.random.default_rng(seed)
    y = np.where(np.arange(n) % 2 == 0, 1.0, -1.0)
    X = rng.normal(size=(n, dim))
    X[:, 0] = y * (margin + rng.random(n))
    return X, y


def test_svm_wide_margin_perfect_train_and_cv():
    X, y = margin_data(seed=3)
    model = train_svm(X, y, seed=3)
    assert np.mean(model.predict(X) == y) == 1.0
    cv = kfold_cv(X, y, folds=10, seed=3)
    assert cv.mean_accuracy >= 0.95
    assert len(cv.fold_accuracies) == 10


def test_stratified_folds_partition_and_balance():
    y = np.array([1.0] * 13 + [-1.0] * 17)
    folds = stratified_folds(y, 10, seed=0)
    flat = [i for f in folds for i in f]
    assert sorted(flat) == list(range(30))
    for cls in (1.0, -1.0):
        per_fold = [sum(1 for i in f if y[i] == cls) for f in folds]
        assert max(per_fold) - min(per_fold) <= 1
    assert folds == stratified_folds(y, 10, seed=0)
    assert folds != stratified_folds(y, 10, seed=1)


def test_stratified_folds_no_empty_folds_with_small_classes():
    y = np.array([1.0] * 6 + [-1.0] * 6)
    folds = stratified_folds(y, 10, seed=0)
    assert all(len(f) >= 1 for f in folds)


def test_stratified_folds_too_few_samples():
    with pytest.raises(ValueError):
        stratified_folds(np.array([1.0, -1.0]), 10, seed=0)


def test_kfold_cv_deterministic():
    X, y = margin_data(seed=4)
    a = kfold_cv(X, y, seed=7)
    b = kfold_cv(X, y, seed=7)
    assert a == b


def test_kfold_cv_constant_feature_is_harmless():
    # a zero-variance column must not produce NaNs through standardization
    X, y = margin_data(seed=5)
    X = np.hstack([X, np.ones((len(X), 1))])
    cv = kfold_cv(X, y, seed=5)
    assert np.isfinite(cv.mean_accuracy)


def planted_profiles(seed, rule, **kw):
    cfg = SynthConfig(n_users=60, seed=seed, planted_rule=rule, **kw)
    d, t = generate(cfg)
    tax = Taxonomy(cfg.categories)
    return build_profiles(d, tax, t.subcategories(), face_tags_from_counts(d)), t


def test_feature_rows_blocks_and_drops():
    profiles, _ = planted_profiles(1, None)
    users = sorted(profiles)[:5]
    f_only, dropped_f, kept_f = feature_rows(profiles, users, ("F",))
    fis, dropped, kept = feature_rows(profiles, users, ("S", "I", "F"))
    assert f_only.shape[1] == len(next(iter(profiles.values())).freq)
    if kept:
        assert fis.shape[1] == f_only.shape[1] + 2
    with pytest.raises(ValueError):
        feature_rows(profiles, users, ())


def test_run_task_r1_planted_signal():
    rule = PlantedRule("selfie_frequency", ("Child", "Cosmetic", "Meal"))
    accs = []
    for s in range(3):
        profiles, _ = planted_profiles(100 + s, rule)
        res = run_task("R1", ("F",), profiles, seed=s)
        accs.append(res.cv.mean_accuracy)
        assert len(res.labeled.positive) == len(res.labeled.negative)
    assert float(np.mean(accs)) >= 0.85


def test_run_task_labels_come_from_planted_groups():
    rule = PlantedRule("selfie_frequency", ("Child", "Cosmetic", "Meal"))
    profiles, truth = planted_profiles(105, rule)
    res = run_task("R1", ("F",), profiles, seed=0)
    pos_groups = [truth.user_group[u] for u in res.labeled.positive]
    assert pos_groups.count("high") / len(pos_groups) >= 0.9


def test_run_task_null_config_near_chance():
    accs = []
    for s in range(5):
        profiles, _ = planted_profiles(400 + s, None)
        accs.append(run_task("R1", ("F",), profiles, seed=s).cv.mean_accuracy)
    assert 0.3 <= float(np.mean(accs)) <= 0.7


def test_run_task_unknown_task():
    profiles, _ = planted_profiles(2, None)
    with pytest.raises(ValueError):
        run_task("R0", ("F",), profiles)
