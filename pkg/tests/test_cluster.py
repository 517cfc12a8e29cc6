import numpy as np
import pytest

from momentminer.cluster import (
    CategoryModel,
    SilhouetteCurve,
    apply_merge_map,
    assign_categories,
    kmeans,
    largest_drop_k,
    select_k,
    simplified_silhouette,
    split_by_face_count,
    subcluster_selfies,
)
from momentminer.errors import ConfigError, SchemaError
from momentminer.taxonomy import (
    EXCLUDED,
    MULTI_FACE,
    ONE_FACE,
    SELFIE,
    SELFIE_SUBCATEGORIES,
    Taxonomy,
)

from conftest import make_dataset

LINE = np.array([[0.0], [1.0], [10.0], [11.0]])


def blobs(seed, centers, n=100, sigma=1.0, dim=2):
    rng = np.random.default_rng(seed)
    pts, labels = [], []
    for li, c in enumerate(centers):
        pts.append(rng.normal(0.0, sigma, (n, dim)) + np.asarray(c))
        labels.extend([li] * n)
    return np.vstack(pts), np.array(labels)


def test_kmeans_line_fixture():
    c = kmeans(LINE, 2, seed=0)
    assert sorted(c.centroids.ravel().tolist()) == [0.5, 10.5]
    low = c.labels[0]
    assert (c.labels == [low, low, 1 - low, 1 - low]).all()


def test_kmeans_k_equals_n():
    c = kmeans(LINE, 4, seed=1)
    assert c.objective == 0.0
    assert sorted(c.labels.tolist()) == [0, 1, 2, 3]


def test_kmeans_k_validation():
    with pytest.raises(ValueError):
        kmeans(LINE, 5, seed=0)
    with pytest.raises(ValueError):
        kmeans(LINE, 0, seed=0)


def test_kmeans_recovers_separated_blobs():
    pts, truth = blobs(seed=2, centers=[(0, 0), (20, 0), (0, 20)])
    c = kmeans(pts, 3, seed=2)
    # exact partition recovery up to label permutation
    for li in range(3):
        assert len(set(c.labels[truth == li])) == 1
    assert len(set(c.labels[truth == 0]) | set(c.labels[truth == 1]) | set(c.labels[truth == 2])) == 3


def test_kmeans_objective_nonincreasing_and_deterministic():
    pts, _ = blobs(seed=3, centers=[(0, 0), (8, 0)], n=60)
    a = kmeans(pts, 4, seed=9)
    b = kmeans(pts, 4, seed=9)
    assert np.array_equal(a.centroids, b.centroids)
    assert np.array_equal(a.labels, b.labels)
    assert a.objective == b.objective
    hist = a.objective_history
    assert all(hist[i + 1] <= hist[i] + 1e-9 for i in range(len(hist) - 1))


def test_kmeans_empty_cluster_reseed_on_coincident_points():
    pts = np.zeros((6, 2))
    c = kmeans(pts, 3, seed=0)
    assert c.reseeds > 0
    assert c.objective == 0.0


def test_silhouette_line_fixture():
    c = kmeans(LINE, 2, seed=0)
    s = simplified_silhouette(LINE, c)
    expected = (2 * (10 / 10.5) + 2 * (9 / 9.5)) / 4
    assert abs(s - expected) < 1e-12


def test_silhouette_coincident_cluster_scores_one():
    pts = np.array([[0.0]] * 5 + [[10.0]] * 5)
    c = kmeans(pts, 2, seed=0)
    assert simplified_silhouette(pts, c) == 1.0


def test_silhouette_requires_two_clusters():
    c = kmeans(LINE, 1, seed=0)
    with pytest.raises(ValueError):
        simplified_silhouette(LINE, c)


def test_silhouette_random_labels_near_zero():
    pts, _ = blobs(seed=4, centers=[(0, 0)], n=200)
    scores = []
    for seed in range(20):
        rng = np.random.default_rng(seed)
        labels = rng.integers(2, size=len(pts))
        if len(set(labels.tolist())) < 2:
            continue
        centroids = np.stack([pts[labels == j].mean(axis=0) for j in range(2)])
        from momentminer.cluster import Clustering

        c = Clustering(2, centroids, labels, 0.0, 1)
        scores.append(simplified_silhouette(pts, c))
    assert all(abs(s) < 0.2 for s in scores)


def test_largest_drop_fixture():
    curve = SilhouetteCurve(((10, 0.50), (20, 0.49), (30, 0.30)))
    assert largest_drop_k(curve) == 20


def test_largest_drop_flat_curve_ties_to_smallest_k():
    curve = SilhouetteCurve(((10, 0.4), (20, 0.4), (30, 0.4)))
    assert largest_drop_k(curve) == 10


def test_select_k_consistent_with_drop_rule():
    pts, _ = blobs(seed=5, centers=[(0, 0), (30, 0), (0, 30), (30, 30)], n=40)
    k, curve = select_k(pts, (2, 8), 1, seed=5)
    assert k == largest_drop_k(curve)
    assert all(-1.0 <= s <= 1.0 for _, s in curve.points)
    # the curve peaks at the true cluster count
    scores = dict(curve.points)
    assert max(scores, key=scores.get) == 4


def test_select_k_invariant_to_uniform_scaling():
    pts, _ = blobs(seed=6, centers=[(0, 0), (30, 0), (0, 30)], n=40)
    k1, _ = select_k(pts, (2, 6), 1, seed=6)
    k2, _ = select_k(pts * 4.0, (2, 6), 1, seed=6)  # power-of-two scale: exact fp match
    assert k1 == k2


def test_select_k_needs_two_scanned_values():
    pts, _ = blobs(seed=7, centers=[(0, 0)], n=20)
    with pytest.raises(ValueError):
        select_k(pts, (3, 3), 1, seed=0)


def simple_model(taxonomy, centroids, merge_map):
    from momentminer.cluster import Clustering

    c = Clustering(len(centroids), np.asarray(centroids, float),
                   np.arange(len(centroids)), 0.0, 1)
    return apply_merge_map(c, merge_map, taxonomy)


def test_apply_merge_map_merges_and_counts():
    tax = Taxonomy(("A", "B"))
    model = simple_model(tax, [[0.0], [1.0], [2.0]], {0: "A", 1: "A", 2: "B"})
    assert model.labels_in_use() == ("A", "B")


def test_apply_merge_map_missing_index():
    tax = Taxonomy(("A",))
    from momentminer.cluster import Clustering

    c = Clustering(2, np.zeros((2, 1)), np.array([0, 1]), 0.0, 1)
    with pytest.raises(ConfigError, match="1"):
        apply_merge_map(c, {0: "A"}, tax)


def test_apply_merge_map_folds_subcategories_into_selfie():
    tax = Taxonomy(("A",))
    model = simple_model(tax, [[0.0], [5.0]], {0: "A", 1: SELFIE_SUBCATEGORIES[0]})
    assert model.merge_map[1] == SELFIE


def embedded_dataset(embeddings, dim=1):
    """Uncategorized dataset with one moment per user and given embeddings."""
    from momentminer.corpus import ImageRecord, Moment, _build_dataset

    moments, images = {}, {}
    for i, emb in enumerate(embeddings):
        uid, mid, iid = f"u{i}", f"m{i}", f"i{i}"
        images[iid] = ImageRecord(iid, uid, mid, tuple(emb))
        moments[mid] = Moment(mid, uid, (iid,))
    return _build_dataset(dim, moments, images)


def test_assign_categories_nearest_and_tie_rule():
    tax = Taxonomy(("A", "B"))
    model = simple_model(tax, [[0.0], [2.0]], {0: "A", 1: "B"})
    d = embedded_dataset([(0.0,), (1.0,), (1.9,)])
    out = assign_categories(d, model)
    assert out.images["i0"].category == "A"
    assert out.images["i1"].category == "A"  # equidistant: lower cluster index wins
    assert out.images["i2"].category == "B"


def test_assign_categories_dimension_mismatch():
    tax = Taxonomy(("A",))
    model = simple_model(tax, [[0.0, 0.0]], {0: "A"})
    d = embedded_dataset([(0.0,)])
    with pytest.raises(SchemaError):
        assign_categories(d, model)


def test_assign_categories_self_consistency():
    # reassigning the training points reproduces the clustering's own labels
    pts, _ = blobs(seed=8, centers=[(0, 0), (15, 0), (0, 15)], n=30)
    c = kmeans(pts, 3, seed=8)
    tax = Taxonomy(("A", "B", "C"))
    model = apply_merge_map(c, {0: "A", 1: "B", 2: "C"}, tax)
    d = embedded_dataset([tuple(p) for p in pts], dim=2)
    out = assign_categories(d, model)
    relabeled = [out.images[f"i{i}"].category for i in range(len(pts))]
    expected = ["ABC"[j] for j in c.labels]
    assert relabeled == expected


def selfie_dataset(embeddings):
    from dataclasses import replace

    d = embedded_dataset([tuple(e) for e in embeddings], dim=len(embeddings[0]))
    for iid in d.images:
        d.images[iid] = replace(d.images[iid], category=SELFIE)
    return d


def test_subcluster_selfies_recovers_blobs():
    pts, truth = blobs(seed=9, centers=[(0, 0), (20, 0), (0, 20), (20, 20)], n=10)
    d = selfie_dataset(pts)
    mapping, clustering = subcluster_selfies(d, seed=9)
    assert set(mapping.values()) == set(SELFIE_SUBCATEGORIES)
    # each true blob lands in exactly one subcategory
    for li in range(4):
        subs = {mapping[f"i{i}"] for i in range(len(pts)) if truth[i] == li}
        assert len(subs) == 1


def test_subcluster_selfies_degenerate_reports_reseeds():
    d = selfie_dataset(np.zeros((8, 2)))
    _, clustering = subcluster_selfies(d, seed=0)
    assert clustering.reseeds > 0


def test_subcluster_selfies_needs_four_images():
    d = selfie_dataset(np.zeros((3, 2)))
    with pytest.raises(ValueError):
        subcluster_selfies(d, seed=0)


def test_split_by_face_count():
    d = make_dataset(
        [("u1", [SELFIE, SELFIE, SELFIE, SELFIE, "A"])],
        face_counts={"u1-m0-i0": 1, "u1-m0-i1": 3, "u1-m0-i2": 0, "u1-m0-i4": 2},
    )
    tags = split_by_face_count(d)
    assert tags == {
        "u1-m0-i0": ONE_FACE,
        "u1-m0-i1": MULTI_FACE,
        "u1-m0-i2": EXCLUDED,
        "u1-m0-i3": EXCLUDED,   # missing face count
    }
