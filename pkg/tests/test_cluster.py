"""K-means, silhouette, and elbow selection against brute-force oracles."""

import itertools

import numpy as np
import pytest

from aerolens import (
    ClusterModel,
    ElbowCurve,
    NormalizationParams,
    assign,
    elbow_select,
    kmeans_fit,
    load_cluster_model,
    save_cluster_model,
    silhouette,
)
from aerolens.cluster import cluster_model_from_dict, cluster_model_to_dict
from aerolens.errors import (
    CorruptDocumentError,
    DimensionMismatchError,
    SchemaVersionMismatchError,
    SingleClusterError,
    TooFewPointsError,
)


def brute_force_min_wcss(X, k):
    """Exhaustive minimum WCSS over all k^n labelings (cluster = mean)."""
    n = X.shape[0]
    best = np.inf
    for labels in itertools.product(range(k), repeat=n):
        labels = np.asarray(labels)
        wcss = 0.0
        for c in range(k):
            members = X[labels == c]
            if len(members):
                wcss += float(((members - members.mean(axis=0)) ** 2).sum())
        best = min(best, wcss)
    return best


def brute_force_silhouette(X, labels):
    """Direct O(n^2) silhouette for cross-checking the chunked version."""
    n = len(X)
    d = np.sqrt(((X[:, None, :] - X[None, :, :]) ** 2).sum(axis=2))
    scores = []
    for i in range(n):
        own = labels == labels[i]
        if own.sum() == 1:
            scores.append(0.0)
            continue
        a = d[i, own].sum() / (own.sum() - 1)
        b = min(
            d[i, labels == c].mean() for c in np.unique(labels) if c != labels[i]
        )
        scores.append((b - a) / max(a, b) if max(a, b) > 0 else 0.0)
    return float(np.mean(scores))


# --- kmeans_fit --------------------------------------------------------------


def test_separated_duplicates_fit_exactly():
    X = np.array([[0.0, 0.0], [0.0, 0.0], [10.0, 10.0], [10.0, 10.0]])
    model = kmeans_fit(X, k=2, seed=0)
    assert model.wcss == 0.0
    got = sorted(map(tuple, model.centroids))
    assert got == [(0.0, 0.0), (10.0, 10.0)]


def test_k1_is_the_column_mean():
    rng = np.random.default_rng(4)
    X = rng.normal(size=(12, 5))
    model = kmeans_fit(X, k=1, seed=0)
    np.testing.assert_allclose(model.centroids[0], X.mean(axis=0), atol=1e-12)
    np.testing.assert_allclose(model.wcss, ((X - X.mean(axis=0)) ** 2).sum(), rtol=1e-12)


def test_two_triads_reach_the_exhaustive_optimum():
    X = np.array(
        [[0.0, 0], [0.5, 0.2], [0.1, 0.6], [8.0, 8.0], [8.4, 8.1], [8.2, 8.5]]
    )
    model = kmeans_fit(X, k=2, seed=0)
    assert abs(model.wcss - brute_force_min_wcss(X, 2)) < 1e-9


@pytest.mark.parametrize("k", [2, 3])
def test_small_instances_reach_the_exhaustive_optimum(k):
    rng = np.random.default_rng(77)
    X = rng.normal(size=(8, 3))
    model = kmeans_fit(X, k=k, seed=13)
    assert abs(model.wcss - brute_force_min_wcss(X, k)) < 1e-9


def test_fit_is_bitwise_deterministic():
    rng = np.random.default_rng(5)
    X = rng.normal(size=(40, 5))
    a = kmeans_fit(X, k=3, seed=9)
    b = kmeans_fit(X, k=3, seed=9)
    np.testing.assert_array_equal(a.centroids, b.centroids)
    assert a.wcss == b.wcss
    c = kmeans_fit(X, k=3, seed=10)
    assert not np.array_equal(a.centroids, c.centroids)


def test_stored_wcss_matches_reassignment():
    rng = np.random.default_rng(6)
    X = rng.normal(size=(50, 5))
    model = kmeans_fit(X, k=4, seed=1)
    labels = assign(model, X)
    recomputed = ((X - model.centroids[labels]) ** 2).sum()
    assert abs(model.wcss - recomputed) < 1e-9


def test_fit_validation():
    X = np.zeros((3, 2))
    with pytest.raises(TooFewPointsError):
        kmeans_fit(X, k=4)
    with pytest.raises(DimensionMismatchError):
        kmeans_fit(np.zeros(5), k=2)
    with pytest.raises(ValueError):
        kmeans_fit(X, k=2, max_iter=0)
    with pytest.raises(ValueError):
        kmeans_fit(X, k=2, tol=-1.0)


def test_cluster_model_validation():
    with pytest.raises(ValueError):
        ClusterModel(k=0, centroids=np.zeros((1, 5)), wcss=0.0, iterations_run=1, seed=0)
    with pytest.raises(ValueError):
        ClusterModel(
            k=1, centroids=np.array([[np.nan] * 5]), wcss=0.0, iterations_run=1, seed=0
        )
    with pytest.raises(ValueError):
        ClusterModel(k=1, centroids=np.zeros((1, 5)), wcss=-1.0, iterations_run=1, seed=0)


# --- assign ------------------------------------------------------------------


def test_assign_exact_centroid_and_tie_rule():
    model = ClusterModel(
        k=3,
        centroids=np.array([[0.0, 0.0], [2.0, 0.0], [5.0, 5.0]]),
        wcss=0.0,
        iterations_run=1,
        seed=0,
    )
    labels = assign(model, np.array([[5.0, 5.0], [1.0, 0.0]]))
    assert labels[0] == 2
    assert labels[1] == 0  # equidistant from centroids 0 and 1 -> lowest index


def test_assign_matches_brute_force_distances():
    rng = np.random.default_rng(8)
    X = rng.normal(size=(20, 5))
    model = kmeans_fit(X, k=4, seed=3)
    table = ((X[:, None, :] - model.centroids[None, :, :]) ** 2).sum(axis=2)
    np.testing.assert_array_equal(assign(model, X), table.argmin(axis=1))


def test_assign_dimension_mismatch():
    model = kmeans_fit(np.zeros((4, 5)), k=1)
    with pytest.raises(DimensionMismatchError):
        assign(model, np.zeros((4, 3)))


# --- silhouette --------------------------------------------------------------


def test_silhouette_two_tight_pairs():
    X = np.array([[0.0, 0.0], [0.0, 1.0], [100.0, 100.0], [100.0, 101.0]])
    labels = np.array([0, 0, 1, 1])
    score = silhouette(X, labels)
    assert abs(score - 0.9929) < 1e-3
    assert abs(score - brute_force_silhouette(X, labels)) < 1e-12


def test_silhouette_all_singletons_is_zero():
    X = np.arange(10.0).reshape(5, 2)
    assert silhouette(X, np.arange(5)) == 0.0


def test_silhouette_interleaved_line_scores_low():
    X = np.arange(6.0).reshape(6, 1)
    labels = np.array([0, 1, 0, 1, 0, 1])
    assert silhouette(X, labels) < 0.5


def test_silhouette_matches_brute_force_in_chunks():
    rng = np.random.default_rng(11)
    X = rng.normal(size=(60, 5))
    labels = rng.integers(0, 3, size=60)
    expected = brute_force_silhouette(X, labels)
    assert abs(silhouette(X, labels) - expected) < 1e-10
    assert abs(silhouette(X, labels, chunk=7) - expected) < 1e-10


def test_silhouette_well_separated_clusters():
    rng = np.random.default_rng(12)
    a = rng.uniform(0, 1, size=(30, 5))          # diameter ~1
    b = rng.uniform(0, 1, size=(30, 5)) + 200.0  # 100x separation
    X = np.vstack([a, b])
    labels = np.array([0] * 30 + [1] * 30)
    assert silhouette(X, labels) >= 0.98


def test_silhouette_needs_two_labels():
    with pytest.raises(SingleClusterError):
        silhouette(np.zeros((4, 2)), np.zeros(4, dtype=int))


# --- elbow_select ------------------------------------------------------------


def fake_fit_from_curve(curve):
    """Stand-in for kmeans_fit that returns prescribed wcss values."""

    def fit(X, k, seed=0, **kwargs):
        return ClusterModel(
            k=k,
            centroids=np.zeros((k, X.shape[1])),
            wcss=float(curve[k]),
            iterations_run=1,
            seed=seed,
        )

    return fit


def test_elbow_picks_the_sharpest_bend(monkeypatch):
    curve = {2: 100.0, 3: 60.0, 4: 30.0, 5: 28.0, 6: 27.0}
    monkeypatch.setattr("aerolens.cluster.kmeans_fit", fake_fit_from_curve(curve))
    result = elbow_select(np.zeros((10, 5)), 2, 6)
    assert result.chosen_k == 4
    assert result.points == ((2, 100.0), (3, 60.0), (4, 30.0), (5, 28.0), (6, 27.0))


def test_elbow_linear_curve_ties_to_smallest_interior_k(monkeypatch):
    curve = {k: 100.0 - 20.0 * (k - 2) for k in range(2, 7)}
    monkeypatch.setattr("aerolens.cluster.kmeans_fit", fake_fit_from_curve(curve))
    assert elbow_select(np.zeros((10, 5)), 2, 6).chosen_k == 3


def test_elbow_flat_curve_keeps_k_min(monkeypatch):
    curve = {k: 5.0 for k in range(2, 7)}
    monkeypatch.setattr("aerolens.cluster.kmeans_fit", fake_fit_from_curve(curve))
    assert elbow_select(np.zeros((10, 5)), 2, 6).chosen_k == 2


def test_elbow_finds_three_blobs():
    rng = np.random.default_rng(21)
    blobs = [rng.normal(loc=c, scale=0.5, size=(40, 5)) for c in (0.0, 10.0, 20.0)]
    X = np.vstack(blobs)
    result = elbow_select(X, 2, 6, seed=0)
    assert result.chosen_k == 3
    wcss = [w for _, w in result.points]
    assert all(b <= a + 1e-9 for a, b in zip(wcss, wcss[1:]))


def test_elbow_two_duplicated_points_keep_k_min():
    X = np.vstack([np.zeros((5, 5)), np.full((5, 5), 9.0)])
    assert elbow_select(X, 2, 6, seed=0).chosen_k == 2


def test_elbow_validation():
    with pytest.raises(ValueError):
        elbow_select(np.zeros((10, 5)), 1, 4)
    with pytest.raises(ValueError):
        elbow_select(np.zeros((10, 5)), 4, 4)
    with pytest.raises(TooFewPointsError):
        elbow_select(np.zeros((3, 5)), 2, 6)
    with pytest.raises(ValueError):
        ElbowCurve(points=((3, 1.0), (2, 2.0)), chosen_k=2)


# --- persistence -------------------------------------------------------------


def test_cluster_model_round_trip(tmp_path):
    rng = np.random.default_rng(14)
    X = rng.uniform(size=(30, 5))
    norm = NormalizationParams(mins=(0,) * 5, maxs=(1,) * 5)
    model = kmeans_fit(X, k=3, seed=2, normalization=norm)
    path = tmp_path / "model.json"
    save_cluster_model(model, str(path))
    back = load_cluster_model(str(path))
    np.testing.assert_array_equal(back.centroids, model.centroids)
    assert back.wcss == model.wcss
    assert back.k == model.k
    assert back.seed == model.seed
    assert back.normalization == norm


def test_cluster_model_schema_guards(tmp_path):
    model = kmeans_fit(np.zeros((4, 5)), k=1)
    doc = cluster_model_to_dict(model)
    assert doc["kind"] == "cluster-model"
    newer = dict(doc, schema_version=doc["schema_version"] + 1)
    with pytest.raises(SchemaVersionMismatchError):
        cluster_model_from_dict(newer)
    with pytest.raises(CorruptDocumentError):
        cluster_model_from_dict({"schema_version": 1})
    bad = tmp_path / "bad.json"
    bad.write_text("{not json", encoding="utf-8")
    with pytest.raises(CorruptDocumentError):
        load_cluster_model(str(bad))
    arr = tmp_path / "arr.json"
    arr.write_text("[1, 2]", encoding="utf-8")
    with pytest.raises(CorruptDocumentError):
        load_cluster_model(str(arr))
