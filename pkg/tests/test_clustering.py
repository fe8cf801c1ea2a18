import numpy as np
import pytest

from alspeech.clustering import (
    ClusterParams,
    dbscan,
    default_eps,
    pairwise_distance,
    silhouette,
)
from alspeech.core import EmbeddingMatrix
from alspeech.errors import (
    DimensionMismatchError,
    FewerThanTwoClustersError,
    ValidationError,
)

from oracles import direct_silhouette, naive_dbscan


def _matrix(rows, prefix="s"):
    rows = np.asarray(rows, dtype=float)
    ids = [f"{prefix}{i:04d}" for i in range(rows.shape[0])]
    return EmbeddingMatrix(rows, ids)


def _blobs(rng, centers, per, spread=0.5):
    rows = []
    for c in centers:
        rows.append(rng.normal(0, spread, (per, len(c))) + np.asarray(c))
    return np.vstack(rows)


def test_pairwise_distance():
    assert pairwise_distance([0, 0], [3, 4], "euclidean") == pytest.approx(5.0)
    assert pairwise_distance([1, 2], [1, 2], "cosine") == pytest.approx(0.0)
    assert pairwise_distance([1, 0], [0, 1], "cosine") == pytest.approx(1.0)
    assert pairwise_distance([0, 0], [1, 0], "cosine") == 1.0
    assert pairwise_distance([0, 0], [0, 0], "cosine") == 0.0
    with pytest.raises(DimensionMismatchError):
        pairwise_distance([1], [1, 2], "euclidean")


def test_dbscan_two_blobs():
    rng = np.random.default_rng(1)
    em = _matrix(_blobs(rng, [(0, 0), (10, 10)], 50))
    a = dbscan(em, ClusterParams(eps=2.0, min_points=5, metric="euclidean"))
    assert len(a.clusters) == 2
    assert not a.noise
    sizes = sorted(len(m) for m in a.clusters.values())
    assert sizes == [50, 50]


def test_dbscan_single_point_is_noise():
    em = _matrix([[0.0, 0.0]])
    a = dbscan(em, ClusterParams(eps=1.0, min_points=2, metric="euclidean"))
    assert a.clusters == {}
    assert a.noise == {"s0000"}


def test_dbscan_identical_points_single_cluster():
    em = _matrix([[1.0, 1.0]] * 6)
    a = dbscan(em, ClusterParams(eps=0.5, min_points=5, metric="euclidean"))
    assert len(a.clusters) == 1
    assert len(a.clusters[1]) == 6


def test_dbscan_permutation_invariant():
    rng = np.random.default_rng(3)
    rows = _blobs(rng, [(0, 0), (8, 8)], 30)
    ids = [f"s{i:04d}" for i in range(60)]
    em = EmbeddingMatrix(rows, ids)
    perm = rng.permutation(60)
    em2 = EmbeddingMatrix(rows[perm], [ids[i] for i in perm])
    params = ClusterParams(eps=1.5, min_points=4, metric="euclidean")
    a, b = dbscan(em, params), dbscan(em2, params)
    assert a.clusters == b.clusters
    assert a.noise == b.noise


@pytest.mark.parametrize("metric", ["euclidean", "cosine"])
def test_dbscan_matches_naive_oracle(metric):
    rng = np.random.default_rng(11)
    for trial in range(10):
        n = int(rng.integers(20, 80))
        rows = rng.normal(0, 1, (n, 3))
        if trial % 2:
            rows[: n // 2] += 4.0
        em = _matrix(rows)
        eps = float(rng.uniform(0.3, 1.5)) if metric == "euclidean" else float(
            rng.uniform(0.05, 0.6)
        )
        mp = int(rng.integers(2, 8))
        a = dbscan(em, ClusterParams(eps=eps, min_points=mp, metric=metric))
        points = {sid: rows[i] for i, sid in enumerate(em.ids)}
        oc, on = naive_dbscan(points, eps, mp, metric)
        assert a.clusters == oc
        assert a.noise == on


def test_silhouette_well_separated():
    rng = np.random.default_rng(5)
    em = _matrix(_blobs(rng, [(0, 0), (20, 20)], 40, spread=0.4))
    a = dbscan(em, ClusterParams(eps=2.0, min_points=5, metric="euclidean"))
    score = silhouette(em, a)
    assert score > 0.8
    points = {sid: em.row(sid) for sid in em.ids}
    assert score == pytest.approx(
        direct_silhouette(points, a.clusters, "euclidean"), abs=1e-9
    )


def test_silhouette_random_split_near_zero():
    rng = np.random.default_rng(6)
    rows = rng.normal(0, 1, (60, 3))
    em = _matrix(rows)
    ids = sorted(em.ids)
    rng.shuffle(ids)
    from alspeech.clustering import ClusterAssignment

    a = ClusterAssignment(
        clusters={1: set(ids[:30]), 2: set(ids[30:])},
        noise=set(),
        params=ClusterParams(eps=1.0, metric="euclidean"),
    )
    assert abs(silhouette(em, a)) < 0.1


def test_silhouette_needs_two_clusters():
    em = _matrix([[0, 0], [0, 1], [1, 0]])
    from alspeech.clustering import ClusterAssignment

    a = ClusterAssignment(
        clusters={1: set(em.ids)},
        noise=set(),
        params=ClusterParams(eps=1.0, metric="euclidean"),
    )
    with pytest.raises(FewerThanTwoClustersError):
        silhouette(em, a)


def test_silhouette_monotone_in_separation():
    rng = np.random.default_rng(9)
    base = rng.normal(0, 0.5, (30, 2))
    from alspeech.clustering import ClusterAssignment

    last = None
    for gap in (2.0, 5.0, 10.0, 25.0):
        rows = np.vstack([base, base + gap])
        em = _matrix(rows)
        a = ClusterAssignment(
            clusters={1: set(em.ids[:30]), 2: set(em.ids[30:])},
            noise=set(),
            params=ClusterParams(eps=1.0, metric="euclidean"),
        )
        score = silhouette(em, a)
        assert -1.0 <= score <= 1.0
        if last is not None:
            assert score >= last
        last = score


def test_default_eps_positive():
    rng = np.random.default_rng(2)
    em = _matrix(rng.normal(0, 1, (50, 4)))
    assert default_eps(em, metric="euclidean") > 0
    assert default_eps(em, metric="cosine") > 0


def test_cluster_params_validation():
    with pytest.raises(ValidationError):
        ClusterParams(eps=0.0)
    with pytest.raises(ValidationError):
        ClusterParams(eps=1.0, min_points=0)
    with pytest.raises(ValidationError):
        ClusterParams(eps=1.0, metric="manhattan")
