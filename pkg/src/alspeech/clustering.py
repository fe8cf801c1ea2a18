"""Density clustering of the embedding matrix plus silhouette diagnostics.

The DBSCAN here is deliberately canonical: the partition is a function of
the id set only, not of row order. Cluster numbers are assigned in
ascending order of each cluster's lexicographically smallest member id,
and a border point claimed by several clusters joins the cluster of its
lexicographically smallest core neighbor.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from alspeech.errors import (
    DimensionMismatchError,
    FewerThanTwoClustersError,
    ValidationError,
)

NOISE_CLUSTER_ID = 0  # pseudo-cluster id used when noise is sampling-eligible

METRICS = ("euclidean", "cosine")


@dataclass(frozen=True)
class ClusterParams:
    eps: float
    min_points: int = 5
    metric: str = "cosine"

    def __post_init__(self):
        if self.eps <= 0:
            raise ValidationError("eps must be > 0")
        if self.min_points < 1:
            raise ValidationError("min_points must be >= 1")
        if self.metric not in METRICS:
            raise ValidationError(f"unknown metric {self.metric!r}")

    def to_dict(self):
        return {"eps": self.eps, "min_points": self.min_points, "metric": self.metric}


@dataclass
class ClusterAssignment:
    clusters: dict  # cluster_id (int >= 1) -> set of sample ids
    noise: set
    params: ClusterParams

    def cluster_of(self, sample_id):
        for cid, members in self.clusters.items():
            if sample_id in members:
                return cid
        if sample_id in self.noise:
            return NOISE_CLUSTER_ID
        return None

    def membership(self):
        """id -> cluster_id map (noise mapped to NOISE_CLUSTER_ID)."""
        out = {}
        for cid, members in self.clusters.items():
            for sid in members:
                out[sid] = cid
        for sid in self.noise:
            out[sid] = NOISE_CLUSTER_ID
        return out

    def sampling_groups(self, include_noise=True):
        """cluster_id -> member ids, with noise as a pseudo-cluster."""
        groups = {cid: set(m) for cid, m in self.clusters.items()}
        if include_noise and self.noise:
            groups[NOISE_CLUSTER_ID] = set(self.noise)
        return groups


def pairwise_distance(a, b, metric):
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if a.shape != b.shape:
        raise DimensionMismatchError(f"dimension mismatch: {a.shape} vs {b.shape}")
    if metric == "euclidean":
        return float(np.linalg.norm(a - b))
    if metric == "cosine":
        na = float(np.linalg.norm(a))
        nb = float(np.linalg.norm(b))
        if na == 0.0 and nb == 0.0:
            return 0.0
        if na == 0.0 or nb == 0.0:
            return 1.0
        d = 1.0 - float(np.dot(a, b)) / (na * nb)
        return float(min(max(d, 0.0), 2.0))
    raise ValidationError(f"unknown metric {metric!r}")


def distance_matrix(rows, metric):
    rows = np.asarray(rows, dtype=float)
    if metric == "euclidean":
        sq = np.sum(rows * rows, axis=1)
        d2 = sq[:, None] + sq[None, :] - 2.0 * (rows @ rows.T)
        np.maximum(d2, 0.0, out=d2)
        return np.sqrt(d2)
    if metric == "cosine":
        norms = np.linalg.norm(rows, axis=1)
        safe = np.where(norms == 0.0, 1.0, norms)
        unit = rows / safe[:, None]
        d = 1.0 - unit @ unit.T
        np.clip(d, 0.0, 2.0, out=d)
        zero = norms == 0.0
        if zero.any():
            d[zero, :] = 1.0
            d[:, zero] = 1.0
            zz = np.ix_(zero, zero)
            d[zz] = 0.0
        np.fill_diagonal(d, 0.0)
        return d
    raise ValidationError(f"unknown metric {metric!r}")


def default_eps(embeddings, metric="cosine", k=4, subsample=1000, seed=0):
    """Median k-th nearest-neighbor distance heuristic over a subsample."""
    rows = embeddings.rows
    if rows.shape[0] > subsample:
        rng = np.random.default_rng(seed)
        idx = rng.choice(rows.shape[0], size=subsample, replace=False)
        rows = rows[np.sort(idx)]
    d = distance_matrix(rows, metric)
    kth = min(k, rows.shape[0] - 1)
    if kth < 1:
        return 1.0
    d_sorted = np.sort(d, axis=1)
    eps = float(np.median(d_sorted[:, kth]))
    return eps if eps > 0 else 1e-6


class _UnionFind:
    def __init__(self, n):
        self.parent = list(range(n))

    def find(self, x):
        while self.parent[x] != x:
            self.parent[x] = self.parent[self.parent[x]]
            x = self.parent[x]
        return x

    def union(self, a, b):
        ra, rb = self.find(a), self.find(b)
        if ra != rb:
            self.parent[max(ra, rb)] = min(ra, rb)


def dbscan(embeddings, params):
    """Canonical DBSCAN over the embedding matrix.

    Neighborhoods are closed balls (distance <= eps) including the point
    itself; a point is core when its neighborhood holds >= min_points.
    """
    if embeddings.n < 1:
        raise ValidationError("embedding matrix is empty")
    order = sorted(embeddings.ids)
    rows = embeddings.subset(order)
    n = len(order)
    d = distance_matrix(rows, params.metric)
    adj = d <= params.eps

    counts = adj.sum(axis=1)
    is_core = counts >= params.min_points

    uf = _UnionFind(n)
    core_idx = np.where(is_core)[0]
    for i in core_idx:
        neigh = np.where(adj[i] & is_core)[0]
        for j in neigh:
            if j > i:
                uf.union(int(i), int(j))

    # core clusters keyed by union-find root (root is the smallest index,
    # i.e. lexicographically smallest core member id)
    members = {}
    for i in core_idx:
        members.setdefault(uf.find(int(i)), []).append(int(i))

    noise = []
    for i in range(n):
        if is_core[i]:
            continue
        core_neigh = np.where(adj[i] & is_core)[0]
        if core_neigh.size:
            # smallest-index core neighbor == lexicographically smallest id
            members[uf.find(int(core_neigh[0]))].append(int(i))
        else:
            noise.append(int(i))

    # number clusters by their lexicographically smallest member (which may
    # be a border point, not the union-find root)
    clusters = {}
    for k, group in enumerate(sorted(members.values(), key=min), start=1):
        clusters[k] = {order[i] for i in group}
    return ClusterAssignment(
        clusters=clusters,
        noise={order[i] for i in noise},
        params=params,
    )


def silhouette(embeddings, assignment):
    """Mean per-point silhouette over clustered points; noise excluded."""
    clusters = {
        cid: sorted(m) for cid, m in assignment.clusters.items() if m
    }
    if len(clusters) < 2:
        raise FewerThanTwoClustersError(
            f"silhouette needs >= 2 clusters, got {len(clusters)}"
        )
    ids = [sid for cid in sorted(clusters) for sid in clusters[cid]]
    labels = np.array(
        [cid for cid in sorted(clusters) for _ in clusters[cid]]
    )
    rows = embeddings.subset(ids)
    d = distance_matrix(rows, assignment.params.metric)

    scores = []
    for i in range(len(ids)):
        own = labels == labels[i]
        own_size = int(own.sum())
        if own_size == 1:
            scores.append(0.0)
            continue
        a = float(d[i, own].sum()) / (own_size - 1)
        b = min(
            float(d[i, labels == cid].mean())
            for cid in clusters
            if cid != labels[i]
        )
        denom = max(a, b)
        scores.append(0.0 if denom == 0 else (b - a) / denom)
    return float(np.mean(scores))


def export_cluster_table(assignment):
    """One record per id with its cluster id ('noise' for outliers)."""
    rows = []
    for cid in sorted(assignment.clusters):
        for sid in sorted(assignment.clusters[cid]):
            rows.append({"id": sid, "cluster_id": cid})
    for sid in sorted(assignment.noise):
        rows.append({"id": sid, "cluster_id": "noise"})
    rows.sort(key=lambda r: r["id"])
    return rows
