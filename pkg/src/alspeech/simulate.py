"""Desk-scale simulation: synthetic corpora with planted underrepresented
clusters, a mock committee transcriber, and a coverage-difficulty proxy
metric standing in for trained-model WER.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from alspeech.core import EmbeddingMatrix, SampleRecord
from alspeech.errors import ValidationError
from alspeech.storage import CommitteeArtifact, CorpusManifest

TEST_HOLDOUT_FRACTION = 0.3


@dataclass(frozen=True)
class SyntheticCorpusSpec:
    cluster_sizes: tuple = (100, 100, 100, 12, 12)
    dim: int = 8
    cluster_spread: float = 0.6
    inter_cluster_distance: float = 12.0
    vocab_size: int = 50
    words_min: int = 4
    words_max: int = 12
    seed: int = 0
    # per-cluster difficulty in (0, 1]; default favors small clusters
    cluster_difficulty: Optional[tuple] = None

    def __post_init__(self):
        if not self.cluster_sizes or any(s < 1 for s in self.cluster_sizes):
            raise ValidationError("cluster_sizes must be positive")
        if self.dim < 1 or self.cluster_spread <= 0 or self.inter_cluster_distance <= 0:
            raise ValidationError("geometry parameters must be positive")
        if self.words_min < 1 or self.words_max < self.words_min:
            raise ValidationError("bad words_per_utterance range")

    def difficulties(self):
        if self.cluster_difficulty is not None:
            return tuple(self.cluster_difficulty)
        smallest = min(self.cluster_sizes)
        return tuple(smallest / s for s in self.cluster_sizes)

    def to_dict(self):
        return {
            "cluster_sizes": list(self.cluster_sizes),
            "dim": self.dim,
            "cluster_spread": self.cluster_spread,
            "inter_cluster_distance": self.inter_cluster_distance,
            "vocab_size": self.vocab_size,
            "words_min": self.words_min,
            "words_max": self.words_max,
            "seed": self.seed,
            "cluster_difficulty": list(self.cluster_difficulty)
            if self.cluster_difficulty
            else None,
        }


@dataclass
class SimCorpus:
    spec: SyntheticCorpusSpec
    manifest: CorpusManifest
    embeddings: EmbeddingMatrix
    planted_cluster: dict  # id -> planted cluster index
    difficulty: dict  # id -> difficulty of its planted cluster
    centroids: np.ndarray
    test_ids: list  # 30% holdout per planted cluster, seeded


@dataclass
class MockTranscriberSpec:
    per_sample_corruption: dict  # id -> p in [0, 1]
    committee_size: int = 20
    seed: int = 0
    # per-iteration multiplier on corruption, mimicking model retraining
    improvement: float = 0.8
    entropy_scale: float = 1.0
    entropy_noise: float = 0.15

    def __post_init__(self):
        for sid, p in self.per_sample_corruption.items():
            if not 0.0 <= p <= 1.0:
                raise ValidationError(f"corruption for {sid!r} outside [0, 1]")


def _cluster_centers(spec):
    centers = np.zeros((len(spec.cluster_sizes), spec.dim))
    for k in range(len(spec.cluster_sizes)):
        axis = k % spec.dim
        level = 1 + k // spec.dim
        sign = 1.0 if (k // spec.dim) % 2 == 0 else -1.0
        centers[k, axis] = sign * level * spec.inter_cluster_distance
    return centers


def generate_corpus(spec):
    """Gaussian blobs with planted small clusters and oracle transcriptions."""
    rng = np.random.default_rng(spec.seed)
    centers = _cluster_centers(spec)
    difficulties = spec.difficulties()

    ids, rows = [], []
    planted, difficulty = {}, {}
    entries = []
    test_ids = []
    idx = 0
    for k, size in enumerate(spec.cluster_sizes):
        members = []
        for _ in range(size):
            sid = f"s{idx:05d}"
            point = centers[k] + rng.normal(0.0, spec.cluster_spread, spec.dim)
            n_words = int(rng.integers(spec.words_min, spec.words_max + 1))
            words = [f"w{int(rng.integers(spec.vocab_size))}" for _ in range(n_words)]
            ids.append(sid)
            rows.append(point)
            planted[sid] = k
            difficulty[sid] = difficulties[k]
            entries.append(
                SampleRecord(id=sid, embedding_index=idx, oracle_text=" ".join(words))
            )
            members.append(sid)
            idx += 1
        n_test = max(1, int(round(TEST_HOLDOUT_FRACTION * size)))
        picked = rng.choice(size, size=n_test, replace=False)
        test_ids.extend(members[int(i)] for i in sorted(picked))

    return SimCorpus(
        spec=spec,
        manifest=CorpusManifest(entries=entries, source_tag="synthetic"),
        embeddings=EmbeddingMatrix(rows=np.array(rows), ids=ids),
        planted_cluster=planted,
        difficulty=difficulty,
        centroids=centers,
        test_ids=test_ids,
    )


def build_mock_spec(corpus, committee_size=20, seed=0, improvement=0.8):
    """Corruption probabilities from planted difficulty and centroid distance."""
    spread = corpus.spec.cluster_spread
    per_sample = {}
    for rec in corpus.manifest.entries:
        k = corpus.planted_cluster[rec.id]
        d = float(
            np.linalg.norm(corpus.embeddings.row(rec.id) - corpus.centroids[k])
        )
        dist_factor = min(d / (3.0 * spread), 1.0)
        p = corpus.difficulty[rec.id] * (0.35 + 0.35 * dist_factor)
        per_sample[rec.id] = float(min(max(p, 0.0), 0.95))
    return MockTranscriberSpec(
        per_sample_corruption=per_sample,
        committee_size=committee_size,
        seed=seed,
        improvement=improvement,
    )


def _corrupt(words, p, rng, vocab_size):
    out = []
    for w in words:
        if rng.random() < p:
            op = int(rng.integers(3))
            if op == 0:  # substitute
                out.append(f"w{int(rng.integers(vocab_size))}")
            elif op == 1:  # delete
                continue
            else:  # insert after
                out.append(w)
                out.append(f"w{int(rng.integers(vocab_size))}")
        else:
            out.append(w)
    return " ".join(out)


def mock_committee(manifest, spec, iteration=1, vocab_size=None, only_ids=None):
    """Simulated T-member dropout committee output for each sample.

    The reference corrupts the oracle text at p/4 (the no-dropout model is
    better); each hypothesis corrupts independently at p. Token entropies
    track p with one sample-level noise offset.
    """
    if vocab_size is None:
        vocab_size = 50
    decay = spec.improvement ** max(iteration - 1, 0)
    artifacts = {}
    for rec in manifest.entries:
        if only_ids is not None and rec.id not in only_ids:
            continue
        words = (rec.oracle_text or "").split()
        p = spec.per_sample_corruption.get(rec.id, 0.0) * decay
        rng = np.random.default_rng(
            [int(spec.seed), int(iteration), int(rec.embedding_index)]
        )
        reference = _corrupt(words, p / 4.0, rng, vocab_size)
        hypotheses = [
            _corrupt(words, p, rng, vocab_size)
            for _ in range(spec.committee_size)
        ]
        n_tokens = max(len(reference.split()), 1)
        offset = float(rng.normal(0.0, spec.entropy_noise))
        entropies = [
            max(0.0, spec.entropy_scale * p + offset) for _ in range(n_tokens)
        ]
        artifacts[rec.id] = CommitteeArtifact(
            sample_id=rec.id,
            reference=reference,
            hypotheses=hypotheses,
            token_entropies=entropies,
        )
    return artifacts


def proxy_quality(labeled_ids, corpus):
    """Coverage-difficulty score in [0, 1]; lower is better.

    Difficulty-weighted mean over held-out test points of their distance to
    the nearest labeled sample, normalized by the corpus diameter seen from
    the test points. An empty labeled set scores 1.0 by definition.
    """
    labeled = sorted(set(labeled_ids))
    if not labeled:
        return 1.0
    test_rows = corpus.embeddings.subset(corpus.test_ids)
    all_rows = corpus.embeddings.rows
    labeled_rows = corpus.embeddings.subset(labeled)

    def _dists(a, b):
        d2 = (
            np.sum(a * a, axis=1)[:, None]
            + np.sum(b * b, axis=1)[None, :]
            - 2.0 * a @ b.T
        )
        np.maximum(d2, 0.0, out=d2)
        return np.sqrt(d2)

    d_ref = float(_dists(test_rows, all_rows).max())
    if d_ref == 0.0:
        return 0.0
    nearest = _dists(test_rows, labeled_rows).min(axis=1)
    weights = np.array([corpus.difficulty[sid] for sid in corpus.test_ids])
    normalized = np.minimum(nearest / d_ref, 1.0)
    return float((weights * normalized).sum() / weights.sum())
