"""Shared data model: corpus records, embeddings, selection batches and the
labeled/unlabeled partition that every pipeline step mutates through
``apply_batch_labels``.
"""

from __future__ import annotations

import copy
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from alspeech.errors import (
    ConflictError,
    DuplicateIdError,
    IncompleteBatchError,
    NonFiniteError,
    ValidationError,
)


@dataclass(frozen=True)
class SampleRecord:
    """One audio sample: identity, embedding row, optional oracle label."""

    id: str
    embedding_index: int
    duration_s: Optional[float] = None
    audio_ref: Optional[str] = None
    oracle_text: Optional[str] = None

    def __post_init__(self):
        if self.embedding_index < 0:
            raise ValidationError(
                f"sample {self.id!r}: embedding_index must be >= 0"
            )
        if self.duration_s is not None and self.duration_s < 0:
            raise ValidationError(f"sample {self.id!r}: duration_s must be >= 0")


class EmbeddingMatrix:
    """n x d matrix of finite reals with sample ids aligned to rows."""

    def __init__(self, rows, ids):
        rows = np.asarray(rows, dtype=np.float64)
        if rows.ndim != 2:
            raise ValidationError("embedding rows must form a 2-D array")
        if not np.isfinite(rows).all():
            bad = int(np.where(~np.isfinite(rows).all(axis=1))[0][0])
            raise NonFiniteError(f"non-finite embedding value at row {bad}", row=bad)
        ids = tuple(ids)
        if len(ids) != rows.shape[0]:
            raise ValidationError(
                f"{len(ids)} ids for {rows.shape[0]} embedding rows"
            )
        if len(set(ids)) != len(ids):
            seen, dup = set(), None
            for i in ids:
                if i in seen:
                    dup = i
                    break
                seen.add(i)
            raise DuplicateIdError(f"duplicate embedding id {dup!r}", id=dup)
        self.rows = rows
        self.ids = ids
        self._index = {sid: i for i, sid in enumerate(ids)}

    @property
    def n(self):
        return self.rows.shape[0]

    @property
    def dim(self):
        return self.rows.shape[1]

    def row(self, sample_id):
        return self.rows[self._index[sample_id]]

    def subset(self, sample_ids):
        """Rows for the given ids, in the given order."""
        idx = [self._index[s] for s in sample_ids]
        return self.rows[idx]


@dataclass
class SelectionBatch:
    """Ordered ids chosen in one AL iteration, with provenance."""

    iteration: int
    strategy: str
    chosen: list  # of (sample_id, cluster_id, score)
    quota_plan: Optional[object] = None  # sampling.QuotaPlan when clustered

    @property
    def ids(self):
        return [sid for sid, _, _ in self.chosen]

    def scores(self):
        return [s for _, _, s in self.chosen if s is not None]


def score_digest(values):
    """min/quartiles/max summary kept in history instead of full score maps."""
    if not values:
        return None
    q = np.percentile(np.asarray(values, dtype=float), [0, 25, 50, 75, 100])
    return {
        "min": float(q[0]),
        "q1": float(q[1]),
        "median": float(q[2]),
        "q3": float(q[3]),
        "max": float(q[4]),
    }


@dataclass
class PipelineState:
    """Authoritative labeled/unlabeled partition plus run bookkeeping.

    The partition invariant: labeled, unlabeled and the pending batch's ids
    are pairwise disjoint and together cover the whole corpus.
    """

    iteration: int = 0
    labeled_ids: set = field(default_factory=set)
    unlabeled_ids: set = field(default_factory=set)
    clusters: Optional[object] = None  # clustering.ClusterAssignment
    pending_batch: Optional[SelectionBatch] = None
    labels: dict = field(default_factory=dict)
    config_hash: str = ""
    config: dict = field(default_factory=dict)
    history: list = field(default_factory=list)
    records: dict = field(default_factory=dict)  # id -> SampleRecord
    embeddings_path: Optional[str] = None
    scores: Optional[dict] = None  # {"strategy": str, "values": {id: float}}
    pending_labels: dict = field(default_factory=dict)  # id -> text (via API)

    @property
    def pending_ids(self):
        return set(self.pending_batch.ids) if self.pending_batch else set()

    @property
    def all_ids(self):
        return self.labeled_ids | self.unlabeled_ids | self.pending_ids

    def snapshot(self):
        return copy.deepcopy(self)


def apply_batch_labels(state, batch, labels):
    """Move the batch into the labeled set and advance the iteration.

    ``labels`` must cover exactly the batch ids (empty strings are legal).
    Returns a new state; the input state is untouched.
    """
    batch_ids = set(batch.ids)
    missing = batch_ids - set(labels)
    if missing:
        raise IncompleteBatchError(
            f"missing labels for {len(missing)} batch ids "
            f"(e.g. {sorted(missing)[:3]})",
            ids=sorted(missing),
        )
    extra = set(labels) - batch_ids
    if extra:
        raise IncompleteBatchError(
            f"labels supplied for {len(extra)} ids outside the batch "
            f"(e.g. {sorted(extra)[:3]})",
            ids=sorted(extra),
        )
    already = batch_ids & state.labeled_ids
    if already:
        raise ConflictError(
            f"{len(already)} batch ids already labeled (e.g. {sorted(already)[:3]})",
            ids=sorted(already),
        )
    movable = state.unlabeled_ids | state.pending_ids
    outside = batch_ids - movable
    if outside:
        raise ConflictError(
            f"{len(outside)} batch ids not in the unlabeled pool "
            f"(e.g. {sorted(outside)[:3]})",
            ids=sorted(outside),
        )

    new = state.snapshot()
    new.unlabeled_ids -= batch_ids
    new.labeled_ids |= batch_ids
    for sid in batch_ids:
        new.labels[sid] = labels[sid]
    if new.pending_batch is not None and set(new.pending_batch.ids) == batch_ids:
        new.pending_batch = None
    new.pending_labels = {}
    new.scores = None
    new.iteration += 1
    new.history.append(
        {
            "iteration": new.iteration,
            "batch_size": len(batch_ids),
            "strategy": batch.strategy,
            "score_digest": score_digest(batch.scores()),
        }
    )
    return new


def validate_state(state):
    """Diagnostic invariant check; returns a list of violation strings."""
    violations = []
    overlap = state.labeled_ids & state.unlabeled_ids
    if overlap:
        violations.append(
            f"partition-overlap: ids in both labeled and unlabeled: "
            f"{sorted(overlap)}"
        )
    pending = state.pending_ids
    for name, other in (("labeled", state.labeled_ids), ("unlabeled", state.unlabeled_ids)):
        both = pending & other
        if both:
            violations.append(
                f"partition-overlap: pending batch ids also {name}: {sorted(both)}"
            )
    if state.records:
        corpus = set(state.records)
        covered = state.all_ids
        if covered != corpus:
            lost = corpus - covered
            alien = covered - corpus
            if lost:
                violations.append(f"partition-incomplete: corpus ids unaccounted: {sorted(lost)}")
            if alien:
                violations.append(f"partition-alien: non-corpus ids present: {sorted(alien)}")
    unlabeled_labels = state.labeled_ids - set(state.labels)
    if unlabeled_labels:
        violations.append(
            f"missing-label: labeled ids without a label entry: "
            f"{sorted(unlabeled_labels)}"
        )
    if len(state.history) != state.iteration:
        violations.append(
            f"history-length: {len(state.history)} entries for iteration "
            f"{state.iteration}"
        )
    return violations
