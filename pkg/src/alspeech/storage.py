"""File formats and persistence.

- Manifest: JSON lines, one sample record per line.
- Embeddings: binary (magic ``XVEC0001``, u32 n, u32 d, little-endian
  float32 rows) or a line-based text format ("n d" header then one row
  per line); auto-detected by magic bytes.
- Committee artifacts: JSON lines, one record per line with the reference
  transcription and exactly T stochastic hypotheses.
- State: one canonical JSON document (sorted keys) with format_version 1,
  written via temp-file-then-rename so saves are crash-atomic.
"""

from __future__ import annotations

import json
import math
import os
import struct
import tempfile
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from alspeech.clustering import ClusterAssignment, ClusterParams
from alspeech.core import EmbeddingMatrix, PipelineState, SampleRecord, SelectionBatch
from alspeech.errors import (
    DuplicateIdError,
    IntegrityError,
    IoError,
    NonFiniteError,
    ParseError,
    ValidationError,
    VersionError,
    WrongArityError,
)
from alspeech.sampling import QuotaPlan

FORMAT_VERSION = 1
EMBEDDING_MAGIC = b"XVEC0001"
DEFAULT_T = 20


@dataclass
class CorpusManifest:
    entries: list  # of SampleRecord
    source_tag: str = ""

    @property
    def ids(self):
        return [r.id for r in self.entries]

    def by_id(self):
        return {r.id: r for r in self.entries}


@dataclass
class CommitteeArtifact:
    sample_id: str
    reference: str
    hypotheses: list
    token_entropies: Optional[list] = None


def load_manifest(path, n_embedding_rows=None, source_tag=""):
    entries = []
    seen_ids = set()
    seen_rows = set()
    try:
        fh = open(path, encoding="utf-8")
    except OSError as e:
        raise IoError(f"cannot open manifest {path}: {e}")
    with fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                doc = json.loads(line)
            except json.JSONDecodeError as e:
                raise ParseError(f"manifest {path} line {lineno}: {e}", line=lineno)
            if not isinstance(doc, dict) or "id" not in doc or "embedding_index" not in doc:
                raise ParseError(
                    f"manifest {path} line {lineno}: record needs 'id' and "
                    f"'embedding_index'",
                    line=lineno,
                )
            rec = SampleRecord(
                id=str(doc["id"]),
                embedding_index=int(doc["embedding_index"]),
                duration_s=doc.get("duration_s"),
                audio_ref=doc.get("audio_ref"),
                oracle_text=doc.get("oracle_text"),
            )
            if rec.id in seen_ids:
                raise DuplicateIdError(
                    f"manifest {path} line {lineno}: duplicate id {rec.id!r}",
                    id=rec.id,
                )
            if rec.embedding_index in seen_rows:
                raise DuplicateIdError(
                    f"manifest {path} line {lineno}: duplicate embedding_index "
                    f"{rec.embedding_index}",
                    id=rec.id,
                )
            if n_embedding_rows is not None and rec.embedding_index >= n_embedding_rows:
                raise ValidationError(
                    f"manifest {path} line {lineno}: embedding_index "
                    f"{rec.embedding_index} dangles beyond {n_embedding_rows} rows",
                    id=rec.id,
                )
            seen_ids.add(rec.id)
            seen_rows.add(rec.embedding_index)
            entries.append(rec)
    return CorpusManifest(entries=entries, source_tag=source_tag)


def save_manifest(manifest, path):
    lines = []
    for rec in manifest.entries:
        doc = {"id": rec.id, "embedding_index": rec.embedding_index}
        if rec.duration_s is not None:
            doc["duration_s"] = rec.duration_s
        if rec.audio_ref is not None:
            doc["audio_ref"] = rec.audio_ref
        if rec.oracle_text is not None:
            doc["oracle_text"] = rec.oracle_text
        lines.append(json.dumps(doc, sort_keys=True, ensure_ascii=False))
    _atomic_write(path, "\n".join(lines) + ("\n" if lines else ""))


def load_embeddings(path, ids=None):
    """Load either embedding format; ids default to row indices as strings."""
    try:
        with open(path, "rb") as fh:
            head = fh.read(len(EMBEDDING_MAGIC))
            if head == EMBEDDING_MAGIC:
                return _load_embeddings_binary(fh, path, ids)
    except OSError as e:
        raise IoError(f"cannot open embeddings {path}: {e}")
    return _load_embeddings_text(path, ids)


def _load_embeddings_binary(fh, path, ids):
    header = fh.read(8)
    if len(header) != 8:
        raise ParseError(f"embeddings {path}: truncated header")
    n, d = struct.unpack("<II", header)
    body = fh.read()
    expected = n * d * 4
    if len(body) != expected:
        raise ParseError(
            f"embeddings {path}: body holds {len(body)} bytes, header "
            f"({n}, {d}) requires {expected}"
        )
    rows = np.frombuffer(body, dtype="<f4").reshape(n, d).astype(np.float64)
    return _finish_embeddings(rows, path, ids)


def _load_embeddings_text(path, ids):
    with open(path, encoding="utf-8") as fh:
        header = fh.readline().split()
        if len(header) != 2:
            raise ParseError(f"embeddings {path}: text header must be 'n d'")
        try:
            n, d = int(header[0]), int(header[1])
        except ValueError:
            raise ParseError(f"embeddings {path}: non-integer text header")
        rows = np.empty((n, d), dtype=np.float64)
        for i in range(n):
            parts = fh.readline().split()
            if len(parts) != d:
                raise ParseError(
                    f"embeddings {path}: row {i} has {len(parts)} values, "
                    f"expected {d}"
                )
            try:
                rows[i] = [float(p) for p in parts]
            except ValueError:
                raise ParseError(f"embeddings {path}: non-numeric value in row {i}")
    return _finish_embeddings(rows, path, ids)


def _finish_embeddings(rows, path, ids):
    finite = np.isfinite(rows).all(axis=1)
    if not finite.all():
        bad = int(np.where(~finite)[0][0])
        raise NonFiniteError(f"embeddings {path}: non-finite value at row {bad}", row=bad)
    if ids is None:
        ids = [str(i) for i in range(rows.shape[0])]
    return EmbeddingMatrix(rows=rows, ids=ids)


def save_embeddings(matrix, path):
    n, d = matrix.rows.shape
    payload = EMBEDDING_MAGIC + struct.pack("<II", n, d)
    payload += matrix.rows.astype("<f4").tobytes()
    _atomic_write_bytes(path, payload)


def load_committee(path, expected_t=DEFAULT_T):
    artifacts = {}
    try:
        fh = open(path, encoding="utf-8")
    except OSError as e:
        raise IoError(f"cannot open committee file {path}: {e}")
    with fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                doc = json.loads(line)
            except json.JSONDecodeError as e:
                raise ParseError(f"committee {path} line {lineno}: {e}", line=lineno)
            sid = str(doc.get("id"))
            hyps = doc.get("hypotheses")
            if sid is None or "reference" not in doc or not isinstance(hyps, list):
                raise ParseError(
                    f"committee {path} line {lineno}: needs id, reference, "
                    f"hypotheses",
                    line=lineno,
                )
            if len(hyps) != expected_t:
                raise WrongArityError(
                    f"committee {path}: id {sid!r} has {len(hyps)} hypotheses, "
                    f"expected {expected_t}",
                    id=sid,
                    found=len(hyps),
                )
            if sid in artifacts:
                raise DuplicateIdError(
                    f"committee {path} line {lineno}: duplicate id {sid!r}", id=sid
                )
            ent = doc.get("token_entropies")
            if ent is not None:
                ent = [float(e) for e in ent]
                if any((not math.isfinite(e)) or e < 0 for e in ent):
                    raise ValidationError(
                        f"committee {path}: id {sid!r} has invalid token entropies",
                        id=sid,
                    )
            artifacts[sid] = CommitteeArtifact(
                sample_id=sid,
                reference=str(doc["reference"]),
                hypotheses=[str(h) for h in hyps],
                token_entropies=ent,
            )
    return artifacts


def save_committee(artifacts, path):
    lines = []
    for sid in sorted(artifacts):
        a = artifacts[sid]
        doc = {"id": a.sample_id, "reference": a.reference, "hypotheses": a.hypotheses}
        if a.token_entropies is not None:
            doc["token_entropies"] = a.token_entropies
        lines.append(json.dumps(doc, sort_keys=True, ensure_ascii=False))
    _atomic_write(path, "\n".join(lines) + ("\n" if lines else ""))


# --- state (de)serialization ---

_STATE_FIELDS = {
    "format_version",
    "iteration",
    "labeled_ids",
    "unlabeled_ids",
    "clusters",
    "pending_batch",
    "labels",
    "config_hash",
    "config",
    "history",
    "records",
    "embeddings_path",
    "scores",
    "pending_labels",
}


def _batch_to_doc(batch):
    if batch is None:
        return None
    return {
        "iteration": batch.iteration,
        "strategy": batch.strategy,
        "chosen": [[sid, cid, score] for sid, cid, score in batch.chosen],
        "quota_plan": batch.quota_plan.to_dict() if batch.quota_plan else None,
    }


def _batch_from_doc(doc):
    if doc is None:
        return None
    plan = None
    if doc.get("quota_plan"):
        pd = doc["quota_plan"]
        plan = QuotaPlan(
            target=pd["target"],
            beta=pd["beta"],
            gamma=pd["gamma"],
            quotas={int(k): v for k, v in pd["quotas"].items()},
            adjustments=list(pd["adjustments"]),
        )
    return SelectionBatch(
        iteration=doc["iteration"],
        strategy=doc["strategy"],
        chosen=[(sid, cid, score) for sid, cid, score in doc["chosen"]],
        quota_plan=plan,
    )


def _clusters_to_doc(assignment):
    if assignment is None:
        return None
    return {
        "params": assignment.params.to_dict(),
        "clusters": {
            str(cid): sorted(members)
            for cid, members in assignment.clusters.items()
        },
        "noise": sorted(assignment.noise),
    }


def _clusters_from_doc(doc):
    if doc is None:
        return None
    return ClusterAssignment(
        clusters={int(cid): set(m) for cid, m in doc["clusters"].items()},
        noise=set(doc["noise"]),
        params=ClusterParams(**doc["params"]),
    )


def state_to_doc(state):
    return {
        "format_version": FORMAT_VERSION,
        "iteration": state.iteration,
        "labeled_ids": sorted(state.labeled_ids),
        "unlabeled_ids": sorted(state.unlabeled_ids),
        "clusters": _clusters_to_doc(state.clusters),
        "pending_batch": _batch_to_doc(state.pending_batch),
        "labels": dict(sorted(state.labels.items())),
        "config_hash": state.config_hash,
        "config": state.config,
        "history": state.history,
        "records": {
            rec.id: {
                "embedding_index": rec.embedding_index,
                "duration_s": rec.duration_s,
                "audio_ref": rec.audio_ref,
                "oracle_text": rec.oracle_text,
            }
            for rec in state.records.values()
        },
        "embeddings_path": state.embeddings_path,
        "scores": state.scores,
        "pending_labels": dict(sorted(state.pending_labels.items())),
    }


def state_from_doc(doc):
    if doc.get("format_version") != FORMAT_VERSION:
        raise VersionError(
            f"unsupported state format_version {doc.get('format_version')!r}, "
            f"expected {FORMAT_VERSION}"
        )
    unknown = set(doc) - _STATE_FIELDS
    if unknown:
        raise VersionError(f"unknown state fields {sorted(unknown)}; refusing to load")
    records = {
        sid: SampleRecord(
            id=sid,
            embedding_index=rd["embedding_index"],
            duration_s=rd.get("duration_s"),
            audio_ref=rd.get("audio_ref"),
            oracle_text=rd.get("oracle_text"),
        )
        for sid, rd in doc.get("records", {}).items()
    }
    return PipelineState(
        iteration=doc["iteration"],
        labeled_ids=set(doc["labeled_ids"]),
        unlabeled_ids=set(doc["unlabeled_ids"]),
        clusters=_clusters_from_doc(doc.get("clusters")),
        pending_batch=_batch_from_doc(doc.get("pending_batch")),
        labels=dict(doc["labels"]),
        config_hash=doc.get("config_hash", ""),
        config=doc.get("config", {}),
        history=list(doc.get("history", [])),
        records=records,
        embeddings_path=doc.get("embeddings_path"),
        scores=doc.get("scores"),
        pending_labels=dict(doc.get("pending_labels", {})),
    )


def dumps_state(state):
    return json.dumps(state_to_doc(state), sort_keys=True, indent=2, ensure_ascii=False) + "\n"


def save_state(state, path):
    _atomic_write(path, dumps_state(state))


def load_state(path, expected_config=None, strict=False):
    try:
        with open(path, encoding="utf-8") as fh:
            doc = json.load(fh)
    except OSError as e:
        raise IoError(f"cannot open state {path}: {e}")
    except json.JSONDecodeError as e:
        raise ParseError(f"state {path}: {e}")
    state = state_from_doc(doc)
    if strict:
        if expected_config is None:
            raise ValidationError("strict load needs the expected config")
        if config_hash(expected_config) != state.config_hash:
            raise IntegrityError(
                "config_hash mismatch: state was produced under a different config"
            )
    return state


def config_hash(config_dict):
    import hashlib

    canon = json.dumps(config_dict, sort_keys=True, ensure_ascii=False)
    return hashlib.sha256(canon.encode("utf-8")).hexdigest()


def _atomic_write(path, text):
    _atomic_write_bytes(path, text.encode("utf-8"))


def _atomic_write_bytes(path, payload):
    directory = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".tmp-", suffix=".part")
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(payload)
            fh.flush()
            os.fsync(fh.fileno())
        os.replace(tmp, path)
    except OSError as e:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise IoError(f"cannot write {path}: {e}")
