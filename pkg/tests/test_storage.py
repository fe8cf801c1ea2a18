import json

import numpy as np
import pytest

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
from alspeech.sampling import plan_quotas
from alspeech.storage import (
    CommitteeArtifact,
    CorpusManifest,
    config_hash,
    dumps_state,
    load_committee,
    load_embeddings,
    load_manifest,
    load_state,
    save_committee,
    save_embeddings,
    save_manifest,
    save_state,
    state_from_doc,
    state_to_doc,
)


def test_manifest_roundtrip(tmp_path):
    m = CorpusManifest(
        entries=[
            SampleRecord(id="a", embedding_index=0, duration_s=1.5, oracle_text="hi"),
            SampleRecord(id="b", embedding_index=1, audio_ref="b.wav"),
        ]
    )
    p = tmp_path / "m.jsonl"
    save_manifest(m, p)
    back = load_manifest(p, n_embedding_rows=2)
    assert back.ids == ["a", "b"]
    assert back.by_id()["a"].oracle_text == "hi"
    assert back.by_id()["b"].audio_ref == "b.wav"


def test_manifest_errors(tmp_path):
    p = tmp_path / "m.jsonl"
    p.write_text('{"id": "a", "embedding_index": 0}\nnot json\n')
    with pytest.raises(ParseError) as e:
        load_manifest(p)
    assert e.value.details["line"] == 2

    p.write_text('{"id": "a", "embedding_index": 0}\n{"id": "a", "embedding_index": 1}\n')
    with pytest.raises(DuplicateIdError):
        load_manifest(p)

    p.write_text('{"id": "a", "embedding_index": 0}\n{"id": "b", "embedding_index": 0}\n')
    with pytest.raises(DuplicateIdError):
        load_manifest(p)

    p.write_text('{"id": "a", "embedding_index": 5}\n')
    with pytest.raises(ValidationError):
        load_manifest(p, n_embedding_rows=2)

    with pytest.raises(IoError):
        load_manifest(tmp_path / "missing.jsonl")


def test_embeddings_binary_roundtrip(tmp_path):
    rng = np.random.default_rng(0)
    em = EmbeddingMatrix(rng.normal(0, 1, (7, 3)).astype(np.float32), [f"s{i}" for i in range(7)])
    p = tmp_path / "emb.bin"
    save_embeddings(em, p)
    back = load_embeddings(p, ids=em.ids)
    assert back.ids == em.ids
    np.testing.assert_allclose(back.rows, em.rows, rtol=1e-6)


def test_embeddings_text_format(tmp_path):
    p = tmp_path / "emb.txt"
    p.write_text("2 3\n1 2 3\n4 5 6\n")
    em = load_embeddings(p)
    assert em.n == 2 and em.dim == 3
    assert em.ids == ("0", "1")
    assert em.row("1").tolist() == [4.0, 5.0, 6.0]


def test_embeddings_text_errors(tmp_path):
    p = tmp_path / "emb.txt"
    p.write_text("2\n1 2\n")
    with pytest.raises(ParseError):
        load_embeddings(p)
    p.write_text("1 2\n1\n")
    with pytest.raises(ParseError):
        load_embeddings(p)
    p.write_text("1 2\n1 nan\n")
    with pytest.raises(NonFiniteError) as e:
        load_embeddings(p)
    assert e.value.details["row"] == 0


def test_embeddings_binary_truncated(tmp_path):
    p = tmp_path / "emb.bin"
    p.write_bytes(b"XVEC0001" + b"\x02\x00\x00\x00\x02\x00\x00\x00" + b"\x00" * 4)
    with pytest.raises(ParseError):
        load_embeddings(p)


def test_committee_roundtrip(tmp_path):
    arts = {
        "a": CommitteeArtifact("a", "ref a", ["h1", "h2"], [0.1, 0.2]),
        "b": CommitteeArtifact("b", "ref b", ["h3", "h4"], None),
    }
    p = tmp_path / "c.jsonl"
    save_committee(arts, p)
    back = load_committee(p, expected_t=2)
    assert back["a"].token_entropies == [0.1, 0.2]
    assert back["b"].token_entropies is None
    assert back["a"].hypotheses == ["h1", "h2"]


def test_committee_errors(tmp_path):
    p = tmp_path / "c.jsonl"
    p.write_text('{"id": "a", "reference": "r", "hypotheses": ["x"]}\n')
    with pytest.raises(WrongArityError) as e:
        load_committee(p, expected_t=3)
    assert e.value.details["found"] == 1

    line = '{"id": "a", "reference": "r", "hypotheses": ["x"]}\n'
    p.write_text(line + line)
    with pytest.raises(DuplicateIdError):
        load_committee(p, expected_t=1)

    p.write_text('{"id": "a", "reference": "r", "hypotheses": ["x"], "token_entropies": [-1]}\n')
    with pytest.raises(ValidationError):
        load_committee(p, expected_t=1)


def _full_state():
    plan = plan_quotas({1: 3, 2: 2}, 3)
    batch = SelectionBatch(
        iteration=0,
        strategy="proposed",
        chosen=[("s1", 1, 0.5), ("s3", 2, None)],
        quota_plan=plan,
    )
    return PipelineState(
        iteration=1,
        labeled_ids={"s0"},
        unlabeled_ids={"s2", "s4"},
        clusters=ClusterAssignment(
            clusters={1: {"s0", "s1", "s2"}, 2: {"s3", "s4"}},
            noise=set(),
            params=ClusterParams(eps=1.0, metric="euclidean"),
        ),
        pending_batch=batch,
        labels={"s0": "hello"},
        config_hash=config_hash({"seed": 1}),
        config={"seed": 1},
        history=[{"iteration": 1, "batch_size": 1, "strategy": "random", "score_digest": None}],
        records={
            f"s{i}": SampleRecord(id=f"s{i}", embedding_index=i) for i in range(5)
        },
        embeddings_path="emb.bin",
        scores={"strategy": "proposed", "iteration": 1, "values": {"s2": 0.3}, "digest": None},
        pending_labels={"s1": "typed"},
    )


def test_state_roundtrip(tmp_path):
    state = _full_state()
    p = tmp_path / "state.json"
    save_state(state, p)
    back = load_state(p)
    assert back.iteration == state.iteration
    assert back.labeled_ids == state.labeled_ids
    assert back.unlabeled_ids == state.unlabeled_ids
    assert back.clusters.clusters == state.clusters.clusters
    assert back.pending_batch.chosen == state.pending_batch.chosen
    assert back.pending_batch.quota_plan.quotas == state.pending_batch.quota_plan.quotas
    assert back.labels == state.labels
    assert back.records["s3"].embedding_index == 3
    assert back.scores == state.scores
    assert back.pending_labels == state.pending_labels
    # canonical: re-serialization is byte identical
    assert dumps_state(back) == dumps_state(state)


def test_state_canonical_form(tmp_path):
    text = dumps_state(_full_state())
    assert text.endswith("\n")
    doc = json.loads(text)
    assert doc["format_version"] == 1
    assert doc["labeled_ids"] == sorted(doc["labeled_ids"])
    assert text == json.dumps(doc, sort_keys=True, indent=2, ensure_ascii=False) + "\n"


def test_state_version_and_unknown_fields():
    doc = state_to_doc(_full_state())
    doc["format_version"] = 2
    with pytest.raises(VersionError):
        state_from_doc(doc)
    doc = state_to_doc(_full_state())
    doc["surprise"] = True
    with pytest.raises(VersionError):
        state_from_doc(doc)


def test_state_strict_config_check(tmp_path):
    state = _full_state()
    p = tmp_path / "state.json"
    save_state(state, p)
    load_state(p, expected_config={"seed": 1}, strict=True)
    with pytest.raises(IntegrityError):
        load_state(p, expected_config={"seed": 2}, strict=True)
    with pytest.raises(ValidationError):
        load_state(p, strict=True)


def test_config_hash_order_independent():
    assert config_hash({"a": 1, "b": 2}) == config_hash({"b": 2, "a": 1})
    assert config_hash({"a": 1}) != config_hash({"a": 2})


def test_atomic_write_leaves_no_temp_files(tmp_path):
    state = _full_state()
    p = tmp_path / "state.json"
    save_state(state, p)
    save_state(state, p)
    leftovers = [f for f in tmp_path.iterdir() if f.name != "state.json"]
    assert leftovers == []
