import json

import pytest

from alspeech import simulate
from alspeech.core import apply_batch_labels, validate_state
from alspeech.errors import (
    MissingScoreError,
    PendingBatchError,
    StateConflictError,
)
from alspeech.pipeline import (
    PipelineConfig,
    emit_transcriber_request,
    ingest,
    oracle_labels,
    run_stage1,
    run_stage2_iteration,
    run_simulation_loop,
    scoring_pool,
)
from alspeech.storage import dumps_state, load_state, save_state


CONFIG = PipelineConfig(
    target_per_iteration=12,
    iterations=2,
    committee_size=4,
    metric="euclidean",
    eps=3.0,
    seed=0,
)

SPEC = simulate.SyntheticCorpusSpec(
    cluster_sizes=(40, 40, 8), dim=4, seed=0, vocab_size=20
)


@pytest.fixture(scope="module")
def corpus():
    return simulate.generate_corpus(SPEC)


@pytest.fixture(scope="module")
def mock(corpus):
    return simulate.build_mock_spec(corpus, committee_size=4, seed=0)


def _arts(corpus, mock, state, h):
    return simulate.mock_committee(
        corpus.manifest, mock, iteration=h, vocab_size=SPEC.vocab_size,
        only_ids=state.unlabeled_ids | state.pending_ids,
    )


def test_config_roundtrip_and_hash():
    d = CONFIG.to_dict()
    assert PipelineConfig.from_dict(d) == CONFIG
    assert CONFIG.hash() == PipelineConfig.from_dict(d).hash()
    assert CONFIG.hash() != PipelineConfig(seed=1).hash()


def test_ingest_partition(corpus):
    state = ingest(CONFIG, corpus.manifest)
    assert state.iteration == 0
    assert len(state.unlabeled_ids) == sum(SPEC.cluster_sizes)
    assert not state.labeled_ids
    assert validate_state(state) == []


def test_stage1_batch(corpus):
    state, batch = run_stage1(CONFIG, corpus.manifest, corpus.embeddings)
    assert batch.iteration == 0
    assert len(batch.ids) == CONFIG.target_per_iteration
    assert state.pending_batch is batch or state.pending_batch.chosen == batch.chosen
    assert set(batch.ids).isdisjoint(state.unlabeled_ids)
    assert validate_state(state) == []
    # deterministic under the same seed
    state2, batch2 = run_stage1(CONFIG, corpus.manifest, corpus.embeddings)
    assert batch2.chosen == batch.chosen


def test_scoring_pool_without_clusters_is_whole_pool(corpus):
    state = ingest(CONFIG, corpus.manifest)
    h, groups = scoring_pool(state, CONFIG)
    assert h == 0
    assert groups == {None: state.unlabeled_ids}


def test_stage2_needs_stage1_applied(corpus, mock):
    state, batch = run_stage1(CONFIG, corpus.manifest, corpus.embeddings)
    arts = _arts(corpus, mock, state, 1)
    with pytest.raises(PendingBatchError):
        run_stage2_iteration(state, CONFIG, arts)
    fresh = ingest(CONFIG, corpus.manifest)
    with pytest.raises(StateConflictError):
        run_stage2_iteration(fresh, CONFIG, arts)


def _labeled_stage1(corpus):
    state, batch = run_stage1(CONFIG, corpus.manifest, corpus.embeddings)
    return apply_batch_labels(state, batch, oracle_labels(state, batch))


def test_full_loop_partition_cardinalities(corpus, mock):
    state = _labeled_stage1(corpus)
    total = sum(SPEC.cluster_sizes)
    assert len(state.labeled_ids) == CONFIG.target_per_iteration
    for h in (1, 2):
        arts = _arts(corpus, mock, state, h)
        state, batch = run_stage2_iteration(state, CONFIG, arts)
        assert batch is not None
        assert batch.strategy == "proposed"
        assert len(batch.ids) == CONFIG.target_per_iteration
        assert state.scores["iteration"] == h
        assert validate_state(state) == []
        state = apply_batch_labels(state, batch, oracle_labels(state, batch))
        assert len(state.labeled_ids) == (h + 1) * CONFIG.target_per_iteration
        assert len(state.labeled_ids) + len(state.unlabeled_ids) == total
    # H exhausted: no further batch
    arts = _arts(corpus, mock, state, 3)
    state, batch = run_stage2_iteration(state, CONFIG, arts)
    assert batch is None


def test_stage2_missing_artifacts(corpus, mock):
    state = _labeled_stage1(corpus)
    with pytest.raises(MissingScoreError):
        run_stage2_iteration(state, CONFIG, {})


def test_emit_transcriber_request(corpus, tmp_path):
    state = _labeled_stage1(corpus)
    path = tmp_path / "req.json"
    emit_transcriber_request(state, CONFIG, path)
    doc = json.loads(path.read_text())
    assert doc["iteration"] == 1
    assert doc["expected_T"] == CONFIG.committee_size
    assert set(doc["ids"]) == state.unlabeled_ids
    assert doc["ids"] == sorted(doc["ids"])


def test_request_matches_scored_pool_with_fraction(corpus, mock, tmp_path):
    config = PipelineConfig(**{**CONFIG.to_dict(), "scoring_fraction": 0.5})
    state, batch = run_stage1(config, corpus.manifest, corpus.embeddings)
    state = apply_batch_labels(state, batch, oracle_labels(state, batch))
    path = tmp_path / "req.json"
    emit_transcriber_request(state, config, path)
    requested = set(json.loads(path.read_text())["ids"])
    assert requested < state.unlabeled_ids
    arts = {
        sid: a
        for sid, a in _arts(corpus, mock, state, 1).items()
        if sid in requested
    }
    new, batch = run_stage2_iteration(state, config, arts)
    assert batch is not None
    assert set(batch.ids) <= requested


def test_crash_resume_identical_selection(corpus, mock, tmp_path):
    state = _labeled_stage1(corpus)
    path = tmp_path / "state.json"
    save_state(state, path)
    resumed = load_state(path, expected_config=CONFIG.to_dict(), strict=True)
    arts = _arts(corpus, mock, state, 1)
    a_state, a_batch = run_stage2_iteration(state, CONFIG, arts)
    b_state, b_batch = run_stage2_iteration(resumed, CONFIG, arts)
    assert a_batch.chosen == b_batch.chosen
    assert dumps_state(a_state) == dumps_state(b_state)


def test_oracle_labels(corpus):
    state, batch = run_stage1(CONFIG, corpus.manifest, corpus.embeddings)
    labels = oracle_labels(state, batch)
    assert set(labels) == set(batch.ids)
    assert all(isinstance(v, str) for v in labels.values())


def test_simulation_loop_report_shape():
    config = PipelineConfig(
        target_per_iteration=10, iterations=2, committee_size=3,
        metric="euclidean", eps=3.0,
    )
    spec = simulate.SyntheticCorpusSpec(cluster_sizes=(30, 30, 6), dim=4, vocab_size=20)
    report = run_simulation_loop(config, spec, ("proposed", "random"), seeds=(0, 1))
    assert set(report["strategies"]) == {"proposed", "random"}
    for name, block in report["strategies"].items():
        assert len(block["iterations"]) == config.iterations + 1
        for row in block["iterations"]:
            assert 0.0 <= row["proxy_metric_mean"] <= 1.0
        for seed in ("0", "1"):
            per = block["per_seed"][seed]
            assert len(per["proxy"]) == config.iterations + 1
            assert len(per["uncertainty_quartiles"]) == config.iterations
    # the report is JSON-serializable as produced
    json.dumps(report)
