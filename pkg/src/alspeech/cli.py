"""Command-line entry points for every pipeline step.

Exit codes: 0 success, 2 validation, 3 state conflict, 4 I/O. Errors print
one machine-readable line: ``error <code>: <message>``.
"""

from __future__ import annotations

import functools
import json
import os
import sys

import click

from alspeech import pipeline, sampling, strategies
from alspeech.clustering import export_cluster_table
from alspeech.core import apply_batch_labels, score_digest, validate_state
from alspeech.errors import (
    AlspeechError,
    LockedError,
    MissingClustersError,
    MissingScoreError,
    PendingBatchError,
    StateConflictError,
    ValidationError,
)
from alspeech.metrics import cmer, entropy_uncertainty, score_committee
from alspeech.pipeline import PipelineConfig
from alspeech.storage import (
    load_committee,
    load_embeddings,
    load_manifest,
    load_state,
    save_state,
)


def _fail_on_error(fn):
    @functools.wraps(fn)
    def wrapper(*args, **kwargs):
        try:
            return fn(*args, **kwargs)
        except AlspeechError as e:
            click.echo(f"error {e.code}: {e.message}", err=True)
            sys.exit(e.exit_code)

    return wrapper


def _check_unlocked(state_path):
    if os.path.exists(str(state_path) + ".lock"):
        raise LockedError(
            f"state {state_path} is locked by a running service; stop it first"
        )


def _load(state_path):
    return load_state(state_path)


def _config_of(state):
    return PipelineConfig.from_dict(state.config) if state.config else PipelineConfig()


def _embeddings_for_state(state):
    if not state.embeddings_path:
        raise ValidationError("state records no embeddings path; re-run ingest")
    raw = load_embeddings(state.embeddings_path)
    return _align_embeddings(raw, state.records)


def _align_embeddings(raw, records):
    from alspeech.core import EmbeddingMatrix

    ordered = sorted(records.values(), key=lambda r: r.id)
    rows = raw.rows[[r.embedding_index for r in ordered]]
    return EmbeddingMatrix(rows=rows, ids=[r.id for r in ordered])


@click.group()
def main():
    """Two-stage active-learning data selection for speech transcription."""


@main.command()
@click.option("--manifest", "manifest_path", required=True, type=click.Path(exists=True))
@click.option("--embeddings", "embeddings_path", required=True, type=click.Path(exists=True))
@click.option("--out-state", required=True, type=click.Path())
@click.option("--target", default=643, show_default=True)
@click.option("--iterations", default=3, show_default=True)
@click.option("--committee-size", default=20, show_default=True)
@click.option("--seed", default=0, show_default=True)
@click.option("--strategy", default="proposed", show_default=True)
@click.option("--scoring-fraction", default=1.0, show_default=True)
@_fail_on_error
def ingest(manifest_path, embeddings_path, out_state, target, iterations,
           committee_size, seed, strategy, scoring_fraction):
    """Validate manifest + embeddings and write a fresh iteration-0 state."""
    raw = load_embeddings(embeddings_path)
    manifest = load_manifest(manifest_path, n_embedding_rows=raw.n)
    config = PipelineConfig(
        target_per_iteration=target,
        iterations=iterations,
        committee_size=committee_size,
        seed=seed,
        strategy=strategy,
        scoring_fraction=scoring_fraction,
    )
    state = pipeline.ingest(config, manifest, embeddings_path=os.path.abspath(embeddings_path))
    save_state(state, out_state)
    click.echo(f"ingested {len(manifest.entries)} samples -> {out_state}")


@main.command()
@click.option("--state", "state_path", required=True, type=click.Path(exists=True))
@click.option("--eps", type=float, default=None)
@click.option("--min-points", type=int, default=None)
@click.option("--metric", type=click.Choice(["euclidean", "cosine"]), default=None)
@_fail_on_error
def cluster(state_path, eps, min_points, metric):
    """Cluster the embeddings with DBSCAN and store the assignment."""
    _check_unlocked(state_path)
    state = _load(state_path)
    config = _config_of(state)
    overrides = {}
    if eps is not None:
        overrides["eps"] = eps
    if min_points is not None:
        overrides["min_points"] = min_points
    if metric is not None:
        overrides["metric"] = metric
    if overrides:
        from dataclasses import replace

        config = replace(config, **overrides)
        state.config = config.to_dict()
        state.config_hash = config.hash()
    embeddings = _embeddings_for_state(state)
    state = pipeline.cluster_state(state, config, embeddings)
    save_state(state, state_path)
    table_path = str(state_path) + ".clusters.json"
    with open(table_path, "w", encoding="utf-8") as fh:
        json.dump(export_cluster_table(state.clusters), fh, indent=2)
        fh.write("\n")
    click.echo(
        f"clustered: {len(state.clusters.clusters)} clusters, "
        f"{len(state.clusters.noise)} noise -> {table_path}"
    )


def _emit_select_artifacts(state, config, state_path, batch):
    request_path = str(state_path) + ".request.json"
    pipeline.emit_transcriber_request(state, config, request_path)
    plan_path = str(state_path) + ".plan.json"
    plan = batch.quota_plan.to_dict() if batch.quota_plan else None
    batch_path = str(state_path) + ".batch.json"
    with open(plan_path, "w", encoding="utf-8") as fh:
        json.dump(plan, fh, indent=2)
        fh.write("\n")
    with open(batch_path, "w", encoding="utf-8") as fh:
        json.dump(
            {
                "iteration": batch.iteration,
                "strategy": batch.strategy,
                "chosen": [[sid, cid, s] for sid, cid, s in batch.chosen],
            },
            fh,
            indent=2,
        )
        fh.write("\n")
    return request_path


@main.command()
@click.option("--state", "state_path", required=True, type=click.Path(exists=True))
@click.option("--stage", type=click.Choice(["initial", "batch"]), required=True)
@click.option("--strategy", default=None)
@click.option("--target", type=int, default=None)
@click.option("--seed", type=int, default=None)
@_fail_on_error
def select(state_path, stage, strategy, target, seed):
    """Select the next batch; emits pending batch, quota plan and request."""
    _check_unlocked(state_path)
    state = _load(state_path)
    config = _config_of(state)
    from dataclasses import replace

    overrides = {}
    if strategy is not None:
        overrides["strategy"] = strategy
    if target is not None:
        overrides["target_per_iteration"] = target
    if seed is not None:
        overrides["seed"] = seed
    if overrides:
        config = replace(config, **overrides)
        state.config = config.to_dict()
        state.config_hash = config.hash()
    if state.pending_batch is not None:
        raise PendingBatchError("a pending batch awaits labels; label it first")

    if stage == "initial":
        batch = _select_initial(state, config)
    else:
        batch = _select_batch(state, config)
    if batch is None or not batch.chosen:
        click.echo("selection complete: empty batch (pool exhausted or loop done)")
        return
    state.unlabeled_ids -= set(batch.ids)
    state.pending_batch = batch
    save_state(state, state_path)
    request_path = _emit_select_artifacts(state, config, state_path, batch)
    click.echo(
        f"selected {len(batch.chosen)} samples ({batch.strategy}); "
        f"transcriber request -> {request_path}"
    )


def _cluster_groups(state, config):
    if state.clusters is None:
        raise MissingClustersError("state has no clusters; run `cluster` first")
    groups = state.clusters.sampling_groups(include_noise=config.include_noise)
    return {
        cid: members & state.unlabeled_ids
        for cid, members in groups.items()
        if members & state.unlabeled_ids
    }


def _select_initial(state, config):
    if config.strategy == "random":
        return strategies.select_random(
            state.unlabeled_ids, config.target_per_iteration, config.seed, iteration=0
        )
    groups = _cluster_groups(state, config)
    plan = sampling.plan_quotas(
        {cid: len(m) for cid, m in groups.items()},
        config.target_per_iteration,
        config.beta,
        config.gamma,
    )
    return sampling.draw_random(groups, plan, config.seed, iteration=0)


def _select_batch(state, config):
    h = state.iteration
    if h < 1:
        raise StateConflictError("label the initial batch before stage-2 selection")
    if h > config.iterations:
        return None
    strategy = config.strategy
    if strategy == "random":
        return strategies.select_random(
            state.unlabeled_ids, config.target_per_iteration, config.seed, iteration=h
        )
    if strategy == "isolated_first_stage":
        groups = _cluster_groups(state, config)
        plan = sampling.plan_quotas(
            {cid: len(m) for cid, m in groups.items()},
            config.target_per_iteration,
            config.beta,
            config.gamma,
        )
        return strategies.select_isolated_first_stage(
            groups, plan, config.seed, iteration=h
        )
    if state.scores is None or state.scores.get("strategy") != strategy:
        raise ValidationError(
            f"no stored scores for strategy {strategy!r}; run `score` first"
        )
    values = state.scores["values"]
    if strategy == "proposed":
        groups = _cluster_groups(state, config)
        scored_groups = {
            cid: {sid for sid in members if sid in values}
            for cid, members in groups.items()
        }
        scored_groups = {cid: m for cid, m in scored_groups.items() if m}
        plan = sampling.plan_quotas(
            {cid: len(m) for cid, m in scored_groups.items()},
            config.target_per_iteration,
            config.beta,
            config.gamma,
        )
        return strategies.select_top_uncertain_per_cluster(
            values, scored_groups, plan, iteration=h
        )
    if strategy in ("smca", "entropy"):
        pool = sorted(set(values) & state.unlabeled_ids)
        ranked = sorted(pool, key=lambda sid: (-values[sid], sid))
        k = min(config.target_per_iteration, len(ranked))
        chosen = [(sid, None, values[sid]) for sid in ranked[:k]]
        from alspeech.core import SelectionBatch

        return SelectionBatch(iteration=h, strategy=strategy, chosen=chosen)
    raise ValidationError(f"unknown strategy {strategy!r}")


@main.command()
@click.option("--state", "state_path", required=True, type=click.Path(exists=True))
@click.option("--committee", "committee_path", required=True, type=click.Path(exists=True))
@click.option("--strategy", default=None,
              type=click.Choice(["proposed", "smca", "entropy"]))
@click.option("--workers", type=int, default=None)
@_fail_on_error
def score(state_path, committee_path, strategy, workers):
    """Compute and persist uncertainty scores from committee artifacts."""
    _check_unlocked(state_path)
    state = _load(state_path)
    config = _config_of(state)
    strategy = strategy or (
        config.strategy if config.strategy in ("proposed", "smca", "entropy")
        else "proposed"
    )
    artifacts = load_committee(committee_path, expected_t=config.committee_size)
    h, groups = pipeline.scoring_pool(state, config)
    pool = sorted(set().union(*groups.values())) if groups else []
    missing = [sid for sid in pool if sid not in artifacts]
    if missing:
        raise MissingScoreError(
            f"committee file lacks {len(missing)} pool ids (e.g. {missing[:5]})",
            ids=missing,
        )
    norm = config.normalization()
    if strategy == "proposed":
        scored = score_committee(
            {sid: artifacts[sid] for sid in pool},
            norm,
            workers=workers if workers is not None else config.workers,
        )
        values = {sid: scored[sid].value for sid in pool}
    elif strategy == "smca":
        values = {
            sid: cmer(artifacts[sid].hypotheses[0], artifacts[sid].reference, norm)
            for sid in pool
        }
    else:
        values = {sid: entropy_uncertainty(artifacts[sid]) for sid in pool}
    state.scores = {
        "strategy": strategy,
        "iteration": h,
        "values": values,
        "digest": score_digest(list(values.values())),
    }
    save_state(state, state_path)
    click.echo(f"scored {len(values)} samples ({strategy}) for iteration {h}")


@main.command()
@click.option("--state", "state_path", required=True, type=click.Path(exists=True))
@click.option("--oracle", is_flag=True, default=False)
@click.option("--labels", "labels_path", type=click.Path(exists=True), default=None)
@_fail_on_error
def label(state_path, oracle, labels_path):
    """Apply labels to the pending batch and advance the iteration."""
    _check_unlocked(state_path)
    state = _load(state_path)
    if state.pending_batch is None:
        raise StateConflictError("no pending batch to label")
    if oracle == (labels_path is not None):
        raise ValidationError("pass exactly one of --oracle or --labels")
    batch = state.pending_batch
    if oracle:
        labels = pipeline.oracle_labels(state, batch)
    else:
        with open(labels_path, encoding="utf-8") as fh:
            labels = json.load(fh)
        if not isinstance(labels, dict):
            raise ValidationError("labels file must map sample id -> text")
    new_state = apply_batch_labels(state, batch, labels)
    save_state(new_state, state_path)
    click.echo(
        f"labeled {len(batch.ids)} samples; iteration -> {new_state.iteration}"
    )


@main.command()
@click.option("--spec", "spec_path", type=click.Path(exists=True), default=None)
@click.option("--seeds", default=10, show_default=True)
@click.option("--strategies", "strategy_csv", default="proposed,random", show_default=True)
@click.option("--target", default=40, show_default=True)
@click.option("--iterations", default=3, show_default=True)
@click.option("--out", "out_path", required=True, type=click.Path())
@_fail_on_error
def simulate(spec_path, seeds, strategy_csv, target, iterations, out_path):
    """Run the desk-scale simulation harness and write a report."""
    from alspeech.simulate import SyntheticCorpusSpec

    if spec_path:
        with open(spec_path, encoding="utf-8") as fh:
            doc = json.load(fh)
        if "cluster_sizes" in doc:
            doc["cluster_sizes"] = tuple(doc["cluster_sizes"])
        if doc.get("cluster_difficulty") is not None:
            doc["cluster_difficulty"] = tuple(doc["cluster_difficulty"])
        spec = SyntheticCorpusSpec(**doc)
    else:
        spec = SyntheticCorpusSpec()
    config = PipelineConfig(target_per_iteration=target, iterations=iterations)
    names = [s.strip() for s in strategy_csv.split(",") if s.strip()]
    report = pipeline.run_simulation_loop(
        config, spec, strategy_names=names, seeds=list(range(seeds))
    )
    with open(out_path, "w", encoding="utf-8") as fh:
        json.dump(report, fh, indent=2, sort_keys=True)
        fh.write("\n")
    click.echo(f"simulation report -> {out_path}")


@main.command()
@click.option("--state", "state_path", required=True, type=click.Path(exists=True))
@_fail_on_error
def report(state_path):
    """Per-iteration summary: batch sizes, strategies, score digests."""
    state = _load(state_path)
    violations = validate_state(state)
    doc = {
        "iteration": state.iteration,
        "labeled_count": len(state.labeled_ids),
        "unlabeled_count": len(state.unlabeled_ids),
        "pending_count": len(state.pending_ids),
        "history": state.history,
        "scores_digest": (state.scores or {}).get("digest"),
        "violations": violations,
    }
    click.echo(json.dumps(doc, indent=2, sort_keys=True))


@main.command()
@click.option("--state", "state_path", required=True, type=click.Path(exists=True))
@click.option("--port", default=8571, show_default=True)
@click.option("--host", default="127.0.0.1", show_default=True)
@click.option("--media-root", type=click.Path(), default=None)
@_fail_on_error
def serve(state_path, port, host, media_root):
    """Serve the annotation HTTP API for the companion UI."""
    import uvicorn

    from alspeech.server import create_app

    app = create_app(state_path, media_root=media_root)
    uvicorn.run(app, host=host, port=port)


if __name__ == "__main__":
    main()
