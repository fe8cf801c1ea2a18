"""End-to-end orchestration of the two-stage selection loop.

Stage 1 clusters the embeddings and draws a quota-balanced random batch
with no trained model in the loop. Stage 2 iterations score the unlabeled
pool with committee disagreement (artifacts supplied by an external
transcriber process via request/artifact files) and take each cluster's
quota of most-uncertain samples. The simulation loop wires the mock
transcriber and oracle labels through the same code paths.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, replace

import numpy as np

from alspeech import clustering, sampling, simulate, strategies
from alspeech.clustering import ClusterParams, dbscan, default_eps
from alspeech.core import PipelineState, apply_batch_labels, score_digest
from alspeech.errors import (
    MissingClustersError,
    MissingScoreError,
    PendingBatchError,
    StateConflictError,
    ValidationError,
)
from alspeech.metrics import NormalizationConfig, score_committee
from alspeech.storage import config_hash


@dataclass(frozen=True)
class PipelineConfig:
    target_per_iteration: int = 643
    iterations: int = 3  # H, stage-2 iterations after the cold start
    committee_size: int = 20  # T
    beta: float = sampling.DEFAULT_BETA
    gamma: float = sampling.DEFAULT_GAMMA
    eps: float = None  # None -> k-distance heuristic
    min_points: int = 5
    metric: str = "cosine"
    strategy: str = "proposed"
    scoring_fraction: float = 1.0
    seed: int = 0
    include_noise: bool = True
    workers: int = 1
    lowercase: bool = True
    strip_punctuation: bool = True
    nfc: bool = True

    def normalization(self):
        return NormalizationConfig(
            lowercase=self.lowercase,
            strip_punctuation=self.strip_punctuation,
            nfc=self.nfc,
        )

    def to_dict(self):
        return {
            "target_per_iteration": self.target_per_iteration,
            "iterations": self.iterations,
            "committee_size": self.committee_size,
            "beta": self.beta,
            "gamma": self.gamma,
            "eps": self.eps,
            "min_points": self.min_points,
            "metric": self.metric,
            "strategy": self.strategy,
            "scoring_fraction": self.scoring_fraction,
            "seed": self.seed,
            "include_noise": self.include_noise,
            "workers": self.workers,
            "lowercase": self.lowercase,
            "strip_punctuation": self.strip_punctuation,
            "nfc": self.nfc,
        }

    @classmethod
    def from_dict(cls, doc):
        known = {f for f in cls.__dataclass_fields__}
        return cls(**{k: v for k, v in doc.items() if k in known})

    def hash(self):
        return config_hash(self.to_dict())


def _strategy_seed(config, strategy, salt=0):
    # independent seeded streams per strategy, so comparisons never share draws
    code = strategies.STRATEGIES.index(strategy)
    return int(config.seed) * 101 + code * 7 + salt


def ingest(config, manifest, embeddings_path=None):
    """Fresh state at iteration 0, pre-clustering."""
    records = manifest.by_id()
    return PipelineState(
        iteration=0,
        labeled_ids=set(),
        unlabeled_ids=set(records),
        records=records,
        config=config.to_dict(),
        config_hash=config.hash(),
        embeddings_path=embeddings_path,
    )


def cluster_state(state, config, embeddings):
    """Run DBSCAN and store the assignment; reused by every later step."""
    eps = config.eps
    if eps is None:
        eps = default_eps(embeddings, metric=config.metric, seed=config.seed)
    params = ClusterParams(eps=eps, min_points=config.min_points, metric=config.metric)
    new = state.snapshot()
    new.clusters = dbscan(embeddings, params)
    return new


def _unlabeled_groups(state, config):
    if state.clusters is None:
        raise MissingClustersError("state has no cluster assignment; run cluster first")
    groups = state.clusters.sampling_groups(include_noise=config.include_noise)
    out = {}
    for cid, members in groups.items():
        avail = members & state.unlabeled_ids
        if avail:
            out[cid] = avail
    return out


def _set_pending(state, batch):
    new = state.snapshot()
    new.unlabeled_ids -= set(batch.ids)
    new.pending_batch = batch
    return new


def run_stage1(config, manifest, embeddings, embeddings_path=None):
    """Cold start: cluster, plan quotas, draw the random per-cluster batch."""
    state = ingest(config, manifest, embeddings_path=embeddings_path)
    state = cluster_state(state, config, embeddings)
    groups = _unlabeled_groups(state, config)
    plan = sampling.plan_quotas(
        {cid: len(m) for cid, m in groups.items()},
        config.target_per_iteration,
        config.beta,
        config.gamma,
    )
    batch = sampling.draw_random(groups, plan, config.seed, iteration=0)
    state = _set_pending(state, batch)
    return state, batch


def scoring_pool(state, config):
    """Ids whose committee artifacts the next stage-2 iteration needs."""
    h = state.iteration + (1 if state.pending_batch else 0)
    if state.clusters is not None:
        groups = _unlabeled_groups(state, config)
        subs = strategies.subsample_pool(
            groups, config.scoring_fraction, config.seed, iteration=h
        )
        return h, {cid: m for cid, m in subs.items()}
    pool = sorted(state.unlabeled_ids)
    if config.scoring_fraction < 1.0 and pool:
        k = max(1, int(round(config.scoring_fraction * len(pool))))
        rng = np.random.default_rng([int(config.seed), int(h), 7919])
        picked = rng.choice(len(pool), size=k, replace=False)
        pool = [pool[int(i)] for i in sorted(picked)]
    return h, {None: set(pool)}


def emit_transcriber_request(state, config, path):
    """Request file for the external transcriber backend."""
    h, groups = scoring_pool(state, config)
    ids = sorted(set().union(*groups.values())) if groups else []
    doc = {
        "iteration": h,
        "expected_T": config.committee_size,
        "ids": ids,
    }
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(doc, fh, sort_keys=True, indent=2)
        fh.write("\n")


def run_stage2_iteration(state, config, artifacts, workers=None):
    """Score the pool, plan quotas over remaining members, select the batch.

    Returns (state, None) once all H iterations are done.
    """
    if state.pending_batch is not None:
        raise PendingBatchError(
            "a selected batch is awaiting labels; apply them before selecting"
        )
    if state.iteration < 1:
        raise StateConflictError("stage 2 needs the stage-1 batch labeled first")
    h = state.iteration
    if h > config.iterations:
        return state, None

    _, groups = scoring_pool(state, config)
    scored_ids = sorted(set().union(*groups.values())) if groups else []
    if not scored_ids:
        return state, None
    uncovered = [sid for sid in scored_ids if sid not in artifacts]
    if uncovered:
        raise MissingScoreError(
            f"committee artifacts missing for {len(uncovered)} scored ids "
            f"(e.g. {uncovered[:5]})",
            ids=uncovered,
        )
    scores = score_committee(
        {sid: artifacts[sid] for sid in scored_ids},
        config.normalization(),
        workers=workers if workers is not None else config.workers,
    )
    plan = sampling.plan_quotas(
        {cid: len(m) for cid, m in groups.items()},
        config.target_per_iteration,
        config.beta,
        config.gamma,
    )
    batch = strategies.select_top_uncertain_per_cluster(
        scores, groups, plan, iteration=h
    )
    new = _set_pending(state, batch)
    new.scores = {
        "strategy": "proposed",
        "iteration": h,
        "values": {sid: scores[sid].value for sid in scored_ids},
        "digest": score_digest([scores[sid].value for sid in scored_ids]),
    }
    return new, batch


def oracle_labels(state, batch):
    labels = {}
    missing = []
    for sid in batch.ids:
        rec = state.records.get(sid)
        if rec is None or rec.oracle_text is None:
            missing.append(sid)
        else:
            labels[sid] = rec.oracle_text
    if missing:
        raise ValidationError(
            f"oracle labeling needs oracle_text on every batch sample; "
            f"missing for {missing[:5]}",
            ids=missing,
        )
    return labels


def _select_for_strategy(strategy, state, config, artifacts, h):
    pool = set(state.unlabeled_ids)
    target = config.target_per_iteration
    if strategy == "proposed":
        new, batch = run_stage2_iteration(state, config, artifacts)
        return new, batch
    if strategy == "random":
        batch = strategies.select_random(
            pool, target, _strategy_seed(config, "random"), iteration=h
        )
    elif strategy == "smca":
        batch = strategies.select_smca(
            artifacts, pool, target, iteration=h, config=config.normalization()
        )
    elif strategy == "entropy":
        batch = strategies.select_entropy(artifacts, pool, target, iteration=h)
    elif strategy == "isolated_first_stage":
        groups = _unlabeled_groups(state, config)
        plan = sampling.plan_quotas(
            {cid: len(m) for cid, m in groups.items()},
            target,
            config.beta,
            config.gamma,
        )
        batch = strategies.select_isolated_first_stage(
            groups, plan, _strategy_seed(config, "isolated_first_stage"), iteration=h
        )
    else:
        raise ValidationError(f"unknown strategy {strategy!r}")
    if not batch.chosen:
        return state, None
    return _set_pending(state, batch), batch


def _initial_state(strategy, config, corpus):
    if strategy in ("proposed", "isolated_first_stage"):
        return run_stage1(config, corpus.manifest, corpus.embeddings)
    # uncertainty-only and random baselines start from a random draw
    state = ingest(config, corpus.manifest)
    state = cluster_state(state, config, corpus.embeddings)
    batch = strategies.select_random(
        state.unlabeled_ids,
        config.target_per_iteration,
        _strategy_seed(config, strategy, salt=13),
        iteration=0,
    )
    return _set_pending(state, batch), batch


def run_simulation_loop(config, corpus_spec, strategy_names=("proposed", "random"), seeds=(0,)):
    """Full automatic runs (mock transcriber + oracle labels) per strategy.

    Returns a report with per-seed proxy-quality trajectories and pool
    uncertainty quartiles per iteration.
    """
    report = {
        "config": config.to_dict(),
        "spec": corpus_spec.to_dict(),
        "seeds": list(seeds),
        "strategies": {},
    }
    for strategy in strategy_names:
        per_seed = {}
        for seed in seeds:
            spec = replace(corpus_spec, seed=seed)
            run_config = replace(config, strategy=strategy, seed=seed)
            corpus = simulate.generate_corpus(spec)
            mock = simulate.build_mock_spec(
                corpus, committee_size=run_config.committee_size, seed=seed
            )
            state, batch = _initial_state(strategy, run_config, corpus)
            state = apply_batch_labels(state, batch, oracle_labels(state, batch))
            proxies = [simulate.proxy_quality(state.labeled_ids, corpus)]
            quartiles = []
            for h in range(1, run_config.iterations + 1):
                artifacts = simulate.mock_committee(
                    corpus.manifest,
                    mock,
                    iteration=h,
                    vocab_size=spec.vocab_size,
                    only_ids=state.unlabeled_ids,
                )
                pool_scores = score_committee(
                    {sid: artifacts[sid] for sid in sorted(state.unlabeled_ids)},
                    run_config.normalization(),
                    workers=run_config.workers,
                )
                quartiles.append(
                    score_digest([s.value for s in pool_scores.values()])
                )
                state, batch = _select_for_strategy(
                    strategy, state, run_config, artifacts, h
                )
                if batch is None:
                    proxies.append(proxies[-1])
                    continue
                state = apply_batch_labels(state, batch, oracle_labels(state, batch))
                proxies.append(simulate.proxy_quality(state.labeled_ids, corpus))
            per_seed[seed] = {"proxy": proxies, "uncertainty_quartiles": quartiles}

        iterations = []
        n_points = config.iterations + 1
        for h in range(n_points):
            vals = [per_seed[s]["proxy"][h] for s in seeds]
            mean = float(np.mean(vals))
            ci = float(1.96 * np.std(vals, ddof=1) / math.sqrt(len(vals))) if len(vals) > 1 else 0.0
            iterations.append({"h": h, "proxy_metric_mean": mean, "proxy_metric_ci": ci})
        report["strategies"][strategy] = {
            "per_seed": {str(s): per_seed[s] for s in seeds},
            "iterations": iterations,
        }
    return report
