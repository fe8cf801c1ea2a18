"""Batch acquisition strategies.

The proposed strategy takes each cluster's quota-many highest-uncertainty
samples; the rest are the comparison baselines: whole-pool random,
SMCA (single dropout member vs reference, CMER disagreement), softmax
entropy, and re-running the stage-1 cluster draw at every iteration.
All ties break by ascending sample id so every strategy is deterministic.
"""

from __future__ import annotations

import numpy as np

from alspeech.core import SelectionBatch
from alspeech.errors import (
    MissingEntropiesError,
    MissingScoreError,
    ValidationError,
)
from alspeech.metrics import DEFAULT_NORMALIZATION, cmer, entropy_uncertainty
from alspeech.sampling import draw_random

STRATEGIES = ("proposed", "random", "smca", "entropy", "isolated_first_stage")


def _top_k(scored, k):
    """scored: list of (id, score); top k by score desc, id asc."""
    ranked = sorted(scored, key=lambda t: (-t[1], t[0]))
    return ranked[:k]


def select_top_uncertain_per_cluster(scores, cluster_members, plan, iteration=0):
    """Per cluster, the quota-many highest-uncertainty unlabeled ids."""
    chosen = []
    for cid in sorted(cluster_members):
        quota = plan.quotas.get(cid, 0)
        if quota == 0:
            continue
        members = sorted(cluster_members[cid])
        missing = [sid for sid in members if sid not in scores]
        if missing:
            raise MissingScoreError(
                f"cluster {cid}: no uncertainty score for {missing[:5]}"
                + ("..." if len(missing) > 5 else ""),
                ids=missing,
            )
        if quota > len(members):
            raise ValidationError(
                f"cluster {cid}: quota {quota} exceeds availability {len(members)}"
            )
        for sid, val in _top_k([(s, _value(scores[s])) for s in members], quota):
            chosen.append((sid, cid, val))
    return SelectionBatch(
        iteration=iteration, strategy="proposed", chosen=chosen, quota_plan=plan
    )


def _value(score):
    return score.value if hasattr(score, "value") else float(score)


def select_random(pool, target, seed, iteration=0):
    members = sorted(pool)
    k = min(target, len(members))
    chosen = []
    if k > 0:
        rng = np.random.default_rng([int(seed), int(iteration)])
        picked = rng.choice(len(members), size=k, replace=False)
        chosen = [(members[i], None, None) for i in sorted(int(p) for p in picked)]
    return SelectionBatch(iteration=iteration, strategy="random", chosen=chosen)


def _select_global_scored(strategy, scorer, artifacts, pool, target, iteration):
    members = sorted(pool)
    missing = [sid for sid in members if sid not in artifacts]
    if missing:
        raise MissingScoreError(
            f"no committee artifact for {missing[:5]}"
            + ("..." if len(missing) > 5 else ""),
            ids=missing,
        )
    scored = [(sid, scorer(artifacts[sid])) for sid in members]
    chosen = [(sid, None, val) for sid, val in _top_k(scored, min(target, len(members)))]
    return SelectionBatch(iteration=iteration, strategy=strategy, chosen=chosen)


def select_smca(artifacts, pool, target, iteration=0, config=DEFAULT_NORMALIZATION):
    """Single-dropout-member committee: CMER(hypothesis 0, reference)."""

    def scorer(a):
        if not a.hypotheses:
            raise ValidationError(f"artifact {a.sample_id!r} has no hypotheses")
        return cmer(a.hypotheses[0], a.reference, config)

    return _select_global_scored("smca", scorer, artifacts, pool, target, iteration)


def select_entropy(artifacts, pool, target, iteration=0):
    members = sorted(pool)
    for sid in members:
        if sid in artifacts and not artifacts[sid].token_entropies:
            raise MissingEntropiesError(
                f"artifact {sid!r} carries no token entropies", id=sid
            )
    return _select_global_scored(
        "entropy", entropy_uncertainty, artifacts, pool, target, iteration
    )


def select_isolated_first_stage(cluster_members, plan, seed, iteration=0):
    """Stage-1 random cluster draw re-applied against the shrinking pool."""
    batch = draw_random(
        cluster_members, plan, seed, iteration=iteration,
        strategy="isolated_first_stage",
    )
    return batch


def subsample_pool(cluster_members, fraction, seed, iteration=0):
    """Seeded per-cluster subsample used by the scoring-fraction speed knob.

    Keeps at least one member per nonempty cluster so quotas stay servable.
    """
    if not 0 < fraction <= 1:
        raise ValidationError("scoring fraction must be in (0, 1]")
    if fraction == 1.0:
        return {cid: set(m) for cid, m in cluster_members.items()}
    out = {}
    for cid in sorted(cluster_members):
        members = sorted(cluster_members[cid])
        if not members:
            out[cid] = set()
            continue
        k = max(1, int(round(fraction * len(members))))
        rng = np.random.default_rng([int(seed), int(iteration), 7919, int(cid)])
        picked = rng.choice(len(members), size=k, replace=False)
        out[cid] = {members[int(i)] for i in picked}
    return out
