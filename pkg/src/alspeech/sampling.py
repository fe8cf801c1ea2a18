"""Disproportionate cluster sampling: per-cluster quota arithmetic with a
deterministic reconciliation pass, and the seeded stage-1 random draw.

Raw quotas use the affine slope alpha = beta - gamma * fraction, which
favors smaller clusters; with the published constants (beta 0.095,
gamma 0.0553) the raw quotas fall well short of the per-iteration target,
so a smallest-cluster-first round-robin tops them up (largest-first
removes on overshoot).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from alspeech.core import SelectionBatch
from alspeech.errors import ValidationError

DEFAULT_BETA = 0.095
DEFAULT_GAMMA = 0.0553

ALPHA_FLOOR = 1e-6  # keeps alpha positive for arbitrary beta/gamma configs


@dataclass
class QuotaPlan:
    target: int
    beta: float
    gamma: float
    quotas: dict = field(default_factory=dict)  # cluster_id -> int
    adjustments: list = field(default_factory=list)

    @property
    def total(self):
        return sum(self.quotas.values())

    def to_dict(self):
        return {
            "target": self.target,
            "beta": self.beta,
            "gamma": self.gamma,
            "quotas": {str(k): v for k, v in sorted(self.quotas.items())},
            "adjustments": list(self.adjustments),
        }


def alpha(cluster_size, total_size, beta=DEFAULT_BETA, gamma=DEFAULT_GAMMA):
    """Variable slope favoring smaller clusters: beta - gamma * fraction."""
    if total_size <= 0:
        raise ValidationError("total_size must be > 0")
    if not 0 <= cluster_size <= total_size:
        raise ValidationError("need 0 <= cluster_size <= total_size")
    value = beta - gamma * (cluster_size / total_size)
    return max(value, ALPHA_FLOOR)


def raw_quota(cluster_size, total_size, target, beta=DEFAULT_BETA, gamma=DEFAULT_GAMMA):
    """ceil(alpha * fraction * target), capped at the cluster's availability."""
    if target < 0:
        raise ValidationError("target must be >= 0")
    if cluster_size == 0 or target == 0:
        return 0
    a = alpha(cluster_size, total_size, beta, gamma)
    q = math.ceil(a * (cluster_size / total_size) * target)
    return min(q, cluster_size)


def plan_quotas(cluster_sizes, target, beta=DEFAULT_BETA, gamma=DEFAULT_GAMMA):
    """Raw quotas reconciled so they sum to min(target, total available).

    Deficit: round-robin +1 over clusters ordered smallest size first
    (ties by ascending cluster id), skipping full clusters. Surplus:
    round-robin -1 over clusters ordered largest size first (ties by
    descending cluster id), skipping empty quotas. Every step is logged.
    """
    if target < 0:
        raise ValidationError("target must be >= 0")
    sizes = dict(cluster_sizes)
    total_size = sum(sizes.values())
    plan = QuotaPlan(target=target, beta=beta, gamma=gamma)
    plan.quotas = {cid: 0 for cid in sizes}
    if total_size == 0 or target == 0:
        return plan

    for cid, size in sizes.items():
        plan.quotas[cid] = raw_quota(size, total_size, target, beta, gamma)

    goal = min(target, total_size)
    while plan.total < goal:
        added = False
        for cid in sorted(sizes, key=lambda c: (sizes[c], c)):
            if plan.total >= goal:
                break
            if plan.quotas[cid] < sizes[cid]:
                plan.quotas[cid] += 1
                plan.adjustments.append({"op": "add", "cluster_id": cid})
                added = True
        if not added:
            break
    while plan.total > goal:
        removed = False
        for cid in sorted(sizes, key=lambda c: (sizes[c], c), reverse=True):
            if plan.total <= goal:
                break
            if plan.quotas[cid] > 0:
                plan.quotas[cid] -= 1
                plan.adjustments.append({"op": "remove", "cluster_id": cid})
                removed = True
        if not removed:
            break
    return plan


def draw_random(cluster_members, plan, seed, iteration=0, strategy="initial_cluster_random"):
    """Uniform without-replacement draw of each cluster's quota, seeded.

    The per-cluster stream is derived from (seed, cluster id) so the draw
    is independent of how many clusters exist and of dict ordering.
    """
    chosen = []
    for cid in sorted(cluster_members):
        quota = plan.quotas.get(cid, 0)
        members = sorted(cluster_members[cid])
        if quota > len(members):
            raise ValidationError(
                f"cluster {cid}: quota {quota} exceeds availability {len(members)}"
            )
        if quota == 0:
            continue
        rng = np.random.default_rng([int(seed), int(iteration), int(cid)])
        picked = rng.choice(len(members), size=quota, replace=False)
        for i in sorted(int(p) for p in picked):
            chosen.append((members[i], cid, None))
    return SelectionBatch(
        iteration=iteration, strategy=strategy, chosen=chosen, quota_plan=plan
    )


def export_quota_plan(cluster_sizes, plan):
    """Per-cluster inspection rows: size, alpha, raw and final quota."""
    total_size = sum(cluster_sizes.values())
    rows = []
    for cid in sorted(cluster_sizes):
        size = cluster_sizes[cid]
        rows.append(
            {
                "cluster_id": cid,
                "size": size,
                "alpha": alpha(size, total_size, plan.beta, plan.gamma)
                if total_size
                else None,
                "raw_quota": raw_quota(size, total_size, plan.target, plan.beta, plan.gamma)
                if total_size
                else 0,
                "final_quota": plan.quotas.get(cid, 0),
            }
        )
    return rows
