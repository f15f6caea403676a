"""Tiered verifier reward and the group-mean baseline used for advantages.

reward = 0            if the candidate does not compile
       = 0.5          if it compiles but cannot be planned
       = 1 + k / n    if it plans and k of the policy's n rules pass
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum
from typing import Sequence

from .errors import EmptyGroup, EmptyPolicy
from .hcl import Configuration, canonicalize
from .oracles import BUILTIN, Oracles
from .policy import Policy, RuleResults, count_rules
from .verify import VerdictReport

COMPILABLE_REWARD = 0.5


class Tier(str, Enum):
    NONE = "NONE"
    COMPILABLE = "COMPILABLE"
    DEPLOYABLE = "DEPLOYABLE"


@dataclass(frozen=True)
class RewardBreakdown:
    reward: float
    tier: Tier
    rules_passed: int
    rules_total: int
    fv1: VerdictReport
    fv2: VerdictReport | None = None
    fv3: RuleResults | None = None

    def to_dict(self) -> dict:
        """Deterministic form: verifier timings are omitted."""
        return {
            "reward": self.reward,
            "tier": self.tier.value,
            "rules_passed": self.rules_passed,
            "rules_total": self.rules_total,
            "fv1": _untimed(self.fv1),
            "fv2": _untimed(self.fv2) if self.fv2 else None,
            "fv3": self.fv3.to_dict() if self.fv3 else None,
        }


def _untimed(report: VerdictReport) -> dict:
    doc = report.to_dict()
    doc.pop("elapsed", None)
    return doc


def compute_reward(candidate: str | Configuration, policy: Policy, oracles: Oracles | None = None) -> RewardBreakdown:
    """Score one candidate against ``policy``.

    ``candidate`` may be raw text (a parse failure scores 0) or an already
    parsed configuration, which is checked in its canonical form.
    """
    oracles = oracles or BUILTIN
    if policy.source == "builtin" and not policy.rules:
        raise EmptyPolicy(f"policy {policy.id!r} has no rules")
    text = canonicalize(candidate) if isinstance(candidate, Configuration) else candidate
    total = len(policy.rules) if policy.source == "builtin" else 0

    fv1, config = oracles.compile(text)
    if not fv1.passed:
        return RewardBreakdown(0.0, Tier.NONE, 0, total, fv1)
    fv2, plan_doc = oracles.deploy(text, config)
    if not fv2.passed:
        return RewardBreakdown(COMPILABLE_REWARD, Tier.COMPILABLE, 0, total, fv1, fv2)
    results = oracles.comply(policy, plan_doc)
    total = results.total_count if policy.source == "rego" else count_rules(policy)
    if total == 0:
        raise EmptyPolicy(f"policy {policy.id!r} yields no rules")
    reward = 1.0 + results.passed_count / total
    return RewardBreakdown(reward, Tier.DEPLOYABLE, results.passed_count, total, fv1, fv2, results)


@dataclass(frozen=True)
class GroupAdvantages:
    rewards: tuple[float, ...]
    baseline: float
    advantages: tuple[float, ...]

    def to_dict(self) -> dict:
        return {"rewards": list(self.rewards), "baseline": self.baseline, "advantages": list(self.advantages)}


def group_advantages(rewards: Sequence[float]) -> GroupAdvantages:
    """Reward minus the group mean, for each sample of one prompt's group."""
    if len(rewards) == 0:
        raise EmptyGroup("cannot compute a baseline for an empty group")
    values = tuple(float(r) for r in rewards)
    baseline = math.fsum(values) / len(values)
    advantages = tuple(r - baseline for r in values)
    return GroupAdvantages(values, baseline, advantages)
