"""Verifier-guided Terraform tooling: parsing, staged verification, policy
checks, tiered rewards, LLM repair loops, dataset curation and evaluation."""

from .hcl import Configuration, canonicalize, parse_config
from .oracles import Oracles
from .policy import Policy, evaluate_policy, load_policy, parse_policy
from .reward import RewardBreakdown, Tier, compute_reward, group_advantages
from .verify import PlanDocument, VerdictReport, plan, plan_text, validate, validate_text

__version__ = "0.1.0"

__all__ = [
    "Configuration",
    "Oracles",
    "PlanDocument",
    "Policy",
    "RewardBreakdown",
    "Tier",
    "VerdictReport",
    "canonicalize",
    "compute_reward",
    "evaluate_policy",
    "group_advantages",
    "load_policy",
    "parse_config",
    "parse_policy",
    "plan",
    "plan_text",
    "validate",
    "validate_text",
]
