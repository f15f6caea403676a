"""Intent policies and their per-rule evaluation against a plan (FV3).

Builtin policies are JSON documents::

    {"id": "bucket-policy",
     "rules": [{"name": "has_bucket", "predicate": "resource_exists",
                "params": {"type": "aws_s3_bucket"}}]}

Rego policies are passed through to an external engine (see
:mod:`iacforge.external`).
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

from .errors import EmptyPolicy, PolicyError
from .verify import COMPUTED, PlanDocument

PREDICATES: dict[str, tuple[str, ...]] = {
    "resource_exists": ("type",),
    "resource_count_at_least": ("type", "n"),
    "attribute_equals": ("address", "path", "value"),
    "attribute_matches": ("address", "path", "pattern"),
    "dependency_exists": ("from", "to"),
    "provider_declared": ("name",),
}

_MISSING = object()


@dataclass(frozen=True)
class Rule:
    name: str
    predicate: str
    params: dict[str, Any] = field(default_factory=dict)

    def __post_init__(self) -> None:
        if not self.name or not isinstance(self.name, str):
            raise PolicyError("rule name must be a non-empty string")
        if self.predicate not in PREDICATES:
            raise PolicyError(f"rule {self.name!r}: unknown predicate {self.predicate!r}")
        missing = [p for p in PREDICATES[self.predicate] if p not in self.params]
        if missing:
            raise PolicyError(f"rule {self.name!r}: missing params {', '.join(missing)}")
        if self.predicate == "resource_count_at_least":
            n = self.params["n"]
            if not isinstance(n, int) or isinstance(n, bool) or n < 0:
                raise PolicyError(f"rule {self.name!r}: n must be a non-negative integer")
        if self.predicate == "attribute_matches":
            try:
                re.compile(self.params["pattern"])
            except (re.error, TypeError) as exc:
                raise PolicyError(f"rule {self.name!r}: bad pattern: {exc}") from exc

    def to_dict(self) -> dict:
        return {"name": self.name, "predicate": self.predicate, "params": self.params}


@dataclass(frozen=True)
class Policy:
    id: str
    rules: tuple[Rule, ...] = ()
    source: str = "builtin"  # or "rego"
    rego: str | None = None

    def __post_init__(self) -> None:
        if self.source == "builtin":
            if not self.rules:
                raise EmptyPolicy(f"policy {self.id!r} has no rules")
            names = [r.name for r in self.rules]
            dupes = sorted({n for n in names if names.count(n) > 1})
            if dupes:
                raise PolicyError(f"duplicate rule names: {', '.join(dupes)}")
        elif self.source == "rego":
            if not self.rego or not self.rego.strip():
                raise EmptyPolicy(f"policy {self.id!r} has no rego text")
        else:
            raise PolicyError(f"unknown policy source {self.source!r}")

    def canonical(self) -> str:
        """Form used to decide whether two policies say the same thing.

        Rule names and the policy id are ignored; rule order is not.
        """
        if self.source == "rego":
            lines = []
            for line in self.rego.splitlines():
                line = line.split("#", 1)[0].strip()
                if line:
                    lines.append(" ".join(line.split()))
            return "\n".join(lines)
        return json.dumps(
            sorted(json.dumps([r.predicate, r.params], sort_keys=True) for r in self.rules),
            separators=(",", ":"),
        )

    def to_dict(self) -> dict:
        if self.source == "rego":
            return {"id": self.id, "source": "rego", "rego": self.rego}
        return {"id": self.id, "rules": [r.to_dict() for r in self.rules]}

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))


def policy_from_dict(doc: dict) -> Policy:
    if not isinstance(doc, dict):
        raise PolicyError("policy document must be a JSON object")
    if doc.get("source") == "rego" or "rego" in doc:
        return Policy(str(doc.get("id", "rego")), (), "rego", doc.get("rego"))
    rules = doc.get("rules")
    if not isinstance(rules, list):
        raise PolicyError("policy document needs a 'rules' list")
    parsed = []
    for item in rules:
        if not isinstance(item, dict):
            raise PolicyError("each rule must be a JSON object")
        params = item.get("params", {})
        if not isinstance(params, dict):
            raise PolicyError("rule params must be a JSON object")
        parsed.append(Rule(str(item.get("name", "")), str(item.get("predicate", "")), params))
    return Policy(str(doc.get("id", "policy")), tuple(parsed))


def parse_policy(text: str) -> Policy:
    """Parse builtin JSON policy text; raises PolicyError or EmptyPolicy."""
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise PolicyError(f"policy is not valid JSON: {exc}") from exc
    return policy_from_dict(doc)


def rego_policy(text: str, policy_id: str | None = None) -> Policy:
    m = re.search(r"^\s*package\s+([\w.]+)", text, re.MULTILINE)
    return Policy(policy_id or (m.group(1) if m else "rego"), (), "rego", text)


def load_policy(path: str | Path) -> Policy:
    path = Path(path)
    text = path.read_text(encoding="utf-8")
    if path.suffix == ".rego":
        return rego_policy(text, path.stem)
    return parse_policy(text)


@dataclass(frozen=True)
class RuleResults:
    per_rule: tuple[tuple[str, bool], ...]

    @property
    def passed_count(self) -> int:
        return sum(1 for _, ok in self.per_rule if ok)

    @property
    def total_count(self) -> int:
        return len(self.per_rule)

    @property
    def passed(self) -> bool:
        return self.total_count > 0 and self.passed_count == self.total_count

    def failed_rules(self) -> list[str]:
        return [name for name, ok in self.per_rule if not ok]

    def certificate(self) -> str:
        if self.passed:
            return f"All {self.total_count} policy rules passed."
        lines = [f"{self.passed_count} of {self.total_count} policy rules passed. Failing rules:"]
        lines += [f"- {name}" for name in self.failed_rules()]
        return "\n".join(lines)

    def to_dict(self) -> dict:
        return {
            "per_rule": [{"name": n, "passed": ok} for n, ok in self.per_rule],
            "passed_count": self.passed_count,
            "total_count": self.total_count,
        }


def lookup(value: Any, path: str | list) -> Any:
    """Follow a dotted path (``"versioning.0.enabled"``) through maps and lists.

    Returns ``_MISSING`` when a step does not exist and ``COMPUTED`` as soon
    as an unknown value is met.
    """
    steps = path.split(".") if isinstance(path, str) else list(path)
    for step in steps:
        if value == COMPUTED:
            return COMPUTED
        if isinstance(value, dict):
            if step not in value:
                return _MISSING
            value = value[step]
        elif isinstance(value, list):
            try:
                index = int(step)
            except (TypeError, ValueError):
                return _MISSING
            if not 0 <= index < len(value):
                return _MISSING
            value = value[index]
        else:
            return _MISSING
    return value


def strict_equal(a: Any, b: Any) -> bool:
    """JSON equality that keeps booleans distinct from numbers."""
    if isinstance(a, bool) or isinstance(b, bool):
        return isinstance(a, bool) and isinstance(b, bool) and a == b
    if isinstance(a, (int, float)) and isinstance(b, (int, float)):
        return a == b
    if isinstance(a, list) and isinstance(b, list):
        return len(a) == len(b) and all(strict_equal(x, y) for x, y in zip(a, b))
    if isinstance(a, dict) and isinstance(b, dict):
        return a.keys() == b.keys() and all(strict_equal(a[k], b[k]) for k in a)
    return type(a) is type(b) and a == b


def check_rule(rule: Rule, plan: PlanDocument) -> bool:
    """Evaluate one rule. Total: missing subjects and unknown values fail."""
    p = rule.params
    if rule.predicate == "resource_exists":
        return bool(plan.resources_of_type(p["type"]))
    if rule.predicate == "resource_count_at_least":
        return len(plan.resources_of_type(p["type"])) >= p["n"]
    if rule.predicate == "provider_declared":
        return p["name"] in plan.providers
    if rule.predicate == "dependency_exists":
        return (p["from"], p["to"]) in set(plan.edges)
    attrs = plan.resources.get(p["address"])
    if attrs is None:
        return False
    value = lookup(attrs, p["path"])
    if value is _MISSING or value == COMPUTED:
        return False
    if rule.predicate == "attribute_equals":
        return strict_equal(value, p["value"])
    if not isinstance(value, str):
        return False
    return re.search(p["pattern"], value) is not None


def evaluate_policy(policy: Policy, plan: PlanDocument, engine=None) -> RuleResults:
    """Evaluate every rule of ``policy`` independently against ``plan``.

    Rego policies need an external engine; pass one explicitly or let it be
    resolved from the environment.
    """
    if policy.source == "rego":
        if engine is None:
            from .external import OpaCli

            engine = OpaCli.from_env()
        return engine.evaluate(policy.rego, json.dumps(plan.to_policy_input(), sort_keys=True))
    if not policy.rules:
        raise EmptyPolicy(f"policy {policy.id!r} has no rules")
    return RuleResults(tuple((rule.name, check_rule(rule, plan)) for rule in policy.rules))


def count_rules(policy: Policy, engine=None, plan_json: str = "{}") -> int:
    """Reward denominator: explicit rules, or top-level booleans reported by the engine."""
    if policy.source == "rego":
        if engine is None:
            from .external import OpaCli

            engine = OpaCli.from_env()
        total = engine.evaluate(policy.rego, plan_json).total_count
        if total == 0:
            raise EmptyPolicy(f"policy {policy.id!r} yields no boolean rules")
        return total
    if not policy.rules:
        raise EmptyPolicy(f"policy {policy.id!r} has no rules")
    return len(policy.rules)
