"""Backend selection for the three oracles.

The builtin backend is hermetic and is the default. With the external
backend, terraform is authoritative for FV1/FV2; the builtin verdict is still
computed and any disagreement is logged, never merged.
"""

from __future__ import annotations

import logging

from .errors import ParseError
from .hcl import Configuration, parse_config
from .policy import Policy, RuleResults, evaluate_policy
from .verify import (
    Diagnostic,
    PlanDocument,
    Stage,
    VerdictReport,
    attribute_view,
    plan,
    validate_text,
)

log = logging.getLogger(__name__)


class Oracles:
    def __init__(self, backend: str = "builtin", terraform=None, opa=None) -> None:
        if backend not in ("builtin", "external"):
            raise ValueError(f"unknown backend {backend!r}")
        self.backend = backend
        self.terraform = terraform
        self.opa = opa

    def compile(self, text: str) -> tuple[VerdictReport, Configuration | None]:
        builtin, config = validate_text(text)
        if self.backend == "builtin":
            return builtin, config
        report = self.terraform.validate(text)
        if report.passed != builtin.passed:
            log.warning("FV1 backend mismatch: external=%s builtin=%s %s", report.passed, builtin.passed, builtin.codes)
        return report, config

    def deploy(self, text: str, config: Configuration | None = None) -> tuple[VerdictReport, PlanDocument | None]:
        """FV2. Runs FV1 first, so a deployable verdict always implies a compilable one."""
        fv1, parsed = self.compile(text)
        config = config or parsed
        if not fv1.passed:
            diag = Diagnostic(Stage.FV2, "NOT_VALIDATED", "error", "configuration does not pass validation: " + ", ".join(fv1.codes))
            return VerdictReport(Stage.FV2, False, (diag,), fv1.elapsed, fv1.backend), None
        if self.backend == "builtin":
            return plan(config)
        report, doc = self.terraform.plan(text)
        builtin, builtin_doc = plan(config) if config is not None else (None, None)
        if builtin is not None and builtin.passed != report.passed:
            log.warning("FV2 backend mismatch: external=%s builtin=%s %s", report.passed, builtin.passed, builtin.codes)
        if report.passed and doc is None:
            doc = builtin_doc
            if doc is None and config is not None:
                doc = PlanDocument(attribute_view(config), (), frozenset())
        return report, doc

    def comply(self, policy: Policy, plan_doc: PlanDocument) -> RuleResults:
        return evaluate_policy(policy, plan_doc, engine=self.opa)


BUILTIN = Oracles()


def parse_or_none(text: str) -> Configuration | None:
    try:
        return parse_config(text)
    except ParseError:
        return None
