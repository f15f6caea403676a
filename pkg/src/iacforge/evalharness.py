"""Strict pass@1 evaluation: one candidate per instance, five metrics."""

from __future__ import annotations

import csv
import json
import logging
import math
import os
import tempfile
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

from .curate import GenRecord, MutnRecord, load_records, read_jsonl
from .errors import EmptyDataset, EmptyPolicy, IdMismatch
from .external import run_command
from .oracles import BUILTIN, Oracles
from .packs import lint_findings, security_score
from .policy import Policy

log = logging.getLogger(__name__)

TFLINT_ENV = "IACFORGE_TFLINT_BIN"
CHECKOV_ENV = "IACFORGE_CHECKOV_BIN"


@dataclass(frozen=True)
class MetricVector:
    compilable: bool
    deployable: bool
    correct: bool
    lint_pass: bool
    security_compliance: float | None

    def __post_init__(self) -> None:
        if self.correct and not self.deployable or self.deployable and not self.compilable:
            raise ValueError("metric hierarchy violated: correct => deployable => compilable")

    def to_dict(self) -> dict:
        return {
            "compilable": self.compilable,
            "deployable": self.deployable,
            "correct": self.correct,
            "lint_pass": self.lint_pass,
            "security_compliance": self.security_compliance,
        }


class ExternalLinter:
    """tflint adapter: pass iff the linter exits 0."""

    def __init__(self, binary: str, timeout: float = 60.0) -> None:
        self.binary = binary
        self.timeout = timeout

    def passes(self, text: str) -> bool:
        with tempfile.TemporaryDirectory(prefix="iacforge-lint-") as tmp:
            Path(tmp, "main.tf").write_text(text, encoding="utf-8")
            res = run_command([self.binary, "--format", "compact"], tmp, self.timeout)
            return res.returncode == 0 and not res.timed_out


class ExternalScanner:
    """checkov adapter: percentage from its passed/failed summary."""

    def __init__(self, binary: str, timeout: float = 120.0) -> None:
        self.binary = binary
        self.timeout = timeout

    def score(self, text: str) -> float | None:
        with tempfile.TemporaryDirectory(prefix="iacforge-scan-") as tmp:
            Path(tmp, "main.tf").write_text(text, encoding="utf-8")
            res = run_command([self.binary, "-d", tmp, "-o", "json", "--quiet", "--compact"], tmp, self.timeout)
        try:
            doc = json.loads(res.stdout)
        except ValueError:
            return None
        docs = doc if isinstance(doc, list) else [doc]
        passed = sum(d.get("summary", {}).get("passed", 0) for d in docs if isinstance(d, dict))
        failed = sum(d.get("summary", {}).get("failed", 0) for d in docs if isinstance(d, dict))
        return 100.0 * passed / (passed + failed) if passed + failed else None


def external_adapters_from_env() -> tuple[ExternalLinter | None, ExternalScanner | None]:
    lint = os.environ.get(TFLINT_ENV)
    scan = os.environ.get(CHECKOV_ENV)
    return (ExternalLinter(lint) if lint else None, ExternalScanner(scan) if scan else None)


def evaluate_instance(
    candidate: str,
    policy: Policy,
    oracles: Oracles | None = None,
    linter: ExternalLinter | None = None,
    scanner: ExternalScanner | None = None,
) -> MetricVector:
    oracles = oracles or BUILTIN
    if policy.source == "builtin" and not policy.rules:
        raise EmptyPolicy(f"policy {policy.id!r} has no rules")
    fv1, config = oracles.compile(candidate)
    if config is None:
        return MetricVector(False, False, False, False, 0.0)
    compilable = fv1.passed
    deployable = correct = False
    if compilable:
        fv2, plan_doc = oracles.deploy(candidate, config)
        deployable = fv2.passed
        if deployable:
            correct = oracles.comply(policy, plan_doc).passed
    lint_pass = linter.passes(candidate) if linter else not lint_findings(config)
    security = scanner.score(candidate) if scanner else security_score(config)[0]
    return MetricVector(compilable, deployable, correct, lint_pass, security)


@dataclass(frozen=True)
class Report:
    n: int
    correctness: float
    deployability: float
    compilability: float
    lint_pass_rate: float
    security_compliance: float | None
    security_n: int

    def to_dict(self) -> dict:
        return {
            "n": self.n,
            "correctness": self.correctness,
            "deployability": self.deployability,
            "compilability": self.compilability,
            "lint_pass_rate": self.lint_pass_rate,
            "security_compliance": self.security_compliance,
            "security_n": self.security_n,
        }

    def render(self) -> str:
        sec = "n/a" if self.security_compliance is None else f"{self.security_compliance:.2f}"
        rows = [
            ("Correctness", f"{self.correctness:.2f}%"),
            ("Deployability", f"{self.deployability:.2f}%"),
            ("Compilability", f"{self.compilability:.2f}%"),
            ("Linter Pass Rate", f"{self.lint_pass_rate:.2f}%"),
            ("Security Compliance", sec),
        ]
        width = max(len(k) for k, _ in rows)
        lines = [f"{'Metric'.ljust(width)}  Value", f"{'-' * width}  -------"]
        lines += [f"{k.ljust(width)}  {v}" for k, v in rows]
        lines.append(f"(n = {self.n})")
        return "\n".join(lines)


def _rate(flags: Sequence[bool]) -> float:
    return 100.0 * sum(flags) / len(flags)


def aggregate(vectors: Sequence[MetricVector]) -> Report:
    if not vectors:
        raise EmptyDataset("no metric vectors to aggregate")
    present = [v.security_compliance for v in vectors if v.security_compliance is not None]
    return Report(
        n=len(vectors),
        correctness=_rate([v.correct for v in vectors]),
        deployability=_rate([v.deployable for v in vectors]),
        compilability=_rate([v.compilable for v in vectors]),
        lint_pass_rate=_rate([v.lint_pass for v in vectors]),
        security_compliance=math.fsum(present) / len(present) if present else None,
        security_n=len(present),
    )


def _reference(record: GenRecord | MutnRecord) -> Policy:
    return record.policy_m if isinstance(record, MutnRecord) else record.policy


def run_benchmark(
    dataset: str | Path,
    candidates: str | Path,
    outdir: str | Path,
    *,
    oracles: Oracles | None = None,
    workers: int = 1,
    linter: ExternalLinter | None = None,
    scanner: ExternalScanner | None = None,
) -> Report:
    """Score a candidates file against a dataset; writes report.json and per_instance.csv."""
    records = load_records(dataset)
    by_id = {r.id: r for r in records}
    cand = {}
    for doc in read_jsonl(candidates):
        cand[str(doc["id"])] = doc["config"]
    missing = sorted(set(by_id) - set(cand))
    extra = sorted(set(cand) - set(by_id))
    if missing or extra:
        raise IdMismatch(missing, extra)
    ids = [r.id for r in records]

    def score(i: str) -> MetricVector:
        return evaluate_instance(cand[i], _reference(by_id[i]), oracles, linter, scanner)

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            vectors = list(pool.map(score, ids))
    else:
        vectors = [score(i) for i in ids]
    report = aggregate(vectors)

    outdir = Path(outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    with open(outdir / "per_instance.csv", "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["id", "compilable", "deployable", "correct", "lint", "security"])
        for i, v in zip(ids, vectors):
            sec = "" if v.security_compliance is None else f"{v.security_compliance:.2f}"
            writer.writerow([i, int(v.compilable), int(v.deployable), int(v.correct), int(v.lint_pass), sec])
    (outdir / "report.json").write_text(json.dumps(report.to_dict(), indent=2, sort_keys=True) + "\n", encoding="utf-8")
    return report
