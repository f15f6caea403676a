"""Adapters for the external terraform and opa binaries.

Every invocation runs in its own temporary directory; directories are never
shared between concurrent runs. A bounded semaphore caps how many
subprocesses one adapter runs at a time.
"""

from __future__ import annotations

import json
import logging
import os
import re
import shutil
import subprocess
import tempfile
import threading
import time
from dataclasses import dataclass
from pathlib import Path
from typing import Any

from .errors import BackendUnavailable, PolicyParseError
from .verify import COMPUTED, Diagnostic, Location, PlanDocument, Stage, VerdictReport

log = logging.getLogger(__name__)

TERRAFORM_ENV = "IACFORGE_TERRAFORM_BIN"
OPA_ENV = "IACFORGE_OPA_BIN"
DEFAULT_PLAN_TIMEOUT = 30.0


def resolve_binary(configured: str | None, env_var: str, default_name: str) -> str:
    """Environment variable beats config file beats PATH lookup."""
    candidate = os.environ.get(env_var) or configured or shutil.which(default_name)
    if not candidate:
        raise BackendUnavailable(f"{default_name} binary not found (set {env_var})")
    path = shutil.which(candidate) or candidate
    if not (os.path.isfile(path) and os.access(path, os.X_OK)):
        raise BackendUnavailable(f"{path} is missing or not executable")
    return path


@dataclass
class RunResult:
    returncode: int | None
    stdout: str
    stderr: str
    timed_out: bool
    elapsed: float


def run_command(cmd: list[str], cwd: str | Path, timeout: float | None, env: dict | None = None) -> RunResult:
    """Run ``cmd`` with a wall-clock timeout.

    stdin stays an open pipe so a process waiting for interactive input
    blocks until the timeout instead of failing on EOF.
    """
    started = time.perf_counter()
    with tempfile.TemporaryFile() as out, tempfile.TemporaryFile() as err:
        proc = subprocess.Popen(cmd, cwd=cwd, stdin=subprocess.PIPE, stdout=out, stderr=err, env=env)
        timed_out = False
        try:
            proc.wait(timeout=timeout)
        except subprocess.TimeoutExpired:
            timed_out = True
            proc.kill()
            proc.wait()
        finally:
            if proc.stdin:
                proc.stdin.close()
        out.seek(0)
        err.seek(0)
        return RunResult(
            None if timed_out else proc.returncode,
            out.read().decode("utf-8", "replace"),
            err.read().decode("utf-8", "replace"),
            timed_out,
            time.perf_counter() - started,
        )


class _Pooled:
    def __init__(self, workers: int | None) -> None:
        self.workers = workers or os.cpu_count() or 1
        self._slots = threading.BoundedSemaphore(self.workers)


class TerraformCli(_Pooled):
    """FV1 via ``terraform validate -json``; FV2 via backendless init then ``terraform plan``."""

    def __init__(
        self,
        binary: str,
        timeout: float = DEFAULT_PLAN_TIMEOUT,
        workers: int | None = None,
        plugin_dir: str | None = None,
    ) -> None:
        super().__init__(workers)
        self.binary = binary
        self.timeout = timeout
        self.plugin_dir = plugin_dir

    @classmethod
    def from_env(cls, configured: str | None = None, **kwargs) -> "TerraformCli":
        return cls(resolve_binary(configured, TERRAFORM_ENV, "terraform"), **kwargs)

    def _env(self) -> dict:
        env = dict(os.environ)
        env.setdefault("TF_IN_AUTOMATION", "1")
        env.setdefault("CHECKPOINT_DISABLE", "1")
        return env

    def _init(self, workdir: str) -> RunResult:
        cmd = [self.binary, "init", "-backend=false", "-input=false", "-no-color"]
        if self.plugin_dir:
            cmd.append(f"-plugin-dir={self.plugin_dir}")
        return run_command(cmd, workdir, self.timeout, self._env())

    def validate_dir(self, workdir: str | Path) -> VerdictReport:
        started = time.perf_counter()
        with self._slots:
            init = self._init(str(workdir))
            if init.timed_out or init.returncode != 0:
                return _failed(Stage.FV1, "INIT", init, started, self.timeout)
            res = run_command([self.binary, "validate", "-json", "-no-color"], workdir, self.timeout, self._env())
        if res.timed_out:
            return _failed(Stage.FV1, "TIMEOUT", res, started, self.timeout)
        diags = parse_validate_json(res.stdout)
        passed = res.returncode == 0 and not any(d.severity == "error" for d in diags)
        if not passed and not any(d.severity == "error" for d in diags):
            diags.append(Diagnostic(Stage.FV1, "VALIDATE", "error", res.stderr.strip() or "terraform validate failed"))
        return VerdictReport(Stage.FV1, passed, tuple(diags), time.perf_counter() - started, "external")

    def plan_dir(self, workdir: str | Path) -> tuple[VerdictReport, PlanDocument | None]:
        started = time.perf_counter()
        with self._slots:
            init = self._init(str(workdir))
            if init.timed_out or init.returncode != 0:
                return _failed(Stage.FV2, "INIT", init, started, self.timeout), None
            res = run_command(
                [self.binary, "plan", "-lock=false", "-no-color", "-out=tfplan"], workdir, self.timeout, self._env()
            )
            if res.timed_out or res.returncode != 0:
                return _failed(Stage.FV2, "PLAN", res, started, self.timeout), None
            show = run_command([self.binary, "show", "-json", "tfplan"], workdir, self.timeout, self._env())
        doc = None
        if show.returncode == 0:
            try:
                doc = plan_document_from_terraform_json(json.loads(show.stdout))
            except (ValueError, KeyError) as exc:
                log.warning("could not read terraform show output: %s", exc)
        report = VerdictReport(Stage.FV2, True, (), time.perf_counter() - started, "external")
        return report, doc

    def validate(self, text: str) -> VerdictReport:
        with tempfile.TemporaryDirectory(prefix="iacforge-fv1-") as tmp:
            Path(tmp, "main.tf").write_text(text, encoding="utf-8")
            return self.validate_dir(tmp)

    def plan(self, text: str) -> tuple[VerdictReport, PlanDocument | None]:
        with tempfile.TemporaryDirectory(prefix="iacforge-fv2-") as tmp:
            Path(tmp, "main.tf").write_text(text, encoding="utf-8")
            return self.plan_dir(tmp)


def external_verify(stage: Stage | str, workdir: str | Path, terraform: TerraformCli | None = None) -> VerdictReport:
    """Run FV1 or FV2 with the external toolchain on a directory.

    The directory is copied into a private temporary directory first.
    """
    stage = Stage(stage)
    terraform = terraform or TerraformCli.from_env()
    with tempfile.TemporaryDirectory(prefix="iacforge-ext-") as tmp:
        for item in Path(workdir).iterdir():
            if item.is_file():
                shutil.copy2(item, tmp)
        if stage is Stage.FV1:
            return terraform.validate_dir(tmp)
        if stage is Stage.FV2:
            return terraform.plan_dir(tmp)[0]
    raise ValueError("external_verify supports FV1 and FV2 only")


def _failed(stage: Stage, step: str, res: RunResult, started: float, timeout: float) -> VerdictReport:
    if res.timed_out:
        message = (
            f"timed out: terraform did not complete within {timeout:g} seconds "
            "(it may be waiting for interactive input for a variable with no default value)"
        )
        diag = Diagnostic(stage, "TIMEOUT", "error", message)
    else:
        diag = Diagnostic(stage, step, "error", res.stderr.strip() or res.stdout.strip() or f"terraform {step.lower()} failed")
    return VerdictReport(stage, False, (diag,), time.perf_counter() - started, "external")


def parse_validate_json(stdout: str) -> list[Diagnostic]:
    """Map ``terraform validate -json`` diagnostics into :class:`Diagnostic` records."""
    try:
        doc = json.loads(stdout)
    except json.JSONDecodeError:
        return []
    out = []
    for item in doc.get("diagnostics", []):
        rng = item.get("range") or {}
        start = rng.get("start") or {}
        loc = Location(start["line"], start.get("column"), rng.get("filename")) if "line" in start else None
        message = item.get("summary", "")
        if item.get("detail"):
            message = f"{message}: {item['detail']}" if message else item["detail"]
        severity = "error" if item.get("severity", "error") == "error" else "warning"
        code = re.sub(r"[^A-Z0-9]+", "_", item.get("summary", "VALIDATE").upper()).strip("_")[:40] or "VALIDATE"
        out.append(Diagnostic(Stage.FV1, code, severity, message, loc))
    return out


def _resolve_unknowns(after: Any, unknown: Any) -> Any:
    if unknown is True:
        return COMPUTED
    if isinstance(after, dict):
        unknown = unknown if isinstance(unknown, dict) else {}
        keys = set(after) | {k for k, v in unknown.items() if v is True}
        return {k: _resolve_unknowns(after.get(k), unknown.get(k)) for k in keys}
    if isinstance(after, list):
        unknown = unknown if isinstance(unknown, list) else []
        return [_resolve_unknowns(v, unknown[i] if i < len(unknown) else None) for i, v in enumerate(after)]
    return after


def _expression_refs(node: Any) -> list[str]:
    refs = []
    if isinstance(node, dict):
        for key, value in node.items():
            if key == "references" and isinstance(value, list):
                refs.extend(v for v in value if isinstance(v, str))
            else:
                refs.extend(_expression_refs(value))
    elif isinstance(node, list):
        for value in node:
            refs.extend(_expression_refs(value))
    return refs


def plan_document_from_terraform_json(doc: dict) -> PlanDocument:
    """Build a :class:`PlanDocument` from ``terraform show -json`` output."""
    resources: dict[str, dict] = {}
    for change in doc.get("resource_changes", []):
        if change.get("module_address"):
            continue
        body = change.get("change", {})
        after = body.get("after") or {}
        resources[change["address"]] = _resolve_unknowns(after, body.get("after_unknown") or {})
    edges: set[tuple[str, str]] = set()
    config = doc.get("configuration", {}).get("root_module", {})
    for res in config.get("resources", []):
        src = res.get("address")
        if src not in resources:
            continue
        targets = list(res.get("depends_on", [])) + _expression_refs(res.get("expressions", {}))
        for target in targets:
            parts = target.split(".")
            addr = ".".join(parts[:3] if parts[0] == "data" else parts[:2])
            addr = re.sub(r"\[.*?\]", "", addr)
            if addr in resources and addr != src:
                edges.add((src, addr))
    providers = {
        cfg.get("name", key.split(".")[0]) for key, cfg in doc.get("configuration", {}).get("provider_config", {}).items()
    }
    return PlanDocument(resources, tuple(sorted(edges)), frozenset(providers))


class OpaCli(_Pooled):
    """``opa eval`` adapter: one (name, passed) entry per top-level boolean in the package."""

    def __init__(self, binary: str, timeout: float = DEFAULT_PLAN_TIMEOUT, workers: int | None = None) -> None:
        super().__init__(workers)
        self.binary = binary
        self.timeout = timeout

    @classmethod
    def from_env(cls, configured: str | None = None, **kwargs) -> "OpaCli":
        return cls(resolve_binary(configured, OPA_ENV, "opa"), **kwargs)

    def evaluate(self, rego: str, plan_json: str):
        from .policy import RuleResults

        m = re.search(r"^\s*package\s+([\w.]+)", rego, re.MULTILINE)
        if not m:
            raise PolicyParseError("rego policy has no package declaration")
        query = f"data.{m.group(1)}"
        with tempfile.TemporaryDirectory(prefix="iacforge-opa-") as tmp:
            Path(tmp, "policy.rego").write_text(rego, encoding="utf-8")
            Path(tmp, "input.json").write_text(plan_json, encoding="utf-8")
            cmd = [self.binary, "eval", "--format", "json", "--data", "policy.rego", "--input", "input.json", query]
            with self._slots:
                res = run_command(cmd, tmp, self.timeout)
        if res.timed_out:
            raise PolicyParseError(f"opa eval did not finish within {self.timeout:g} seconds")
        if res.returncode != 0:
            raise PolicyParseError(res.stderr.strip() or res.stdout.strip() or "opa eval failed")
        try:
            doc = json.loads(res.stdout)
        except json.JSONDecodeError as exc:
            raise PolicyParseError(f"unreadable opa output: {exc}") from exc
        value: dict = {}
        for result in doc.get("result", []):
            for expr in result.get("expressions", []):
                if isinstance(expr.get("value"), dict):
                    value.update(expr["value"])
        per_rule = tuple((name, value[name]) for name in sorted(value) if isinstance(value[name], bool))
        return RuleResults(per_rule)
