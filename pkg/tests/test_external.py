"""External adapters exercised against small shell-script stand-ins for the real binaries."""

from __future__ import annotations

import json
import os
import stat
import time

import pytest

from iacforge.errors import BackendUnavailable, PolicyParseError
from iacforge.external import (
    OpaCli,
    TerraformCli,
    parse_validate_json,
    plan_document_from_terraform_json,
    resolve_binary,
)
from iacforge.verify import COMPUTED, Stage


def _script(path, body: str) -> str:
    path.write_text("#!/bin/sh\n" + body)
    path.chmod(path.stat().st_mode | stat.S_IXUSR)
    return str(path)


SHOW = json.dumps({
    "resource_changes": [
        {"address": "aws_s3_bucket.b", "change": {"after": {"bucket": "x"}, "after_unknown": {"arn": True}}},
        {"address": "aws_sqs_queue.q", "change": {"after": {"name": "q"}, "after_unknown": {}}},
    ],
    "configuration": {
        "provider_config": {"aws": {"name": "aws"}},
        "root_module": {"resources": [
            {"address": "aws_sqs_queue.q", "expressions": {"name": {"references": ["aws_s3_bucket.b.id", "aws_s3_bucket.b"]}}},
        ]},
    },
})


@pytest.fixture
def fake_terraform(tmp_path):
    (tmp_path / "show.json").write_text(SHOW)
    return _script(
        tmp_path / "terraform",
        f"""case "$1" in
  init) exit 0 ;;
  validate) echo '{{"valid": false, "diagnostics": [{{"severity": "error", "summary": "Unsupported argument",
    "range": {{"filename": "main.tf", "start": {{"line": 3, "column": 5}}}}}}]}}'; exit 1 ;;
  plan) if grep -q hang main.tf; then read answer; fi; exit 0 ;;
  show) cat {tmp_path}/show.json ;;
esac
""",
    )


def test_validate_maps_diagnostics(fake_terraform):
    report = TerraformCli(fake_terraform, timeout=10).validate('resource "a" "b" {}\n')
    assert report.stage == Stage.FV1 and not report.passed
    diag = report.diagnostics[0]
    assert diag.code == "UNSUPPORTED_ARGUMENT" and diag.location.line == 3


def test_plan_reads_show_output(fake_terraform):
    report, doc = TerraformCli(fake_terraform, timeout=10).plan("locals {}\n")
    assert report.passed and report.backend == "external"
    assert doc.resources["aws_s3_bucket.b"] == {"bucket": "x", "arn": COMPUTED}
    assert doc.edges == (("aws_sqs_queue.q", "aws_s3_bucket.b"),)
    assert doc.providers == frozenset({"aws"})


def test_plan_waiting_for_input_times_out(fake_terraform):
    started = time.perf_counter()
    report, doc = TerraformCli(fake_terraform, timeout=0.5).plan("# hang\n")
    assert time.perf_counter() - started < 5
    assert doc is None and report.code == "TIMEOUT"
    assert "interactive input" in report.certificate()


def test_resolve_binary_precedence(tmp_path, monkeypatch):
    env_bin = _script(tmp_path / "env-tf", "exit 0\n")
    cfg_bin = _script(tmp_path / "cfg-tf", "exit 0\n")
    monkeypatch.setenv("IACFORGE_TERRAFORM_BIN", env_bin)
    assert resolve_binary(cfg_bin, "IACFORGE_TERRAFORM_BIN", "terraform") == env_bin
    monkeypatch.delenv("IACFORGE_TERRAFORM_BIN")
    assert resolve_binary(cfg_bin, "IACFORGE_TERRAFORM_BIN", "terraform") == cfg_bin
    monkeypatch.setenv("PATH", str(tmp_path))
    os.rename(env_bin, tmp_path / "terraform")
    assert resolve_binary(None, "IACFORGE_TERRAFORM_BIN", "terraform") == str(tmp_path / "terraform")
    with pytest.raises(BackendUnavailable):
        resolve_binary(str(tmp_path / "nope"), "IACFORGE_TERRAFORM_BIN", "terraform")


def test_opa_adapter(tmp_path):
    out = json.dumps({"result": [{"expressions": [{"value": {"has_bucket": True, "tagged": False, "msg": "x"}}]}]})
    opa = OpaCli(_script(tmp_path / "opa", f"echo '{out}'\n"), timeout=10)
    results = opa.evaluate("package terraform.check\n\nhas_bucket { true }\n", "{}")
    assert results.per_rule == (("has_bucket", True), ("tagged", False))
    with pytest.raises(PolicyParseError):
        opa.evaluate("no package here", "{}")
    failing = OpaCli(_script(tmp_path / "opa-bad", "echo 'rego_parse_error' >&2; exit 1\n"), timeout=10)
    with pytest.raises(PolicyParseError, match="rego_parse_error"):
        failing.evaluate("package p\n", "{}")


def test_parse_validate_json_tolerates_garbage():
    assert parse_validate_json("not json") == []


def test_show_output_skips_child_modules():
    doc = plan_document_from_terraform_json(
        {"resource_changes": [{"address": "module.m.a_b.c", "module_address": "module.m", "change": {"after": {}}}]}
    )
    assert doc.resources == {}
