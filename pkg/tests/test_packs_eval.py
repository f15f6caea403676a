from __future__ import annotations

import csv
import json
import random

import pytest

import helpers
from iacforge.curate import GenRecord, write_jsonl
from iacforge.errors import EmptyDataset, IdMismatch
from iacforge.evalharness import MetricVector, aggregate, evaluate_instance, run_benchmark
from iacforge.hcl import parse_config
from iacforge.packs import LINT_PACK, SECURITY_PACK, lint_findings, security_score


def test_pack_sizes_and_unique_ids():
    assert len(LINT_PACK.checks) >= 5 and len(SECURITY_PACK.checks) >= 8
    for pack in (LINT_PACK, SECURITY_PACK):
        ids = [c.id for c in pack.checks]
        assert len(ids) == len(set(ids))


@pytest.mark.parametrize(
    "text, finding",
    [
        ('variable "unused" {}\n', "unused-variable"),
        ('provider "aws" {}\nprovider "docker" {}\nresource "aws_s3_bucket" "b" {\n  bucket = "x"\n}\n', "unused-provider"),
        ('resource "aws_s3_bucket" "b" {\n  bucket = var.x\n}\n', "undeclared-variable"),
        ('resource "aws_s3_bucket" "b" {\n  bucket = "x"\n}\n', "missing-provider-block"),
        ('provider "aws" {}\nresource "aws_s3_bucket" "b" {}\n', "empty-resource-body"),
        ('provider "aws" {}\nvariable "n" {\n  default = "x"\n}\nresource "aws_s3_bucket" "b" {\n  bucket = "${var.n}"\n}\n', "interpolation-only"),
    ],
)
def test_lint_findings(text, finding):
    assert finding in lint_findings(parse_config(text))


def test_clean_config_has_no_lint_findings():
    assert lint_findings(parse_config(helpers.BUCKET_CONTAINER)) == []
    assert lint_findings(parse_config('provider "random" {}\nresource "random_pet" "p" {}\n')) == []


def test_security_score():
    assert security_score(parse_config('resource "random_pet" "p" {}\n'))[0] is None
    bad = 'resource "aws_s3_bucket" "b" {\n  bucket = "x"\n  acl = "public-read"\n}\n'
    score, results = security_score(parse_config(bad))
    assert results["s3-no-public-acl"] is False and score < 100
    iam = 'resource "aws_iam_policy" "p" {\n  policy = jsonencode({ Statement = [{ Action = "*", Effect = "Allow", Resource = "*" }] })\n}\n'
    assert security_score(parse_config(iam))[1]["iam-no-wildcard-action"] is False


def _mv(correct, sec=None):
    return MetricVector(correct, correct, correct, True, sec)


def test_aggregate_examples():
    r = aggregate([_mv(True), _mv(True), _mv(False), _mv(True)])
    assert r.correctness == 75.0 and r.lint_pass_rate == 100.0
    sec = aggregate([_mv(True, 100.0), _mv(True, 50.0), _mv(True, None)])
    assert sec.security_compliance == 75.0 and sec.security_n == 2
    assert aggregate([_mv(False)] * 3).correctness == 0.0
    assert aggregate([_mv(False)]).security_compliance is None
    with pytest.raises(EmptyDataset):
        aggregate([])


def test_aggregate_is_permutation_invariant():
    rng = random.Random(0)
    vecs = [_mv(rng.random() < 0.5, rng.choice([None, 0.0, 33.3, 100.0])) for _ in range(40)]
    shuffled = vecs[:]
    rng.shuffle(shuffled)
    a, b = aggregate(vecs), aggregate(shuffled)
    assert a.correctness == b.correctness
    assert a.security_compliance == pytest.approx(b.security_compliance)


def test_metric_hierarchy_enforced():
    with pytest.raises(ValueError):
        MetricVector(True, False, True, True, None)


def test_unparseable_candidate_scores_zero():
    v = evaluate_instance("resource {", helpers.k_of_n_policy(1, 1))
    assert v == MetricVector(False, False, False, False, 0.0)


def _dataset(tmp_path):
    policy = helpers.k_of_n_policy(2, 2)
    recs = [GenRecord(f"i{n}", "p", helpers.DEPLOYABLE, policy, f"r{n}", "m") for n in range(3)]
    write_jsonl(tmp_path / "ds.jsonl", recs)
    return tmp_path / "ds.jsonl"


def test_run_benchmark_writes_outputs(tmp_path):
    ds = _dataset(tmp_path)
    cands = [{"id": "i0", "config": helpers.DEPLOYABLE}, {"id": "i1", "config": helpers.COMPILABLE_ONLY},
             {"id": "i2", "config": helpers.UNCOMPILABLE}]
    (tmp_path / "c.jsonl").write_text("".join(json.dumps(c) + "\n" for c in cands))
    report = run_benchmark(ds, tmp_path / "c.jsonl", tmp_path / "out", workers=2)
    assert report.correctness == pytest.approx(100 / 3)
    assert report.compilability == pytest.approx(200 / 3)
    rows = list(csv.DictReader((tmp_path / "out" / "per_instance.csv").open()))
    assert [r["id"] for r in rows] == ["i0", "i1", "i2"]
    assert [r["correct"] for r in rows] == ["1", "0", "0"]
    assert json.loads((tmp_path / "out" / "report.json").read_text())["n"] == 3


def test_run_benchmark_id_mismatch(tmp_path):
    ds = _dataset(tmp_path)
    (tmp_path / "c.jsonl").write_text(json.dumps({"id": "i0", "config": "x"}) + "\n" + json.dumps({"id": "zz", "config": "x"}) + "\n")
    with pytest.raises(IdMismatch) as info:
        run_benchmark(ds, tmp_path / "c.jsonl", tmp_path / "out")
    assert info.value.missing == ["i1", "i2"] and info.value.extra == ["zz"]
