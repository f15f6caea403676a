from __future__ import annotations

import random

import pytest

import helpers
from iacforge.graph import find_cycle, topological_order
from iacforge.hcl import parse_config
from iacforge.verify import COMPUTED, PlanDocument, Stage, VerdictReport, plan, plan_text, validate, validate_text


def _codes(text: str) -> list[str]:
    report, _ = validate_text(text)
    return report.codes


def test_bucket_container_passes_both_stages():
    fv1, config = validate_text(helpers.BUCKET_CONTAINER)
    assert fv1.passed and fv1.stage == Stage.FV1
    fv2, doc = plan(config)
    assert fv2.passed
    assert doc.edges == (("docker_container.c", "aws_s3_bucket.b"),)
    assert doc.providers == frozenset({"aws", "docker"})
    assert doc.resources["aws_s3_bucket.b"]["tags"] == {"Environment": "Dev", "Name": "My bucket"}


@pytest.mark.parametrize(
    "text, code",
    [
        ('resource "a_b" "c" {\n  x = var.nope\n}\n', "UNRESOLVED_REF"),
        ('resource "a_b" "c" {}\nresource "a_b" "c" {}\n', "DUP_ADDRESS"),
        ('variable "v" {}\nvariable "v" {}\n', "DUP_DECLARATION"),
        ('resource "a_b" {}\n', "BAD_LABELS"),
        ('frobnicate {}\n', "UNKNOWN_BLOCK"),
        ('resource "a_b" "c" {\n  depends_on = [var.x]\n}\nvariable "x" {\n  default = 1\n}\n', "BAD_DEPENDS_ON"),
        ('resource "a_b" "c" {\n  depends_on = [a_b.missing]\n}\n', "UNRESOLVED_REF"),
        ('resource "aws_s3_bucket" "c" {\n  provider = aws.west\n}\n', "UNRESOLVED_REF"),
        ('output "o" {}\n', "MISSING_ARGUMENT"),
        ('resource "a_b" "c" {\n', "PARSE"),
        ('provider "aws" {}\nprovider "aws" {}\n', "DUP_PROVIDER"),
    ],
)
def test_validate_codes(text, code):
    assert code in _codes(text)


def test_references_that_resolve():
    text = (
        'variable "n" {\n  default = "x"\n}\n'
        'locals {\n  full = "${var.n}-suffix"\n}\n'
        'resource "aws_s3_bucket" "b" {\n  bucket = local.full\n  count = 1\n}\n'
        'data "aws_region" "r" {}\n'
        'output "o" {\n  value = [data.aws_region.r.name, path.module, aws_s3_bucket.b[0].id]\n}\n'
    )
    report, config = validate_text(text)
    assert report.passed, report.certificate()
    fv2, doc = plan(config)
    assert fv2.passed
    assert doc.resources["aws_s3_bucket.b"]["bucket"] == "x-suffix"


@pytest.mark.parametrize(
    "text, code",
    [
        ('variable "v" {}\nresource "aws_s3_bucket" "b" {\n  bucket = var.v\n}\n', "MISSING_DEFAULT"),
        ('resource "google_storage_bucket" "b" {\n  name = "x"\n}\n', "UNKNOWN_PROVIDER"),
        (
            'resource "null_resource" "a" {\n  depends_on = [null_resource.b]\n}\n'
            'resource "null_resource" "b" {\n  depends_on = [null_resource.a]\n}\n',
            "CYCLE",
        ),
        (
            'resource "null_resource" "a" {\n  triggers = { x = local.l }\n}\n'
            'locals {\n  l = null_resource.a.id\n}\n',
            "CYCLE",
        ),
        ('resource "a_b" "c" {\n  x = var.nope\n}\n', "NOT_VALIDATED"),
    ],
)
def test_plan_codes(text, code):
    report, doc = plan_text(text)
    assert not report.passed and code in report.codes
    assert doc is None


def test_declared_unknown_provider_is_fine():
    report, doc = plan_text('provider "google" {}\nresource "google_storage_bucket" "b" {\n  name = "x"\n}\n')
    assert report.passed
    assert "google" in doc.providers


def test_unresolvable_values_are_computed():
    text = 'resource "aws_s3_bucket" "a" {\n  bucket = "a"\n}\nresource "aws_s3_bucket" "b" {\n  bucket = aws_s3_bucket.a.arn\n  n = length([1])\n}\n'
    _, doc = plan_text(text)
    assert doc.resources["aws_s3_bucket.b"] == {"bucket": COMPUTED, "n": COMPUTED}


def test_plan_document_round_trip_and_invariants():
    _, doc = plan_text(helpers.BUCKET_CONTAINER)
    assert PlanDocument.from_dict(doc.to_dict()) == doc
    assert doc.to_json() == PlanDocument.from_dict(doc.to_dict()).to_json()
    with pytest.raises(ValueError):
        PlanDocument({"a.b": {}}, (("a.b", "c.d"),), frozenset())
    with pytest.raises(ValueError):
        PlanDocument({"a.b": {}, "c.d": {}}, (("a.b", "c.d"), ("c.d", "a.b")), frozenset())


def test_verdict_report_consistency():
    with pytest.raises(ValueError):
        VerdictReport(Stage.FV1, False, ())
    report = validate(parse_config(helpers.BUCKET_CONTAINER))
    assert report.certificate().startswith("Success")


def test_parse_diagnostic_location():
    report, config = validate_text('resource "a" "b" {\n  x = \n}')
    assert config is None
    assert report.code == "PARSE"
    assert report.diagnostics[0].location.line == 2


def test_topological_order_puts_dependencies_first():
    order = topological_order(["a", "b", "c"], [("a", "b"), ("b", "c")])
    assert order.index("c") < order.index("b") < order.index("a")


def test_find_cycle_witness():
    rng = random.Random(1)
    for _ in range(300):
        n = rng.randint(1, 8)
        edges = {(rng.randrange(n), rng.randrange(n)) for _ in range(rng.randint(0, 12))}
        cycle = find_cycle(range(n), edges)
        if cycle is None:
            order = topological_order(range(n), edges)
            pos = {x: i for i, x in enumerate(order)}
            assert all(pos[b] < pos[a] for a, b in edges)
        else:
            assert cycle[0] == cycle[-1]
            assert all((a, b) in edges for a, b in zip(cycle, cycle[1:]))


def test_deep_chain_does_not_recurse():
    n = 20_000
    edges = [(i, i + 1) for i in range(n)]
    assert find_cycle(range(n + 1), edges) is None
    assert find_cycle(range(n + 1), edges + [(n, 0)]) is not None
