from __future__ import annotations

import json

import pytest
from hypothesis import given
from hypothesis import strategies as st

import helpers
from iacforge.errors import EmptyGroup, EmptyPolicy, PolicyError
from iacforge.hcl import parse_config
from iacforge.policy import Policy, Rule, check_rule, evaluate_policy, load_policy, lookup, parse_policy, strict_equal
from iacforge.reward import Tier, compute_reward, group_advantages
from iacforge.verify import COMPUTED, plan_text


@pytest.fixture(scope="module")
def bc_plan():
    return plan_text(helpers.BUCKET_CONTAINER)[1]


@pytest.mark.parametrize(
    "rule, expected",
    [
        (Rule("a", "resource_exists", {"type": "aws_s3_bucket"}), True),
        (Rule("a", "resource_exists", {"type": "aws_instance"}), False),
        (Rule("a", "resource_count_at_least", {"type": "aws_s3_bucket", "n": 1}), True),
        (Rule("a", "resource_count_at_least", {"type": "aws_s3_bucket", "n": 2}), False),
        (Rule("a", "attribute_equals", {"address": "aws_s3_bucket.b", "path": "tags.Name", "value": "My bucket"}), True),
        (Rule("a", "attribute_equals", {"address": "aws_s3_bucket.b", "path": "tags.Missing", "value": None}), False),
        (Rule("a", "attribute_matches", {"address": "docker_container.c", "path": "image", "pattern": "^nginx"}), True),
        (Rule("a", "dependency_exists", {"from": "docker_container.c", "to": "aws_s3_bucket.b"}), True),
        (Rule("a", "dependency_exists", {"from": "aws_s3_bucket.b", "to": "docker_container.c"}), False),
        (Rule("a", "provider_declared", {"name": "docker"}), True),
    ],
)
def test_predicates(bc_plan, rule, expected):
    assert check_rule(rule, bc_plan) is expected


def test_rule_validation():
    with pytest.raises(PolicyError):
        Rule("a", "no_such_predicate", {})
    with pytest.raises(PolicyError):
        Rule("a", "resource_exists", {})
    with pytest.raises(EmptyPolicy):
        Policy("p", ())
    with pytest.raises(PolicyError):
        parse_policy("{not json")


def test_lookup_and_strict_equality():
    assert lookup({"a": [{"b": 3}]}, "a.0.b") == 3
    assert strict_equal(1, 1.0)
    assert not strict_equal(True, 1)
    assert not strict_equal("1", 1)


def test_computed_values_fail_rules():
    _, doc = plan_text('resource "aws_s3_bucket" "a" {\n  bucket = "x"\n}\nresource "aws_s3_bucket" "b" {\n  bucket = aws_s3_bucket.a.arn\n}\n')
    rule = Rule("r", "attribute_equals", {"address": "aws_s3_bucket.b", "path": "bucket", "value": COMPUTED})
    assert check_rule(rule, doc) is False


def test_policy_json_round_trip(tmp_path):
    policy = helpers.k_of_n_policy(2, 4)
    path = tmp_path / "p.json"
    path.write_text(policy.to_json())
    assert load_policy(path) == policy
    renamed = Policy("other", tuple(Rule(f"x{i}", r.predicate, r.params) for i, r in enumerate(policy.rules)))
    assert renamed.canonical() == policy.canonical()


def test_evaluate_policy_counts(bc_plan):
    results = evaluate_policy(helpers.k_of_n_policy(0, 1), bc_plan)
    assert results.total_count == 1


def test_reward_tiers():
    policy = helpers.k_of_n_policy(3, 4)
    none = compute_reward(helpers.UNCOMPILABLE, policy)
    assert (none.reward, none.tier) == (0.0, Tier.NONE)
    comp = compute_reward(helpers.COMPILABLE_ONLY, policy)
    assert (comp.reward, comp.tier) == (0.5, Tier.COMPILABLE)
    full = compute_reward(helpers.DEPLOYABLE, policy)
    assert (full.reward, full.tier, full.rules_passed, full.rules_total) == (1.75, Tier.DEPLOYABLE, 3, 4)
    assert json.loads(json.dumps(full.to_dict()))["reward"] == 1.75


def test_reward_accepts_parsed_configuration():
    policy = helpers.k_of_n_policy(2, 2)
    assert compute_reward(parse_config(helpers.DEPLOYABLE), policy).reward == 2.0


def test_reward_is_deterministic():
    policy = helpers.k_of_n_policy(1, 3)
    a = compute_reward(helpers.DEPLOYABLE, policy).to_dict()
    b = compute_reward(helpers.DEPLOYABLE, policy).to_dict()
    assert a == b


def test_group_advantages():
    g = group_advantages([2, 1, 0])
    assert g.baseline == 1.0 and g.advantages == (1.0, 0.0, -1.0)
    assert group_advantages([1.5]).advantages == (0.0,)
    with pytest.raises(EmptyGroup):
        group_advantages([])


@given(st.lists(st.sampled_from([0.0, 0.5, 1.0, 1.25, 1.5, 1.75, 2.0, 4 / 3]), min_size=1, max_size=64))
def test_advantages_sum_to_zero(rewards):
    assert abs(sum(group_advantages(rewards).advantages)) <= 1e-9
