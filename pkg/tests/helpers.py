"""Shared fixtures for the test suite: a rule-based mock LLM and random inputs."""

from __future__ import annotations

import json
import random
import re
from pathlib import Path

from iacforge.policy import Policy, Rule
from iacforge.repair import FunctionClient

FIXTURES = Path(__file__).parent / "fixtures"
BUCKET_CONTAINER = (FIXTURES / "bucket_container.tf").read_text()


def block(text: str, tag: str) -> str:
    m = re.search(rf"<{tag}>\n(?:```hcl\n)?(.*?)(?:\n```)?\n</{tag}>", text, re.S)
    return m.group(1) if m else ""


_VAR_BLOCK = re.compile(r'variable\s+"[^"]+"\s*\{[^{}]*\}\n?')


def add_defaults(config: str) -> str:
    """Drop variable blocks and redeclare every referenced var with a default."""
    body = _VAR_BLOCK.sub("", config)
    names = sorted(set(re.findall(r"\bvar\.([A-Za-z_][A-Za-z0-9_]*)", body)))
    decls = "".join(f'variable "{n}" {{\n  default = "{n}-value"\n}}\n\n' for n in names)
    return decls + body.strip() + "\n"


def resource_types(config: str) -> list[str]:
    return sorted(set(re.findall(r'resource\s+"([^"]+)"', config)))


def policy_doc(types: list[str], extra: list[dict] = ()) -> dict:
    rules = [{"name": f"has_{t}", "predicate": "resource_exists", "params": {"type": t}} for t in types]
    return {"id": "p", "rules": rules + list(extra)}


def mock_respond(prompt: str) -> str:
    """Deterministic stand-in for the LLM, keyed on the template being answered."""
    if "VERDICT: YES" in prompt and "<user_prompt>" in prompt and "reviewing" in prompt:
        return "VERDICT: YES\nThe configuration matches the request."
    if "<incorrect_terraform_config>" in prompt:
        fixed = add_defaults(block(prompt, "incorrect_terraform_config"))
        return f"Explanation.\n<corrected_terraform_config>\n```hcl\n{fixed}```\n</corrected_terraform_config>"
    if "<prompt>\n(Your prompt" in prompt:
        types = resource_types(block(prompt, "terraform_config"))
        return f"<prompt>Create {', '.join(types) or 'nothing'}.</prompt>"
    if "<policy>\n(Your policy" in prompt:
        types = resource_types(block(prompt, "terraform_config"))
        return f"<policy>{json.dumps(policy_doc(types))}</policy>"
    if "<cloned_terraform_config>\n(" in prompt:
        cfg = block(prompt, "terraform_config")
        return f'<cloned_terraform_config>\n{cfg}\n\nresource "random_pet" "clone_extra" {{}}\n</cloned_terraform_config>'
    if "<mutation_prompt>\n(" in prompt and "<proposed_mutation>" not in prompt:
        cfg = block(prompt, "initial_terraform_config")
        policy = json.loads(re.search(r"<policy>\n(.*?)\n</policy>", prompt, re.S).group(1))
        policy["rules"].append({"name": "has_id", "predicate": "resource_exists", "params": {"type": "random_id"}})
        mutated = cfg + '\n\nresource "random_id" "suffix" {\n  byte_length = 4\n}\n'
        return (
            f"<mutated_terraform_config>\n{mutated}</mutated_terraform_config>\n"
            f"<mutated_policy>{json.dumps(policy)}</mutated_policy>\n"
            "<mutation_prompt>Add a random four-byte suffix id.</mutation_prompt>"
        )
    return "I cannot help with that."


def mock_llm() -> FunctionClient:
    return FunctionClient(mock_respond)


# ---------------------------------------------------------------- random inputs

TYPES = ["aws_s3_bucket", "aws_instance", "random_pet", "null_resource", "docker_container", "aws_sqs_queue"]
FOREIGN = ["google_storage_bucket", "azurerm_resource_group"]


def random_config(rng: random.Random) -> str:
    """A random small configuration; a fair share are broken in various ways."""
    n = rng.randint(1, 5)
    names = [f"r{i}" for i in range(n)]
    types = [rng.choice(TYPES + (FOREIGN if rng.random() < 0.1 else [])) for _ in names]
    lines = []
    if rng.random() < 0.7:
        lines.append('provider "aws" {\n  region = "us-east-1"\n}\n')
    variables = []
    if rng.random() < 0.4:
        has_default = rng.random() < 0.6
        variables.append("v")
        lines.append('variable "v" {\n' + ('  default = "x"\n' if has_default else "") + "}\n")
    for i, (t, name) in enumerate(zip(types, names)):
        body = [f'  label = "{name}-{rng.randint(0, 99)}"']
        if rng.random() < 0.3:
            body.append(f"  size = {rng.randint(1, 9)}")
        if variables and rng.random() < 0.5:
            body.append("  from_var = var.v")
        if rng.random() < 0.1:
            body.append("  broken = var.undeclared")
        if i > 0 and rng.random() < 0.5:
            j = rng.randrange(i)
            body.append(f"  depends_on = [{types[j]}.{names[j]}]")
        if i < n - 1 and rng.random() < 0.1:
            j = rng.randrange(i + 1, n)
            body.append(f"  back = {types[j]}.{names[j]}.id")
        lines.append(f'resource "{t}" "{name}" {{\n' + "\n".join(body) + "\n}\n")
    text = "\n".join(lines)
    if rng.random() < 0.1:
        cut = rng.randrange(len(text))
        text = text[:cut] + rng.choice(["{", "}", '"', "=", ""]) + text[cut + 1 :]
    return text


def random_policy(rng: random.Random) -> Policy:
    rules = []
    for i in range(rng.randint(1, 6)):
        kind = rng.choice(["exists", "count", "provider", "attr"])
        t = rng.choice(TYPES)
        if kind == "exists":
            rules.append(Rule(f"r{i}", "resource_exists", {"type": t}))
        elif kind == "count":
            rules.append(Rule(f"r{i}", "resource_count_at_least", {"type": t, "n": rng.randint(1, 2)}))
        elif kind == "provider":
            rules.append(Rule(f"r{i}", "provider_declared", {"name": rng.choice(["aws", "docker", "gcp"])}))
        else:
            rules.append(Rule(f"r{i}", "attribute_equals", {"address": f"{t}.r0", "path": "size", "value": rng.randint(1, 9)}))
    return Policy("random", tuple(rules))


# ---------------------------------------------------------------- reward fixture matrix

UNCOMPILABLE = 'resource "aws_s3_bucket" "b" {\n  bucket = var.missing\n}\n'
COMPILABLE_ONLY = 'variable "name" {}\n\nresource "aws_s3_bucket" "b" {\n  bucket = var.name\n}\n'
DEPLOYABLE = (
    'provider "aws" {\n  region = "us-east-1"\n}\n\n'
    'resource "aws_s3_bucket" "b" {\n  bucket = "bucket-b"\n}\n\n'
    'resource "aws_sqs_queue" "q" {\n  name = "queue-q"\n}\n'
)


def k_of_n_policy(k: int, n: int) -> Policy:
    """n rules over DEPLOYABLE, exactly k of which hold."""
    passing = [
        Rule("p0", "resource_exists", {"type": "aws_s3_bucket"}),
        Rule("p1", "resource_exists", {"type": "aws_sqs_queue"}),
        Rule("p2", "provider_declared", {"name": "aws"}),
        Rule("p3", "attribute_equals", {"address": "aws_s3_bucket.b", "path": "bucket", "value": "bucket-b"}),
        Rule("p4", "attribute_matches", {"address": "aws_sqs_queue.q", "path": "name", "pattern": "^queue-"}),
        Rule("p5", "resource_count_at_least", {"type": "aws_s3_bucket", "n": 1}),
    ]
    failing = [
        Rule("f0", "resource_exists", {"type": "aws_instance"}),
        Rule("f1", "provider_declared", {"name": "docker"}),
        Rule("f2", "attribute_equals", {"address": "aws_s3_bucket.b", "path": "bucket", "value": "other"}),
        Rule("f3", "resource_count_at_least", {"type": "aws_s3_bucket", "n": 2}),
        Rule("f4", "attribute_matches", {"address": "aws_sqs_queue.q", "path": "name", "pattern": "^topic-"}),
        Rule("f5", "dependency_exists", {"from": "aws_sqs_queue.q", "to": "aws_s3_bucket.b"}),
    ]
    return Policy(f"k{k}n{n}", tuple(passing[:k] + failing[: n - k]))


def seed_tree(root: Path, n_repos: int = 22) -> Path:
    """Repositories with varied, mostly fixable modules."""
    templates = [
        BUCKET_CONTAINER,
        'provider "aws" {}\n\nresource "aws_s3_bucket" "b" {\n  bucket = "bucket-{i}"\n}\n',
        'provider "aws" {}\n\nresource "aws_sqs_queue" "q" {\n  name = var.queue\n}\n',
        'provider "random" {}\n\nresource "random_pet" "p" {\n  length = {i}\n}\n',
        'provider "aws" {}\n\nvariable "ami" {}\n\nresource "aws_instance" "w" {\n  ami           = var.ami\n  instance_type = "t3.micro"\n  tags = {\n    Name = "w{i}"\n  }\n}\n',
    ]
    for i in range(n_repos):
        repo = root / f"repo{i:02d}"
        text = templates[i % len(templates)].replace("{i}", str(i + 1))
        if i % len(templates) == 0:
            text = text.replace("my-tf-test-bucket", f"bucket-{i}")
        (repo / "main").mkdir(parents=True)
        (repo / "main" / "main.tf").write_text(text)
        if i % 7 == 3:
            (repo / "extra").mkdir()
            (repo / "extra" / "main.tf").write_text(
                f'provider "aws" {{}}\n\nresource "aws_sqs_queue" "x" {{\n  name = "extra-{i}"\n}}\n'
            )
    (root / "foreign" / "m").mkdir(parents=True)
    (root / "foreign" / "m" / "main.tf").write_text('provider "azurerm" {}\n\nresource "azurerm_resource_group" "g" {\n  name = "g"\n}\n')
    return root
