"""Builtin lint and security check packs.

A check is applicable to a configuration or not; applicable checks pass or
fail. Lint passes only with zero findings. Security compliance is the share of
applicable checks that pass.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass
from typing import Any, Callable, Iterator

from .hcl import Block, Body, Configuration, Interpolation, Reference, canonicalize, expression_refs
from .verify import COMPUTED, attribute_view


@dataclass
class ScanContext:
    config: Configuration
    view: dict[str, dict[str, Any]]

    @classmethod
    def of(cls, config: Configuration) -> ScanContext:
        return cls(config, attribute_view(config))

    def of_type(self, *types: str) -> list[tuple[str, dict[str, Any]]]:
        return [(addr, attrs) for addr, attrs in self.view.items() if _type_of(addr) in types]

    def blocks_of_type(self, *types: str) -> list[Block]:
        return [b for b in self.config.blocks if b.kind in ("resource", "data") and b.type_name in types]


def _type_of(address: str) -> str:
    parts = address.split(".")
    return parts[1] if parts[0] == "data" else parts[0]


@dataclass(frozen=True)
class Check:
    id: str
    description: str
    applies: Callable[[ScanContext], bool]
    holds: Callable[[ScanContext], bool]


@dataclass(frozen=True)
class CheckPack:
    id: str
    checks: tuple[Check, ...]

    def __post_init__(self) -> None:
        ids = [c.id for c in self.checks]
        if len(ids) != len(set(ids)):
            raise ValueError(f"duplicate check ids in pack {self.id!r}")

    def run(self, config: Configuration) -> dict[str, bool | None]:
        """Check id to pass/fail, or None when not applicable."""
        ctx = ScanContext.of(config)
        return {c.id: (c.holds(ctx) if c.applies(ctx) else None) for c in self.checks}


# ---------------------------------------------------------------- helpers


def _walk_refs(body: Body) -> Iterator[Reference]:
    for attr in body.attributes:
        yield from expression_refs(attr.value)
    for child in body.blocks:
        yield from _walk_refs(child.body)


def _all_refs(config: Configuration) -> list[Reference]:
    refs: list[Reference] = []
    for block in config.blocks:
        refs.extend(_walk_refs(block.body))
    return refs


def _first(attrs: dict, name: str) -> dict:
    """First nested block ``name`` as a dict, or empty."""
    value = attrs.get(name)
    if isinstance(value, list) and value and isinstance(value[0], dict):
        return value[0]
    if isinstance(value, dict):
        return value
    return {}


def _is_true(value: Any) -> bool:
    return value is True or value == "true"


def _has_types(*types: str) -> Callable[[ScanContext], bool]:
    return lambda ctx: bool(ctx.of_type(*types))


def _all_of(types: tuple[str, ...], pred: Callable[[dict], bool]) -> Callable[[ScanContext], bool]:
    return lambda ctx: all(pred(attrs) for _, attrs in ctx.of_type(*types))


# ---------------------------------------------------------------- lint


def _var_refs(config: Configuration) -> set[str]:
    return {r.path[1] for r in _all_refs(config) if r.root == "var" and len(r.path) > 1}


def _unused_variable(ctx: ScanContext) -> bool:
    used = _var_refs(ctx.config)
    return all(b.name in used for b in ctx.config.blocks_of("variable"))


def _undeclared_variable(ctx: ScanContext) -> bool:
    declared = {b.name for b in ctx.config.blocks_of("variable")}
    return _var_refs(ctx.config) <= declared


def _used_provider_names(config: Configuration) -> set[str]:
    names = set()
    for block in config.blocks:
        if block.kind in ("resource", "data") and block.type_name:
            names.add(block.type_name.split("_", 1)[0])
            meta = block.body.get("provider")
            if meta is not None and isinstance(meta.value, Reference):
                names.add(meta.value.root)
    return names


def _unused_provider(ctx: ScanContext) -> bool:
    used = _used_provider_names(ctx.config)
    return all(b.name in used for b in ctx.config.providers)


def _missing_provider_block(ctx: ScanContext) -> bool:
    return bool(ctx.config.providers) or not ctx.config.resources


# Resource types that legitimately take no arguments.
ARGUMENT_FREE_TYPES = frozenset({"null_resource", "random_pet", "random_uuid", "terraform_data", "time_static"})


def _empty_resource_body(ctx: ScanContext) -> bool:
    return all(not b.body.is_empty() or b.type_name in ARGUMENT_FREE_TYPES for b in ctx.config.resources)


def _always(ctx: ScanContext) -> bool:
    return True


_DUP_RE = re.compile(r"^\$\{([^{}]*)\}$")


def _interpolation_only(ctx: ScanContext) -> bool:
    """Flags ``"${var.x}"`` where a bare expression would do."""
    def body_ok(body: Body) -> bool:
        for attr in body.attributes:
            if isinstance(attr.value, Interpolation) and _DUP_RE.match(attr.value.raw):
                return False
        return all(body_ok(child.body) for child in body.blocks)

    return all(body_ok(b.body) for b in ctx.config.blocks)


LINT_PACK = CheckPack(
    "lint",
    (
        Check("unused-variable", "every declared variable is referenced", _always, _unused_variable),
        Check("unused-provider", "every provider block is used by a resource or data source", _always, _unused_provider),
        Check("undeclared-variable", "every var.* reference has a declaration", _always, _undeclared_variable),
        Check("missing-provider-block", "configurations with resources declare a provider", _always, _missing_provider_block),
        Check("empty-resource-body", "resources that need arguments have a non-empty body", _always, _empty_resource_body),
        Check("interpolation-only", "no redundant \"${...}\" wrapping of a single expression", _always, _interpolation_only),
    ),
)


# ---------------------------------------------------------------- security


def _count_at_least(ctx: ScanContext, companion: str, base: str, ok: Callable[[dict], bool]) -> bool:
    return sum(1 for _, a in ctx.of_type(companion) if ok(a)) >= len(ctx.of_type(base))


def _s3_versioning(ctx: ScanContext) -> bool:
    inline = sum(1 for _, a in ctx.of_type("aws_s3_bucket") if _is_true(_first(a, "versioning").get("enabled")))
    separate = sum(
        1
        for _, a in ctx.of_type("aws_s3_bucket_versioning")
        if _first(a, "versioning_configuration").get("status") == "Enabled"
    )
    return inline + separate >= len(ctx.of_type("aws_s3_bucket"))


def _s3_encryption(ctx: ScanContext) -> bool:
    inline = sum(1 for _, a in ctx.of_type("aws_s3_bucket") if a.get("server_side_encryption_configuration"))
    separate = len(ctx.of_type("aws_s3_bucket_server_side_encryption_configuration"))
    return inline + separate >= len(ctx.of_type("aws_s3_bucket"))


def _s3_public_access_block(ctx: ScanContext) -> bool:
    return _count_at_least(
        ctx,
        "aws_s3_bucket_public_access_block",
        "aws_s3_bucket",
        lambda a: all(_is_true(a.get(k)) for k in ("block_public_acls", "block_public_policy")),
    )


_PUBLIC_ACLS = {"public-read", "public-read-write", "authenticated-read"}


def _s3_no_public_acl(ctx: ScanContext) -> bool:
    return all(a.get("acl") not in _PUBLIC_ACLS for _, a in ctx.of_type("aws_s3_bucket", "aws_s3_bucket_acl"))


_IAM_TYPES = ("aws_iam_policy", "aws_iam_role_policy", "aws_iam_user_policy", "aws_iam_group_policy")
_WILDCARD_RE = re.compile(r"""["']?[Aa]ctions?["']?\s*[:=]\s*\[?\s*["']\*["']""")


def _iam_no_wildcard(ctx: ScanContext) -> bool:
    blocks = ctx.blocks_of_type(*_IAM_TYPES, "aws_iam_policy_document")
    for block in blocks:
        text = canonicalize(Configuration((block,)))
        if _WILDCARD_RE.search(text.replace('\\"', '"')):
            return False
    for _, attrs in ctx.of_type(*_IAM_TYPES):
        doc = attrs.get("policy")
        if isinstance(doc, str) and doc != COMPUTED:
            try:
                parsed = json.loads(doc)
            except ValueError:
                continue
            statements = parsed.get("Statement", []) if isinstance(parsed, dict) else []
            if isinstance(statements, dict):
                statements = [statements]
            for st in statements:
                actions = st.get("Action", []) if isinstance(st, dict) else []
                actions = [actions] if isinstance(actions, str) else actions
                if "*" in actions and st.get("Effect", "Allow") == "Allow":
                    return False
    return True


_SG_TYPES = ("aws_security_group", "aws_security_group_rule", "aws_vpc_security_group_ingress_rule")


def _open_to_world(rule: dict) -> bool:
    cidrs = rule.get("cidr_blocks") or rule.get("cidr_ipv4") or []
    cidrs = [cidrs] if isinstance(cidrs, str) else cidrs
    if not any(c in ("0.0.0.0/0", "::/0") for c in cidrs if isinstance(c, str)):
        return False
    lo, hi = rule.get("from_port"), rule.get("to_port")
    if not isinstance(lo, int) or not isinstance(hi, int):
        return rule.get("ip_protocol") == "-1" or rule.get("protocol") == "-1"
    return lo <= 22 <= hi or (lo == 0 and hi == 0 and rule.get("protocol") == "-1")


def _sg_no_open_ssh(ctx: ScanContext) -> bool:
    for addr, attrs in ctx.of_type(*_SG_TYPES):
        if _type_of(addr) == "aws_security_group":
            rules = attrs.get("ingress", [])
            if any(isinstance(r, dict) and _open_to_world(r) for r in rules):
                return False
        elif _type_of(addr) == "aws_security_group_rule":
            if attrs.get("type") == "ingress" and _open_to_world(attrs):
                return False
        elif _open_to_world(attrs):
            return False
    return True


def _imdsv2(attrs: dict) -> bool:
    return _first(attrs, "metadata_options").get("http_tokens") == "required"


SECURITY_PACK = CheckPack(
    "security",
    (
        Check("s3-versioning-enabled", "S3 buckets have versioning enabled", _has_types("aws_s3_bucket"), _s3_versioning),
        Check("s3-encryption-configured", "S3 buckets configure server-side encryption", _has_types("aws_s3_bucket"), _s3_encryption),
        Check("s3-public-access-blocked", "S3 buckets have a public access block", _has_types("aws_s3_bucket"), _s3_public_access_block),
        Check("s3-no-public-acl", "S3 ACLs are not public", _has_types("aws_s3_bucket", "aws_s3_bucket_acl"), _s3_no_public_acl),
        Check(
            "iam-no-wildcard-action",
            "IAM policies do not allow Action \"*\"",
            lambda ctx: bool(ctx.blocks_of_type(*_IAM_TYPES, "aws_iam_policy_document")),
            _iam_no_wildcard,
        ),
        Check("sg-no-open-ssh", "security groups do not open port 22 to the world", _has_types(*_SG_TYPES), _sg_no_open_ssh),
        Check(
            "ebs-encrypted",
            "EBS volumes are encrypted",
            _has_types("aws_ebs_volume"),
            _all_of(("aws_ebs_volume",), lambda a: _is_true(a.get("encrypted"))),
        ),
        Check(
            "rds-storage-encrypted",
            "RDS instances encrypt storage",
            _has_types("aws_db_instance"),
            _all_of(("aws_db_instance",), lambda a: _is_true(a.get("storage_encrypted"))),
        ),
        Check(
            "rds-not-public",
            "RDS instances are not publicly accessible",
            _has_types("aws_db_instance"),
            _all_of(("aws_db_instance",), lambda a: not _is_true(a.get("publicly_accessible"))),
        ),
        Check("ec2-imdsv2-required", "EC2 instances require IMDSv2 tokens", _has_types("aws_instance"), _all_of(("aws_instance",), _imdsv2)),
        Check(
            "kms-key-rotation",
            "KMS keys enable rotation",
            _has_types("aws_kms_key"),
            _all_of(("aws_kms_key",), lambda a: _is_true(a.get("enable_key_rotation"))),
        ),
        Check(
            "dynamodb-pitr-enabled",
            "DynamoDB tables enable point-in-time recovery",
            _has_types("aws_dynamodb_table"),
            _all_of(("aws_dynamodb_table",), lambda a: _is_true(_first(a, "point_in_time_recovery").get("enabled"))),
        ),
        Check(
            "cloudtrail-log-validation",
            "CloudTrail trails validate log files",
            _has_types("aws_cloudtrail"),
            _all_of(("aws_cloudtrail",), lambda a: _is_true(a.get("enable_log_file_validation"))),
        ),
        Check(
            "docker-not-privileged",
            "Docker containers do not run privileged",
            _has_types("docker_container"),
            _all_of(("docker_container",), lambda a: not _is_true(a.get("privileged"))),
        ),
    ),
)


def lint_findings(config: Configuration) -> list[str]:
    return [cid for cid, ok in LINT_PACK.run(config).items() if ok is False]


def security_score(config: Configuration) -> tuple[float | None, dict[str, bool | None]]:
    """Percentage of applicable security checks that pass; None when none apply."""
    results = SECURITY_PACK.run(config)
    applicable = [ok for ok in results.values() if ok is not None]
    if not applicable:
        return None, results
    return 100.0 * sum(applicable) / len(applicable), results

