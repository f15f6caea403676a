"""Builtin compilability (FV1) and deployability (FV2) oracles.

Both oracles never raise on bad input: every problem becomes a
:class:`Diagnostic` inside a :class:`VerdictReport`. The diagnostics double
as the error certificate handed to the repair loop.
"""

from __future__ import annotations

import json
import time
from dataclasses import dataclass, field
from enum import Enum
from typing import Any, Iterator

from .errors import ParseError
from .graph import find_cycle
from .hcl import (
    BLOCK_KINDS,
    OPAQUE_BLOCK_KINDS,
    Block,
    Body,
    Configuration,
    Expression,
    Interpolation,
    ListLiteral,
    Literal,
    MapLiteral,
    Opaque,
    Reference,
    decode_string,
    expression_refs,
    parse_config,
    parse_expression,
    template_segments,
)

COMPUTED = "<computed>"

# Utility providers retained by the curation filter, plus aws.
IMPLICIT_PROVIDERS = frozenset(
    {
        "aws",
        "random",
        "null",
        "local",
        "template",
        "tls",
        "time",
        "external",
        "http",
        "archive",
        "docker",
        "terraform",
    }
)

BUILTIN_ROOTS = frozenset({"path", "terraform", "self", "each", "count"})
META_ARGUMENTS = frozenset({"depends_on", "provider", "count", "for_each", "providers"})

_LABEL_COUNTS = {
    "terraform": 0,
    "locals": 0,
    "provider": 1,
    "variable": 1,
    "output": 1,
    "resource": 2,
    "data": 2,
    "module": 1,
    "moved": 0,
    "import": 0,
    "check": 1,
    "removed": 0,
}


class Stage(str, Enum):
    FV1 = "FV1"
    FV2 = "FV2"
    FV3 = "FV3"


@dataclass(frozen=True)
class Location:
    line: int
    column: int | None = None
    file: str | None = None

    def to_dict(self) -> dict:
        return {"file": self.file, "line": self.line, "column": self.column}


@dataclass(frozen=True)
class Diagnostic:
    stage: Stage
    code: str
    severity: str
    message: str
    location: Location | None = None
    subject: str | None = None

    def to_dict(self) -> dict:
        return {
            "stage": self.stage.value,
            "code": self.code,
            "severity": self.severity,
            "message": self.message,
            "location": self.location.to_dict() if self.location else None,
            "subject": self.subject,
        }

    def render(self) -> str:
        where = ""
        if self.location is not None:
            where = f" at line {self.location.line}"
            if self.location.column:
                where += f", column {self.location.column}"
        subject = f" [{self.subject}]" if self.subject else ""
        return f"{self.severity.capitalize()}: {self.code}{subject}{where}: {self.message}"


@dataclass(frozen=True)
class VerdictReport:
    stage: Stage
    passed: bool
    diagnostics: tuple[Diagnostic, ...] = ()
    elapsed: float = field(default=0.0, compare=False)
    backend: str = "builtin"

    def __post_init__(self) -> None:
        has_error = any(d.severity == "error" for d in self.diagnostics)
        if self.passed and has_error:
            raise ValueError("a passing verdict cannot carry error diagnostics")
        if not self.passed and not has_error:
            raise ValueError("a failing verdict needs at least one error diagnostic")

    @property
    def codes(self) -> list[str]:
        return [d.code for d in self.diagnostics if d.severity == "error"]

    @property
    def code(self) -> str | None:
        codes = self.codes
        return codes[0] if codes else None

    def certificate(self) -> str:
        """Plain-text error certificate for prompts."""
        if self.passed:
            return "Success! The configuration is valid."
        return "\n".join(d.render() for d in self.diagnostics)

    def to_dict(self) -> dict:
        return {
            "stage": self.stage.value,
            "passed": self.passed,
            "code": self.code,
            "diagnostics": [d.to_dict() for d in self.diagnostics],
            "elapsed": self.elapsed,
            "backend": self.backend,
        }


def _dumps(obj: Any) -> str:
    return json.dumps(obj, sort_keys=True, separators=(",", ":"), ensure_ascii=False)


@dataclass(frozen=True)
class PlanDocument:
    """Flattened view of a simulated deployment.

    ``resources`` maps addresses (data sources keep their ``data.`` prefix)
    to resolved attribute maps; nested blocks become lists of maps. Edges
    read ``(dependent, dependency)``.
    """

    resources: dict[str, dict[str, Any]]
    edges: tuple[tuple[str, str], ...]
    providers: frozenset[str]

    def __post_init__(self) -> None:
        for a, b in self.edges:
            if a not in self.resources or b not in self.resources:
                raise ValueError(f"edge ({a}, {b}) references an unknown address")
        if find_cycle(self.resources, self.edges) is not None:
            raise ValueError("plan edges must form a DAG")

    def resources_of_type(self, type_name: str) -> list[str]:
        return [a for a in self.resources if not a.startswith("data.") and a.split(".")[0] == type_name]

    def to_dict(self) -> dict:
        return {
            "resources": self.resources,
            "edges": [list(e) for e in self.edges],
            "providers": sorted(self.providers),
        }

    def to_json(self) -> str:
        return _dumps(self.to_dict())

    def to_policy_input(self) -> dict:
        """The document plus a ``resource_changes`` list shaped like ``terraform show -json``."""
        changes = []
        for address in sorted(self.resources):
            parts = address.split(".")
            mode = "data" if parts[0] == "data" else "managed"
            type_name, name = (parts[1], parts[2]) if mode == "data" else (parts[0], parts[1])
            changes.append(
                {
                    "address": address,
                    "mode": mode,
                    "type": type_name,
                    "name": name,
                    "change": {"actions": ["create"], "after": self.resources[address]},
                }
            )
        doc = self.to_dict()
        doc["resource_changes"] = changes
        return doc

    @classmethod
    def from_dict(cls, doc: dict) -> "PlanDocument":
        return cls(
            resources={k: dict(v) for k, v in doc["resources"].items()},
            edges=tuple(tuple(e) for e in doc.get("edges", ())),
            providers=frozenset(doc.get("providers", ())),
        )


# ---
# Walking configurations.
# ---


def _walk_body(body: Body, bound: frozenset[str], skip_meta: bool = False) -> Iterator[tuple[Reference, int, frozenset[str]]]:
    """Yield (reference, line, bound-names) for every reference in ``body``."""
    for attr in body.attributes:
        if skip_meta and attr.name in ("depends_on", "provider", "providers"):
            continue
        for ref in expression_refs(attr.value):
            yield ref, attr.line, bound
    for child in body.blocks:
        if child.kind == "lifecycle":
            for attr in child.body.attributes:
                if attr.name == "ignore_changes":
                    continue
                for ref in expression_refs(attr.value):
                    yield ref, attr.line, bound
            continue
        inner = bound
        if child.kind == "dynamic" and child.labels:
            iterator = child.body.get("iterator")
            name = decode_string(child.labels[0])
            if iterator is not None and isinstance(iterator.value, Opaque):
                name = iterator.value.text.strip()
            inner = bound | {name}
        yield from _walk_body(child.body, inner)


@dataclass
class _Symbols:
    resources: dict[str, Block] = field(default_factory=dict)
    data: dict[str, Block] = field(default_factory=dict)
    variables: dict[str, Block] = field(default_factory=dict)
    locals: dict[str, tuple[Expression, int]] = field(default_factory=dict)
    outputs: dict[str, Block] = field(default_factory=dict)
    modules: dict[str, Block] = field(default_factory=dict)
    providers: dict[str, set[str | None]] = field(default_factory=dict)


def _symbols(config: Configuration) -> _Symbols:
    sym = _Symbols()
    for block in config.blocks:
        addr = block.address
        if block.kind == "resource" and addr:
            sym.resources.setdefault(addr, block)
        elif block.kind == "data" and addr:
            sym.data.setdefault(addr, block)
        elif block.kind == "variable" and addr:
            sym.variables.setdefault(block.name, block)
        elif block.kind == "output" and addr:
            sym.outputs.setdefault(block.name, block)
        elif block.kind == "module" and addr:
            sym.modules.setdefault(block.name, block)
        elif block.kind == "locals":
            for attr in block.body.attributes:
                sym.locals.setdefault(attr.name, (attr.value, attr.line))
        elif block.kind == "provider" and block.labels:
            alias = block.body.get("alias")
            alias_name = alias.value.value if alias and isinstance(alias.value, Literal) else None
            sym.providers.setdefault(block.name, set()).add(alias_name)
    return sym


def _target_of(ref: Reference) -> str | None:
    """Graph node a reference points at, or None for builtin roots."""
    root = ref.root
    if root in BUILTIN_ROOTS:
        return None
    if root == "var":
        return f"var.{ref.path[1]}"
    if root == "local":
        return f"local.{ref.path[1]}"
    if root == "module":
        return f"module.{ref.path[1]}"
    if root == "data":
        return f"data.{ref.path[1]}.{ref.path[2]}" if len(ref.path) >= 3 else "data.?"
    return f"{ref.path[0]}.{ref.path[1]}"


def _declared(sym: _Symbols) -> set[str]:
    nodes = set(sym.resources) | set(sym.data)
    nodes |= {f"var.{n}" for n in sym.variables}
    nodes |= {f"local.{n}" for n in sym.locals}
    nodes |= {f"module.{n}" for n in sym.modules}
    return nodes


def _provider_prefix(type_name: str) -> str:
    return type_name.split("_", 1)[0]


# ---
# FV1.
# ---


def validate(config: Configuration) -> VerdictReport:
    """Compilability: labels, unique addresses, resolvable references and depends_on."""
    started = time.perf_counter()
    diags: list[Diagnostic] = []

    def err(code: str, message: str, line: int | None = None, subject: str | None = None) -> None:
        loc = Location(line) if line else None
        diags.append(Diagnostic(Stage.FV1, code, "error", message, loc, subject))

    for issue in config.issues:
        err(issue.code, issue.message, issue.line, issue.subject)

    seen: dict[str, int] = {}
    provider_keys: set[tuple[str, str | None]] = set()
    for block in config.blocks:
        if block.kind not in BLOCK_KINDS and block.kind not in OPAQUE_BLOCK_KINDS:
            err("UNKNOWN_BLOCK", f"unsupported block type {block.kind!r}", block.line)
            continue
        expected = _LABEL_COUNTS[block.kind]
        if len(block.labels) != expected:
            err(
                "BAD_LABELS",
                f"{block.kind} block needs {expected} label(s), found {len(block.labels)}",
                block.line,
            )
            continue
        addr = block.address
        if block.kind in ("resource", "data", "variable", "output", "module") and addr:
            if addr in seen:
                code = "DUP_ADDRESS" if block.kind in ("resource", "data") else "DUP_DECLARATION"
                err(code, f"{addr} is declared more than once (first on line {seen[addr]})", block.line, addr)
            else:
                seen[addr] = block.line
        if block.kind == "provider":
            alias = block.body.get("alias")
            key = (block.name, alias.value.value if alias and isinstance(alias.value, Literal) else None)
            if key in provider_keys:
                err("DUP_PROVIDER", f"provider {block.name!r} configured more than once", block.line)
            provider_keys.add(key)
        if block.kind == "output" and block.body.get("value") is None:
            err("MISSING_ARGUMENT", f"output {block.name!r} requires a value", block.line, addr)
        if block.kind == "module" and block.body.get("source") is None:
            err("MISSING_ARGUMENT", f"module {block.name!r} requires a source", block.line, addr)
    local_seen: set[str] = set()
    for block in config.blocks_of("locals"):
        for attr in block.body.attributes:
            if attr.name in local_seen:
                err("DUP_DECLARATION", f"local.{attr.name} is declared more than once", attr.line)
            local_seen.add(attr.name)

    sym = _symbols(config)
    declared = _declared(sym)
    for block in config.blocks:
        if block.kind in ("terraform", "moved", "import", "removed", "check"):
            continue
        if _LABEL_COUNTS.get(block.kind) != len(block.labels):
            continue
        subject = block.address
        for ref, line, bound in _walk_body(block.body, frozenset(), skip_meta=True):
            if ref.root in bound or ref.root in BUILTIN_ROOTS:
                continue
            target = _target_of(ref)
            if target not in declared:
                err("UNRESOLVED_REF", f"reference to undeclared {ref.text}", line, subject)
        if block.kind in ("resource", "data", "module", "output"):
            _check_depends_on(block, declared, err)
        if block.kind in ("resource", "data"):
            _check_provider_meta(block, sym, err)

    passed = not diags
    return VerdictReport(Stage.FV1, passed, tuple(diags), time.perf_counter() - started)


def _check_depends_on(block: Block, declared: set[str], err) -> None:
    attr = block.body.get("depends_on")
    if attr is None:
        return
    if not isinstance(attr.value, ListLiteral):
        err("BAD_DEPENDS_ON", "depends_on must be a list of addresses", attr.line, block.address)
        return
    for item in attr.value.items:
        if not isinstance(item, Reference):
            err("BAD_DEPENDS_ON", "depends_on entries must be static addresses", attr.line, block.address)
            continue
        arity = 3 if item.root == "data" else 2
        if item.root in ("var", "local") or item.root in BUILTIN_ROOTS or len(item.path) != arity or "[" in item.text:
            err("BAD_DEPENDS_ON", f"{item.text} is not a resource, data or module address", attr.line, block.address)
            continue
        if _target_of(item) not in declared:
            err("UNRESOLVED_REF", f"depends_on refers to undeclared {item.text}", attr.line, block.address)


def _check_provider_meta(block: Block, sym: _Symbols, err) -> None:
    attr = block.body.get("provider")
    if attr is None:
        return
    value = attr.value
    if isinstance(value, Reference) and len(value.path) == 2:
        name, alias = value.path
    elif isinstance(value, Opaque) and value.text.strip().isidentifier():
        name, alias = value.text.strip(), None
    else:
        err("BAD_PROVIDER_REF", "provider must be <name> or <name>.<alias>", attr.line, block.address)
        return
    aliases = sym.providers.get(name)
    if alias is None and (aliases is not None or name in IMPLICIT_PROVIDERS):
        return
    if aliases is None or alias not in aliases:
        err("UNRESOLVED_REF", f"provider configuration {name}{'.' + alias if alias else ''} is not declared", attr.line, block.address)


def validate_text(text: str) -> tuple[VerdictReport, Configuration | None]:
    """Parse then validate; a parse failure is an FV1 failure with code PARSE."""
    started = time.perf_counter()
    try:
        config = parse_config(text)
    except ParseError as exc:
        diag = Diagnostic(Stage.FV1, "PARSE", "error", exc.message, Location(exc.line, exc.column))
        return VerdictReport(Stage.FV1, False, (diag,), time.perf_counter() - started), None
    return validate(config), config


# ---
# FV2.
# ---


def dependency_graph(config: Configuration) -> tuple[set[str], set[tuple[str, str]]]:
    """All addressable objects and their (dependent, dependency) edges."""
    sym = _symbols(config)
    nodes = _declared(sym) | {f"output.{n}" for n in sym.outputs}
    edges: set[tuple[str, str]] = set()

    def add_refs(source: str, refs) -> None:
        for ref in refs:
            target = _target_of(ref)
            if target in nodes:
                edges.add((source, target))

    for block in config.blocks:
        addr = block.address
        if addr is None or addr not in nodes:
            continue
        refs = [ref for ref, _, bound in _walk_body(block.body, frozenset(), skip_meta=True) if ref.root not in bound]
        add_refs(addr, refs)
        dep = block.body.get("depends_on")
        if dep is not None:
            add_refs(addr, expression_refs(dep.value))
    for name, (expr, _) in sym.locals.items():
        add_refs(f"local.{name}", expression_refs(expr))
    return nodes, edges


def _project_edges(nodes: set[str], edges: set[tuple[str, str]], keep: set[str]) -> tuple[tuple[str, str], ...]:
    """Edges between ``keep`` nodes, following paths through the other nodes."""
    adj: dict[str, list[str]] = {n: [] for n in nodes}
    for a, b in edges:
        adj[a].append(b)
    out: set[tuple[str, str]] = set()
    for start in keep:
        stack = list(adj[start])
        seen: set[str] = set()
        while stack:
            n = stack.pop()
            if n in seen:
                continue
            seen.add(n)
            if n in keep:
                if n != start:
                    out.add((start, n))
                continue
            stack.extend(adj[n])
    return tuple(sorted(out))


def plan(config: Configuration) -> tuple[VerdictReport, PlanDocument | None]:
    """Deployability: builds the dependency DAG and a resolved attribute view.

    Fails with NOT_VALIDATED, MISSING_DEFAULT, UNKNOWN_PROVIDER or CYCLE.
    """
    started = time.perf_counter()
    fv1 = validate(config)
    if not fv1.passed:
        diag = Diagnostic(
            Stage.FV2,
            "NOT_VALIDATED",
            "error",
            "configuration does not pass validation: " + ", ".join(fv1.codes),
        )
        return VerdictReport(Stage.FV2, False, (diag,), time.perf_counter() - started), None

    diags: list[Diagnostic] = []
    sym = _symbols(config)
    for name, block in sym.variables.items():
        if block.body.get("default") is None:
            diags.append(
                Diagnostic(
                    Stage.FV2,
                    "MISSING_DEFAULT",
                    "error",
                    f"variable {name!r} has no default value; plan would wait for interactive input",
                    Location(block.line),
                    f"var.{name}",
                )
            )
    declared_providers = set(sym.providers)
    for block in config.resources + config.blocks_of("data"):
        prefix = _provider_prefix(block.type_name)
        if prefix not in declared_providers and prefix not in IMPLICIT_PROVIDERS:
            diags.append(
                Diagnostic(
                    Stage.FV2,
                    "UNKNOWN_PROVIDER",
                    "error",
                    f"no provider configuration for {prefix!r} required by {block.type_name}",
                    Location(block.line),
                    block.address,
                )
            )
    nodes, edges = dependency_graph(config)
    cycle = find_cycle(sorted(nodes), sorted(edges))
    if cycle is not None:
        diags.append(
            Diagnostic(Stage.FV2, "CYCLE", "error", "dependency cycle: " + " -> ".join(cycle), subject=cycle[0])
        )
    if diags:
        return VerdictReport(Stage.FV2, False, tuple(diags), time.perf_counter() - started), None

    keep = set(sym.resources) | set(sym.data)
    resolver = _Resolver(sym)
    resources = {addr: resolver.body(block.body) for addr, block in sorted({**sym.resources, **sym.data}.items())}
    providers = declared_providers | {_provider_prefix(a.split(".")[-2]) for a in keep}
    doc = PlanDocument(resources, _project_edges(nodes, edges, keep), frozenset(providers))
    return VerdictReport(Stage.FV2, True, (), time.perf_counter() - started), doc


def plan_text(text: str) -> tuple[VerdictReport, PlanDocument | None]:
    fv1, config = validate_text(text)
    if config is None:
        diag = Diagnostic(Stage.FV2, "NOT_VALIDATED", "error", "configuration does not parse")
        return VerdictReport(Stage.FV2, False, (diag,), fv1.elapsed), None
    return plan(config)


def attribute_view(config: Configuration) -> dict[str, dict[str, Any]]:
    """Best-effort resolved attributes for every resource, even when FV2 fails."""
    sym = _symbols(config)
    resolver = _Resolver(sym)
    return {addr: resolver.body(block.body) for addr, block in sorted({**sym.resources, **sym.data}.items())}


class _Resolver:
    """Substitutes literals and variable defaults; anything else is ``<computed>``."""

    def __init__(self, sym: _Symbols) -> None:
        self.sym = sym
        self.active: set[str] = set()

    def body(self, body: Body) -> dict[str, Any]:
        out: dict[str, Any] = {}
        for attr in body.attributes:
            if attr.name in META_ARGUMENTS:
                continue
            out[attr.name] = self.value(attr.value)
        for child in body.blocks:
            if child.kind == "lifecycle":
                continue
            if child.kind == "dynamic":
                if child.labels:
                    out[decode_string(child.labels[0])] = COMPUTED
                continue
            out.setdefault(child.kind, [])
            if isinstance(out[child.kind], list):
                out[child.kind].append(self.body(child.body))
        return out

    def value(self, expr: Expression) -> Any:
        if isinstance(expr, Literal):
            return expr.value
        if isinstance(expr, ListLiteral):
            return [self.value(e) for e in expr.items]
        if isinstance(expr, MapLiteral):
            return {k: self.value(v) for k, v in expr.items}
        if isinstance(expr, Reference):
            return self.reference(expr)
        if isinstance(expr, Interpolation):
            return self.template(expr.raw)
        return COMPUTED

    def reference(self, ref: Reference) -> Any:
        if "[" in ref.text or "*" in ref.text:
            return COMPUTED
        target = _target_of(ref)
        if target is None or target in self.active:
            return COMPUTED
        root = ref.root
        if root == "var":
            block = self.sym.variables.get(ref.path[1])
            default = block.body.get("default") if block else None
            if default is None:
                return COMPUTED
            expr, rest = default.value, ref.path[2:]
        elif root == "local":
            if ref.path[1] not in self.sym.locals:
                return COMPUTED
            expr, rest = self.sym.locals[ref.path[1]][0], ref.path[2:]
        elif root in ("data", "module"):
            return COMPUTED
        else:
            block = self.sym.resources.get(target)
            if block is None or len(ref.path) < 3:
                return COMPUTED
            attr = block.body.get(ref.path[2])
            if attr is None or ref.path[2] in META_ARGUMENTS:
                return COMPUTED
            expr, rest = attr.value, ref.path[3:]
        self.active.add(target)
        try:
            value = self.value(expr)
        finally:
            self.active.discard(target)
        for step in rest:
            if isinstance(value, dict) and step in value:
                value = value[step]
            elif isinstance(value, list) and step.isdigit() and int(step) < len(value):
                value = value[int(step)]
            else:
                return COMPUTED
        return value

    def template(self, raw: str) -> Any:
        if "%{" in raw.replace("%%{", ""):
            return COMPUTED
        out = []
        i = 0
        segments = template_segments(raw)
        for segment in segments:
            marker = "${" + segment + "}"
            j = raw.find(marker, i)
            out.append(decode_string(raw[i:j]))
            i = j + len(marker)
            try:
                expr = parse_expression(segment)
            except ParseError:
                return COMPUTED
            value = self.value(expr)
            if isinstance(value, bool):
                out.append("true" if value else "false")
            elif isinstance(value, (int, float, str)) and value != COMPUTED:
                out.append(str(value))
            else:
                return COMPUTED
        out.append(decode_string(raw[i:]))
        return "".join(out)
