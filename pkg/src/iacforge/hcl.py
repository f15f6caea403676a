"""Lexer, parser and canonical printer for the HCL subset used by Terraform modules.

Only block structure and simple expressions are modelled. Anything richer
(function calls, operators, conditionals, for-expressions, heredocs) is kept
as an :class:`Opaque` expression holding the exact source slice, together
with the references found inside it so that validation and planning can
still see dependencies.
"""

from __future__ import annotations

import bisect
import hashlib
import re
from dataclasses import dataclass, field
from functools import cached_property
from typing import Iterable, Union

from .errors import EmptyModule, ParseError

__all__ = [
    "Attribute",
    "Block",
    "Body",
    "Configuration",
    "Expression",
    "Interpolation",
    "ListLiteral",
    "Literal",
    "MapLiteral",
    "Opaque",
    "Reference",
    "StatRow",
    "canonicalize",
    "concat_module",
    "config_stats",
    "parse_config",
    "parse_expression",
]

BLOCK_KINDS = ("terraform", "provider", "resource", "data", "variable", "output", "locals")
# Parsed and kept, never evaluated.
OPAQUE_BLOCK_KINDS = ("module", "moved", "import", "check", "removed")

HASH_ALGORITHM = "sha256"

_IDENT_RE = re.compile(r"[A-Za-z_][A-Za-z0-9_-]*")
_NUMBER_RE = re.compile(r"[0-9]+(?:\.[0-9]+)?(?:[eE][+-]?[0-9]+)?")
_HEREDOC_RE = re.compile(r"<<(-?)([A-Za-z_][A-Za-z0-9_]*)[ \t]*\r?\n")
_OPERATORS = ("...", "==", "!=", "<=", ">=", "&&", "||", "=>", "::")
_SINGLE = set("{}[]()=,.:?!<>+-*/%")
_OPENERS = {"{": "}", "[": "]", "(": ")"}
_CLOSERS = {"}", "]", ")"}
_KEYWORDS = {"for", "in", "if", "true", "false", "null"}


# ---
# Expressions.
# ---


@dataclass(frozen=True)
class Literal:
    """A string, number, bool or null literal; ``raw`` is the source spelling."""

    kind: str
    raw: str

    @property
    def value(self):
        if self.kind == "string":
            return decode_string(self.raw)
        if self.kind == "number":
            if re.fullmatch(r"-?[0-9]+", self.raw):
                return int(self.raw)
            return float(self.raw)
        if self.kind == "bool":
            return self.raw == "true"
        return None


@dataclass(frozen=True)
class ListLiteral:
    items: tuple["Expression", ...]


@dataclass(frozen=True)
class MapLiteral:
    # Sorted by key at construction, so equality ignores source order.
    items: tuple[tuple[str, "Expression"], ...]


@dataclass(frozen=True)
class Reference:
    """A traversal such as ``aws_s3_bucket.b.id``.

    ``path`` holds the attribute-name segments only; ``text`` is the
    whitespace-free spelling including any index steps.
    """

    path: tuple[str, ...]
    text: str

    @property
    def root(self) -> str:
        return self.path[0]


@dataclass(frozen=True)
class Interpolation:
    raw: str
    refs: tuple[Reference, ...]


@dataclass(frozen=True)
class Opaque:
    text: str
    refs: tuple[Reference, ...]


Expression = Union[Literal, ListLiteral, MapLiteral, Reference, Interpolation, Opaque]


def expression_refs(expr: Expression) -> Iterable[Reference]:
    """Yield every reference reachable from ``expr``."""
    if isinstance(expr, Reference):
        yield expr
    elif isinstance(expr, (Interpolation, Opaque)):
        yield from expr.refs
    elif isinstance(expr, ListLiteral):
        for item in expr.items:
            yield from expression_refs(item)
    elif isinstance(expr, MapLiteral):
        for _, item in expr.items:
            yield from expression_refs(item)


_ESCAPES = {"n": "\n", "t": "\t", "r": "\r", '"': '"', "\\": "\\"}


def decode_string(raw: str) -> str:
    out = []
    i = 0
    while i < len(raw):
        ch = raw[i]
        if ch == "\\" and i + 1 < len(raw):
            nxt = raw[i + 1]
            if nxt in _ESCAPES:
                out.append(_ESCAPES[nxt])
                i += 2
                continue
            if nxt == "u" and re.fullmatch(r"[0-9A-Fa-f]{4}", raw[i + 2 : i + 6]):
                out.append(chr(int(raw[i + 2 : i + 6], 16)))
                i += 6
                continue
            if nxt == "U" and re.fullmatch(r"[0-9A-Fa-f]{8}", raw[i + 2 : i + 10]):
                out.append(chr(int(raw[i + 2 : i + 10], 16)))
                i += 10
                continue
        if raw.startswith("$${", i) or raw.startswith("%%{", i):
            out.append(raw[i + 1 : i + 3])
            i += 3
            continue
        out.append(ch)
        i += 1
    return "".join(out)


def encode_string(value: str) -> str:
    """Inverse of :func:`decode_string` for plain (non-template) text."""
    out = (
        value.replace("\\", "\\\\")
        .replace('"', '\\"')
        .replace("\n", "\\n")
        .replace("\r", "\\r")
        .replace("\t", "\\t")
    )
    return out.replace("${", "$${").replace("%{", "%%{")


# ---
# Structure.
# ---


@dataclass(frozen=True)
class Attribute:
    name: str
    value: Expression
    line: int = field(default=0, compare=False)


@dataclass(frozen=True)
class Body:
    attributes: tuple[Attribute, ...] = ()
    blocks: tuple["Block", ...] = ()
    # Lines the grammar subset does not understand, kept verbatim.
    extras: tuple[str, ...] = ()

    def get(self, name: str) -> Attribute | None:
        for attr in self.attributes:
            if attr.name == name:
                return attr
        return None

    def is_empty(self) -> bool:
        return not (self.attributes or self.blocks or self.extras)


@dataclass(frozen=True)
class Block:
    kind: str
    labels: tuple[str, ...]
    body: Body
    line: int = field(default=0, compare=False)

    @property
    def address(self) -> str | None:
        """Terraform-style address, or None for blocks that have none."""
        if self.kind == "resource" and len(self.labels) == 2:
            return f"{decode_string(self.labels[0])}.{decode_string(self.labels[1])}"
        if self.kind == "data" and len(self.labels) == 2:
            return f"data.{decode_string(self.labels[0])}.{decode_string(self.labels[1])}"
        if self.kind in ("variable", "output", "module") and len(self.labels) == 1:
            prefix = {"variable": "var", "output": "output", "module": "module"}[self.kind]
            return f"{prefix}.{decode_string(self.labels[0])}"
        return None

    @property
    def type_name(self) -> str | None:
        if self.kind in ("resource", "data") and self.labels:
            return decode_string(self.labels[0])
        return None

    @property
    def name(self) -> str | None:
        if self.kind in ("resource", "data") and len(self.labels) == 2:
            return decode_string(self.labels[1])
        if self.labels:
            return decode_string(self.labels[0])
        return None


@dataclass(frozen=True)
class ParseIssue:
    """A non-fatal problem found while parsing; surfaced by validation."""

    code: str
    message: str
    line: int
    subject: str | None = None


@dataclass(frozen=True)
class Configuration:
    blocks: tuple[Block, ...]
    source_text: str = field(default="", compare=False, repr=False)
    issues: tuple[ParseIssue, ...] = field(default=(), compare=False, repr=False)

    @cached_property
    def canonical_text(self) -> str:
        return canonicalize(self)

    @cached_property
    def canonical_hash(self) -> str:
        return hashlib.new(HASH_ALGORITHM, self.canonical_text.encode("utf-8")).hexdigest()

    def blocks_of(self, kind: str) -> list[Block]:
        return [b for b in self.blocks if b.kind == kind]

    @property
    def resources(self) -> list[Block]:
        return self.blocks_of("resource")

    @property
    def providers(self) -> list[Block]:
        return self.blocks_of("provider")


# ---
# Lexer.
# ---


@dataclass(frozen=True)
class Token:
    kind: str  # IDENT NUMBER STRING HEREDOC PUNCT NEWLINE EOF
    value: str
    start: int
    end: int
    line: int
    col: int


class _Lexer:
    def __init__(self, text: str) -> None:
        self.text = text
        self.pos = 0
        self.newlines = [m.start() for m in re.finditer("\n", text)]
        self.tokens: list[Token] = []

    def _where(self, pos: int) -> tuple[int, int]:
        idx = bisect.bisect_left(self.newlines, pos)
        line_start = self.newlines[idx - 1] + 1 if idx else 0
        return idx + 1, pos - line_start + 1

    def _error(self, message: str, pos: int | None = None) -> ParseError:
        line, col = self._where(self.pos if pos is None else pos)
        return ParseError(message, line, col)

    def _emit(self, kind: str, start: int, end: int, value: str | None = None) -> None:
        line, col = self._where(start)
        self.tokens.append(
            Token(kind, self.text[start:end] if value is None else value, start, end, line, col)
        )

    def run(self) -> list[Token]:
        text = self.text
        n = len(text)
        while self.pos < n:
            ch = text[self.pos]
            if ch in " \t\r﻿":
                self.pos += 1
            elif ch == "\n":
                self._emit("NEWLINE", self.pos, self.pos + 1)
                self.pos += 1
            elif ch == "#" or text.startswith("//", self.pos):
                end = text.find("\n", self.pos)
                self.pos = n if end < 0 else end
            elif text.startswith("/*", self.pos):
                end = text.find("*/", self.pos + 2)
                if end < 0:
                    raise self._error("unterminated block comment")
                if "\n" in text[self.pos : end]:
                    self._emit("NEWLINE", self.pos, end + 2, "\n")
                self.pos = end + 2
            elif ch == '"':
                end = scan_string(text, self.pos, self._error)
                self._emit("STRING", self.pos, end, text[self.pos + 1 : end - 1])
                self.pos = end
            elif text.startswith("<<", self.pos) and _HEREDOC_RE.match(text, self.pos):
                self.pos = self._heredoc()
            elif ch.isdigit():
                m = _NUMBER_RE.match(text, self.pos)
                self._emit("NUMBER", self.pos, m.end())
                self.pos = m.end()
            elif ch.isalpha() or ch == "_":
                m = _IDENT_RE.match(text, self.pos)
                self._emit("IDENT", self.pos, m.end())
                self.pos = m.end()
            else:
                for op in _OPERATORS:
                    if text.startswith(op, self.pos):
                        self._emit("PUNCT", self.pos, self.pos + len(op))
                        self.pos += len(op)
                        break
                else:
                    if ch not in _SINGLE:
                        raise self._error(f"unexpected character {ch!r}")
                    self._emit("PUNCT", self.pos, self.pos + 1)
                    self.pos += 1
        self._emit("EOF", n, n, "")
        return self.tokens

    def _heredoc(self) -> int:
        m = _HEREDOC_RE.match(self.text, self.pos)
        marker = m.group(2)
        cursor = m.end()
        while cursor <= len(self.text):
            nl = self.text.find("\n", cursor)
            line_end = len(self.text) if nl < 0 else nl
            if self.text[cursor:line_end].strip() == marker:
                self._emit("HEREDOC", self.pos, line_end)
                return line_end
            if nl < 0:
                break
            cursor = nl + 1
        raise self._error(f"unterminated heredoc {marker}")


def scan_string(text: str, start: int, error) -> int:
    """Return the index just past the closing quote of the string at ``start``."""
    i = start + 1
    n = len(text)
    while i < n:
        ch = text[i]
        if ch == "\\":
            i += 2
            continue
        if ch == '"':
            return i + 1
        if ch == "\n":
            break
        if text.startswith("$${", i) or text.startswith("%%{", i):
            i += 3
            continue
        if text.startswith("${", i) or text.startswith("%{", i):
            i = _scan_template(text, i + 2, error, start)
            continue
        i += 1
    raise error("unterminated string", start)


def _scan_template(text: str, i: int, error, string_start: int) -> int:
    depth = 1
    n = len(text)
    while i < n:
        ch = text[i]
        if ch == '"':
            i = scan_string(text, i, error)
            continue
        if ch == "{":
            depth += 1
        elif ch == "}":
            depth -= 1
            if depth == 0:
                return i + 1
        i += 1
    raise error("unterminated string", string_start)


def tokenize(text: str) -> list[Token]:
    return _Lexer(text).run()


# ---
# Reference extraction.
# ---


def template_segments(raw: str) -> list[str]:
    """Return the inner source of every ``${...}`` / ``%{...}`` in a template."""
    segments = []
    i = 0

    def err(message, pos=0):
        return ParseError(message, 1, pos + 1)

    while i < len(raw):
        if raw.startswith("$${", i) or raw.startswith("%%{", i):
            i += 3
        elif raw.startswith("${", i) or raw.startswith("%{", i):
            try:
                end = _scan_template(raw, i + 2, err, i)
            except ParseError:
                break
            segments.append(raw[i + 2 : end - 1])
            i = end
        elif raw[i] == "\\":
            i += 2
        else:
            i += 1
    return segments


def template_refs(raw: str) -> tuple[Reference, ...]:
    refs: list[Reference] = []
    for segment in template_segments(raw):
        try:
            toks = tokenize(segment)
        except ParseError:
            continue
        refs.extend(_refs_in_tokens(toks))
    return tuple(refs)


def _refs_in_tokens(tokens: list[Token], bound: frozenset[str] = frozenset()) -> list[Reference]:
    refs: list[Reference] = []
    bound = set(bound)
    # For-expression iteration variables are local names, not references.
    for i, tok in enumerate(tokens):
        if tok.kind == "IDENT" and tok.value == "for":
            j = i + 1
            while j < len(tokens) and tokens[j].kind == "IDENT" and tokens[j].value != "in":
                bound.add(tokens[j].value)
                j += 1
                if j < len(tokens) and tokens[j].value == ",":
                    j += 1
    i = 0
    while i < len(tokens):
        tok = tokens[i]
        if tok.kind in ("STRING", "HEREDOC"):
            refs.extend(r for r in template_refs(tok.value) if r.root not in bound)
            i += 1
            continue
        prev = tokens[i - 1] if i else None
        if (
            tok.kind == "IDENT"
            and tok.value not in _KEYWORDS
            and tok.value not in bound
            and not (prev is not None and prev.value in (".", "::"))
        ):
            nxt = tokens[i + 1] if i + 1 < len(tokens) else None
            if nxt is not None and nxt.value in ("(", "::"):
                i += 1
                continue
            path = [tok.value]
            j = i + 1
            while (
                j + 1 < len(tokens)
                and tokens[j].value == "."
                and tokens[j + 1].kind in ("IDENT", "NUMBER")
            ):
                path.append(tokens[j + 1].value)
                j += 2
            if len(path) >= 2:
                refs.append(Reference(tuple(path), ".".join(path)))
            i = j
            continue
        i += 1
    return refs


# ---
# Parser.
# ---


class _Parser:
    def __init__(self, text: str) -> None:
        self.text = text
        self.tokens = tokenize(text)
        self.pos = 0
        self.issues: list[ParseIssue] = []

    @property
    def tok(self) -> Token:
        return self.tokens[self.pos]

    def _skip_newlines(self) -> None:
        while self.tok.kind == "NEWLINE":
            self.pos += 1

    def parse(self) -> Configuration:
        blocks = []
        while True:
            self._skip_newlines()
            tok = self.tok
            if tok.kind == "EOF":
                break
            if tok.kind != "IDENT":
                if tok.value in _CLOSERS:
                    raise ParseError(f"unbalanced {tok.value!r}", tok.line, tok.col)
                raise ParseError(f"malformed block header at {tok.value!r}", tok.line, tok.col)
            blocks.append(self._block(top_level=True))
        return Configuration(tuple(blocks), self.text, tuple(self.issues))

    def _block(self, top_level: bool) -> Block:
        head = self.tok
        self.pos += 1
        labels = []
        while self.tok.kind in ("STRING", "IDENT"):
            if self.tok.kind == "STRING" and template_segments(self.tok.value):
                raise ParseError(
                    "block labels may not contain interpolation", self.tok.line, self.tok.col
                )
            labels.append(self.tok.value)
            self.pos += 1
        if self.tok.value != "{":
            where = self.tok
            if top_level and where.value == "=" and not labels:
                raise ParseError(
                    f"malformed block header: attribute {head.value!r} at top level",
                    head.line,
                    head.col,
                )
            raise ParseError(
                f"malformed block header for {head.value!r}: expected '{{'", where.line, where.col
            )
        open_tok = self.tok
        self.pos += 1
        body = self._body(open_tok)
        return Block(head.value, tuple(labels), body, head.line)

    def _body(self, open_tok: Token) -> Body:
        attributes: list[Attribute] = []
        blocks: list[Block] = []
        extras: list[str] = []
        seen: set[str] = set()
        while True:
            self._skip_newlines()
            tok = self.tok
            if tok.kind == "EOF":
                raise ParseError("unclosed block: missing '}'", open_tok.line, open_tok.col)
            if tok.value == "}" and tok.kind == "PUNCT":
                self.pos += 1
                break
            nxt = self.tokens[self.pos + 1]
            if tok.kind == "IDENT" and nxt.value == "=" and nxt.kind == "PUNCT":
                self.pos += 2
                span = self._extent(stop=("NEWLINE",))
                if not span:
                    raise ParseError(f"missing value for attribute {tok.value!r}", tok.line, tok.col)
                if tok.value in seen:
                    self.issues.append(
                        ParseIssue(
                            "DUP_ATTRIBUTE",
                            f"attribute {tok.value!r} is defined more than once",
                            tok.line,
                        )
                    )
                seen.add(tok.value)
                attributes.append(Attribute(tok.value, self._expression(span), tok.line))
            elif tok.kind == "IDENT" and self._looks_like_block():
                blocks.append(self._block(top_level=False))
            else:
                span = self._extent(stop=("NEWLINE",))
                if not span:
                    # A stray closer belongs to no open structure.
                    raise ParseError(f"unbalanced {tok.value!r}", tok.line, tok.col)
                text = self.text[span[0].start : span[-1].end]
                extras.append(text)
                self.issues.append(
                    ParseIssue("UNSUPPORTED_SYNTAX", f"unsupported construct: {text[:60]}", tok.line)
                )
        attributes.sort(key=lambda a: a.name)
        return Body(tuple(attributes), tuple(blocks), tuple(extras))

    def _looks_like_block(self) -> bool:
        j = self.pos + 1
        while self.tokens[j].kind in ("STRING", "IDENT"):
            j += 1
        return self.tokens[j].value == "{" and self.tokens[j].kind == "PUNCT"

    def _extent(self, stop: tuple[str, ...], stop_values: tuple[str, ...] = ()) -> list[Token]:
        """Consume one expression's tokens up to a depth-0 terminator."""
        span: list[Token] = []
        stack: list[Token] = []
        while True:
            tok = self.tok
            if tok.kind == "EOF":
                if stack:
                    raise ParseError(f"unbalanced {stack[-1].value!r}", stack[-1].line, stack[-1].col)
                return span
            if not stack:
                if tok.kind in stop or (tok.kind == "PUNCT" and tok.value in stop_values):
                    return span
                if tok.kind == "PUNCT" and tok.value in _CLOSERS:
                    return span
            if tok.kind == "PUNCT" and tok.value in _OPENERS:
                stack.append(tok)
            elif tok.kind == "PUNCT" and tok.value in _CLOSERS:
                opener = stack.pop()
                if _OPENERS[opener.value] != tok.value:
                    raise ParseError(
                        f"mismatched {tok.value!r} for {opener.value!r} opened on line {opener.line}",
                        tok.line,
                        tok.col,
                    )
            span.append(tok)
            self.pos += 1

    def _expression(self, span: list[Token]) -> Expression:
        simple = _simple_expression(span, self.text)
        if simple is not None:
            return simple
        return _opaque(span, self.text)


def _opaque(span: list[Token], text: str) -> Opaque:
    return Opaque(text[span[0].start : span[-1].end], tuple(_refs_in_tokens(span)))


def _split_items(span: list[Token], separators: set[str]) -> list[list[Token]] | None:
    """Split tokens between a pair of brackets on depth-0 separators."""
    items: list[list[Token]] = []
    current: list[Token] = []
    depth = 0
    for tok in span:
        if tok.kind == "PUNCT" and tok.value in _OPENERS:
            depth += 1
        elif tok.kind == "PUNCT" and tok.value in _CLOSERS:
            depth -= 1
        if depth == 0 and (tok.value in separators and tok.kind in ("PUNCT", "NEWLINE")):
            if current:
                items.append(current)
            current = []
            continue
        if tok.kind == "NEWLINE" and depth > 0:
            continue
        current.append(tok)
    if current:
        items.append(current)
    return items


def _simple_expression(span: list[Token], text: str) -> Expression | None:
    first = span[0]
    if len(span) == 1:
        if first.kind == "STRING":
            if template_segments(first.value):
                return Interpolation(first.value, template_refs(first.value))
            return Literal("string", first.value)
        if first.kind == "NUMBER":
            return Literal("number", first.value)
        if first.kind == "IDENT" and first.value in ("true", "false"):
            return Literal("bool", first.value)
        if first.kind == "IDENT" and first.value == "null":
            return Literal("null", "null")
    if len(span) == 2 and first.value == "-" and span[1].kind == "NUMBER":
        return Literal("number", "-" + span[1].value)
    if first.kind == "PUNCT" and first.value in ("[", "{") and span[-1].value == _OPENERS[first.value]:
        if _matching_close(span) != len(span) - 1:
            return None
        inner = [t for t in span[1:-1]]
        meaningful = [t for t in inner if t.kind != "NEWLINE"]
        if meaningful and meaningful[0].kind == "IDENT" and meaningful[0].value == "for":
            return None
        if first.value == "[":
            items = _split_items(inner, {","})
            exprs = []
            for item in items:
                item = [t for t in item if t.kind != "NEWLINE"]
                if not item:
                    continue
                exprs.append(_simple_expression(item, text) or _opaque(item, text))
            return ListLiteral(tuple(exprs))
        return _object(inner, text)
    if first.kind == "IDENT" and first.value not in _KEYWORDS:
        return _traversal(span)
    return None


def _matching_close(span: list[Token]) -> int:
    depth = 0
    for i, tok in enumerate(span):
        if tok.kind == "PUNCT" and tok.value in _OPENERS:
            depth += 1
        elif tok.kind == "PUNCT" and tok.value in _CLOSERS:
            depth -= 1
            if depth == 0:
                return i
    return -1


def _object(inner: list[Token], text: str) -> MapLiteral | None:
    items = _split_items(inner, {",", "\n"})
    pairs: dict[str, Expression] = {}
    for item in items:
        if len(item) < 3 or item[1].value not in ("=", ":") or item[1].kind != "PUNCT":
            return None
        key_tok = item[0]
        if key_tok.kind == "IDENT":
            key = key_tok.value
        elif key_tok.kind == "STRING" and not template_segments(key_tok.value):
            key = decode_string(key_tok.value)
        else:
            return None
        if key in pairs:
            return None
        value = item[2:]
        pairs[key] = _simple_expression(value, text) or _opaque(value, text)
    return MapLiteral(tuple(sorted(pairs.items())))


def _traversal(span: list[Token]) -> Reference | None:
    path = [span[0].value]
    parts = [span[0].value]
    i = 1
    while i < len(span):
        tok = span[i]
        if tok.value == "." and i + 1 < len(span) and span[i + 1].kind in ("IDENT", "NUMBER"):
            path.append(span[i + 1].value)
            parts.append("." + span[i + 1].value)
            i += 2
        elif tok.value == "." and i + 1 < len(span) and span[i + 1].value == "*":
            parts.append(".*")
            i += 2
        elif (
            tok.value == "["
            and i + 2 < len(span)
            and span[i + 1].kind in ("NUMBER", "STRING")
            or (tok.value == "[" and i + 2 < len(span) and span[i + 1].value == "*")
        ):
            if span[i + 2].value != "]":
                return None
            inner = span[i + 1]
            parts.append("[" + (f'"{inner.value}"' if inner.kind == "STRING" else inner.value) + "]")
            i += 3
        else:
            return None
    if len(path) < 2:
        return None
    return Reference(tuple(path), "".join(parts))


def parse_expression(text: str) -> Expression:
    """Parse a standalone expression such as the inside of ``${...}``."""
    span = [t for t in tokenize(text) if t.kind != "EOF"]
    while span and span[0].kind == "NEWLINE":
        span.pop(0)
    while span and span[-1].kind == "NEWLINE":
        span.pop()
    if not span:
        raise ParseError("empty expression", 1, 1)
    return _simple_expression(span, text) or _opaque(span, text)


def parse_config(text: str) -> Configuration:
    """Parse HCL source into a :class:`Configuration`.

    Raises :class:`ParseError` with a line and column for unbalanced
    brackets, malformed block headers and unterminated strings.
    """
    return _Parser(text).parse()


# ---
# Canonical form.
# ---


def _is_identifier(key: str) -> bool:
    return bool(_IDENT_RE.fullmatch(key)) and key not in _KEYWORDS


def render_expression(expr: Expression) -> str:
    if isinstance(expr, Literal):
        return f'"{expr.raw}"' if expr.kind == "string" else expr.raw
    if isinstance(expr, Interpolation):
        return f'"{expr.raw}"'
    if isinstance(expr, (Reference,)):
        return expr.text
    if isinstance(expr, Opaque):
        return expr.text
    if isinstance(expr, ListLiteral):
        return "[" + ", ".join(render_expression(e) for e in expr.items) + "]"
    if isinstance(expr, MapLiteral):
        if not expr.items:
            return "{}"
        pairs = []
        for key, value in expr.items:
            k = key if _is_identifier(key) else f'"{encode_string(key)}"'
            pairs.append(f"{k} = {render_expression(value)}")
        return "{ " + ", ".join(pairs) + " }"
    raise TypeError(f"not an expression: {expr!r}")


def _render_block(block: Block, indent: str, out: list[str]) -> None:
    header = " ".join([block.kind] + [f'"{label}"' for label in block.labels])
    if block.body.is_empty():
        out.append(f"{indent}{header} {{}}")
        return
    out.append(f"{indent}{header} {{")
    inner = indent + "  "
    for attr in sorted(block.body.attributes, key=lambda a: a.name):
        out.append(f"{inner}{attr.name} = {render_expression(attr.value)}")
    for extra in block.body.extras:
        out.append(f"{inner}{extra}")
    for child in block.body.blocks:
        _render_block(child, inner, out)
    out.append(f"{indent}}}")


def canonicalize(config: Configuration) -> str:
    """Deterministic text for ``config``.

    Comments and layout are dropped, attributes are sorted by name within
    every body, and block order is preserved. Opaque expressions are emitted
    byte for byte.
    """
    chunks = []
    for block in config.blocks:
        lines: list[str] = []
        _render_block(block, "", lines)
        chunks.append("\n".join(lines))
    if not chunks:
        return ""
    return "\n\n".join(chunks) + "\n"


def canonical_hash_of(text: str) -> str:
    return parse_config(text).canonical_hash


# ---
# Modules and statistics.
# ---


def concat_module(files: list[tuple[str, str]]) -> str:
    """Join the ``.tf`` files of one module in filename order."""
    if not files:
        raise EmptyModule("module has no .tf files")
    for name, _ in files:
        if not name.endswith(".tf"):
            raise ValueError(f"not a .tf file: {name}")
    ordered = sorted(files, key=lambda f: f[0])
    if len(ordered) == 1:
        return ordered[0][1]
    parts = [text.rstrip("\n") for _, text in ordered[:-1]] + [ordered[-1][1]]
    return "\n\n".join(parts)


@dataclass(frozen=True)
class StatRow:
    providers: int
    resources: int
    loc: int
    prompt_words: int


def config_stats(config: Configuration, prompt: str) -> StatRow:
    loc = sum(1 for line in config.source_text.splitlines() if line.strip())
    return StatRow(
        providers=len(config.providers),
        resources=len(config.resources),
        loc=loc,
        prompt_words=len(prompt.split()),
    )
