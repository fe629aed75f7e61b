"""Safe filter expression DSL over the trail schema.

The DSL replaces model-generated SQL: a model (or rule fallback) emits text
in this closed grammar, which is parsed and type-checked here before the
store executes it. Parsing is total and never touches the database.

Grammar (keywords case-insensitive, strings double-quoted, numbers decimal):

    query  := [expr] tail
    expr   := or
    or     := and ("OR" and)*
    and    := not ("AND" not)*
    not    := ["NOT"] prim
    prim   := "(" expr ")" | field cmpop literal | field "HAS" string
    tail   := ["ORDER BY" field ("ASC"|"DESC")] ["LIMIT" int]
    cmpop  := "=" | "!=" | "<" | "<=" | ">" | ">="

An empty query is the match-all expression. Ordering comparisons apply to
string and numeric fields only; enum-valued fields support = and != and the
``activities`` set supports HAS alone.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field as dc_field
from typing import Union

from .errors import FilterParseError

DIFFICULTIES = ("easy", "moderate", "difficult")
ACTIVITIES = ("hiking", "biking", "walking", "horseback", "snowshoeing")
TRISTATE = ("yes", "no", "unknown")

# field name -> kind; kinds drive literal type checks and allowed operators
STRING, NUMBER, ENUM, SET = "string", "number", "enum", "set"

SCHEMA_FIELDS: dict[str, tuple[str, tuple[str, ...]]] = {
    "id": (STRING, ()),
    "name": (STRING, ()),
    "town": (STRING, ()),
    "description": (STRING, ()),
    "length_miles": (NUMBER, ()),
    "difficulty": (ENUM, DIFFICULTIES),
    "pets_allowed": (ENUM, TRISTATE),
    "wheelchair_accessible": (ENUM, TRISTATE),
    "activities": (SET, ACTIVITIES),
}

CMP_OPS = ("=", "!=", "<", "<=", ">", ">=")
_ORDERING_OPS = ("<", "<=", ">", ">=")


@dataclass(frozen=True)
class Comparison:
    field: str
    op: str
    value: Union[str, float]


@dataclass(frozen=True)
class Has:
    field: str
    value: str


@dataclass(frozen=True)
class Not:
    inner: "Node"


@dataclass(frozen=True)
class And:
    parts: tuple["Node", ...]


@dataclass(frozen=True)
class Or:
    parts: tuple["Node", ...]


@dataclass(frozen=True)
class MatchAll:
    pass


Node = Union[Comparison, Has, Not, And, Or, MatchAll]


@dataclass(frozen=True)
class FilterExpr:
    where: Node = dc_field(default_factory=MatchAll)
    order_by: tuple[str, str] | None = None  # (field, "asc" | "desc")
    limit: int | None = None


# ---------------------------------------------------------------------------
# Tokenizer

_TOKEN_RE = re.compile(
    r"""
    (?P<ws>\s+)
  | (?P<number>-?\d+(?:\.\d+)?)
  | (?P<string>"(?:\\.|[^"\\])*")
  | (?P<op><=|>=|!=|=|<|>)
  | (?P<lparen>\()
  | (?P<rparen>\))
  | (?P<ident>[A-Za-z_][A-Za-z0-9_]*)
    """,
    re.VERBOSE,
)

_KEYWORDS = {"and", "or", "not", "has", "order", "by", "asc", "desc", "limit"}


@dataclass(frozen=True)
class _Token:
    kind: str  # keyword kinds use the keyword itself
    text: str
    pos: int


def _tokenize(text: str) -> list[_Token]:
    tokens: list[_Token] = []
    pos = 0
    while pos < len(text):
        match = _TOKEN_RE.match(text, pos)
        if match is None:
            raise FilterParseError(f"unexpected character {text[pos]!r}", pos)
        kind = match.lastgroup
        value = match.group()
        if kind != "ws":
            if kind == "ident" and value.lower() in _KEYWORDS:
                kind = value.lower()
            tokens.append(_Token(kind, value, pos))
        pos = match.end()
    tokens.append(_Token("eof", "", len(text)))
    return tokens


def _unquote(raw: str) -> str:
    return re.sub(r"\\(.)", r"\1", raw[1:-1])


def _quote(value: str) -> str:
    return '"' + value.replace("\\", "\\\\").replace('"', '\\"') + '"'


# ---------------------------------------------------------------------------
# Parser

class _Parser:
    def __init__(self, text: str):
        self.tokens = _tokenize(text)
        self.i = 0

    @property
    def cur(self) -> _Token:
        return self.tokens[self.i]

    def _advance(self) -> _Token:
        token = self.cur
        self.i += 1
        return token

    def _expect(self, kind: str, expected: str) -> _Token:
        if self.cur.kind != kind:
            raise FilterParseError(
                f"unexpected {self.cur.text or 'end of input'!r}",
                self.cur.pos,
                (expected,),
            )
        return self._advance()

    def parse(self) -> FilterExpr:
        if self.cur.kind in ("eof", "order", "limit"):
            where: Node = MatchAll()
        else:
            where = self._or()
        order_by = self._order_by()
        limit = self._limit()
        self._expect("eof", "end of input")
        return FilterExpr(where=where, order_by=order_by, limit=limit)

    def _or(self) -> Node:
        parts = [self._and()]
        while self.cur.kind == "or":
            self._advance()
            parts.append(self._and())
        return parts[0] if len(parts) == 1 else Or(tuple(parts))

    def _and(self) -> Node:
        parts = [self._not()]
        while self.cur.kind == "and":
            self._advance()
            parts.append(self._not())
        return parts[0] if len(parts) == 1 else And(tuple(parts))

    def _not(self) -> Node:
        if self.cur.kind == "not":
            self._advance()
            return Not(self._prim())
        return self._prim()

    def _prim(self) -> Node:
        if self.cur.kind == "lparen":
            self._advance()
            inner = self._or()
            self._expect("rparen", "')'")
            return inner
        field_tok = self._expect("ident", "field name or '('")
        field = field_tok.text.lower()
        if field not in SCHEMA_FIELDS:
            raise FilterParseError(f"unknown field {field_tok.text!r}", field_tok.pos)
        kind, allowed = SCHEMA_FIELDS[field]
        if self.cur.kind == "has":
            has_tok = self._advance()
            value_tok = self._expect("string", "quoted string")
            if kind != SET:
                raise FilterParseError(
                    f"HAS applies to set fields, not {field!r}", has_tok.pos
                )
            value = _unquote(value_tok.text)
            if value not in allowed:
                raise FilterParseError(
                    f"{value!r} is not a valid {field} value "
                    f"(one of {', '.join(allowed)})",
                    value_tok.pos,
                )
            return Has(field, value)
        if self.cur.kind != "op":
            raise FilterParseError(
                f"unexpected {self.cur.text or 'end of input'!r}",
                self.cur.pos,
                ("comparison operator", "HAS") if kind == SET else ("comparison operator",),
            )
        op_tok = self._advance()
        op = op_tok.text
        if kind == SET:
            raise FilterParseError(
                f"set field {field!r} supports HAS, not {op!r}", op_tok.pos
            )
        if kind == ENUM and op in _ORDERING_OPS:
            raise FilterParseError(
                f"ordering comparison {op!r} is not defined for {field!r}", op_tok.pos
            )
        value_tok = self.cur
        if kind == NUMBER:
            if value_tok.kind != "number":
                raise FilterParseError(
                    f"{field!r} compares against a number", value_tok.pos, ("number",)
                )
            self._advance()
            return Comparison(field, op, float(value_tok.text))
        if value_tok.kind != "string":
            raise FilterParseError(
                f"{field!r} compares against a quoted string",
                value_tok.pos,
                ("quoted string",),
            )
        self._advance()
        value = _unquote(value_tok.text)
        if kind == ENUM and value not in allowed:
            raise FilterParseError(
                f"{value!r} is not a valid {field} value (one of {', '.join(allowed)})",
                value_tok.pos,
            )
        return Comparison(field, op, value)

    def _order_by(self) -> tuple[str, str] | None:
        if self.cur.kind != "order":
            return None
        self._advance()
        self._expect("by", "'BY'")
        field_tok = self._expect("ident", "field name")
        field = field_tok.text.lower()
        if field not in SCHEMA_FIELDS:
            raise FilterParseError(f"unknown field {field_tok.text!r}", field_tok.pos)
        if SCHEMA_FIELDS[field][0] == SET:
            raise FilterParseError(
                f"cannot order by set field {field!r}", field_tok.pos
            )
        direction = "asc"
        if self.cur.kind in ("asc", "desc"):
            direction = self._advance().kind
        return (field, direction)

    def _limit(self) -> int | None:
        if self.cur.kind != "limit":
            return None
        self._advance()
        tok = self._expect("number", "integer")
        if "." in tok.text or tok.text.startswith("-"):
            raise FilterParseError("LIMIT takes a nonnegative integer", tok.pos)
        return int(tok.text)


def parse_filter(dsl_text: str) -> FilterExpr:
    """Parse and type-check DSL text; raises FilterParseError with position."""
    return _Parser(dsl_text).parse()


# ---------------------------------------------------------------------------
# Pretty printer (parse(pretty_print(ast)) == ast)

def _format_value(field: str, value: Union[str, float]) -> str:
    if SCHEMA_FIELDS[field][0] == NUMBER:
        return format(value, "g")
    return _quote(str(value))


def _print_node(node: Node, parent: str) -> str:
    if isinstance(node, Comparison):
        return f"{node.field} {node.op} {_format_value(node.field, node.value)}"
    if isinstance(node, Has):
        return f"{node.field} HAS {_quote(node.value)}"
    if isinstance(node, Not):
        inner = _print_node(node.inner, "not")
        if isinstance(node.inner, (And, Or, Not)):
            inner = f"({inner})"
        return f"NOT {inner}"
    if isinstance(node, And):
        parts = []
        for part in node.parts:
            text = _print_node(part, "and")
            if isinstance(part, (And, Or)):
                text = f"({text})"
            parts.append(text)
        return " AND ".join(parts)
    if isinstance(node, Or):
        parts = []
        for part in node.parts:
            text = _print_node(part, "or")
            if isinstance(part, Or):
                text = f"({text})"
            parts.append(text)
        return " OR ".join(parts)
    if isinstance(node, MatchAll):
        return ""
    raise TypeError(f"unknown node {node!r}")


def pretty_print(expr: FilterExpr) -> str:
    """Render an AST back to DSL text; a fixed point of parse_filter."""
    pieces = []
    body = _print_node(expr.where, "top")
    if body:
        pieces.append(body)
    if expr.order_by is not None:
        field, direction = expr.order_by
        pieces.append(f"ORDER BY {field} {direction.upper()}")
    if expr.limit is not None:
        pieces.append(f"LIMIT {expr.limit}")
    return " ".join(pieces)
