"""Textual rule language: tokenizer, parser, checker, canonical printer.

A rule file is an optional header (``catalog "path"``, ``tick N``) followed
by rules of the form ``rule <id>: when <expr> then <action> [else <action>]``.
Nested rules used as actions close with ``end``; top-level rules do not.
Keywords are reserved, lowercase, case-sensitive.  ``#`` starts a comment
running to end of line.

Parsing is all-or-nothing: any error raises ParseError carrying positioned
diagnostics.  The printer emits one clause per line with two-space
indentation per nesting level and only the parentheses precedence demands,
so parse(print(ast)) is structurally the identity.
"""

from __future__ import annotations

import bisect
import json
import re
from dataclasses import dataclass

from .canonical import canonical_json
from .context import Catalog, FactorId
from .engine import Action, Rule
from .errors import ParseError
from .expressions import Binary, Connective, Expr, Not, Statement, validate
from .triggers import (
    CallMethod,
    EmitMessage,
    Nothing,
    PlaySound,
    SetSetting,
    Trigger,
    Vibrate,
    setting_value_text,
)
from .values import Operator, Value

MAX_DEPTH = 16

KEYWORDS = frozenset({
    "rule", "when", "then", "else", "end", "not", "and", "or", "xor",
    "nand", "nor", "xnor", "in", "matches", "within", "of", "set", "play",
    "vibrate", "emit", "call", "nothing", "true", "false", "catalog", "tick",
})


@dataclass(frozen=True)
class Diagnostic:
    severity: str  # "error" | "warning"
    message: str
    line: int  # 1-based
    col: int  # 1-based
    span: tuple[int, int]  # [start, end) offsets into the source


@dataclass
class RuleFile:
    rules: list[Rule]
    catalog_ref: str | None = None
    tick: int | None = None


# -- tokenizer ---------------------------------------------------------------

_NUMBER_RE = re.compile(r"-?\d+(?:\.\d+)?(?:[eE][+-]?\d+)?")
_WORD_RE = re.compile(r"[a-z_][a-z0-9_]*(?:\.[a-z_][a-z0-9_]*)?")
_STRING_RE = re.compile(r'"(?:[^"\\\n]|\\.)*"')
_PUNCT_RE = re.compile(r"==|!=|<=|>=|[<>=:(),\[\]]")


@dataclass(frozen=True)
class _Token:
    type: str  # "number" | "word" | "string" | "regex" | "json" | "punct" | "eof"
    text: str
    value: object
    start: int
    end: int


class _LineMap:
    """Offset to 1-based (line, col) without rescanning the source."""

    def __init__(self, text: str):
        self._starts = [0]
        for i, ch in enumerate(text):
            if ch == "\n":
                self._starts.append(i + 1)

    def linecol(self, offset: int) -> tuple[int, int]:
        line = bisect.bisect_right(self._starts, offset)
        return line, offset - self._starts[line - 1] + 1


def _scan_json_object(text: str, start: int) -> int:
    """Return the end offset of the balanced {...} starting at ``start``."""
    depth, in_str, esc = 0, False, False
    for j in range(start, len(text)):
        ch = text[j]
        if in_str:
            if esc:
                esc = False
            elif ch == "\\":
                esc = True
            elif ch == '"':
                in_str = False
        elif ch == '"':
            in_str = True
        elif ch == "{":
            depth += 1
        elif ch == "}":
            depth -= 1
            if depth == 0:
                return j + 1
    return -1


def _scan_regex(text: str, start: int) -> int:
    """Return the end offset of the /.../ literal starting at ``start``."""
    esc = False
    for j in range(start + 1, len(text)):
        ch = text[j]
        if ch == "\n":
            return -1
        if esc:
            esc = False
        elif ch == "\\":
            esc = True
        elif ch == "/":
            return j + 1
    return -1


class _Tokenizer:
    def __init__(self, text: str, linemap: _LineMap):
        self.text = text
        self.linemap = linemap

    def _fail(self, message: str, start: int, end: int) -> ParseError:
        line, col = self.linemap.linecol(start)
        return ParseError(message, [Diagnostic("error", message, line, col, (start, end))])

    def tokens(self) -> list[_Token]:
        text, out, i, n = self.text, [], 0, len(self.text)
        while i < n:
            ch = text[i]
            if ch in " \t\r\n":
                i += 1
                continue
            if ch == "#":
                j = text.find("\n", i)
                i = n if j < 0 else j + 1
                continue
            if ch == "/":
                end = _scan_regex(text, i)
                if end < 0:
                    raise self._fail("unterminated regex literal", i, i + 1)
                pattern = text[i + 1:end - 1].replace("\\/", "/")
                out.append(_Token("regex", text[i:end], pattern, i, end))
                i = end
                continue
            if ch == "{":
                end = _scan_json_object(text, i)
                if end < 0:
                    raise self._fail("unterminated JSON object", i, i + 1)
                raw = text[i:end]
                try:
                    payload = json.loads(raw)
                except ValueError as exc:
                    raise self._fail(f"bad JSON payload: {exc}", i, end) from None
                out.append(_Token("json", raw, payload, i, end))
                i = end
                continue
            if ch == '"':
                m = _STRING_RE.match(text, i)
                if not m:
                    raise self._fail("unterminated string literal", i, i + 1)
                try:
                    decoded = json.loads(m.group())
                except ValueError as exc:
                    raise self._fail(f"bad string literal: {exc}", i, m.end()) from None
                out.append(_Token("string", m.group(), decoded, i, m.end()))
                i = m.end()
                continue
            m = _NUMBER_RE.match(text, i)
            if m:
                lit = m.group()
                num = float(lit) if any(c in lit for c in ".eE") else int(lit)
                out.append(_Token("number", lit, num, i, m.end()))
                i = m.end()
                continue
            m = _WORD_RE.match(text, i)
            if m:
                out.append(_Token("word", m.group(), m.group(), i, m.end()))
                i = m.end()
                continue
            m = _PUNCT_RE.match(text, i)
            if m:
                out.append(_Token("punct", m.group(), m.group(), i, m.end()))
                i = m.end()
                continue
            raise self._fail(f"unexpected character {ch!r}", i, i + 1)
        out.append(_Token("eof", "", None, n, n))
        return out


# -- parser ------------------------------------------------------------------

# Connective tiers, loosest first; `not` binds tighter than all of them.
_TIERS = (
    (Connective.OR, Connective.NOR),
    (Connective.XOR, Connective.XNOR),
    (Connective.AND, Connective.NAND),
)


class _Parser:
    def __init__(self, text: str):
        self.text = text
        self.linemap = _LineMap(text)
        self.toks = _Tokenizer(text, self.linemap).tokens()
        self.pos = 0

    # -- plumbing ------------------------------------------------------------

    def peek(self) -> _Token:
        return self.toks[self.pos]

    def next(self) -> _Token:
        tok = self.toks[self.pos]
        if tok.type != "eof":
            self.pos += 1
        return tok

    def fail(self, message: str, tok: _Token | None = None) -> ParseError:
        tok = tok or self.peek()
        line, col = self.linemap.linecol(tok.start)
        shown = tok.text if tok.type != "eof" else "end of input"
        return ParseError(
            f"{message} (got {shown!r} at line {line})",
            [Diagnostic("error", message, line, col, (tok.start, max(tok.end, tok.start + 1)))],
        )

    def at_word(self, *words: str) -> bool:
        tok = self.peek()
        return tok.type == "word" and tok.text in words

    def expect_word(self, word: str) -> _Token:
        if not self.at_word(word):
            raise self.fail(f"expected {word!r}")
        return self.next()

    def expect_punct(self, punct: str) -> _Token:
        tok = self.peek()
        if tok.type != "punct" or tok.text != punct:
            raise self.fail(f"expected {punct!r}")
        return self.next()

    def expect_number(self, what: str = "number") -> tuple[float | int, _Token]:
        tok = self.peek()
        if tok.type != "number":
            raise self.fail(f"expected {what}")
        self.next()
        return tok.value, tok

    def expect_plain_word(self, what: str) -> _Token:
        tok = self.peek()
        if tok.type != "word" or "." in tok.text:
            raise self.fail(f"expected {what}")
        if tok.text in KEYWORDS:
            raise self.fail(f"{tok.text!r} is a reserved word, not a valid {what}", tok)
        return self.next()

    # -- grammar -------------------------------------------------------------

    def parse_file(self) -> RuleFile:
        catalog_ref = tick = None
        while True:
            if self.at_word("catalog"):
                if catalog_ref is not None:
                    raise self.fail("duplicate catalog header")
                self.next()
                tok = self.peek()
                if tok.type != "string":
                    raise self.fail("expected catalog path string")
                catalog_ref = tok.value
                self.next()
            elif self.at_word("tick"):
                if tick is not None:
                    raise self.fail("duplicate tick header")
                self.next()
                value, tok = self.expect_number("tick interval")
                if not isinstance(value, int) or value <= 0:
                    raise self.fail("tick interval must be a positive integer", tok)
                tick = value
            else:
                break
        rules = []
        seen: set[str] = set()
        while self.peek().type != "eof":
            rules.append(self.parse_rule(top=True, seen=seen, depth=1))
        return RuleFile(rules, catalog_ref, tick)

    def parse_rule(self, top: bool, seen: set[str], depth: int) -> Rule:
        if depth > MAX_DEPTH:
            raise self.fail(f"rules nested deeper than {MAX_DEPTH}")
        self.expect_word("rule")
        name_tok = self.expect_plain_word("rule id")
        if name_tok.text in seen:
            raise self.fail(f"duplicate rule id {name_tok.text!r}", name_tok)
        seen.add(name_tok.text)
        self.expect_punct(":")
        self.expect_word("when")
        expr = self.parse_expr()
        self.expect_word("then")
        then_action = self.parse_action(seen, depth)
        else_action = None
        if self.at_word("else"):
            self.next()
            else_action = self.parse_action(seen, depth)
        if not top:
            self.expect_word("end")
        return Rule(name_tok.text, expr, then_action, else_action)

    def parse_action(self, seen: set[str], depth: int) -> Action:
        tok = self.peek()
        if tok.type != "word":
            raise self.fail("expected an action")
        if tok.text == "rule":
            return self.parse_rule(top=False, seen=seen, depth=depth + 1)
        if tok.text == "set":
            self.next()
            setting = self.expect_plain_word("setting name")
            self.expect_punct("=")
            value, vtok = self.parse_setting_value()
            try:
                return SetSetting(setting.text, value)
            except ValueError as exc:
                raise self.fail(str(exc), vtok) from None
        if tok.text == "play":
            self.next()
            stok = self.peek()
            if stok.type != "string":
                raise self.fail("expected sound name string")
            self.next()
            return PlaySound(stok.value)
        if tok.text == "vibrate":
            self.next()
            return self.parse_vibrate()
        if tok.text == "emit":
            self.next()
            channel = self.peek()
            if channel.type != "word" or channel.text in KEYWORDS:
                raise self.fail("expected channel name")
            self.next()
            ptok = self.peek()
            if ptok.type != "json":
                raise self.fail("expected JSON payload object")
            self.next()
            return EmitMessage(channel.text, ptok.value)
        if tok.text == "call":
            self.next()
            target = self.peek()
            if target.type != "word" or target.text in KEYWORDS:
                raise self.fail("expected callback name")
            self.next()
            return CallMethod(target.text)
        if tok.text == "nothing":
            self.next()
            return Nothing()
        raise self.fail("expected an action")

    def parse_setting_value(self) -> tuple[object, _Token]:
        tok = self.peek()
        if tok.type == "number":
            self.next()
            return float(tok.value), tok
        if tok.type == "word" and tok.text in ("true", "false"):
            self.next()
            return tok.text == "true", tok
        if tok.type == "word" and "." not in tok.text:
            self.next()
            return tok.text, tok
        raise self.fail("expected a setting value")

    def parse_vibrate(self) -> Vibrate:
        open_tok = self.expect_punct("[")
        entries = []
        value, tok = self.expect_number("vibration duration")
        entries.append((value, tok))
        while self.peek().type == "punct" and self.peek().text == ",":
            self.next()
            entries.append(self.expect_number("vibration duration"))
        self.expect_punct("]")
        for value, tok in entries:
            if not isinstance(value, int) or value <= 0:
                raise self.fail("vibration durations must be positive integers", tok)
        try:
            return Vibrate(tuple(v for v, _ in entries))
        except ValueError as exc:
            raise self.fail(str(exc), open_tok) from None

    def parse_expr(self) -> Expr:
        return self.parse_tier(0)

    def parse_tier(self, tier: int) -> Expr:
        if tier >= len(_TIERS):
            return self.parse_not()
        ops = _TIERS[tier]
        names = tuple(op.value for op in ops)
        left = self.parse_tier(tier + 1)
        while self.at_word(*names):
            op = Connective(self.next().text)
            right = self.parse_tier(tier + 1)
            left = Binary(op, left, right)
        return left

    def parse_not(self) -> Expr:
        if self.at_word("not"):
            self.next()
            return Not(self.parse_not())
        return self.parse_atom()

    def parse_atom(self) -> Expr:
        tok = self.peek()
        if tok.type == "punct" and tok.text == "(":
            self.next()
            expr = self.parse_expr()
            self.expect_punct(")")
            return expr
        return self.parse_statement()

    def parse_statement(self) -> Statement:
        tok = self.peek()
        if tok.type != "word" or "." not in tok.text:
            raise self.fail("expected a factor reference like group.name")
        try:
            factor = FactorId.parse(tok.text)
        except ValueError as exc:
            raise self.fail(str(exc), tok) from None
        self.next()
        op, end = self.parse_operator()
        return Statement(factor, op, span=(tok.start, end))

    def parse_operator(self) -> tuple[Operator, int]:
        tok = self.peek()
        try:
            if tok.type == "punct" and tok.text in ("==", "!=", ">", ">=", "<", "<="):
                self.next()
                ctor = {"==": Operator.eq, "!=": Operator.ne, ">": Operator.gt,
                        ">=": Operator.ge, "<": Operator.lt, "<=": Operator.le}[tok.text]
                value, end = self.parse_literal(numeric_only=tok.text not in ("==", "!="))
                return ctor(value), end
            if tok.type == "word" and tok.text == "in":
                self.next()
                self.expect_punct("[")
                lo, _ = self.expect_number("range lower bound")
                self.expect_punct(",")
                hi, hi_tok = self.expect_number("range upper bound")
                close = self.expect_punct("]")
                try:
                    return Operator.in_range(float(lo), float(hi)), close.end
                except ValueError as exc:
                    raise self.fail(str(exc), hi_tok) from None
            if tok.type == "word" and tok.text == "matches":
                self.next()
                rtok = self.peek()
                if rtok.type != "regex":
                    raise self.fail("expected a /regex/ literal")
                self.next()
                try:
                    return Operator.matches(rtok.value), rtok.end
                except ValueError as exc:
                    raise self.fail(f"unsupported regex: {exc}", rtok) from None
            if tok.type == "word" and tok.text == "within":
                self.next()
                radius, rtok = self.expect_number("radius in meters")
                self.expect_word("of")
                self.expect_punct("(")
                lat, _ = self.expect_number("latitude")
                self.expect_punct(",")
                lon, _ = self.expect_number("longitude")
                close = self.expect_punct(")")
                try:
                    return Operator.within(float(lat), float(lon), float(radius)), close.end
                except ValueError as exc:
                    raise self.fail(str(exc), rtok) from None
        except ParseError:
            raise
        raise self.fail("expected a comparison operator")

    def parse_literal(self, numeric_only: bool) -> tuple[object, int]:
        """A comparison right-hand side; returns (value, end offset)."""
        tok = self.peek()
        if tok.type == "number":
            self.next()
            return tok.value, tok.end
        if numeric_only:
            raise self.fail("expected a number")
        if tok.type == "string":
            self.next()
            return tok.value, tok.end
        if tok.type == "word" and tok.text in ("true", "false"):
            self.next()
            return tok.text == "true", tok.end
        if tok.type == "punct" and tok.text == "(":
            self.next()
            lat, _ = self.expect_number("latitude")
            self.expect_punct(",")
            lon, _ = self.expect_number("longitude")
            close = self.expect_punct(")")
            return (float(lat), float(lon)), close.end
        raise self.fail("expected a literal value")


def parse(text: str) -> RuleFile:
    """Parse rule-file text; raises ParseError with diagnostics on failure."""
    return _Parser(text).parse_file()


def parse_rule(text: str) -> Rule:
    """Parse text containing exactly one top-level rule."""
    rf = parse(text)
    if len(rf.rules) != 1:
        raise ParseError(f"expected exactly one rule, found {len(rf.rules)}")
    return rf.rules[0]


def parse_expression(text: str) -> Expr:
    """Parse a bare expression (no rule wrapper); used by interactive tools."""
    parser = _Parser(text)
    expr = parser.parse_expr()
    if parser.peek().type != "eof":
        raise parser.fail("unexpected trailing input")
    return expr


# -- printer -----------------------------------------------------------------

_TIER_OF = {
    Connective.OR: 1, Connective.NOR: 1,
    Connective.XOR: 2, Connective.XNOR: 2,
    Connective.AND: 3, Connective.NAND: 3,
}
_NOT_TIER = 4
_ATOM_TIER = 5


def _num_text(x: float | int) -> str:
    return repr(x) if isinstance(x, float) else str(x)


def _value_text(value: Value) -> str:
    payload = value.payload
    if isinstance(payload, tuple):
        return f"({_num_text(payload[0])}, {_num_text(payload[1])})"
    if isinstance(payload, bool):
        return "true" if payload else "false"
    if isinstance(payload, str):
        return json.dumps(payload)
    return _num_text(payload)


def _statement_text(stmt: Statement) -> str:
    op = stmt.op
    k = op.kind.value
    sym = {"eq": "==", "ne": "!=", "gt": ">", "ge": ">=", "lt": "<", "le": "<="}
    if k in sym:
        return f"{stmt.factor} {sym[k]} {_value_text(op.arg)}"
    if k == "in_range":
        return f"{stmt.factor} in [{_num_text(op.lo)}, {_num_text(op.hi)}]"
    if k == "matches":
        return f"{stmt.factor} matches /{op.pattern.replace('/', chr(92) + '/')}/"
    lat, lon = op.center
    return (f"{stmt.factor} within {_num_text(op.radius_m)} "
            f"of ({_num_text(lat)}, {_num_text(lon)})")


def _expr_tier(expr: Expr) -> int:
    if isinstance(expr, Binary):
        return _TIER_OF[expr.op]
    if isinstance(expr, Not):
        return _NOT_TIER
    return _ATOM_TIER


def _expr_text(expr: Expr, parent_tier: int = 0, right_side: bool = False) -> str:
    tier = _expr_tier(expr)
    if isinstance(expr, Statement):
        return _statement_text(expr)
    if isinstance(expr, Not):
        return f"not {_expr_text(expr.child, _NOT_TIER)}"
    text = (f"{_expr_text(expr.left, tier)} {expr.op.value} "
            f"{_expr_text(expr.right, tier, right_side=True)}")
    # Parenthesize when we bind looser than the context, or equally loose on
    # the right of a left-associative chain.
    if tier < parent_tier or (tier == parent_tier and right_side):
        return f"({text})"
    return text


def _action_text(action: Action | None, level: int) -> str:
    if isinstance(action, Rule):
        pad, inner = "  " * level, "  " * (level + 1)
        lines = [f"rule {action.id}:",
                 f"{inner}when {_expr_text(action.expression)}",
                 f"{inner}then {_action_text(action.then_action, level + 1)}"]
        if action.else_action is not None:
            lines.append(f"{inner}else {_action_text(action.else_action, level + 1)}")
        lines.append(f"{pad}end")
        return "\n".join(lines)
    if isinstance(action, SetSetting):
        return f"set {action.setting} = {setting_value_text(action.value)}"
    if isinstance(action, PlaySound):
        return f"play {json.dumps(action.sound)}"
    if isinstance(action, Vibrate):
        return f"vibrate [{', '.join(str(n) for n in action.pattern)}]"
    if isinstance(action, EmitMessage):
        return f"emit {action.channel} {canonical_json(action.payload)}"
    if isinstance(action, CallMethod):
        return f"call {action.callback}"
    if isinstance(action, Nothing):
        return "nothing"
    raise TypeError(f"not a printable action: {action!r}")


def print_rule(rule: Rule) -> str:
    lines = [f"rule {rule.id}:",
             f"  when {_expr_text(rule.expression)}",
             f"  then {_action_text(rule.then_action, 1)}"]
    if rule.else_action is not None:
        lines.append(f"  else {_action_text(rule.else_action, 1)}")
    return "\n".join(lines)


def print_rule_file(rf: RuleFile) -> str:
    chunks = []
    if rf.catalog_ref is not None:
        chunks.append(f'catalog {json.dumps(rf.catalog_ref)}')
    if rf.tick is not None:
        chunks.append(f"tick {rf.tick}")
    if chunks:
        chunks.append("")
    chunks.extend(print_rule(rule) + "\n" for rule in rf.rules)
    text = "\n".join(chunks)
    return text if text.endswith("\n") else text + "\n"


# -- checker -----------------------------------------------------------------

def check(rf: RuleFile, catalog: Catalog, text: str | None = None) -> list[Diagnostic]:
    """Catalog-aware validation; returns diagnostics instead of raising.

    Passing the source text the file was parsed from lets diagnostics
    resolve statement spans to line and column numbers.
    """
    diags: list[Diagnostic] = []
    linemap = _LineMap(text) if text is not None else None

    def to_diag(message: str, span: tuple[int, int] | None) -> Diagnostic:
        if span is not None and linemap is not None:
            line, col = linemap.linecol(span[0])
            return Diagnostic("error", message, line, col, span)
        return Diagnostic("error", message, 1, 1, (0, 0))

    def walk(rule: Rule, depth: int) -> None:
        if depth > MAX_DEPTH:
            diags.append(to_diag(
                f"rule {rule.id} nests deeper than {MAX_DEPTH}", None))
            return
        for ed in validate(rule.expression, catalog):
            diags.append(to_diag(ed.message, ed.span))
        for action in (rule.then_action, rule.else_action):
            if isinstance(action, Rule):
                walk(action, depth + 1)

    for rule in rf.rules:
        walk(rule, 1)
    return diags


def check_text(text: str, catalog: Catalog) -> tuple[RuleFile | None, list[Diagnostic]]:
    """Parse then check; parse failures come back as the diagnostics."""
    try:
        rf = parse(text)
    except ParseError as exc:
        return None, list(exc.diagnostics)
    return rf, check(rf, catalog, text)
