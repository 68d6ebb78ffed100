"""Rule-language parsing, canonical printing, and static checks."""

import dataclasses
import itertools

import pytest
from hypothesis import given, settings, strategies as st

from m3i.context import FactorId, standard_registry
from m3i.dsl import (
    KEYWORDS,
    check,
    check_text,
    parse,
    parse_expression,
    parse_rule,
    print_rule,
    print_rule_file,
    _expr_text,
)
from m3i.engine import Rule
from m3i.errors import ParseError
from m3i.expressions import Binary, Connective, Not, Statement
from m3i.triggers import (
    CallMethod,
    EmitMessage,
    Nothing,
    PlaySound,
    SetSetting,
    Vibrate,
)
from m3i.values import Operator, check_regex_subset

CATALOG = standard_registry().catalog()


# -- strategies --------------------------------------------------------------

idents = st.from_regex(r"[a-z][a-z0-9_]{0,6}", fullmatch=True).filter(
    lambda s: s not in KEYWORDS)
factor_ids = st.builds(FactorId, idents, idents)

ints = st.integers(-10**9, 10**9)
floats = st.floats(allow_nan=False, allow_infinity=False)
numbers = ints | floats
lats = st.floats(-90, 90, allow_nan=False)
lons = st.floats(-180, 180, allow_nan=False)
geo_pairs = st.tuples(lats, lons)

scalar_literals = numbers | st.booleans() | st.text(max_size=8) | geo_pairs

_PATTERN_ATOMS = [
    "a", "b", "z9", ".", "/", "^", "$", "[abc]", "[^xy]", "[a-z]",
    "(ab)", "a|b", "c*", "d+", "e?", r"\.", r"\\", r"\*",
]


def _pattern_ok(p: str) -> bool:
    try:
        check_regex_subset(p)
        return True
    except ValueError:
        return False


patterns = st.lists(
    st.sampled_from(_PATTERN_ATOMS), min_size=1, max_size=4,
).map("".join).filter(_pattern_ok)

operators = st.one_of(
    st.builds(Operator.eq, scalar_literals),
    st.builds(Operator.ne, scalar_literals),
    st.builds(Operator.gt, numbers),
    st.builds(Operator.ge, numbers),
    st.builds(Operator.lt, numbers),
    st.builds(Operator.le, numbers),
    st.builds(lambda a, b: Operator.in_range(min(a, b), max(a, b)),
              floats, floats),
    st.builds(Operator.matches, patterns),
    st.builds(Operator.within, lats, lons, st.floats(0, 1e7, allow_nan=False)),
)

statements = st.builds(Statement, factor_ids, operators)

expressions = st.recursive(
    statements,
    lambda kids: st.builds(Not, kids) | st.builds(
        Binary, st.sampled_from(list(Connective)), kids, kids),
    max_leaves=8,
)

set_actions = st.one_of(
    st.builds(lambda v: SetSetting("ringer", v),
              st.sampled_from(["normal", "vibrate", "silent"])),
    st.builds(SetSetting,
              st.sampled_from(["vibrating", "notification_led", "wifi_enabled",
                               "sync_enabled", "screen_locked"]),
              st.booleans()),
    st.builds(lambda v: SetSetting("screen_brightness", v),
              st.floats(0, 1, allow_nan=False)),
)

json_scalars = st.none() | st.booleans() | st.integers(-1000, 1000) | st.text(max_size=5)
payloads = st.dictionaries(
    st.from_regex(r"[a-z][a-z0-9_]{0,4}", fullmatch=True), json_scalars, max_size=3)

leaf_actions = st.one_of(
    set_actions,
    st.builds(PlaySound, st.text(min_size=1, max_size=8)),
    st.builds(lambda ns: Vibrate(tuple(ns)),
              st.lists(st.integers(1, 5000), min_size=1, max_size=4)),
    st.builds(EmitMessage, idents, payloads),
    st.builds(CallMethod, idents),
    st.builds(lambda a, b: CallMethod(f"{a}.{b}"), idents, idents),
    st.just(Nothing()),
)


@st.composite
def rule_trees(draw, depth=0):
    def action():
        if depth < 2 and draw(st.integers(0, 3)) == 0:
            return draw(rule_trees(depth=depth + 1))
        return draw(leaf_actions)

    then = action()
    els = action() if draw(st.booleans()) else None
    return Rule("tmp", draw(expressions), then, els)


def uniquify(rule: Rule) -> Rule:
    """Rewrite placeholder ids so every node in the tree is distinct."""
    counter = itertools.count()

    def rebuild(node):
        if not isinstance(node, Rule):
            return node
        return dataclasses.replace(
            node,
            id=f"r{next(counter)}",
            then_action=rebuild(node.then_action),
            else_action=None if node.else_action is None
            else rebuild(node.else_action))

    return rebuild(rule)


rules = rule_trees().map(uniquify)


# -- round trips -------------------------------------------------------------

class TestRoundTrip:
    @settings(max_examples=200, deadline=None)
    @given(rules)
    def test_print_then_parse_is_identity(self, rule):
        assert parse_rule(print_rule(rule)) == rule

    @settings(max_examples=200, deadline=None)
    @given(rules)
    def test_printed_text_is_a_fixed_point(self, rule):
        text = print_rule(rule)
        assert print_rule(parse_rule(text)) == text

    @settings(max_examples=150, deadline=None)
    @given(expressions)
    def test_expression_text_reparses(self, expr):
        assert parse_expression(_expr_text(expr)) == expr

    def test_slash_heavy_regex_round_trips(self):
        rule = Rule("r", Statement(
            FactorId("transport", "mode"), Operator.matches("a/b[/]c")),
            Nothing())
        assert parse_rule(print_rule(rule)) == rule


# -- precedence and associativity --------------------------------------------

A = parse_expression("x.a == true")
B = parse_expression("x.b == true")
C = parse_expression("x.c == true")
D = parse_expression("x.d == true")


class TestPrecedence:
    def test_and_binds_tighter_than_or(self):
        got = parse_expression("x.a == true or x.b == true and x.c == true")
        assert got == Binary(Connective.OR, A, Binary(Connective.AND, B, C))

    def test_or_after_and(self):
        got = parse_expression("x.a == true and x.b == true or x.c == true")
        assert got == Binary(Connective.OR, Binary(Connective.AND, A, B), C)

    def test_xor_sits_between(self):
        got = parse_expression(
            "x.a == true or x.b == true xor x.c == true and x.d == true")
        assert got == Binary(
            Connective.OR, A,
            Binary(Connective.XOR, B, Binary(Connective.AND, C, D)))

    def test_not_binds_tightest(self):
        got = parse_expression("not x.a == true and x.b == true")
        assert got == Binary(Connective.AND, Not(A), B)

    def test_negated_forms_share_their_tier(self):
        got = parse_expression("x.a == true and x.b == true nand x.c == true")
        assert got == Binary(Connective.NAND, Binary(Connective.AND, A, B), C)
        got = parse_expression("x.a == true nor x.b == true or x.c == true")
        assert got == Binary(Connective.OR, Binary(Connective.NOR, A, B), C)

    def test_same_tier_is_left_associative(self):
        got = parse_expression("x.a == true or x.b == true or x.c == true")
        assert got == Binary(Connective.OR, Binary(Connective.OR, A, B), C)

    def test_parens_override(self):
        got = parse_expression("(x.a == true or x.b == true) and x.c == true")
        assert got == Binary(Connective.AND, Binary(Connective.OR, A, B), C)

    def test_not_parenthesized_group(self):
        got = parse_expression("not (x.a == true or x.b == true)")
        assert got == Not(Binary(Connective.OR, A, B))

    def test_double_negation(self):
        assert parse_expression("not not x.a == true") == Not(Not(A))


class TestMinimalParens:
    @pytest.mark.parametrize("expr, text", [
        (Binary(Connective.AND, Binary(Connective.OR, A, B), C),
         "(x.a == true or x.b == true) and x.c == true"),
        (Binary(Connective.OR, A, Binary(Connective.AND, B, C)),
         "x.a == true or x.b == true and x.c == true"),
        (Binary(Connective.OR, Binary(Connective.OR, A, B), C),
         "x.a == true or x.b == true or x.c == true"),
        (Binary(Connective.OR, A, Binary(Connective.OR, B, C)),
         "x.a == true or (x.b == true or x.c == true)"),
        (Not(Binary(Connective.AND, A, B)),
         "not (x.a == true and x.b == true)"),
        (Not(A), "not x.a == true"),
        (Binary(Connective.XOR, Not(A), B),
         "not x.a == true xor x.b == true"),
        (Binary(Connective.NAND, A, Binary(Connective.AND, B, C)),
         "x.a == true nand (x.b == true and x.c == true)"),
    ])
    def test_golden_text(self, expr, text):
        assert _expr_text(expr) == text
        assert parse_expression(text) == expr


# -- statements and literals -------------------------------------------------

class TestStatements:
    def test_all_comparison_symbols(self):
        for sym, ctor in [("==", Operator.eq), ("!=", Operator.ne),
                          ("<", Operator.lt), ("<=", Operator.le),
                          (">", Operator.gt), (">=", Operator.ge)]:
            got = parse_expression(f"battery.level {sym} 20.0")
            assert got == Statement(FactorId("battery", "level"), ctor(20.0))

    def test_literal_shapes(self):
        cases = [
            ("x.a == 5", Operator.eq(5)),
            ("x.a == 5.0", Operator.eq(5.0)),
            ("x.a == -3.5e2", Operator.eq(-350.0)),
            ("x.a == true", Operator.eq(True)),
            ("x.a == false", Operator.eq(False)),
            ('x.a == "hi there"', Operator.eq("hi there")),
            ("x.a == (48.15, 11.58)", Operator.eq((48.15, 11.58))),
            ("x.a in [1, 5]", Operator.in_range(1.0, 5.0)),
            ("x.a matches /^bus|tram$/", Operator.matches("^bus|tram$")),
            ("x.a within 150.0 of (48.15, 11.58)",
             Operator.within(48.15, 11.58, 150.0)),
        ]
        for text, op in cases:
            assert parse_expression(text) == Statement(FactorId("x", "a"), op)

    def test_int_literals_stay_int(self):
        got = parse_expression("x.a == 5")
        assert got.op.arg.payload == 5
        assert isinstance(got.op.arg.payload, int)

    def test_exponent_without_dot_is_float(self):
        got = parse_expression("x.a > 1e3")
        assert got.op.arg.payload == 1000.0
        assert isinstance(got.op.arg.payload, float)

    def test_string_escapes(self):
        got = parse_expression(r'x.a == "a\"b\u00e9"')
        assert got.op.arg.payload == 'a"b\u00e9'

    def test_statement_span_covers_source(self):
        text = "battery.level > 5.0"
        assert parse_expression(text).span == (0, len(text))

    def test_ordering_needs_numeric_literal(self):
        with pytest.raises(ParseError):
            parse_expression('x.a > "five"')

    def test_range_bounds_must_be_ordered(self):
        with pytest.raises(ParseError):
            parse_expression("x.a in [5, 1]")

    def test_regex_outside_subset_is_a_parse_error(self):
        with pytest.raises(ParseError) as exc:
            parse_expression(r"x.a matches /\d+/")
        assert "unsupported regex" in str(exc.value)


# -- actions -----------------------------------------------------------------

class TestActions:
    def roundtrip(self, action):
        rule = Rule("r", A, action)
        return parse_rule(print_rule(rule)).then_action

    def test_set_value_spellings(self):
        src = "rule r:\n  when x.a == true\n  then set ringer = silent"
        assert parse_rule(src).then_action == SetSetting("ringer", "silent")
        src = "rule r:\n  when x.a == true\n  then set screen_brightness = 0.25"
        assert parse_rule(src).then_action == SetSetting("screen_brightness", 0.25)
        src = "rule r:\n  when x.a == true\n  then set wifi_enabled = false"
        assert parse_rule(src).then_action == SetSetting("wifi_enabled", False)

    def test_bad_set_values_are_diagnosed(self):
        for src in [
            "rule r:\n  when x.a == true\n  then set ringer = loud",
            "rule r:\n  when x.a == true\n  then set screen_brightness = 2.0",
            "rule r:\n  when x.a == true\n  then set bogus = true",
            "rule r:\n  when x.a == true\n  then set vibrating = 1",
        ]:
            with pytest.raises(ParseError):
                parse_rule(src)

    def test_play_takes_a_string(self):
        src = 'rule r:\n  when x.a == true\n  then play "ding.ogg"'
        assert parse_rule(src).then_action == PlaySound("ding.ogg")
        with pytest.raises(ParseError):
            parse_rule("rule r:\n  when x.a == true\n  then play ding")

    def test_vibrate_patterns(self):
        src = "rule r:\n  when x.a == true\n  then vibrate [100, 50, 100]"
        assert parse_rule(src).then_action == Vibrate((100, 50, 100))
        for bad in ["vibrate []", "vibrate [0]", "vibrate [-5]", "vibrate [1.5]"]:
            with pytest.raises(ParseError):
                parse_rule(f"rule r:\n  when x.a == true\n  then {bad}")

    def test_emit_json_payload(self):
        src = ('rule r:\n  when x.a == true\n'
               '  then emit steering {"direction": "left", "n": 2}')
        assert parse_rule(src).then_action == \
            EmitMessage("steering", {"direction": "left", "n": 2})

    def test_emit_payload_may_contain_braces_in_strings(self):
        src = 'rule r:\n  when x.a == true\n  then emit c {"k": "a}b"}'
        assert parse_rule(src).then_action == EmitMessage("c", {"k": "a}b"})

    def test_bad_json_payload(self):
        with pytest.raises(ParseError):
            parse_rule('rule r:\n  when x.a == true\n  then emit c {"k": }')

    def test_call_dotted_target(self):
        src = "rule r:\n  when x.a == true\n  then call launch.camera"
        assert parse_rule(src).then_action == CallMethod("launch.camera")

    def test_nothing(self):
        src = "rule r:\n  when x.a == true\n  then nothing\n  else nothing"
        rule = parse_rule(src)
        assert rule.then_action == Nothing() and rule.else_action == Nothing()


class TestNestedRules:
    SRC = (
        "rule outer:\n"
        "  when x.a == true\n"
        "  then rule inner:\n"
        "    when x.b == true\n"
        "    then set ringer = silent\n"
        "    else set ringer = vibrate\n"
        "  end\n"
        "  else nothing"
    )

    def test_parse_shape(self):
        rule = parse_rule(self.SRC)
        assert rule.id == "outer" and rule.else_action == Nothing()
        inner = rule.then_action
        assert isinstance(inner, Rule) and inner.id == "inner"
        assert inner.then_action == SetSetting("ringer", "silent")

    def test_round_trip(self):
        rule = parse_rule(self.SRC)
        assert parse_rule(print_rule(rule)) == rule

    def test_missing_end(self):
        with pytest.raises(ParseError):
            parse_rule(self.SRC.replace("  end\n", ""))

    def test_duplicate_nested_id(self):
        with pytest.raises(ParseError):
            parse_rule(self.SRC.replace("rule inner", "rule outer"))


# -- files and headers -------------------------------------------------------

class TestRuleFiles:
    def test_headers(self):
        text = ('catalog "sensors.json"\n'
                "tick 500\n\n"
                "rule r:\n  when x.a == true\n  then nothing\n")
        rf = parse(text)
        assert rf.catalog_ref == "sensors.json"
        assert rf.tick == 500
        assert print_rule_file(rf) == text

    def test_no_headers(self):
        rf = parse("rule r:\n  when x.a == true\n  then nothing\n")
        assert rf.catalog_ref is None and rf.tick is None

    def test_multiple_rules_and_comments(self):
        text = ("# top comment\n"
                "rule a:\n  when x.a == true  # trailing note\n  then nothing\n"
                "\n"
                "rule b:\n  when x.b == true\n  then nothing\n")
        rf = parse(text)
        assert [r.id for r in rf.rules] == ["a", "b"]

    def test_file_print_is_a_fixed_point(self):
        text = ("rule a:\n  when x.a == true\n  then nothing\n\n"
                "rule b:\n  when x.b == true\n  then nothing\n")
        assert print_rule_file(parse(text)) == text

    def test_duplicate_top_level_ids(self):
        text = ("rule a:\n  when x.a == true\n  then nothing\n"
                "rule a:\n  when x.b == true\n  then nothing\n")
        with pytest.raises(ParseError):
            parse(text)

    def test_duplicate_headers(self):
        with pytest.raises(ParseError):
            parse('tick 5\ntick 6\nrule a:\n  when x.a == true\n  then nothing')

    def test_tick_must_be_positive(self):
        for bad in ["tick 0", "tick -5", 'tick "fast"']:
            with pytest.raises(ParseError):
                parse(f"{bad}\nrule a:\n  when x.a == true\n  then nothing")

    def test_parse_rule_requires_exactly_one(self):
        with pytest.raises(ParseError):
            parse_rule("rule a:\n  when x.a == true\n  then nothing\n"
                       "rule b:\n  when x.b == true\n  then nothing")

    def test_fixture_format_is_stable(self):
        # Comments are dropped on the first pass; after that the text is
        # a fixed point of parse-then-print.
        from m3i.scenario import fixture_path
        text = fixture_path("flip_to_mute.m3i").read_text()
        once = print_rule_file(parse(text))
        assert print_rule_file(parse(once)) == once
        assert once in text  # fixture body below the comment is canonical


# -- diagnostics -------------------------------------------------------------

class TestDiagnostics:
    def test_positions_are_one_based(self):
        with pytest.raises(ParseError) as exc:
            parse("rule r:\n  when battery.level > then set ringer = silent")
        diag = exc.value.diagnostics[0]
        assert (diag.line, diag.col) == (2, 24)
        assert "expected a number" in diag.message

    def test_error_on_later_line(self):
        text = ("rule a:\n  when x.a == true\n  then nothing\n\n"
                "rule b:\n  when x.b >> true\n  then nothing\n")
        with pytest.raises(ParseError) as exc:
            parse(text)
        assert (exc.value.diagnostics[0].line, exc.value.diagnostics[0].col) == (6, 13)

    def test_span_points_into_source(self):
        text = "rule r:\n  when battery.level > then nothing"
        with pytest.raises(ParseError) as exc:
            parse(text)
        span = exc.value.diagnostics[0].span
        assert span is not None and 0 <= span[0] < span[1] <= len(text)
        assert text[span[0]:span[1]] == "then"

    @pytest.mark.parametrize("src, needle", [
        ('rule r:\n  when x.a == "unterminated', "string"),
        ("rule r:\n  when x.a matches /unterminated", "regex"),
        ('rule r:\n  when x.a == true\n  then emit c {"k": 1', "JSON"),
        ("rule when:\n  when x.a == true\n  then nothing", "rule id"),
        ("rule r:\n  when x.a == true\n  then explode", "action"),
        ("rule r:\n  when x.a == true\n  then nothing\ngarbage", "rule"),
        ("rule r:\n  when x.a ~ 5\n  then nothing", ""),
    ])
    def test_common_mistakes_have_diagnostics(self, src, needle):
        with pytest.raises(ParseError) as exc:
            parse(src)
        assert exc.value.diagnostics
        if needle:
            assert any(needle.lower() in d.message.lower()
                       for d in exc.value.diagnostics)


# -- static checks against a catalog -----------------------------------------

def deep_rule_text(n: int) -> str:
    action = "nothing"
    for i in range(n - 1, 0, -1):
        action = (f"rule n{i}:\n  when battery.plugged == true\n"
                  f"  then {action}\n  end")
    return f"rule n0:\n  when battery.plugged == true\n  then {action}\n"


class TestCheck:
    def test_clean_file(self):
        rf = parse("rule r:\n  when battery.level < 20.0\n"
                   "  then set ringer = vibrate\n")
        assert check(rf, CATALOG) == []

    def test_unknown_factor(self):
        text = "rule r:\n  when bat.lvl == 1\n  then nothing\n"
        rf = parse(text)
        diags = check(rf, CATALOG, text)
        assert len(diags) == 1
        assert "unknown factor" in diags[0].message
        assert (diags[0].line, diags[0].col) == (2, 8)

    def test_kind_mismatch(self):
        text = "rule r:\n  when light.level matches /dark/\n  then nothing\n"
        diags = check(parse(text), CATALOG, text)
        assert len(diags) == 1 and "not applicable" in diags[0].message

    def test_mismatch_inside_nested_rule(self):
        text = ("rule outer:\n  when battery.plugged == true\n"
                "  then rule inner:\n    when light.level matches /x/\n"
                "    then nothing\n  end\n")
        assert len(check(parse(text), CATALOG, text)) == 1

    def test_depth_limit_at_parse_time(self):
        ok = parse(deep_rule_text(16))
        assert check(ok, CATALOG) == []
        with pytest.raises(ParseError) as exc:
            parse(deep_rule_text(17))
        assert "nested deeper" in str(exc.value)

    def test_depth_limit_on_built_trees(self):
        # Rule trees assembled in code skip the parser; check still flags them.
        from m3i.dsl import RuleFile
        expr = Statement(FactorId("battery", "plugged"), Operator.eq(True))
        rule = Rule("n16", expr, Nothing())
        for i in range(15, -1, -1):
            rule = Rule(f"n{i}", expr, rule)
        diags = check(RuleFile(rules=[rule]), CATALOG)
        assert len(diags) == 1 and "nests deeper" in diags[0].message

    def test_check_text_parse_failure(self):
        rf, diags = check_text("rule r:\n  when x.a ==\n  then nothing", CATALOG)
        assert rf is None and diags

    def test_check_text_clean(self):
        rf, diags = check_text(
            "rule r:\n  when battery.plugged == true\n  then nothing", CATALOG)
        assert rf is not None and diags == []
