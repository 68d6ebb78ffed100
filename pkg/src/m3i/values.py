"""Scalar values, comparison operators, and three-valued truth.

Values are tagged scalars (bool / float / int / text / geo point) that flow
from context factors into rule conditions.  Operators compare one value
against constant thresholds and yield a Truth.  Truth is three-valued:
Unknown marks conditions over factors that have not delivered a value yet.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass
from enum import Enum
from functools import lru_cache
from typing import Any

from .errors import NonFiniteValue, TypeMismatch

EARTH_RADIUS_M = 6_371_000.0


class ValueKind(str, Enum):
    BOOL = "bool"
    FLOAT = "float"
    INT = "int"
    TEXT = "text"
    GEO = "geo"


_NUMERIC = (ValueKind.FLOAT, ValueKind.INT)


def _require_finite(x: float) -> float:
    x = float(x)
    if not math.isfinite(x):
        raise NonFiniteValue(f"non-finite number {x!r} not admitted")
    return x


@dataclass(frozen=True)
class Value:
    """A tagged scalar; the payload type always matches the kind tag."""

    kind: ValueKind
    payload: Any

    @staticmethod
    def of_bool(b: bool) -> "Value":
        return Value(ValueKind.BOOL, bool(b))

    @staticmethod
    def of_float(x: float) -> "Value":
        return Value(ValueKind.FLOAT, _require_finite(x))

    @staticmethod
    def of_int(n: int) -> "Value":
        return Value(ValueKind.INT, int(n))

    @staticmethod
    def of_text(s: str) -> "Value":
        return Value(ValueKind.TEXT, str(s))

    @staticmethod
    def of_geo(lat: float, lon: float) -> "Value":
        return Value(ValueKind.GEO, (_require_finite(lat), _require_finite(lon)))

    @staticmethod
    def of(kind: ValueKind, raw: Any) -> "Value":
        """Coerce a plain Python value into a Value of the declared kind."""
        if kind is ValueKind.BOOL:
            if not isinstance(raw, bool):
                raise TypeMismatch(f"expected bool, got {type(raw).__name__}")
            return Value.of_bool(raw)
        if kind is ValueKind.FLOAT:
            if isinstance(raw, bool) or not isinstance(raw, (int, float)):
                raise TypeMismatch(f"expected number, got {type(raw).__name__}")
            return Value.of_float(raw)
        if kind is ValueKind.INT:
            if isinstance(raw, bool) or not isinstance(raw, int):
                raise TypeMismatch(f"expected integer, got {type(raw).__name__}")
            return Value.of_int(raw)
        if kind is ValueKind.TEXT:
            if not isinstance(raw, str):
                raise TypeMismatch(f"expected string, got {type(raw).__name__}")
            return Value.of_text(raw)
        if kind is ValueKind.GEO:
            if (
                isinstance(raw, (tuple, list))
                and len(raw) == 2
                and all(isinstance(c, (int, float)) and not isinstance(c, bool) for c in raw)
            ):
                return Value.of_geo(raw[0], raw[1])
            raise TypeMismatch(f"expected (lat, lon) pair, got {raw!r}")
        raise TypeMismatch(f"unknown value kind {kind!r}")

    def to_json(self) -> dict:
        if self.kind is ValueKind.GEO:
            lat, lon = self.payload
            return {"kind": "geo", "lat": lat, "lon": lon}
        return {"kind": self.kind.value, "value": self.payload}

    @staticmethod
    def from_json(obj: dict) -> "Value":
        if not isinstance(obj, dict) or "kind" not in obj:
            raise TypeMismatch(f"not a value object: {obj!r}")
        kind = ValueKind(obj["kind"])
        if kind is ValueKind.GEO:
            return Value.of_geo(obj["lat"], obj["lon"])
        return Value.of(kind, obj["value"])

    def __str__(self) -> str:
        if self.kind is ValueKind.GEO:
            return f"({self.payload[0]}, {self.payload[1]})"
        return str(self.payload)


class Truth(Enum):
    """Three-valued truth: Unknown stands for not-yet-available context."""

    TRUE = "true"
    FALSE = "false"
    UNKNOWN = "unknown"

    @staticmethod
    def of(b: bool) -> "Truth":
        return Truth.TRUE if b else Truth.FALSE

    def negate(self) -> "Truth":
        if self is Truth.UNKNOWN:
            return Truth.UNKNOWN
        return Truth.of(self is Truth.FALSE)

    def and_(self, other: "Truth") -> "Truth":
        # False dominates conjunction.
        if Truth.FALSE in (self, other):
            return Truth.FALSE
        if Truth.UNKNOWN in (self, other):
            return Truth.UNKNOWN
        return Truth.TRUE

    def or_(self, other: "Truth") -> "Truth":
        # True dominates disjunction.
        if Truth.TRUE in (self, other):
            return Truth.TRUE
        if Truth.UNKNOWN in (self, other):
            return Truth.UNKNOWN
        return Truth.FALSE


class OpKind(str, Enum):
    EQ = "eq"
    NE = "ne"
    GT = "gt"
    GE = "ge"
    LT = "lt"
    LE = "le"
    IN_RANGE = "in_range"
    MATCHES = "matches"
    WITHIN = "within"


#: Pattern features admitted in match operators: literals, ``.``, ``*``, ``+``,
#: ``?``, character classes, alternation, grouping, and the ``^``/``$`` anchors.
#: ``/`` is deliberately not escapable: a slash in a pattern is always written
#: bare, which keeps the rule-language ``/.../`` literal syntax reversible.
_ESCAPABLE = set("\\.*+?[]|()^$")


def check_regex_subset(pattern: str) -> None:
    """Reject patterns outside the conservative regex subset.

    Raises ValueError so rule loaders can turn the problem into a diagnostic.
    """
    i, depth = 0, 0
    while i < len(pattern):
        c = pattern[i]
        if c == "\\":
            if i + 1 >= len(pattern):
                raise ValueError("dangling escape at end of pattern")
            if pattern[i + 1] not in _ESCAPABLE:
                raise ValueError(f"escape \\{pattern[i + 1]} outside the supported subset")
            i += 2
            continue
        if c == "[":
            j = i + 1
            if j < len(pattern) and pattern[j] == "^":
                j += 1
            if j < len(pattern) and pattern[j] == "]":
                j += 1
            while j < len(pattern) and pattern[j] != "]":
                if pattern[j] == "\\":
                    if j + 1 >= len(pattern):
                        raise ValueError("dangling escape at end of pattern")
                    if pattern[j + 1] not in _ESCAPABLE:
                        raise ValueError(
                            f"escape \\{pattern[j + 1]} outside the supported subset")
                    j += 2
                else:
                    j += 1
            if j >= len(pattern):
                raise ValueError("unterminated character class")
            i = j + 1
            continue
        if c == "(":
            if i + 1 < len(pattern) and pattern[i + 1] == "?":
                raise ValueError("extended (?...) group syntax outside the supported subset")
            depth += 1
        elif c == ")":
            depth -= 1
            if depth < 0:
                raise ValueError("unbalanced group")
        i += 1
    if depth != 0:
        raise ValueError("unbalanced group")
    try:
        re.compile(pattern)
    except re.error as exc:
        raise ValueError(f"invalid pattern: {exc}") from exc


@lru_cache(maxsize=256)
def _compiled(pattern: str) -> "re.Pattern[str]":
    return re.compile(pattern)


@dataclass(frozen=True)
class Operator:
    """A comparison against constant operands.

    Exactly one of the operand groups is populated, depending on ``kind``:
    ``arg`` for the six scalar comparisons, ``lo``/``hi`` for range tests,
    ``pattern`` for regex matches, ``center``/``radius_m`` for geo tests.
    """

    kind: OpKind
    arg: Value | None = None
    lo: float | None = None
    hi: float | None = None
    pattern: str | None = None
    center: tuple[float, float] | None = None
    radius_m: float | None = None

    # -- constructors -------------------------------------------------------

    @staticmethod
    def _scalar(kind: OpKind, threshold: Any) -> "Operator":
        if not isinstance(threshold, Value):
            if isinstance(threshold, bool):
                threshold = Value.of_bool(threshold)
            elif isinstance(threshold, int):
                threshold = Value.of_int(threshold)
            elif isinstance(threshold, float):
                threshold = Value.of_float(threshold)
            elif isinstance(threshold, str):
                threshold = Value.of_text(threshold)
            elif isinstance(threshold, tuple) and len(threshold) == 2:
                threshold = Value.of_geo(*threshold)
            else:
                raise TypeMismatch(f"cannot use {threshold!r} as a threshold")
        return Operator(kind, arg=threshold)

    @staticmethod
    def eq(threshold: Any) -> "Operator":
        return Operator._scalar(OpKind.EQ, threshold)

    @staticmethod
    def ne(threshold: Any) -> "Operator":
        return Operator._scalar(OpKind.NE, threshold)

    @staticmethod
    def gt(threshold: float) -> "Operator":
        return Operator._numeric(OpKind.GT, threshold)

    @staticmethod
    def ge(threshold: float) -> "Operator":
        return Operator._numeric(OpKind.GE, threshold)

    @staticmethod
    def lt(threshold: float) -> "Operator":
        return Operator._numeric(OpKind.LT, threshold)

    @staticmethod
    def le(threshold: float) -> "Operator":
        return Operator._numeric(OpKind.LE, threshold)

    @staticmethod
    def _numeric(kind: OpKind, threshold: Any) -> "Operator":
        op = Operator._scalar(kind, threshold)
        if op.arg.kind not in _NUMERIC:
            raise TypeMismatch(f"{kind.value} needs a numeric threshold, got {op.arg.kind.value}")
        return op

    @staticmethod
    def in_range(lo: float, hi: float) -> "Operator":
        lo, hi = _require_finite(lo), _require_finite(hi)
        if lo > hi:
            raise ValueError(f"range lower bound {lo} above upper bound {hi}")
        return Operator(OpKind.IN_RANGE, lo=lo, hi=hi)

    @staticmethod
    def matches(pattern: str) -> "Operator":
        check_regex_subset(pattern)
        return Operator(OpKind.MATCHES, pattern=pattern)

    @staticmethod
    def within(lat: float, lon: float, radius_m: float) -> "Operator":
        radius_m = _require_finite(radius_m)
        if radius_m < 0:
            raise ValueError(f"negative radius {radius_m}")
        return Operator(
            OpKind.WITHIN,
            center=(_require_finite(lat), _require_finite(lon)),
            radius_m=radius_m,
        )

    # -- admissibility ------------------------------------------------------

    def admits(self, kind: ValueKind) -> bool:
        """Whether this operator can be applied to values of ``kind``."""
        if self.kind in (OpKind.EQ, OpKind.NE):
            if self.arg.kind in _NUMERIC:
                return kind in _NUMERIC
            return kind is self.arg.kind
        if self.kind in (OpKind.GT, OpKind.GE, OpKind.LT, OpKind.LE, OpKind.IN_RANGE):
            return kind in _NUMERIC
        if self.kind is OpKind.MATCHES:
            return kind is ValueKind.TEXT
        if self.kind is OpKind.WITHIN:
            return kind is ValueKind.GEO
        return False

    def __str__(self) -> str:
        k = self.kind
        if k in (OpKind.EQ, OpKind.NE, OpKind.GT, OpKind.GE, OpKind.LT, OpKind.LE):
            sym = {"eq": "==", "ne": "!=", "gt": ">", "ge": ">=", "lt": "<", "le": "<="}[k.value]
            return f"{sym} {self.arg}"
        if k is OpKind.IN_RANGE:
            return f"in [{self.lo}, {self.hi}]"
        if k is OpKind.MATCHES:
            return f"matches /{self.pattern}/"
        return f"within {self.radius_m} of {self.center}"


def haversine_m(lat1: float, lon1: float, lat2: float, lon2: float) -> float:
    """Great-circle distance in meters on a 6371 km sphere."""
    p1, p2 = math.radians(lat1), math.radians(lat2)
    dp, dl = math.radians(lat2 - lat1), math.radians(lon2 - lon1)
    a = math.sin(dp / 2) ** 2 + math.cos(p1) * math.cos(p2) * math.sin(dl / 2) ** 2
    return 2 * EARTH_RADIUS_M * math.asin(min(1.0, math.sqrt(a)))


def apply_operator(op: Operator, v: Value) -> Truth:
    """Apply one comparison operator to one concrete value.

    Callers map unavailable factors to Unknown before this point, so the
    result here is always a definite True or False.
    """
    if not op.admits(v.kind):
        raise TypeMismatch(f"operator {op} not applicable to {v.kind.value} value")
    k = op.kind
    if k is OpKind.EQ:
        return Truth.of(_payload_eq(v, op.arg))
    if k is OpKind.NE:
        return Truth.of(not _payload_eq(v, op.arg))
    if k in (OpKind.GT, OpKind.GE, OpKind.LT, OpKind.LE):
        a, b = v.payload, op.arg.payload
        if k is OpKind.GT:
            return Truth.of(a > b)
        if k is OpKind.GE:
            return Truth.of(a >= b)
        if k is OpKind.LT:
            return Truth.of(a < b)
        return Truth.of(a <= b)
    if k is OpKind.IN_RANGE:
        return Truth.of(op.lo <= v.payload <= op.hi)  # inclusive on both ends
    if k is OpKind.MATCHES:
        return Truth.of(_compiled(op.pattern).search(v.payload) is not None)
    # WITHIN
    lat, lon = v.payload
    clat, clon = op.center
    return Truth.of(haversine_m(lat, lon, clat, clon) <= op.radius_m)


def _payload_eq(a: Value, b: Value) -> bool:
    if a.kind in _NUMERIC and b.kind in _NUMERIC:
        return a.payload == b.payload
    return a.kind is b.kind and a.payload == b.payload
