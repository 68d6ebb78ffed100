"""Logical-expression trees over statements, with three-valued evaluation.

A statement compares one factor against constants; trees combine statements
with NOT and six binary connectives.  Evaluation follows strong Kleene
semantics: Unknown (from unavailable factors) propagates unless the other
operand already decides the result (False dominates AND, True dominates OR).
With every factor available, this reduces to ordinary boolean logic.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum
from typing import Union

from .context import Catalog, ContextSnapshot, FactorId, UNAVAILABLE
from .values import OpKind, Operator, Truth, Value, apply_operator


class Connective(str, Enum):
    AND = "and"
    OR = "or"
    XOR = "xor"
    NAND = "nand"
    NOR = "nor"
    XNOR = "xnor"


@dataclass(frozen=True)
class Statement:
    """Leaf condition: one factor checked by one operator."""

    factor: FactorId
    op: Operator
    # Source span when parsed from DSL text; ignored by equality so that
    # printed-and-reparsed trees compare structurally equal.
    span: tuple[int, int] | None = field(default=None, compare=False, repr=False)


@dataclass(frozen=True)
class Not:
    child: "Expr"


@dataclass(frozen=True)
class Binary:
    op: Connective
    left: "Expr"
    right: "Expr"


Expr = Union[Statement, Not, Binary]


def eval_statement(stmt: Statement, snap: ContextSnapshot) -> Truth:
    value = snap.lookup(stmt.factor)
    if value is UNAVAILABLE:
        return Truth.UNKNOWN
    return apply_operator(stmt.op, value)


def _xor(a: Truth, b: Truth) -> Truth:
    if Truth.UNKNOWN in (a, b):
        return Truth.UNKNOWN
    return Truth.of(a is not b)


_BINARY_EVAL = {
    Connective.AND: Truth.and_,
    Connective.OR: Truth.or_,
    Connective.XOR: _xor,
    Connective.NAND: lambda a, b: a.and_(b).negate(),
    Connective.NOR: lambda a, b: a.or_(b).negate(),
    Connective.XNOR: lambda a, b: _xor(a, b).negate(),
}


def eval_expression(expr: Expr, snap: ContextSnapshot) -> Truth:
    """Evaluate a tree against one snapshot.

    Strict (both children always evaluated): evaluation is side-effect-free,
    so short-circuiting would be unobservable anyway, and strictness keeps
    Unknown propagation uniform.
    """
    if isinstance(expr, Statement):
        return eval_statement(expr, snap)
    if isinstance(expr, Not):
        return eval_expression(expr.child, snap).negate()
    return _BINARY_EVAL[expr.op](
        eval_expression(expr.left, snap), eval_expression(expr.right, snap)
    )


@dataclass(frozen=True)
class ExprDiagnostic:
    code: str  # "unknown_factor" | "kind_mismatch"
    path: str  # dotted node path from the root, e.g. "left.child"
    message: str
    span: tuple[int, int] | None = None


def validate(expr: Expr, catalog: Catalog) -> list[ExprDiagnostic]:
    """Check every leaf for factor existence and operator admissibility."""
    diags: list[ExprDiagnostic] = []

    def walk(node: Expr, path: str) -> None:
        if isinstance(node, Statement):
            spec = catalog.get(node.factor)
            if spec is None:
                diags.append(ExprDiagnostic(
                    "unknown_factor", path, f"unknown factor {node.factor}", node.span))
            elif not node.op.admits(spec.kind):
                diags.append(ExprDiagnostic(
                    "kind_mismatch", path,
                    f"operator {node.op} not applicable to {spec.kind.value} "
                    f"factor {node.factor}", node.span))
        elif isinstance(node, Not):
            walk(node.child, f"{path}.child" if path else "child")
        else:
            walk(node.left, f"{path}.left" if path else "left")
            walk(node.right, f"{path}.right" if path else "right")

    walk(expr, "")
    return diags


# -- canonical JSON encoding -------------------------------------------------

def expr_to_json(expr: Expr) -> dict:
    if isinstance(expr, Statement):
        node = {"type": "stmt", "factor": str(expr.factor), "op": expr.op.kind.value}
        k = expr.op.kind
        if k in (OpKind.EQ, OpKind.NE, OpKind.GT, OpKind.GE, OpKind.LT, OpKind.LE):
            arg = expr.op.arg
            if arg.kind.value == "geo":
                node["arg"] = {"lat": arg.payload[0], "lon": arg.payload[1]}
            else:
                node["arg"] = arg.payload
        elif k is OpKind.IN_RANGE:
            node["lo"], node["hi"] = expr.op.lo, expr.op.hi
        elif k is OpKind.MATCHES:
            node["pattern"] = expr.op.pattern
        else:
            node["lat"], node["lon"] = expr.op.center
            node["radius"] = expr.op.radius_m
        return node
    if isinstance(expr, Not):
        return {"type": "unary", "op": "not", "child": expr_to_json(expr.child)}
    return {
        "type": "binary",
        "op": expr.op.value,
        "left": expr_to_json(expr.left),
        "right": expr_to_json(expr.right),
    }


def expr_from_json(obj: dict) -> Expr:
    t = obj.get("type")
    if t == "stmt":
        factor = FactorId.parse(obj["factor"])
        kind = OpKind(obj["op"])
        if kind in (OpKind.EQ, OpKind.NE):
            arg = obj["arg"]
            if isinstance(arg, dict):
                arg = Value.of_geo(arg["lat"], arg["lon"])
            op = Operator._scalar(kind, arg)
        elif kind in (OpKind.GT, OpKind.GE, OpKind.LT, OpKind.LE):
            op = Operator._numeric(kind, obj["arg"])
        elif kind is OpKind.IN_RANGE:
            op = Operator.in_range(obj["lo"], obj["hi"])
        elif kind is OpKind.MATCHES:
            op = Operator.matches(obj["pattern"])
        else:
            op = Operator.within(obj["lat"], obj["lon"], obj["radius"])
        return Statement(factor, op)
    if t == "unary":
        return Not(expr_from_json(obj["child"]))
    if t == "binary":
        return Binary(Connective(obj["op"]), expr_from_json(obj["left"]),
                      expr_from_json(obj["right"]))
    raise ValueError(f"not an expression node: {obj!r}")
