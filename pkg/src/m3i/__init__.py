"""Context-driven multimodal rule engine: factors in, device behavior out.

The pieces, bottom to top: tagged values and operators (``values``),
factor registry and snapshots (``context``), three-valued expressions
(``expressions``), device triggers (``triggers``), the edge-triggered
rule engine (``engine``), the rule text format (``dsl``), trace replay
and CLI (``scenario``), and the HTTP service (``service``).
"""

from .values import (
    Operator,
    OpKind,
    Truth,
    Value,
    ValueKind,
    apply_operator,
    haversine_m,
)
from .context import (
    Catalog,
    ClockSource,
    ContextGroupExtension,
    ContextRegistry,
    ContextSnapshot,
    FactorId,
    FactorSpec,
    Mode,
    Pose,
    UNAVAILABLE,
    classify_pose,
    register_extension,
    registry_from_catalog,
    standard_registry,
)
from .expressions import (
    Binary,
    Connective,
    Expr,
    Not,
    Statement,
    eval_expression,
    expr_from_json,
    expr_to_json,
    validate,
)
from .triggers import (
    CallMethod,
    DeviceState,
    EmitMessage,
    Nothing,
    PlaySound,
    Ringer,
    SetSetting,
    TriggerRecord,
    Vibrate,
    fire,
)
from .engine import (
    Engine,
    Rule,
    SimulatedClock,
    TickReport,
    WallClock,
    rule_from_json,
    rule_to_json,
)
from .dsl import Diagnostic, RuleFile, check, parse, parse_rule, print_rule_file
from .scenario import (
    Trace,
    TraceEvent,
    default_catalog,
    fixture_path,
    load_trace,
    run,
)
from .service import ApiService
from . import errors

__version__ = "0.1.0"

__all__ = [
    "ApiService",
    "Binary",
    "CallMethod",
    "Catalog",
    "ClockSource",
    "Connective",
    "ContextGroupExtension",
    "ContextRegistry",
    "ContextSnapshot",
    "DeviceState",
    "Diagnostic",
    "EmitMessage",
    "Engine",
    "Expr",
    "FactorId",
    "FactorSpec",
    "Mode",
    "Not",
    "Nothing",
    "OpKind",
    "Operator",
    "PlaySound",
    "Pose",
    "Ringer",
    "Rule",
    "RuleFile",
    "SetSetting",
    "SimulatedClock",
    "Statement",
    "TickReport",
    "Trace",
    "TraceEvent",
    "TriggerRecord",
    "Truth",
    "UNAVAILABLE",
    "Value",
    "ValueKind",
    "Vibrate",
    "WallClock",
    "apply_operator",
    "check",
    "classify_pose",
    "default_catalog",
    "errors",
    "eval_expression",
    "expr_from_json",
    "expr_to_json",
    "fire",
    "fixture_path",
    "haversine_m",
    "load_trace",
    "parse",
    "parse_rule",
    "print_rule_file",
    "registry_from_catalog",
    "rule_from_json",
    "rule_to_json",
    "run",
    "standard_registry",
    "validate",
]
