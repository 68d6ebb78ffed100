"""Deterministic replay: a context trace in, a tick-by-tick timeline out.

A trace is line-delimited JSON, one event per line with non-decreasing
timestamps.  Replay quantizes event visibility to the tick grid: before
the tick at t = k * interval, every not-yet-ingested event with event
time <= t is ingested in file order, then the engine evaluates.  The
timeline covers t = 0 through the last multiple of the interval at or
past the final event, as line-delimited canonical TickReport JSON.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from importlib import resources
from pathlib import Path
from typing import IO, Iterable

from .canonical import canonical_line
from .context import (
    Catalog,
    ContextRegistry,
    FactorId,
    Mode,
    registry_from_catalog,
    standard_registry,
)
from .dsl import RuleFile
from .engine import Action, CallMethod, Engine, Rule, TickReport
from .errors import KindMismatch, ModeMismatch, OutOfOrder, ParseError, UnknownFactor
from .values import Value

DEFAULT_TICK = 1000


@dataclass(frozen=True)
class TraceEvent:
    t: int
    factor: FactorId
    value: Value

    def to_json(self) -> dict:
        return {"t": self.t, "factor": str(self.factor), "value": self.value.to_json()}


@dataclass
class Trace:
    events: list[TraceEvent]

    @property
    def duration(self) -> int:
        return self.events[-1].t if self.events else 0


def _parse_event(obj: dict, line_no: int) -> TraceEvent:
    if not isinstance(obj, dict):
        raise ParseError(f"line {line_no}: event must be a JSON object")
    for key in ("t", "factor", "value"):
        if key not in obj:
            raise ParseError(f"line {line_no}: event missing {key!r}")
    t = obj["t"]
    if not isinstance(t, int) or isinstance(t, bool) or t < 0:
        raise ParseError(f"line {line_no}: t must be a non-negative integer")
    try:
        factor = FactorId.parse(obj["factor"])
    except (TypeError, ValueError) as exc:
        raise ParseError(f"line {line_no}: {exc}") from None
    try:
        value = Value.from_json(obj["value"])
    except Exception as exc:
        raise ParseError(f"line {line_no}: bad value: {exc}") from None
    return TraceEvent(t, factor, value)


def parse_trace(lines: Iterable[str], catalog: Catalog | None = None) -> Trace:
    """Validate line-delimited event JSON; catalog checks when one is given."""
    events: list[TraceEvent] = []
    prev_t = None
    for line_no, line in enumerate(lines, start=1):
        line = line.strip()
        if not line:
            continue
        try:
            obj = json.loads(line)
        except ValueError as exc:
            raise ParseError(f"line {line_no}: {exc}") from None
        event = _parse_event(obj, line_no)
        if catalog is not None:
            spec = catalog.get(event.factor)
            if spec is None:
                raise UnknownFactor(f"line {line_no}: unknown factor {event.factor}")
            if spec.mode is Mode.PULL:
                raise ModeMismatch(
                    f"line {line_no}: factor {event.factor} is pull mode, "
                    "its values come from providers, not events")
            if event.value.kind is not spec.kind:
                raise KindMismatch(
                    f"line {line_no}: factor {event.factor} takes "
                    f"{spec.kind.value}, got {event.value.kind.value}")
        if prev_t is not None and event.t < prev_t:
            raise OutOfOrder(
                f"line {line_no}: event at t={event.t} after t={prev_t}")
        prev_t = event.t
        events.append(event)
    return Trace(events)


def load_trace(path: str | Path, catalog: Catalog | None = None) -> Trace:
    with open(path, "r", encoding="utf-8") as fh:
        return parse_trace(fh, catalog)


def write_trace(trace: Trace, out: IO[bytes]) -> None:
    for event in trace.events:
        out.write(canonical_line(event.to_json()))


# -- replay ------------------------------------------------------------------

def _call_targets(action: Action | None) -> set[str]:
    if isinstance(action, CallMethod):
        return {action.callback}
    if isinstance(action, Rule):
        return _call_targets(action.then_action) | _call_targets(action.else_action)
    return set()


def build_engine(
    rules: RuleFile | list[Rule],
    tick_interval: int,
    registry: ContextRegistry | None = None,
) -> Engine:
    """An engine with the rules loaded and every call target stubbed.

    Stub callbacks do nothing beyond producing the firing record, which is
    all replay needs; real integrations register their own behaviors first.
    """
    rule_list = rules.rules if isinstance(rules, RuleFile) else rules
    engine = Engine(tick_interval, registry or standard_registry())
    for rule in rule_list:
        for target in _call_targets(rule.then_action) | _call_targets(rule.else_action):
            if not engine.has_callback(target):
                engine.register_callback(target, lambda at: None)
        engine.add_rule(rule)
    return engine


def run(
    rules: RuleFile | list[Rule],
    trace: Trace,
    tick_interval: int = DEFAULT_TICK,
    registry: ContextRegistry | None = None,
) -> list[TickReport]:
    """Replay a trace against the rules on a fresh engine."""
    engine = build_engine(rules, tick_interval, registry)
    reports: list[TickReport] = []
    cursor = 0
    t = 0
    while True:
        while cursor < len(trace.events) and trace.events[cursor].t <= t:
            event = trace.events[cursor]
            engine.registry.ingest_event(event.factor, event.value, event.t)
            cursor += 1
        reports.append(engine.tick(t))
        if t >= trace.duration:
            break
        t += tick_interval
    return reports


def write_timeline(reports: list[TickReport], out: IO[bytes]) -> None:
    for report in reports:
        out.write(canonical_line(report.to_json()))


def timeline_bytes(reports: list[TickReport]) -> bytes:
    return b"".join(canonical_line(report.to_json()) for report in reports)


def read_timeline(path: str | Path) -> list[dict]:
    out = []
    with open(path, "r", encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if line:
                out.append(json.loads(line))
    return out


# -- shipped fixtures --------------------------------------------------------

def fixture_path(name: str) -> Path:
    """Path of a packaged fixture file, e.g. ``fixture_path("flip_to_mute.m3i")``."""
    path = Path(str(resources.files("m3i") / "fixtures" / name))
    if not path.exists():
        raise FileNotFoundError(f"no packaged fixture {name!r}")
    return path


def default_catalog() -> Catalog:
    """The catalog every shipped fixture validates against."""
    return standard_registry().catalog()


def load_catalog(path: str | Path) -> Catalog:
    with open(path, "r", encoding="utf-8") as fh:
        return Catalog.from_json(json.load(fh))


def registry_for(catalog: Catalog | None) -> ContextRegistry:
    """Replay registry: the standard one, or one derived from a catalog file."""
    if catalog is None:
        return standard_registry()
    return registry_from_catalog(catalog)
