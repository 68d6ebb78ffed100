"""Rules, edge-triggered evaluation, revert stacks, and the tick scheduler.

A rule pairs a logical expression with a then-action and an optional
else-action; actions are triggers or nested rules.  Firing is edge
triggered: the then-branch activates when the expression turns True, and
deactivates (popping its setting entries, then firing the else-branch
once) when it turns back False.  Unknown never changes activation.

Every settable device field has a revert stack over a baseline: the top
entry is the effective value, and deactivating a rule removes its entries
wherever they sit, restoring whatever was underneath.  Manual overrides
are ordinary stack entries sourced by "manual"; later rule activations
stack above them, and only another override or an explicit clear removes
them.
"""

from __future__ import annotations

import logging
import threading
import time
from dataclasses import dataclass, field
from typing import Any, Callable, Union

from .context import ContextRegistry, ContextSnapshot
from .errors import (
    AlreadyRunning,
    DuplicateCallback,
    DuplicateRule,
    InvalidRule,
    MaxDepthExceeded,
    NotRunning,
    UnknownCallback,
    UnknownRule,
)
from .expressions import Expr, eval_expression, expr_from_json, expr_to_json, validate
from .triggers import (
    SETTABLE,
    CallMethod,
    DeviceState,
    EmitMessage,
    Nothing,
    PlaySound,
    SetSetting,
    Trigger,
    TriggerRecord,
    Vibrate,
    check_setting,
    fire,
    setting_value_to_json,
)
from .values import Truth

log = logging.getLogger("m3i.engine")

MANUAL_SOURCE = "manual"
DEFAULT_MAX_DEPTH = 16


@dataclass
class Rule:
    """Condition plus then/else actions; actions may recursively be rules."""

    id: str
    expression: Expr
    then_action: "Action"
    else_action: "Action | None" = None
    enabled: bool = True


Action = Union[Trigger, Rule]


# -- activation bookkeeping --------------------------------------------------

_NEVER, _THEN, _ELSE = "never", "then", "else"


class RevertStacks:
    """Per-setting stacks of (source, value) entries over a device baseline."""

    def __init__(self, device: DeviceState):
        self._device = device
        self._baseline = {s: getattr(device, s) for s in SETTABLE}
        self._stacks: dict[str, list[tuple[str, Any]]] = {s: [] for s in SETTABLE}

    def baseline(self, setting: str) -> Any:
        return self._baseline[setting]

    def effective(self, setting: str) -> Any:
        stack = self._stacks[setting]
        return stack[-1][1] if stack else self._baseline[setting]

    def entries(self, setting: str) -> list[tuple[str, Any]]:
        return list(self._stacks[setting])

    def _apply(self, setting: str) -> tuple[Any, Any]:
        before = getattr(self._device, setting)
        after = self.effective(setting)
        setattr(self._device, setting, after)
        return before, after

    def push(self, setting: str, source: str, value: Any) -> tuple[Any, Any]:
        stack = self._stacks[setting]
        # A source holds at most one entry per setting.
        stack[:] = [e for e in stack if e[0] != source]
        stack.append((source, value))
        return self._apply(setting)

    def remove_source(self, source: str) -> list[tuple[str, Any, Any]]:
        """Drop every entry of ``source``; returns (setting, before, after) per pop."""
        changes = []
        for setting, stack in self._stacks.items():
            kept = [e for e in stack if e[0] != source]
            if len(kept) != len(stack):
                stack[:] = kept
                before, after = self._apply(setting)
                changes.append((setting, before, after))
        return changes

    def set_manual(self, setting: str, value: Any) -> tuple[Any, Any]:
        stack = self._stacks[setting]
        stack[:] = [e for e in stack if e[0] != MANUAL_SOURCE]
        stack.append((MANUAL_SOURCE, value))
        return self._apply(setting)

    def clear_manual(self, setting: str) -> tuple[Any, Any]:
        stack = self._stacks[setting]
        stack[:] = [e for e in stack if e[0] != MANUAL_SOURCE]
        return self._apply(setting)

    def manual_value(self, setting: str) -> Any | None:
        for source, value in self._stacks[setting]:
            if source == MANUAL_SOURCE:
                return value
        return None


@dataclass
class TickReport:
    """One evaluation pass: what was seen, what fired, where the device ended."""

    tick_time: int
    snapshot_digest: str
    rules: dict[str, Truth]
    firings: list[TriggerRecord]
    device: dict

    def to_json(self) -> dict:
        return {
            "tick_time": self.tick_time,
            "snapshot": self.snapshot_digest,
            "rules": {rid: truth.value for rid, truth in self.rules.items()},
            "firings": [rec.to_json() for rec in self.firings],
            "device": self.device,
        }


# -- clocks ------------------------------------------------------------------

class SimulatedClock:
    """Manually advanced clock for replay and stepped simulation."""

    def __init__(self, start: int = 0):
        self._now = start

    def now(self) -> int:
        return self._now

    def advance(self, ms: int) -> None:
        if ms < 0:
            raise ValueError("clock cannot go backwards")
        self._now += ms


class WallClock:
    """Monotonic wall time in ms, offset so it continues a simulated run."""

    def __init__(self, offset_ms: int = 0):
        self._t0 = time.monotonic()
        self._offset = offset_ms

    def now(self) -> int:
        return self._offset + int((time.monotonic() - self._t0) * 1000)


class Engine:
    """Evaluates rules against context snapshots on a tick schedule.

    One logical evaluator owns rules, stacks, device, and activation state;
    a single lock makes external rule CRUD and overrides land between
    ticks, never mid-tick.
    """

    def __init__(
        self,
        tick_interval: int,
        registry: ContextRegistry,
        device: DeviceState | None = None,
        clock: SimulatedClock | WallClock | None = None,
        max_depth: int = DEFAULT_MAX_DEPTH,
    ):
        if tick_interval <= 0:
            raise ValueError("tick interval must be positive")
        self.tick_interval = tick_interval
        self.registry = registry
        self.device = device or DeviceState()
        self.clock = clock if clock is not None else SimulatedClock()
        self.max_depth = max_depth
        self.stacks = RevertStacks(self.device)
        self._rules: list[Rule] = []
        self._index: dict[str, Rule] = {}  # every node id, nested included
        self._branch: dict[str, str] = {}
        self._callbacks: dict[str, Callable[[int], None]] = {}
        self._subscribers: list[Callable[[TickReport], None]] = []
        self._last_tick_time: int | None = None
        self.last_report: TickReport | None = None
        self._running = False
        self._next_due: int | None = None
        self._thread: threading.Thread | None = None
        self._stop_evt = threading.Event()
        self._lock = threading.RLock()

    # -- rule management -----------------------------------------------------

    @staticmethod
    def _walk_nodes(rule: Rule, depth: int = 1):
        """Yield (rule, depth) for the rule and every nested descendant."""
        yield rule, depth
        for action in (rule.then_action, rule.else_action):
            if isinstance(action, Rule):
                yield from Engine._walk_nodes(action, depth + 1)

    def add_rule(self, rule: Rule) -> None:
        with self._lock:
            catalog = self.registry.catalog()
            nodes = []
            for node, depth in self._walk_nodes(rule):
                if depth > self.max_depth:
                    raise MaxDepthExceeded(
                        f"rule {rule.id} nests deeper than {self.max_depth}")
                if node.id in self._index or any(n.id == node.id for n, _ in nodes):
                    raise DuplicateRule(f"rule id {node.id!r} already in use")
                nodes.append((node, depth))
            diags = []
            for node, _ in nodes:
                diags.extend(validate(node.expression, catalog))
            if diags:
                raise InvalidRule(
                    f"rule {rule.id} failed validation: " +
                    "; ".join(d.message for d in diags), diags)
            self._rules.append(rule)
            for node, _ in nodes:
                self._index[node.id] = node

    def remove_rule(self, rule_id: str) -> None:
        with self._lock:
            rule = self._index.get(rule_id)
            if rule is None or all(r.id != rule_id for r in self._rules):
                raise UnknownRule(f"no top-level rule {rule_id!r}")
            self._deactivate_rule(rule, at=self._last_tick_time or 0, report=None)
            self._rules.remove(rule)
            for node, _ in self._walk_nodes(rule):
                self._index.pop(node.id, None)
                self._branch.pop(node.id, None)

    def set_enabled(self, rule_id: str, enabled: bool) -> None:
        with self._lock:
            rule = self._index.get(rule_id)
            if rule is None:
                raise UnknownRule(f"no rule {rule_id!r}")
            if rule.enabled and not enabled:
                # Disabling behaves like removal for activation purposes.
                self._deactivate_rule(rule, at=self._last_tick_time or 0, report=None)
            rule.enabled = enabled

    def rules(self) -> list[Rule]:
        with self._lock:
            return list(self._rules)

    def get_rule(self, rule_id: str) -> Rule:
        with self._lock:
            rule = self._index.get(rule_id)
            if rule is None:
                raise UnknownRule(f"no rule {rule_id!r}")
            return rule

    def register_callback(self, callback_id: str, behavior: Callable[[int], None]) -> None:
        with self._lock:
            if callback_id in self._callbacks:
                raise DuplicateCallback(f"callback {callback_id!r} already registered")
            self._callbacks[callback_id] = behavior

    def has_callback(self, callback_id: str) -> bool:
        return callback_id in self._callbacks

    # -- overrides -----------------------------------------------------------

    def manual_override(self, setting: str, value: Any) -> None:
        with self._lock:
            value = check_setting(setting, value)
            self.stacks.set_manual(setting, value)

    def clear_override(self, setting: str) -> None:
        with self._lock:
            if setting not in SETTABLE:
                raise ValueError(f"unknown setting {setting!r}")
            self.stacks.clear_manual(setting)

    def manual_overrides(self) -> dict[str, Any]:
        with self._lock:
            out = {}
            for setting in SETTABLE:
                value = self.stacks.manual_value(setting)
                if value is not None:
                    out[setting] = setting_value_to_json(value)
            return out

    # -- evaluation ----------------------------------------------------------

    def tick(self, now: int) -> TickReport:
        """Build a snapshot, evaluate all rules in order, publish the report."""
        with self._lock:
            if self._last_tick_time is not None and now < self._last_tick_time:
                raise ValueError(f"tick time {now} before previous {self._last_tick_time}")
            snap = self.registry.build_snapshot(now)
            report = TickReport(now, snap.digest(), {}, [], {})
            for rule in self._rules:
                if rule.enabled:
                    self._eval_rule(rule, snap, report, depth=1)
            report.device = self.device.to_json()
            self._last_tick_time = now
            self.last_report = report
            # Notify under the lock so subscribers see reports in tick order;
            # subscribers must not block (the service hands off to queues).
            for callback in list(self._subscribers):
                callback(report)
        return report

    def _eval_rule(self, rule: Rule, snap: ContextSnapshot, report: TickReport,
                   depth: int) -> None:
        if depth > self.max_depth:
            raise MaxDepthExceeded(f"evaluation of {rule.id} exceeded depth {self.max_depth}")
        truth = eval_expression(rule.expression, snap)
        report.rules[rule.id] = truth
        state = self._branch.get(rule.id, _NEVER)
        at = snap.tick_time
        if truth is Truth.TRUE and state != _THEN:
            if state == _ELSE:
                self._deactivate_action(rule.else_action, f"{rule.id}/else", at, report)
            self._branch[rule.id] = _THEN
            self._activate_action(rule.then_action, f"{rule.id}/then", at, report)
        elif truth is Truth.FALSE and state == _THEN:
            self._deactivate_action(rule.then_action, f"{rule.id}/then", at, report)
            self._branch[rule.id] = _ELSE
            self._activate_action(rule.else_action, f"{rule.id}/else", at, report)
        # Unknown: no state change, nothing fires.

        # Level semantics for composition: the selected branch's nested rule
        # is evaluated every tick; edges apply at trigger leaves only.
        state = self._branch.get(rule.id, _NEVER)
        selected = rule.then_action if state == _THEN else (
            rule.else_action if state == _ELSE else None)
        if isinstance(selected, Rule) and selected.enabled:
            self._eval_rule(selected, snap, report, depth + 1)

    def _activate_action(self, action: Action | None, node_id: str, at: int,
                         report: TickReport) -> None:
        if action is None or isinstance(action, Rule):
            # Nested rules start fresh; their own evaluation happens on the
            # selection path, not here.
            return
        try:
            record = fire(action, self.device, at, node_id,
                          stacks=self.stacks, callbacks=self._callbacks)
        except UnknownCallback as exc:
            log.warning("%s: %s", node_id, exc)
            return
        report.firings.append(record)

    def _deactivate_action(self, action: Action | None, node_id: str, at: int,
                           report: TickReport | None) -> None:
        if isinstance(action, Rule):
            self._deactivate_rule(action, at, report)
            return
        if isinstance(action, SetSetting):
            for setting, before, after in self.stacks.remove_source(node_id):
                if report is not None:
                    diff = {}
                    if before != after:
                        diff[setting] = setting_value_to_json(after)
                    report.firings.append(
                        TriggerRecord(at, f"revert {setting}", node_id, diff))

    def _deactivate_rule(self, rule: Rule, at: int, report: TickReport | None) -> None:
        """Deactivate a whole subtree: pop its entries, reset its states."""
        self._deactivate_action(rule.then_action, f"{rule.id}/then", at, report)
        self._deactivate_action(rule.else_action, f"{rule.id}/else", at, report)
        self._branch[rule.id] = _NEVER

    # -- scheduling ----------------------------------------------------------

    def subscribe(self, callback: Callable[[TickReport], None]) -> None:
        with self._lock:
            self._subscribers.append(callback)

    def unsubscribe(self, callback: Callable[[TickReport], None]) -> None:
        with self._lock:
            if callback in self._subscribers:
                self._subscribers.remove(callback)

    @property
    def running(self) -> bool:
        return self._running

    def start(self) -> None:
        """Begin periodic ticking on the configured clock, first tick now."""
        with self._lock:
            if self._running:
                raise AlreadyRunning("engine already started")
            self._running = True
            anchor = self.clock.now()
            self._next_due = anchor + self.tick_interval
        self.tick(anchor)
        if isinstance(self.clock, WallClock):
            self._stop_evt.clear()
            self._thread = threading.Thread(target=self._run_wall, daemon=True)
            self._thread.start()

    def stop(self) -> None:
        with self._lock:
            if not self._running:
                raise NotRunning("engine not started")
            self._running = False
        self._stop_evt.set()
        if self._thread is not None:
            self._thread.join(timeout=5)
            self._thread = None

    def advance(self, ms: int) -> list[TickReport]:
        """Advance a simulated clock, running every tick that comes due."""
        if not isinstance(self.clock, SimulatedClock):
            raise ValueError("advance() only applies to a simulated clock")
        self.clock.advance(ms)
        reports = []
        while self._running and self._next_due is not None \
                and self._next_due <= self.clock.now():
            due = self._next_due
            self._next_due = due + self.tick_interval
            reports.append(self.tick(due))
        return reports

    def _run_wall(self) -> None:
        # Absolute schedule (anchor + k * interval): no cumulative drift.
        while True:
            with self._lock:
                if not self._running:
                    return
                due = self._next_due
            delay = (due - self.clock.now()) / 1000.0
            if delay > 0 and self._stop_evt.wait(delay):
                return
            with self._lock:
                if not self._running:
                    return
                self._next_due = due + self.tick_interval
            # Nominal due time, even when the thread woke late: report
            # timestamps stay on the anchor + k * interval grid.
            self.tick(due)


# -- rule JSON encoding ------------------------------------------------------

def action_to_json(action: Action | None) -> dict | None:
    if action is None:
        return None
    if isinstance(action, Rule):
        return rule_to_json(action)
    if isinstance(action, SetSetting):
        return {"type": "set", "setting": action.setting,
                "value": setting_value_to_json(action.value)}
    if isinstance(action, PlaySound):
        return {"type": "play", "sound": action.sound}
    if isinstance(action, Vibrate):
        return {"type": "vibrate", "pattern": list(action.pattern)}
    if isinstance(action, EmitMessage):
        return {"type": "emit", "channel": action.channel, "payload": action.payload}
    if isinstance(action, CallMethod):
        return {"type": "call", "callback": action.callback}
    if isinstance(action, Nothing):
        return {"type": "nothing"}
    raise TypeError(f"not an action: {action!r}")


def rule_to_json(rule: Rule) -> dict:
    return {
        "type": "rule",
        "id": rule.id,
        "when": expr_to_json(rule.expression),
        "then": action_to_json(rule.then_action),
        "else": action_to_json(rule.else_action),
        "enabled": rule.enabled,
    }


def action_from_json(obj: dict | None) -> Action | None:
    if obj is None:
        return None
    t = obj.get("type")
    if t == "rule":
        return rule_from_json(obj)
    if t == "set":
        return SetSetting(obj["setting"], obj["value"])
    if t == "play":
        return PlaySound(obj["sound"])
    if t == "vibrate":
        return Vibrate(tuple(obj["pattern"]))
    if t == "emit":
        return EmitMessage(obj["channel"], obj["payload"])
    if t == "call":
        return CallMethod(obj["callback"])
    if t == "nothing":
        return Nothing()
    raise ValueError(f"not an action node: {obj!r}")


def rule_from_json(obj: dict) -> Rule:
    if obj.get("type") != "rule":
        raise ValueError(f"not a rule node: {obj!r}")
    then_action = action_from_json(obj["then"])
    if then_action is None:
        raise ValueError(f"rule {obj.get('id')!r} has no then-action")
    return Rule(
        id=obj["id"],
        expression=expr_from_json(obj["when"]),
        then_action=then_action,
        else_action=action_from_json(obj.get("else")),
        enabled=bool(obj.get("enabled", True)),
    )
