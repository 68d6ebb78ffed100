"""Context factors, registries, and per-tick snapshots.

A factor is a named, typed piece of context (battery level, ambient light,
device pose).  Acquisition modes:

* Pull   -- polled synchronously whenever a snapshot is built,
* Push   -- event-delivered; the registry caches the most recent value,
* Pulse  -- event-latched; reads True in exactly one snapshot per event
            (physical button presses and other one-shot interactions).

Snapshots are immutable so every rule in a tick sees one consistent state.
"""

from __future__ import annotations

import logging
import re
import threading
from dataclasses import dataclass, field
from enum import Enum
from types import MappingProxyType
from typing import Any, Callable, Iterable, Mapping

from . import canonical
from .errors import DuplicateFactor, KindMismatch, UnknownFactor
from .values import Value, ValueKind

log = logging.getLogger("m3i.context")

_ID_PART = r"[a-z][a-z0-9_]*"
_ID_RE = re.compile(rf"^{_ID_PART}\.{_ID_PART}$")


@dataclass(frozen=True)
class FactorId:
    """Qualified factor name, rendered ``group.name``."""

    group: str
    name: str

    def __post_init__(self):
        if not _ID_RE.match(str(self)):
            raise ValueError(f"bad factor id {str(self)!r}")

    def __str__(self) -> str:
        return f"{self.group}.{self.name}"

    @staticmethod
    def parse(text: str) -> "FactorId":
        if not _ID_RE.match(text):
            raise ValueError(f"bad factor id {text!r}")
        group, name = text.split(".", 1)
        return FactorId(group, name)


class Mode(str, Enum):
    PULL = "pull"
    PUSH = "push"
    PULSE = "pulse"


@dataclass(frozen=True)
class FactorSpec:
    id: FactorId
    kind: ValueKind
    mode: Mode
    description: str = ""

    def __post_init__(self):
        if self.mode is Mode.PULSE and self.kind is not ValueKind.BOOL:
            raise ValueError(f"pulse factor {self.id} must be bool")

    def to_json(self) -> dict:
        return {
            "id": str(self.id),
            "kind": self.kind.value,
            "mode": self.mode.value,
            "description": self.description,
        }

    @staticmethod
    def from_json(obj: dict) -> "FactorSpec":
        return FactorSpec(
            id=FactorId.parse(obj["id"]),
            kind=ValueKind(obj["kind"]),
            mode=Mode(obj["mode"]),
            description=obj.get("description", ""),
        )


class Unavailable:
    """Marker for a factor with no value yet (or a failed poll)."""

    _instance = None

    def __new__(cls):
        if cls._instance is None:
            cls._instance = super().__new__(cls)
        return cls._instance

    def __repr__(self):
        return "Unavailable"


UNAVAILABLE = Unavailable()


@dataclass(frozen=True)
class SnapshotEntry:
    value: Value | Unavailable
    updated: int | None  # ms; None while unavailable


class ContextSnapshot:
    """Immutable view of every registered factor at one tick."""

    __slots__ = ("tick_time", "_entries")

    def __init__(self, tick_time: int, entries: Mapping[FactorId, SnapshotEntry]):
        self.tick_time = tick_time
        self._entries = MappingProxyType(dict(entries))

    def lookup(self, factor: FactorId) -> Value | Unavailable:
        try:
            return self._entries[factor].value
        except KeyError:
            raise UnknownFactor(f"factor {factor} not registered") from None

    def entry(self, factor: FactorId) -> SnapshotEntry:
        try:
            return self._entries[factor]
        except KeyError:
            raise UnknownFactor(f"factor {factor} not registered") from None

    def factor_ids(self) -> Iterable[FactorId]:
        return self._entries.keys()

    def to_json(self) -> dict:
        entries = {}
        for fid, ent in self._entries.items():
            entries[str(fid)] = {
                "value": None if ent.value is UNAVAILABLE else ent.value.to_json(),
                "updated": ent.updated,
            }
        return {"tick_time": self.tick_time, "entries": entries}

    def digest(self) -> str:
        return canonical.digest(self.to_json())


class Catalog:
    """Factor specs by id; what the DSL checker and the UI consume."""

    def __init__(self, specs: Iterable[FactorSpec]):
        self._specs: dict[FactorId, FactorSpec] = {}
        for spec in specs:
            if spec.id in self._specs:
                raise DuplicateFactor(f"factor {spec.id} listed twice")
            self._specs[spec.id] = spec

    def get(self, factor: FactorId) -> FactorSpec | None:
        return self._specs.get(factor)

    def specs(self) -> list[FactorSpec]:
        return list(self._specs.values())

    def __contains__(self, factor: FactorId) -> bool:
        return factor in self._specs

    def to_json(self) -> list[dict]:
        return [spec.to_json() for spec in self._specs.values()]

    @staticmethod
    def from_json(objs: list[dict]) -> "Catalog":
        return Catalog(FactorSpec.from_json(o) for o in objs)


# One provider signature for all pull factors: called with the tick time,
# returns a raw Python value coerced to the declared kind.
Provider = Callable[[int], Any]


@dataclass
class _PushState:
    value: Value | None = None
    at: int | None = None


@dataclass
class _PulseState:
    latched: bool = False
    event_at: int | None = None
    cleared_at: int | None = None


class ContextRegistry:
    """Holds factor specs, latest-value caches, and pull providers.

    Event ingestion may arrive from any thread; a single lock serializes
    ingests and snapshot builds so a snapshot never sees a torn update.
    """

    def __init__(self):
        self._specs: dict[FactorId, FactorSpec] = {}
        self._providers: dict[FactorId, Provider] = {}
        self._push: dict[FactorId, _PushState] = {}
        self._pulse: dict[FactorId, _PulseState] = {}
        self._last_tick: int | None = None
        self._lock = threading.Lock()

    def register_factor(self, spec: FactorSpec, provider: Provider | None = None) -> FactorId:
        with self._lock:
            if spec.id in self._specs:
                raise DuplicateFactor(f"factor {spec.id} already registered")
            if spec.mode is Mode.PULL and provider is None:
                raise ValueError(f"pull factor {spec.id} needs a provider")
            if spec.mode is not Mode.PULL and provider is not None:
                raise ValueError(f"{spec.mode.value} factor {spec.id} cannot take a provider")
            self._specs[spec.id] = spec
            if provider is not None:
                self._providers[spec.id] = provider
            elif spec.mode is Mode.PUSH:
                self._push[spec.id] = _PushState()
            else:
                self._pulse[spec.id] = _PulseState()
            return spec.id

    def spec(self, factor: FactorId) -> FactorSpec:
        try:
            return self._specs[factor]
        except KeyError:
            raise UnknownFactor(f"factor {factor} not registered") from None

    def catalog(self) -> Catalog:
        return Catalog(self._specs.values())

    def ingest_event(self, factor: FactorId, value: Value, at: int) -> None:
        """Record one push/pulse event; last writer (by event time) wins."""
        with self._lock:
            spec = self.spec(factor)
            if spec.mode is Mode.PULL:
                raise KindMismatch(f"factor {factor} is pull-mode, cannot ingest events")
            if value.kind is not spec.kind:
                raise KindMismatch(
                    f"factor {factor} expects {spec.kind.value}, got {value.kind.value}"
                )
            if spec.mode is Mode.PUSH:
                state = self._push[factor]
                if state.at is None or at >= state.at:
                    state.value, state.at = value, at
            else:
                state = self._pulse[factor]
                if value.payload:  # only a True event latches
                    state.latched = True
                    state.event_at = at

    def build_snapshot(self, tick_time: int) -> ContextSnapshot:
        """Poll pull factors, copy push caches, consume pulse latches."""
        with self._lock:
            if self._last_tick is not None and tick_time < self._last_tick:
                raise ValueError(
                    f"snapshot time {tick_time} before previous tick {self._last_tick}"
                )
            entries: dict[FactorId, SnapshotEntry] = {}
            for fid, spec in self._specs.items():
                if spec.mode is Mode.PULL:
                    entries[fid] = self._poll(fid, spec, tick_time)
                elif spec.mode is Mode.PUSH:
                    state = self._push[fid]
                    if state.value is None:
                        entries[fid] = SnapshotEntry(UNAVAILABLE, None)
                    else:
                        entries[fid] = SnapshotEntry(state.value, state.at)
                else:
                    entries[fid] = self._consume_pulse(fid, tick_time)
            self._last_tick = tick_time
            return ContextSnapshot(tick_time, entries)

    def _poll(self, fid: FactorId, spec: FactorSpec, tick_time: int) -> SnapshotEntry:
        try:
            raw = self._providers[fid](tick_time)
            return SnapshotEntry(Value.of(spec.kind, raw), tick_time)
        except Exception as exc:  # provider failures never abort the tick
            log.warning("poll of %s failed: %s", fid, exc)
            return SnapshotEntry(UNAVAILABLE, None)

    def _consume_pulse(self, fid: FactorId, tick_time: int) -> SnapshotEntry:
        state = self._pulse[fid]
        if state.latched:
            state.latched = False
            state.cleared_at = tick_time
            return SnapshotEntry(Value.of_bool(True), state.event_at)
        if state.event_at is None:
            return SnapshotEntry(UNAVAILABLE, None)
        return SnapshotEntry(Value.of_bool(False), state.cleared_at)


# -- pose classification -----------------------------------------------------

STANDARD_GRAVITY = 9.81


class Pose(str, Enum):
    DISPLAY_UP = "display_up"
    DISPLAY_DOWN = "display_down"
    UPRIGHT = "upright"
    UNDETERMINED = "undetermined"


def classify_pose(ax: float, ay: float, az: float) -> Pose:
    """Classify device pose from one accelerometer reading (m/s^2).

    Device axes: z out of the screen, y toward the top edge.  Readings whose
    magnitude is far from 1 g mean the device is moving, so no pose.
    """
    g = STANDARD_GRAVITY
    mag = (ax * ax + ay * ay + az * az) ** 0.5
    if not (0.5 * g <= mag <= 1.5 * g):
        return Pose.UNDETERMINED
    if az >= 0.8 * g:
        return Pose.DISPLAY_UP
    if az <= -0.8 * g:
        return Pose.DISPLAY_DOWN
    if ay >= 0.8 * g:
        return Pose.UPRIGHT
    return Pose.UNDETERMINED


# -- extension hook ----------------------------------------------------------

@dataclass
class ContextGroupExtension:
    """Adapter for plugging an external context source into a registry.

    ``methods`` maps a method name to its value kind and the fixed parameter
    list handed to ``execute`` on every poll.
    """

    group: str
    methods: dict[str, tuple[ValueKind, list]]
    execute: Callable[[str, list], Any]


def register_extension(registry: ContextRegistry, ext: ContextGroupExtension) -> list[FactorId]:
    """Register every advertised method as a pull factor ``group.method``."""
    ids = []
    for name, (kind, params) in ext.methods.items():
        spec = FactorSpec(FactorId(ext.group, name), kind, Mode.PULL, f"{ext.group} extension")
        bound_params = list(params)

        def provider(tick_time: int, _name=name, _params=bound_params):
            return ext.execute(_name, _params)

        ids.append(registry.register_factor(spec, provider))
    return ids


# -- simulated standard factors ---------------------------------------------

@dataclass(frozen=True)
class ClockSource:
    """Maps tick time (ms since scenario start) to calendar fields.

    The default anchor is midnight on a Monday, which keeps replay output
    independent of when it runs; a live service anchors at its start time.
    """

    start_weekday: int = 0  # Monday
    start_hour: int = 0
    start_minute: int = 0

    @staticmethod
    def from_datetime(dt) -> "ClockSource":
        return ClockSource(start_weekday=dt.weekday(), start_hour=dt.hour, start_minute=dt.minute)

    def _total_minutes(self, tick_time: int) -> int:
        return self.start_minute + tick_time // 60_000

    def weekday(self, tick_time: int) -> int:
        carry_hours = self.start_hour + self._total_minutes(tick_time) // 60
        return (self.start_weekday + carry_hours // 24) % 7

    def hour(self, tick_time: int) -> int:
        return (self.start_hour + self._total_minutes(tick_time) // 60) % 24

    def minute(self, tick_time: int) -> int:
        return self._total_minutes(tick_time) % 60


def standard_registry(clock: ClockSource | None = None) -> ContextRegistry:
    """Registry with the simulated factor set shipped with this package."""
    clock = clock or ClockSource()
    reg = ContextRegistry()

    def push(group, name, kind, desc):
        reg.register_factor(FactorSpec(FactorId(group, name), kind, Mode.PUSH, desc))

    def pulse(group, name, desc):
        reg.register_factor(FactorSpec(FactorId(group, name), ValueKind.BOOL, Mode.PULSE, desc))

    def pull(group, name, kind, desc, provider):
        reg.register_factor(FactorSpec(FactorId(group, name), kind, Mode.PULL, desc), provider)

    push("battery", "level", ValueKind.FLOAT, "battery charge, percent")
    push("battery", "plugged", ValueKind.BOOL, "charger connected")
    push("light", "level", ValueKind.FLOAT, "ambient light, lux")
    push("motion", "accel_x", ValueKind.FLOAT, "acceleration x, m/s^2")
    push("motion", "accel_y", ValueKind.FLOAT, "acceleration y, m/s^2")
    push("motion", "accel_z", ValueKind.FLOAT, "acceleration z, m/s^2")
    push("motion", "pose", ValueKind.TEXT,
         "device pose: display_up, display_down, upright, undetermined")
    push("location", "point", ValueKind.GEO, "device position, WGS84")
    push("audio", "ambient_db", ValueKind.FLOAT, "ambient noise level, dB")
    push("net", "wifi", ValueKind.BOOL, "wifi connection available")
    push("net", "cellular", ValueKind.BOOL, "cellular data available")
    push("proximity", "nfc", ValueKind.BOOL, "nfc tag in range")
    push("proximity", "bluetooth", ValueKind.BOOL, "paired bluetooth device in range")
    push("transport", "mode", ValueKind.TEXT,
         "mode of transportation: still, walking, driving (manually injected)")
    pulse("button", "shutter", "hardware shutter button pressed")
    pulse("button", "volume_up", "volume-up button pressed")
    pulse("touch", "pinch", "pinch gesture on the touchscreen")
    pull("clock", "weekday", ValueKind.INT, "day of week, 0=Monday", clock.weekday)
    pull("clock", "hour", ValueKind.INT, "hour of day, 0-23", clock.hour)
    pull("clock", "minute", ValueKind.INT, "minute of hour, 0-59", clock.minute)
    pull("clock", "ms", ValueKind.INT, "ms since scenario start", lambda t: t)
    return reg


def registry_from_catalog(catalog: Catalog, clock: ClockSource | None = None) -> ContextRegistry:
    """Build a registry for an arbitrary catalog file.

    Clock-group pull factors get the simulated clock providers; any other
    pull factor polls as Unavailable (there is nothing to back it with).
    """
    clock = clock or ClockSource()
    clock_providers: dict[str, Provider] = {
        "weekday": clock.weekday,
        "hour": clock.hour,
        "minute": clock.minute,
        "ms": lambda t: t,
    }
    reg = ContextRegistry()
    for spec in catalog.specs():
        if spec.mode is Mode.PULL:
            provider = None
            if spec.id.group == "clock":
                provider = clock_providers.get(spec.id.name)
            if provider is None:
                def provider(tick_time, _fid=spec.id):
                    raise LookupError(f"no backing source for pull factor {_fid}")
            reg.register_factor(spec, provider)
        else:
            reg.register_factor(spec)
    return reg
