"""Output side: triggers that act on a simulated device.

Setting triggers are reversible (they go through the engine's revert
stacks); sound, vibration, message, and method triggers are one-shot
effects that only leave records.  Nothing is the explicit no-op so an
omitted action can still be modeled in a rule.

Effects are recorded, not performed: no audio plays, no radio toggles.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from enum import Enum
from typing import Any, Callable, Union

from .errors import UnknownCallback


class Ringer(str, Enum):
    NORMAL = "normal"
    VIBRATE = "vibrate"
    SILENT = "silent"


@dataclass
class DeviceState:
    """Simulated phone settings plus one-shot effect logs."""

    ringer: Ringer = Ringer.NORMAL
    vibrating: bool = False
    screen_brightness: float = 0.8
    notification_led: bool = False
    wifi_enabled: bool = True
    sync_enabled: bool = True
    screen_locked: bool = False
    last_sound_played: str | None = None
    emitted_messages: list = field(default_factory=list)  # [t, channel, payload]

    def to_json(self) -> dict:
        return {
            "ringer": self.ringer.value,
            "vibrating": self.vibrating,
            "screen_brightness": self.screen_brightness,
            "notification_led": self.notification_led,
            "wifi_enabled": self.wifi_enabled,
            "sync_enabled": self.sync_enabled,
            "screen_locked": self.screen_locked,
            "last_sound_played": self.last_sound_played,
            "emitted_messages": [list(m) for m in self.emitted_messages],
        }

    def copy(self) -> "DeviceState":
        return replace(self, emitted_messages=list(self.emitted_messages))


#: Settable fields, their value types, and encoders for setting JSON values.
SETTABLE: dict[str, type] = {
    "ringer": Ringer,
    "vibrating": bool,
    "screen_brightness": float,
    "notification_led": bool,
    "wifi_enabled": bool,
    "sync_enabled": bool,
    "screen_locked": bool,
}


def check_setting(setting: str, value: Any) -> Any:
    """Validate and normalize a value for a settable field.

    Raises ValueError on unknown settings or out-of-domain values.
    """
    if setting not in SETTABLE:
        raise ValueError(f"unknown setting {setting!r}")
    expect = SETTABLE[setting]
    if expect is Ringer:
        if isinstance(value, Ringer):
            return value
        try:
            return Ringer(value)
        except ValueError:
            raise ValueError(f"ringer must be normal/vibrate/silent, got {value!r}") from None
    if expect is bool:
        if not isinstance(value, bool):
            raise ValueError(f"setting {setting} takes true/false, got {value!r}")
        return value
    # float: screen brightness
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ValueError(f"setting {setting} takes a number, got {value!r}")
    value = float(value)
    if not 0.0 <= value <= 1.0:
        raise ValueError(f"brightness {value} outside [0, 1]")
    return value


def setting_value_to_json(value: Any) -> Any:
    return value.value if isinstance(value, Ringer) else value


def setting_value_text(value: Any) -> str:
    """Render a setting value the way the rule language writes it."""
    if isinstance(value, Ringer):
        return value.value
    if isinstance(value, bool):
        return "true" if value else "false"
    return str(value)


@dataclass(frozen=True)
class SetSetting:
    """Reversible change of one device setting (via the revert stacks)."""

    setting: str
    value: Any

    def __post_init__(self):
        object.__setattr__(self, "value", check_setting(self.setting, self.value))

    def describe(self) -> str:
        return f"set {self.setting} = {setting_value_text(self.value)}"


@dataclass(frozen=True)
class PlaySound:
    sound: str

    def describe(self) -> str:
        return f"play {self.sound}"


@dataclass(frozen=True)
class Vibrate:
    pattern: tuple[int, ...]  # alternating on/off durations, ms

    def __post_init__(self):
        pattern = tuple(int(p) for p in self.pattern)
        if not pattern or any(p <= 0 for p in pattern):
            raise ValueError(f"vibration pattern entries must be > 0 ms: {self.pattern!r}")
        object.__setattr__(self, "pattern", pattern)

    def describe(self) -> str:
        return f"vibrate [{', '.join(str(p) for p in self.pattern)}]"


@dataclass(frozen=True)
class EmitMessage:
    """Stand-in for an external publish channel; payload lands in the log."""

    channel: str
    payload: Any

    def describe(self) -> str:
        return f"emit {self.channel}"


@dataclass(frozen=True)
class CallMethod:
    callback: str

    def describe(self) -> str:
        return f"call {self.callback}"


@dataclass(frozen=True)
class Nothing:
    def describe(self) -> str:
        return "nothing"


Trigger = Union[SetSetting, PlaySound, Vibrate, EmitMessage, CallMethod, Nothing]

ONE_SHOT_TYPES = (PlaySound, Vibrate, EmitMessage, CallMethod)


@dataclass(frozen=True)
class TriggerRecord:
    """Audit entry for one fired trigger (or one revert of its setting)."""

    time: int
    trigger: str
    source: str  # rule node that fired it, e.g. "flip_to_mute/then"
    diff: dict  # changed device fields -> new value

    def to_json(self) -> dict:
        return {"time": self.time, "trigger": self.trigger,
                "source": self.source, "diff": self.diff}


def fire(
    trigger: Trigger,
    device: DeviceState,
    at: int,
    source: str,
    stacks=None,
    callbacks: dict[str, Callable[[int], None]] | None = None,
) -> TriggerRecord:
    """Fire one trigger; the only mutation path into DeviceState.

    ``stacks`` is the engine's revert-stack table (anything with a
    ``push(setting, source, value) -> (before, after)`` method); required
    for setting triggers only.  ``callbacks`` maps method-trigger ids to
    their registered behaviors.
    """
    diff: dict = {}
    if isinstance(trigger, SetSetting):
        before, after = stacks.push(trigger.setting, source, trigger.value)
        if before != after:
            diff[trigger.setting] = setting_value_to_json(after)
    elif isinstance(trigger, PlaySound):
        before = device.last_sound_played
        device.last_sound_played = trigger.sound
        if before != trigger.sound:
            diff["last_sound_played"] = trigger.sound
    elif isinstance(trigger, Vibrate):
        pass  # pattern is recorded in the description only
    elif isinstance(trigger, EmitMessage):
        if device.emitted_messages and device.emitted_messages[-1][0] > at:
            raise ValueError("message log must stay time-ordered")
        entry = [at, trigger.channel, trigger.payload]
        device.emitted_messages.append(entry)
        diff["emitted_messages"] = entry
    elif isinstance(trigger, CallMethod):
        behavior = (callbacks or {}).get(trigger.callback)
        if behavior is None:
            raise UnknownCallback(f"no callback registered for {trigger.callback!r}")
        behavior(at)
    elif not isinstance(trigger, Nothing):
        raise TypeError(f"not a trigger: {trigger!r}")
    return TriggerRecord(at, trigger.describe(), source, diff)
