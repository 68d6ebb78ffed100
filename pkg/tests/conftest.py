"""Shared test helpers: direct snapshot construction and small catalogs."""

from __future__ import annotations

import pytest

from m3i.context import (
    Catalog,
    ContextSnapshot,
    FactorId,
    FactorSpec,
    Mode,
    SnapshotEntry,
    UNAVAILABLE,
)
from m3i.values import Value, ValueKind


def as_value(raw):
    """Coerce a plain Python value to a tagged Value for test convenience."""
    if raw is UNAVAILABLE or isinstance(raw, Value):
        return raw
    if isinstance(raw, bool):
        return Value.of_bool(raw)
    if isinstance(raw, int):
        return Value.of_int(raw)
    if isinstance(raw, float):
        return Value.of_float(raw)
    if isinstance(raw, str):
        return Value.of_text(raw)
    if isinstance(raw, tuple) and len(raw) == 2:
        return Value.of_geo(*raw)
    raise TypeError(f"cannot coerce {raw!r}")


def make_snapshot(tick_time: int = 0, **factors) -> ContextSnapshot:
    """Snapshot from keyword args: group__name=value (None = unavailable).

    Bypasses the registry so tests can pin arbitrary factor states fast.
    """
    entries = {}
    for key, raw in factors.items():
        fid = FactorId.parse(key.replace("__", "."))
        value = UNAVAILABLE if raw is None else as_value(raw)
        entries[fid] = SnapshotEntry(value, tick_time)
    return ContextSnapshot(tick_time, entries)


def snapshot_of(mapping: dict, tick_time: int = 0) -> ContextSnapshot:
    """Same as make_snapshot but from {FactorId|str: value} mappings."""
    entries = {}
    for key, raw in mapping.items():
        fid = key if isinstance(key, FactorId) else FactorId.parse(key)
        value = UNAVAILABLE if raw is None else as_value(raw)
        entries[fid] = SnapshotEntry(value, tick_time)
    return ContextSnapshot(tick_time, entries)


def bool_catalog(n: int) -> Catalog:
    """Catalog of n push bool factors named b.f0 .. b.f{n-1}."""
    return Catalog([
        FactorSpec(FactorId("b", f"f{i}"), ValueKind.BOOL, Mode.PUSH, f"flag {i}")
        for i in range(n)
    ])


@pytest.fixture
def snap():
    return make_snapshot
