"""Trace replay, shipped demo fixtures, and the command-line interface."""

import json
import os
import subprocess
import sys

import pytest

from m3i.context import Catalog, FactorId
from m3i.dsl import parse
from m3i.errors import (
    KindMismatch,
    ModeMismatch,
    OutOfOrder,
    ParseError,
    UnknownFactor,
)
from m3i.scenario import (
    Trace,
    TraceEvent,
    default_catalog,
    fixture_path,
    load_trace,
    parse_trace,
    read_timeline,
    run,
    timeline_bytes,
)
from m3i.values import Value

FIXTURES = [
    "flip_to_mute",
    "flip_to_mute_refined",
    "battery_or",
    "press_and_shoot",
    "raise_and_call",
    "pinch_at_home",
    "steering",
]


CAT = default_catalog()


def event_line(t, factor, value) -> str:
    return json.dumps({"t": t, "factor": factor, "value": value.to_json()})


class TestTraceParsing:
    def test_single_event(self):
        line = event_line(1500, "light.level", Value.of_float(3.0))
        trace = parse_trace([line], CAT)
        assert trace.events == [TraceEvent(
            1500, FactorId("light", "level"), Value.of_float(3.0))]
        assert trace.duration == 1500

    def test_empty_input(self):
        trace = parse_trace([], CAT)
        assert trace.events == [] and trace.duration == 0

    def test_blank_lines_skipped(self):
        line = event_line(0, "light.level", Value.of_float(1.0))
        assert len(parse_trace(["", line, "   ", ""], CAT).events) == 1

    def test_out_of_order(self):
        lines = [event_line(500, "light.level", Value.of_float(1.0)),
                 event_line(100, "light.level", Value.of_float(2.0))]
        with pytest.raises(OutOfOrder) as exc:
            parse_trace(lines, CAT)
        assert "line 2" in str(exc.value)

    def test_equal_times_allowed(self):
        lines = [event_line(100, "light.level", Value.of_float(1.0)),
                 event_line(100, "battery.level", Value.of_float(50.0))]
        assert len(parse_trace(lines, CAT).events) == 2

    def test_unknown_factor(self):
        with pytest.raises(UnknownFactor) as exc:
            parse_trace([event_line(0, "ghost.factor", Value.of_float(1.0))], CAT)
        assert "line 1" in str(exc.value)

    def test_pull_factor_rejected(self):
        # Clock factors are polled from the simulated clock, never traced.
        with pytest.raises(ModeMismatch) as exc:
            parse_trace([event_line(0, "clock.hour", Value.of_int(9))], CAT)
        assert "line 1" in str(exc.value)

    def test_kind_mismatch(self):
        with pytest.raises(KindMismatch):
            parse_trace([event_line(0, "light.level", Value.of_text("dark"))], CAT)

    def test_without_catalog_only_shape_is_checked(self):
        line = event_line(0, "ghost.factor", Value.of_float(1.0))
        assert len(parse_trace([line]).events) == 1

    def test_bad_time(self):
        for t in (-5, 1.5, True, None):
            with pytest.raises(ParseError):
                parse_trace([json.dumps({
                    "t": t, "factor": "light.level",
                    "value": {"kind": "float", "value": 1.0}})], CAT)

    def test_bad_json_reports_line(self):
        good = event_line(0, "light.level", Value.of_float(1.0))
        with pytest.raises(ParseError) as exc:
            parse_trace([good, "{not json"], CAT)
        assert "line 2" in str(exc.value)


class TestRun:
    def light_trace(self, *pairs) -> Trace:
        return parse_trace([
            event_line(t, "light.level", Value.of_float(v)) for t, v in pairs])

    RULES = ("rule dark:\n  when light.level < 5.0\n"
             "  then set ringer = vibrate\n  else set ringer = normal\n")

    def test_tick_quantization(self):
        # An event between ticks becomes visible at the next tick.
        reports = run(parse(self.RULES), self.light_trace((0, 120.0), (1500, 3.0)))
        ringers = [r.device["ringer"] for r in reports]
        assert [r.tick_time for r in reports] == [0, 1000, 2000]
        assert ringers == ["normal", "normal", "vibrate"]

    def test_event_on_tick_boundary_is_visible_at_that_tick(self):
        reports = run(parse(self.RULES), self.light_trace((0, 120.0), (1000, 3.0)))
        assert [r.device["ringer"] for r in reports] == ["normal", "vibrate"]

    def test_final_tick_covers_duration(self):
        reports = run(parse(self.RULES), self.light_trace((0, 120.0), (4200, 3.0)))
        assert reports[-1].tick_time == 5000

    def test_empty_trace_runs_one_tick(self):
        reports = run(parse(self.RULES), Trace(events=()))
        assert [r.tick_time for r in reports] == [0]

    def test_zero_rules_leave_device_unchanged(self):
        trace = self.light_trace((0, 1.0), (2000, 200.0))
        reports = run([], trace)
        device_jsons = [json.dumps(r.device, sort_keys=True) for r in reports]
        assert len(set(device_jsons)) == 1
        assert all(r.firings == [] for r in reports)


class TestFixtures:
    @pytest.mark.parametrize("name", FIXTURES)
    def test_replay_matches_golden(self, name):
        rf = parse(fixture_path(f"{name}.m3i").read_text())
        trace = load_trace(fixture_path(f"{name}.trace.jsonl"))
        reports = run(rf, trace, rf.tick or 1000)
        golden = fixture_path(f"{name}.timeline.jsonl").read_bytes()
        assert timeline_bytes(reports) == golden

    def test_press_and_shoot_counts(self):
        rf = parse(fixture_path("press_and_shoot.m3i").read_text())
        trace = load_trace(fixture_path("press_and_shoot.trace.jsonl"))
        reports = run(rf, trace, rf.tick or 1000)
        calls = [f for r in reports for f in r.firings
                 if f.trigger == "call launch.camera"]
        assert len(calls) == 1

    def test_read_timeline_round_trips(self):
        path = fixture_path("battery_or.timeline.jsonl")
        rows = read_timeline(path)
        assert [row["tick_time"] for row in rows] == \
            [i * 1000 for i in range(len(rows))]


class TestInvariants:
    def _fixture_run(self, name):
        rf = parse(fixture_path(f"{name}.m3i").read_text())
        trace = load_trace(fixture_path(f"{name}.trace.jsonl"))
        return rf, trace

    @pytest.mark.parametrize("name", FIXTURES)
    def test_determinism(self, name):
        rf, trace = self._fixture_run(name)
        tick = rf.tick or 1000
        first = timeline_bytes(run(rf, trace, tick))
        second = timeline_bytes(run(rf, trace, tick))
        assert first == second

    def test_late_events_extend_without_rewriting(self):
        rf, trace = self._fixture_run("battery_or")
        base = timeline_bytes(run(rf, trace, 1000))
        extended = Trace(events=trace.events + [TraceEvent(
            trace.duration + 3000, FactorId("battery", "level"),
            Value.of_float(10.0))])
        longer = timeline_bytes(run(rf, extended, 1000))
        assert longer.startswith(base)
        assert longer != base

    def test_interval_refinement_keeps_setting_sequence(self):
        # Events in this trace are spaced wider than the coarse interval, so
        # halving the interval may move transitions earlier but must walk the
        # same sequence of ringer states.
        rf, trace = self._fixture_run("flip_to_mute")

        def ringer_path(tick):
            seq = [r.device["ringer"] for r in run(rf, trace, tick)]
            collapsed = [seq[0]]
            for state in seq[1:]:
                if state != collapsed[-1]:
                    collapsed.append(state)
            return collapsed

        assert ringer_path(1000) == ringer_path(500) == ringer_path(250)


def m3i(*args, env_extra=None, stdin=None):
    env = dict(os.environ)
    if env_extra:
        env.update(env_extra)
    return subprocess.run(
        [sys.executable, "-m", "m3i", *args],
        capture_output=True, env=env, input=stdin, timeout=60)


class TestCli:
    def test_run_matches_golden(self):
        proc = m3i("run", "--rules", str(fixture_path("flip_to_mute.m3i")),
                   "--trace", str(fixture_path("flip_to_mute.trace.jsonl")))
        assert proc.returncode == 0
        assert proc.stdout == fixture_path("flip_to_mute.timeline.jsonl").read_bytes()

    def test_run_writes_out_file(self, tmp_path):
        out = tmp_path / "tl.jsonl"
        proc = m3i("run", "--rules", str(fixture_path("battery_or.m3i")),
                   "--trace", str(fixture_path("battery_or.trace.jsonl")),
                   "--out", str(out))
        assert proc.returncode == 0
        assert out.read_bytes() == fixture_path("battery_or.timeline.jsonl").read_bytes()

    def test_tick_flag_overrides_header(self):
        base = m3i("run", "--rules", str(fixture_path("flip_to_mute.m3i")),
                   "--trace", str(fixture_path("flip_to_mute.trace.jsonl")))
        fine = m3i("run", "--rules", str(fixture_path("flip_to_mute.m3i")),
                   "--trace", str(fixture_path("flip_to_mute.trace.jsonl")),
                   "--tick", "500")
        assert fine.returncode == 0
        assert len(fine.stdout.splitlines()) > len(base.stdout.splitlines())

    def test_check_clean(self):
        proc = m3i("check", "--rules", str(fixture_path("flip_to_mute.m3i")))
        assert proc.returncode == 0
        assert b"ok" in proc.stdout

    def test_check_kind_mismatch_exits_2(self, tmp_path):
        bad = tmp_path / "bad.m3i"
        bad.write_text("rule r:\n  when light.level matches /dark/\n  then nothing\n")
        proc = m3i("check", "--rules", str(bad))
        assert proc.returncode == 2
        assert b"error" in proc.stderr

    def test_check_parse_error_position(self, tmp_path):
        bad = tmp_path / "bad.m3i"
        bad.write_text("rule r: when battery.level > then set ringer = silent\n")
        proc = m3i("check", "--rules", str(bad))
        assert proc.returncode == 2
        assert b"1:30" in proc.stderr

    def test_fmt_idempotent(self, tmp_path):
        once = m3i("fmt", "--rules", str(fixture_path("flip_to_mute.m3i")))
        assert once.returncode == 0
        again_file = tmp_path / "canon.m3i"
        again_file.write_bytes(once.stdout)
        again = m3i("fmt", "--rules", str(again_file))
        assert again.stdout == once.stdout

    def test_missing_file_exits_3(self):
        proc = m3i("run", "--rules", "/nonexistent.m3i",
                   "--trace", "/nonexistent.jsonl")
        assert proc.returncode == 3

    def test_bad_subcommand_exits_1(self):
        assert m3i("frobnicate").returncode == 1

    def test_no_args_exits_1(self):
        assert m3i().returncode == 1

    def _custom_catalog(self, tmp_path):
        specs = [s for s in default_catalog().to_json()]
        specs.append({"id": "widget.active", "kind": "bool", "mode": "push",
                      "description": "custom"})
        path = tmp_path / "cat.json"
        path.write_text(json.dumps(specs))
        return path

    def test_catalog_header_resolved_relative_to_rules(self, tmp_path):
        cat = self._custom_catalog(tmp_path)
        rules = tmp_path / "w.m3i"
        rules.write_text(f'catalog "{cat.name}"\n\n'
                         "rule w:\n  when widget.active == true\n"
                         "  then set ringer = silent\n")
        trace = tmp_path / "w.jsonl"
        trace.write_text(event_line(0, "widget.active", Value.of_bool(True)) + "\n")
        proc = m3i("run", "--rules", str(rules), "--trace", str(trace))
        assert proc.returncode == 0, proc.stderr
        assert json.loads(proc.stdout.splitlines()[0])["device"]["ringer"] == "silent"

    def test_catalog_flag_beats_header(self, tmp_path):
        cat = self._custom_catalog(tmp_path)
        std = tmp_path / "std.json"
        std.write_text(json.dumps(default_catalog().to_json()))
        rules = tmp_path / "w.m3i"
        rules.write_text(f'catalog "{cat.name}"\n\n'
                         "rule w:\n  when widget.active == true\n  then nothing\n")
        trace = tmp_path / "w.jsonl"
        trace.write_text("")
        proc = m3i("run", "--rules", str(rules), "--trace", str(trace),
                   "--catalog", str(std))
        assert proc.returncode == 2  # widget.active unknown under the flag catalog

    def test_catalog_env_var(self, tmp_path):
        cat = self._custom_catalog(tmp_path)
        rules = tmp_path / "w.m3i"
        rules.write_text("rule w:\n  when widget.active == true\n  then nothing\n")
        trace = tmp_path / "w.jsonl"
        trace.write_text("")
        without = m3i("run", "--rules", str(rules), "--trace", str(trace))
        assert without.returncode == 2
        with_env = m3i("run", "--rules", str(rules), "--trace", str(trace),
                       env_extra={"M3I_CATALOG": str(cat)})
        assert with_env.returncode == 0, with_env.stderr
