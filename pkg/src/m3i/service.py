"""HTTP wire API over a live engine: rule CRUD, context injection,
simulation stepping, device inspection, and an LDJSON event stream.

One service wraps exactly one engine.  Stepped mode (the default) drives
ticks through POST /sim/step on a simulated clock, so tests and the UI
share a deterministic timeline; Live mode runs the wall-clock scheduler.
Explicit event timestamps are a Stepped-mode feature; in Live mode events
are stamped at receipt.

Plain HTTP 1.0 with one thread per request keeps the stream endpoint
trivial: subscribers get every tick report, in order, one JSON line each.
No authentication; binds loopback unless told otherwise.
"""

from __future__ import annotations

import json
import logging
import mimetypes
import queue
import threading
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer
from pathlib import Path
from urllib.parse import urlparse

from . import dsl, scenario
from .canonical import canonical_json, canonical_line
from .context import Catalog, FactorId, Mode
from .engine import Engine, Rule, SimulatedClock, TickReport, WallClock, rule_to_json
from .engine import rule_from_json
from .errors import (
    KindMismatch,
    M3iError,
    ModeMismatch,
    ParseError,
    UnknownFactor,
    UnknownRule,
)
from .values import Value

log = logging.getLogger("m3i.service")

STEPPED = "stepped"
LIVE = "live"


class _ApiError(Exception):
    def __init__(self, status: int, message: str, diagnostics=None):
        super().__init__(message)
        self.status = status
        self.message = message
        self.diagnostics = diagnostics


class ApiService:
    """Engine plus wire state: mode, pending stepped events, subscribers."""

    def __init__(
        self,
        rules: dsl.RuleFile | list[Rule] | None = None,
        catalog: Catalog | None = None,
        tick_interval: int = scenario.DEFAULT_TICK,
        mode: str = STEPPED,
        ui_dir: str | None = None,
    ):
        if mode not in (STEPPED, LIVE):
            raise ValueError(f"unknown mode {mode!r}")
        registry = scenario.registry_for(catalog)
        self.engine = Engine(tick_interval, registry)
        self.ui_dir = Path(ui_dir).resolve() if ui_dir else None
        self._mode = STEPPED
        self._next_t = 0
        self._pending: list[scenario.TraceEvent] = []
        self._subscribers: set[queue.SimpleQueue] = set()
        self._lock = threading.Lock()
        self._server: ThreadingHTTPServer | None = None
        self.engine.subscribe(self._publish)
        if rules is not None:
            rule_list = rules.rules if isinstance(rules, dsl.RuleFile) else rules
            for rule in rule_list:
                self._add_rule(rule)
        if mode == LIVE:
            self.set_mode(LIVE)

    # -- engine plumbing -----------------------------------------------------

    def _add_rule(self, rule: Rule) -> None:
        for target in scenario._call_targets(rule.then_action) | \
                scenario._call_targets(rule.else_action):
            if not self.engine.has_callback(target):
                self.engine.register_callback(target, lambda at: None)
        self.engine.add_rule(rule)

    def _publish(self, report: TickReport) -> None:
        line = canonical_line(report.to_json())
        for q in list(self._subscribers):
            q.put(line)

    def subscribe(self) -> queue.SimpleQueue:
        q: queue.SimpleQueue = queue.SimpleQueue()
        self._subscribers.add(q)
        return q

    def unsubscribe(self, q: queue.SimpleQueue) -> None:
        self._subscribers.discard(q)

    # -- mode and stepping ---------------------------------------------------

    @property
    def mode(self) -> str:
        return self._mode

    def set_mode(self, mode: str) -> None:
        if mode not in (STEPPED, LIVE):
            raise _ApiError(400, f"unknown mode {mode!r}")
        with self._lock:
            if mode == self._mode:
                return
            if mode == LIVE:
                # Wall time continues where the stepped timeline left off,
                # keeping tick times monotone across the switch.
                self.engine.clock = WallClock(offset_ms=self._next_t)
                self._mode = LIVE
                self.engine.start()
            else:
                self.engine.stop()
                last = self.engine.last_report
                self._next_t = (last.tick_time + self.engine.tick_interval
                                if last else 0)
                self.engine.clock = SimulatedClock(self._next_t)
                self._mode = STEPPED

    def step(self) -> TickReport:
        with self._lock:
            if self._mode != STEPPED:
                raise _ApiError(409, "stepping requires stepped mode")
            t = self._next_t
            due = [e for e in self._pending if e.t <= t]
            self._pending = [e for e in self._pending if e.t > t]
            due.sort(key=lambda e: e.t)  # stable: receipt order within a t
            for event in due:
                self.engine.registry.ingest_event(event.factor, event.value, event.t)
            report = self.engine.tick(t)
            self._next_t = t + self.engine.tick_interval
            return report

    def ingest(self, factor: FactorId, value: Value, t: int | None) -> int:
        with self._lock:
            if self._mode == STEPPED:
                at = self._next_t if t is None else t
                self._pending.append(scenario.TraceEvent(at, factor, value))
                return at
            if t is not None:
                raise _ApiError(400, "explicit event time requires stepped mode")
            at = self.engine.clock.now()
            self.engine.registry.ingest_event(factor, value, at)
            return at

    # -- lifecycle -----------------------------------------------------------

    def serve_forever(self, bind: str = "127.0.0.1", port: int = 7380) -> None:
        self._server = _make_server(self, bind, port)
        self._server.serve_forever()

    def start_background(self, bind: str = "127.0.0.1", port: int = 0) -> int:
        """Serve on a daemon thread; returns the bound port."""
        self._server = _make_server(self, bind, port)
        thread = threading.Thread(target=self._server.serve_forever, daemon=True)
        thread.start()
        return self._server.server_address[1]

    def close(self) -> None:
        if self._server is not None:
            self._server.shutdown()
            self._server.server_close()
            self._server = None
        if self.engine.running:
            self.engine.stop()
        for q in list(self._subscribers):
            q.put(None)


def _make_server(service: ApiService, bind: str, port: int) -> ThreadingHTTPServer:
    handler = type("BoundHandler", (_Handler,), {"service": service})
    server = ThreadingHTTPServer((bind, port), handler)
    server.daemon_threads = True
    return server


# -- request handling --------------------------------------------------------

class _Handler(BaseHTTPRequestHandler):
    service: ApiService
    protocol_version = "HTTP/1.0"  # connection-per-request; streams just write

    # -- helpers -------------------------------------------------------------

    def log_message(self, fmt, *args):
        log.debug("%s " + fmt, self.address_string(), *args)

    def _send(self, status: int, payload, content_type="application/json") -> None:
        body = payload if isinstance(payload, bytes) else \
            canonical_json(payload).encode() + b"\n"
        self.send_response(status)
        self.send_header("Content-Type", content_type)
        self.send_header("Content-Length", str(len(body)))
        self._cors()
        self.end_headers()
        if self.command != "HEAD":
            self.wfile.write(body)

    def _cors(self) -> None:
        self.send_header("Access-Control-Allow-Origin", "*")
        self.send_header("Access-Control-Allow-Methods", "GET, POST, PUT, DELETE, OPTIONS")
        self.send_header("Access-Control-Allow-Headers", "Content-Type")

    def _error(self, status: int, message: str, diagnostics=None) -> None:
        body = {"error": message}
        if diagnostics:
            body["diagnostics"] = [
                {"severity": d.severity, "message": d.message,
                 "line": d.line, "col": d.col} for d in diagnostics]
        self._send(status, body)

    def _read_body(self) -> bytes:
        length = int(self.headers.get("Content-Length") or 0)
        return self.rfile.read(length) if length else b""

    def _json_body(self) -> dict:
        raw = self._read_body()
        if not raw:
            raise _ApiError(400, "request body required")
        try:
            obj = json.loads(raw)
        except ValueError as exc:
            raise _ApiError(400, f"bad JSON body: {exc}") from None
        if not isinstance(obj, dict):
            raise _ApiError(400, "body must be a JSON object")
        return obj

    def _dispatch(self, method: str) -> None:
        path = urlparse(self.path).path.rstrip("/") or "/"
        try:
            if not self._route(method, path):
                self._error(404, f"no such endpoint: {method} {path}")
        except _ApiError as exc:
            self._error(exc.status, exc.message, exc.diagnostics)
        except UnknownRule as exc:
            self._error(404, str(exc))
        except (ParseError,) as exc:
            self._error(400, str(exc), getattr(exc, "diagnostics", None))
        except (M3iError, ValueError) as exc:
            self._error(400, str(exc))
        except BrokenPipeError:
            pass
        except Exception:  # pragma: no cover -- last-resort guard
            log.exception("unhandled error for %s %s", method, path)
            try:
                self._error(500, "internal error")
            except OSError:
                pass

    def do_GET(self):
        self._dispatch("GET")

    def do_POST(self):
        self._dispatch("POST")

    def do_PUT(self):
        self._dispatch("PUT")

    def do_DELETE(self):
        self._dispatch("DELETE")

    def do_OPTIONS(self):
        self._send(204, b"", content_type="text/plain")

    # -- routes --------------------------------------------------------------

    def _route(self, method: str, path: str) -> bool:
        svc = self.service
        parts = [p for p in path.split("/") if p]

        if method == "GET" and path == "/rules":
            self._send(200, [rule_to_json(r) for r in svc.engine.rules()])
        elif method == "POST" and path == "/rules":
            self._post_rules()
        elif method == "DELETE" and len(parts) == 2 and parts[0] == "rules":
            svc.engine.remove_rule(parts[1])
            self._send(200, {"ok": True, "removed": parts[1]})
        elif method == "PUT" and len(parts) == 3 and parts[0] == "rules" \
                and parts[2] == "enabled":
            body = self._json_body()
            if not isinstance(body.get("enabled"), bool):
                raise _ApiError(400, "body must carry boolean 'enabled'")
            svc.engine.set_enabled(parts[1], body["enabled"])
            self._send(200, {"ok": True, "id": parts[1], "enabled": body["enabled"]})
        elif method == "GET" and path == "/catalog":
            self._send(200, svc.engine.registry.catalog().to_json())
        elif method == "POST" and path == "/context/events":
            self._post_event()
        elif method == "GET" and path == "/device":
            self._send(200, self._device_json())
        elif method == "POST" and path == "/device/override":
            body = self._json_body()
            if "setting" not in body or "value" not in body:
                raise _ApiError(400, "body must carry 'setting' and 'value'")
            svc.engine.manual_override(body["setting"], body["value"])
            self._send(200, self._device_json())
        elif method == "POST" and path == "/device/override/clear":
            body = self._json_body()
            if "setting" not in body:
                raise _ApiError(400, "body must carry 'setting'")
            svc.engine.clear_override(body["setting"])
            self._send(200, self._device_json())
        elif method == "POST" and path == "/sim/step":
            report = svc.step()
            self._send(200, canonical_line(report.to_json()))
        elif method == "POST" and path == "/sim/mode":
            body = self._json_body()
            svc.set_mode(body.get("mode", ""))
            self._send(200, {"mode": svc.mode})
        elif method == "GET" and path == "/sim/mode":
            self._send(200, {"mode": svc.mode,
                             "tick_interval": svc.engine.tick_interval})
        elif method == "GET" and path == "/events":
            self._stream_events()
        elif method == "GET" and svc.ui_dir is not None:
            return self._serve_static(path)
        else:
            return False
        return True

    def _device_json(self) -> dict:
        device = self.service.engine.device.to_json()
        device["manual_overrides"] = self.service.engine.manual_overrides()
        return device

    def _post_rules(self) -> None:
        svc = self.service
        content_type = (self.headers.get("Content-Type") or "").split(";")[0].strip()
        raw = self._read_body()
        if not raw:
            raise _ApiError(400, "request body required")
        if content_type in ("text/plain", "application/x-m3i"):
            rules = self._rules_from_text(raw.decode("utf-8"))
        else:
            try:
                obj = json.loads(raw)
            except ValueError as exc:
                raise _ApiError(400, f"bad JSON body: {exc}") from None
            if isinstance(obj, dict) and isinstance(obj.get("text"), str):
                rules = self._rules_from_text(obj["text"])
            elif isinstance(obj, dict) and obj.get("type") == "rule":
                try:
                    rules = [rule_from_json(obj)]
                except (KeyError, ValueError, M3iError) as exc:
                    raise _ApiError(400, f"bad rule JSON: {exc}") from None
            else:
                raise _ApiError(400, "body must be DSL text, {'text': ...}, "
                                     "or rule AST JSON")
        for rule in rules:
            svc._add_rule(rule)
        ids = [r.id for r in rules]
        self._send(201, {"ids": ids, "id": ids[0]})

    def _rules_from_text(self, text: str) -> list[Rule]:
        try:
            rf = dsl.parse(text)
        except ParseError as exc:
            raise _ApiError(400, str(exc), exc.diagnostics) from None
        if not rf.rules:
            raise _ApiError(400, "no rules in body")
        diags = dsl.check(rf, self.service.engine.registry.catalog(), text)
        if diags:
            raise _ApiError(400, "rule validation failed", diags)
        return rf.rules

    def _post_event(self) -> None:
        svc = self.service
        body = self._json_body()
        if "factor" not in body or "value" not in body:
            raise _ApiError(400, "body must carry 'factor' and 'value'")
        try:
            factor = FactorId.parse(body["factor"])
        except (TypeError, ValueError) as exc:
            raise _ApiError(400, str(exc)) from None
        catalog = svc.engine.registry.catalog()
        spec = catalog.get(factor)
        if spec is None:
            raise UnknownFactor(f"unknown factor {factor}")
        if spec.mode is Mode.PULL:
            raise ModeMismatch(f"factor {factor} is pull mode; it takes no events")
        try:
            value = Value.from_json(body["value"])
        except Exception as exc:
            raise _ApiError(400, f"bad value: {exc}") from None
        if value.kind is not spec.kind:
            raise KindMismatch(
                f"factor {factor} takes {spec.kind.value}, got {value.kind.value}")
        t = body.get("t")
        if t is not None and (not isinstance(t, int) or isinstance(t, bool) or t < 0):
            raise _ApiError(400, "t must be a non-negative integer")
        at = svc.ingest(factor, value, t)
        self._send(202, {"ok": True, "factor": str(factor), "t": at})

    def _stream_events(self) -> None:
        svc = self.service
        q = svc.subscribe()
        try:
            self.send_response(200)
            self.send_header("Content-Type", "application/x-ndjson")
            self.send_header("Cache-Control", "no-cache")
            self._cors()
            self.end_headers()
            while True:
                line = q.get()
                if line is None:
                    break
                self.wfile.write(line)
                self.wfile.flush()
        except (BrokenPipeError, ConnectionResetError):
            pass
        finally:
            svc.unsubscribe(q)

    def _serve_static(self, path: str) -> bool:
        base = self.service.ui_dir
        rel = path.lstrip("/") or "index.html"
        target = (base / rel).resolve()
        if not target.is_relative_to(base) or not target.is_file():
            if path == "/":
                self._error(404, "no index.html in UI directory")
                return True
            return False
        ctype = mimetypes.guess_type(str(target))[0] or "application/octet-stream"
        self._send(200, target.read_bytes(), content_type=ctype)
        return True
