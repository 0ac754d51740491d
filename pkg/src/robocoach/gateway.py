"""Session runner and operator-console gateway.

CLI surface::

    robocoach run --config s.cfg --mode fast --events s.events [--seed N]
    robocoach run --config s.cfg --mode realtime [--bind HOST:PORT]
    robocoach analyze --log s.log.jsonl [--report summary|assistance]
    robocoach validate --config s.cfg

Fast mode drives the virtual clock as fast as the scripted events allow.
Realtime mode maps virtual time onto the wall clock (scaled by
``--time-scale``) and serves operator consoles over a WebSocket carrying
one JSON document per message; consoles send button edges, speech text
and control inputs, and receive state updates, cue frames, utterances,
prompts, rep counts and the final summary.  A slow console never stalls
the engine: each connection has a bounded outbox that drops oldest
messages first.
"""

from __future__ import annotations

import argparse
import asyncio
import json
import os
import sys
import time
from collections import deque
from pathlib import Path

from .catalog import Catalog
from .config import ConfigError, SessionConfig, parse_config
from .engine import INPUT_KINDS, Engine
from .telemetry import (
    ASSISTANCE_KINDS,
    EventLog,
    assistance_report,
    format_mmss,
    parse_log,
    summarize,
)

PROTOCOL = "robocoach/1"
OUTBOX_LIMIT = 256
TO_CONSOLE_KINDS = ("StateUpdate", "CueFrame", "Utterance", "Prompt", "RepCount", "SessionSummary")
FROM_CONSOLE_KINDS = frozenset(
    {"Hello", "ButtonDown", "ButtonUp", "SpeechText", "AssistanceDone", "TherapistAbort", "EngineerReset"}
)


# ---------------------------------------------------------------------------
# scripted events


def load_events(path: str) -> list[dict]:
    records = []
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip() or line.lstrip().startswith("#"):
                continue
            try:
                record = json.loads(line)
            except json.JSONDecodeError as exc:
                raise ValueError(f"{path}:{lineno}: bad JSON: {exc}") from None
            if not isinstance(record, dict) or "at" not in record or "kind" not in record:
                raise ValueError(f"{path}:{lineno}: event needs 'at' and 'kind'")
            if record["kind"] not in INPUT_KINDS:
                raise ValueError(f"{path}:{lineno}: unknown event kind {record['kind']!r}")
            records.append(record)
    records.sort(key=lambda r: r["at"])
    return records


def write_events(path: str, records: list[dict]) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for record in records:
            fh.write(json.dumps(record, sort_keys=True, separators=(",", ":")) + "\n")


# ---------------------------------------------------------------------------
# reporting


def summary_table(summary, catalog: Catalog) -> str:
    def names(ids) -> str:
        return ", ".join(catalog.lookup(i).display_name for i in ids) or "none"

    lines = [
        "session summary",
        f"  duration:     {summary.duration_mmss}",
        f"  completed:    {'yes' if summary.completed else 'no'}",
        f"  programmed:   {names(summary.exercises_programmed)}",
        f"  performed:    {names(summary.exercises_completed)}",
        f"  disruptions:  {', '.join(summary.disruptions) or 'none'}",
        f"  sets done:    {summary.sets_completed}",
        f"  reps counted: {summary.reps_counted}",
        f"  help requests:{summary.help_requests:>4}",
    ]
    return "\n".join(lines)


def summary_json(summary) -> dict:
    return {
        "duration": summary.duration_mmss,
        "duration_ms": summary.duration_ms,
        "completed": summary.completed,
        "exercises_programmed": list(summary.exercises_programmed),
        "exercises_completed": list(summary.exercises_completed),
        "disruptions": list(summary.disruptions),
        "sets_completed": summary.sets_completed,
        "reps_counted": summary.reps_counted,
        "help_requests": summary.help_requests,
    }


def assistance_table(report) -> str:
    lines = ["human assistance report", "  kind            occurrences   total time"]
    for kind in ASSISTANCE_KINDS:
        agg = report.by_kind[kind]
        lines.append(f"  {kind:<16}{agg.occurrences:>8}   {format_mmss(agg.total_time_ms):>12}")
    if report.unmatched:
        lines.append(f"  unmatched: {len(report.unmatched)}")
        lines.extend(f"    {u}" for u in report.unmatched)
    return "\n".join(lines)


def assistance_json(report) -> dict:
    return {
        "by_kind": {
            kind: {
                "occurrences": agg.occurrences,
                "total_time_ms": agg.total_time_ms,
                "per_session_ms": list(agg.per_session_ms),
            }
            for kind, agg in report.by_kind.items()
        },
        "unmatched": list(report.unmatched),
    }


# ---------------------------------------------------------------------------
# fast mode


def run_fast(config: SessionConfig, events_path: str, log_path: str, catalog: Catalog) -> int:
    records = load_events(events_path)
    engine = Engine(config, catalog)
    engine.start()
    log = engine.run_scripted(records)
    log.write(log_path)
    if engine.terminal:
        summary = summarize(log.events)
        print(summary_table(summary, catalog))
        print(f"log: {log_path}")
        return 0
    print(summary_table_partial(engine), file=sys.stderr)
    print(f"error: scripted events ran out in state {engine.orchestrator.phase.value}", file=sys.stderr)
    return 1


def summary_table_partial(engine: Engine) -> str:
    fp = engine.orchestrator.state_fingerprint()
    return f"session did not finish (phase {fp['phase']}, activity {fp['activity']})"


# ---------------------------------------------------------------------------
# realtime mode


class ConsoleConnection:
    _next_id = 0

    def __init__(self, ws):
        self.ws = ws
        self.outbox: deque = deque(maxlen=OUTBOX_LIMIT)
        self.kick = asyncio.Event()
        self.seq = 0
        self.closed = False
        ConsoleConnection._next_id += 1
        self.id = ConsoleConnection._next_id

    def send(self, message: dict) -> None:
        self.seq += 1
        self.outbox.append({**message, "seq": self.seq})
        self.kick.set()

    async def writer(self) -> None:
        try:
            while not self.closed:
                await self.kick.wait()
                self.kick.clear()
                while self.outbox:
                    await self.ws.send(json.dumps(self.outbox.popleft(), sort_keys=True))
        except Exception:
            self.closed = True


class RealtimeServer:
    """One engine, one wall-clock pacer, any number of consoles."""

    def __init__(self, engine: Engine, catalog: Catalog, time_scale: float = 1.0,
                 console_dir: str | None = None):
        self.engine = engine
        self.catalog = catalog
        self.time_scale = time_scale
        self.console_dir = console_dir
        self.connections: list[ConsoleConnection] = []
        self.inputs: asyncio.Queue = asyncio.Queue()
        self._start_wall: float | None = None
        self._last_assistance: dict | None = None
        self._ended = asyncio.Event()
        engine.add_listener(self._fanout)

    # wall <-> virtual time
    def _vnow(self) -> int:
        assert self._start_wall is not None
        return int((time.monotonic() - self._start_wall) * 1000.0 * self.time_scale)

    def _wall_for(self, vt: int) -> float:
        assert self._start_wall is not None
        return self._start_wall + vt / (1000.0 * self.time_scale)

    # engine notifications -> wire messages
    def _fanout(self, kind: str, at: int, payload) -> None:
        if kind == "utterance":
            self._broadcast({"kind": "Utterance", "at": at, "text": payload})
        elif kind == "cue":
            frame = self.engine.cues.frame_at(at)
            self._broadcast({"kind": "CueFrame", "at": at, "effect": payload, **_frame_fields(frame)})
        elif kind == "rep":
            self._broadcast({"kind": "RepCount", "at": at, "n": payload})
        elif kind == "state":
            if payload.get("pending_assistance") is None:
                self._last_assistance = None
            self._broadcast({"kind": "StateUpdate", "at": at, "state": payload,
                             "assistance_script": (self._last_assistance or {}).get("script")})
        elif kind == "assistance":
            self._last_assistance = payload
            self._broadcast({"kind": "Prompt", "at": at, "prompt_type": "assistance", **payload})
        elif kind == "prompt":
            self._broadcast({"kind": "Prompt", "at": at, "prompt_type": "speech", **payload})

    def _broadcast(self, message: dict) -> None:
        for conn in self.connections:
            if not conn.closed:
                conn.send(message)

    def snapshot_message(self) -> dict:
        state = self.engine.orchestrator.state_fingerprint()
        return {
            "kind": "StateUpdate",
            "at": self.engine.now_ms,
            "snapshot": True,
            "state": state,
            "assistance_script": (self._last_assistance or {}).get("script"),
        }

    # -- connection handling ------------------------------------------------

    async def handle_connection(self, ws) -> None:
        try:
            raw = await ws.recv()
        except Exception:
            return
        hello = _try_json(raw)
        if not isinstance(hello, dict) or hello.get("kind") != "Hello" or hello.get("protocol") != PROTOCOL:
            await ws.send(json.dumps({
                "kind": "Error", "error": f"protocol mismatch: this gateway speaks {PROTOCOL}",
            }))
            await ws.close(code=1002, reason="protocol mismatch")
            return
        conn = ConsoleConnection(ws)
        self.connections.append(conn)
        conn.send({"kind": "Hello", "protocol": PROTOCOL})
        conn.send(self.snapshot_message())
        writer = asyncio.ensure_future(conn.writer())
        last_seq = hello.get("seq", 0)
        try:
            async for raw in ws:
                message = _try_json(raw)
                if not isinstance(message, dict) or message.get("kind") not in FROM_CONSOLE_KINDS:
                    conn.send({"kind": "Error", "error": "malformed message"})
                    continue
                seq = message.get("seq")
                if isinstance(seq, int):
                    if seq <= last_seq:
                        conn.send({"kind": "Error", "error": f"seq not increasing ({seq})"})
                        continue
                    last_seq = seq
                await self.inputs.put((conn.id, message))
        except Exception:
            pass
        finally:
            conn.closed = True
            conn.kick.set()
            writer.cancel()
            if conn in self.connections:
                self.connections.remove(conn)

    # -- pacing loop ----------------------------------------------------------

    async def run(self) -> EventLog:
        self.engine.start()
        self._start_wall = time.monotonic()
        ticker = asyncio.ensure_future(self._cue_ticker())
        pump = asyncio.ensure_future(self._input_pump())
        try:
            # Pacing: run each due engine entry once its wall moment has
            # passed.  Inputs are applied by the pump task the instant
            # they arrive; both run on this loop, so engine steps never
            # interleave.
            while not self.engine.terminal:
                due = self.engine.next_due()
                if due is None:
                    await asyncio.sleep(0.02)
                    continue
                wall = self._wall_for(due)
                now = time.monotonic()
                if wall > now:
                    await asyncio.sleep(min(wall - now, 0.05))
                    continue
                self.engine.process_next()
        finally:
            ticker.cancel()
            pump.cancel()
        summary = summarize(self.engine.log.events)
        self._broadcast({"kind": "SessionSummary", "at": self.engine.now_ms, **summary_json(summary)})
        await asyncio.sleep(0.2)            # give writers a chance to flush
        self._ended.set()
        return self.engine.log

    async def _input_pump(self) -> None:
        while True:
            item = await self.inputs.get()
            if not self.engine.terminal:
                self._apply_input(item)

    def _apply_input(self, item) -> None:
        _, message = item
        kind = message["kind"]
        if kind == "Hello":
            return
        vt = max(self._vnow(), self.engine.now_ms)
        record = {"at": vt, "kind": kind}
        for key in ("button", "text", "fault"):
            if key in message:
                record[key] = message[key]
        try:
            self.engine.post(record)
        except ValueError:
            return
        # Deliver everything due up to the input's timestamp.
        while not self.engine.terminal:
            due = self.engine.next_due()
            if due is None or due > vt:
                break
            self.engine.process_next()

    async def _cue_ticker(self) -> None:
        while True:
            await asyncio.sleep(0.25 / self.time_scale)
            if self._start_wall is None:
                continue
            at = max(self._vnow(), self.engine.now_ms)
            frame = self.engine.cues.frame_at(at)
            self._broadcast({
                "kind": "CueFrame", "at": at,
                "effect": self.engine.cues.effect.value, **_frame_fields(frame),
            })


def _frame_fields(frame) -> dict:
    return {
        "front_ring": frame.front_ring,
        "middle_ring": frame.middle_ring,
        "rear_ring": frame.rear_ring,
        "left_side": frame.left_side,
        "right_side": frame.right_side,
    }


def _try_json(raw):
    try:
        return json.loads(raw)
    except (json.JSONDecodeError, TypeError):
        return None


async def _serve_realtime(config: SessionConfig, catalog: Catalog, bind: str,
                          time_scale: float, log_path: str, console_dir: str | None) -> int:
    import http

    from websockets.asyncio.server import serve
    from websockets.datastructures import Headers
    from websockets.http11 import Response

    engine = Engine(config, catalog)
    server_state = RealtimeServer(engine, catalog, time_scale, console_dir)

    def process_request(connection, request):
        if request.path == "/ws":
            return None
        return _static_response(Response, Headers, http, console_dir, request.path)

    host, _, port_text = bind.rpartition(":")
    host = host or "127.0.0.1"
    port = int(port_text)
    async with serve(server_state.handle_connection, host, port,
                     process_request=process_request) as server:
        actual_port = server.sockets[0].getsockname()[1]
        print(f"LISTENING ws://{host}:{actual_port}/ws", flush=True)
        log = await server_state.run()
    log.write(log_path)
    summary = summarize(log.events)
    print(summary_table(summary, catalog))
    print(f"log: {log_path}")
    return 0


def _static_response(Response, Headers, http, console_dir, path: str):
    def respond(status, body: bytes, content_type: str):
        headers = Headers()
        headers["Content-Type"] = content_type
        headers["Content-Length"] = str(len(body))
        return Response(status.value, status.phrase, headers, body)

    if console_dir is None:
        return respond(http.HTTPStatus.NOT_FOUND, b"no console bundled\n", "text/plain")
    name = path.split("?")[0].lstrip("/") or "index.html"
    base = Path(console_dir).resolve()
    target = (base / name).resolve()
    if not str(target).startswith(str(base)) or not target.is_file():
        return respond(http.HTTPStatus.NOT_FOUND, b"not found\n", "text/plain")
    content_type = {
        ".html": "text/html; charset=utf-8",
        ".js": "text/javascript; charset=utf-8",
        ".css": "text/css; charset=utf-8",
        ".map": "application/json",
    }.get(target.suffix, "application/octet-stream")
    return respond(http.HTTPStatus.OK, target.read_bytes(), content_type)


# ---------------------------------------------------------------------------
# CLI


def _read_config(path: str, catalog: Catalog, seed_override: int | None) -> SessionConfig:
    with open(path, "r", encoding="utf-8") as fh:
        source = fh.read()
    config = parse_config(source, catalog)
    if seed_override is not None:
        config = config.with_seed(seed_override)
    return config


def main(argv: list[str] | None = None) -> int:
    parser = argparse.ArgumentParser(prog="robocoach", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    run_p = sub.add_parser("run", help="run a session")
    run_p.add_argument("--config", required=True)
    run_p.add_argument("--mode", choices=("fast", "realtime"), default="fast")
    run_p.add_argument("--events", help="scripted events file (required in fast mode)")
    run_p.add_argument("--seed", type=int, default=None)
    run_p.add_argument("--log", help="session log destination")
    run_p.add_argument("--bind", default=os.environ.get("ROBOCOACH_BIND", "127.0.0.1:8750"))
    run_p.add_argument("--time-scale", type=float, default=1.0,
                       help="virtual ms per wall ms in realtime mode (1.0 = true realtime)")
    run_p.add_argument("--console-dir", default=None, help="serve a built console from this directory")

    an_p = sub.add_parser("analyze", help="analyze one or more session logs")
    an_p.add_argument("--log", action="append", required=True, dest="logs")
    an_p.add_argument("--report", choices=("summary", "assistance"), default="summary")
    an_p.add_argument("--json", action="store_true", help="print the machine-readable document instead")

    val_p = sub.add_parser("validate", help="validate a session configuration")
    val_p.add_argument("--config", required=True)

    args = parser.parse_args(argv)
    catalog = Catalog.load_default()

    if args.command == "validate":
        try:
            _read_config(args.config, catalog, None)
        except OSError as exc:
            print(f"error: {exc}", file=sys.stderr)
            return 1
        except ConfigError as exc:
            print(f"{args.config}: {exc}", file=sys.stderr)
            return 1
        print("OK")
        return 0

    if args.command == "analyze":
        try:
            logs = []
            for path in args.logs:
                with open(path, "r", encoding="utf-8") as fh:
                    logs.append(parse_log(fh.read()))
            if args.report == "summary":
                documents = [summary_json(summarize(events)) for events in logs]
                if args.json:
                    print(json.dumps(documents if len(documents) > 1 else documents[0], indent=2))
                else:
                    for path, events in zip(args.logs, logs):
                        print(f"== {path}")
                        print(summary_table(summarize(events), catalog))
                _write_sidecar(args.logs[0], documents[0] if documents else {})
            else:
                report = assistance_report(logs)
                if args.json:
                    print(json.dumps(assistance_json(report), indent=2))
                else:
                    print(assistance_table(report))
                _write_sidecar(args.logs[0], assistance_json(report), suffix=".assistance.json")
        except Exception as exc:
            print(f"error: {exc}", file=sys.stderr)
            return 1
        return 0

    # run
    try:
        config = _read_config(args.config, catalog, args.seed)
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except ConfigError as exc:
        print(f"{args.config}: {exc}", file=sys.stderr)
        return 1
    log_path = args.log or (Path(args.config).stem + ".log.jsonl")

    if args.mode == "fast":
        if not args.events:
            run_p.error("--events is required in fast mode")
        try:
            return run_fast(config, args.events, log_path, catalog)
        except (OSError, ValueError) as exc:
            print(f"error: {exc}", file=sys.stderr)
            return 1

    try:
        return asyncio.run(
            _serve_realtime(config, catalog, args.bind, args.time_scale, log_path, args.console_dir)
        )
    except KeyboardInterrupt:
        return 130


def _write_sidecar(log_path: str, document: dict, suffix: str = ".summary.json") -> None:
    sidecar = Path(log_path).with_suffix("")  # strip .jsonl
    out = Path(str(sidecar) + suffix)
    out.write_text(json.dumps(document, indent=2) + "\n", encoding="utf-8")


if __name__ == "__main__":
    sys.exit(main())
