from __future__ import annotations

import asyncio
import json
import re
import subprocess
import sys

import pytest

from robocoach.autopilot import drive_session, tap_records
from robocoach.config import parse_config
from robocoach.engine import Engine
from robocoach.gateway import (
    OUTBOX_LIMIT,
    PROTOCOL,
    ConsoleConnection,
    RealtimeServer,
    load_events,
    main,
    write_events,
)
from robocoach.telemetry import parse_log
from .conftest import make_config


@pytest.fixture()
def session_files(tmp_path, catalog):
    config_text = make_config(["StaticQuads 2x6 fast", "QuadsOverRoll 1x5 medium"])
    config_path = tmp_path / "session.cfg"
    config_path.write_text(config_text)
    config = parse_config(config_text, catalog)
    script, log, engine = drive_session(config)
    events_path = tmp_path / "session.events"
    write_events(events_path, script)
    return config_path, events_path, tmp_path


def run_cli(*argv) -> tuple[int, str]:
    proc = subprocess.run(
        [sys.executable, "-m", "robocoach.gateway", *argv],
        capture_output=True,
        text=True,
    )
    return proc.returncode, proc.stdout + proc.stderr


def test_fast_run_completes_and_prints_summary(session_files):
    config_path, events_path, tmp = session_files
    code, out = run_cli(
        "run", "--config", str(config_path), "--mode", "fast",
        "--events", str(events_path), "--log", str(tmp / "out.jsonl"),
    )
    assert code == 0, out
    assert "completed:    yes" in out
    assert re.search(r"duration:\s+\d{2,}:\d{2}", out)


def test_fast_run_twice_byte_identical_logs(session_files):
    config_path, events_path, tmp = session_files
    for name in ("a.jsonl", "b.jsonl"):
        code, out = run_cli(
            "run", "--config", str(config_path), "--mode", "fast",
            "--events", str(events_path), "--log", str(tmp / name), "--seed", "7",
        )
        assert code == 0, out
    assert (tmp / "a.jsonl").read_bytes() == (tmp / "b.jsonl").read_bytes()


def test_fast_mode_requires_events_file(session_files):
    config_path, _, _ = session_files
    code, out = run_cli("run", "--config", str(config_path), "--mode", "fast")
    assert code == 2
    assert "--events" in out


def test_validate_accepts_good_rejects_bad(tmp_path):
    good = tmp_path / "good.cfg"
    good.write_text(make_config(["StaticQuads 1x5 fast"]))
    code, out = run_cli("validate", "--config", str(good))
    assert code == 0 and "OK" in out

    bad = tmp_path / "bad.cfg"
    bad.write_text(make_config(["StaticQuads 1x5 fast"]).replace("sets = 1", "sets = 0"))
    code, out = run_cli("validate", "--config", str(bad))
    assert code == 1
    assert re.search(r"line \d+", out)


def test_analyze_prints_table_and_writes_sidecar(session_files):
    config_path, events_path, tmp = session_files
    log_path = tmp / "run.jsonl"
    run_cli("run", "--config", str(config_path), "--mode", "fast",
            "--events", str(events_path), "--log", str(log_path))
    code, out = run_cli("analyze", "--log", str(log_path))
    assert code == 0
    assert "session summary" in out
    assert (tmp / "run.summary.json").exists()
    code, out = run_cli("analyze", "--log", str(log_path), "--report", "assistance", "--json")
    assert code == 0
    document = json.loads(out)
    assert document["by_kind"]["KeepingPace"]["occurrences"] > 0


def test_bad_events_file_rejected(tmp_path, session_files):
    config_path, _, _ = session_files
    bad = tmp_path / "bad.events"
    bad.write_text('{"at": 5, "kind": "Nonsense"}\n')
    code, out = run_cli("run", "--config", str(config_path), "--mode", "fast",
                        "--events", str(bad), "--log", str(tmp_path / "x.jsonl"))
    assert code == 1
    assert "unknown event kind" in out


def test_load_events_sorts_and_validates(tmp_path):
    path = tmp_path / "events.jsonl"
    path.write_text(
        '{"at": 500, "kind": "AssistanceDone"}\n'
        "# comment\n"
        '{"at": 100, "kind": "SpeechText", "text": "go"}\n'
    )
    records = load_events(str(path))
    assert [r["at"] for r in records] == [100, 500]
    path.write_text("not json\n")
    with pytest.raises(ValueError):
        load_events(str(path))


def test_synthetic_button_up_injected_after_timeout():
    config = parse_config(make_config(["StaticQuads 1x2 fast"]))
    engine = Engine(config)
    engine.start()
    engine.post({"at": 100, "kind": "ButtonDown", "button": "Front"})
    # no matching ButtonUp: engine releases it after press_timeout_ms
    while engine.process_next():
        pass
    assert engine.synthetic_ups == 1
    gestures = [e for e in engine.log.events if e.kind == "GestureReceived"]
    assert gestures and gestures[0].data["gesture"] == "LongPress"


def test_outbox_drops_oldest_when_congested():
    class Socket:
        async def send(self, data):
            pass

    conn = ConsoleConnection(Socket())
    for n in range(OUTBOX_LIMIT + 50):
        conn.send({"kind": "CueFrame", "n": n})
    assert len(conn.outbox) == OUTBOX_LIMIT
    assert conn.outbox[0]["n"] == 50          # oldest were dropped
    seqs = [m["seq"] for m in conn.outbox]
    assert seqs == sorted(seqs)               # seq still strictly increasing


# -- realtime server over a live socket ---------------------------------------


class ConsoleClient:
    def __init__(self, url):
        self.url = url
        self.seq = 0
        self.received = []
        self.ws = None

    async def __aenter__(self):
        import websockets

        self.ws = await websockets.connect(self.url)
        await self.send("Hello", protocol=PROTOCOL)
        return self

    async def __aexit__(self, *exc):
        await self.ws.close()

    async def send(self, kind, **payload):
        self.seq += 1
        await self.ws.send(json.dumps({"kind": kind, "seq": self.seq, **payload}))

    async def recv(self, timeout=10.0):
        raw = await asyncio.wait_for(self.ws.recv(), timeout)
        message = json.loads(raw)
        self.received.append(message)
        return message

    async def recv_until(self, predicate, timeout=20.0):
        async def loop():
            while True:
                message = await self.recv()
                if predicate(message):
                    return message

        return await asyncio.wait_for(loop(), timeout)


async def _serve_for_test(config_text, time_scale=50.0):
    from websockets.asyncio.server import serve

    catalog_config = parse_config(config_text)
    engine = Engine(catalog_config)
    from robocoach.catalog import Catalog

    server_state = RealtimeServer(engine, Catalog.load_default(), time_scale=time_scale)
    server = await serve(server_state.handle_connection, "127.0.0.1", 0)
    port = server.sockets[0].getsockname()[1]
    run_task = asyncio.ensure_future(server_state.run())
    return server, server_state, run_task, f"ws://127.0.0.1:{port}/ws", engine


def test_snapshot_on_join_and_mid_session_state():
    async def scenario():
        server, state, run_task, url, engine = await _serve_for_test(
            make_config(["StaticQuads 1x3 fast"])
        )
        try:
            async with ConsoleClient(url) as early:
                hello = await early.recv()
                assert hello["kind"] == "Hello" and hello["protocol"] == PROTOCOL
                snapshot = await early.recv()
                assert snapshot["kind"] == "StateUpdate" and snapshot.get("snapshot")
                # second console joins later and still gets a full snapshot first
                await early.recv_until(
                    lambda m: m["kind"] == "StateUpdate" and m["state"]["phase"] == "Greeting"
                )
                async with ConsoleClient(url) as late:
                    await late.recv()
                    late_snapshot = await late.recv()
                    assert late_snapshot.get("snapshot")
                    assert late_snapshot["state"]["phase"] != "Idle"
                await early.send("TherapistAbort")
                await early.recv_until(lambda m: m["kind"] == "SessionSummary")
        finally:
            server.close()
            await asyncio.wait_for(run_task, timeout=10)
        assert engine.orchestrator.phase.value == "Aborted"

    asyncio.run(scenario())


def test_two_consoles_inputs_serialized_in_arrival_order():
    async def scenario():
        server, state, run_task, url, engine = await _serve_for_test(
            make_config(["StaticQuads 1x3 fast"]), time_scale=10.0
        )
        try:
            async with ConsoleClient(url) as a, ConsoleClient(url) as b:
                await a.recv(); await a.recv()
                await b.recv(); await b.recv()
                # a quick tap from each console, close together in time
                await a.send("ButtonDown", button="Front")
                await asyncio.sleep(0.01)
                await a.send("ButtonUp", button="Front")
                await asyncio.sleep(0.08)
                await b.send("ButtonDown", button="Rear")
                await asyncio.sleep(0.01)
                await b.send("ButtonUp", button="Rear")
                await asyncio.sleep(0.2)
                await a.send("TherapistAbort")
                await a.recv_until(lambda m: m["kind"] == "SessionSummary")
        finally:
            server.close()
            await asyncio.wait_for(run_task, timeout=10)
        gestures = [e for e in engine.log.events if e.kind == "GestureReceived"]
        buttons = [g.data.get("button") for g in gestures if g.data["gesture"] == "SingleTap"]
        assert buttons == ["Front", "Rear"]          # arrival order preserved

    asyncio.run(scenario())


def test_protocol_mismatch_refused():
    async def scenario():
        import websockets

        server, state, run_task, url, engine = await _serve_for_test(
            make_config(["StaticQuads 1x3 fast"])
        )
        try:
            ws = await websockets.connect(url)
            await ws.send(json.dumps({"kind": "Hello", "protocol": "robocoach/999"}))
            raw = await asyncio.wait_for(ws.recv(), 5)
            reply = json.loads(raw)
            assert reply["kind"] == "Error" and "protocol" in reply["error"]
            with pytest.raises(websockets.exceptions.ConnectionClosed):
                await asyncio.wait_for(ws.recv(), 5)
        finally:
            server.close()
            run_task.cancel()

    asyncio.run(scenario())


def test_malformed_message_gets_error_reply_connection_stays_up():
    async def scenario():
        server, state, run_task, url, engine = await _serve_for_test(
            make_config(["StaticQuads 1x3 fast"])
        )
        try:
            async with ConsoleClient(url) as client:
                await client.recv(); await client.recv()
                await client.ws.send("this is not json")
                error = await client.recv_until(lambda m: m["kind"] == "Error")
                assert "malformed" in error["error"]
                # connection still works
                await client.send("TherapistAbort")
                await client.recv_until(lambda m: m["kind"] == "SessionSummary")
        finally:
            server.close()
            await asyncio.wait_for(run_task, timeout=10)

    asyncio.run(scenario())


def test_scripted_session_replays_identically_through_cli(tmp_path, catalog):
    # record a live session, replay its script through the CLI, logs equal
    config_text = make_config(["Bridge 1x4 medium"], seed=5)
    config = parse_config(config_text, catalog)
    script, live_log, _ = drive_session(config)
    config_path = tmp_path / "s.cfg"
    config_path.write_text(config_text)
    events_path = tmp_path / "s.events"
    write_events(events_path, script)
    log_path = tmp_path / "replayed.jsonl"
    code, out = run_cli("run", "--config", str(config_path), "--mode", "fast",
                        "--events", str(events_path), "--log", str(log_path))
    assert code == 0, out
    assert parse_log(log_path.read_text()) == live_log.events
