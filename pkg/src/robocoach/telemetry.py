"""Append-only session event log and its analyzers.

The log is the single source of truth about what happened in a session:
one JSON record per line, ordered by virtual timestamp, starting with
SessionStarted and closed by SessionEnded.  The analyzers derive the
session summary table and the human-assistance time/occurrence report
from raw logs alone, so completed sessions can be re-analyzed offline.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

SCHEMA_VERSION = 1

EVENT_KINDS = frozenset(
    {
        "SessionStarted",
        "ActivityStarted",
        "SetStarted",
        "RepCounted",
        "SetCompleted",
        "ActivityCompleted",
        "AssistanceRequested",
        "AssistanceCompleted",
        "GestureReceived",
        "SpeechOutcome",
        "SpeedChanged",
        "PausedAt",
        "ResumedAt",
        "FaultOccurred",
        "EngineerIntervention",
        "IllegalEventIgnored",
        "SessionEnded",
    }
)


class TelemetryError(Exception):
    pass


class NonMonotonicTimestamp(TelemetryError):
    pass


class SchemaViolation(TelemetryError):
    pass


class MalformedLog(TelemetryError):
    def __init__(self, message: str, index: int):
        super().__init__(f"event {index}: {message}")
        self.index = index


@dataclass(frozen=True)
class SessionEvent:
    at: int
    kind: str
    data: dict = field(default_factory=dict)

    def to_line(self) -> str:
        record = {"at": self.at, "kind": self.kind, **self.data}
        return json.dumps(record, sort_keys=True, ensure_ascii=False, separators=(",", ":"))


def event(at: int, kind: str, **data) -> SessionEvent:
    if kind not in EVENT_KINDS:
        raise SchemaViolation(f"unknown event kind {kind!r}")
    return SessionEvent(at=at, kind=kind, data=data)


def parse_line(line: str, index: int = 0) -> SessionEvent:
    try:
        record = json.loads(line)
    except json.JSONDecodeError as exc:
        raise MalformedLog(f"bad JSON: {exc}", index) from None
    if not isinstance(record, dict) or "at" not in record or "kind" not in record:
        raise MalformedLog("record needs 'at' and 'kind'", index)
    at = record.pop("at")
    kind = record.pop("kind")
    if not isinstance(at, int) or kind not in EVENT_KINDS:
        raise MalformedLog(f"bad timestamp or kind: {kind!r}", index)
    return SessionEvent(at=at, kind=kind, data=record)


def parse_log(text: str) -> list[SessionEvent]:
    events = []
    for index, line in enumerate(text.splitlines()):
        if not line.strip():
            continue
        events.append(parse_line(line, index))
    return events


class EventLog:
    """Ordered append-only event store enforcing the log schema laws."""

    def __init__(self):
        self.events: list[SessionEvent] = []

    def append(self, ev: SessionEvent) -> None:
        if ev.kind not in EVENT_KINDS:
            raise SchemaViolation(f"unknown event kind {ev.kind!r}")
        if not self.events:
            if ev.kind != "SessionStarted":
                raise SchemaViolation("log must start with SessionStarted")
        else:
            if ev.kind == "SessionStarted":
                raise SchemaViolation("duplicate SessionStarted")
            last = self.events[-1]
            if last.kind == "SessionEnded":
                raise SchemaViolation("append after SessionEnded")
            if ev.at < last.at:
                raise NonMonotonicTimestamp(f"{ev.at} < {last.at}")
        self.events.append(ev)

    def to_text(self) -> str:
        return "".join(ev.to_line() + "\n" for ev in self.events)

    def write(self, path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(self.to_text())


@dataclass(frozen=True)
class SessionSummary:
    exercises_programmed: tuple[str, ...]
    exercises_completed: tuple[str, ...]
    duration_ms: int
    duration_mmss: str
    disruptions: tuple[str, ...]
    completed: bool
    help_requests: int
    sets_completed: int
    reps_counted: int


def format_mmss(duration_ms: int) -> str:
    seconds = duration_ms // 1000            # truncate, matching log granularity
    return f"{seconds // 60:02d}:{seconds % 60:02d}"


def _check_well_formed(events: list[SessionEvent]) -> None:
    if not events:
        raise MalformedLog("empty log", 0)
    if events[0].kind != "SessionStarted":
        raise MalformedLog("log must start with SessionStarted", 0)
    last_at = events[0].at
    for index, ev in enumerate(events[1:], start=1):
        if ev.kind == "SessionStarted":
            raise MalformedLog("duplicate SessionStarted", index)
        if ev.at < last_at:
            raise MalformedLog("timestamps decrease", index)
        last_at = ev.at
        if ev.kind == "SessionEnded" and index != len(events) - 1:
            raise MalformedLog("events after SessionEnded", index + 1)
    if events[-1].kind != "SessionEnded":
        raise MalformedLog("log missing SessionEnded", len(events) - 1)


def summarize(events: list[SessionEvent]) -> SessionSummary:
    """Fold one well-formed log into the session summary."""
    _check_well_formed(events)
    started = events[0]
    program = started.data.get("program")
    if not isinstance(program, list) or not program:
        raise MalformedLog("SessionStarted carries no program", 0)
    programmed = tuple(entry["activity"] for entry in program)

    completed_activities: list[str] = []
    disruptions: list[str] = []
    help_requests = 0
    sets_completed = 0
    reps_counted = 0
    for ev in events:
        if ev.kind == "ActivityCompleted" and ev.data.get("activity") in programmed:
            completed_activities.append(ev.data["activity"])
        elif ev.kind == "FaultOccurred":
            disruptions.append(ev.data.get("fault", "unknown"))
        elif ev.kind == "AssistanceRequested":
            help_requests += 1
        elif ev.kind == "SetCompleted":
            sets_completed += 1
        elif ev.kind == "RepCounted":
            reps_counted += 1

    duration_ms = events[-1].at - events[0].at
    remaining = list(completed_activities)
    completed = True
    for activity in programmed:
        if activity in remaining:
            remaining.remove(activity)
        else:
            completed = False
    return SessionSummary(
        exercises_programmed=programmed,
        exercises_completed=tuple(completed_activities),
        duration_ms=duration_ms,
        duration_mmss=format_mmss(duration_ms),
        disruptions=tuple(disruptions),
        completed=completed,
        help_requests=help_requests,
        sets_completed=sets_completed,
        reps_counted=reps_counted,
    )


@dataclass(frozen=True)
class KindAggregate:
    total_time_ms: int
    occurrences: int
    per_session_ms: tuple[int, ...]           # total per analyzed log, in input order


@dataclass(frozen=True)
class AssistanceReport:
    by_kind: dict
    unmatched: tuple[str, ...]                # "session#i kind" labels, non-fatal

    def occurrences(self, kind: str) -> int:
        agg = self.by_kind.get(kind)
        return agg.occurrences if agg else 0

    def total_time_ms(self, kind: str) -> int:
        agg = self.by_kind.get(kind)
        return agg.total_time_ms if agg else 0


ASSISTANCE_KINDS = ("Positioning", "AuxiliaryAid", "PostureChange", "KeepingPace")


def assistance_report(logs: list[list[SessionEvent]]) -> AssistanceReport:
    """Aggregate human-assistance time and occurrence counts across logs.

    Requests pair with the next completion of the same kind, in order; a
    request with no completion is reported as unmatched rather than failing.
    """
    totals = {kind: 0 for kind in ASSISTANCE_KINDS}
    counts = {kind: 0 for kind in ASSISTANCE_KINDS}
    per_session = {kind: [] for kind in ASSISTANCE_KINDS}
    unmatched: list[str] = []
    for session_index, events in enumerate(logs):
        open_requests: dict[str, list[int]] = {kind: [] for kind in ASSISTANCE_KINDS}
        session_totals = {kind: 0 for kind in ASSISTANCE_KINDS}
        for ev in events:
            kind = ev.data.get("assistance")
            if ev.kind == "AssistanceRequested" and kind in open_requests:
                open_requests[kind].append(ev.at)
            elif ev.kind == "AssistanceCompleted" and kind in open_requests:
                if not open_requests[kind]:
                    unmatched.append(f"session#{session_index} stray completion {kind}")
                    continue
                started_at = open_requests[kind].pop(0)
                elapsed = ev.at - started_at
                totals[kind] += elapsed
                session_totals[kind] += elapsed
                counts[kind] += 1
        for kind, pending in open_requests.items():
            for _ in pending:
                unmatched.append(f"session#{session_index} unanswered {kind}")
        for kind in ASSISTANCE_KINDS:
            per_session[kind].append(session_totals[kind])
    by_kind = {
        kind: KindAggregate(
            total_time_ms=totals[kind],
            occurrences=counts[kind],
            per_session_ms=tuple(per_session[kind]),
        )
        for kind in ASSISTANCE_KINDS
    }
    return AssistanceReport(by_kind=by_kind, unmatched=tuple(unmatched))
