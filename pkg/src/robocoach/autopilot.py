"""Simulated session participant.

Watches a live engine and answers its prompts the way a cooperative
patient/carer pair would: says "go" to speech prompts, taps the head at
keep-pace prompts, and confirms assistance requests after a realistic
handling delay.  Every input it posts is recorded, so a drive produces
a scripted-events file that replays to the identical session.
"""

from __future__ import annotations

import random
from dataclasses import dataclass, replace

from .catalog import AssistanceKind
from .config import SessionConfig
from .engine import Engine
from .telemetry import EventLog

TAP_HOLD_MS = 120


@dataclass(frozen=True)
class Policy:
    """Response delays for the simulated participants (milliseconds)."""

    continue_delay_ms: int = 8_000         # rest before tapping to go on
    speak_delay_ms: int = 1_200            # latency answering a speech prompt
    positioning_delay_ms: int = 25_000
    aux_aid_delay_ms: int = 30_000
    posture_change_delay_ms: int = 35_000
    answer_speech: bool = True             # answer bounded prompts by voice
    answer_open_question: bool = True

    def assistance_delay(self, kind: str) -> int:
        return {
            AssistanceKind.POSITIONING.value: self.positioning_delay_ms,
            AssistanceKind.AUXILIARY_AID.value: self.aux_aid_delay_ms,
            AssistanceKind.POSTURE_CHANGE.value: self.posture_change_delay_ms,
        }.get(kind, self.continue_delay_ms)


def jittered(policy: Policy, rng: random.Random) -> Policy:
    """Vary a policy's delays for property runs (still deterministic per rng)."""
    return replace(
        policy,
        continue_delay_ms=rng.randrange(2_000, 20_000),
        speak_delay_ms=rng.randrange(300, 1_800),
        positioning_delay_ms=rng.randrange(8_000, 55_000),
        aux_aid_delay_ms=rng.randrange(8_000, 55_000),
        posture_change_delay_ms=rng.randrange(8_000, 55_000),
    )


def tap_records(at: int, button: str = "Front") -> list[dict]:
    return [
        {"at": at, "kind": "ButtonDown", "button": button},
        {"at": at + TAP_HOLD_MS, "kind": "ButtonUp", "button": button},
    ]


def speed_chord_records(at: int, slower: bool, front_means_slower: bool = True) -> list[dict]:
    """Middle sustained hold plus a double tap on the matching button."""
    button = ("Front" if slower else "Rear") if front_means_slower else ("Rear" if slower else "Front")
    return [
        {"at": at, "kind": "ButtonDown", "button": "Middle"},
        {"at": at + 900, "kind": "ButtonDown", "button": button},
        {"at": at + 980, "kind": "ButtonUp", "button": button},
        {"at": at + 1_100, "kind": "ButtonDown", "button": button},
        {"at": at + 1_180, "kind": "ButtonUp", "button": button},
        {"at": at + 1_400, "kind": "ButtonUp", "button": "Middle"},
    ]


def pause_chord_records(at: int) -> list[dict]:
    return [
        {"at": at, "kind": "ButtonDown", "button": "Front"},
        {"at": at + 50, "kind": "ButtonDown", "button": "Rear"},
        {"at": at + 1_000, "kind": "ButtonUp", "button": "Front"},
        {"at": at + 1_050, "kind": "ButtonUp", "button": "Rear"},
    ]


class Autopilot:
    """Attach to an engine; respond to prompts; record the input script."""

    def __init__(self, engine: Engine, policy: Policy | None = None):
        self.engine = engine
        self.policy = policy or Policy()
        self.script: list[dict] = []
        self._interrupted = False
        engine.add_listener(self._on_notification)

    def _post(self, record: dict) -> None:
        self.script.append(record)
        self.engine.post(record)

    def _post_all(self, records: list[dict]) -> None:
        for record in records:
            self._post(record)

    def _on_notification(self, kind: str, at: int, payload) -> None:
        if self.engine.terminal:
            return
        if kind == "prompt":
            self._on_prompt(at, payload)
        elif kind == "assistance":
            self._on_assistance(at, payload)
        elif kind == "state":
            self._on_state(at, payload)

    def _on_state(self, at: int, payload: dict) -> None:
        """Re-answer anything whose reply was swallowed by a pause or fault.

        An answer posted before an interruption lands while the session
        is frozen and gets ignored; once the session is restored, act on
        whatever the snapshot says is still awaited.
        """
        phase = payload.get("phase")
        if phase in ("Paused", "Faulted"):
            self._interrupted = True
            return
        if not self._interrupted:
            return
        self._interrupted = False
        pending = payload.get("pending_assistance")
        if phase in ("PositioningRequest", "AssistanceRequest") and pending:
            self._post({"at": at + self.policy.assistance_delay(pending), "kind": "AssistanceDone"})
        elif phase in ("AwaitContinue", "SetRest", "ToyRelayActive", "Greeting"):
            self._post_all(tap_records(at + self.policy.continue_delay_ms))

    def _on_prompt(self, at: int, payload: dict) -> None:
        vocabulary = payload.get("vocabulary", [])
        window_ms = payload.get("window_ms")
        if "good" in vocabulary:
            if self.policy.answer_open_question:
                self._post({"at": at + self.policy.speak_delay_ms, "kind": "SpeechText", "text": "good"})
            return
        if window_ms is not None and self.policy.answer_speech:
            self._post({"at": at + self.policy.speak_delay_ms, "kind": "SpeechText", "text": "go"})
            return
        delay = self.policy.continue_delay_ms if window_ms is None else max(
            self.policy.continue_delay_ms, window_ms + 1_000
        )
        self._post_all(tap_records(at + delay))

    def _on_assistance(self, at: int, payload: dict) -> None:
        kind = payload.get("assistance", "")
        if kind == AssistanceKind.KEEPING_PACE.value:
            return                          # answered via the prompt hook
        delay = self.policy.assistance_delay(kind)
        self._post({"at": at + delay, "kind": "AssistanceDone"})


def drive_session(
    config: SessionConfig, policy: Policy | None = None
) -> tuple[list[dict], EventLog, Engine]:
    """Run a full session under autopilot; returns (script, log, engine)."""
    engine = Engine(config)
    pilot = Autopilot(engine, policy)
    engine.start()
    log = engine.run()
    return pilot.script, log, engine
