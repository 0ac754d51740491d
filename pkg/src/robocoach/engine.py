"""Deterministic session engine.

Single-threaded event loop over the virtual clock: external inputs
(button edges, speech text, assistance confirmations, abort/reset) are
serialized into one ordered queue together with every internal timer,
and each queue entry drives the orchestrator through exactly one step.
Identical configuration, seed and input stream therefore produce
byte-identical telemetry.

The engine owns the pieces around the state machine: the gesture
classifier, the speech listening window, the LED cue controller and the
simulated robot (battery, faults).  Hosts subscribe with listeners to
mirror utterances, cues, rep counts and state updates out to consoles.
"""

from __future__ import annotations

import random
from dataclasses import dataclass

from . import fsm
from .catalog import Catalog
from .clock import Scheduler, VirtualClock
from .config import SessionConfig
from .cues import CueController
from .gestures import Button, GestureClassifier, GestureKind
from .robot import FaultKind, FaultProfile, SimRobot
from .speech import PhrasePicker, PhrasePools, SpeechOutcome, SpeechPrompt
from .telemetry import EventLog, event

INPUT_KINDS = frozenset(
    {
        "ButtonDown",
        "ButtonUp",
        "SpeechText",
        "AssistanceDone",
        "TherapistAbort",
        "EngineerReset",
        "InjectFault",
    }
)


@dataclass
class _Listen:
    prompt: SpeechPrompt
    timeout_timer: object | None       # None for unbounded windows
    suspended_remaining_ms: int | None = None


class _OrchestratorClock(fsm.ClockHandle):
    def __init__(self, engine: "Engine"):
        self.engine = engine

    def now(self) -> int:
        return self.engine.clock.now_ms

    def at(self, due_ms: int, tag: str):
        return self.engine.sched.at(due_ms, ("orch", tag))


class Engine:
    def __init__(self, config: SessionConfig, catalog: Catalog | None = None):
        self.config = config
        self.catalog = catalog or Catalog.load_default()
        self.pools = PhrasePools.load_default(self.catalog)
        self.clock = VirtualClock()
        self.sched = Scheduler()
        self.cues = CueController()
        self.log = EventLog()
        params = config.engine
        self.robot = SimRobot(
            FaultProfile(
                fall_probability_per_dance=params.fall_probability,
                battery_capacity_ms=int(params.battery_capacity_min * 60_000),
                idle_drain_factor=params.idle_drain_factor,
                seed=config.seed,
            )
        )
        self.classifier = GestureClassifier(params)
        picker = PhrasePicker(self.pools, random.Random(f"{config.seed}:phrases"))
        self.orchestrator = fsm.Orchestrator(
            config, self.catalog, picker, _OrchestratorClock(self)
        )
        self._speech_rng = random.Random(f"{config.seed}:speech")
        self._listen: _Listen | None = None
        self._suspended = False            # paused or faulted: inputs frozen
        self._listeners: list = []
        self._open_presses: dict = {}      # Button -> press-timeout timer
        self._fall_planned = False
        self._battery_fault_pending = False
        self.synthetic_ups = 0
        self._last_fingerprint: dict | None = None
        self._started = False

    # -- host surface ------------------------------------------------------

    def add_listener(self, callback) -> None:
        """callback(kind, at_ms, payload): utterance, cue, rep, state, event,
        assistance, prompt, notice."""
        self._listeners.append(callback)

    def _notify(self, kind: str, at: int, payload) -> None:
        for callback in self._listeners:
            callback(kind, at, payload)

    @property
    def terminal(self) -> bool:
        return self.orchestrator.phase in fsm.TERMINAL_PHASES

    @property
    def now_ms(self) -> int:
        return self.clock.now_ms

    def start(self) -> None:
        assert not self._started
        self._started = True
        self._execute(self.clock.now_ms, self.orchestrator.start())
        self._after_step()

    def post(self, record: dict) -> None:
        """Queue one external input record ({"at": ms, "kind": ..., ...})."""
        kind = record.get("kind")
        if kind not in INPUT_KINDS:
            raise ValueError(f"unknown input kind {kind!r}")
        at = max(int(record.get("at", self.clock.now_ms)), self.clock.now_ms)
        self.sched.at(at, ("input", record), priority=1)

    def next_due(self) -> int | None:
        due = self.sched.next_due()
        battery = self._battery_due()
        if battery is not None and (due is None or battery <= due):
            return battery
        return due

    def process_next(self) -> bool:
        """Handle the next queue entry; False when nothing is pending."""
        if self.terminal or not self._started:
            return False
        battery = self._battery_due()
        queue_due = self.sched.next_due()
        if battery is not None and (queue_due is None or battery <= queue_due):
            self._advance(battery)
            self._battery_fault_pending = True
            self._step(fsm.FaultInjected(FaultKind.BATTERY_DRAIN))
            return True
        timer = self.sched.pop_next()
        if timer is None:
            return False
        self._advance(timer.due_ms)
        self._dispatch(timer.payload)
        return True

    def run(self, max_steps: int = 2_000_000) -> EventLog:
        """Drain the queue until the session terminates or input runs out."""
        if not self._started:
            self.start()
        steps = 0
        while not self.terminal and self.process_next():
            steps += 1
            if steps >= max_steps:
                raise RuntimeError("engine did not terminate (runaway session)")
        return self.log

    def run_scripted(self, records: list[dict]) -> EventLog:
        if not self._started:
            self.start()
        for record in records:
            self.post(record)
        return self.run()

    # -- internals -----------------------------------------------------------

    def _advance(self, t: int) -> None:
        self.clock.advance_to(t)
        self.robot.advance_to(t)

    def _battery_due(self) -> int | None:
        if self._battery_fault_pending or self._suspended or self.terminal:
            return None
        if self.orchestrator.phase in (fsm.Phase.IDLE,):
            return None
        predicted = self.robot.predicted_empty_at()
        if predicted is None:
            return None
        queue_due = self.sched.next_due()
        if queue_due is None and predicted > self.clock.now_ms:
            # Nothing else will ever run; don't invent an endless idle wait.
            return None
        return max(predicted, self.clock.now_ms)

    def _dispatch(self, payload) -> None:
        kind = payload[0]
        if kind == "orch":
            self._step(fsm.TimerFired(payload[1]))
        elif kind == "input":
            self._handle_input(payload[1])
        elif kind == "speech_timeout":
            if self._listen is not None and self._listen.timeout_timer is payload[1]:
                self._resolve_listen(SpeechOutcome.TIMED_OUT)
                self._step(fsm.SpeechTimeout())
        elif kind == "classifier":
            self._pump_gestures(self.classifier.advance(self.clock.now_ms))
        elif kind == "fall":
            if self.robot.current_motion_id == payload[1]:
                self.robot.fall(self.clock.now_ms)
                self._step(fsm.FaultInjected(FaultKind.FALL_DURING_DANCE))
        elif kind == "press_timeout":
            button = payload[1]
            if self._open_presses.pop(button, None) is not None:
                self.synthetic_ups += 1
                self._notify("notice", self.clock.now_ms, f"synthetic ButtonUp({button.value})")
                self._pump_gestures(self.classifier.feed(button, False, self.clock.now_ms))

    def _handle_input(self, record: dict) -> None:
        kind = record["kind"]
        now = self.clock.now_ms
        if kind == "ButtonDown" or kind == "ButtonUp":
            try:
                button = Button(record["button"])
            except (KeyError, ValueError):
                self._notify("notice", now, f"bad button in {record}")
                return
            if kind == "ButtonDown":
                old = self._open_presses.pop(button, None)
                if old is not None:
                    old.cancel()
                self._open_presses[button] = self.sched.at(
                    now + self.config.engine.press_timeout_ms, ("press_timeout", button)
                )
                self._pump_gestures(self.classifier.feed(button, True, now))
            else:
                timer = self._open_presses.pop(button, None)
                if timer is not None:
                    timer.cancel()
                self._pump_gestures(self.classifier.feed(button, False, now))
        elif kind == "SpeechText":
            self._handle_speech_text(str(record.get("text", "")))
        elif kind == "AssistanceDone":
            self._step(fsm.AssistanceDone())
        elif kind == "TherapistAbort":
            self._step(fsm.TherapistAbort())
        elif kind == "EngineerReset":
            if self.orchestrator.phase is fsm.Phase.FAULTED:
                self.robot.recharge()
                self._battery_fault_pending = False
            self._step(fsm.EngineerReset())
        elif kind == "InjectFault":
            try:
                fault = FaultKind(record["fault"])
            except (KeyError, ValueError):
                self._notify("notice", now, f"bad fault in {record}")
                return
            if fault is FaultKind.FALL_DURING_DANCE:
                self.robot.fall(now)
            self._step(fsm.FaultInjected(fault))

    def _handle_speech_text(self, text: str) -> None:
        now = self.clock.now_ms
        listen = self._listen
        if listen is None or self._suspended:
            return                      # nobody listening; silently dropped
        token = listen.prompt.match(text)
        if token is None:
            return
        p = self.config.engine.speech_false_negative
        if p > 0 and self._speech_rng.random() < p:
            return                      # injected recognition miss
        self._resolve_listen(SpeechOutcome.MATCHED, token=token)
        self._step(fsm.SpeechHeard(token))

    def _pump_gestures(self, gestures) -> None:
        for gesture in gestures:
            payload = {"gesture": gesture.kind.value}
            if gesture.button is not None:
                payload["button"] = gesture.button.value
            self._append_log(event(self.clock.now_ms, "GestureReceived", **payload))
            if (
                gesture.kind is GestureKind.SINGLE_TAP
                and self._listen is not None
                and not self._suspended
            ):
                self._resolve_listen(SpeechOutcome.FELL_BACK_TO_TACTILE)
            self._step(fsm.Gesture(gesture))
        self._arm_classifier_poll()

    def _arm_classifier_poll(self) -> None:
        deadline = self.classifier.next_deadline()
        if deadline is not None:
            self.sched.at(deadline, ("classifier",))

    # -- speech windows ----------------------------------------------------------

    def _open_listen(self, prompt: SpeechPrompt) -> None:
        self._close_listen_silently()
        timer = None
        if prompt.window_ms is not None:
            timer = self.sched.at(self.clock.now_ms + prompt.window_ms, None)
            timer.payload = ("speech_timeout", timer)
        self._listen = _Listen(prompt=prompt, timeout_timer=timer)

    def _close_listen_silently(self) -> None:
        if self._listen is not None and self._listen.timeout_timer is not None:
            self._listen.timeout_timer.cancel()
        self._listen = None

    def _resolve_listen(self, outcome: SpeechOutcome, token: str | None = None) -> None:
        data = {"outcome": outcome.value}
        if token is not None:
            data["token"] = token
        self._append_log(event(self.clock.now_ms, "SpeechOutcome", **data))
        self._close_listen_silently()

    def _suspend_listen(self) -> None:
        if self._listen is not None and self._listen.timeout_timer is not None:
            timer = self._listen.timeout_timer
            self._listen.suspended_remaining_ms = max(0, timer.due_ms - self.clock.now_ms)
            timer.cancel()
            self._listen.timeout_timer = None

    def _resume_listen(self) -> None:
        if self._listen is not None and self._listen.suspended_remaining_ms is not None:
            timer = self.sched.at(
                self.clock.now_ms + self._listen.suspended_remaining_ms, None
            )
            timer.payload = ("speech_timeout", timer)
            self._listen.timeout_timer = timer
            self._listen.suspended_remaining_ms = None

    # -- the step ------------------------------------------------------------------

    def _step(self, engine_event) -> None:
        commands = self.orchestrator.step(engine_event)
        self._execute(self.clock.now_ms, commands)
        self._after_step()

    def _append_log(self, ev) -> None:
        self.log.append(ev)
        self._notify("event", ev.at, ev)

    def _execute(self, at: int, commands) -> None:
        for cmd in commands:
            if isinstance(cmd, fsm.LogEvent):
                self._append_log(event(at, cmd.kind, **cmd.data))
            elif isinstance(cmd, fsm.Speak):
                self._notify("utterance", at, cmd.text)
            elif isinstance(cmd, fsm.SetCue):
                self.cues.set_effect(cmd.effect, at)
                self._notify("cue", at, cmd.effect.value)
            elif isinstance(cmd, fsm.StartMotion):
                self._start_motion(at, cmd)
            elif isinstance(cmd, fsm.RequestAssistance):
                self._notify(
                    "assistance", at, {"assistance": cmd.kind.value, "script": cmd.script}
                )
            elif isinstance(cmd, fsm.CountRep):
                self._notify("rep", at, cmd.n)
            elif isinstance(cmd, fsm.StartListening):
                self._open_listen(cmd.prompt)
                self._notify(
                    "prompt",
                    at,
                    {
                        "vocabulary": sorted(cmd.prompt.vocabulary),
                        "window_ms": cmd.prompt.window_ms,
                    },
                )

    def _start_motion(self, at: int, cmd: fsm.StartMotion) -> None:
        if cmd.motion_id.startswith("dance:") and not self._fall_planned:
            self._fall_planned = True
            fall_at = self.robot.plan_fall(at, cmd.duration_ms)
            if fall_at is not None:
                self.sched.at(fall_at, ("fall", cmd.motion_id))
        if cmd.duration_ms <= 0 and cmd.posture_on_complete is None:
            # Bare stop (pause/fault hold): legal even fallen or flat.
            self.robot.stop_motion(at)
        else:
            self.robot.start_motion(cmd.motion_id, cmd.duration_ms, at, cmd.posture_on_complete)

    def _after_step(self) -> None:
        phase = self.orchestrator.phase
        frozen = phase in (fsm.Phase.PAUSED, fsm.Phase.FAULTED)
        if frozen and not self._suspended:
            self._suspended = True
            self._suspend_listen()
        elif not frozen and self._suspended:
            self._suspended = False
            self._resume_listen()
        fingerprint = self.orchestrator.state_fingerprint()
        if fingerprint != self._last_fingerprint:
            self._last_fingerprint = fingerprint
            self._notify("state", self.clock.now_ms, fingerprint)
