"""Session orchestration finite state machine.

Sequences the whole session: greeting with a personalized introduction,
per-exercise demonstration, counted repetition sets with interleaved
utterances, untimed rests with keep-pace prompts, explicit requests for
the human assistance an activity needs, the toy-relay rounds and the
closing dance.  Pause, mid-set speed changes, faults and abort are
handled as first-class transitions.

The orchestrator is deterministic: given the same configuration, seed
and input event sequence it produces the same command stream.  It never
performs I/O; it emits :class:`Command` values and schedules timers via
the clock handle it was started with, and the engine around it executes
both.  Unexpected events are logged and ignored rather than failed on,
so a confused tap can never wedge a session.
"""

from __future__ import annotations

import random
from dataclasses import dataclass, field
from enum import Enum
from typing import Callable

from .catalog import (
    ActivityId,
    ActivityKind,
    AssistanceKind,
    Catalog,
    ExerciseSpec,
    Posture,
    SpeedSetting,
    rep_duration_ms,
)
from .config import ActivityConfig, SessionConfig
from .cues import CueEffect
from .gestures import GestureEvent, GestureKind
from .robot import RECOVERY_MOTION, FaultKind
from .speech import SpeechPrompt, go_prompt, open_prompt, PhrasePicker
from .telemetry import SCHEMA_VERSION

SETUP_MS = 1_500           # loading cue before the greeting starts
POINT_GESTURE_MS = 2_000   # toy-relay pointing gesture
STAND_UP_MS = 6_000        # recovery motion after a fall


class Phase(str, Enum):
    IDLE = "Idle"
    LOADING_CONFIG = "LoadingConfig"
    GREETING = "Greeting"
    POSITIONING_REQUEST = "PositioningRequest"
    ASSISTANCE_REQUEST = "AssistanceRequest"
    DEMONSTRATION = "Demonstration"
    SET_ACTIVE = "SetActive"
    SET_REST = "SetRest"
    AWAIT_CONTINUE = "AwaitContinue"
    TOY_RELAY_ACTIVE = "ToyRelayActive"
    FAREWELL_DANCE = "FarewellDance"
    PAUSED = "Paused"
    FAULTED = "Faulted"
    ABORTED = "Aborted"
    COMPLETED = "Completed"


TERMINAL_PHASES = frozenset({Phase.ABORTED, Phase.COMPLETED})
# Phases a pause chord can interrupt.
PAUSABLE_PHASES = frozenset(
    {
        Phase.GREETING,
        Phase.POSITIONING_REQUEST,
        Phase.ASSISTANCE_REQUEST,
        Phase.DEMONSTRATION,
        Phase.SET_ACTIVE,
        Phase.SET_REST,
        Phase.AWAIT_CONTINUE,
        Phase.TOY_RELAY_ACTIVE,
        Phase.FAREWELL_DANCE,
    }
)


# -- engine events ----------------------------------------------------------


@dataclass(frozen=True)
class Gesture:
    gesture: GestureEvent


@dataclass(frozen=True)
class SpeechHeard:
    token: str


@dataclass(frozen=True)
class SpeechTimeout:
    pass


@dataclass(frozen=True)
class TimerFired:
    tag: str


@dataclass(frozen=True)
class AssistanceDone:
    pass


@dataclass(frozen=True)
class FaultInjected:
    fault: FaultKind


@dataclass(frozen=True)
class EngineerReset:
    pass


@dataclass(frozen=True)
class TherapistAbort:
    pass


# -- commands ---------------------------------------------------------------


@dataclass(frozen=True)
class Speak:
    text: str


@dataclass(frozen=True)
class StartMotion:
    motion_id: str
    duration_ms: int
    posture_on_complete: Posture | None = None


@dataclass(frozen=True)
class SetCue:
    effect: CueEffect


@dataclass(frozen=True)
class RequestAssistance:
    kind: AssistanceKind
    script: str


@dataclass(frozen=True)
class CountRep:
    n: int


@dataclass(frozen=True)
class StartListening:
    prompt: SpeechPrompt


@dataclass(frozen=True)
class LogEvent:
    kind: str
    data: dict = field(default_factory=dict)


Command = object


class ClockHandle:
    """What the orchestrator needs from its host: time and timers.

    ``at(due_ms, tag)`` must deliver ``TimerFired(tag)`` back into
    ``step`` at the due time and return a cancellable handle.
    """

    def now(self) -> int:
        raise NotImplementedError

    def at(self, due_ms: int, tag: str):
        raise NotImplementedError


@dataclass
class _Snapshot:
    """Everything needed to restore the session after pause or fault."""

    phase: Phase
    program_index: int
    set_index: int
    rep_count: int
    effective_speed: SpeedSetting
    cue: CueEffect
    timers: list          # (tag, remaining_ms)
    motion: tuple | None  # (motion_id, remaining_ms, posture_on_complete)
    last_rep_offset: int | None
    stages: list
    on_continue: Callable | None
    pending_assistance: AssistanceKind | None
    listen_prompt: SpeechPrompt | None
    greeting_stage: str | None
    toy_round: int
    dance_remaining_ms: int | None
    inner: "_Snapshot | None" = None       # fault while paused keeps both


class Orchestrator:
    def __init__(
        self,
        config: SessionConfig,
        catalog: Catalog,
        picker: PhrasePicker,
        clock: ClockHandle,
    ):
        self.config = config
        self.catalog = catalog
        self.picker = picker
        self.clock = clock
        self.params = config.engine
        self.rng = random.Random(f"{config.seed}:orchestrator")

        self.phase = Phase.IDLE
        self.program_index = -1
        self.set_index = 0
        self.rep_count = 0
        self.effective_speed = SpeedSetting.MEDIUM
        self.robot_posture = Posture.CROUCHED

        self._out: list[Command] = []
        self._timers: dict = {}
        self._stages: list = []
        self._active_spec: ExerciseSpec | None = None
        self._active_entry: ActivityConfig | None = None
        self._on_continue: Callable | None = None
        self._pending_assistance: AssistanceKind | None = None
        self._listen_prompt: SpeechPrompt | None = None
        self._cue = CueEffect.ALL_OFF
        self._motion: tuple | None = None
        self._last_rep_at: int | None = None
        self._rep_duration = 0
        self._utterances_spoken = 0
        self._greeting_stage: str | None = None
        self._toy_round = 0
        self._toy_order: list[str] = []
        self._dance_remaining: int | None = None
        self._pause_snapshot: _Snapshot | None = None
        self._fault_snapshot: _Snapshot | None = None
        self._fault_kind: FaultKind | None = None
        self.illegal_events = 0

    # -- public surface ---------------------------------------------------

    def start(self) -> list[Command]:
        """Load the session: setup cue, telemetry header, then greeting."""
        assert self.phase is Phase.IDLE
        self.phase = Phase.LOADING_CONFIG
        self._log(
            "SessionStarted",
            schema_version=SCHEMA_VERSION,
            patient=self.config.patient_name,
            carer=self.config.carer_name,
            seed=self.config.seed,
            intro=self.config.intro_variant,
            entertainment=self.config.entertainment,
            program=[_echo_entry(e) for e in self.config.program],
        )
        self._set_cue(CueEffect.SETUP_IN_PROGRESS)
        self._schedule("boot", SETUP_MS)
        return self._drain()

    def step(self, event) -> list[Command]:
        """Advance the machine one input event; returns the commands."""
        if self.phase in TERMINAL_PHASES:
            return []
        if isinstance(event, TherapistAbort):
            self._end_session("Aborted")
        elif isinstance(event, TimerFired):
            self._on_timer(event.tag)
        elif isinstance(event, Gesture):
            self._on_gesture(event.gesture)
        elif isinstance(event, SpeechHeard):
            self._on_speech(event.token)
        elif isinstance(event, SpeechTimeout):
            self._on_speech_timeout()
        elif isinstance(event, AssistanceDone):
            self._on_assistance_done()
        elif isinstance(event, FaultInjected):
            self._on_fault(event.fault)
        elif isinstance(event, EngineerReset):
            self._on_engineer_reset()
        else:
            self._illegal(f"unknown event {type(event).__name__}")
        return self._drain()

    def state_fingerprint(self) -> dict:
        """Observable session state, timestamp-free (for wire and tests)."""
        now = self.clock.now()
        entry = self._active_entry
        return {
            "phase": self.phase.value,
            "program_index": self.program_index,
            "activity": self._active_spec.id.value if self._active_spec else None,
            "set_index": self.set_index,
            "rep_count": self.rep_count,
            "sets": entry.sets if entry else None,
            "reps": entry.reps if entry else None,
            "speed": self.effective_speed.label,
            "cue": self._cue.value,
            "pending_assistance": (
                self._pending_assistance.value if self._pending_assistance else None
            ),
            "timer_offsets": sorted(
                (tag, timer.due_ms - now) for tag, timer in self._timers.items() if timer.active
            ),
            "fault": self._fault_kind.value if self._fault_kind else None,
        }

    # -- helpers ------------------------------------------------------------

    def _drain(self) -> list[Command]:
        out, self._out = self._out, []
        return out

    def _emit(self, command: Command) -> None:
        self._out.append(command)

    def _log(self, kind: str, **data) -> None:
        self._emit(LogEvent(kind=kind, data=data))

    def _illegal(self, detail: str) -> None:
        self.illegal_events += 1
        self._log("IllegalEventIgnored", phase=self.phase.value, detail=detail)

    def _set_cue(self, effect: CueEffect) -> None:
        self._cue = effect
        self._emit(SetCue(effect))

    def _personalize(self, text: str) -> str:
        return text.replace("{patient}", self.config.patient_name).replace(
            "{carer}", self.config.carer_name
        )

    def _speech_ms(self, text: str) -> int:
        words = max(1, len(text.split()))
        return max(self.params.speak_min_ms, words * self.params.speak_ms_per_word)

    def _say(self, text: str, then_tag: str | None = None) -> int:
        """Speak (personalized); optionally schedule a tag after the utterance."""
        text = self._personalize(text)
        self._emit(Speak(text))
        duration = self._speech_ms(text)
        if then_tag is not None:
            self._schedule(then_tag, duration)
        return duration

    def _schedule(self, tag: str, delay_ms: int) -> None:
        old = self._timers.pop(tag, None)
        if old is not None:
            old.cancel()
        self._timers[tag] = self.clock.at(self.clock.now() + delay_ms, tag)

    def _cancel(self, tag: str) -> int | None:
        """Cancel a pending timer, returning its remaining time."""
        timer = self._timers.pop(tag, None)
        if timer is None or not timer.active:
            return None
        timer.cancel()
        return max(0, timer.due_ms - self.clock.now())

    def _cancel_all_timers(self) -> list:
        now = self.clock.now()
        remaining = []
        for tag, timer in self._timers.items():
            if timer.active:
                remaining.append((tag, max(0, timer.due_ms - now)))
                timer.cancel()
        self._timers.clear()
        return remaining

    def _start_motion(
        self, motion_id: str, duration_ms: int, posture: Posture | None = None
    ) -> None:
        self._emit(StartMotion(motion_id, duration_ms, posture))
        if duration_ms > 0:
            self._motion = (motion_id, self.clock.now() + duration_ms, posture)
        else:
            self._motion = None
            if posture is not None:
                self.robot_posture = posture

    def _motion_finished(self) -> None:
        if self._motion is not None:
            _, _, posture = self._motion
            if posture is not None:
                self.robot_posture = posture
            self._motion = None

    def _open_listen(self, prompt: SpeechPrompt) -> None:
        self._listen_prompt = prompt
        self._emit(StartListening(prompt))

    def _close_listen(self) -> None:
        self._listen_prompt = None

    def _request_pace(self) -> None:
        self._log("AssistanceRequested", assistance=AssistanceKind.KEEPING_PACE.value)
        self._pending_assistance = AssistanceKind.KEEPING_PACE

    def _complete_pace(self) -> None:
        if self._pending_assistance is AssistanceKind.KEEPING_PACE:
            self._log("AssistanceCompleted", assistance=AssistanceKind.KEEPING_PACE.value)
            self._pending_assistance = None

    # -- timers -------------------------------------------------------------

    def _on_timer(self, tag: str) -> None:
        timer = self._timers.pop(tag, None)
        if timer is None:
            self._illegal(f"stale timer {tag!r}")
            return
        handler = getattr(self, f"_t_{tag}", None)
        if handler is None:
            self._illegal(f"unhandled timer {tag!r}")
            return
        handler()

    def _t_boot(self) -> None:
        self.phase = Phase.GREETING
        self._greeting_stage = "speaking"
        self._set_cue(CueEffect.ALL_OFF)
        script = dict(self.catalog.lookup(ActivityId.INTRO_SPEECH).intro_variants)[
            self.config.intro_variant
        ]
        if self._intro_programmed():
            self._log("ActivityStarted", activity=ActivityId.INTRO_SPEECH.value)
        self._say(script, "greeting_said")

    def _t_greeting_said(self) -> None:
        self._greeting_stage = "open_question"
        self._say(self.catalog.common.open_question, "open_q_said")

    def _t_open_q_said(self) -> None:
        self._greeting_stage = "open_listen"
        self._set_cue(CueEffect.LISTEN_SIDE_LEDS)
        self._open_listen(open_prompt(self.params.speech_window_ms))

    def _t_open_r_said(self) -> None:
        self._ready_prompt()

    def _t_ready_said(self) -> None:
        self._greeting_stage = "ready_listen"
        self._set_cue(CueEffect.LISTEN_SIDE_LEDS)
        self._request_pace()
        self._open_listen(
            go_prompt(self.catalog.common.speech_fallback, self.params.speech_window_ms)
        )

    def _t_fallback_said(self) -> None:
        # Both channels stay open indefinitely after the fallback.
        self.phase = Phase.AWAIT_CONTINUE
        self._greeting_stage = None
        self._on_continue = self._finish_greeting
        self._set_cue(CueEffect.PROMPT_AND_LISTEN)
        self._open_listen(go_prompt("", window_ms=None))

    def _t_demo_done(self) -> None:
        self._motion_finished()
        self._invite_first_set()

    def _t_rep(self) -> None:
        self._count_rep()

    def _t_announce_said(self) -> None:
        self._begin_dance()

    def _t_dance_done(self) -> None:
        self._motion_finished()
        self._dance_remaining = None
        spec = self.catalog.lookup(ActivityId.FAREWELL_DANCE)
        self._say(spec.goodbye, "goodbye_said")

    def _t_goodbye_said(self) -> None:
        self._log("ActivityCompleted", activity=ActivityId.FAREWELL_DANCE.value)
        self._end_session("Completed")

    def _t_standup_done(self) -> None:
        self._motion_finished()
        remaining = self._dance_remaining if self._dance_remaining is not None else 0
        variant = self._dance_variant()
        self._start_motion(f"dance:{variant.id}", remaining, Posture.STANDING)
        self._schedule("dance_done", remaining)

    def _t_toy_announce_said(self) -> None:
        self._toy_round = 1
        self._toy_instruction()

    def _t_toy_point_done(self) -> None:
        self._motion_finished()
        spec = self._active_spec
        assert spec is not None
        self.phase = Phase.TOY_RELAY_ACTIVE
        self._emit(Speak(self._personalize(spec.toy_confirm)))
        self._request_pace()
        self._set_cue(CueEffect.PROMPT_AND_LISTEN)
        self._open_listen(go_prompt("", window_ms=None))
        self._on_continue = self._toy_round_done

    def _t_toy_praise_said(self) -> None:
        entry = self._active_entry
        assert entry is not None
        rounds = entry.rounds or 3
        if self._toy_round >= rounds:
            self._log("ActivityCompleted", activity=ActivityId.TOY_RELAY.value)
            self._advance_program()
        else:
            self._toy_round += 1
            self._toy_instruction()

    # -- greeting -----------------------------------------------------------

    def _intro_programmed(self) -> bool:
        return bool(self.config.program) and self.config.program[0].activity is ActivityId.INTRO_SPEECH

    def _ready_prompt(self) -> None:
        self._greeting_stage = "ready_say"
        self._set_cue(CueEffect.ALL_OFF)
        self._say(self.catalog.common.ready_prompt, "ready_said")

    def _finish_greeting(self) -> None:
        self._close_listen()
        self._complete_pace()
        self._greeting_stage = None
        if self._intro_programmed():
            self.program_index = 0
            self._log("ActivityCompleted", activity=ActivityId.INTRO_SPEECH.value)
        self._advance_program()

    # -- program sequencing ---------------------------------------------------

    def _advance_program(self) -> None:
        self.program_index += 1
        program = self.config.program
        if self.program_index >= len(program):
            self._enter_farewell(explicit=False)
            return
        entry = program[self.program_index]
        if entry.activity is ActivityId.FAREWELL_DANCE:
            self._enter_farewell(explicit=True)
            return
        if entry.activity is ActivityId.INTRO_SPEECH:
            # Only valid as the first entry, which the greeting consumed.
            self._log("ActivityStarted", activity=entry.activity.value)
            self._log("ActivityCompleted", activity=entry.activity.value)
            self._advance_program()
            return
        spec = self.catalog.lookup(entry.activity)
        self._active_spec = spec
        self._active_entry = entry
        self.set_index = 0
        self.rep_count = 0
        self._log("ActivityStarted", activity=entry.activity.value)
        if spec.is_exercise and entry.speed is not None:
            self.effective_speed = entry.speed
        self._stages = self._build_stages(spec)
        self._run_next_stage()

    def _build_stages(self, spec: ExerciseSpec) -> list:
        stages: list = []
        posture_need = spec.need(AssistanceKind.POSTURE_CHANGE)
        if self.robot_posture is not spec.posture:
            if posture_need is not None:
                stages.append(("assist", AssistanceKind.POSTURE_CHANGE))
            else:
                stages.append(("positioning",))
        aux = spec.need(AssistanceKind.AUXILIARY_AID)
        if aux is not None:
            stages.append(("assist", AssistanceKind.AUXILIARY_AID))
        if spec.is_exercise:
            stages.append(("demo",))
        elif spec.kind is ActivityKind.GAME:
            stages.append(("toy_announce",))
        return stages

    def _run_next_stage(self) -> None:
        if not self._stages:
            return
        stage = self._stages.pop(0)
        if stage[0] == "positioning":
            self._positioning_request()
        elif stage[0] == "assist":
            self._assistance_request(stage[1])
        elif stage[0] == "demo":
            self._demonstration()
        elif stage[0] == "toy_announce":
            self._toy_announce()
        elif stage[0] == "dance":
            self._dance_stage()

    def _positioning_request(self) -> None:
        spec = self._active_spec
        assert spec is not None
        self.phase = Phase.POSITIONING_REQUEST
        script = self.catalog.common.positioning
        self._pending_assistance = AssistanceKind.POSITIONING
        self._log("AssistanceRequested", assistance=AssistanceKind.POSITIONING.value)
        self._emit(RequestAssistance(AssistanceKind.POSITIONING, self._personalize(script)))
        self._say(script)
        self._set_cue(CueEffect.PROMPT_HEAD_TAP)

    def _assistance_request(self, kind: AssistanceKind) -> None:
        spec = self._active_spec
        assert spec is not None
        need = spec.need(kind)
        assert need is not None
        self.phase = Phase.ASSISTANCE_REQUEST
        self._pending_assistance = kind
        self._log("AssistanceRequested", assistance=kind.value)
        self._emit(RequestAssistance(kind, self._personalize(need.request_script)))
        self._say(need.request_script)
        self._set_cue(CueEffect.PROMPT_HEAD_TAP)

    def _assistance_completed(self) -> None:
        kind = self._pending_assistance
        spec = self._active_spec
        if kind is None:
            return
        self._log("AssistanceCompleted", assistance=kind.value)
        self._pending_assistance = None
        if kind is AssistanceKind.POSTURE_CHANGE and spec is not None:
            self._start_motion("rolled_over", 0, spec.posture)
        elif kind is AssistanceKind.POSITIONING and spec is not None:
            self._start_motion("repositioned", 0, spec.posture)
        self._set_cue(CueEffect.ALL_OFF)
        self._run_next_stage()

    def _demonstration(self) -> None:
        spec = self._active_spec
        assert spec is not None
        self.phase = Phase.DEMONSTRATION
        self._set_cue(CueEffect.ALL_OFF)
        self._say(spec.demo_script)
        self._start_motion(f"demo:{spec.id.value}", spec.demo_duration_ms, spec.posture)
        self._schedule("demo_done", spec.demo_duration_ms)

    def _invite_first_set(self) -> None:
        self.phase = Phase.AWAIT_CONTINUE
        self._await_continue(self._start_next_set)

    def _await_continue(self, continuation: Callable) -> None:
        """Keep-pace prompt: tap or 'go', no time limit (the rest is untimed)."""
        self._on_continue = continuation
        self._say(self.catalog.common.keep_pace)
        self._request_pace()
        self._set_cue(CueEffect.PROMPT_AND_LISTEN)
        self._open_listen(go_prompt("", window_ms=None))

    def _continue_now(self) -> None:
        self._close_listen()
        self._complete_pace()
        self._set_cue(CueEffect.ALL_OFF)
        continuation, self._on_continue = self._on_continue, None
        if continuation is not None:
            continuation()

    # -- sets -----------------------------------------------------------------

    def _start_next_set(self) -> None:
        spec, entry = self._active_spec, self._active_entry
        assert spec is not None and entry is not None and entry.reps is not None
        self.set_index += 1
        self.rep_count = 0
        self._utterances_spoken = 0
        self.phase = Phase.SET_ACTIVE
        self._log("SetStarted", n=self.set_index)
        self._rep_duration = rep_duration_ms(spec, self.effective_speed)
        now = self.clock.now()
        self._last_rep_at = now
        self._schedule("rep", self._rep_duration)
        self._start_motion(
            f"set:{spec.id.value}:{self.set_index}", entry.reps * self._rep_duration
        )

    def _count_rep(self) -> None:
        spec, entry = self._active_spec, self._active_entry
        assert spec is not None and entry is not None and entry.reps is not None
        self.rep_count += 1
        self._last_rep_at = self.clock.now()
        self._emit(CountRep(self.rep_count))
        self._emit(Speak(str(self.rep_count)))
        self._log("RepCounted", n=self.rep_count)
        if self.rep_count >= entry.reps:
            self._finish_set()
            return
        if self.rep_count % self.params.utterance_every_reps == 0:
            self._utterances_spoken += 1
            if self._utterances_spoken % 2 == 1:
                self._emit(Speak(self.picker.motivational()))
            else:
                self._emit(Speak(self.picker.instructional(spec.id)))
        self._schedule("rep", self._rep_duration)

    def _finish_set(self) -> None:
        entry = self._active_entry
        assert entry is not None and entry.sets is not None
        self._log("SetCompleted", n=self.set_index)
        self._start_motion("rest_hold", 0)
        last_set = self.set_index >= entry.sets
        if last_set:
            self._log("ActivityCompleted", activity=entry.activity.value)
        self.phase = Phase.SET_REST
        self._await_continue(self._advance_program if last_set else self._start_next_set)

    def _apply_speed_change(self, direction: int) -> None:
        """Shift the effective speed one step, replanning any pending reps."""
        old = self.effective_speed
        new_value = min(max(old.value + direction, SpeedSetting.SLOW.value), SpeedSetting.FAST.value)
        new = SpeedSetting(new_value)
        if new is old:
            return                          # saturated at an endpoint
        self.effective_speed = new
        self._log("SpeedChanged", **{"from": old.label, "to": new.label})
        if self.phase is not Phase.SET_ACTIVE:
            return
        spec, entry = self._active_spec, self._active_entry
        assert spec is not None and entry is not None and entry.reps is not None
        self._rep_duration = rep_duration_ms(spec, new)
        now = self.clock.now()
        assert self._last_rep_at is not None
        next_due = max(now, self._last_rep_at + self._rep_duration)
        self._cancel("rep")
        self._timers["rep"] = self.clock.at(next_due, "rep")
        reps_after_next = entry.reps - self.rep_count - 1
        remaining_span = (next_due - now) + max(0, reps_after_next) * self._rep_duration
        self._start_motion(f"set:{spec.id.value}:{self.set_index}", remaining_span)

    # -- toy relay --------------------------------------------------------------

    def _toy_announce(self) -> None:
        spec = self._active_spec
        assert spec is not None
        self.phase = Phase.TOY_RELAY_ACTIVE
        self._set_cue(CueEffect.ALL_OFF)
        self._toy_order = self.rng.sample(list(spec.toy_names), len(spec.toy_names))
        self._say(spec.announce, "toy_announce_said")

    def _toy_instruction(self) -> None:
        spec = self._active_spec
        assert spec is not None
        self.phase = Phase.TOY_RELAY_ACTIVE
        toy = self._toy_order[(self._toy_round - 1) % len(self._toy_order)]
        script = spec.toy_instruction.replace("{toy}", toy)
        duration = self._say(script)
        self._start_motion("point_gesture", POINT_GESTURE_MS)
        self._schedule("toy_point_done", max(duration, POINT_GESTURE_MS))

    def _toy_round_done(self) -> None:
        self._emit(Speak(self.picker.motivational()))
        self._schedule("toy_praise_said", self.params.speak_min_ms)

    # -- farewell -----------------------------------------------------------------

    def _dance_variant(self):
        spec = self.catalog.lookup(ActivityId.FAREWELL_DANCE)
        for variant in spec.dance_variants:
            if variant.id == self.config.entertainment:
                return variant
        return spec.dance_variants[0]

    def _enter_farewell(self, explicit: bool) -> None:
        spec = self.catalog.lookup(ActivityId.FAREWELL_DANCE)
        self._active_spec = spec
        self._active_entry = ActivityConfig(activity=ActivityId.FAREWELL_DANCE)
        self._log("ActivityStarted", activity=ActivityId.FAREWELL_DANCE.value)
        self.phase = Phase.FAREWELL_DANCE
        self._set_cue(CueEffect.ALL_OFF)
        stages: list = []
        if self.robot_posture is not Posture.STANDING:
            stages.append(("positioning",))
        stages.append(("dance",))
        self._stages = stages
        self._run_next_stage()

    def _dance_stage(self) -> None:
        spec = self._active_spec
        assert spec is not None
        self.phase = Phase.FAREWELL_DANCE
        self._say(spec.announce, "announce_said")

    def _begin_dance(self) -> None:
        variant = self._dance_variant()
        self._dance_remaining = variant.duration_ms
        self._start_motion(f"dance:{variant.id}", variant.duration_ms, Posture.STANDING)
        self._schedule("dance_done", variant.duration_ms)

    # -- event handlers --------------------------------------------------------

    def _on_gesture(self, gesture: GestureEvent) -> None:
        kind = gesture.kind
        if kind is GestureKind.PAUSE_CHORD:
            if self.phase is Phase.PAUSED:
                self._resume()
            elif self.phase in PAUSABLE_PHASES:
                self._pause()
            else:
                self._illegal("pause chord outside a pausable state")
            return
        if kind in (GestureKind.SPEED_UP_CHORD, GestureKind.SLOW_DOWN_CHORD):
            if self.phase in (Phase.SET_ACTIVE, Phase.SET_REST):
                self._apply_speed_change(1 if kind is GestureKind.SPEED_UP_CHORD else -1)
            else:
                self._illegal("speed chord outside an active set")
            return
        if kind is GestureKind.SINGLE_TAP:
            self._on_confirm_input(via_tap=True)
            return
        self._illegal(f"gesture {kind.value} has no meaning here")

    def _on_confirm_input(self, via_tap: bool) -> None:
        """A tap (or matched word) wherever a confirmation is awaited."""
        if self.phase in (Phase.POSITIONING_REQUEST, Phase.ASSISTANCE_REQUEST):
            self._assistance_completed()
            return
        if self.phase is Phase.GREETING:
            if self._greeting_stage == "open_listen":
                self._close_listen()
                self._ready_prompt()
            elif self._greeting_stage == "ready_listen":
                self._finish_greeting()
            else:
                self._illegal("tap while the robot was speaking")
            return
        if self.phase in (Phase.AWAIT_CONTINUE, Phase.SET_REST, Phase.TOY_RELAY_ACTIVE):
            if self._on_continue is not None:
                self._continue_now()
            else:
                self._illegal("confirmation arrived with nothing awaited")
            return
        self._illegal("tap in a state that accepts none" if via_tap else "speech unexpected")

    def _on_speech(self, token: str) -> None:
        if self.phase is Phase.GREETING and self._greeting_stage == "open_listen":
            self._close_listen()
            self._greeting_stage = "open_respond"
            self._say(self.catalog.common.open_response, "open_r_said")
            return
        if self._listen_prompt is not None:
            self._on_confirm_input(via_tap=False)
            return
        self._illegal(f"speech {token!r} with no listening window")

    def _on_speech_timeout(self) -> None:
        if self.phase is Phase.GREETING:
            if self._greeting_stage == "open_listen":
                self._close_listen()
                self._greeting_stage = "open_respond"
                self._say(self.catalog.common.open_response, "open_r_said")
                return
            if self._greeting_stage == "ready_listen":
                self._close_listen()
                self._say(self.catalog.common.speech_fallback, "fallback_said")
                return
        self._illegal("speech timeout with no bounded window")

    def _on_assistance_done(self) -> None:
        if self.phase in (Phase.POSITIONING_REQUEST, Phase.ASSISTANCE_REQUEST):
            self._assistance_completed()
        else:
            self._illegal("AssistanceDone while not awaiting assistance")

    def _on_fault(self, fault: FaultKind) -> None:
        if fault is FaultKind.FALL_DURING_DANCE:
            if self.phase is Phase.FAREWELL_DANCE and self._dance_remaining is not None:
                self._log("FaultOccurred", fault=fault.value)
                remaining = self._cancel("dance_done")
                self._dance_remaining = remaining if remaining is not None else 0
                self._motion = None
                self._say(self.catalog.common.fall_recovery)
                self._start_motion(RECOVERY_MOTION, STAND_UP_MS, Posture.CROUCHED)
                self._schedule("standup_done", STAND_UP_MS)
            else:
                self._illegal("fall injected outside the dance")
            return
        if fault is FaultKind.UNRECOVERABLE:
            self._log("FaultOccurred", fault=fault.value)
            self._end_session("Aborted")
            return
        if fault is FaultKind.BATTERY_DRAIN:
            if self.phase is Phase.FAULTED:
                self._illegal("battery fault while already faulted")
                return
            self._log("FaultOccurred", fault=fault.value)
            self._fault_snapshot = self._take_snapshot()
            self._fault_kind = fault
            self.phase = Phase.FAULTED
            self._set_cue(CueEffect.ALL_OFF)
            self._close_listen()
            self._emit(StartMotion("hold", 0, None))
            self._motion = None
            return
        self._illegal(f"unknown fault {fault}")

    def _on_engineer_reset(self) -> None:
        if self.phase is not Phase.FAULTED or self._fault_snapshot is None:
            self._illegal("EngineerReset outside Faulted")
            return
        self._log("EngineerIntervention", fault=self._fault_kind.value if self._fault_kind else None)
        snapshot, self._fault_snapshot = self._fault_snapshot, None
        self._fault_kind = None
        self._restore_snapshot(snapshot)

    # -- pause / snapshot ---------------------------------------------------------

    def _take_snapshot(self) -> _Snapshot:
        now = self.clock.now()
        motion = None
        if self._motion is not None:
            motion_id, ends_at, posture = self._motion
            if ends_at > now:
                motion = (motion_id, ends_at - now, posture)
        return _Snapshot(
            phase=self.phase,
            program_index=self.program_index,
            set_index=self.set_index,
            rep_count=self.rep_count,
            effective_speed=self.effective_speed,
            cue=self._cue,
            timers=self._cancel_all_timers(),
            motion=motion,
            last_rep_offset=(now - self._last_rep_at) if self._last_rep_at is not None else None,
            stages=list(self._stages),
            on_continue=self._on_continue,
            pending_assistance=self._pending_assistance,
            listen_prompt=self._listen_prompt,
            greeting_stage=self._greeting_stage,
            toy_round=self._toy_round,
            dance_remaining_ms=self._dance_remaining,
            inner=self._pause_snapshot,
        )

    def _restore_snapshot(self, snapshot: _Snapshot) -> None:
        now = self.clock.now()
        self.phase = snapshot.phase
        self.program_index = snapshot.program_index
        self.set_index = snapshot.set_index
        self.rep_count = snapshot.rep_count
        self.effective_speed = snapshot.effective_speed
        self._stages = list(snapshot.stages)
        self._on_continue = snapshot.on_continue
        self._pending_assistance = snapshot.pending_assistance
        self._listen_prompt = snapshot.listen_prompt
        self._greeting_stage = snapshot.greeting_stage
        self._toy_round = snapshot.toy_round
        self._dance_remaining = snapshot.dance_remaining_ms
        self._pause_snapshot = snapshot.inner
        self._last_rep_at = (
            now - snapshot.last_rep_offset if snapshot.last_rep_offset is not None else None
        )
        for tag, remaining in snapshot.timers:
            self._timers[tag] = self.clock.at(now + remaining, tag)
        if snapshot.motion is not None:
            motion_id, remaining, posture = snapshot.motion
            self._start_motion(motion_id, remaining, posture)
        self._set_cue(snapshot.cue)

    def _pause(self) -> None:
        self._log("PausedAt", phase=self.phase.value)
        self._pause_snapshot = self._take_snapshot()
        self.phase = Phase.PAUSED
        self._emit(StartMotion("hold", 0, None))
        self._motion = None
        self._set_cue(CueEffect.PAUSED_PATTERN)

    def _resume(self) -> None:
        if self._pause_snapshot is None:
            self._illegal("resume without a paused session")
            return
        self._log("ResumedAt", phase=self._pause_snapshot.phase.value)
        snapshot, self._pause_snapshot = self._pause_snapshot, None
        self._restore_snapshot(snapshot)

    # -- session end -----------------------------------------------------------------

    def _end_session(self, status: str) -> None:
        self._cancel_all_timers()
        self._close_listen()
        self._emit(StartMotion("hold", 0, None))
        self._motion = None
        self._set_cue(CueEffect.ALL_OFF)
        self._log("SessionEnded", status=status)
        self.phase = Phase.COMPLETED if status == "Completed" else Phase.ABORTED


def _echo_entry(entry: ActivityConfig) -> dict:
    echo: dict = {"activity": entry.activity.value}
    if entry.sets is not None:
        echo["sets"] = entry.sets
    if entry.reps is not None:
        echo["reps"] = entry.reps
    if entry.speed is not None:
        echo["speed"] = entry.speed.label
    if entry.rounds is not None:
        echo["rounds"] = entry.rounds
    return echo
