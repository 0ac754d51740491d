"""Online classification of head-button presses into gestures.

Primitive gestures are single tap, double tap and long press on any of
the three head buttons.  Two-handed combinations take precedence over
primitives: a sustained middle-button hold plus a double tap on the
front or rear button changes exercise speed, and simultaneous long
presses of front and rear pause the session.

Classification is causal: a gesture is emitted at the earliest moment
the press timeline determines it (tap once its double-tap window
expires, long press once the hold threshold is crossed, chords when
their last constituent resolves).  A press that contributes to a chord
is never also emitted as a primitive, which forces two deferrals: the
middle button is the chord modifier, so its long press is only emitted
on release if no chord consumed it; and a front/rear long press is held
back while the opposite button is down, since the pair may still become
a pause chord.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum

from .config import EngineParams

END_OF_STREAM = 1 << 62


class Button(str, Enum):
    FRONT = "Front"
    MIDDLE = "Middle"
    REAR = "Rear"


class GestureKind(str, Enum):
    SINGLE_TAP = "SingleTap"
    DOUBLE_TAP = "DoubleTap"
    LONG_PRESS = "LongPress"
    SPEED_UP_CHORD = "SpeedUpChord"
    SLOW_DOWN_CHORD = "SlowDownChord"
    PAUSE_CHORD = "PauseChord"


@dataclass(frozen=True)
class RawPress:
    button: Button
    down_at: int
    up_at: int

    def __post_init__(self):
        if self.up_at < self.down_at:
            raise ValueError("press released before it started")


@dataclass(frozen=True)
class GestureEvent:
    kind: GestureKind
    at: int
    button: Button | None = None              # None for chords


@dataclass
class _ButtonState:
    down_at: int | None = None                # None while released
    long_crossed: bool = False
    deferred: bool = False                    # long, waiting on the opposite button
    consumed: bool = False                    # taken by a chord
    emitted_long: bool = False
    pending_first: tuple[int, int] | None = None   # completed tap awaiting its window
    is_second: bool = False                   # current press started inside the window


_OPPOSITE = {Button.FRONT: Button.REAR, Button.REAR: Button.FRONT}


class GestureClassifier:
    def __init__(self, params: EngineParams | None = None):
        self.params = params or EngineParams()
        self._state = {b: _ButtonState() for b in Button}
        self._now = 0
        self.dropped: list[tuple[str, int]] = []

    # -- time ---------------------------------------------------------

    def next_deadline(self) -> int | None:
        """Earliest future moment at which a gesture resolves by itself."""
        deadlines = []
        for state in self._state.values():
            if state.pending_first is not None and state.down_at is None:
                deadlines.append(state.pending_first[1] + self.params.double_tap_window_ms)
            if state.down_at is not None and not state.long_crossed:
                deadlines.append(state.down_at + self.params.long_press_ms)
        return min(deadlines) if deadlines else None

    def advance(self, t: int) -> list[GestureEvent]:
        """Let time pass until t, firing every deadline on the way."""
        out: list[GestureEvent] = []
        while True:
            deadline = self.next_deadline()
            if deadline is None or deadline > t:
                break
            self._now = deadline
            for button, state in self._state.items():
                if (
                    state.pending_first is not None
                    and state.down_at is None
                    and state.pending_first[1] + self.params.double_tap_window_ms == deadline
                ):
                    out.append(GestureEvent(GestureKind.SINGLE_TAP, deadline, button))
                    state.pending_first = None
                if (
                    state.down_at is not None
                    and not state.long_crossed
                    and state.down_at + self.params.long_press_ms == deadline
                ):
                    out.extend(self._cross_long(button, state, deadline))
        self._now = max(self._now, t)
        return out

    # -- edges --------------------------------------------------------

    def feed(self, button: Button, is_down: bool, t: int) -> list[GestureEvent]:
        out = self.advance(t)
        state = self._state[button]
        if is_down:
            if state.down_at is not None:
                self.dropped.append((f"{button.value} down while down", t))
                return out
            if state.pending_first is not None:
                # Inside the double-tap window (advance() has already
                # expired stale windows at or before t).
                state.is_second = True
            state.down_at = t
            state.long_crossed = False
            state.deferred = False
            state.consumed = False
            state.emitted_long = False
        else:
            if state.down_at is None:
                self.dropped.append((f"{button.value} up while up", t))
                return out
            out.extend(self._release(button, state, t))
        return out

    def flush(self, t: int = END_OF_STREAM) -> list[GestureEvent]:
        """Resolve everything still pending (end of a press stream)."""
        return self.advance(t)

    # -- internals ----------------------------------------------------

    def _cross_long(self, button: Button, state: _ButtonState, t: int) -> list[GestureEvent]:
        state.long_crossed = True
        # A long press aborts any double-tap pairing in progress.
        first_was_pending = state.pending_first is not None
        out: list[GestureEvent] = []
        if first_was_pending:
            out.append(GestureEvent(GestureKind.SINGLE_TAP, t, button))
            state.pending_first = None
            state.is_second = False
        if button is Button.MIDDLE:
            return out                         # modifier: decided on release
        other = self._state[_OPPOSITE[button]]
        if other.down_at is not None and not other.consumed and not other.emitted_long:
            if other.long_crossed and other.deferred:
                # Both long and simultaneously held: pause.
                state.consumed = True
                other.consumed = True
                other.deferred = False
                out.append(GestureEvent(GestureKind.PAUSE_CHORD, t))
            else:
                state.deferred = True          # wait for the opposite press
        else:
            state.emitted_long = True
            out.append(GestureEvent(GestureKind.LONG_PRESS, t, button))
        return out

    def _release(self, button: Button, state: _ButtonState, t: int) -> list[GestureEvent]:
        down_at = state.down_at
        assert down_at is not None
        state.down_at = None
        out: list[GestureEvent] = []

        if state.long_crossed:
            if not state.consumed and not state.emitted_long:
                # Deferred long press whose chord never formed.
                out.append(GestureEvent(GestureKind.LONG_PRESS, t, button))
                state.emitted_long = True
            state.deferred = False
            state.long_crossed = False
            state.is_second = False
            out.extend(self._opposite_unblocked(button, t))
            return out

        # A tap.
        if state.is_second:
            first = state.pending_first
            state.is_second = False
            state.pending_first = None
            span_start = first[0] if first else down_at
            chord = self._speed_chord(button, span_start, t)
            if chord is not None:
                out.append(chord)
            else:
                out.append(GestureEvent(GestureKind.DOUBLE_TAP, t, button))
        else:
            state.pending_first = (down_at, t)
        out.extend(self._opposite_unblocked(button, t))
        return out

    def _opposite_unblocked(self, button: Button, t: int) -> list[GestureEvent]:
        """Releasing one pause-chord side settles the other side's deferral."""
        if button is Button.MIDDLE:
            return []
        other = self._state[_OPPOSITE[button]]
        if other.deferred and not other.consumed:
            other.deferred = False
            other.emitted_long = True
            return [GestureEvent(GestureKind.LONG_PRESS, t, _OPPOSITE[button])]
        return []

    def _speed_chord(self, button: Button, first_down: int, t: int) -> GestureEvent | None:
        if button is Button.MIDDLE:
            return None
        middle = self._state[Button.MIDDLE]
        if middle.down_at is None or not middle.long_crossed or middle.consumed:
            return None
        # The tap pair must ride on the sustained hold for long enough
        # to be deliberate.
        overlap = t - max(middle.down_at, first_down)
        if overlap < self.params.chord_overlap_ms:
            return None
        middle.consumed = True
        slower = self.params.front_double_tap == "slower"
        if button is Button.FRONT:
            kind = GestureKind.SLOW_DOWN_CHORD if slower else GestureKind.SPEED_UP_CHORD
        else:
            kind = GestureKind.SPEED_UP_CHORD if slower else GestureKind.SLOW_DOWN_CHORD
        return GestureEvent(kind, t)


def classify_presses(
    stream: list[RawPress], params: EngineParams | None = None
) -> list[GestureEvent]:
    """Classify a complete press stream (offline wrapper over the online path)."""
    edges: list[tuple[int, int, int, Button, bool]] = []
    for index, press in enumerate(stream):
        edges.append((press.down_at, index, 0, press.button, True))
        edges.append((press.up_at, index, 1, press.button, False))
    # Ties resolve in press order (so an earlier press's release lands
    # before a simultaneous later press) and down-before-up within one press.
    edges.sort(key=lambda e: (e[0], e[1], e[2]))
    classifier = GestureClassifier(params)
    out: list[GestureEvent] = []
    for t, _, _, button, is_down in edges:
        out.extend(classifier.feed(button, is_down, t))
    out.extend(classifier.flush())
    return out
