"""Brute-force offline gesture classifier used as a test oracle.

Works from the complete press timeline with direct rule evaluation (who
is down at instant t, which press crosses its threshold when), instead
of the production classifier's incremental per-edge state machine.  The
two must agree on any physically valid stream (per-button presses
non-overlapping, sorted by press time).
"""

from __future__ import annotations

from robocoach.config import EngineParams
from robocoach.gestures import Button, GestureEvent, GestureKind, RawPress

_OPPOSITE = {Button.FRONT: Button.REAR, Button.REAR: Button.FRONT}


def _is_long(press: RawPress, params: EngineParams) -> bool:
    return press.up_at - press.down_at >= params.long_press_ms


def _cross(press: RawPress, params: EngineParams) -> int:
    return press.down_at + params.long_press_ms


def oracle_classify(stream: list[RawPress], params: EngineParams | None = None) -> list[GestureEvent]:
    params = params or EngineParams()
    presses = sorted(stream, key=lambda p: (p.down_at, p.up_at))
    by_button: dict[Button, list[RawPress]] = {b: [] for b in Button}
    for press in presses:
        by_button[press.button].append(press)

    out: list[GestureEvent] = []
    consumed: set[int] = set()          # press ids taken by a chord
    long_emitted_at: dict[int, int] = {}

    def down_at_deadline(button: Button, t: int) -> RawPress | None:
        # Deadline work runs before edges at the same instant: a press
        # starting exactly at t is not yet down, one releasing at t still is.
        for press in by_button[button]:
            if press.down_at < t <= press.up_at:
                return press
        return None

    def down_at_edge(button: Button, t: int) -> RawPress | None:
        # At another press's release edge, an earlier press releasing at
        # the same instant has already been processed.
        for press in by_button[button]:
            if press.down_at < t < press.up_at:
                return press
        return None

    # ---- pause chords and front/rear long presses, in crossing order
    longs = sorted(
        (p for p in presses if p.button is not Button.MIDDLE and _is_long(p, params)),
        key=lambda p: (_cross(p, params), p.down_at),
    )
    for press in longs:
        if id(press) in consumed:
            continue
        t_cross = _cross(press, params)
        other = down_at_deadline(_OPPOSITE[press.button], t_cross)
        blocked = (
            other is not None
            and id(other) not in consumed
            and long_emitted_at.get(id(other), t_cross + 1) > t_cross
        )
        if not blocked:
            long_emitted_at[id(press)] = t_cross
            out.append(GestureEvent(GestureKind.LONG_PRESS, t_cross, press.button))
            continue
        assert other is not None
        if _is_long(other, params) and _cross(other, params) <= t_cross:
            # the other side crossed first and was still waiting: pause
            consumed.add(id(press))
            consumed.add(id(other))
            out.append(GestureEvent(GestureKind.PAUSE_CHORD, t_cross))
            continue
        if _is_long(other, params) and _cross(other, params) <= press.up_at:
            # this press waits; the chord lands at the other crossing
            consumed.add(id(press))
            consumed.add(id(other))
            out.append(GestureEvent(GestureKind.PAUSE_CHORD, _cross(other, params)))
            continue
        # chord never forms: deferred long press resolves when either side lets go
        emit_at = min(press.up_at, other.up_at)
        long_emitted_at[id(press)] = emit_at
        out.append(GestureEvent(GestureKind.LONG_PRESS, emit_at, press.button))

    # ---- middle long presses: chord modifiers, emitted on release if unused
    middle_longs = [p for p in by_button[Button.MIDDLE] if _is_long(p, params)]

    # ---- taps, double taps, speed chords
    double_candidates: list[tuple[int, RawPress, RawPress]] = []   # (t, first, second)
    for button in Button:
        pending: RawPress | None = None
        for press in by_button[button]:
            if pending is not None:
                window_end = pending.up_at + params.double_tap_window_ms
                if press.down_at < window_end:
                    if _is_long(press, params):
                        # a hold aborts the pairing: lone tap resolves at the crossing
                        out.append(
                            GestureEvent(GestureKind.SINGLE_TAP, _cross(press, params), button)
                        )
                    else:
                        double_candidates.append((press.up_at, pending, press))
                    pending = None
                    if _is_long(press, params):
                        continue
                    continue
                out.append(GestureEvent(GestureKind.SINGLE_TAP, window_end, button))
                pending = None
            if not _is_long(press, params):
                pending = press
        if pending is not None:
            out.append(
                GestureEvent(
                    GestureKind.SINGLE_TAP, pending.up_at + params.double_tap_window_ms, button
                )
            )

    # speed-chord assignment: double taps complete in time order; each
    # middle hold fuels at most one chord.  Ties resolve in press order,
    # matching the engine's edge ordering.
    middle_used: set[int] = set()
    stream_index = {id(p): i for i, p in enumerate(presses)}
    for t_done, first, second in sorted(
        double_candidates, key=lambda c: (c[0], stream_index[id(c[2])])
    ):
        chord = None
        if first.button in _OPPOSITE:
            modifier = down_at_edge(Button.MIDDLE, t_done)
            if (
                modifier is not None
                and modifier.up_at > t_done
                and _cross(modifier, params) <= t_done
                and id(modifier) not in middle_used
                and t_done - max(modifier.down_at, first.down_at) >= params.chord_overlap_ms
            ):
                middle_used.add(id(modifier))
                slower_button = (
                    Button.FRONT if params.front_double_tap == "slower" else Button.REAR
                )
                chord = (
                    GestureKind.SLOW_DOWN_CHORD
                    if first.button is slower_button
                    else GestureKind.SPEED_UP_CHORD
                )
        if chord is not None:
            out.append(GestureEvent(chord, t_done))
        else:
            out.append(GestureEvent(GestureKind.DOUBLE_TAP, t_done, first.button))

    for press in middle_longs:
        if id(press) not in middle_used:
            out.append(GestureEvent(GestureKind.LONG_PRESS, press.up_at, Button.MIDDLE))

    return sorted(out, key=_sort_key)


def _sort_key(g: GestureEvent):
    return (g.at, g.kind.value, g.button.value if g.button else "")


def normalized(gestures: list[GestureEvent]):
    return sorted(gestures, key=_sort_key)
