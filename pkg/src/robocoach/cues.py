"""LED cue patterns conveying session state and prompting input.

Five core effects plus one composite (head-tap prompt combined with the
side listening cue, shown when both a tap and a word are accepted).
Blinking effects share a 2 Hz rhythm: every pattern repeats with a
500 ms period, and an effect stays active until the orchestrator
replaces it, so a prompt keeps flashing until the awaited input lands.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

PERIOD_MS = 500
HALF_MS = PERIOD_MS // 2


class CueEffect(str, Enum):
    PROMPT_HEAD_TAP = "PromptHeadTap"
    PAUSED_PATTERN = "PausedPattern"
    SETUP_IN_PROGRESS = "SetupInProgress"
    LISTEN_SIDE_LEDS = "ListenSideLeds"
    ALL_OFF = "AllOff"
    PROMPT_AND_LISTEN = "PromptAndListen"    # composite of tap prompt + listen


@dataclass(frozen=True)
class LedFrame:
    at: int
    front_ring: bool = False
    middle_ring: bool = False
    rear_ring: bool = False
    left_side: bool = False
    right_side: bool = False

    def as_tuple(self) -> tuple:
        return (self.front_ring, self.middle_ring, self.rear_ring, self.left_side, self.right_side)


def _pattern(effect: CueEffect, phase: int) -> tuple:
    """(front, middle, rear, left, right) at a phase within one period."""
    first_half = phase < HALF_MS
    if effect is CueEffect.ALL_OFF:
        return (False, False, False, False, False)
    if effect is CueEffect.PROMPT_HEAD_TAP:
        return (first_half, first_half, first_half, False, False)
    if effect is CueEffect.PAUSED_PATTERN:
        # Alternating halves: outer rings vs. middle ring.
        return (first_half, not first_half, first_half, False, False)
    if effect is CueEffect.SETUP_IN_PROGRESS:
        # Front-to-rear sweep, one ring lit at a time.
        step = 0 if phase < 166 else (1 if phase < 333 else 2)
        return (step == 0, step == 1, step == 2, False, False)
    if effect is CueEffect.LISTEN_SIDE_LEDS:
        return (False, False, False, first_half, first_half)
    if effect is CueEffect.PROMPT_AND_LISTEN:
        return (first_half, first_half, first_half, first_half, first_half)
    raise ValueError(f"unknown effect {effect!r}")


class CueController:
    """One active effect at a time; frames are a pure function of time."""

    def __init__(self):
        self.effect = CueEffect.ALL_OFF
        self.effect_since = 0

    def set_effect(self, effect: CueEffect, at: int) -> None:
        self.effect = effect
        self.effect_since = at

    def frame_at(self, t: int) -> LedFrame:
        phase = (t - self.effect_since) % PERIOD_MS
        front, middle, rear, left, right = _pattern(self.effect, phase)
        return LedFrame(
            at=t, front_ring=front, middle_ring=middle, rear_ring=rear,
            left_side=left, right_side=right,
        )


def frames_over_period(effect: CueEffect, step_ms: int = 1) -> list[tuple]:
    """One full period of an effect, for pattern comparisons."""
    return [_pattern(effect, phase) for phase in range(0, PERIOD_MS, step_ms)]
