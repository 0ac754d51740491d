"""Simulated robot backend.

Motion commands run as timed opaque actions; nothing kinematic is
modeled.  The battery drains linearly with active-motion time plus a
smaller idle drain, and seeded randomness can inject the two recoverable
failures a desk run needs to reproduce: a fall during the farewell dance
and battery exhaustion after long combined use.
"""

from __future__ import annotations

import math
import random
from dataclasses import dataclass
from enum import Enum

from .catalog import Posture


class FaultKind(str, Enum):
    FALL_DURING_DANCE = "FallDuringDance"
    BATTERY_DRAIN = "BatteryDrain"
    UNRECOVERABLE = "UnrecoverableError"


class RobotError(Exception):
    pass


class MotionWhileFallen(RobotError):
    pass


class BatteryEmpty(RobotError):
    pass


@dataclass(frozen=True)
class FaultProfile:
    fall_probability_per_dance: float = 0.0
    battery_capacity_ms: int = 35 * 60_000     # continuous active operation
    idle_drain_factor: float = 0.1
    seed: int = 0

    def __post_init__(self):
        if not 0.0 <= self.fall_probability_per_dance <= 1.0:
            raise ValueError("fall probability must be within [0, 1]")
        if self.battery_capacity_ms <= 0:
            raise ValueError("battery capacity must be positive")


@dataclass
class Motion:
    motion_id: str
    started_at: int
    ends_at: int
    posture_on_complete: Posture | None = None


RECOVERY_MOTION = "stand_up"


class SimRobot:
    def __init__(self, profile: FaultProfile | None = None, start_posture: Posture = Posture.CROUCHED):
        self.profile = profile or FaultProfile()
        self.posture = start_posture
        self.motion: Motion | None = None
        self.battery = 1.0
        self.fallen = False
        self._rng = random.Random(f"{self.profile.seed}:robot")
        self._advanced_to = 0

    # -- time & battery -------------------------------------------------

    @property
    def _active_rate(self) -> float:
        return 1.0 / self.profile.battery_capacity_ms

    @property
    def _idle_rate(self) -> float:
        return self._active_rate * self.profile.idle_drain_factor

    def advance_to(self, t: int) -> None:
        """Drain battery up to t and retire a finished motion."""
        if t < self._advanced_to:
            raise ValueError("robot clock cannot go backwards")
        cursor = self._advanced_to
        while cursor < t:
            if self.motion is not None and cursor < self.motion.ends_at:
                segment_end = min(t, self.motion.ends_at)
                self.battery -= (segment_end - cursor) * self._active_rate
                cursor = segment_end
                if cursor >= self.motion.ends_at:
                    self._finish_motion()
            else:
                self.battery -= (t - cursor) * self._idle_rate
                cursor = t
        self.battery = max(self.battery, 0.0)
        self._advanced_to = t
        if self.motion is not None and t >= self.motion.ends_at:
            self._finish_motion()

    def _finish_motion(self) -> None:
        assert self.motion is not None
        if self.motion.posture_on_complete is not None:
            self.posture = self.motion.posture_on_complete
        if self.motion.motion_id == RECOVERY_MOTION:
            self.fallen = False
        self.motion = None

    def predicted_empty_at(self) -> int | None:
        """Virtual time when the battery reaches zero on the current plan."""
        if self.battery <= 0.0:
            return self._advanced_to
        level = self.battery
        cursor = self._advanced_to
        if self.motion is not None and cursor < self.motion.ends_at:
            active_ms = self.motion.ends_at - cursor
            burn = active_ms * self._active_rate
            if burn >= level:
                return cursor + math.ceil(level / self._active_rate)
            level -= burn
            cursor = self.motion.ends_at
        if self._idle_rate <= 0:
            return None
        return cursor + math.ceil(level / self._idle_rate)

    def recharge(self) -> None:
        self.battery = 1.0

    # -- motions ---------------------------------------------------------

    @property
    def current_motion_id(self) -> str | None:
        return self.motion.motion_id if self.motion else None

    def start_motion(
        self,
        motion_id: str,
        duration_ms: int,
        now: int,
        posture_on_complete: Posture | None = None,
    ) -> int:
        """Begin a motion, preempting any motion in progress.

        Returns the completion time.  Zero-duration motions apply their
        effects immediately and leave the battery untouched.
        """
        self.advance_to(now)
        if self.fallen and motion_id != RECOVERY_MOTION:
            raise MotionWhileFallen(f"cannot run {motion_id!r} while fallen")
        if self.battery <= 0.0:
            raise BatteryEmpty("battery is flat")
        if duration_ms <= 0:
            if posture_on_complete is not None:
                self.posture = posture_on_complete
            if motion_id == RECOVERY_MOTION:
                self.fallen = False
            self.motion = None
            return now
        self.motion = Motion(
            motion_id=motion_id,
            started_at=now,
            ends_at=now + duration_ms,
            posture_on_complete=posture_on_complete,
        )
        return now + duration_ms

    def stop_motion(self, now: int) -> None:
        self.advance_to(now)
        self.motion = None

    # -- faults ----------------------------------------------------------

    def plan_fall(self, dance_start: int, dance_duration_ms: int) -> int | None:
        """Seeded draw: when (if at all) this dance topples the robot."""
        if self._rng.random() >= self.profile.fall_probability_per_dance:
            return None
        if dance_duration_ms <= 1:
            return dance_start
        return dance_start + self._rng.randrange(1, dance_duration_ms)

    def fall(self, now: int) -> None:
        self.advance_to(now)
        self.fallen = True
        self.motion = None
