"""Static registry of the activity scenarios a session can schedule.

Sixteen activities: thirteen exercises plus the introductory speech, the
toy-relay game and the farewell dance.  The registry is loaded once from
a human-editable data file (``data/activities.cfg``) and is immutable
afterwards, so it is safe to read from any execution context.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum, IntEnum
from importlib import resources

from . import kvfile


class CatalogError(Exception):
    pass


class UnknownActivity(CatalogError):
    """Activity id is not in the registry."""


class NotAnExercise(CatalogError):
    """Repetition timing was requested for a non-exercise scenario."""


class ActivityId(str, Enum):
    INTRO_SPEECH = "IntroSpeech"
    BRIDGE = "Bridge"
    SINGLE_BRIDGE = "SingleBridge"
    HIP_ABDUCTION_LAYING = "HipAbductionLaying"
    HIP_ABDUCTION_ON_SIDE = "HipAbductionOnSide"
    HIP_EXTENSION_EASY = "HipExtensionEasy"
    HIP_EXTENSION_HARD = "HipExtensionHard"
    HIP_KNEE_FLEXION_SLIDING = "HipKneeFlexionSliding"
    HIP_KNEE_FLEXION_LIFTING = "HipKneeFlexionLifting"
    KNEE_EXTENSION_ON_SIDE = "KneeExtensionOnSide"
    LEG_RAISES = "LegRaises"
    QUADS_OVER_ROLL = "QuadsOverRoll"
    STATIC_QUADS = "StaticQuads"
    SIT_TO_STAND = "SitToStand"
    TOY_RELAY = "ToyRelay"
    FAREWELL_DANCE = "FarewellDance"

    def __str__(self) -> str:
        return self.value


class ActivityKind(str, Enum):
    EXERCISE = "exercise"
    SPEECH = "speech"
    GAME = "game"
    DANCE = "dance"


class Posture(str, Enum):
    CROUCHED = "crouched"
    LYING_BACK = "lying_back"
    LYING_SIDE = "lying_side"
    STANDING = "standing"


class SpeedSetting(IntEnum):
    """Execution speed, totally ordered slow < medium < fast."""

    SLOW = 0
    MEDIUM = 1
    FAST = 2

    @property
    def label(self) -> str:
        return self.name.lower()

    @classmethod
    def from_label(cls, label: str) -> "SpeedSetting":
        try:
            return cls[label.strip().upper()]
        except KeyError:
            raise ValueError(f"unknown speed {label!r}") from None


class AssistanceKind(str, Enum):
    POSITIONING = "Positioning"
    AUXILIARY_AID = "AuxiliaryAid"
    POSTURE_CHANGE = "PostureChange"
    KEEPING_PACE = "KeepingPace"


@dataclass(frozen=True)
class AssistanceNeed:
    kind: AssistanceKind
    request_script: str


@dataclass(frozen=True)
class DanceVariant:
    id: str
    duration_ms: int


@dataclass(frozen=True)
class ExerciseSpec:
    """Catalog entry for one activity scenario."""

    id: ActivityId
    display_name: str
    kind: ActivityKind
    posture: Posture
    assistance: tuple[AssistanceNeed, ...]
    rep_duration_fast_ms: int | None = None
    rep_duration_slow_ms: int | None = None
    demo_script: str = ""
    demo_duration_ms: int = 0
    instructional_phrases: tuple[str, ...] = ()
    announce: str = ""                                 # spoken when the scenario begins
    goodbye: str = ""                                  # spoken when it ends (dance only)
    intro_variants: tuple[tuple[str, str], ...] = ()   # (variant id, script)
    dance_variants: tuple[DanceVariant, ...] = ()
    toy_names: tuple[str, ...] = ()
    toy_instruction: str = ""
    toy_confirm: str = ""

    @property
    def is_exercise(self) -> bool:
        return self.kind is ActivityKind.EXERCISE

    def need(self, kind: AssistanceKind) -> AssistanceNeed | None:
        for n in self.assistance:
            if n.kind is kind:
                return n
        return None


@dataclass(frozen=True)
class CommonScripts:
    """Session-level scripts shared by every activity."""

    keep_pace: str
    positioning: str
    speech_fallback: str
    ready_prompt: str
    open_question: str
    open_response: str
    fall_recovery: str


def rep_duration_ms(spec: ExerciseSpec, speed: SpeedSetting) -> int:
    """Duration of one repetition at the given speed.

    Fast and slow come straight from the catalog; medium is the
    arithmetic mean of the two (the catalog quantifies only the
    endpoints, and the mean is the simplest monotone interpolation).
    """
    if spec.rep_duration_fast_ms is None or spec.rep_duration_slow_ms is None:
        raise NotAnExercise(f"{spec.id} has no repetition timing")
    if speed is SpeedSetting.FAST:
        return spec.rep_duration_fast_ms
    if speed is SpeedSetting.SLOW:
        return spec.rep_duration_slow_ms
    return (spec.rep_duration_fast_ms + spec.rep_duration_slow_ms) // 2


# Exercises performed on the side; these need the robot rolled over and
# therefore carry a PostureChange assistance need.
SIDE_EXERCISES = frozenset(
    {
        ActivityId.HIP_ABDUCTION_ON_SIDE,
        ActivityId.HIP_EXTENSION_EASY,
        ActivityId.HIP_EXTENSION_HARD,
        ActivityId.KNEE_EXTENSION_ON_SIDE,
    }
)

# Exercises needing a rolled towel placed under the robot's leg.
AUX_AID_EXERCISES = frozenset({ActivityId.QUADS_OVER_ROLL, ActivityId.STATIC_QUADS})

_COMMON_KEYS = (
    "keep_pace",
    "positioning",
    "speech_fallback",
    "ready_prompt",
    "open_question",
    "open_response",
    "fall_recovery",
)


@dataclass(frozen=True)
class Catalog:
    version: int
    common: CommonScripts
    specs: dict[ActivityId, ExerciseSpec] = field(default_factory=dict)

    def lookup(self, activity: ActivityId | str) -> ExerciseSpec:
        try:
            activity = ActivityId(activity)
        except ValueError:
            raise UnknownActivity(f"unknown activity {activity!r}") from None
        return self.specs[activity]

    @property
    def exercises(self) -> tuple[ExerciseSpec, ...]:
        return tuple(s for s in self.specs.values() if s.is_exercise)

    def render(self) -> str:
        """Canonical serialized form; parsing it back yields an equal catalog."""
        lines: list[str] = []
        lines += kvfile.render_section("catalog", [("format_version", str(self.version))])
        lines.append("")
        lines += kvfile.render_section(
            "common", [(k, getattr(self.common, k)) for k in _COMMON_KEYS]
        )
        for spec in self.specs.values():
            lines.append("")
            pairs: list[tuple[str, str]] = [
                ("display", spec.display_name),
                ("kind", spec.kind.value),
                ("posture", spec.posture.value),
            ]
            if spec.is_exercise:
                pairs += [
                    ("rep_fast_s", _fmt_seconds(spec.rep_duration_fast_ms)),
                    ("rep_slow_s", _fmt_seconds(spec.rep_duration_slow_ms)),
                    ("demo_s", _fmt_seconds(spec.demo_duration_ms)),
                    ("demo", spec.demo_script),
                ]
                aux = spec.need(AssistanceKind.AUXILIARY_AID)
                if aux is not None:
                    pairs.append(("aux_aid", aux.request_script))
                side = spec.need(AssistanceKind.POSTURE_CHANGE)
                if side is not None:
                    pairs.append(("side_script", side.request_script))
                for i, phrase in enumerate(spec.instructional_phrases, start=1):
                    pairs.append((f"instr_{i}", phrase))
            if spec.announce:
                pairs.append(("announce", spec.announce))
            if spec.goodbye:
                pairs.append(("goodbye", spec.goodbye))
            for variant_id, script in spec.intro_variants:
                pairs.append((variant_id, script))
            for dv in spec.dance_variants:
                pairs.append((f"{dv.id}_duration_s", _fmt_seconds(dv.duration_ms)))
            if spec.toy_names:
                pairs.append(("toys", ", ".join(spec.toy_names)))
                pairs.append(("toy_instruction", spec.toy_instruction))
                pairs.append(("toy_confirm", spec.toy_confirm))
            lines += kvfile.render_section(spec.id.value, pairs)
        return "\n".join(lines) + "\n"

    @classmethod
    def from_text(cls, text: str) -> "Catalog":
        doc = kvfile.parse(text)
        sections = {s.name: s for s in doc.sections}
        known = {"catalog", "common"} | {a.value for a in ActivityId}
        for sec in doc.sections:
            if sec.name not in known:
                raise CatalogError(f"unknown section [{sec.name}] at line {sec.line}")
        cat = sections.get("catalog")
        if cat is None or cat.get("format_version") is None:
            raise CatalogError("catalog file missing [catalog] format_version")
        version = int(cat.get("format_version"))
        common_sec = sections.get("common")
        if common_sec is None:
            raise CatalogError("catalog file missing [common] section")
        common_values = {}
        for key in _COMMON_KEYS:
            value = common_sec.get(key)
            if value is None:
                raise CatalogError(f"[common] missing {key}")
            common_values[key] = value
        common = CommonScripts(**common_values)

        specs: dict[ActivityId, ExerciseSpec] = {}
        for activity in ActivityId:
            sec = sections.get(activity.value)
            if sec is None:
                raise CatalogError(f"catalog file missing [{activity.value}]")
            specs[activity] = _spec_from_section(activity, sec, common)
        if len(specs) != 16:
            raise CatalogError("expected 16 activity scenarios")
        if sum(1 for s in specs.values() if s.is_exercise) != 13:
            raise CatalogError("expected 13 exercises")
        return cls(version=version, common=common, specs=specs)

    @classmethod
    def load_default(cls) -> "Catalog":
        text = resources.files("robocoach").joinpath("data/activities.cfg").read_text("utf-8")
        return cls.from_text(text)


def _fmt_seconds(ms: int | None) -> str:
    assert ms is not None
    if ms % 1000 == 0:
        return str(ms // 1000)
    return f"{ms / 1000:g}"


def _parse_seconds(sec: kvfile.Section, key: str) -> int:
    raw = sec.get(key)
    if raw is None:
        raise CatalogError(f"[{sec.name}] missing {key}")
    try:
        value = float(raw)
    except ValueError:
        raise CatalogError(f"[{sec.name}] {key} is not a number: {raw!r}") from None
    if value < 0:
        raise CatalogError(f"[{sec.name}] {key} must be non-negative")
    return int(round(value * 1000))


_EXPECTED_KIND = {
    ActivityId.INTRO_SPEECH: ActivityKind.SPEECH,
    ActivityId.TOY_RELAY: ActivityKind.GAME,
    ActivityId.FAREWELL_DANCE: ActivityKind.DANCE,
}


def _spec_from_section(
    activity: ActivityId, sec: kvfile.Section, common: CommonScripts
) -> ExerciseSpec:
    display = sec.get("display") or activity.value
    kind = ActivityKind(sec.get("kind") or "exercise")
    if kind is not _EXPECTED_KIND.get(activity, ActivityKind.EXERCISE):
        raise CatalogError(f"[{sec.name}] has wrong kind {kind.value!r}")
    posture_raw = sec.get("posture")
    if posture_raw is None:
        raise CatalogError(f"[{sec.name}] missing posture")
    posture = Posture(posture_raw)

    assistance: list[AssistanceNeed] = []
    rep_fast = rep_slow = None
    demo_script = ""
    demo_ms = 0
    phrases: tuple[str, ...] = ()
    if kind is ActivityKind.EXERCISE:
        rep_fast = _parse_seconds(sec, "rep_fast_s")
        rep_slow = _parse_seconds(sec, "rep_slow_s")
        if not 0 < rep_fast < rep_slow:
            raise CatalogError(f"[{sec.name}] requires 0 < rep_fast_s < rep_slow_s")
        demo_ms = _parse_seconds(sec, "demo_s")
        demo_script = sec.get("demo") or ""
        collected = []
        for i in range(1, 6):
            phrase = sec.get(f"instr_{i}")
            if phrase is None:
                raise CatalogError(f"[{sec.name}] needs exactly 5 instr_N phrases")
            collected.append(phrase)
        if sec.get("instr_6") is not None:
            raise CatalogError(f"[{sec.name}] needs exactly 5 instr_N phrases")
        phrases = tuple(collected)
        aux_script = sec.get("aux_aid")
        if (activity in AUX_AID_EXERCISES) != (aux_script is not None):
            raise CatalogError(f"[{sec.name}] aux_aid script mismatch")
        if aux_script is not None:
            assistance.append(AssistanceNeed(AssistanceKind.AUXILIARY_AID, aux_script))
        side_script = sec.get("side_script")
        if (activity in SIDE_EXERCISES) != (side_script is not None):
            raise CatalogError(f"[{sec.name}] side_script mismatch")
        if side_script is not None:
            if posture is not Posture.LYING_SIDE:
                raise CatalogError(f"[{sec.name}] side exercises must use lying_side")
            assistance.append(AssistanceNeed(AssistanceKind.POSTURE_CHANGE, side_script))
    # Every activity can ask for a keep-pace confirmation.
    assistance.append(AssistanceNeed(AssistanceKind.KEEPING_PACE, common.keep_pace))

    intro_variants: tuple[tuple[str, str], ...] = ()
    if activity is ActivityId.INTRO_SPEECH:
        intro_variants = tuple(
            (rec.key, rec.value) for rec in sec.records if rec.key.startswith("intro_")
        )
        if not intro_variants:
            raise CatalogError("[IntroSpeech] needs at least one intro_N script")

    dance_variants: tuple[DanceVariant, ...] = ()
    if activity is ActivityId.FAREWELL_DANCE:
        dance_variants = tuple(
            DanceVariant(rec.key[: -len("_duration_s")], int(round(float(rec.value) * 1000)))
            for rec in sec.records
            if rec.key.endswith("_duration_s")
        )
        if not dance_variants:
            raise CatalogError("[FarewellDance] needs at least one *_duration_s variant")

    toy_names: tuple[str, ...] = ()
    toy_instruction = toy_confirm = ""
    if activity is ActivityId.TOY_RELAY:
        toys_raw = sec.get("toys")
        if not toys_raw:
            raise CatalogError("[ToyRelay] missing toys list")
        toy_names = tuple(t.strip() for t in toys_raw.split(",") if t.strip())
        toy_instruction = sec.get("toy_instruction") or ""
        toy_confirm = sec.get("toy_confirm") or ""

    return ExerciseSpec(
        id=activity,
        display_name=display,
        kind=kind,
        posture=posture,
        assistance=tuple(assistance),
        rep_duration_fast_ms=rep_fast,
        rep_duration_slow_ms=rep_slow,
        demo_script=demo_script,
        demo_duration_ms=demo_ms,
        instructional_phrases=phrases,
        announce=sec.get("announce") or "",
        goodbye=sec.get("goodbye") or "",
        intro_variants=intro_variants,
        dance_variants=dance_variants,
        toy_names=toy_names,
        toy_instruction=toy_instruction,
        toy_confirm=toy_confirm,
    )
