"""Session configuration: parse, validate and render.

A session file is the therapist-authored program: patient and carer
names, an ordered list of activities with sets/repetitions/speed, plus
the chosen introduction and farewell-dance variants.  Parsing is total;
every rejected input raises a :class:`ConfigError` subclass carrying a
1-based line (and column where it makes sense).

Format sketch (see docs/config-format.md for the full grammar)::

    format_version = 1
    patient = Alex
    carer = Jo
    seed = 7

    [activity]
    name = StaticQuads
    sets = 3
    reps = 10
    speed = fast
"""

from __future__ import annotations

from dataclasses import dataclass, field, fields, replace

from . import kvfile
from .catalog import ActivityId, ActivityKind, Catalog, SpeedSetting

FORMAT_VERSION = 1


class ConfigError(Exception):
    """Rejected configuration input, located at a source line."""

    def __init__(self, message: str, line: int = 1, column: int = 1):
        super().__init__(f"line {line}, column {column}: {message}")
        self.message = message
        self.line = line
        self.column = column


class ConfigSyntaxError(ConfigError):
    pass


class UnknownActivityError(ConfigError):
    pass


class ConstraintViolation(ConfigError):
    pass


class MissingField(ConfigError):
    pass


@dataclass(frozen=True)
class EngineParams:
    """Runtime tunables, overridable from an optional [engine] section.

    The gesture thresholds are common touch-UI defaults; the speed-chord
    mapping is configurable because the two descriptions of it in the
    source material disagree (see docs/config-format.md).
    """

    double_tap_window_ms: int = 400
    long_press_ms: int = 800
    chord_overlap_ms: int = 100
    press_timeout_ms: int = 10_000
    speech_window_ms: int = 2_000
    utterance_every_reps: int = 2
    front_double_tap: str = "slower"          # "slower" | "faster"
    speech_false_negative: float = 0.0
    fall_probability: float = 0.0
    battery_capacity_min: float = 35.0
    idle_drain_factor: float = 0.1
    speak_ms_per_word: int = 330
    speak_min_ms: int = 800


_ENGINE_FIELDS = {f.name: f for f in fields(EngineParams)}


@dataclass(frozen=True)
class ActivityConfig:
    """One program entry.  sets/reps/speed apply to exercises only."""

    activity: ActivityId
    sets: int | None = None
    reps: int | None = None
    speed: SpeedSetting | None = None
    rounds: int | None = None                 # toy relay only


@dataclass(frozen=True)
class SessionConfig:
    patient_name: str
    carer_name: str
    program: tuple[ActivityConfig, ...]
    intro_variant: str = "intro_1"
    entertainment: str = "dance_1"
    seed: int = 0
    engine: EngineParams = field(default_factory=EngineParams)

    def with_seed(self, seed: int) -> "SessionConfig":
        return replace(self, seed=seed)


_default_catalog: Catalog | None = None


def _catalog() -> Catalog:
    global _default_catalog
    if _default_catalog is None:
        _default_catalog = Catalog.load_default()
    return _default_catalog


def parse_config(source: str, catalog: Catalog | None = None) -> SessionConfig:
    """Parse and validate a session file.

    Raises a ConfigError subclass (never anything else) for any input
    that does not describe a valid session.
    """
    catalog = catalog or _catalog()
    try:
        doc = kvfile.parse(source)
    except kvfile.KvParseError as exc:
        raise ConfigSyntaxError(exc.message, exc.line, exc.column) from None

    header = doc.header
    _check_keys(header, {"format_version", "patient", "carer", "seed", "intro", "entertainment"})
    version = header.get("format_version")
    if version is None:
        raise MissingField("missing format_version record")
    if version != str(FORMAT_VERSION):
        raise ConstraintViolation(
            f"unsupported format_version {version!r}", header.line_of("format_version")
        )
    patient = header.get("patient")
    if not patient:
        raise MissingField("missing patient name")
    carer = header.get("carer")
    if not carer:
        raise MissingField("missing carer name")
    seed = _parse_int(header, "seed", default=0, minimum=0)

    intro = header.get("intro") or catalog.lookup(ActivityId.INTRO_SPEECH).intro_variants[0][0]
    dance = header.get("entertainment") or catalog.lookup(ActivityId.FAREWELL_DANCE).dance_variants[0].id
    _check_variant(catalog, ActivityId.INTRO_SPEECH, intro, header, "intro")
    _check_variant(catalog, ActivityId.FAREWELL_DANCE, dance, header, "entertainment")

    engine = EngineParams()
    program: list[ActivityConfig] = []
    for sec in doc.sections:
        if sec.name == "engine":
            engine = _parse_engine(sec)
        elif sec.name == "activity":
            program.append(_parse_activity(sec, catalog))
        else:
            raise ConfigSyntaxError(f"unknown section [{sec.name}]", sec.line)

    if not program:
        raise ConstraintViolation("program is empty: at least one [activity] required")
    _validate_program(program, doc, catalog)

    return SessionConfig(
        patient_name=patient,
        carer_name=carer,
        program=tuple(program),
        intro_variant=intro,
        entertainment=dance,
        seed=seed,
        engine=engine,
    )


def render_config(config: SessionConfig) -> str:
    """Canonical text form; parse_config(render_config(c)) == c."""
    lines = kvfile.render_pairs(
        [
            ("format_version", str(FORMAT_VERSION)),
            ("patient", config.patient_name),
            ("carer", config.carer_name),
            ("seed", str(config.seed)),
            ("intro", config.intro_variant),
            ("entertainment", config.entertainment),
        ]
    )
    defaults = EngineParams()
    overrides = [
        (name, getattr(config.engine, name))
        for name in _ENGINE_FIELDS
        if getattr(config.engine, name) != getattr(defaults, name)
    ]
    if overrides:
        lines.append("")
        lines += kvfile.render_section("engine", [(k, _fmt(v)) for k, v in overrides])
    for entry in config.program:
        lines.append("")
        pairs = [("name", entry.activity.value)]
        if entry.sets is not None:
            pairs.append(("sets", str(entry.sets)))
        if entry.reps is not None:
            pairs.append(("reps", str(entry.reps)))
        if entry.speed is not None:
            pairs.append(("speed", entry.speed.label))
        if entry.rounds is not None:
            pairs.append(("rounds", str(entry.rounds)))
        lines += kvfile.render_section("activity", pairs)
    return "\n".join(lines) + "\n"


def _fmt(value: object) -> str:
    if isinstance(value, float):
        return f"{value:g}"
    return str(value)


def _check_keys(sec: kvfile.Section, allowed: set[str]) -> None:
    for rec in sec.records:
        if rec.key not in allowed:
            raise ConfigSyntaxError(f"unknown key {rec.key!r}", rec.line)


def _check_variant(
    catalog: Catalog, activity: ActivityId, variant: str, sec: kvfile.Section, key: str
) -> None:
    spec = catalog.lookup(activity)
    if activity is ActivityId.INTRO_SPEECH:
        known = {vid for vid, _ in spec.intro_variants}
    else:
        known = {dv.id for dv in spec.dance_variants}
    if variant not in known:
        raise ConstraintViolation(
            f"unknown {key} variant {variant!r} (have: {', '.join(sorted(known))})",
            sec.line_of(key),
        )


def _parse_int(sec: kvfile.Section, key: str, default: int | None = None, minimum: int = 1) -> int:
    raw = sec.get(key)
    if raw is None:
        if default is None:
            raise MissingField(f"missing {key}", sec.line)
        return default
    try:
        value = int(raw)
    except ValueError:
        raise ConfigSyntaxError(f"{key} must be an integer, got {raw!r}", sec.line_of(key)) from None
    if value < minimum:
        raise ConstraintViolation(f"{key} must be >= {minimum}", sec.line_of(key))
    return value


def _parse_engine(sec: kvfile.Section) -> EngineParams:
    values: dict[str, object] = {}
    for rec in sec.records:
        fld = _ENGINE_FIELDS.get(rec.key)
        if fld is None:
            raise ConfigSyntaxError(f"unknown engine key {rec.key!r}", rec.line)
        try:
            if fld.type in ("int", int):
                values[rec.key] = int(rec.value)
            elif fld.type in ("float", float):
                values[rec.key] = float(rec.value)
            else:
                values[rec.key] = rec.value
        except ValueError:
            raise ConfigSyntaxError(f"bad value for {rec.key}: {rec.value!r}", rec.line) from None
    params = EngineParams(**values)  # type: ignore[arg-type]
    if params.front_double_tap not in ("slower", "faster"):
        raise ConstraintViolation(
            "front_double_tap must be 'slower' or 'faster'", sec.line_of("front_double_tap")
        )
    for name in ("speech_false_negative", "fall_probability"):
        p = getattr(params, name)
        if not 0.0 <= p <= 1.0:
            raise ConstraintViolation(f"{name} must be within [0, 1]", sec.line_of(name))
    for name in (
        "double_tap_window_ms",
        "long_press_ms",
        "chord_overlap_ms",
        "press_timeout_ms",
        "speech_window_ms",
        "utterance_every_reps",
        "speak_ms_per_word",
        "speak_min_ms",
    ):
        if getattr(params, name) <= 0:
            raise ConstraintViolation(f"{name} must be positive", sec.line_of(name))
    return params


def _parse_activity(sec: kvfile.Section, catalog: Catalog) -> ActivityConfig:
    name = sec.get("name")
    if name is None:
        raise MissingField("activity section missing name", sec.line)
    try:
        activity = ActivityId(name)
    except ValueError:
        raise UnknownActivityError(f"unknown activity {name!r}", sec.line_of("name")) from None
    spec = catalog.lookup(activity)

    if spec.is_exercise:
        _check_keys(sec, {"name", "sets", "reps", "speed"})
        sets = _parse_int(sec, "sets")
        reps = _parse_int(sec, "reps")
        speed_raw = sec.get("speed")
        try:
            speed = SpeedSetting.from_label(speed_raw) if speed_raw else SpeedSetting.MEDIUM
        except ValueError:
            raise ConfigSyntaxError(f"unknown speed {speed_raw!r}", sec.line_of("speed")) from None
        return ActivityConfig(activity=activity, sets=sets, reps=reps, speed=speed)

    if activity is ActivityId.TOY_RELAY:
        _check_keys(sec, {"name", "rounds"})
        rounds = _parse_int(sec, "rounds", default=3)
        return ActivityConfig(activity=activity, rounds=rounds)

    _check_keys(sec, {"name"})
    for key in ("sets", "reps", "speed"):
        if sec.get(key) is not None:
            raise ConstraintViolation(
                f"{key} does not apply to {activity.value}", sec.line_of(key)
            )
    return ActivityConfig(activity=activity)


def _validate_program(
    program: list[ActivityConfig], doc: kvfile.Document, catalog: Catalog
) -> None:
    activity_lines = [s.line for s in doc.sections if s.name == "activity"]

    def line_of(index: int) -> int:
        return activity_lines[index] if index < len(activity_lines) else 1

    for idx, entry in enumerate(program):
        if entry.activity is ActivityId.INTRO_SPEECH and idx != 0:
            raise ConstraintViolation("IntroSpeech must be the first activity", line_of(idx))
        if entry.activity is ActivityId.FAREWELL_DANCE and idx != len(program) - 1:
            raise ConstraintViolation("FarewellDance must be the last activity", line_of(idx))
    for only_once in (ActivityId.TOY_RELAY, ActivityId.FAREWELL_DANCE, ActivityId.INTRO_SPEECH):
        hits = [i for i, e in enumerate(program) if e.activity is only_once]
        if len(hits) > 1:
            raise ConstraintViolation(f"at most one {only_once.value} per session", line_of(hits[1]))

    # Posture grouping: once the exercise sequence leaves a posture it
    # must not come back to it (sessions keep same-posture blocks together).
    seen: list = []
    for idx, entry in enumerate(program):
        spec = catalog.lookup(entry.activity)
        if spec.kind is not ActivityKind.EXERCISE:
            continue
        posture = spec.posture
        if seen and seen[-1] == posture:
            continue
        if posture in seen:
            raise ConstraintViolation(
                f"posture grouping broken: {posture.value} exercises are not contiguous",
                line_of(idx),
            )
        seen.append(posture)
