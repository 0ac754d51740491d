from __future__ import annotations

import random

import pytest

from robocoach.catalog import ActivityId, ActivityKind, Posture, SpeedSetting
from robocoach.config import (
    ActivityConfig,
    ConfigError,
    ConfigSyntaxError,
    ConstraintViolation,
    EngineParams,
    MissingField,
    SessionConfig,
    UnknownActivityError,
    parse_config,
    render_config,
)
from .conftest import make_config


def test_parse_session_eleven_style_program(catalog):
    text = make_config(
        ["StaticQuads 3x10 fast", "QuadsOverRoll 2x8 medium", "LegRaises 2x8 medium", "FarewellDance"]
    )
    config = parse_config(text, catalog)
    assert config.patient_name == "Alex"
    assert config.carer_name == "Jo"
    names = [e.activity.value for e in config.program]
    assert names == ["StaticQuads", "QuadsOverRoll", "LegRaises", "FarewellDance"]
    assert config.program[0].speed is SpeedSetting.FAST
    assert config.program[3].sets is None


def test_empty_file_is_missing_field():
    with pytest.raises(MissingField):
        parse_config("")


@pytest.mark.parametrize(
    "mutation, error",
    [
        ("patient = Alex", MissingField),                   # no carer/program
        ("sets = x", ConfigSyntaxError),
        ("name = Cartwheels", UnknownActivityError),
        ("reps = 0", ConstraintViolation),
        ("sets = -2", ConstraintViolation),
        ("speed = warp", ConfigSyntaxError),
    ],
)
def test_rejections_carry_line_numbers(mutation, error):
    if mutation.startswith("patient"):
        text = "format_version = 1\npatient = Alex\n"
    else:
        key = mutation.split(" ")[0]
        base = {"name": "name = StaticQuads", "sets": "sets = 3", "reps": "reps = 10", "speed": "speed = fast"}
        base[key] = mutation
        text = (
            "format_version = 1\npatient = A\ncarer = B\n\n[activity]\n"
            + "\n".join(base[k] for k in ("name", "sets", "reps", "speed"))
            + "\n"
        )
    with pytest.raises(error) as excinfo:
        parse_config(text)
    assert excinfo.value.line >= 1


def test_posture_grouping_violation_detected(catalog):
    # LyingBack, LyingSide, LyingBack: the first posture reappears
    text = make_config(["StaticQuads 1x5", "HipAbductionOnSide 1x5", "Bridge 1x5"])
    with pytest.raises(ConstraintViolation):
        parse_config(text, catalog)


def _posture_runs_ok(entries, catalog) -> bool:
    """Brute-force checker: scan posture runs of the exercise subsequence."""
    postures = [
        catalog.lookup(e).posture
        for e in entries
        if catalog.lookup(e).kind is ActivityKind.EXERCISE
    ]
    runs = []
    for posture in postures:
        if not runs or runs[-1] != posture:
            runs.append(posture)
    return len(runs) == len(set(runs))


def test_posture_grouping_matches_bruteforce_oracle(catalog):
    rng = random.Random(42)
    exercise_names = [s.id.value for s in catalog.exercises]
    for _ in range(300):
        picks = [rng.choice(exercise_names) for _ in range(rng.randrange(1, 7))]
        text = make_config([f"{n} 1x2 fast" for n in picks])
        expected_ok = _posture_runs_ok(picks, catalog)
        try:
            parse_config(text, catalog)
            parsed_ok = True
        except ConstraintViolation:
            parsed_ok = False
        assert parsed_ok == expected_ok, picks


def test_dance_must_be_last(catalog):
    text = make_config(["FarewellDance", "StaticQuads 1x5 fast"])
    with pytest.raises(ConstraintViolation):
        parse_config(text, catalog)


def test_intro_must_be_first(catalog):
    text = make_config(["StaticQuads 1x5 fast", "IntroSpeech"])
    with pytest.raises(ConstraintViolation):
        parse_config(text, catalog)


def test_at_most_one_toy_relay(catalog):
    text = make_config(["ToyRelay", "ToyRelay"])
    with pytest.raises(ConstraintViolation):
        parse_config(text, catalog)


def test_sets_not_allowed_on_dance(catalog):
    text = make_config(["FarewellDance"]).replace(
        "name = FarewellDance", "name = FarewellDance\nsets = 2"
    )
    with pytest.raises((ConstraintViolation, ConfigSyntaxError)):
        parse_config(text, catalog)


def test_comments_and_blank_lines_ignored(catalog):
    text = make_config(["StaticQuads 2x5 fast"])
    noisy = "# session file\n\n" + text.replace("[activity]", "# program\n[activity]")
    assert parse_config(noisy, catalog) == parse_config(text, catalog)


def test_seed_record_preserved(catalog):
    config = parse_config(make_config(["StaticQuads 1x5 fast"], seed=42), catalog)
    assert config.seed == 42
    assert "seed = 42" in render_config(config)


def _random_valid_config(rng: random.Random, catalog) -> SessionConfig:
    groups: dict[Posture, list[str]] = {}
    for spec in catalog.exercises:
        groups.setdefault(spec.posture, []).append(spec.id.value)
    order = rng.sample(list(groups), k=rng.randrange(1, len(groups) + 1))
    program: list[ActivityConfig] = []
    for posture in order:
        for name in rng.sample(groups[posture], k=rng.randrange(1, len(groups[posture]) + 1)):
            program.append(
                ActivityConfig(
                    activity=ActivityId(name),
                    sets=rng.randrange(1, 4),
                    reps=rng.randrange(1, 15),
                    speed=rng.choice(list(SpeedSetting)),
                )
            )
    if rng.random() < 0.4:
        program.append(ActivityConfig(activity=ActivityId.TOY_RELAY, rounds=rng.randrange(1, 5)))
    if rng.random() < 0.4:
        program.append(ActivityConfig(activity=ActivityId.FAREWELL_DANCE))
    engine = EngineParams(double_tap_window_ms=rng.choice([300, 400, 500]))
    return SessionConfig(
        patient_name=rng.choice(["Alex", "Sam", "Mx Pat", "Jo-Ann"]),
        carer_name="Kim",
        program=tuple(program),
        intro_variant=rng.choice(["intro_1", "intro_2", "intro_3"]),
        entertainment=rng.choice(["dance_1", "dance_2"]),
        seed=rng.randrange(0, 10_000),
        engine=engine,
    )


def test_render_parse_round_trip_on_random_configs(catalog):
    rng = random.Random(7)
    for _ in range(200):
        config = _random_valid_config(rng, catalog)
        text = render_config(config)
        assert parse_config(text, catalog) == config
        # canonical form is stable
        assert render_config(parse_config(text, catalog)) == text


def test_full_posture_grouped_program_round_trips(catalog):
    by_posture: dict[Posture, list[str]] = {}
    for spec in catalog.exercises:
        by_posture.setdefault(spec.posture, []).append(spec.id.value)
    entries = [f"{name} 2x8 medium" for group in by_posture.values() for name in group]
    text = make_config(entries)
    config = parse_config(text, catalog)
    assert len(config.program) == 13
    assert parse_config(render_config(config), catalog) == config


def test_engine_section_round_trip(catalog):
    text = make_config(["StaticQuads 1x5 fast"], engine="long_press_ms = 900\nfall_probability = 0.5")
    config = parse_config(text, catalog)
    assert config.engine.long_press_ms == 900
    assert config.engine.fall_probability == 0.5
    assert parse_config(render_config(config), catalog) == config


def test_fuzzed_inputs_never_crash(catalog):
    rng = random.Random(99)
    alphabet = "abcdefgih =[]#\n\t{}()!0123456789_-.é世"
    seed_text = make_config(["StaticQuads 2x5 fast", "ToyRelay"])
    for _ in range(2_000):
        if rng.random() < 0.5:
            text = "".join(rng.choice(alphabet) for _ in range(rng.randrange(0, 160)))
        else:
            chars = list(seed_text)
            for _ in range(rng.randrange(1, 6)):
                pos = rng.randrange(len(chars))
                chars[pos] = rng.choice(alphabet)
            text = "".join(chars)
        try:
            parse_config(text, catalog)
        except ConfigError as exc:
            assert exc.line >= 1 and exc.column >= 1
