from __future__ import annotations

import random

import pytest

from robocoach.config import EngineParams
from robocoach.gestures import (
    Button,
    GestureClassifier,
    GestureKind,
    RawPress,
    classify_presses,
)
from .gesture_oracle import normalized, oracle_classify


def kinds(gestures):
    return [g.kind for g in gestures]


def test_single_tap_emitted_at_window_expiry():
    gestures = classify_presses([RawPress(Button.FRONT, 0, 120)])
    assert gestures == [gestures[0]]
    assert gestures[0].kind is GestureKind.SINGLE_TAP
    assert gestures[0].button is Button.FRONT
    assert gestures[0].at == 120 + 400


def test_double_tap_within_window():
    gestures = classify_presses(
        [RawPress(Button.FRONT, 0, 100), RawPress(Button.FRONT, 300, 400)]
    )
    assert kinds(gestures) == [GestureKind.DOUBLE_TAP]
    assert gestures[0].at == 400


def test_two_taps_outside_window_are_two_singles():
    gestures = classify_presses(
        [RawPress(Button.FRONT, 0, 100), RawPress(Button.FRONT, 600, 700)]
    )
    assert kinds(gestures) == [GestureKind.SINGLE_TAP, GestureKind.SINGLE_TAP]


def test_long_press_emitted_at_threshold():
    gestures = classify_presses([RawPress(Button.REAR, 0, 1_200)])
    assert kinds(gestures) == [GestureKind.LONG_PRESS]
    assert gestures[0].at == 800


def test_slow_down_chord_from_spec_timeline():
    gestures = classify_presses(
        [
            RawPress(Button.MIDDLE, 0, 2_000),
            RawPress(Button.FRONT, 600, 700),
            RawPress(Button.FRONT, 850, 950),
        ]
    )
    assert kinds(gestures) == [GestureKind.SLOW_DOWN_CHORD]


def test_speed_up_chord_uses_rear_button():
    gestures = classify_presses(
        [
            RawPress(Button.MIDDLE, 0, 2_000),
            RawPress(Button.REAR, 900, 1_000),
            RawPress(Button.REAR, 1_150, 1_250),
        ]
    )
    assert kinds(gestures) == [GestureKind.SPEED_UP_CHORD]


def test_chord_mapping_is_configurable():
    params = EngineParams(front_double_tap="faster")
    gestures = classify_presses(
        [
            RawPress(Button.MIDDLE, 0, 2_000),
            RawPress(Button.FRONT, 900, 1_000),
            RawPress(Button.FRONT, 1_150, 1_250),
        ],
        params,
    )
    assert kinds(gestures) == [GestureKind.SPEED_UP_CHORD]


def test_pause_chord_from_spec_timeline():
    gestures = classify_presses(
        [RawPress(Button.FRONT, 0, 1_500), RawPress(Button.REAR, 100, 1_600)]
    )
    assert kinds(gestures) == [GestureKind.PAUSE_CHORD]
    assert gestures[0].at == 900          # later press crosses the hold threshold


def test_chord_precedence_no_constituent_primitives():
    # speed chord: neither the middle long press nor the double tap leak out
    gestures = classify_presses(
        [
            RawPress(Button.MIDDLE, 0, 2_000),
            RawPress(Button.FRONT, 900, 1_000),
            RawPress(Button.FRONT, 1_100, 1_200),
        ]
    )
    assert kinds(gestures) == [GestureKind.SLOW_DOWN_CHORD]
    # pause chord: no long presses emitted for either button
    gestures = classify_presses(
        [RawPress(Button.FRONT, 0, 1_500), RawPress(Button.REAR, 100, 1_600)]
    )
    assert kinds(gestures) == [GestureKind.PAUSE_CHORD]


def test_middle_hold_without_taps_is_long_press_on_release():
    gestures = classify_presses([RawPress(Button.MIDDLE, 0, 1_500)])
    assert kinds(gestures) == [GestureKind.LONG_PRESS]
    assert gestures[0].button is Button.MIDDLE
    assert gestures[0].at == 1_500


def test_failed_chord_yields_primitives():
    # middle hold too short for the chord: the taps stay a double tap
    gestures = classify_presses(
        [
            RawPress(Button.MIDDLE, 0, 700),
            RawPress(Button.FRONT, 100, 180),
            RawPress(Button.FRONT, 300, 380),
        ]
    )
    assert GestureKind.DOUBLE_TAP in kinds(gestures)
    assert GestureKind.SLOW_DOWN_CHORD not in kinds(gestures)


def test_sequential_longs_do_not_pause():
    # front's long press already emitted before rear is pressed
    gestures = classify_presses(
        [RawPress(Button.FRONT, 0, 2_500), RawPress(Button.REAR, 1_000, 2_000)]
    )
    assert kinds(gestures) == [GestureKind.LONG_PRESS, GestureKind.LONG_PRESS]


def test_classification_is_deterministic():
    stream = [
        RawPress(Button.FRONT, 0, 90),
        RawPress(Button.MIDDLE, 50, 1_400),
        RawPress(Button.REAR, 200, 1_300),
        RawPress(Button.FRONT, 500, 620),
    ]
    assert classify_presses(stream) == classify_presses(stream)


def test_overlapping_same_button_fragments_dropped():
    classifier = GestureClassifier()
    classifier.feed(Button.FRONT, True, 0)
    classifier.feed(Button.FRONT, True, 50)        # down while down
    classifier.feed(Button.FRONT, False, 100)
    classifier.feed(Button.FRONT, False, 150)      # up while up
    assert len(classifier.dropped) == 2


def random_stream(rng: random.Random) -> list[RawPress]:
    cursors = {b: 0 for b in Button}
    presses = []
    for _ in range(rng.randrange(1, 10)):
        button = rng.choice(list(Button))
        start = cursors[button] + rng.randrange(0, 1_200)
        duration = rng.choice(
            [0, rng.randrange(20, 390), rng.randrange(390, 810), rng.randrange(810, 2_500)]
        )
        presses.append(RawPress(button, start, start + duration))
        cursors[button] = start + duration + rng.randrange(0, 60)
    return sorted(presses, key=lambda p: (p.down_at, p.up_at))


@pytest.mark.parametrize("seed", range(5))
def test_online_matches_bruteforce_oracle(seed):
    rng = random.Random(seed)
    for i in range(1_000):
        stream = random_stream(rng)
        online = normalized(classify_presses(stream))
        offline = oracle_classify(stream)
        assert online == offline, f"disagree on stream #{i}: {stream}"
