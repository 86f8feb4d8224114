import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from gestos.keyframes import (
    ExtractorParams,
    KeyframeExtractor,
    hand_center,
    select_keyframes,
    state_signature,
)
from gestos.synth import FIST, OPEN, HandPose, random_pose, to_frame, translate_frame

from conftest import flat_points, make_frame

PARAMS = ExtractorParams()


def test_center_of_identical_points():
    assert hand_center(make_frame(flat_points())) == (0.5, 0.5)


def test_center_is_mean_of_palm_points():
    pts = flat_points()
    for i, x in zip((0, 5, 9, 13, 17), (0.1, 0.2, 0.3, 0.4, 0.5)):
        pts[i] = (x, 0.5, 0.0)
    cx, cy = hand_center(make_frame(pts))
    assert cx == pytest.approx(0.3, abs=1e-15) and cy == 0.5


def test_center_translation_equivariant():
    frame = to_frame(HandPose(wrist=(0.4, 0.7)))
    moved = translate_frame(frame, 0.2, -0.1)
    (ax, ay), (bx, by) = hand_center(frame), hand_center(moved)
    assert bx - ax == pytest.approx(0.2, abs=1e-12)
    assert by - ay == pytest.approx(-0.1, abs=1e-12)


def test_signature_open_and_fist():
    assert state_signature(to_frame(HandPose(extended=OPEN))).extension == (True,) * 5
    fist = state_signature(to_frame(HandPose(extended=FIST)))
    assert fist.extension == (False,) * 5
    assert fist.grouping == ()


def test_signature_deterministic():
    frame = to_frame(HandPose())
    assert state_signature(frame) == state_signature(frame)


def test_identical_frames_one_keyframe():
    frames = [to_frame(HandPose(), t=i / 30) for i in range(100)]
    kfs = list(select_keyframes(frames))
    assert len(kfs) == 1 and kfs[0].reason == "first"


def test_open_then_fist_two_keyframes():
    frames = [to_frame(HandPose(extended=OPEN), t=i / 30) for i in range(30)]
    frames += [to_frame(HandPose(extended=FIST), t=(30 + i) / 30) for i in range(30)]
    assert [k.reason for k in select_keyframes(frames)] == ["first", "state_change"]


def test_low_confidence_gate():
    frames = [to_frame(HandPose(), t=i / 30, confidence=0.3) for i in range(20)]
    assert list(select_keyframes(frames)) == []


def test_motion_against_last_keyframe_accumulates_drift():
    # 0.012 per frame never exceeds 0.05 frame-to-frame, but does against the last keyframe
    frames = [to_frame(HandPose().moved(0.012 * i, 0.0), t=i / 30) for i in range(11)]
    kfs = list(select_keyframes(frames))
    assert [k.reason for k in kfs] == ["first", "motion", "motion"]
    assert [round(k.frame.timestamp * 30) for k in kfs] == [0, 5, 10]


def test_state_change_wins_over_motion():
    a = to_frame(HandPose(extended=OPEN), t=0.0)
    b = to_frame(HandPose(extended=FIST).moved(0.2, 0.0), t=0.1)
    assert [k.reason for k in select_keyframes([a, b])] == ["first", "state_change"]


def test_reset_makes_next_frame_first():
    ex = KeyframeExtractor()
    frame = to_frame(HandPose())
    assert ex.push(frame).reason == "first"
    assert ex.push(frame) is None
    ex.reset()
    assert ex.push(frame).reason == "first"


def planted_stream(rng, n_changes):
    """A fixed-center stream with exactly ``n_changes`` extension changes, noise frames gated out."""
    states = [tuple(bool(b) for b in rng.integers(0, 2, 5))]
    while len(states) < n_changes + 1:
        nxt = tuple(bool(b) for b in rng.integers(0, 2, 5))
        if nxt != states[-1]:
            states.append(nxt)
    base = HandPose(wrist=(0.5, 0.7), heading=float(rng.uniform(60, 120)))
    frames, t = [], 0.0
    for ext in states:
        for _ in range(int(rng.integers(1, 6))):
            frames.append(to_frame(HandPose(**{**base.__dict__, "extended": ext}), t, 0.9))
            t += 1 / 30
            if rng.random() < 0.3:
                # a low-confidence outlier somewhere else entirely
                frames.append(to_frame(HandPose(wrist=(0.2, 0.2), extended=FIST), t, 0.2))
                t += 1 / 30
    return frames


@pytest.mark.parametrize("n", range(11))
def test_counting_property(n):
    rng = np.random.default_rng(100 + n)
    for _ in range(10):
        kfs = list(select_keyframes(planted_stream(rng, n)))
        assert len(kfs) == n + 1


def test_counting_empty_after_gate():
    frames = [to_frame(HandPose(), t=i / 30, confidence=0.5) for i in range(10)]
    assert len(list(select_keyframes(frames))) == 0


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_output_invariants(seed):
    rng = np.random.default_rng(seed)
    frames = []
    for i in range(int(rng.integers(0, 40))):
        pose = random_pose(rng)
        frames.append(to_frame(pose, i / 30, float(rng.uniform(0.0, 1.0))))
    kfs = list(select_keyframes(frames))
    assert len(kfs) <= len(frames)
    times = [k.frame.timestamp for k in kfs]
    assert times == sorted(times)
    assert all(k.frame.confidence >= PARAMS.conf_threshold for k in kfs)
    for a, b in zip(kfs, kfs[1:]):
        assert a.signature != b.signature or math.dist(a.center, b.center) > PARAMS.motion_threshold
    assert [k.to_json() for k in select_keyframes(frames)] == [k.to_json() for k in kfs]
