"""Keyframe selection: confidence gate, palm-center motion and hand-state transitions."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from typing import Iterable, Iterator

from gestos.encoder import (
    DegeneratePalm,
    EncoderParams,
    canonical_groups,
    finger_groups,
    finger_states,
    hand_orientation,
)
from gestos.stream import INDEX, MIDDLE, PINKY, RING, WRIST, HandFrame, frame_to_record

PALM_POINTS = (WRIST, INDEX[0], MIDDLE[0], RING[0], PINKY[0])


@dataclass(frozen=True)
class ExtractorParams:
    conf_threshold: float = 0.7
    motion_threshold: float = 0.05
    group_ratio: float = EncoderParams.group_ratio


@dataclass(frozen=True)
class StateSignature:
    extension: tuple[bool, bool, bool, bool, bool]
    orientation: tuple[str, str]  # (compass label or "none", facing)
    grouping: tuple[tuple[str, ...], ...]


@dataclass(frozen=True)
class Keyframe:
    frame: HandFrame
    signature: StateSignature
    center: tuple[float, float]
    reason: str  # first | motion | state_change

    def to_record(self) -> dict:
        return {
            "reason": self.reason,
            "center": list(self.center),
            "signature": {
                "extension": list(self.signature.extension),
                "orientation": list(self.signature.orientation),
                "grouping": [list(g) for g in self.signature.grouping],
            },
            "frame": frame_to_record(self.frame),
        }

    def to_json(self) -> str:
        return json.dumps(self.to_record(), separators=(",", ":"))


def hand_center(frame: HandFrame) -> tuple[float, float]:
    """Mean of the wrist and the four finger MCPs, so finger curls don't read as translation."""
    xs = [frame.landmarks[i].x for i in PALM_POINTS]
    ys = [frame.landmarks[i].y for i in PALM_POINTS]
    return (math.fsum(xs) / len(xs), math.fsum(ys) / len(ys))


def state_signature(frame: HandFrame, group_ratio: float = EncoderParams.group_ratio) -> StateSignature:
    states = finger_states(frame)
    extended = [fs.finger for fs in states if fs.extended]
    orientation = hand_orientation(frame)
    try:
        grouping = finger_groups(frame, extended, group_ratio)
    except DegeneratePalm:
        grouping = canonical_groups([f] for f in extended)
    return StateSignature(
        extension=tuple(fs.extended for fs in states),
        orientation=(orientation.direction or "none", orientation.facing),
        grouping=grouping,
    )


class KeyframeExtractor:
    """Stateful selector for one frame stream. Feed frames in timestamp order."""

    def __init__(self, params: ExtractorParams = ExtractorParams()) -> None:
        self.params = params
        self.last: Keyframe | None = None

    def reset(self) -> None:
        self.last = None

    def passes_gate(self, frame: HandFrame) -> bool:
        return frame.confidence >= self.params.conf_threshold

    def push(self, frame: HandFrame) -> Keyframe | None:
        if not self.passes_gate(frame):
            return None
        signature = state_signature(frame, self.params.group_ratio)
        center = hand_center(frame)
        if self.last is None:
            reason = "first"
        elif signature != self.last.signature:
            reason = "state_change"
        elif math.dist(center, self.last.center) > self.params.motion_threshold:
            reason = "motion"
        else:
            return None
        self.last = Keyframe(frame, signature, center, reason)
        return self.last


def select_keyframes(
    frames: Iterable[HandFrame], params: ExtractorParams = ExtractorParams()
) -> Iterator[Keyframe]:
    extractor = KeyframeExtractor(params)
    for frame in frames:
        kf = extractor.push(frame)
        if kf is not None:
            yield kf
