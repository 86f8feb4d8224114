"""Synthetic hand generator with construction-time ground truth.

Hands are built in a palm frame: ``u`` runs from the wrist toward the middle
MCP, ``v`` points to the thumb side. Lengths are in units of ``scale``. The
labels a hand carries (extension flags, facing, heading) come from how it
was built, never from the encoder, which makes this module usable as an
independent oracle for the feature extractors.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

from gestos.stream import HandFrame, Landmark

FINGERS = ("thumb", "index", "middle", "ring", "pinky")

# palm-frame (u, v) positions of the fixed joints
_WRIST = (0.0, 0.0)
_THUMB_CMC = (0.25, 0.2)
_THUMB_MCP = (0.5, 0.45)
_MCP = {"index": (1.0, 0.3), "middle": (1.0, 0.1), "ring": (0.95, -0.1), "pinky": (0.85, -0.3)}
_LENGTH = {"index": 1.0, "middle": 1.05, "ring": 1.0, "pinky": 0.8}
_THUMB_LENGTH = 0.8

OPEN = (True, True, True, True, True)
FIST = (False, False, False, False, False)


@dataclass(frozen=True)
class HandPose:
    """Parameters of one synthetic hand.

    ``heading`` is the in-plane angle (degrees, counter-clockwise from image
    right, screen-up positive) of the wrist -> middle-MCP axis. ``spread``
    holds per-finger angular offsets from the heading, positive toward the
    thumb side; a missing finger uses the default (thumb 45, others 0).
    """

    wrist: tuple[float, float] = (0.5, 0.75)
    heading: float = 90.0
    scale: float = 0.2
    handedness: str = "right"
    facing: str = "toward"
    extended: tuple[bool, ...] = OPEN
    spread: dict[str, float] = field(default_factory=dict)
    depth: float = 0.0

    def moved(self, dx: float, dy: float) -> "HandPose":
        return replace(self, wrist=(self.wrist[0] + dx, self.wrist[1] + dy))


def _unit(deg: float) -> tuple[float, float]:
    rad = math.radians(deg)
    return (math.cos(rad), -math.sin(rad))


def thumb_side_angle(pose: HandPose) -> float:
    # right hand palm-toward-camera (or left hand palm-away) has the thumb
    # clockwise from the heading in screen-up terms
    clockwise = (pose.handedness == "right") == (pose.facing == "toward")
    return pose.heading - 90.0 if clockwise else pose.heading + 90.0


def _finger_dir(pose: HandPose, finger: str) -> tuple[float, float]:
    default = 45.0 if finger == "thumb" else 0.0
    delta = math.radians(pose.spread.get(finger, default))
    return (math.cos(delta), math.sin(delta))


def landmarks(pose: HandPose) -> list[tuple[float, float, float]]:
    """The 21 (x, y, z) points of ``pose`` in standard hand topology order."""
    s = pose.scale
    ux, uy = _unit(pose.heading)
    vx, vy = _unit(thumb_side_angle(pose))
    wx, wy = pose.wrist

    def place(uv: tuple[float, float], z: float) -> tuple[float, float, float]:
        a, b = uv
        return (wx + s * (a * ux + b * vx), wy + s * (a * uy + b * vy), pose.depth + z)

    def along(origin, direction, t):
        return (origin[0] + t * direction[0], origin[1] + t * direction[1])

    pts: list[tuple[float, float, float]] = [place(_WRIST, 0.0)]

    # thumb: CMC, MCP, IP, TIP
    pts.append(place(_THUMB_CMC, -0.005))
    pts.append(place(_THUMB_MCP, -0.01))
    if pose.extended[0]:
        d = _finger_dir(pose, "thumb")
        pts.append(place(along(_THUMB_MCP, d, 0.4 * _THUMB_LENGTH), -0.015))
        pts.append(place(along(_THUMB_MCP, d, _THUMB_LENGTH), -0.02))
    else:
        # tucked across the palm toward the pinky side
        pts.append(place((0.8, 0.35), -0.02))
        pts.append(place((0.85, 0.0), -0.03))

    for i, finger in enumerate(FINGERS[1:], start=1):
        mcp = _MCP[finger]
        pts.append(place(mcp, -0.01))
        if pose.extended[i]:
            d = _finger_dir(pose, finger)
            length = _LENGTH[finger]
            pts.append(place(along(mcp, d, 0.45 * length), -0.015))
            pts.append(place(along(mcp, d, 0.75 * length), -0.02))
            pts.append(place(along(mcp, d, length), -0.025))
        else:
            # curled: PIP forward of the knuckle, tip folded back under the palm
            pts.append(place((mcp[0] + 0.35, mcp[1]), -0.03))
            pts.append(place((mcp[0] + 0.15, mcp[1]), -0.04))
            pts.append(place((mcp[0] - 0.1, mcp[1]), -0.035))
    return pts


def extension_margins(pose: HandPose) -> tuple[float, ...]:
    """Per finger, how far the tip sits beyond (extended) or inside (curled) the PIP radius."""
    pts = landmarks(pose)
    out = []
    for i, finger in enumerate(FINGERS):
        if finger == "thumb":
            anchor, mid, tip = pts[17], pts[3], pts[4]
        else:
            base = 5 + 4 * (i - 1)
            anchor, mid, tip = pts[0], pts[base + 1], pts[base + 3]
        diff = math.dist(tip, anchor) - math.dist(mid, anchor)
        out.append(diff if pose.extended[i] else -diff)
    return tuple(out)


def in_bounds(pose: HandPose, margin: float = 0.0) -> bool:
    return all(margin <= x <= 1 - margin and margin <= y <= 1 - margin for x, y, _ in landmarks(pose))


def to_frame(pose: HandPose, t: float = 0.0, confidence: float = 0.95) -> HandFrame:
    return HandFrame(
        timestamp=t,
        handedness=pose.handedness,
        confidence=confidence,
        landmarks=tuple(Landmark(x, y, z) for x, y, z in landmarks(pose)),
    )


def mirror_frame(frame: HandFrame) -> HandFrame:
    """Reflect x -> 1 - x and swap handedness."""
    return HandFrame(
        timestamp=frame.timestamp,
        handedness="left" if frame.handedness == "right" else "right",
        confidence=frame.confidence,
        landmarks=tuple(Landmark(1.0 - lm.x, lm.y, lm.z) for lm in frame.landmarks),
    )


def translate_frame(frame: HandFrame, dx: float, dy: float) -> HandFrame:
    return replace(
        frame, landmarks=tuple(Landmark(lm.x + dx, lm.y + dy, lm.z) for lm in frame.landmarks)
    )


def random_pose(rng, *, min_margin: float = 0.05, extended: tuple[bool, ...] | None = None) -> HandPose:
    """Draw a random in-bounds hand whose fingers all clear the PIP radius by ``min_margin``."""
    while True:
        ext = extended if extended is not None else tuple(bool(b) for b in rng.integers(0, 2, 5))
        pose = HandPose(
            wrist=(float(rng.uniform(0.35, 0.65)), float(rng.uniform(0.35, 0.65))),
            heading=float(rng.uniform(0.0, 360.0)),
            scale=float(rng.uniform(0.15, 0.22)),
            handedness="right" if rng.random() < 0.5 else "left",
            facing="toward" if rng.random() < 0.5 else "away",
            extended=ext,
            spread={
                "thumb": float(rng.uniform(25.0, 65.0)),
                "index": float(rng.uniform(-15.0, 20.0)),
                "middle": float(rng.uniform(-10.0, 10.0)),
                "ring": float(rng.uniform(-15.0, 10.0)),
                "pinky": float(rng.uniform(-25.0, 5.0)),
            },
            depth=float(rng.uniform(-0.05, 0.05)),
        )
        if in_bounds(pose, 0.01) and min(extension_margins(pose)) >= min_margin:
            return pose
