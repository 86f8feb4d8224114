"""Symbolic gesture features and the canonical description text.

Every feature here is a pure function of a frame (or two palm centers), so
the rendered description of a keyframe sequence is deterministic. The grammar
of the rendered text is documented in docs/description-grammar.md.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import TYPE_CHECKING, Sequence

from gestos.stream import INDEX, MIDDLE, PINKY, RING, THUMB, WRIST, HandFrame

if TYPE_CHECKING:
    from gestos.keyframes import Keyframe

FINGERS = ("thumb", "index", "middle", "ring", "pinky")
DIRECTIONS = ("right", "right-up", "up", "left-up", "left", "left-down", "down", "right-down")

# (base, PIP-or-IP, tip) per finger; for the thumb "base" is the MCP.
_JOINTS = {
    "thumb": (THUMB[1], THUMB[2], THUMB[3]),
    "index": (INDEX[0], INDEX[1], INDEX[3]),
    "middle": (MIDDLE[0], MIDDLE[1], MIDDLE[3]),
    "ring": (RING[0], RING[1], RING[3]),
    "pinky": (PINKY[0], PINKY[1], PINKY[3]),
}

DEGENERATE_EPS = 1e-6
# angles are snapped to this many decimals (degrees) before bucketing so that
# vectors built exactly on a sector boundary land in the upper sector
_ANGLE_DECIMALS = 9

_MIRROR = {
    "right": "left", "left": "right",
    "right-up": "left-up", "left-up": "right-up",
    "right-down": "left-down", "left-down": "right-down",
    "up": "up", "down": "down",
}


class DegenerateDirection(ValueError):
    pass


class DegeneratePalm(ValueError):
    pass


class EmptyGesture(ValueError):
    pass


@dataclass(frozen=True)
class EncoderParams:
    group_ratio: float = 0.5
    move_small: float = 0.02
    move_large: float = 0.10


@dataclass(frozen=True)
class FingerState:
    finger: str
    extended: bool


@dataclass(frozen=True)
class Orientation:
    facing: str  # toward | away | unknown
    direction: str | None

    def render(self) -> str:
        return f"{self.facing} {self.direction or 'none'}"


@dataclass(frozen=True)
class MotionDescriptor:
    direction: str | None
    magnitude: str  # stationary | small | large

    def render(self) -> str:
        if self.magnitude == "stationary":
            return "stationary"
        return f"{self.direction} {self.magnitude}"


@dataclass(frozen=True)
class PoseSummary:
    fingers: tuple[FingerState, ...]
    pointing: tuple[tuple[str, str], ...]
    groups: tuple[tuple[str, ...], ...]
    orientation: Orientation

    @property
    def extended(self) -> tuple[str, ...]:
        return tuple(fs.finger for fs in self.fingers if fs.extended)


def mirror_label(label: str) -> str:
    return _MIRROR[label]


def _dist(a: Sequence[float], b: Sequence[float]) -> float:
    return math.dist(a, b)


def direction_label(dx: float, dy: float) -> str:
    """Label a planar image-space vector (y downward) with one of eight compass sectors.

    Sectors are 45 degrees wide and half-open, [center - 22.5, center + 22.5).
    """
    if math.hypot(dx, dy) == 0.0:
        raise DegenerateDirection("zero vector has no direction")
    theta = round(math.degrees(math.atan2(-dy, dx)) % 360.0, _ANGLE_DECIMALS)
    return DIRECTIONS[int((theta + 22.5) // 45.0) % 8]


def finger_states(frame: HandFrame) -> tuple[FingerState, ...]:
    wrist = frame.point(WRIST)
    pinky_mcp = frame.point(PINKY[0])
    out = []
    for name in FINGERS:
        _, mid, tip = _JOINTS[name]
        anchor = pinky_mcp if name == "thumb" else wrist
        extended = _dist(frame.point(tip), anchor) > _dist(frame.point(mid), anchor)
        out.append(FingerState(name, extended))
    return tuple(out)


def point_direction(frame: HandFrame, finger: str) -> str:
    base, _, tip = _JOINTS[finger]
    bx, by, _ = frame.point(base)
    tx, ty, _ = frame.point(tip)
    dx, dy = tx - bx, ty - by
    if math.hypot(dx, dy) < DEGENERATE_EPS:
        raise DegenerateDirection(f"{finger} tip coincides with its MCP in the image plane")
    return direction_label(dx, dy)


def palm_width(frame: HandFrame) -> float:
    return _dist(frame.point(INDEX[0]), frame.point(PINKY[0]))


def finger_groups(
    frame: HandFrame,
    extended: Sequence[str] | None = None,
    ratio: float = EncoderParams.group_ratio,
) -> tuple[tuple[str, ...], ...]:
    """Partition extended fingers into connected components of 'tips close together'."""
    if extended is None:
        extended = [fs.finger for fs in finger_states(frame) if fs.extended]
    extended = [f for f in FINGERS if f in set(extended)]
    width = palm_width(frame)
    if width < DEGENERATE_EPS:
        raise DegeneratePalm("index and pinky MCPs coincide")
    threshold = ratio * width
    tips = {f: frame.point(_JOINTS[f][2]) for f in extended}

    parent = {f: f for f in extended}

    def find(f: str) -> str:
        while parent[f] != f:
            parent[f] = parent[parent[f]]
            f = parent[f]
        return f

    for i, a in enumerate(extended):
        for b in extended[i + 1:]:
            if _dist(tips[a], tips[b]) <= threshold:
                parent[find(b)] = find(a)

    components: dict[str, list[str]] = {}
    for f in extended:
        components.setdefault(find(f), []).append(f)
    return canonical_groups(components.values())


def canonical_groups(groups) -> tuple[tuple[str, ...], ...]:
    order = {f: i for i, f in enumerate(FINGERS)}
    members = [tuple(sorted(g, key=order.__getitem__)) for g in groups if g]
    return tuple(sorted(members, key=lambda g: order[g[0]]))


def hand_orientation(frame: HandFrame) -> Orientation:
    """Palm facing from the wrist/MCP cross product; in-plane direction wrist -> middle MCP.

    A degenerate palm reports facing "unknown" instead of raising.
    """
    wx, wy, _ = frame.point(WRIST)
    ix, iy, _ = frame.point(INDEX[0])
    px, py, _ = frame.point(PINKY[0])
    cross = (ix - wx) * (py - wy) - (iy - wy) * (px - wx)
    if palm_width(frame) < DEGENERATE_EPS or cross == 0.0:
        facing = "unknown"
    else:
        toward = cross < 0 if frame.handedness == "right" else cross > 0
        facing = "toward" if toward else "away"

    mx, my, _ = frame.point(MIDDLE[0])
    direction = None
    if math.hypot(mx - wx, my - wy) >= DEGENERATE_EPS:
        direction = direction_label(mx - wx, my - wy)
    return Orientation(facing, direction)


def trajectory(
    prev_center: Sequence[float],
    curr_center: Sequence[float],
    small: float = EncoderParams.move_small,
    large: float = EncoderParams.move_large,
) -> MotionDescriptor:
    dx = curr_center[0] - prev_center[0]
    dy = curr_center[1] - prev_center[1]
    d = math.hypot(dx, dy)
    if d < small:
        return MotionDescriptor(None, "stationary")
    return MotionDescriptor(direction_label(dx, dy), "small" if d < large else "large")


def summarize_pose(frame: HandFrame, params: EncoderParams = EncoderParams()) -> PoseSummary:
    """All per-frame features, with the documented fallbacks for degenerate geometry."""
    fingers = finger_states(frame)
    extended = [fs.finger for fs in fingers if fs.extended]
    orientation = hand_orientation(frame)

    pointing = []
    for finger in extended:
        try:
            label = point_direction(frame, finger)
        except DegenerateDirection:
            label = orientation.direction or "none"
        pointing.append((finger, label))

    try:
        groups = finger_groups(frame, extended, params.group_ratio)
    except DegeneratePalm:
        groups = canonical_groups([f] for f in extended)
    return PoseSummary(fingers, tuple(pointing), groups, orientation)


@dataclass(frozen=True)
class GestureDescription:
    handedness: str
    keyframe_summaries: tuple[PoseSummary, ...]
    trajectory: tuple[MotionDescriptor, ...]

    @property
    def rendered_text(self) -> str:
        return render_description(self)


def _render_pose(i: int, pose: PoseSummary) -> str:
    fingers = ",".join(pose.extended) or "none"
    pointing = ",".join(f"{f}:{d}" for f, d in pose.pointing) or "none"
    groups = " ".join("(" + ",".join(g) + ")" for g in pose.groups) or "none"
    return (
        f"pose[{i}]: fingers={fingers}; pointing={pointing}; "
        f"groups={groups}; orientation={pose.orientation.render()}"
    )


def render_description(desc: GestureDescription) -> str:
    lines = [f"hand: {desc.handedness}"]
    lines += [_render_pose(i, p) for i, p in enumerate(desc.keyframe_summaries)]
    lines += [f"move[{i}→{i + 1}]: {m.render()}" for i, m in enumerate(desc.trajectory)]
    return "\n".join(lines)


def encode_gesture(
    keyframes: Sequence["Keyframe"], params: EncoderParams = EncoderParams()
) -> GestureDescription:
    if not keyframes:
        raise EmptyGesture("a gesture needs at least one keyframe")
    poses = tuple(summarize_pose(kf.frame, params) for kf in keyframes)
    moves = tuple(
        trajectory(a.center, b.center, params.move_small, params.move_large)
        for a, b in zip(keyframes, keyframes[1:])
    )
    return GestureDescription(keyframes[0].frame.handedness, poses, moves)
