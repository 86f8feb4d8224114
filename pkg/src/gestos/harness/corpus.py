"""Synthetic gesture corpus: one canonical gesture per evaluation command.

Each canonical gesture is a short scripted sequence of synthetic hand poses
(see :mod:`gestos.synth`). A trial renders that script as frames with a
random global translation and Gaussian landmark jitter, all drawn from a
seeded generator.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Callable, Iterator

import numpy as np

from gestos.fleet import REFERENCE_COMMANDS
from gestos.synth import FIST, OPEN, HandPose, landmarks

FPS = 30.0
SCALE = 0.2
INDEX_ONLY = (False, True, False, False, False)
THUMB_ONLY = (True, False, False, False, False)
# palm center (wrist + four MCPs) sits this far along the heading axis, in scale units
_CENTER_OFFSET = 0.76


class CorpusError(Exception):
    pass


@dataclass(frozen=True)
class CorpusEntry:
    gesture_id: str
    expected_command: str
    expected_robot: str
    frames: tuple[dict, ...] = ()
    frames_path: str | None = None

    def frame_lines(self) -> Iterator[str]:
        if self.frames_path is not None:
            try:
                with open(self.frames_path, encoding="utf-8") as fh:
                    yield from fh
            except OSError as exc:
                raise CorpusError(f"{self.gesture_id}: cannot read {self.frames_path}: {exc}") from exc
        else:
            for record in self.frames:
                yield json.dumps(record, separators=(",", ":"))

    def to_json(self) -> str:
        payload = {
            "gesture_id": self.gesture_id,
            "expected_command": self.expected_command,
            "expected_robot": self.expected_robot,
        }
        if self.frames_path is not None:
            payload["frames_path"] = self.frames_path
        else:
            payload["frames"] = list(self.frames)
        return json.dumps(payload, separators=(",", ":"))


def entry_from_json(line: str) -> CorpusEntry:
    try:
        raw = json.loads(line)
        return CorpusEntry(
            gesture_id=raw["gesture_id"],
            expected_command=raw["expected_command"],
            expected_robot=raw["expected_robot"],
            frames=tuple(raw.get("frames", ())),
            frames_path=raw.get("frames_path"),
        )
    except (json.JSONDecodeError, KeyError, TypeError) as exc:
        raise CorpusError(f"unreadable corpus entry: {exc}") from exc


def load_corpus(path: str | Path) -> list[CorpusEntry]:
    base = Path(path).parent
    entries = []
    for line in Path(path).read_text(encoding="utf-8").splitlines():
        if line.strip():
            entry = entry_from_json(line)
            if entry.frames_path is not None and not Path(entry.frames_path).is_absolute():
                entry = replace(entry, frames_path=str(base / entry.frames_path))
            entries.append(entry)
    return entries


def dump_corpus(entries: list[CorpusEntry]) -> str:
    return "".join(e.to_json() + "\n" for e in entries)


# -- canonical gestures ---------------------------------------------------------

Script = list[HandPose]


def stream_lines(entries: list[CorpusEntry], gap: float = 5.0) -> Iterator[str]:
    """All trials as one frame stream, trial i shifted by i * gap seconds."""
    for i, entry in enumerate(entries):
        for line in entry.frame_lines():
            record = json.loads(line)
            record["t"] = round(record["t"] + i * gap, 6)
            yield json.dumps(record, separators=(",", ":"))


def _centered(center: tuple[float, float], heading: float, **kw) -> HandPose:
    """A pose whose palm center lands on ``center``."""
    rad = np.radians(heading)
    ux, uy = np.cos(rad), -np.sin(rad)
    wrist = (center[0] - _CENTER_OFFSET * SCALE * ux, center[1] - _CENTER_OFFSET * SCALE * uy)
    return HandPose(wrist=(float(wrist[0]), float(wrist[1])), heading=heading, scale=SCALE, **kw)


def _hold(pose: HandPose, n: int) -> Script:
    return [pose] * n


def _path(pose: HandPose, offsets: list[tuple[float, float]]) -> Script:
    return [pose.moved(dx, dy) for dx, dy in offsets]


def _select(side: str) -> Script:
    heading = 180.0 if side == "left" else 0.0
    return _hold(_centered((0.5, 0.5), heading, extended=INDEX_ONLY), 20)


def _turn() -> Script:
    left = _centered((0.5, 0.5), 180.0, extended=INDEX_ONLY)
    right = _centered((0.5, 0.5), 0.0, extended=INDEX_ONLY)
    return _hold(left, 8) + _hold(right, 8) + _hold(left, 8) + _hold(right, 8)


def _wag() -> Script:
    pose = _centered((0.5, 0.6), 90.0, extended=INDEX_ONLY)
    step = 0.035
    xs = [0.0] * 4
    for target in (0.14, -0.14, 0.14, 0.0):
        while abs(xs[-1] - target) > 1e-9:
            xs.append(xs[-1] + step * np.sign(target - xs[-1]))
    xs += [0.0] * 3
    return _path(pose, [(x, 0.0) for x in xs])


def _gripper(first: tuple[bool, ...], last: tuple[bool, ...]) -> Script:
    a = _centered((0.5, 0.55), 90.0, extended=first)
    b = _centered((0.5, 0.55), 90.0, extended=last)
    return _hold(a, 15) + _hold(b, 15)


def _high_five() -> Script:
    return _hold(_centered((0.5, 0.55), 90.0, extended=OPEN), 20)


def _give_paw() -> Script:
    return _hold(_centered((0.6, 0.5), 180.0, extended=OPEN), 20)


def _vertical(sign: int, facing: str) -> Script:
    start_y = 0.75 if sign > 0 else 0.45
    pose = _centered((0.5, start_y), 90.0, extended=OPEN, facing=facing)
    ys = [0.0] * 5 + [-sign * 0.03 * i for i in range(1, 11)]
    ys += [ys[-1]] * 5
    return _path(pose, [(0.0, y) for y in ys])


def _beckon() -> Script:
    open_ = _centered((0.5, 0.6), 90.0, extended=OPEN)
    curl = _centered((0.5, 0.6), 90.0, extended=THUMB_ONLY)
    return _hold(open_, 8) + _hold(curl, 6) + _hold(open_, 6) + _hold(curl, 6) + _hold(open_, 8)


CANONICAL: dict[str, Callable[[], Script]] = {
    "manipulator_high_five": _high_five,
    "manipulator_select_left_item": lambda: _select("left"),
    "manipulator_select_right_item": lambda: _select("right"),
    "manipulator_turn_object_around": _turn,
    "manipulator_close_gripper": lambda: _gripper(OPEN, FIST),
    "manipulator_open_gripper": lambda: _gripper(FIST, OPEN),
    "robodog_give_paw": _give_paw,
    "robodog_stand_up": lambda: _vertical(+1, "toward"),
    "robodog_stand_down": lambda: _vertical(-1, "away"),
    "robodog_come_closer": _beckon,
    "robodog_wagging_tail": _wag,
}


def _script_points(script: Script) -> np.ndarray:
    return np.array([landmarks(p) for p in script])  # (frames, 21, 3)


def _translation_range(points: np.ndarray, limit: float, margin: float) -> tuple[tuple[float, float], tuple[float, float]]:
    lo = points[..., :2].min(axis=(0, 1))
    hi = points[..., :2].max(axis=(0, 1))
    ranges = []
    for axis in range(2):
        a = max(-limit, margin - lo[axis])
        b = min(limit, 1.0 - margin - hi[axis])
        if a > b:
            raise CorpusError("canonical gesture does not fit inside the image")
        ranges.append((float(a), float(b)))
    return ranges[0], ranges[1]


def render_trial(
    script: Script,
    rng: np.random.Generator,
    jitter_sigma: float,
    *,
    max_shift: float = 0.05,
    margin: float = 0.03,
) -> list[dict]:
    points = _script_points(script)
    (x0, x1), (y0, y1) = _translation_range(points, max_shift, margin)
    shift = np.array([rng.uniform(x0, x1), rng.uniform(y0, y1), 0.0])
    conf = rng.uniform(0.85, 0.99, size=len(script))
    noise = rng.normal(0.0, jitter_sigma, size=points.shape) if jitter_sigma > 0 else 0.0
    pts = points + shift + noise
    frames = []
    for i, pose in enumerate(script):
        frames.append({
            "t": round(i / FPS, 6),
            "hand": pose.handedness,
            "conf": round(float(conf[i]), 4),
            "lm": [[float(x), float(y), float(z)] for x, y, z in pts[i]],
        })
    return frames


def generate_corpus(seed: int = 1, trials_per_command: int = 20, jitter_sigma: float = 0.01) -> list[CorpusEntry]:
    if trials_per_command < 1:
        raise ValueError("trials_per_command must be >= 1")
    rng = np.random.default_rng(seed)
    entries = []
    for command, robot in REFERENCE_COMMANDS:
        script = CANONICAL[command]()
        for trial in range(trials_per_command):
            frames = render_trial(script, rng, jitter_sigma)
            entries.append(CorpusEntry(f"{command}-{trial:03d}", command, robot, tuple(frames)))
    return entries
