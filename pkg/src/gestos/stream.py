"""Hand-landmark frame ingestion.

Frames arrive as line-delimited JSON, one record per line::

    {"t": 0.0, "hand": "right", "conf": 0.95, "lm": [[x, y, z], ...21 triples]}

x grows rightward and y downward in normalized image coordinates; z is
relative depth, more negative toward the camera.
"""

from __future__ import annotations

import json
import logging
import math
import socket
import sys
from dataclasses import dataclass, field
from pathlib import Path
from typing import IO, Callable, Iterable, Iterator

log = logging.getLogger(__name__)

NUM_LANDMARKS = 21
HANDEDNESS = ("left", "right")

WRIST = 0
THUMB = (1, 2, 3, 4)  # CMC, MCP, IP, TIP
INDEX = (5, 6, 7, 8)  # MCP, PIP, DIP, TIP
MIDDLE = (9, 10, 11, 12)
RING = (13, 14, 15, 16)
PINKY = (17, 18, 19, 20)


class MalformedFrame(ValueError):
    """A frame record that cannot be turned into a valid HandFrame."""


@dataclass(frozen=True)
class Landmark:
    x: float
    y: float
    z: float


@dataclass(frozen=True)
class HandFrame:
    timestamp: float
    handedness: str
    confidence: float
    landmarks: tuple[Landmark, ...]

    def __post_init__(self) -> None:
        if len(self.landmarks) != NUM_LANDMARKS:
            raise MalformedFrame(f"expected {NUM_LANDMARKS} landmarks, got {len(self.landmarks)}")
        if self.handedness not in HANDEDNESS:
            raise MalformedFrame(f"bad handedness {self.handedness!r}")
        if not 0.0 <= self.confidence <= 1.0:
            raise MalformedFrame(f"confidence {self.confidence} outside [0, 1]")

    def point(self, index: int) -> tuple[float, float, float]:
        lm = self.landmarks[index]
        return (lm.x, lm.y, lm.z)


def _number(value: object, what: str) -> float:
    # bool is an int subclass; reject it explicitly
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise MalformedFrame(f"{what} is not a number: {value!r}")
    out = float(value)
    if not math.isfinite(out):
        raise MalformedFrame(f"{what} is not finite")
    return out


def _clamp01(v: float) -> float:
    return min(1.0, max(0.0, v))


def parse_frame(line: str) -> HandFrame:
    """Parse one JSONL record. Extra keys are ignored; x/y are clamped to [0, 1]."""
    try:
        record = json.loads(line)
    except (json.JSONDecodeError, TypeError) as exc:
        raise MalformedFrame(f"invalid JSON: {exc}") from exc
    if not isinstance(record, dict):
        raise MalformedFrame("frame record must be a JSON object")
    try:
        t, hand, conf, raw = record["t"], record["hand"], record["conf"], record["lm"]
    except KeyError as exc:
        raise MalformedFrame(f"missing field {exc.args[0]!r}") from exc

    if not isinstance(raw, list) or len(raw) != NUM_LANDMARKS:
        count = len(raw) if isinstance(raw, list) else "non-list"
        raise MalformedFrame(f"landmark count {count} != {NUM_LANDMARKS}")
    landmarks = []
    for i, triple in enumerate(raw):
        if not isinstance(triple, list) or len(triple) != 3:
            raise MalformedFrame(f"landmark {i} is not an [x, y, z] triple")
        x, y, z = (_number(v, f"landmark {i}") for v in triple)
        landmarks.append(Landmark(_clamp01(x), _clamp01(y), z))

    if not isinstance(hand, str):
        raise MalformedFrame("hand must be a string")
    return HandFrame(
        timestamp=_number(t, "t"),
        handedness=hand,
        confidence=_number(conf, "conf"),
        landmarks=tuple(landmarks),
    )


def frame_to_record(frame: HandFrame) -> dict:
    return {
        "t": frame.timestamp,
        "hand": frame.handedness,
        "conf": frame.confidence,
        "lm": [[lm.x, lm.y, lm.z] for lm in frame.landmarks],
    }


def serialize_frame(frame: HandFrame) -> str:
    return json.dumps(frame_to_record(frame), separators=(",", ":"))


@dataclass
class StreamStats:
    accepted: int = 0
    malformed: int = 0
    out_of_order: int = 0
    errors: list[str] = field(default_factory=list)


def parse_lines(lines: Iterable[str], stats: StreamStats | None = None) -> Iterator[HandFrame]:
    """Parse lines into frames, skipping (and counting) malformed records."""
    stats = stats if stats is not None else StreamStats()
    for lineno, line in enumerate(lines, 1):
        if not line.strip():
            continue
        try:
            yield parse_frame(line)
        except MalformedFrame as exc:
            stats.malformed += 1
            if len(stats.errors) < 100:
                stats.errors.append(f"line {lineno}: {exc}")
            log.debug("skipping line %d: %s", lineno, exc)


def validate_sequence(
    frames: Iterable[HandFrame], stats: StreamStats | None = None
) -> Iterator[HandFrame]:
    """Drop frames whose timestamp goes backwards relative to the last accepted frame."""
    stats = stats if stats is not None else StreamStats()
    last: float | None = None
    for frame in frames:
        if last is not None and frame.timestamp < last:
            stats.out_of_order += 1
            continue
        last = frame.timestamp
        stats.accepted += 1
        yield frame


def read_frames(lines: Iterable[str], stats: StreamStats | None = None) -> Iterator[HandFrame]:
    stats = stats if stats is not None else StreamStats()
    return validate_sequence(parse_lines(lines, stats), stats)


def split_by_hand(frames: Iterable[HandFrame]) -> Iterator[tuple[str, HandFrame]]:
    """Tag each frame with its channel key. Two-hand input is two channels."""
    for frame in frames:
        yield frame.handedness, frame


def file_lines(path: str | Path) -> Iterator[str]:
    with open(path, encoding="utf-8") as fh:
        yield from fh


def stdin_lines(stream: IO[str] | None = None) -> Iterator[str]:
    yield from (stream or sys.stdin)


def parse_address(address: str) -> tuple[str, int]:
    host, _, port = address.rpartition(":")
    return (host or "127.0.0.1", int(port))


def socket_lines(address: str, *, ready: Callable[[tuple], None] | None = None) -> Iterator[str]:
    """Listen on host:port, accept one producer and yield its newline-delimited records."""
    host, port = parse_address(address)
    with socket.create_server((host, port)) as server:
        if ready is not None:
            ready(server.getsockname())
        conn, peer = server.accept()
        log.info("frame producer connected from %s:%s", *peer[:2])
        with conn, conn.makefile("r", encoding="utf-8", newline="\n") as fh:
            yield from fh
