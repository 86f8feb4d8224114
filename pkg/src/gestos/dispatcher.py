"""End-to-end orchestration: segment, encode, reason, select, dispatch, remember."""

from __future__ import annotations

import json
import logging
import time
import uuid
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Iterable, Iterator

import httpx

from gestos.config import EngineConfig
from gestos.encoder import encode_gesture
from gestos.keyframes import Keyframe, KeyframeExtractor
from gestos.memory import MemoryRecord, StorageFailure, VectorMemory
from gestos.reasoner import (
    NoFeasibleCommand,
    Reasoner,
    ReasonerInput,
    ReasonerUnavailable,
    RobotContext,
    UninterpretableGesture,
)
from gestos.registry import Registry, RobotProfile
from gestos.stream import HandFrame

log = logging.getLogger(__name__)

STATUSES = ("executed", "robot_rejected", "no_feasible_robot", "no_feasible_command", "uninterpretable")
_MEMORY_OUTCOME = {"executed": "success", "robot_rejected": "rejected"}


@dataclass(frozen=True)
class Gesture:
    keyframes: tuple[Keyframe, ...]
    closed_at: float


@dataclass(frozen=True)
class WireAck:
    accepted: bool
    detail: str = ""


@dataclass
class DispatchOutcome:
    dispatch_id: str
    description_text: str
    intent_label: str
    robot_id: str | None
    command_id: str | None
    status: str
    latency: float  # milliseconds
    detail: str = ""
    steps: list[dict] = field(default_factory=list)

    def to_json(self) -> str:
        return json.dumps(asdict(self), ensure_ascii=False, separators=(",", ":"))


class GestureSegmenter:
    """Closes a gesture once ``idle_timeout`` seconds pass without a new keyframe."""

    def __init__(self, idle_timeout: float = 1.0) -> None:
        self.idle_timeout = idle_timeout
        self.pending: list[Keyframe] = []

    def tick(self, now: float) -> list[Gesture]:
        if self.pending and now - self.pending[-1].frame.timestamp > self.idle_timeout:
            return self.flush()
        return []

    def push(self, keyframe: Keyframe) -> list[Gesture]:
        closed = self.tick(keyframe.frame.timestamp)
        self.pending.append(keyframe)
        return closed

    def flush(self) -> list[Gesture]:
        if not self.pending:
            return []
        gesture = Gesture(tuple(self.pending), self.pending[-1].frame.timestamp + self.idle_timeout)
        self.pending = []
        return [gesture]


def segment_gestures(keyframes: Iterable[Keyframe], idle_timeout: float = 1.0) -> Iterator[Gesture]:
    segmenter = GestureSegmenter(idle_timeout)
    for kf in keyframes:
        yield from segmenter.push(kf)
    yield from segmenter.flush()


class _Channel:
    def __init__(self, config: EngineConfig) -> None:
        self.extractor = KeyframeExtractor(config.extractor)
        self.segmenter = GestureSegmenter(config.gesture_timeout)
        self.last_seen: float | None = None
        self.timeout = config.gesture_timeout
        self.emitted: Keyframe | None = None  # keyframe produced by the latest push, if any

    def tick(self, now: float) -> list[Gesture]:
        # a hand gone for a full timeout starts over: its next frame is a "first" keyframe
        if self.last_seen is not None and now - self.last_seen > self.timeout:
            self.extractor.reset()
            self.last_seen = None
        return self.segmenter.tick(now)

    def push(self, frame: HandFrame) -> list[Gesture]:
        closed = self.tick(frame.timestamp)
        if self.extractor.passes_gate(frame):
            self.last_seen = frame.timestamp
        kf = self.extractor.push(frame)
        self.emitted = kf
        if kf is not None:
            closed += self.segmenter.push(kf)
        return closed


class Engine:
    """One orchestration loop. Wire calls block so outcomes follow gesture order."""

    def __init__(
        self,
        registry: Registry,
        reasoner: Reasoner,
        memory: VectorMemory | None = None,
        config: EngineConfig | None = None,
        *,
        client: httpx.Client | None = None,
        log_path: str | Path | None = None,
        session: str | None = None,
        poll_states: bool = True,
        keyframe_sink=None,
    ) -> None:
        self.registry = registry
        self.reasoner = reasoner
        self.memory = memory
        self.config = config or EngineConfig()
        self.client = client or httpx.Client()
        self.log_path = Path(log_path) if log_path else None
        self.session = session or uuid.uuid4().hex[:8]
        self.poll_states = poll_states
        self.keyframe_sink = keyframe_sink
        self._count = 0

    def _next_id(self) -> str:
        self._count += 1
        return f"{self.session}-{self._count:06d}"

    # -- wire ---------------------------------------------------------------

    def dispatch(self, robot: RobotProfile, command_id: str, dispatch_id: str, params: dict | None = None) -> WireAck:
        url = f"{robot.endpoint.rstrip('/')}/command"
        body = {"dispatch_id": dispatch_id, "command_id": command_id, "params": params or {}}
        try:
            resp = self.client.post(url, json=body, timeout=self.config.dispatch_timeout)
            reply = resp.json()
        except (httpx.HTTPError, ValueError) as exc:
            return WireAck(False, f"network error: {exc}")
        if resp.status_code == 200 and reply.get("status") == "accepted":
            return WireAck(True, str(reply.get("detail", "")))
        return WireAck(False, str(reply.get("detail", f"HTTP {resp.status_code}")))

    # -- pipeline -----------------------------------------------------------

    def _remember(self, text: str, robot_id: str | None, command_id: str | None, status: str) -> None:
        if self.memory is None:
            return
        record = MemoryRecord(text, robot_id, command_id, time.time(), _MEMORY_OUTCOME.get(status, "failed"))
        try:
            self.memory.store(record)
        except StorageFailure as exc:
            log.error("memory write failed: %s", exc)

    def process_gesture(self, gesture: Gesture) -> DispatchOutcome:
        """Run one gesture through the pipeline. Never raises for pipeline failures."""
        start = time.perf_counter()
        dispatch_id = self._next_id()
        text = encode_gesture(gesture.keyframes, self.config.encoder).rendered_text

        def finish(status, intent="", robot=None, command=None, detail="", steps=None, remember=True):
            outcome = DispatchOutcome(
                dispatch_id, text, intent, robot, command, status,
                round((time.perf_counter() - start) * 1000.0, 3), detail, steps or [],
            )
            if remember:
                self._remember(text, robot, command, status)
            self._log(outcome)
            return outcome

        if len(self.registry) == 0:
            return finish("no_feasible_robot", detail="no robots registered")

        exemplars = self.memory.retrieve(text, self.config.memory_k) if self.memory is not None else []
        if self.poll_states:
            self.registry.poll_states(self.client, self.config.state_timeout)
        robots = tuple(RobotContext(p, self.registry.state(p.robot_id)) for p in self.registry.profiles())

        try:
            result = self.reasoner.interpret(ReasonerInput(text, robots, tuple(exemplars)))
        except (UninterpretableGesture, ReasonerUnavailable) as exc:
            return finish("uninterpretable", detail=str(exc))

        valid = self.registry.schema_valid(result.candidates)
        if not valid:
            return self._run_decomposition(text, result, robots, dispatch_id, finish)

        feasible = self.registry.feasible_robots(valid)
        if not feasible:
            return finish("no_feasible_robot", result.intent_label, detail="no available robot supports the command")
        winner = self.registry.select_robot(feasible)
        ack = self.dispatch(self.registry.profile(winner.robot_id), winner.command_id, dispatch_id)
        status = "executed" if ack.accepted else "robot_rejected"
        return finish(status, result.intent_label, winner.robot_id, winner.command_id, ack.detail)

    def _run_decomposition(self, text, result, robots, dispatch_id, finish) -> DispatchOutcome:
        try:
            plan = self.reasoner.explain_decompose(result.task_description, robots)
        except (NoFeasibleCommand, ReasonerUnavailable) as exc:
            return finish("no_feasible_command", result.intent_label, detail=str(exc))

        unavailable = sorted({r for r, _ in plan.subcommands if not self.registry.is_available(r)})
        if unavailable:
            return finish(
                "no_feasible_robot", result.intent_label,
                detail=f"decomposition needs unavailable robots: {unavailable}",
            )

        # one memory record per attempted step; abort the plan on the first rejection
        steps: list[dict] = []
        for i, (robot_id, command_id) in enumerate(plan.subcommands, 1):
            ack = self.dispatch(self.registry.profile(robot_id), command_id, f"{dispatch_id}.{i}")
            status = "executed" if ack.accepted else "robot_rejected"
            steps.append({"robot_id": robot_id, "command_id": command_id, "status": status})
            self._remember(text, robot_id, command_id, status)
            if not ack.accepted:
                return finish(status, result.intent_label, robot_id, command_id, ack.detail, steps, remember=False)
        first_robot, first_command = plan.subcommands[0]
        return finish(
            "executed", result.intent_label, first_robot, first_command,
            f"decomposed: {plan.rationale}", steps, remember=False,
        )

    def _log(self, outcome: DispatchOutcome) -> None:
        log.info("%s %s %s/%s", outcome.dispatch_id, outcome.status, outcome.robot_id, outcome.command_id)
        if self.log_path is not None:
            self.log_path.parent.mkdir(parents=True, exist_ok=True)
            with self.log_path.open("a", encoding="utf-8") as fh:
                fh.write(outcome.to_json() + "\n")

    def run(self, frames: Iterable[HandFrame]) -> Iterator[DispatchOutcome]:
        """Consume a validated frame stream; each handedness is its own channel."""
        channels: dict[str, _Channel] = {}
        for frame in frames:
            closed: list[Gesture] = []
            for hand, channel in channels.items():
                if hand != frame.handedness:
                    closed += channel.tick(frame.timestamp)
            channel = channels.setdefault(frame.handedness, _Channel(self.config))
            closed += channel.push(frame)
            if self.keyframe_sink is not None and channel.emitted is not None:
                self.keyframe_sink(channel.emitted)
            for gesture in sorted(closed, key=lambda g: g.closed_at):
                yield self.process_gesture(gesture)
        remaining = [g for channel in channels.values() for g in channel.segmenter.flush()]
        for gesture in sorted(remaining, key=lambda g: g.closed_at):
            yield self.process_gesture(gesture)
