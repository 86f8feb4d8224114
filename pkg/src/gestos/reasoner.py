"""Intent reasoning: gesture description + fleet context -> ranked robot commands.

Two interchangeable implementations share the :class:`Reasoner` protocol:
:class:`RuleReasoner` applies a fixed table of feature rules to the canonical
description text (see docs/rule-table.md), and :class:`LLMReasoner` asks an
external chat-completions endpoint and validates its JSON reply.
"""

from __future__ import annotations

import json
import logging
import os
import re
from dataclasses import dataclass, field
from typing import Callable, Protocol, Sequence

import httpx

from gestos.memory import MemoryRecord
from gestos.registry import Candidate, LiveState, RobotProfile

log = logging.getLogger(__name__)

API_KEY_ENV = "GESTOS_LLM_API_KEY"


class ReasonerError(Exception):
    pass


class ReasonerUnavailable(ReasonerError):
    pass


class UninterpretableGesture(ReasonerError):
    pass


class MalformedReasonerOutput(ReasonerError, ValueError):
    pass


class NoFeasibleCommand(ReasonerError):
    pass


@dataclass(frozen=True)
class RobotContext:
    profile: RobotProfile
    state: LiveState = LiveState()


@dataclass(frozen=True)
class ReasonerInput:
    description: str
    robots: tuple[RobotContext, ...] = ()
    exemplars: tuple[MemoryRecord, ...] = ()  # most similar first


@dataclass(frozen=True)
class IntentResult:
    intent_label: str
    task_description: str
    candidates: tuple[Candidate, ...]


@dataclass(frozen=True)
class Decomposition:
    subcommands: tuple[tuple[str, str], ...]  # (robot_id, command_id)
    rationale: str = ""


class Reasoner(Protocol):
    def interpret(self, request: ReasonerInput) -> IntentResult: ...

    def explain_decompose(self, task_description: str, robots: Sequence[RobotContext]) -> Decomposition: ...


# -- prompt -----------------------------------------------------------------

_OUTPUT_SHAPE = (
    '{"intent": "<short phrase>", "task": "<one sentence>", '
    '"candidates": [{"robot": "<robot id>", "command": "<command id>", "confidence": <number 0..1>}]}'
)


def _robot_block(ctx: RobotContext) -> list[str]:
    p, s = ctx.profile, ctx.state
    lines = [f"robot {p.robot_id} (status={s.status}, load={s.load:.2f})"]
    if p.description:
        lines.append(f"  description: {p.description}")
    lines.append("  commands:")
    lines += [f"    - {c.command_id}: {c.description}" for c in p.commands]
    return lines


def build_prompt(request: ReasonerInput) -> str:
    sections = [
        "[system]\n"
        "You are the intent reasoner of a gesture-controlled robot fleet. Read the hand "
        "gesture description, decide what the operator wants done, and choose the robot "
        "command that does it.\n"
        "Reply with exactly one JSON object and no other text, shaped like:\n"
        f"{_OUTPUT_SHAPE}\n"
        "Order candidates best first. Use only robot and command ids listed under [robots]."
    ]
    if request.exemplars:
        lines = ["[examples]"]
        for i, ex in enumerate(request.exemplars, 1):
            lines.append(f"example {i}:")
            lines.append(ex.description_text)
            lines.append(f"=> robot={ex.robot_id} command={ex.command_id}")
        sections.append("\n".join(lines))
    robot_lines = ["[robots]"]
    for ctx in sorted(request.robots, key=lambda c: c.profile.robot_id):
        robot_lines += _robot_block(ctx)
    if not request.robots:
        robot_lines.append("(no robots registered)")
    sections.append("\n".join(robot_lines))
    sections.append("[gesture]\n" + request.description)
    sections.append("[answer]\nEmit the single JSON object now.")
    return "\n\n".join(sections) + "\n"


# -- reply parsing ------------------------------------------------------------

def _first_object(text: str) -> dict:
    decoder = json.JSONDecoder()
    for match in re.finditer(r"\{", text):
        try:
            obj, _ = decoder.raw_decode(text, match.start())
        except json.JSONDecodeError:
            continue
        if isinstance(obj, dict):
            return obj
    raise MalformedReasonerOutput("no JSON object found in reply")


def _clamp01(v: float) -> float:
    return min(1.0, max(0.0, v))


def parse_reasoner_output(text: str) -> IntentResult:
    obj = _first_object(text)
    try:
        intent, task, raw = obj["intent"], obj["task"], obj["candidates"]
    except KeyError as exc:
        raise MalformedReasonerOutput(f"missing field {exc.args[0]!r}") from exc
    if not isinstance(raw, list) or not raw:
        raise MalformedReasonerOutput("candidates must be a non-empty list")
    candidates = []
    for item in raw:
        try:
            conf = item["confidence"]
            if isinstance(conf, bool) or not isinstance(conf, (int, float)):
                raise TypeError("confidence must be a number")
            candidates.append(Candidate(str(item["robot"]), str(item["command"]), _clamp01(float(conf))))
        except (KeyError, TypeError) as exc:
            raise MalformedReasonerOutput(f"bad candidate {item!r}: {exc}") from exc
    return IntentResult(str(intent), str(task), tuple(candidates))


def serialize_intent(result: IntentResult) -> str:
    return json.dumps(
        {
            "intent": result.intent_label,
            "task": result.task_description,
            "candidates": [
                {"robot": c.robot_id, "command": c.command_id, "confidence": c.confidence}
                for c in result.candidates
            ],
        },
        separators=(",", ":"),
    )


def validate_decomposition(
    pairs: Sequence[tuple[str, str]], robots: Sequence[RobotContext], rationale: str = ""
) -> Decomposition:
    """Drop subcommands the named robot does not support; empty means NoFeasibleCommand."""
    schemas = {ctx.profile.robot_id: set(ctx.profile.command_ids) for ctx in robots}
    kept = tuple((r, c) for r, c in pairs if c in schemas.get(r, ()))
    if not kept:
        raise NoFeasibleCommand("no supported command achieves the task")
    return Decomposition(kept, rationale)


# -- description parsing (rule reasoner input) --------------------------------

@dataclass(frozen=True)
class ParsedPose:
    extended: tuple[str, ...]
    pointing: dict[str, str]
    facing: str
    direction: str


@dataclass(frozen=True)
class ParsedGesture:
    hand: str
    poses: tuple[ParsedPose, ...]
    moves: tuple[tuple[str | None, str], ...]


_POSE = re.compile(
    r"pose\[\d+\]: fingers=(?P<fingers>\S+); pointing=(?P<pointing>\S+); "
    r"groups=(?P<groups>.+); orientation=(?P<facing>\S+) (?P<direction>\S+)$"
)
_MOVE = re.compile(r"move\[\d+→\d+\]: (?:(?P<stationary>stationary)|(?P<dir>\S+) (?P<mag>small|large))$")


def parse_description(text: str) -> ParsedGesture:
    hand = ""
    poses, moves = [], []
    for line in text.splitlines():
        line = line.strip()
        if line.startswith("hand:"):
            hand = line.split(":", 1)[1].strip()
        elif m := _POSE.match(line):
            fingers = () if m["fingers"] == "none" else tuple(m["fingers"].split(","))
            pointing = {}
            if m["pointing"] != "none":
                pointing = dict(item.split(":", 1) for item in m["pointing"].split(","))
            poses.append(ParsedPose(fingers, pointing, m["facing"], m["direction"]))
        elif m := _MOVE.match(line):
            moves.append((None, "stationary") if m["stationary"] else (m["dir"], m["mag"]))
    return ParsedGesture(hand, tuple(poses), tuple(moves))


# -- rule table -----------------------------------------------------------------

_WEIGHT = {"stationary": 0, "small": 1, "large": 2}


def _horizontal(label: str | None) -> int:
    if label is None:
        return 0
    return 1 if label.startswith("right") else -1 if label.startswith("left") else 0


def _vertical(label: str | None) -> int:
    if label is None:
        return 0
    return 1 if label.endswith("up") else -1 if label.endswith("down") else 0


def _reversals(signs: Sequence[int]) -> int:
    signs = [s for s in signs if s]
    return sum(1 for a, b in zip(signs, signs[1:]) if a != b)


@dataclass(frozen=True)
class Features:
    counts: tuple[int, ...]
    index_only: bool
    open_all: bool
    index_pointing: tuple[str, ...]
    facings: frozenset[str]
    directions: frozenset[str]
    vertical: int
    horizontal: int
    any_large: bool
    move_reversals: int

    @property
    def static(self) -> bool:
        return not self.any_large and abs(self.vertical) <= 1 and abs(self.horizontal) <= 1


def features(g: ParsedGesture) -> Features:
    moving = [(d, _WEIGHT[mag]) for d, mag in g.moves if mag != "stationary"]
    return Features(
        counts=tuple(len(p.extended) for p in g.poses),
        index_only=bool(g.poses) and all(p.extended == ("index",) for p in g.poses),
        open_all=bool(g.poses) and all(len(p.extended) == 5 for p in g.poses),
        index_pointing=tuple(p.pointing.get("index", "none") for p in g.poses),
        facings=frozenset(p.facing for p in g.poses),
        directions=frozenset(p.direction for p in g.poses),
        vertical=sum(w * _vertical(d) for d, w in moving),
        horizontal=sum(w * _horizontal(d) for d, w in moving),
        any_large=any(w == 2 for _, w in moving),
        move_reversals=_reversals([_horizontal(d) for d, _ in moving]),
    )


def _points(side: str) -> Callable[[Features], bool]:
    return lambda f: f.index_only and set(f.index_pointing) == {side} and f.static


def _turn(f: Features) -> bool:
    return f.index_only and f.static and _reversals([_horizontal(d) for d in f.index_pointing]) >= 2


def _wag(f: Features) -> bool:
    return f.index_only and f.move_reversals >= 2


def _curl_cycle(f: Features) -> bool:
    if len(f.counts) < 3 or f.counts[0] != 5 or f.counts[-1] != 5:
        return False
    phases = []
    for n in f.counts:
        phase = "open" if n == 5 else "partial" if n > 0 else "closed"
        if not phases or phases[-1] != phase:
            phases.append(phase)
    return "closed" not in phases and phases.count("partial") >= 1


def _moving(sign: int) -> Callable[[Features], bool]:
    def rule(f: Features) -> bool:
        v = sign * f.vertical
        return v >= 2 and v > abs(f.horizontal)
    return rule


@dataclass(frozen=True)
class Rule:
    command_id: str
    intent: str
    task: str
    test: Callable[[Features], bool] = field(repr=False)


RULES: tuple[Rule, ...] = (
    Rule("manipulator_select_left_item", "select left item",
         "Select the item positioned to the left.", _points("left")),
    Rule("manipulator_select_right_item", "select right item",
         "Select the item positioned to the right.", _points("right")),
    Rule("manipulator_turn_object_around", "turn object around",
         "Rotate the object to show all sides.", _turn),
    Rule("manipulator_close_gripper", "grasp object",
         "Grasp the object.", lambda f: len(f.counts) >= 2 and f.counts[0] == 5 and f.counts[-1] == 0),
    Rule("manipulator_open_gripper", "release object",
         "Release the object.", lambda f: len(f.counts) >= 2 and f.counts[0] == 0 and f.counts[-1] == 5),
    Rule("manipulator_high_five", "high five",
         "Give a high five to the user.",
         lambda f: f.open_all and f.static and f.facings == {"toward"} and f.directions == {"up"}),
    Rule("robodog_give_paw", "give paw",
         "Lift a front leg to shake paws with the user.",
         lambda f: f.open_all and f.static and bool(f.directions) and f.directions <= {"left", "right"}),
    Rule("robodog_stand_up", "stand up",
         "Rise to a standing posture.", lambda f: f.open_all and _moving(1)(f)),
    Rule("robodog_stand_down", "stand down",
         "Sit or lie down.", lambda f: f.open_all and f.facings == {"away"} and _moving(-1)(f)),
    Rule("robodog_come_closer", "come closer",
         "Approach the user.", _curl_cycle),
    Rule("robodog_wagging_tail", "wag tail",
         "Wag the tail.", _wag),
)


def fired_rules(description: str) -> list[Rule]:
    return [rule for rule in RULES if rule.test(features(parse_description(description)))]


# -- rule-mode explainer fallbacks ------------------------------------------------

FALLBACKS: tuple[tuple[re.Pattern, tuple[str, ...]], ...] = (
    (re.compile(r"all sides.*\bhold|\bhold.*all sides"),
     ("manipulator_close_gripper", "manipulator_turn_object_around")),
    (re.compile(r"\binspect"),
     ("manipulator_close_gripper", "manipulator_turn_object_around", "manipulator_open_gripper")),
    (re.compile(r"\b(grasp|grab|pick up|hold)"), ("manipulator_close_gripper",)),
    (re.compile(r"\b(release|drop|let go)"), ("manipulator_open_gripper",)),
    (re.compile(r"\b(sit|lie down)"), ("robodog_stand_down",)),
    (re.compile(r"\b(greet|hello|wave)"), ("manipulator_high_five",)),
)


class RuleReasoner:
    """Deterministic reasoner driven by :data:`RULES`."""

    def interpret(self, request: ReasonerInput) -> IntentResult:
        fired = fired_rules(request.description)
        if not fired:
            raise UninterpretableGesture("no rule matches the gesture description")
        confidence = 1.0 if len(fired) == 1 else 0.5
        robots = sorted(request.robots, key=lambda c: c.profile.robot_id)
        candidates = []
        for rule in fired:
            owners = [c.profile.robot_id for c in robots if rule.command_id in c.profile.command_ids]
            # an unowned command still yields a candidate; feasibility filtering drops it
            for robot_id in owners or [""]:
                candidates.append(Candidate(robot_id, rule.command_id, confidence))
        head = fired[0]
        return IntentResult(head.intent, head.task, tuple(candidates))

    def explain_decompose(self, task_description: str, robots: Sequence[RobotContext]) -> Decomposition:
        task = task_description.lower()
        for pattern, commands in FALLBACKS:
            if pattern.search(task):
                pairs = []
                for command in commands:
                    owner = next(
                        (c.profile.robot_id for c in sorted(robots, key=lambda c: c.profile.robot_id)
                         if command in c.profile.command_ids),
                        "",
                    )
                    pairs.append((owner, command))
                return validate_decomposition(pairs, robots, f"fallback table: {pattern.pattern}")
        raise NoFeasibleCommand(f"no fallback for task {task_description!r}")


# -- external LLM -----------------------------------------------------------------

FORMAT_REMINDER = (
    "Your previous reply could not be parsed ({error}). Reply again with exactly one JSON "
    "object of the requested shape and nothing else."
)

_DECOMPOSE_SHAPE = (
    '{"subcommands": [{"robot": "<robot id>", "command": "<command id>"}], "rationale": "<text>"}'
)


@dataclass
class LLMConfig:
    url: str = "http://127.0.0.1:8000/v1/chat/completions"
    model: str = "gpt-4o"
    timeout: float = 30.0
    retries: int = 2
    extra: dict = field(default_factory=dict)  # passed through, e.g. temperature


class LLMReasoner:
    """Chat-completions client. The reply must be a single strict-JSON object."""

    def __init__(self, config: LLMConfig | None = None, client: httpx.Client | None = None) -> None:
        self.config = config or LLMConfig()
        self.client = client or httpx.Client()

    def _headers(self) -> dict[str, str]:
        key = os.environ.get(API_KEY_ENV)
        return {"Authorization": f"Bearer {key}"} if key else {}

    def _complete(self, messages: list[dict]) -> str:
        body = {"model": self.config.model, "messages": messages, **self.config.extra}
        try:
            resp = self.client.post(
                self.config.url, json=body, headers=self._headers(), timeout=self.config.timeout
            )
            resp.raise_for_status()
            payload = resp.json()
        except (httpx.HTTPError, ValueError) as exc:
            raise ReasonerUnavailable(f"LLM endpoint failed: {exc}") from exc
        try:
            return payload["choices"][0]["message"]["content"]
        except (KeyError, IndexError, TypeError) as exc:
            raise ReasonerUnavailable(f"unexpected completion payload: {exc}") from exc

    def _ask(self, prompt: str, parse: Callable[[str], object]):
        messages = [{"role": "user", "content": prompt}]
        error: Exception | None = None
        for _ in range(self.config.retries + 1):
            reply = self._complete(messages)
            try:
                return parse(reply)
            except MalformedReasonerOutput as exc:
                error = exc
                log.info("malformed reasoner reply: %s", exc)
                messages = messages + [
                    {"role": "assistant", "content": reply},
                    {"role": "user", "content": FORMAT_REMINDER.format(error=exc)},
                ]
        raise UninterpretableGesture(f"reasoner output malformed after retries: {error}")

    def interpret(self, request: ReasonerInput) -> IntentResult:
        return self._ask(build_prompt(request), parse_reasoner_output)

    def explain_decompose(self, task_description: str, robots: Sequence[RobotContext]) -> Decomposition:
        lines = [
            "[system]",
            "The task below has no direct command on any robot. Break it into an ordered "
            "list of supported commands that achieves it, or return an empty list.",
            "Reply with exactly one JSON object and no other text, shaped like:",
            _DECOMPOSE_SHAPE,
            "",
            "[robots]",
        ]
        for ctx in sorted(robots, key=lambda c: c.profile.robot_id):
            lines += _robot_block(ctx)
        lines += ["", "[task]", task_description, ""]

        def parse(text: str) -> tuple[list[tuple[str, str]], str]:
            obj = _first_object(text)
            subs = obj.get("subcommands")
            if not isinstance(subs, list):
                raise MalformedReasonerOutput("subcommands must be a list")
            try:
                pairs = [(str(s["robot"]), str(s["command"])) for s in subs]
            except (KeyError, TypeError) as exc:
                raise MalformedReasonerOutput(f"bad subcommand: {exc}") from exc
            return pairs, str(obj.get("rationale", ""))

        try:
            pairs, rationale = self._ask("\n".join(lines), parse)
        except UninterpretableGesture as exc:
            raise NoFeasibleCommand(str(exc)) from exc
        return validate_decomposition(pairs, robots, rationale)
