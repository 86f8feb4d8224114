"""Robot metadata: static profiles, command schemas and live state, plus selection."""

from __future__ import annotations

import json
import logging
import threading
import time
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Callable, Iterable, Sequence

import httpx

log = logging.getLogger(__name__)

PARAM_TYPES = ("string", "number", "boolean", "enum")
STATUSES = ("operational", "busy", "fault", "offline")
DEFAULT_WEIGHTS = (0.6, 0.3, 0.1)  # match, availability, context
FRESHNESS_WINDOW = 5.0
# totals are compared at this precision so float noise never decides a tie
SCORE_DECIMALS = 12


class RegistryError(Exception):
    pass


class DuplicateRobotId(RegistryError):
    pass


class InvalidProfile(RegistryError):
    pass


class UnknownRobot(RegistryError, KeyError):
    pass


class NoFeasibleRobot(RegistryError):
    pass


@dataclass(frozen=True)
class ParamSpec:
    name: str
    type: str
    required: bool = False
    values: tuple[str, ...] = ()


@dataclass(frozen=True)
class CommandSchema:
    command_id: str
    description: str
    params: tuple[ParamSpec, ...] = ()


@dataclass(frozen=True)
class RobotProfile:
    robot_id: str
    description: str
    commands: tuple[CommandSchema, ...]
    endpoint: str = ""
    capacity: int = 1

    @property
    def command_ids(self) -> tuple[str, ...]:
        return tuple(c.command_id for c in self.commands)

    def command(self, command_id: str) -> CommandSchema | None:
        for c in self.commands:
            if c.command_id == command_id:
                return c
        return None


@dataclass(frozen=True)
class LiveState:
    status: str = "offline"
    load: float = 0.0
    detail: str = ""
    last_updated: float = 0.0


@dataclass(frozen=True)
class Candidate:
    robot_id: str
    command_id: str
    confidence: float


@dataclass(frozen=True)
class RankedCandidate:
    """A candidate that kept its position in the reasoner's original preference list."""

    robot_id: str
    command_id: str
    confidence: float
    rank: int
    pool_size: int


@dataclass(frozen=True)
class SelectionScore:
    robot_id: str
    command_id: str
    match_confidence: float
    availability: float
    context: float
    total: float


def validate_profile(profile: RobotProfile) -> None:
    if not profile.robot_id:
        raise InvalidProfile("robot_id must be non-empty")
    if not profile.commands:
        raise InvalidProfile(f"{profile.robot_id}: at least one command required")
    if not isinstance(profile.capacity, int) or profile.capacity < 1:
        raise InvalidProfile(f"{profile.robot_id}: capacity must be a positive integer")
    ids = [c.command_id for c in profile.commands]
    if len(set(ids)) != len(ids):
        raise InvalidProfile(f"{profile.robot_id}: duplicate command ids")
    for c in profile.commands:
        if not c.command_id:
            raise InvalidProfile(f"{profile.robot_id}: empty command id")
        names = [p.name for p in c.params]
        if len(set(names)) != len(names):
            raise InvalidProfile(f"{profile.robot_id}/{c.command_id}: duplicate param names")
        for p in c.params:
            if p.type not in PARAM_TYPES:
                raise InvalidProfile(f"{c.command_id}.{p.name}: unknown type {p.type!r}")


def validate_state(state: LiveState) -> None:
    if state.status not in STATUSES:
        raise ValueError(f"unknown status {state.status!r}")
    if not 0.0 <= state.load <= 1.0:
        raise ValueError(f"load {state.load} outside [0, 1]")


class Registry:
    """Thread-safe robot registry.

    Writes swap in fresh dictionaries under a lock, so a reader holding the
    old reference always sees a complete snapshot.
    """

    def __init__(
        self,
        *,
        weights: Sequence[float] = DEFAULT_WEIGHTS,
        freshness_window: float = FRESHNESS_WINDOW,
        clock: Callable[[], float] = time.time,
    ) -> None:
        if len(weights) != 3 or min(weights) < 0 or sum(weights) <= 0:
            raise ValueError("weights must be three non-negative numbers with a positive sum")
        self.weights = tuple(float(w) for w in weights)
        self.freshness_window = freshness_window
        self.clock = clock
        self._write_lock = threading.Lock()
        self._profiles: dict[str, RobotProfile] = {}
        self._states: dict[str, LiveState] = {}

    def __len__(self) -> int:
        return len(self._profiles)

    def __contains__(self, robot_id: str) -> bool:
        return robot_id in self._profiles

    def register_robot(self, profile: RobotProfile) -> RobotProfile:
        validate_profile(profile)
        with self._write_lock:
            if profile.robot_id in self._profiles:
                raise DuplicateRobotId(profile.robot_id)
            self._profiles = {**self._profiles, profile.robot_id: profile}
            self._states = {**self._states, profile.robot_id: LiveState()}
        return profile

    def update_state(self, robot_id: str, state: LiveState) -> LiveState:
        validate_state(state)
        stamped = replace(state, last_updated=self.clock())
        with self._write_lock:
            if robot_id not in self._profiles:
                raise UnknownRobot(robot_id)
            self._states = {**self._states, robot_id: stamped}
        return stamped

    def profiles(self) -> list[RobotProfile]:
        return sorted(self._profiles.values(), key=lambda p: p.robot_id)

    def profile(self, robot_id: str) -> RobotProfile:
        try:
            return self._profiles[robot_id]
        except KeyError:
            raise UnknownRobot(robot_id) from None

    def state(self, robot_id: str) -> LiveState:
        """Current state, demoted to offline once it is older than the freshness window."""
        try:
            state = self._states[robot_id]
        except KeyError:
            raise UnknownRobot(robot_id) from None
        if state.status != "offline" and self.clock() - state.last_updated > self.freshness_window:
            return replace(state, status="offline", detail="stale state")
        return state

    def is_available(self, robot_id: str) -> bool:
        state = self.state(robot_id)
        return state.status == "operational" and state.load < 1.0

    def supports(self, robot_id: str, command_id: str) -> bool:
        profile = self._profiles.get(robot_id)
        return profile is not None and profile.command(command_id) is not None

    def schema_valid(self, candidates: Iterable[Candidate]) -> list[RankedCandidate]:
        candidates = list(candidates)
        return [
            RankedCandidate(c.robot_id, c.command_id, c.confidence, rank, len(candidates))
            for rank, c in enumerate(candidates)
            if self.supports(c.robot_id, c.command_id)
        ]

    def feasible_robots(self, candidates: Iterable[Candidate | RankedCandidate]) -> list[RankedCandidate]:
        """Keep candidates whose robot is registered, knows the command and is available.

        Plain candidates are ranked by their position in the input; ranked ones keep theirs.
        """
        candidates = list(candidates)
        ranked = [
            c if isinstance(c, RankedCandidate)
            else RankedCandidate(c.robot_id, c.command_id, c.confidence, i, len(candidates))
            for i, c in enumerate(candidates)
        ]
        return [
            c for c in ranked
            if self.supports(c.robot_id, c.command_id) and self.is_available(c.robot_id)
        ]

    def score(self, candidate: RankedCandidate) -> SelectionScore:
        w_match, w_avail, w_ctx = self.weights
        norm = w_match + w_avail + w_ctx
        match = min(1.0, max(0.0, candidate.confidence))
        availability = 1.0 - self.state(candidate.robot_id).load
        context = 1.0 - candidate.rank / candidate.pool_size if candidate.pool_size else 0.0
        total = (w_match * match + w_avail * availability + w_ctx * context) / norm
        return SelectionScore(candidate.robot_id, candidate.command_id, match, availability, context, total)

    def select_robot(self, feasible: Sequence[RankedCandidate]) -> SelectionScore:
        """Highest weighted total wins; ties go to the smallest robot id, then command id."""
        if not feasible:
            raise NoFeasibleRobot("no feasible candidate")
        scores = [self.score(c) for c in feasible]
        return min(scores, key=lambda s: (-round(s.total, SCORE_DECIMALS), s.robot_id, s.command_id))

    def poll_states(self, client: httpx.Client, timeout: float = 2.0) -> dict[str, LiveState]:
        """GET {endpoint}/state for every robot; unreachable robots go offline."""
        out = {}
        for profile in self.profiles():
            state = fetch_state(profile, client, timeout)
            out[profile.robot_id] = self.update_state(profile.robot_id, state)
        return out


def fetch_state(profile: RobotProfile, client: httpx.Client, timeout: float = 2.0) -> LiveState:
    if not profile.endpoint:
        return LiveState("offline", 0.0, "no endpoint")
    try:
        resp = client.get(f"{profile.endpoint.rstrip('/')}/state", timeout=timeout)
        resp.raise_for_status()
        body = resp.json()
        state = LiveState(
            status=str(body["status"]),
            load=float(body.get("load", 0.0)),
            detail=str(body.get("detail", "")),
        )
        validate_state(state)
        return state
    except (httpx.HTTPError, ValueError, KeyError, TypeError) as exc:
        log.warning("state poll failed for %s: %s", profile.robot_id, exc)
        return LiveState("offline", 0.0, f"state poll failed: {exc}")


# -- config files ---------------------------------------------------------

def profile_from_dict(raw: dict) -> RobotProfile:
    try:
        commands = tuple(
            CommandSchema(
                command_id=c["id"],
                description=c.get("description", ""),
                params=tuple(
                    ParamSpec(p["name"], p["type"], bool(p.get("required", False)), tuple(p.get("values", ())))
                    for p in c.get("params", [])
                ),
            )
            for c in raw["commands"]
        )
        profile = RobotProfile(
            robot_id=raw["id"],
            description=raw.get("description", ""),
            commands=commands,
            endpoint=raw.get("endpoint", ""),
            capacity=raw.get("capacity", 1),
        )
    except (KeyError, TypeError) as exc:
        raise InvalidProfile(f"bad robot entry: {exc}") from exc
    validate_profile(profile)
    return profile


def profile_to_dict(profile: RobotProfile) -> dict:
    def param(p: ParamSpec) -> dict:
        out = {"name": p.name, "type": p.type, "required": p.required}
        if p.values:
            out["values"] = list(p.values)
        return out

    return {
        "id": profile.robot_id,
        "description": profile.description,
        "capacity": profile.capacity,
        "endpoint": profile.endpoint,
        "commands": [
            {"id": c.command_id, "description": c.description, "params": [param(p) for p in c.params]}
            for c in profile.commands
        ],
    }


def parse_registry_config(text: str) -> list[RobotProfile]:
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise InvalidProfile(f"registry config is not JSON: {exc}") from exc
    if not isinstance(doc, dict) or not isinstance(doc.get("robots"), list):
        raise InvalidProfile('registry config needs a top-level "robots" list')
    return [profile_from_dict(r) for r in doc["robots"]]


def serialize_registry_config(profiles: Iterable[RobotProfile]) -> str:
    return json.dumps({"robots": [profile_to_dict(p) for p in profiles]}, indent=2) + "\n"


def load_registry(path: str | Path, **kwargs) -> Registry:
    registry = Registry(**kwargs)
    for profile in parse_registry_config(Path(path).read_text(encoding="utf-8")):
        registry.register_robot(profile)
    return registry
