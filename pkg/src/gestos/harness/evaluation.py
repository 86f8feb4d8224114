"""Replay a corpus through the full pipeline and score command recognition accuracy."""

from __future__ import annotations

import json
from contextlib import ExitStack
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import httpx

from gestos.config import EngineConfig
from gestos.dispatcher import DispatchOutcome, Engine
from gestos.fleet import REFERENCE_COMMANDS, reference_fleet
from gestos.harness.corpus import CorpusEntry
from gestos.harness.simrobot import Scenario, SimulatedRobot
from gestos.memory import VectorMemory
from gestos.reasoner import Reasoner, RuleReasoner
from gestos.registry import Registry, RobotProfile
from gestos.stream import StreamStats, read_frames

HEADER = ("Command", "Robot", "Accuracy (%)")


@dataclass
class RowStats:
    trials: int = 0
    correct: int = 0

    @property
    def accuracy(self) -> float:
        return 100.0 * self.correct / self.trials if self.trials else 0.0


@dataclass
class AccuracyReport:
    rows: dict[tuple[str, str], RowStats] = field(default_factory=dict)
    # expected command -> executed command (or failure status) -> count
    confusion: dict[str, dict[str, int]] = field(default_factory=dict)

    def add(self, command: str, robot: str, correct: bool, observed: str | None = None) -> None:
        row = self.rows.setdefault((command, robot), RowStats())
        row.trials += 1
        row.correct += int(correct)
        if observed is not None:
            cell = self.confusion.setdefault(command, {})
            cell[observed] = cell.get(observed, 0) + 1

    @property
    def total(self) -> RowStats:
        return RowStats(sum(r.trials for r in self.rows.values()), sum(r.correct for r in self.rows.values()))

    def ordered_keys(self) -> list[tuple[str, str]]:
        known = [key for key in REFERENCE_COMMANDS if key in self.rows]
        extra = sorted(key for key in self.rows if key not in REFERENCE_COMMANDS)
        return known + extra

    def to_dict(self) -> dict:
        return {
            "rows": [
                {"command": c, "robot": r, "trials": s.trials, "correct": s.correct,
                 "accuracy": round(s.accuracy, 2)}
                for (c, r), s in ((k, self.rows[k]) for k in self.ordered_keys())
            ],
            "total": {"trials": self.total.trials, "correct": self.total.correct,
                      "accuracy": round(self.total.accuracy, 2)},
            "confusion": {k: dict(sorted(v.items())) for k, v in sorted(self.confusion.items())},
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2) + "\n"

    @classmethod
    def from_accuracies(cls, values: dict[tuple[str, str], float], trials: int = 100) -> "AccuracyReport":
        report = cls()
        for (command, robot), pct in values.items():
            report.rows[(command, robot)] = RowStats(trials, round(pct * trials / 100))
        return report


def format_percent(value: float) -> str:
    """Two decimals, trailing zeros dropped: 98 -> "98", 66.666 -> "66.67"."""
    return f"{value:.2f}".rstrip("0").rstrip(".")


def _table(header: Sequence[str], rows: list[Sequence[str]]) -> str:
    widths = [max(len(str(x)) for x in col) for col in zip(header, *rows)]
    line = lambda cells: " | ".join(str(c).ljust(w) for c, w in zip(cells, widths)).rstrip()
    out = [line(header), "-+-".join("-" * w for w in widths)]
    out += [line(r) for r in rows]
    return "\n".join(out) + "\n"


def render_table(report: AccuracyReport) -> str:
    """Command | Robot | Accuracy (%), evaluation commands first in their fixed order."""
    rows = [
        (command, robot.upper(), format_percent(report.rows[(command, robot)].accuracy))
        for command, robot in report.ordered_keys()
    ]
    return _table(HEADER, rows)


def render_counts(report: AccuracyReport) -> str:
    rows = [
        (c, r.upper(), str(s.correct), str(s.trials))
        for (c, r), s in ((k, report.rows[k]) for k in report.ordered_keys())
    ]
    t = report.total
    rows.append(("overall", "", str(t.correct), str(t.trials)))
    return _table(("Command", "Robot", "Correct", "Trials"), rows)


def render_confusion(report: AccuracyReport) -> str:
    rows = []
    for expected in sorted(report.confusion):
        for observed, n in sorted(report.confusion[expected].items()):
            rows.append((expected, observed, str(n)))
    return _table(("Expected", "Observed", "Count"), rows)


@dataclass
class Trial:
    entry: CorpusEntry
    outcomes: list[DispatchOutcome]

    @property
    def outcome(self) -> DispatchOutcome | None:
        return self.outcomes[0] if self.outcomes else None

    @property
    def correct(self) -> bool:
        o = self.outcome
        return (
            o is not None
            and o.status == "executed"
            and (o.robot_id, o.command_id) == (self.entry.expected_robot, self.entry.expected_command)
        )

    @property
    def observed(self) -> str:
        o = self.outcome
        if o is None:
            return "no_gesture"
        return o.command_id if o.status == "executed" else o.status


@dataclass
class ReplayResult:
    report: AccuracyReport
    trials: list[Trial]
    robots: dict[str, SimulatedRobot]


def score(trials: Iterable[Trial]) -> AccuracyReport:
    report = AccuracyReport()
    for trial in trials:
        report.add(trial.entry.expected_command, trial.entry.expected_robot, trial.correct, trial.observed)
    return report


def replay(
    corpus: Sequence[CorpusEntry],
    config: EngineConfig | None = None,
    *,
    profiles: Sequence[RobotProfile] | None = None,
    scenarios: dict[str, Scenario] | None = None,
    reasoner: Reasoner | None = None,
    memory: VectorMemory | None = None,
    log_path: str | Path | None = None,
) -> ReplayResult:
    """Replay every entry as its own stream against freshly started simulated robots.

    A trial is scored on the first gesture its frames produce: correct only if
    that outcome executed the expected command on the expected robot.
    """
    config = config or EngineConfig()
    profiles = list(profiles) if profiles is not None else reference_fleet()
    scenarios = scenarios or {}
    with ExitStack() as stack:
        sims = {
            p.robot_id: stack.enter_context(SimulatedRobot(p, scenarios.get(p.robot_id)))
            for p in profiles
        }
        registry = Registry(weights=config.weights, freshness_window=config.freshness_window)
        for p in profiles:
            registry.register_robot(RobotProfile(p.robot_id, p.description, p.commands, sims[p.robot_id].endpoint, p.capacity))
        client = stack.enter_context(httpx.Client())
        engine = Engine(
            registry,
            reasoner or RuleReasoner(),
            memory if memory is not None else VectorMemory(dim=config.embedding_dim),
            config,
            client=client,
            log_path=log_path,
            session="replay",
        )
        trials = []
        for entry in corpus:
            frames = list(read_frames(entry.frame_lines(), StreamStats()))
            trials.append(Trial(entry, list(engine.run(frames))))
    return ReplayResult(score(trials), trials, sims)
