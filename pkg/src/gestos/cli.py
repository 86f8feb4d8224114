"""Command-line entry point: ``gestos run|replay|eval|corpus|describe|robots|memory``."""

from __future__ import annotations

import logging
import sys
from contextlib import ExitStack
from pathlib import Path

import click
import httpx

from gestos.config import EngineConfig, load_config
from gestos.dispatcher import Engine, segment_gestures
from gestos.encoder import encode_gesture
from gestos.harness.corpus import dump_corpus, generate_corpus, load_corpus, stream_lines
from gestos.harness.evaluation import render_confusion, render_counts, render_table, replay
from gestos.harness.simrobot import SimulatedRobot
from gestos.keyframes import select_keyframes
from gestos.memory import VectorMemory
from gestos.reasoner import LLMReasoner, RuleReasoner
from gestos.registry import Registry, RobotProfile, fetch_state, parse_registry_config
from gestos.stream import StreamStats, file_lines, read_frames, socket_lines, stdin_lines


def _config(path: str | None, **overrides) -> EngineConfig:
    config = load_config(path)
    for key, value in overrides.items():
        if value is not None:
            setattr(config, key, value)
    return config


def _lines(input_path: str, socket_addr: str | None):
    if socket_addr:
        return socket_lines(socket_addr, ready=lambda addr: click.echo(f"listening on {addr[0]}:{addr[1]}", err=True))
    if input_path == "-":
        return stdin_lines()
    return file_lines(input_path)


def _make_reasoner(kind: str, config: EngineConfig):
    return LLMReasoner(config.llm) if kind == "llm" else RuleReasoner()


@click.group()
@click.option("-v", "--verbose", count=True, help="Repeat for more log output.")
def main(verbose: int) -> None:
    """Gesture-to-fleet orchestration engine."""
    level = logging.WARNING - 10 * min(verbose, 2)
    logging.basicConfig(level=level, format="%(asctime)s %(levelname)s %(name)s: %(message)s")


@main.command()
@click.option("--registry", "registry_path", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--reasoner", type=click.Choice(["rule", "llm"]), default="rule", show_default=True)
@click.option("--memory", "memory_path", type=click.Path(dir_okay=False), help="Memory JSONL file.")
@click.option("--input", "input_path", default="-", show_default=True, help="Frame JSONL file, or - for stdin.")
@click.option("--socket", "socket_addr", help="Listen for frames on host:port instead.")
@click.option("--config", "config_path", type=click.Path(exists=True, dir_okay=False))
@click.option("--log", "log_path", type=click.Path(dir_okay=False), help="Append outcomes as JSONL.")
@click.option("--gesture-timeout", type=float, help="Idle seconds that close a gesture.")
@click.option("--dump-keyframes", type=click.File("w"), help="Write selected keyframes as JSONL.")
@click.option("--simulate", is_flag=True, help="Serve every registry robot from a local simulator.")
def run(registry_path, reasoner, memory_path, input_path, socket_addr, config_path, log_path,
        gesture_timeout, dump_keyframes, simulate):
    """Read frames, dispatch one command per recognized gesture, print outcomes."""
    config = _config(config_path, gesture_timeout=gesture_timeout)
    profiles = parse_registry_config(Path(registry_path).read_text(encoding="utf-8"))
    stats = StreamStats()
    with ExitStack() as stack:
        registry = Registry(weights=config.weights, freshness_window=config.freshness_window)
        for p in profiles:
            if simulate:
                sim = stack.enter_context(SimulatedRobot(p))
                p = RobotProfile(p.robot_id, p.description, p.commands, sim.endpoint, p.capacity)
            registry.register_robot(p)
        client = stack.enter_context(httpx.Client())
        memory = VectorMemory(memory_path, dim=config.embedding_dim) if memory_path else None
        sink = (lambda kf: dump_keyframes.write(kf.to_json() + "\n")) if dump_keyframes else None
        engine = Engine(registry, _make_reasoner(reasoner, config), memory, config,
                        client=client, log_path=log_path, keyframe_sink=sink)
        for outcome in engine.run(read_frames(_lines(input_path, socket_addr), stats)):
            click.echo(outcome.to_json())
    click.echo(f"frames accepted={stats.accepted} malformed={stats.malformed} "
               f"out_of_order={stats.out_of_order}", err=True)


def _print_report(result, confusion: bool, json_path: str | None) -> None:
    click.echo(render_table(result.report))
    click.echo(render_counts(result.report))
    if confusion:
        click.echo(render_confusion(result.report))
    if json_path:
        Path(json_path).write_text(result.report.to_json(), encoding="utf-8")


@main.command("replay")
@click.option("--corpus", "corpus_path", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--config", "config_path", type=click.Path(exists=True, dir_okay=False))
@click.option("--log", "log_path", type=click.Path(dir_okay=False))
@click.option("--confusion", is_flag=True, help="Also print the confusion matrix.")
@click.option("--json", "json_path", type=click.Path(dir_okay=False), help="Write the report as JSON.")
def replay_cmd(corpus_path, config_path, log_path, confusion, json_path):
    """Replay a corpus file against simulated UR3/GO1 robots."""
    result = replay(load_corpus(corpus_path), _config(config_path), log_path=log_path)
    _print_report(result, confusion, json_path)


@main.command("eval")
@click.option("--seed", type=int, default=1, show_default=True)
@click.option("--trials", type=int, default=20, show_default=True, help="Trials per command.")
@click.option("--jitter", type=float, default=0.01, show_default=True, help="Landmark noise sigma.")
@click.option("--config", "config_path", type=click.Path(exists=True, dir_okay=False))
@click.option("--log", "log_path", type=click.Path(dir_okay=False))
@click.option("--confusion", is_flag=True)
@click.option("--json", "json_path", type=click.Path(dir_okay=False))
def eval_cmd(seed, trials, jitter, config_path, log_path, confusion, json_path):
    """Generate a synthetic corpus and report per-command recognition accuracy."""
    result = replay(generate_corpus(seed, trials, jitter), _config(config_path), log_path=log_path)
    _print_report(result, confusion, json_path)


@main.command()
@click.option("--seed", type=int, default=1, show_default=True)
@click.option("--trials", type=int, default=20, show_default=True)
@click.option("--jitter", type=float, default=0.01, show_default=True)
@click.option("--stream", is_flag=True, help="Write one frame stream instead of labeled trials.")
@click.option("-o", "--output", type=click.File("w"), default="-")
def corpus(seed, trials, jitter, stream, output):
    """Write a synthetic corpus as JSONL."""
    entries = generate_corpus(seed, trials, jitter)
    if stream:
        for line in stream_lines(entries):
            output.write(line + "\n")
    else:
        output.write(dump_corpus(entries))


@main.command()
@click.option("--input", "input_path", default="-", show_default=True)
@click.option("--config", "config_path", type=click.Path(exists=True, dir_okay=False))
def describe(input_path, config_path):
    """Print the description text of every gesture in a frame JSONL file."""
    config = _config(config_path)
    frames = read_frames(_lines(input_path, None))
    for i, gesture in enumerate(segment_gestures(select_keyframes(frames, config.extractor), config.gesture_timeout)):
        if i:
            click.echo()
        click.echo(encode_gesture(gesture.keyframes, config.encoder).rendered_text)


@main.group()
def robots() -> None:
    """Inspect the robots of a registry config."""


@robots.command("list")
@click.option("--registry", "registry_path", required=True, type=click.Path(exists=True, dir_okay=False))
def robots_list(registry_path):
    for p in parse_registry_config(Path(registry_path).read_text(encoding="utf-8")):
        click.echo(f"{p.robot_id}\t{p.endpoint or '-'}\t{', '.join(p.command_ids)}")


@robots.command("state")
@click.option("--registry", "registry_path", required=True, type=click.Path(exists=True, dir_okay=False))
def robots_state(registry_path):
    with httpx.Client() as client:
        for p in parse_registry_config(Path(registry_path).read_text(encoding="utf-8")):
            s = fetch_state(p, client)
            click.echo(f"{p.robot_id}\t{s.status}\tload={s.load:.2f}\t{s.detail}")


@main.group()
def memory() -> None:
    """Export or import the interaction memory."""


@memory.command("export")
@click.option("--memory", "memory_path", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("-o", "--output", type=click.File("w"), default="-")
def memory_export(memory_path, output):
    for line in VectorMemory(memory_path).export_lines():
        output.write(line + "\n")


@memory.command("import")
@click.option("--memory", "memory_path", required=True, type=click.Path(dir_okay=False))
@click.argument("source", type=click.File("r"))
def memory_import(memory_path, source):
    count = VectorMemory(memory_path).import_lines(source)
    click.echo(f"imported {count} records", err=True)


if __name__ == "__main__":
    sys.exit(main())
