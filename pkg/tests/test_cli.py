import json

from click.testing import CliRunner

from gestos.cli import main
from gestos.fleet import reference_fleet
from gestos.harness.corpus import generate_corpus
from gestos.registry import serialize_registry_config


def write_inputs(tmp_path):
    reg = tmp_path / "reg.json"
    reg.write_text(serialize_registry_config(reference_fleet()))
    frames = tmp_path / "frames.jsonl"
    entries = generate_corpus(1, 1, 0.01)[:2]
    with frames.open("w") as fh:
        for i, e in enumerate(entries):
            for rec in e.frames:
                fh.write(json.dumps(dict(rec, t=rec["t"] + 5 * i)) + "\n")
    return reg, frames, entries


def test_run_simulated(tmp_path):
    reg, frames, entries = write_inputs(tmp_path)
    mem = tmp_path / "mem.jsonl"
    kfs = tmp_path / "kf.jsonl"
    result = CliRunner().invoke(main, ["run", "--registry", str(reg), "--simulate", "--input", str(frames),
                                       "--memory", str(mem), "--dump-keyframes", str(kfs)])
    assert result.exit_code == 0, result.output
    outcomes = [json.loads(line) for line in result.stdout.splitlines() if line.startswith("{")]
    assert [o["command_id"] for o in outcomes] == [e.expected_command for e in entries]
    assert len(mem.read_text().splitlines()) == 2
    assert json.loads(kfs.read_text().splitlines()[0])["reason"] == "first"


def test_run_from_stdin(tmp_path):
    reg, frames, _ = write_inputs(tmp_path)
    result = CliRunner().invoke(main, ["run", "--registry", str(reg), "--simulate"], input=frames.read_text())
    assert result.exit_code == 0
    assert sum(line.startswith("{") for line in result.stdout.splitlines()) == 2


def test_describe(tmp_path):
    _, frames, _ = write_inputs(tmp_path)
    result = CliRunner().invoke(main, ["describe", "--input", str(frames)])
    assert result.exit_code == 0
    assert result.stdout.count("hand: right") == 2


def test_eval_and_corpus_replay(tmp_path):
    runner = CliRunner()
    result = runner.invoke(main, ["eval", "--trials", "1", "--jitter", "0", "--json", str(tmp_path / "r.json")])
    assert result.exit_code == 0
    header = [cell.strip() for cell in result.stdout.splitlines()[0].split("|")]
    assert header == ["Command", "Robot", "Accuracy (%)"]
    assert json.loads((tmp_path / "r.json").read_text())["total"]["correct"] == 11
    corpus = tmp_path / "c.jsonl"
    assert runner.invoke(main, ["corpus", "--trials", "1", "-o", str(corpus)]).exit_code == 0
    result = runner.invoke(main, ["replay", "--corpus", str(corpus), "--confusion"])
    assert result.exit_code == 0 and "Expected" in result.stdout


def test_robots_and_memory(tmp_path):
    reg, frames, _ = write_inputs(tmp_path)
    runner = CliRunner()
    listing = runner.invoke(main, ["robots", "list", "--registry", str(reg)]).stdout
    assert listing.splitlines()[0].startswith("ur3\t-\tmanipulator_high_five")
    state = runner.invoke(main, ["robots", "state", "--registry", str(reg)]).stdout
    assert "offline" in state
    mem = tmp_path / "mem.jsonl"
    runner.invoke(main, ["run", "--registry", str(reg), "--simulate", "--input", str(frames), "--memory", str(mem)])
    exported = runner.invoke(main, ["memory", "export", "--memory", str(mem)]).stdout
    assert exported == mem.read_text()
    copy = tmp_path / "copy.jsonl"
    result = runner.invoke(main, ["memory", "import", "--memory", str(copy), "-"], input=exported)
    assert result.exit_code == 0 and copy.read_text() == exported


def test_config_file(tmp_path):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"gesture_timeout": 10.0, "weights": {"match": 1, "availability": 1, "context": 1}}))
    _, frames, _ = write_inputs(tmp_path)
    result = CliRunner().invoke(main, ["describe", "--input", str(frames), "--config", str(cfg)])
    # a 10 s timeout merges both gestures into one description
    assert result.stdout.count("hand: right") == 1


def test_corpus_stream_feeds_describe(tmp_path):
    runner = CliRunner()
    frames = tmp_path / "stream.jsonl"
    assert runner.invoke(main, ["corpus", "--trials", "1", "--stream", "-o", str(frames)]).exit_code == 0
    times = [json.loads(line)["t"] for line in frames.read_text().splitlines()]
    assert times == sorted(times)
    out = runner.invoke(main, ["describe", "--input", str(frames)]).stdout
    assert out.count("hand: ") == 11
