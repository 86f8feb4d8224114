import json
from dataclasses import replace

import httpx
import pytest

from gestos.config import EngineConfig
from gestos.dispatcher import Engine, Gesture, GestureSegmenter, segment_gestures
from gestos.fleet import reference_fleet
from gestos.harness.corpus import generate_corpus
from gestos.harness.simrobot import Scenario, SimulatedRobot
from gestos.keyframes import Keyframe, hand_center, select_keyframes, state_signature
from gestos.memory import VectorMemory
from gestos.reasoner import IntentResult, RuleReasoner
from gestos.registry import Candidate, Registry, RobotProfile
from gestos.stream import read_frames
from gestos.synth import HandPose, to_frame

CORPUS = {e.expected_command: e for e in generate_corpus(seed=11, trials_per_command=1, jitter_sigma=0.0)}


def frames_of(command, offset=0.0, hand=None):
    out = []
    for f in read_frames(CORPUS[command].frame_lines()):
        f = replace(f, timestamp=f.timestamp + offset)
        out.append(replace(f, handedness=hand) if hand else f)
    return out


def kf_at(t):
    frame = to_frame(HandPose(), t=t)
    return Keyframe(frame, state_signature(frame), hand_center(frame), "first")


def gesture_of(command):
    return list(segment_gestures(select_keyframes(frames_of(command))))[0]


# -- segmentation -----------------------------------------------------------------

def test_segment_closes_after_timeout():
    gestures = list(segment_gestures([kf_at(0.0), kf_at(0.3), kf_at(0.6), kf_at(2.0)]))
    assert len(gestures[0].keyframes) == 3
    assert gestures[0].closed_at == pytest.approx(1.6)
    assert len(gestures[1].keyframes) == 1


def test_segment_tick_reports_close_time():
    seg = GestureSegmenter(1.0)
    for t in (0.0, 0.3, 0.6):
        assert seg.push(kf_at(t)) == []
    assert seg.tick(1.6) == []  # exactly at the timeout the gesture is still open
    (g,) = seg.tick(1.61)
    assert g.closed_at == pytest.approx(1.6) and len(g.keyframes) == 3


def test_segment_two_far_apart():
    assert [len(g.keyframes) for g in segment_gestures([kf_at(0.0), kf_at(5.0)])] == [1, 1]


def test_segment_empty():
    assert list(segment_gestures([])) == []


# -- engine fixtures -----------------------------------------------------------------

class Fleet:
    def __init__(self, scenarios=None, profiles=None):
        self.sims = {p.robot_id: SimulatedRobot(p, (scenarios or {}).get(p.robot_id)).start()
                     for p in (profiles or reference_fleet())}
        self.registry = Registry()
        for robot_id, sim in self.sims.items():
            p = sim.profile
            self.registry.register_robot(RobotProfile(p.robot_id, p.description, p.commands, sim.endpoint, p.capacity))
        self.client = httpx.Client()

    def engine(self, reasoner=None, memory=None, **kw):
        return Engine(self.registry, reasoner or RuleReasoner(), memory if memory is not None else VectorMemory(),
                      EngineConfig(), client=self.client, session="t", **kw)

    def received(self):
        return {rid: list(sim.received) for rid, sim in self.sims.items()}

    def total_received(self):
        return sum(len(v) for v in self.received().values())

    def close(self):
        self.client.close()
        for sim in self.sims.values():
            sim.stop()


@pytest.fixture
def fleet_factory():
    made = []

    def make(**kw):
        made.append(Fleet(**kw))
        return made[-1]

    yield make
    for f in made:
        f.close()


class FixedIntent(RuleReasoner):
    """Rule explainer, but interpret always proposes an unsupported pairing."""

    def __init__(self, task):
        self.task = task

    def interpret(self, request):
        return IntentResult("compound", self.task, (Candidate("go1", "manipulator_close_gripper", 1.0),))


def successes(memory):
    return [r for r in memory.records() if r.outcome == "success"]


# -- process_gesture -----------------------------------------------------------------

def test_point_left_executes(fleet_factory):
    fleet = fleet_factory()
    mem = VectorMemory()
    out = fleet.engine(memory=mem).process_gesture(gesture_of("manipulator_select_left_item"))
    assert (out.status, out.robot_id, out.command_id) == ("executed", "ur3", "manipulator_select_left_item")
    assert [c.command_id for c in fleet.sims["ur3"].received] == ["manipulator_select_left_item"]
    assert fleet.sims["ur3"].received[0].dispatch_id == out.dispatch_id
    assert [(r.robot_id, r.command_id) for r in successes(mem)] == [("ur3", "manipulator_select_left_item")]
    assert out.latency > 0


def test_no_robots_registered():
    engine = Engine(Registry(), RuleReasoner(), VectorMemory(), client=httpx.Client())
    out = engine.process_gesture(gesture_of("manipulator_high_five"))
    assert out.status == "no_feasible_robot" and out.robot_id is None


def test_uninterpretable(fleet_factory):
    fleet = fleet_factory()
    mem = VectorMemory()
    still = to_frame(HandPose(extended=(False,) * 5))
    gesture = Gesture((Keyframe(still, state_signature(still), hand_center(still), "first"),), 1.0)
    out = fleet.engine(memory=mem).process_gesture(gesture)
    assert out.status == "uninterpretable"
    assert fleet.total_received() == 0 and successes(mem) == []


def test_go1_stand_down_executes(fleet_factory):
    fleet = fleet_factory()
    out = fleet.engine().process_gesture(gesture_of("robodog_stand_down"))
    assert (out.status, out.robot_id, out.command_id) == ("executed", "go1", "robodog_stand_down")


def test_reject_all(fleet_factory):
    fleet = fleet_factory(scenarios={"go1": Scenario.fixed(reject_all=True)})
    mem = VectorMemory()
    out = fleet.engine(memory=mem).process_gesture(gesture_of("robodog_give_paw"))
    assert out.status == "robot_rejected" and out.robot_id == "go1"
    assert [r.outcome for r in mem.records()] == ["rejected"]


def test_unreachable_endpoint(fleet_factory):
    fleet = fleet_factory()
    engine = fleet.engine()
    ack = engine.dispatch(RobotProfile("ghost", "", (), "http://127.0.0.1:1"), "x", "d-1")
    assert not ack.accepted and "network error" in ack.detail


def test_faulted_robot_no_feasible(fleet_factory):
    fleet = fleet_factory(scenarios={"ur3": Scenario.fixed(status="fault")})
    out = fleet.engine().process_gesture(gesture_of("manipulator_open_gripper"))
    assert out.status == "no_feasible_robot"
    assert fleet.total_received() == 0


def test_busy_load_feeds_selection(fleet_factory):
    shared = (
        RobotProfile("a", "", reference_fleet()[0].commands),
        RobotProfile("b", "", reference_fleet()[0].commands),
    )
    fleet = fleet_factory(profiles=shared, scenarios={"a": Scenario.fixed(load=0.9)})
    out = fleet.engine().process_gesture(gesture_of("manipulator_high_five"))
    assert out.robot_id == "b"
    assert len(fleet.sims["a"].received) == 0 and len(fleet.sims["b"].received) == 1


# -- decomposition ---------------------------------------------------------------------

def test_decomposition_dispatches_in_order(fleet_factory):
    fleet = fleet_factory()
    mem = VectorMemory()
    engine = fleet.engine(reasoner=FixedIntent("show me all sides of the object while holding it"), memory=mem)
    out = engine.process_gesture(gesture_of("manipulator_high_five"))
    assert out.status == "executed"
    assert [c.command_id for c in fleet.sims["ur3"].received] == ["manipulator_close_gripper", "manipulator_turn_object_around"]
    assert [c.dispatch_id for c in fleet.sims["ur3"].received] == [f"{out.dispatch_id}.1", f"{out.dispatch_id}.2"]
    assert [s["status"] for s in out.steps] == ["executed", "executed"]
    assert len(successes(mem)) == 2


def test_decomposition_aborts_on_rejection(fleet_factory):
    fleet = fleet_factory(scenarios={"ur3": Scenario.fixed(reject={"manipulator_turn_object_around"})})
    mem = VectorMemory()
    out = fleet.engine(reasoner=FixedIntent("inspect the object"), memory=mem).process_gesture(gesture_of("manipulator_high_five"))
    assert out.status == "robot_rejected" and out.command_id == "manipulator_turn_object_around"
    assert [c.command_id for c in fleet.sims["ur3"].received] == ["manipulator_close_gripper", "manipulator_turn_object_around"]
    assert [r.outcome for r in mem.records()] == ["success", "rejected"]


def test_decomposition_exhausted(fleet_factory):
    fleet = fleet_factory()
    mem = VectorMemory()
    out = fleet.engine(reasoner=FixedIntent("juggle"), memory=mem).process_gesture(gesture_of("manipulator_high_five"))
    assert out.status == "no_feasible_command"
    assert fleet.total_received() == 0 and successes(mem) == []


def test_decomposition_needs_unavailable_robot(fleet_factory):
    fleet = fleet_factory(scenarios={"ur3": Scenario.fixed(status="busy", load=1.0)})
    out = fleet.engine(reasoner=FixedIntent("inspect it")).process_gesture(gesture_of("manipulator_high_five"))
    assert out.status == "no_feasible_robot"
    assert fleet.total_received() == 0


# -- run loop ---------------------------------------------------------------------------

def stream_of(commands, gap=3.0):
    frames, t = [], 0.0
    for c in commands:
        frames += frames_of(c, offset=t)
        t = frames[-1].timestamp + gap
    return frames


SEQUENCE = ["manipulator_select_left_item", "robodog_give_paw", "manipulator_close_gripper", "robodog_stand_up"]


def test_run_in_order_memory_growth_and_exact_dispatch(fleet_factory, tmp_path):
    fleet = fleet_factory()
    mem = VectorMemory(tmp_path / "mem.jsonl")
    log = tmp_path / "out.jsonl"
    outcomes = list(fleet.engine(memory=mem, log_path=log).run(stream_of(SEQUENCE)))
    assert [o.command_id for o in outcomes] == SEQUENCE
    assert all(o.status == "executed" for o in outcomes)
    assert len(successes(mem)) == len(outcomes)
    assert fleet.total_received() == len(outcomes)
    logged = [json.loads(line) for line in log.read_text().splitlines()]
    assert [r["dispatch_id"] for r in logged] == [o.dispatch_id for o in outcomes]


def comparable(outcomes):
    return [(o.dispatch_id, o.description_text, o.intent_label, o.robot_id, o.command_id, o.status, o.steps)
            for o in outcomes]


def test_run_deterministic(fleet_factory, tmp_path):
    runs = []
    for i in range(2):
        fleet = fleet_factory()
        runs.append(comparable(fleet.engine(memory=VectorMemory()).run(stream_of(SEQUENCE))))
    assert runs[0] == runs[1]


def test_two_hands_are_separate_channels(fleet_factory):
    fleet = fleet_factory()
    left = frames_of("robodog_give_paw", hand="left")
    right = frames_of("manipulator_select_right_item", offset=0.2)
    frames = sorted(left + right, key=lambda f: f.timestamp)
    outcomes = list(fleet.engine().run(frames))
    assert len(outcomes) == 2
    # the right-hand stream ends later, so it closes second
    assert [o.description_text.splitlines()[0] for o in outcomes] == ["hand: left", "hand: right"]


def test_hand_disappearance_splits_gesture(fleet_factory):
    fleet = fleet_factory()
    frames = frames_of("manipulator_select_left_item")
    t = frames[-1].timestamp
    gone = [replace(frames[0], timestamp=t + 0.1 * i, confidence=0.1) for i in range(1, 20)]
    again = frames_of("manipulator_select_left_item", offset=t + 2.0)
    kfs = []
    outcomes = list(fleet.engine(keyframe_sink=kfs.append).run(frames + gone + again))
    assert len(outcomes) == 2
    assert [k.reason for k in kfs] == ["first", "first"]


def test_pipeline_never_raises_on_garbage_robot(fleet_factory):
    import threading
    from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer

    class Garbage(BaseHTTPRequestHandler):
        def do_GET(self):
            self.send_response(200)
            self.end_headers()
            self.wfile.write(b'{"status":"operational","load":0}')

        def do_POST(self):
            self.send_response(200)
            self.end_headers()
            self.wfile.write(b"not json")

        def log_message(self, *a):
            pass

    server = ThreadingHTTPServer(("127.0.0.1", 0), Garbage)
    threading.Thread(target=server.serve_forever, daemon=True).start()
    try:
        reg = Registry()
        p = reference_fleet()[0]
        reg.register_robot(RobotProfile(p.robot_id, p.description, p.commands, f"http://127.0.0.1:{server.server_address[1]}"))
        out = Engine(reg, RuleReasoner(), VectorMemory(), client=httpx.Client()).process_gesture(gesture_of("manipulator_high_five"))
        assert out.status == "robot_rejected"
    finally:
        server.shutdown()
        server.server_close()


def test_exemplars_reach_reasoner(fleet_factory):
    fleet = fleet_factory()
    seen = []

    class Spy(RuleReasoner):
        def interpret(self, request):
            seen.append(request.exemplars)
            return super().interpret(request)

    engine = fleet.engine(reasoner=Spy())
    g = gesture_of("robodog_give_paw")
    engine.process_gesture(g)
    engine.process_gesture(g)
    assert seen[0] == () and [r.command_id for r in seen[1]] == ["robodog_give_paw"]
