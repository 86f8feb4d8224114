"""In-process HTTP stand-ins for physical robots.

Each simulated robot serves ``GET /state`` and ``POST /command`` and follows
a scripted scenario: an ordered list of phases, each taking effect once the
robot has received a given number of commands.
"""

from __future__ import annotations

import json
import logging
import threading
from dataclasses import dataclass, field
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer

from gestos.registry import RobotProfile

log = logging.getLogger(__name__)


class BindFailure(OSError):
    pass


@dataclass(frozen=True)
class Phase:
    after: int = 0  # active once this many commands have been received
    status: str = "operational"
    load: float = 0.0
    detail: str = ""
    reject: frozenset[str] = frozenset()
    reject_all: bool = False


@dataclass(frozen=True)
class Scenario:
    phases: tuple[Phase, ...] = (Phase(),)

    @classmethod
    def fixed(cls, **kwargs) -> "Scenario":
        if "reject" in kwargs:
            kwargs["reject"] = frozenset(kwargs["reject"])
        return cls((Phase(**kwargs),))

    def phase_at(self, received: int) -> Phase:
        active = self.phases[0]
        for phase in self.phases:
            if phase.after <= received:
                active = phase
        return active


@dataclass(frozen=True)
class ReceivedCommand:
    dispatch_id: str
    command_id: str
    params: dict = field(default_factory=dict)
    accepted: bool = True


class SimulatedRobot:
    def __init__(self, profile: RobotProfile, scenario: Scenario | None = None, host: str = "127.0.0.1", port: int = 0):
        self.profile = profile
        self.scenario = scenario or Scenario()
        self._address = (host, port)
        self._lock = threading.Lock()
        self.received: list[ReceivedCommand] = []
        self._server: ThreadingHTTPServer | None = None
        self._thread: threading.Thread | None = None

    @property
    def endpoint(self) -> str:
        if self._server is None:
            raise RuntimeError("robot not started")
        host, port = self._server.server_address[:2]
        return f"http://{host}:{port}"

    def phase(self) -> Phase:
        with self._lock:
            return self.scenario.phase_at(len(self.received))

    def set_scenario(self, scenario: Scenario) -> None:
        with self._lock:
            self.scenario = scenario

    def accepted(self) -> list[ReceivedCommand]:
        with self._lock:
            return [c for c in self.received if c.accepted]

    def _handle_command(self, body: dict) -> dict:
        command_id = str(body.get("command_id", ""))
        with self._lock:
            phase = self.scenario.phase_at(len(self.received))
            if self.profile.command(command_id) is None:
                reply = {"status": "rejected", "detail": f"unknown command {command_id}"}
            elif phase.status != "operational":
                reply = {"status": "rejected", "detail": f"robot is {phase.status}"}
            elif phase.reject_all or command_id in phase.reject:
                reply = {"status": "rejected", "detail": f"scripted rejection of {command_id}"}
            else:
                reply = {"status": "accepted"}
            self.received.append(
                ReceivedCommand(str(body.get("dispatch_id", "")), command_id,
                                dict(body.get("params") or {}), reply["status"] == "accepted")
            )
        return reply

    def _make_handler(self):
        robot = self

        class Handler(BaseHTTPRequestHandler):
            def _send(self, code: int, payload: dict) -> None:
                data = json.dumps(payload).encode("utf-8")
                self.send_response(code)
                self.send_header("Content-Type", "application/json")
                self.send_header("Content-Length", str(len(data)))
                self.end_headers()
                self.wfile.write(data)

            def do_GET(self) -> None:
                if self.path.rstrip("/") != "/state":
                    self._send(404, {"error": "not found"})
                    return
                phase = robot.phase()
                self._send(200, {"status": phase.status, "load": phase.load, "detail": phase.detail})

            def do_POST(self) -> None:
                if self.path.rstrip("/") != "/command":
                    self._send(404, {"error": "not found"})
                    return
                length = int(self.headers.get("Content-Length", 0))
                try:
                    body = json.loads(self.rfile.read(length) or b"{}")
                except json.JSONDecodeError:
                    self._send(400, {"status": "rejected", "detail": "invalid JSON"})
                    return
                self._send(200, robot._handle_command(body))

            def log_message(self, fmt, *args) -> None:
                log.debug("%s: " + fmt, robot.profile.robot_id, *args)

        return Handler

    def start(self) -> "SimulatedRobot":
        try:
            self._server = ThreadingHTTPServer(self._address, self._make_handler())
        except OSError as exc:
            raise BindFailure(f"cannot bind {self._address}: {exc}") from exc
        self._server.daemon_threads = True
        self._thread = threading.Thread(
            target=self._server.serve_forever, kwargs={"poll_interval": 0.05},
            name=f"sim-{self.profile.robot_id}", daemon=True,
        )
        self._thread.start()
        return self

    def stop(self) -> None:
        if self._server is not None:
            self._server.shutdown()
            self._server.server_close()
            self._server = None

    def __enter__(self) -> "SimulatedRobot":
        return self.start() if self._server is None else self

    def __exit__(self, *exc) -> None:
        self.stop()
