"""JSON-over-HTTP operations API for steering a live simulated mission.

Single simulation owner behind one lock: every request (read or write)
serializes through it, and responses carry the monotone ``state_version``.
An optional wall-clock ticker advances simulated time at an operator-set
rate; ``POST /clock`` with ``{"rate": 0}`` freezes it, ``{"step_seconds":
n}`` advances deterministically.
"""
from __future__ import annotations

import json
import re
import threading
import time
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer

from .config import MissionConfig
from .mission import Command, CommandError, MissionRuntime
from .payload import pump_power_mw


class OpsServer:
    def __init__(self, config: MissionConfig):
        self.runtime = MissionRuntime(config)
        self.lock = threading.RLock()
        self.clock_rate = 0.0
        self._accum = 0.0
        self._next_cmd = 1
        self._stop = threading.Event()
        self._ticker = threading.Thread(target=self._tick_loop, daemon=True)
        self._ticker.start()

    def close(self) -> None:
        self._stop.set()

    def _tick_loop(self) -> None:
        while not self._stop.wait(0.05):
            with self.lock:
                if self.clock_rate > 0.0:
                    self._accum += self.clock_rate * 0.05
                    whole = int(self._accum)
                    if whole > 0:
                        self._accum -= whole
                        self.runtime.advance(whole)

    # ------------------------------------------------------------- handlers
    def get_state(self) -> dict:
        state = self.runtime.state_dict()
        state["clock_rate"] = self.clock_rate
        return state

    def get_passes(self, count: int) -> list[dict]:
        return [
            {
                "aos_epoch_s": p.aos_epoch_s,
                "los_epoch_s": p.los_epoch_s,
                "duration_s": p.duration_s,
                "max_elevation_deg": p.max_elevation_deg,
            }
            for p in self.runtime.next_passes(count)
        ]

    def get_profiles(self) -> list[dict]:
        rows = []
        for pid in sorted(self.runtime.profiles):
            p = self.runtime.profiles[pid]
            rows.append(
                {
                    "id": f"0x{pid:02X}",
                    "heating_min": p.heating_budget_min,
                    "dark_min": p.dark_minutes,
                    "expt_min": p.expt_minutes,
                    "pump_mode": p.pump_mode,
                    "pump_setting": p.pump_setting,
                    "pump_power_mw": round(pump_power_mw(p, self.runtime.config.payload), 3),
                    "memory": p.memory_type,
                    "turn_on_c": p.turn_on_temp_c,
                    "rotated_arm": p.rotated_arm,
                    "hv_variant": p.hv_variant,
                }
            )
        return rows

    def post_command(self, body: dict) -> tuple[int, dict]:
        profile = body.get("profile")
        if profile is None:
            return 422, {"error": "missing 'profile'"}
        try:
            pid = int(profile, 16) if isinstance(profile, str) else int(profile)
        except ValueError:
            return 422, {"error": f"bad profile id {profile!r}"}
        when = body.get("when", "next_window")
        if when == "next_window":
            epoch = None
        elif isinstance(when, dict) and "epoch_s" in when:
            epoch = int(when["epoch_s"])
        elif isinstance(when, dict) and "day" in when:
            epoch = int(round(float(when["day"]) * 86_400))
        else:
            return 422, {"error": f"bad 'when' {when!r}"}
        rt = self.runtime
        if rt.active is not None and (epoch is None or epoch <= rt.epoch_s):
            return 409, {
                "error": "payload busy",
                "running": f"0x{rt.active.profile_id:02X}",
            }
        command_id = body.get("id") or f"console-{self._next_cmd}"
        self._next_cmd += 1
        try:
            rt.enqueue_command(Command(command_id, pid, epoch))
        except CommandError as exc:
            return 422, {"error": str(exc)}
        return 201, {"accepted": True, "command_id": command_id}

    def post_clock(self, body: dict) -> tuple[int, dict]:
        if "rate" in body:
            rate = float(body["rate"])
            if rate < 0:
                return 422, {"error": "rate must be nonnegative"}
            self.clock_rate = rate
            return 200, {"clock_rate": self.clock_rate}
        if "step_seconds" in body:
            step = int(body["step_seconds"])
            if step < 0:
                return 422, {"error": "step_seconds must be nonnegative"}
            self.runtime.advance(step)
            return 200, {"epoch_s": self.runtime.epoch_s}
        return 422, {"error": "expected 'rate' or 'step_seconds'"}


class _Handler(BaseHTTPRequestHandler):
    server_version = "pairsat-ops/0.1"
    ops: OpsServer  # set by make_server

    def log_message(self, fmt, *args):  # quiet by default
        pass

    def _send(self, status: int, payload, content_type="application/json") -> None:
        if isinstance(payload, (dict, list)):
            if isinstance(payload, dict) and "state_version" not in payload:
                payload["state_version"] = self.ops.runtime.state_version
            body = json.dumps(payload).encode()
        else:
            body = payload
        self.send_response(status)
        self.send_header("Content-Type", content_type)
        self.send_header("Content-Length", str(len(body)))
        self.send_header("Access-Control-Allow-Origin", "*")
        self.end_headers()
        self.wfile.write(body)

    def _read_body(self) -> dict | None:
        length = int(self.headers.get("Content-Length", 0))
        try:
            return json.loads(self.rfile.read(length) or b"{}")
        except json.JSONDecodeError:
            return None

    def do_GET(self) -> None:
        path, _, query = self.path.partition("?")
        ops = self.ops
        with ops.lock:
            if path == "/state":
                self._send(200, ops.get_state())
            elif path == "/passes":
                m = re.search(r"(?:^|&)n=(\d+)", query)
                count = min(int(m.group(1)) if m else 5, 100)
                self._send(200, {"passes": ops.get_passes(count)})
            elif path == "/profiles":
                self._send(200, {"profiles": ops.get_profiles()})
            elif path == "/files":
                rt = ops.runtime
                rows = []
                for file_id in sorted(rt.archive_images):
                    a = rt.archive_analyses.get(file_id, {})
                    rows.append(
                        {
                            "file_id": file_id,
                            "profile_id": a.get("profile_id"),
                            "run_count": a.get("run_count"),
                            "has_fit": bool(a.get("fit")),
                        }
                    )
                self._send(200, {"files": rows})
            elif m := re.fullmatch(r"/files/(\d+)", path):
                image = ops.runtime.archive_images.get(int(m.group(1)))
                if image is None:
                    self._send(404, {"error": "unknown file id"})
                else:
                    self._send(200, image, content_type="application/octet-stream")
            elif m := re.fullmatch(r"/files/(\d+)/analysis", path):
                a = ops.runtime.archive_analyses.get(int(m.group(1)))
                if a is None:
                    self._send(404, {"error": "no analysis for that file id"})
                else:
                    self._send(200, dict(a))
            elif path == "/report":
                report = ops.runtime.build_report()
                if report is None:
                    self._send(404, {"error": "no analyzed files yet"})
                else:
                    self._send(200, report)
            else:
                self._send(404, {"error": f"no route {path}"})

    def do_POST(self) -> None:
        path = self.path.partition("?")[0]
        body = self._read_body()
        ops = self.ops
        with ops.lock:
            if body is None:
                self._send(422, {"error": "request body is not valid JSON"})
            elif path == "/commands":
                status, payload = ops.post_command(body)
                self._send(status, payload)
            elif path == "/clock":
                status, payload = ops.post_clock(body)
                self._send(status, payload)
            else:
                self._send(404, {"error": f"no route {path}"})

    def do_OPTIONS(self) -> None:
        self.send_response(204)
        self.send_header("Access-Control-Allow-Origin", "*")
        self.send_header("Access-Control-Allow-Methods", "GET, POST, OPTIONS")
        self.send_header("Access-Control-Allow-Headers", "Content-Type")
        self.end_headers()


def make_server(config: MissionConfig, addr: str = "127.0.0.1:8600") -> tuple[ThreadingHTTPServer, OpsServer]:
    host, _, port = addr.partition(":")
    ops = OpsServer(config)
    handler = type("BoundHandler", (_Handler,), {"ops": ops})
    httpd = ThreadingHTTPServer((host, int(port or 0)), handler)
    return httpd, ops


def serve(config: MissionConfig, addr: str = "127.0.0.1:8600") -> None:
    httpd, ops = make_server(config, addr)
    host, port = httpd.server_address[:2]
    print(f"pairsat ops API listening on http://{host}:{port}", flush=True)
    try:
        httpd.serve_forever()
    finally:
        ops.close()
