import json
import threading
import time
import urllib.error
import urllib.request

import pytest

from pairsat.config import MissionConfig
from pairsat.server import make_server

DAY = 86_400


@pytest.fixture()
def api():
    httpd, ops = make_server(MissionConfig(), "127.0.0.1:0")
    thread = threading.Thread(target=httpd.serve_forever, daemon=True)
    thread.start()
    base = f"http://127.0.0.1:{httpd.server_address[1]}"
    yield base
    ops.close()
    httpd.shutdown()


def get(base, path):
    try:
        with urllib.request.urlopen(base + path) as resp:
            body = resp.read()
            if resp.headers.get("Content-Type") == "application/octet-stream":
                return resp.status, body
            return resp.status, json.loads(body)
    except urllib.error.HTTPError as err:
        return err.code, json.loads(err.read())


def post(base, path, payload):
    req = urllib.request.Request(
        base + path, data=json.dumps(payload).encode(),
        headers={"Content-Type": "application/json"}, method="POST",
    )
    try:
        with urllib.request.urlopen(req) as resp:
            return resp.status, json.loads(resp.read())
    except urllib.error.HTTPError as err:
        return err.code, json.loads(err.read())


def test_state_and_profiles(api):
    status, state = get(api, "/state")
    assert status == 200
    assert state["epoch_s"] == 0
    assert "state_version" in state
    status, doc = get(api, "/profiles")
    assert status == 200
    assert len(doc["profiles"]) == 15
    ids = [p["id"] for p in doc["profiles"]]
    assert "0x10" in ids and "0x3D" in ids


def test_passes_endpoint(api):
    status, doc = get(api, "/passes?n=3")
    assert status == 200
    assert len(doc["passes"]) == 3
    p = doc["passes"][0]
    assert p["los_epoch_s"] > p["aos_epoch_s"]


def test_dark_run_end_to_end(api):
    status, doc = post(api, "/commands", {"profile": "0x37", "when": {"day": 0.5}})
    assert status == 201
    status, _ = post(api, "/clock", {"step_seconds": DAY})
    assert status == 200
    status, files = get(api, "/files")
    assert status == 200
    assert len(files["files"]) == 1
    assert files["files"][0]["profile_id"] == "0x37"
    assert files["files"][0]["has_fit"] is False
    status, image = get(api, "/files/1")
    assert status == 200 and len(image) == 65_536
    status, analysis = get(api, "/files/1/analysis")
    assert status == 200
    assert analysis["fit"] is None
    assert analysis["dark_cps"]["arm1"] > 0


def test_science_run_visibility_via_api(api):
    post(api, "/commands", {"profile": "0x10", "when": {"day": 0.5}})
    post(api, "/clock", {"step_seconds": DAY})
    status, analysis = get(api, "/files/1/analysis")
    assert status == 200
    assert analysis["fit"]["visibility"] == pytest.approx(0.97, abs=0.02)
    status, report = get(api, "/report")
    assert status == 200 and len(report["files"]) == 1


def test_busy_returns_409(api):
    post(api, "/commands", {"profile": "0x10", "when": {"day": 0.5}})
    post(api, "/clock", {"step_seconds": int(0.5 * DAY) + 300})
    status, state = get(api, "/state")
    assert state["running"] is not None
    status, doc = post(api, "/commands", {"profile": "0x37"})
    assert status == 409
    assert "busy" in doc["error"]


def test_malformed_commands_return_422(api):
    status, _ = post(api, "/commands", {})
    assert status == 422
    status, _ = post(api, "/commands", {"profile": "0x99"})
    assert status == 422
    status, _ = post(api, "/commands", {"profile": "0x10", "when": {"lightyear": 3}})
    assert status == 422


def test_unknown_ids_return_404(api):
    status, _ = get(api, "/files/99")
    assert status == 404
    status, _ = get(api, "/files/99/analysis")
    assert status == 404
    status, _ = get(api, "/report")
    assert status == 404
    status, _ = get(api, "/nonsense")
    assert status == 404


def test_clock_pause_and_rate(api):
    status, _ = post(api, "/clock", {"rate": 0})
    assert status == 200
    _, a = get(api, "/state")
    time.sleep(0.2)
    _, b = get(api, "/state")
    assert a["epoch_s"] == b["epoch_s"] == 0
    post(api, "/clock", {"rate": 7200})
    time.sleep(0.4)
    post(api, "/clock", {"rate": 0})
    _, c = get(api, "/state")
    assert c["epoch_s"] > 0
    status, _ = post(api, "/clock", {"rate": -1})
    assert status == 422
    status, _ = post(api, "/clock", {"warp": 9})
    assert status == 422


def test_state_version_monotone(api):
    _, a = get(api, "/state")
    post(api, "/commands", {"profile": "0x37"})
    _, b = get(api, "/state")
    assert b["state_version"] > a["state_version"]
