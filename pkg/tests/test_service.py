import json
import time

import numpy as np
import pytest
from fastapi.testclient import TestClient

from bisimp.service.app import create_app

PROBLEM_DOC = json.dumps({
    "nx": 12, "ny": 10, "volume_fraction": 0.4,
    "fixtures": [{"edge": "left", "dofs": "xy"}],
    "loads": [{"point": [1.0, 0.5], "fy": -1.0}],
})


@pytest.fixture
def client():
    with TestClient(create_app()) as c:
        yield c


def new_session(client):
    response = client.post("/api/session")
    assert response.status_code == 200
    return response.json()["session_id"]


def wait_status(client, sid, statuses, timeout=30.0):
    deadline = time.monotonic() + timeout
    while time.monotonic() < deadline:
        state = client.get(f"/api/session/{sid}/state").json()
        if state["status"] in statuses:
            return state
        time.sleep(0.02)
    raise AssertionError(f"timed out waiting for {statuses}, last state {state}")


class TestSessionLifecycle:
    def test_create_and_initial_state(self, client):
        sid = new_session(client)
        state = client.get(f"/api/session/{sid}/state").json()
        assert state["status"] == "idle"
        assert state["iter"] == 0

    def test_unknown_session_404(self, client):
        assert client.get("/api/session/nope/state").status_code == 404
        assert client.post("/api/session/nope/start").status_code == 404

    def test_invalid_document_422(self, client):
        sid = new_session(client)
        response = client.put(f"/api/session/{sid}/problem", content='{"nx": 4, "oops": 1}')
        assert response.status_code == 422
        assert "oops" in response.json()["detail"]

    def test_start_without_problem_409(self, client):
        sid = new_session(client)
        assert client.post(f"/api/session/{sid}/start").status_code == 409

    def test_full_run_reaches_terminal_state(self, client):
        sid = new_session(client)
        assert client.put(f"/api/session/{sid}/problem", content=PROBLEM_DOC).status_code == 200
        client.patch(f"/api/session/{sid}/config", json={"max_iters": 40, "snapshot_every": 5})
        assert client.post(f"/api/session/{sid}/start").status_code == 200
        state = wait_status(client, sid, ("budget", "converged", "error"))
        assert state["status"] == "budget"
        assert state["iter"] == 40
        assert state["compliance"] > 0.0

    def test_put_problem_while_running_409(self, client):
        sid = new_session(client)
        client.put(f"/api/session/{sid}/problem", content=PROBLEM_DOC)
        client.patch(f"/api/session/{sid}/config", json={"max_iters": 500_000})
        client.post(f"/api/session/{sid}/start")
        try:
            response = client.put(f"/api/session/{sid}/problem", content=PROBLEM_DOC)
            assert response.status_code == 409
        finally:
            client.post(f"/api/session/{sid}/reset")

    def test_pause_resume_increases_iter(self, client):
        sid = new_session(client)
        client.put(f"/api/session/{sid}/problem", content=PROBLEM_DOC)
        client.patch(f"/api/session/{sid}/config", json={"max_iters": 500_000,
                                                         "snapshot_every": 1})
        client.post(f"/api/session/{sid}/start")
        time.sleep(0.3)
        assert client.post(f"/api/session/{sid}/pause").status_code == 200
        time.sleep(0.3)  # let the worker hit the boundary and block
        frozen = client.get(f"/api/session/{sid}/state").json()
        assert frozen["status"] == "paused"
        time.sleep(0.2)
        still = client.get(f"/api/session/{sid}/state").json()
        assert still["iter"] == frozen["iter"]
        assert client.post(f"/api/session/{sid}/resume").status_code == 200
        deadline = time.monotonic() + 20
        while time.monotonic() < deadline:
            moved = client.get(f"/api/session/{sid}/state").json()
            if moved["iter"] > frozen["iter"]:
                break
            time.sleep(0.05)
        assert moved["iter"] > frozen["iter"]
        client.post(f"/api/session/{sid}/reset")

    def test_illegal_transitions_409(self, client):
        sid = new_session(client)
        client.put(f"/api/session/{sid}/problem", content=PROBLEM_DOC)
        assert client.post(f"/api/session/{sid}/pause").status_code == 409
        assert client.post(f"/api/session/{sid}/resume").status_code == 409
        client.patch(f"/api/session/{sid}/config", json={"max_iters": 500_000})
        client.post(f"/api/session/{sid}/start")
        assert client.post(f"/api/session/{sid}/start").status_code == 409
        assert client.post(f"/api/session/{sid}/resume").status_code == 409
        client.post(f"/api/session/{sid}/reset")

    def test_reset_returns_to_idle(self, client):
        sid = new_session(client)
        client.put(f"/api/session/{sid}/problem", content=PROBLEM_DOC)
        client.patch(f"/api/session/{sid}/config", json={"max_iters": 500_000})
        client.post(f"/api/session/{sid}/start")
        time.sleep(0.2)
        assert client.post(f"/api/session/{sid}/reset").status_code == 200
        state = client.get(f"/api/session/{sid}/state").json()
        assert state["status"] == "idle"
        assert state["iter"] == 0
        # a fresh run is allowed after reset
        assert client.post(f"/api/session/{sid}/start").status_code == 200
        client.post(f"/api/session/{sid}/reset")

    def test_edit_while_paused_resets_iterates(self, client):
        sid = new_session(client)
        client.put(f"/api/session/{sid}/problem", content=PROBLEM_DOC)
        client.patch(f"/api/session/{sid}/config", json={"max_iters": 500_000})
        client.post(f"/api/session/{sid}/start")
        time.sleep(0.3)
        client.post(f"/api/session/{sid}/pause")
        response = client.put(f"/api/session/{sid}/problem", content=PROBLEM_DOC)
        assert response.status_code == 200
        state = client.get(f"/api/session/{sid}/state").json()
        assert state["status"] == "paused"
        assert state["iter"] == 0  # iterates dropped with the old geometry
        assert client.post(f"/api/session/{sid}/resume").status_code == 200
        wait_status(client, sid, ("running", "budget", "converged"))
        client.post(f"/api/session/{sid}/reset")


class TestConfigPatch:
    def test_live_patch_limited_to_tunable_subset(self, client):
        sid = new_session(client)
        client.put(f"/api/session/{sid}/problem", content=PROBLEM_DOC)
        client.patch(f"/api/session/{sid}/config", json={"max_iters": 500_000})
        client.post(f"/api/session/{sid}/start")
        try:
            ok = client.patch(f"/api/session/{sid}/config",
                              json={"alpha0": 0.1, "snapshot_every": 2})
            assert ok.status_code == 200
            bad = client.patch(f"/api/session/{sid}/config", json={"krylov_dim": 5})
            assert bad.status_code == 409
        finally:
            client.post(f"/api/session/{sid}/reset")

    def test_unknown_config_key_422(self, client):
        sid = new_session(client)
        response = client.patch(f"/api/session/{sid}/config", json={"stepsize": 1.0})
        assert response.status_code == 422

    def test_invalid_value_422(self, client):
        sid = new_session(client)
        response = client.patch(f"/api/session/{sid}/config", json={"alpha0": -2.0})
        assert response.status_code == 422


class TestStream:
    def test_frames_have_header_and_f32_payload(self, client):
        sid = new_session(client)
        client.put(f"/api/session/{sid}/problem", content=PROBLEM_DOC)
        client.patch(f"/api/session/{sid}/config",
                     json={"max_iters": 60, "snapshot_every": 10})
        with client.websocket_connect(f"/api/session/{sid}/stream") as ws:
            client.post(f"/api/session/{sid}/start")
            header = json.loads(ws.receive_text())
            payload = ws.receive_bytes()
            assert header["encoding"] == "f32le"
            assert header["nx"] == 12 and header["ny"] == 10
            assert header["iter"] % 10 == 0 or header["iter"] == 60
            assert len(payload) == 4 * 12 * 10
            values = np.frombuffer(payload, dtype="<f4")
            assert values.min() >= 0.1 - 1e-6
            assert values.max() <= 1.0 + 1e-6

    def test_stream_is_lossy_latest_wins(self, client):
        sid = new_session(client)
        client.put(f"/api/session/{sid}/problem", content=PROBLEM_DOC)
        client.patch(f"/api/session/{sid}/config",
                     json={"max_iters": 200, "snapshot_every": 1})
        client.post(f"/api/session/{sid}/start")
        wait_status(client, sid, ("budget", "converged"))
        # connect after the run: only the newest frame is retained
        with client.websocket_connect(f"/api/session/{sid}/stream") as ws:
            header = json.loads(ws.receive_text())
            ws.receive_bytes()
            assert header["iter"] == 200

    def test_unknown_session_stream_closes(self, client):
        with pytest.raises(Exception):
            with client.websocket_connect("/api/session/nope/stream") as ws:
                ws.receive_text()


class TestSolverIndependence:
    def test_run_with_and_without_consumer_is_identical(self, client):
        # numeric behavior must not depend on the number of stream clients
        results = []
        for consume in (False, True):
            sid = new_session(client)
            client.put(f"/api/session/{sid}/problem", content=PROBLEM_DOC)
            client.patch(f"/api/session/{sid}/config",
                         json={"max_iters": 50, "snapshot_every": 1})
            if consume:
                with client.websocket_connect(f"/api/session/{sid}/stream") as ws:
                    client.post(f"/api/session/{sid}/start")
                    json.loads(ws.receive_text())
                    ws.receive_bytes()
                    wait_status(client, sid, ("budget",))
            else:
                client.post(f"/api/session/{sid}/start")
                wait_status(client, sid, ("budget",))
            state = client.get(f"/api/session/{sid}/state").json()
            results.append((state["iter"], state["compliance"], state["volume"]))
        assert results[0] == results[1]


class TestRoot:
    def test_placeholder_served_without_bundle(self, client):
        response = client.get("/")
        assert response.status_code == 200
        assert "bisimp" in response.text
