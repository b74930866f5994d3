import warnings

import pytest

warnings.filterwarnings("ignore", message="Using `httpx` with")

from fastapi.testclient import TestClient

from tacthand.configio import load_sensors
from tacthand.scenario import Scenario, run_experiment
from tacthand.service import app
from tacthand.tactile import calibration_cycles, trace_to_csv


@pytest.fixture()
def client():
    with TestClient(app) as c:
        c.post("/hand/reset", json={"seed": 0})
        yield c


class TestComputeEndpoints:
    def test_health(self, client):
        assert client.get("/health").json()["status"] == "ok"

    def test_size_published_point(self, client):
        data = client.post("/size", json={
            "payload_kg": 2.75, "lever_mm": 36.0, "worm_ratio": 20.0,
            "stall_torque_nmm": 107.0}).json()
        assert data["grip_force_n"] == pytest.approx(27.0, abs=0.1)
        assert data["mcp_torque_nmm"] == pytest.approx(971.0, abs=2.0)
        assert data["motor_torque_nmm"] == pytest.approx(49.0, abs=1.0)
        assert data["safety_factor"] == pytest.approx(2.2, abs=0.05)

    def test_size_rejects_nonpositive(self, client):
        r = client.post("/size", json={"payload_kg": 0.0, "lever_mm": 36.0})
        assert r.status_code == 422

    def test_calibrate_roundtrip(self, client):
        model, degree = load_sensors()["pinky"]
        csv_text = trace_to_csv(calibration_cycles(model, seed=55))
        data = client.post("/calibrate", json={
            "trace_csv": csv_text, "degree": degree}).json()
        assert data["r_squared"] > 0.99
        assert data["sensitivity_hpa_per_n"] == pytest.approx(246.97,
                                                              rel=0.02)

    def test_calibrate_wrong_cycle_count(self, client):
        model, _ = load_sensors()["pinky"]
        csv_text = trace_to_csv(calibration_cycles(model, cycles=3, seed=55))
        r = client.post("/calibrate", json={"trace_csv": csv_text})
        assert r.status_code == 422
        assert "CycleSegmentation" in r.json()["detail"]

    def test_characterize_single_finger(self, client):
        data = client.post("/characterize",
                           json={"fingers": ["thumb"]}).json()
        row = data["rows"][0]
        assert row["range_n"] == pytest.approx(2.32, rel=0.05)
        assert row["detection_threshold_n"] < 0.01
        assert data["report_csv"].startswith("finger,")

    def test_experiment_endpoint(self, client):
        data = client.post("/experiments/run", json={
            "scenario": {"object_name": "drill", "grasp": "MediumWrap",
                         "hold_s": 1.0, "hold2_s": 1.0, "move_s": 0.5,
                         "shake": {"cycles": 1}, "seed": 1},
            "include_telemetry": True}).json()
        assert data["retained"] is True
        assert [p["name"] for p in data["phases"]] == [
            "grasp", "hold", "move", "hold2", "shake"]
        assert data["telemetry_csv"].startswith("seq,")

    def test_experiment_unknown_object(self, client):
        r = client.post("/experiments/run", json={
            "scenario": {"object_name": "anvil"}})
        assert r.status_code == 404

    def test_payload_endpoint(self, client):
        data = client.post("/payload-test", json={"mass_kg": 0.4}).json()
        assert data["passed"] is True


class TestHandSession:
    def test_console_and_state(self, client):
        data = client.post("/hand/console",
                           json={"line": "grasp tripod"}).json()
        assert any("ok grasp Tripod" in r for r in data["replies"])
        state = client.get("/hand/state").json()
        assert state["phase"] == "moving_to_prep"

    def test_parse_error_reported(self, client):
        data = client.post("/hand/console", json={"line": "grasp"}).json()
        assert any("err parse" in r for r in data["replies"])

    def test_advance_streams_frames(self, client):
        data = client.post("/hand/advance", json={"duration_s": 1.0}).json()
        assert len(data["frames"]) == 10
        assert [f["seq"] for f in data["frames"]] == list(range(1, 11))
        # second advance continues the stream without repeats
        data2 = client.post("/hand/advance", json={"duration_s": 0.5}).json()
        assert [f["seq"] for f in data2["frames"]] == list(range(11, 16))

    def test_reset_with_scenario(self, client):
        r = client.post("/hand/reset", json={
            "seed": 1, "scenario": {"object_name": "drill",
                                    "hold_s": 1.0, "hold2_s": 1.0,
                                    "move_s": 0.5}})
        assert r.json()["scenario"] is True
        state = client.get("/hand/state").json()
        assert state["scenario_phase"] == "grasp"


class TestReplBatchEquivalence:
    def test_scripted_console_matches_batch_runner(self, client):
        from tacthand.configio import load_objects
        sc = Scenario(object=load_objects()["drill"],
                      grasp_name="MediumWrap", global_speed=1.0,
                      hold_s=1.0, hold2_s=1.0, move_s=0.5, shake_cycles=1,
                      seed=1)
        batch = run_experiment(sc)
        t_stop = batch.stop_time

        client.post("/hand/reset", json={"seed": 1, "scenario": {
            "object_name": "drill", "grasp": "MediumWrap", "speed": 1.0,
            "hold_s": 1.0, "hold2_s": 1.0, "move_s": 0.5,
            "shake": {"cycles": 1}, "seed": 1}})
        client.post("/hand/console",
                    json={"line": "grasp mediumwrap speed 1.0"})
        t = client.get("/hand/state").json()["t"]
        client.post("/hand/advance",
                    json={"duration_s": round(t_stop - t - 0.002, 3)})
        client.post("/hand/console", json={"line": "stop"})
        remaining = (batch.phases[-1].t_end - t_stop) + 0.05
        data = client.post("/hand/advance",
                           json={"duration_s": remaining}).json()
        state = client.get("/hand/state").json()

        # the operator path reproduces the batch log within a control tick:
        # same resting pose and same retention outcome
        last_batch = batch.frames[-1]
        for got, want in zip(state["theta_rad"], last_batch.angles):
            assert got == pytest.approx(want, abs=0.005)
        assert all(c == 0.0 for c in state["currents_a"])
