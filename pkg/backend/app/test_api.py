from fastapi.testclient import TestClient

from app.main import app

client = TestClient(app)


def test_health():
  response = client.get("/health")
  assert response.status_code == 200
  assert response.json() == {"status": "ok"}


def test_bundled_scenarios_listed():
  response = client.get("/api/scenarios/bundled")
  assert response.status_code == 200
  assert "straight_push" in response.json()["scenarios"]


def test_run_scenario_returns_summary():
  body = {"name": "stand", "path": {"kind": "straight", "length": 0.0, "speed": 0.28}, "min_duration": 0.5}
  response = client.post("/api/scenarios/run", json=body)
  assert response.status_code == 200
  summary = response.json()
  assert summary["name"] == "stand"
  assert summary["fell"] is False
  assert summary["adapted_steps"] == []


def test_run_scenario_rejects_bad_config():
  response = client.post("/api/scenarios/run", json={"path": {"kind": "straight"}, "colour": "red"})
  assert response.status_code == 400
  assert "colour" in response.json()["detail"]


def test_footstep_plan():
  body = {"path": {"kind": "straight", "length": 1.0, "speed": 0.28}}
  response = client.post("/api/footsteps/plan", json=body)
  assert response.status_code == 200
  steps = response.json()
  assert [s["side"] for s in steps[:2]] == ["Left", "Right"]
  assert abs(0.5 * (steps[-1]["x"] + steps[-2]["x"]) - 1.0) < 1e-9


def test_footstep_plan_rejects_tight_turn():
  body = {"path": {"kind": "arc", "radius": 0.3, "arc_angle": 3.14, "speed": 0.28}}
  response = client.post("/api/footsteps/plan", json=body)
  assert response.status_code == 422
