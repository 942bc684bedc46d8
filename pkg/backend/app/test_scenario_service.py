import json

import numpy as np
import pandas as pd
import pytest

from app.cli import main
from app.config import BUNDLED_SCENARIOS
from app.models.errors import ScenarioConfigError
from app.services.closed_loop import FOOTPRINT_COLUMNS, TRAJECTORY_COLUMNS
from app.services.scenario_service import (
  EXIT_CONFIG, EXIT_FALL, EXIT_OK, bundled_scenarios, load_config, parse_config, read_csv, run,
  run_batch, simulate, step_deltas, summarize, write_outputs,
)

STANDING = BUNDLED_SCENARIOS / "standing.json"
STRAIGHT_PUSH = BUNDLED_SCENARIOS / "straight_push.json"


@pytest.fixture
def short_walk(tmp_path):
  path = tmp_path / "short_walk.json"
  path.write_text(json.dumps({
    "name": "short_walk",
    "path": {"kind": "straight", "length": 0.5, "speed": 0.28},
    "pushes": [{"t_start": 0.9, "duration": 0.05, "force": [0.0, 60.0]}],
  }))
  return path


def test_bundled_scenarios_all_parse():
  names = {p.stem for p in bundled_scenarios()}
  assert {"standing", "straight_walk", "straight_push", "circle_push"} <= names
  for path in bundled_scenarios():
    load_config(path).to_scenario()


def test_unknown_keys_are_rejected():
  with pytest.raises(ScenarioConfigError) as err:
    parse_config({"path": {"kind": "straight", "length": 1.0, "speed": 0.2}, "velocity": 3})
  assert "velocity" in str(err.value)


def test_field_errors_name_the_field():
  with pytest.raises(ScenarioConfigError) as err:
    parse_config({"path": {"kind": "straight", "length": 1.0, "speed": -0.2}})
  assert "path.straight.speed" in str(err.value)


def test_json_errors_report_line_and_column(tmp_path):
  bad = tmp_path / "bad.json"
  bad.write_text('{\n  "path": {"kind": "straight",, }\n}')
  with pytest.raises(ScenarioConfigError) as err:
    load_config(bad)
  assert "line 2" in str(err.value)


def test_library_parameter_errors_become_config_errors():
  config = parse_config({
    "path": {"kind": "straight", "length": 1.0, "speed": 0.2},
    "controller": {"k_xi": [0.5, 2.0]},
  })
  with pytest.raises(ScenarioConfigError):
    config.to_scenario()


def test_run_writes_outputs(short_walk, tmp_path):
  out = tmp_path / "out"
  assert run(short_walk, out) == EXIT_OK
  trajectory = read_csv(out / "trajectory.csv")
  footprints = read_csv(out / "footprints.csv")
  summary = json.loads((out / "summary.json").read_text())
  assert list(trajectory.columns) == TRAJECTORY_COLUMNS
  assert list(footprints.columns) == FOOTPRINT_COLUMNS
  assert summary["name"] == "short_walk"
  assert summary["fell"] is False
  assert summary["mean_cycle_time_ms"] > 0.0


def test_csv_round_trip_is_exact(short_walk, tmp_path):
  log = simulate(load_config(short_walk))
  paths = write_outputs(log, summarize(log), tmp_path)
  trajectory = read_csv(paths["trajectory"])
  expected = log.trajectory()
  numeric = [c for c in TRAJECTORY_COLUMNS if c not in ("phase", "stance_side")]
  np.testing.assert_array_equal(trajectory[numeric].to_numpy(), expected[numeric].to_numpy(dtype=float))
  assert trajectory["phase"].tolist() == expected["phase"].tolist()
  assert trajectory["stance_side"].tolist() == expected["stance_side"].tolist()
  footprints = read_csv(paths["footprints"])
  pd.testing.assert_frame_equal(footprints, log.footprints(), check_dtype=False)


def test_summary_is_recomputable_from_footprints(short_walk, tmp_path):
  out = tmp_path / "out"
  run(short_walk, out)
  summary = json.loads((out / "summary.json").read_text())
  footprints = read_csv(out / "footprints.csv")
  deltas = step_deltas(footprints)
  assert [d["index"] for d in deltas] == [d["index"] for d in summary["adapted_steps"]]
  for got, want in zip(deltas, summary["adapted_steps"]):
    assert abs(got["width_delta"] - want["width_delta"]) <= 1e-12
    assert abs(got["timing_delta"] - want["timing_delta"]) <= 1e-12
  if deltas:
    assert abs(np.mean([d["width_delta"] for d in deltas]) - summary["mean_width_delta"]) <= 1e-12


def test_unperturbed_summary_has_no_deltas(tmp_path):
  log = simulate(load_config(STANDING))
  summary = summarize(log, "standing")
  assert summary["adapted_steps"] == []
  assert summary["mean_width_delta"] == 0.0 and summary["mean_timing_delta"] == 0.0
  assert summary["fell"] is False


def test_malformed_config_writes_nothing(tmp_path):
  bad = tmp_path / "bad.json"
  bad.write_text('{"path": {"kind": "spiral"}}')
  out = tmp_path / "out"
  assert run(bad, out) == EXIT_CONFIG
  assert not out.exists()
  assert run(tmp_path / "missing.json", out) == EXIT_CONFIG


def test_cli_exit_codes(tmp_path):
  assert main(["--config", str(STANDING), "--out", str(tmp_path / "a"), "--quiet"]) == EXIT_OK
  assert (tmp_path / "a" / "trajectory.csv").exists()
  assert main(["--config", str(STRAIGHT_PUSH), "--out", str(tmp_path / "b"), "--no-adapter", "--quiet"]) == EXIT_FALL
  assert (tmp_path / "b" / "summary.json").exists()
  assert main(["--out", str(tmp_path / "c"), "--quiet"]) == EXIT_CONFIG


def test_cli_dt_override(tmp_path):
  assert main(["--config", str(STANDING), "--out", str(tmp_path), "--dt", "0.02", "--quiet"]) == EXIT_OK
  t = read_csv(tmp_path / "trajectory.csv")["t"].to_numpy()
  np.testing.assert_allclose(np.diff(t), 0.02, atol=1e-9)
  with pytest.raises(SystemExit):
    main(["--config", str(STANDING), "--dt", "-1"])


def test_cli_prints_schema(capsys):
  assert main(["--print-schema", "--quiet"]) == EXIT_OK
  schema = json.loads(capsys.readouterr().out)
  assert "path" in schema["properties"]
  assert schema["additionalProperties"] is False


def test_batch_runs_each_scenario_in_its_own_directory(short_walk, tmp_path):
  codes = run_batch([STANDING, short_walk], tmp_path / "batch", workers=2)
  assert codes == {str(STANDING): EXIT_OK, str(short_walk): EXIT_OK}
  assert (tmp_path / "batch" / "standing" / "summary.json").exists()
  assert (tmp_path / "batch" / "short_walk" / "footprints.csv").exists()
