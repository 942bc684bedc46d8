"""Scenario runs: load a JSON config, simulate it, write CSV/JSON outputs."""
from concurrent.futures import ThreadPoolExecutor
import json
import logging
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Union

import numpy as np
import pandas as pd
from pydantic import ValidationError

from ..config import settings
from ..models.errors import ScenarioConfigError, WalkingError
from ..models.lip_model import rotation
from ..schemas import ScenarioConfig
from .closed_loop import SimLog, max_dcm_error, run_closed_loop

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_CONFIG = 1
EXIT_FALL = 2

CSV_FLOAT_FORMAT = "%.17g"


def load_config(source: Union[str, Path]) -> ScenarioConfig:
  path = Path(source)
  try:
    text = path.read_text()
  except OSError as exc:
    raise ScenarioConfigError(f"Cannot read {path}: {exc}") from exc
  try:
    data = json.loads(text)
  except json.JSONDecodeError as exc:
    raise ScenarioConfigError(f"{path}: invalid JSON at line {exc.lineno}, column {exc.colno}: {exc.msg}") from exc
  return parse_config(data, str(path))


def parse_config(data: dict, origin: str = "<config>") -> ScenarioConfig:
  try:
    return ScenarioConfig.model_validate(data)
  except ValidationError as exc:
    problems = "; ".join(
      f"{'.'.join(str(p) for p in err['loc'])}: {err['msg']}" for err in exc.errors()
    )
    raise ScenarioConfigError(f"{origin}: {problems}") from exc


def _lateral(prev_pos, prev_yaw: float, pos) -> float:
  return float(abs((rotation(prev_yaw).T @ (np.asarray(pos) - np.asarray(prev_pos)))[1]))


def step_deltas(footprints: pd.DataFrame) -> List[Dict[str, float]]:
  """Width and timing change of every adapted footstep against its nominal counterpart.

  Width is the lateral distance to the preceding footstep in that footstep's frame
  (positive = wider); timing is nominal minus adapted step duration (positive = earlier).
  """
  deltas = []
  rows = footprints.to_dict("records")
  for prev, row in zip(rows, rows[1:]):
    if not row["was_adapted"] or row["index"] < 2:
      continue
    nominal_w = _lateral((prev["nominal_x"], prev["nominal_y"]), prev["nominal_yaw"],
                         (row["nominal_x"], row["nominal_y"]))
    adapted_w = _lateral((prev["adapted_x"], prev["adapted_y"]), prev["nominal_yaw"],
                         (row["adapted_x"], row["adapted_y"]))
    nominal_T = row["nominal_impact_t"] - prev["nominal_impact_t"]
    adapted_T = row["adapted_impact_t"] - prev["adapted_impact_t"]
    deltas.append({
      "index": int(row["index"]),
      "width_delta": adapted_w - nominal_w,
      "timing_delta": nominal_T - adapted_T,
    })
  return deltas


def summarize(log: SimLog, name: str = "scenario") -> dict:
  deltas = step_deltas(log.footprints())
  cycle_ms = 1e3 * float(np.mean(log.cycle_times)) if log.cycle_times else 0.0
  duration = float(log.records[-1]["t"]) if log.records else 0.0
  return {
    "name": name,
    "fell": log.fell,
    "fall_time": log.fall_time,
    "fall_reason": log.fall_reason,
    "duration": duration,
    "adapted_steps": deltas,
    "mean_width_delta": float(np.mean([d["width_delta"] for d in deltas])) if deltas else 0.0,
    "mean_timing_delta": float(np.mean([d["timing_delta"] for d in deltas])) if deltas else 0.0,
    "max_dcm_error": max_dcm_error(log),
    "mean_cycle_time_ms": cycle_ms,
    "adapter_failures": log.adapter_failures,
  }


def write_outputs(log: SimLog, summary: dict, out_dir: Union[str, Path], prefix: str = "") -> Dict[str, Path]:
  out = Path(out_dir)
  out.mkdir(parents=True, exist_ok=True)
  paths = {
    "trajectory": out / f"{prefix}trajectory.csv",
    "footprints": out / f"{prefix}footprints.csv",
    "summary": out / f"{prefix}summary.json",
  }
  log.trajectory().to_csv(paths["trajectory"], index=False, float_format=CSV_FLOAT_FORMAT)
  log.footprints().to_csv(paths["footprints"], index=False, float_format=CSV_FLOAT_FORMAT)
  paths["summary"].write_text(json.dumps(summary, indent=2))
  return paths


def read_csv(path: Union[str, Path]) -> pd.DataFrame:
  return pd.read_csv(path, float_precision="round_trip", keep_default_na=False)


def simulate(config: ScenarioConfig, dt: Optional[float] = None,
             adapter_enabled: Optional[bool] = None) -> SimLog:
  overrides = {}
  if dt is not None:
    overrides["dt"] = dt
  if adapter_enabled is not None:
    overrides["adapter_enabled"] = adapter_enabled
  if overrides:
    config = config.model_copy(update=overrides)
  scenario = config.to_scenario(settings.WALK_QP_TOL, settings.WALK_QP_MAX_ITER)
  return run_closed_loop(scenario)


def run(config_path: Union[str, Path], out_dir: Union[str, Path, None] = None,
        dt: Optional[float] = None, adapter_enabled: Optional[bool] = None) -> int:
  """Run one scenario file; returns 0 (no fall), 2 (fall) or 1 (config/IO error)."""
  out_dir = out_dir or settings.WALK_OUTPUT_DIR
  try:
    config = load_config(config_path)
    logger.info(f"Running scenario '{config.name}' from {config_path}")
    log = simulate(config, dt, adapter_enabled)
    summary = summarize(log, config.name)
    paths = write_outputs(log, summary, out_dir, config.output_prefix)
  except (ScenarioConfigError, OSError) as exc:
    logger.error(str(exc))
    return EXIT_CONFIG
  except WalkingError as exc:
    logger.error(f"{config_path}: {exc}")
    return EXIT_CONFIG
  logger.info(f"Wrote {', '.join(str(p) for p in paths.values())}")
  if summary["fell"]:
    logger.warning(f"Scenario '{config.name}' fell at t={summary['fall_time']:.3f}s")
    return EXIT_FALL
  return EXIT_OK


def run_batch(config_paths: Sequence[Union[str, Path]], out_dir: Union[str, Path, None] = None,
              workers: Optional[int] = None, dt: Optional[float] = None,
              adapter_enabled: Optional[bool] = None) -> Dict[str, int]:
  """Run independent scenarios concurrently, each into out_dir/<config stem>."""
  base = Path(out_dir or settings.WALK_OUTPUT_DIR)
  workers = workers or settings.WALK_BATCH_WORKERS
  with ThreadPoolExecutor(max_workers=workers) as pool:
    futures = {
      str(p): pool.submit(run, p, base / Path(p).stem, dt, adapter_enabled) for p in config_paths
    }
    return {path: future.result() for path, future in futures.items()}


def bundled_scenarios() -> List[Path]:
  return sorted(Path(settings.WALK_SCENARIO_DIR).glob("*.json"))
