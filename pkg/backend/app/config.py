from pathlib import Path
import os

from dotenv import load_dotenv
from pydantic import BaseModel

load_dotenv()

BUNDLED_SCENARIOS = Path(__file__).resolve().parent / "scenarios"


class Settings(BaseModel):
  # Outputs and logging
  WALK_OUTPUT_DIR: str = os.getenv("WALK_OUTPUT_DIR", "./out")
  WALK_LOG_LEVEL: str = os.getenv("WALK_LOG_LEVEL", "INFO")

  # Scenario discovery and batch runs
  WALK_SCENARIO_DIR: str = os.getenv("WALK_SCENARIO_DIR", str(BUNDLED_SCENARIOS))
  WALK_BATCH_WORKERS: int = int(os.getenv("WALK_BATCH_WORKERS", "4"))

  # Step adapter QP
  WALK_QP_TOL: float = float(os.getenv("WALK_QP_TOL", "1e-8"))
  WALK_QP_MAX_ITER: int = int(os.getenv("WALK_QP_MAX_ITER", "200"))

settings = Settings()
