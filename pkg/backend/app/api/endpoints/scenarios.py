from fastapi import APIRouter, HTTPException
from typing import Any, Dict, List
import logging

from app.models.errors import ScenarioConfigError, WalkingError
from app.models.footstep_planner import UnicycleParams, plan_footsteps, sample_unicycle
from app.schemas import FootstepOut, FootstepPlanRequest, SummaryOut
from app.services.scenario_service import bundled_scenarios, parse_config, simulate, summarize

router = APIRouter()
logger = logging.getLogger(__name__)

@router.get("/bundled")
async def list_bundled() -> Dict[str, List[str]]:
    """Names of the scenario files shipped with the package"""
    return {"scenarios": [p.stem for p in bundled_scenarios()]}

@router.post("/run", response_model=SummaryOut)
def run_scenario(payload: Dict[str, Any]):
    """
    Simulate a scenario config and return its summary record

    The body is validated exactly like a scenario file; nothing is written to disk.
    """
    try:
        config = parse_config(payload, "request body")
        log = simulate(config)
    except ScenarioConfigError as e:
        logger.error(f"Rejected scenario: {str(e)}")
        raise HTTPException(status_code=400, detail=str(e))
    except WalkingError as e:
        logger.error(f"Scenario failed: {str(e)}")
        raise HTTPException(status_code=422, detail=str(e))
    return summarize(log, config.name)

footsteps_router = APIRouter()

@footsteps_router.post("/plan", response_model=List[FootstepOut])
def plan(request: FootstepPlanRequest):
    """Nominal footsteps for a path, initial stance pair first"""
    try:
        params = UnicycleParams(**request.unicycle.model_dump())
        steps = plan_footsteps(sample_unicycle(request.path.build(), params), params)
    except WalkingError as e:
        logger.error(f"Footstep planning failed: {str(e)}")
        raise HTTPException(status_code=422, detail=str(e))
    return [FootstepOut.from_footstep(s) for s in steps]
