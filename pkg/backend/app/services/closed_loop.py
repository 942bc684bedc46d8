"""Closed-loop walking: plan, adapt, control and simulate one scenario.

Per control cycle: read the DCM; in single support run the step adapter and rebuild
the plan from its solution; sample the plan; close the DCM loop; advance the plant.
"""
from dataclasses import dataclass, field, replace
import logging
import time
from typing import Dict, List, Optional, Tuple

import numpy as np
import pandas as pd

from ..models.dcm_controller import ControllerGains, vrp_command
from ..models.dcm_planner import DcmPlan, Phase, build_plan
from ..models.errors import AdapterInfeasibleError
from ..models.footstep_planner import (
  Footstep, PathSpec, StraightLine, UnicycleParams, plan_footsteps, sample_unicycle,
)
from ..models.lip_model import DcmState, LipParams
from ..models.lip_sim import (
  DEFAULT_APEX_HEIGHT, DEFAULT_FALL_RADIUS, DEFAULT_SUPPORT_MARGIN, FallMonitor, PushEvent,
  SimState, SwingProfile, kinematic_violation, make_swing, step_sim, support_centre, total_force,
)
from ..models.qp_dense import DEFAULT_MAX_ITER, DEFAULT_TOL
from ..models.step_adapter import AdapterWeights, StepAdapter, StepLimits, replan_after_adapt

logger = logging.getLogger(__name__)

TRAJECTORY_COLUMNS = [
  "t", "xi_x", "xi_y", "xi_ref_x", "xi_ref_y", "com_x", "com_y", "zmp_ref_x", "zmp_ref_y",
  "vrp_cmd_x", "vrp_cmd_y", "swing_x", "swing_y", "swing_z", "phase", "stance_side",
  "push_x", "push_y",
]
FOOTPRINT_COLUMNS = [
  "index", "side", "nominal_x", "nominal_y", "nominal_yaw", "nominal_impact_t",
  "adapted_x", "adapted_y", "adapted_impact_t", "was_adapted",
]
ADAPTED_POSITION_TOL = 1e-3
ADAPTED_TIME_TOL = 1e-3


@dataclass
class Scenario:
  path: PathSpec = field(default_factory=lambda: StraightLine(0.0, 0.28))
  params: LipParams = field(default_factory=LipParams)
  unicycle: UnicycleParams = field(default_factory=UnicycleParams)
  gains: ControllerGains = field(default_factory=ControllerGains)
  weights: AdapterWeights = field(default_factory=AdapterWeights)
  limits: StepLimits = field(default_factory=StepLimits)
  ds_duration: Optional[float] = None
  dt: float = 0.01
  pushes: List[PushEvent] = field(default_factory=list)
  adapter_enabled: bool = True
  refresh_gamma_nom: bool = True
  support_margin: float = DEFAULT_SUPPORT_MARGIN
  fall_radius: float = DEFAULT_FALL_RADIUS
  apex_height: float = DEFAULT_APEX_HEIGHT
  initial_transfer: Optional[float] = None
  final_hold: Optional[float] = None
  min_duration: float = 0.0
  qp_tol: float = DEFAULT_TOL
  qp_max_iter: int = DEFAULT_MAX_ITER

  @property
  def ds(self) -> float:
    if self.ds_duration is not None:
      return self.ds_duration
    return 0.2 * self.unicycle.nominal_step_duration


@dataclass
class SimLog:
  records: List[Dict[str, object]]
  nominal_footsteps: List[Footstep]
  final_plan: DcmPlan
  touchdowns: List[Tuple[int, float]]
  cycle_times: List[float]
  fell: bool = False
  fall_time: Optional[float] = None
  fall_reason: Optional[str] = None
  adapter_failures: int = 0

  @property
  def adapted_footsteps(self) -> List[Footstep]:
    return self.final_plan.footsteps

  @property
  def phases(self) -> List[Phase]:
    return self.final_plan.phases

  def trajectory(self) -> pd.DataFrame:
    return pd.DataFrame(self.records, columns=TRAJECTORY_COLUMNS)

  def footprints(self) -> pd.DataFrame:
    rows = []
    pairs = list(zip(self.nominal_footsteps, self.adapted_footsteps))
    for k, (nominal, adapted) in enumerate(pairs):
      moved = float(np.linalg.norm(adapted.position - nominal.position))
      # a step counts as retimed when its own duration changed, not when an earlier step shifted it
      shifted = 0.0
      if k > 0:
        prev_nominal, prev_adapted = pairs[k - 1]
        shifted = abs((adapted.impact_time - prev_adapted.impact_time)
                      - (nominal.impact_time - prev_nominal.impact_time))
      rows.append({
        "index": nominal.index,
        "side": nominal.side.value,
        "nominal_x": float(nominal.position[0]),
        "nominal_y": float(nominal.position[1]),
        "nominal_yaw": float(nominal.yaw),
        "nominal_impact_t": float(nominal.impact_time),
        "adapted_x": float(adapted.position[0]),
        "adapted_y": float(adapted.position[1]),
        "adapted_impact_t": float(adapted.impact_time),
        "was_adapted": bool(moved > ADAPTED_POSITION_TOL or shifted > ADAPTED_TIME_TOL),
      })
    return pd.DataFrame(rows, columns=FOOTPRINT_COLUMNS)


def plan_scenario(scenario: Scenario) -> DcmPlan:
  footsteps = plan_footsteps(sample_unicycle(scenario.path, scenario.unicycle), scenario.unicycle)
  return build_plan(footsteps, scenario.ds, scenario.params,
                    initial_transfer=scenario.initial_transfer, final_hold=scenario.final_hold)


class _SwingTracker:
  """Keeps the swing profile of the current single support in sync with the plan."""

  def __init__(self, apex_height: float):
    self.apex_height = apex_height
    self.index: Optional[int] = None
    self.profile: Optional[SwingProfile] = None
    self.t0 = 0.0
    self.landed = None

  def update(self, t: float, phase: Phase, plan: DcmPlan):
    steps = plan.footsteps
    if phase.kind != "SS":
      self.index = None
      return (self.landed if self.landed is not None else steps[0].position), 0.0
    swing = phase.swing_index
    target = steps[swing].position
    if swing != self.index:
      self.index, self.t0 = swing, phase.start
      self.profile = make_swing(steps[swing - 2].position, target, phase.duration, self.apex_height)
    elif (np.any(np.abs(target - self.profile.end) > 1e-12)
          or abs(self.t0 + self.profile.duration - phase.end) > 1e-12):
      self.profile = self.profile.retime(t - self.t0, target, phase.end - t)
      self.t0 = t
    xy, z = self.profile.evaluate(t - self.t0)
    self.landed = target
    return xy, z


def run_closed_loop(scenario: Scenario, plan: Optional[DcmPlan] = None) -> SimLog:
  params, gains = scenario.params, scenario.gains
  plan = plan or plan_scenario(scenario)
  nominal = list(plan.footsteps)
  last_walking = len(nominal) - 2
  adapter = StepAdapter(params, scenario.weights, scenario.limits, scenario.ds,
                        scenario.refresh_gamma_nom, scenario.qp_tol, scenario.qp_max_iter)
  swing = _SwingTracker(scenario.apex_height)
  monitor = FallMonitor(scenario.fall_radius)

  xi0 = plan.sample(0.0).xi
  state = SimState(0.0, DcmState(xi0, xi0.copy()), *_phase_fields(plan.phase_at(0.0), 0.0))
  records: List[Dict[str, object]] = []
  touchdowns: List[Tuple[int, float]] = []
  cycle_times: List[float] = []
  failures = 0
  fell = False
  prev_phase = plan.phase_at(0.0)
  landing: Optional[int] = None
  logger.info(f"Simulating {len(nominal)} footsteps over {plan.total_duration:.2f}s "
              f"(adapter {'on' if scenario.adapter_enabled else 'off'})")

  while True:
    t = state.time
    phase = plan.phase_at(t)
    if (scenario.adapter_enabled and phase.kind == "SS"
        and phase.swing_index is not None and phase.swing_index <= last_walking):
      started = time.perf_counter()
      try:
        solution = adapter.adapt(state.xi, t, plan, nominal, phase.stance_index)
        plan = replan_after_adapt(solution, plan, phase.swing_index, t)
      except AdapterInfeasibleError as exc:
        failures += 1
        logger.warning(f"t={t:.3f}s stance {phase.stance_index}: {exc}; keeping the previous plan")
      cycle_times.append(time.perf_counter() - started)
      phase = plan.phase_at(t)

    if prev_phase.kind == "SS" and phase.kind == "DS":
      landing = prev_phase.swing_index
    prev_phase = phase
    # the swing foot is down for the whole double support; contact switches at its impact time
    if landing is not None and t >= plan.footsteps[landing].impact_time - 1e-9:
      touchdowns.append((landing, t))
      landing = None

    ref = plan.sample(t)
    vrp = vrp_command(state.xi, ref.xi, ref.xi_dot, gains, params)
    swing_xy, swing_z = swing.update(t, phase, plan)
    push = total_force(scenario.pushes, t)
    records.append(_record(state, ref, vrp, swing_xy, swing_z, phase, plan, push))

    violates = False
    if phase.kind == "SS":
      lim = scenario.limits
      violates = kinematic_violation(plan.footsteps[phase.swing_index].position,
                                     plan.footsteps[phase.stance_index],
                                     plan.footsteps[phase.swing_index].side,
                                     lim.sagittal_max, lim.lateral_min, lim.lateral_max)
    if monitor.update(state, support_centre(phase, plan.footsteps), violates):
      fell = True
      break
    if t >= max(plan.total_duration, scenario.min_duration) - 1e-9:
      break

    current = plan

    def law(tau, xi):
      sample = current.sample(tau)
      return vrp_command(xi, sample.xi, sample.xi_dot, gains, params)

    state = step_sim(state, law, scenario.pushes, scenario.dt, params,
                     timeline=plan, support_margin=scenario.support_margin)
    state = _with_swing(state, swing_xy, swing_z)

  return SimLog(records, nominal, plan, touchdowns, cycle_times, fell,
                state.time if fell else None, monitor.reason, failures)


def _phase_fields(phase: Phase, t: float):
  return phase.kind, t - phase.start, phase.stance_index, phase.swing_index


def _with_swing(state: SimState, xy, z: float) -> SimState:
  return replace(state, swing_position=np.asarray(xy, dtype=float), swing_z=float(z))


def _record(state: SimState, ref, vrp, swing_xy, swing_z: float, phase: Phase,
            plan: DcmPlan, push) -> Dict[str, object]:
  stance = "" if phase.stance_index is None else plan.footsteps[phase.stance_index].side.value
  return {
    "t": state.time,
    "xi_x": state.xi[0], "xi_y": state.xi[1],
    "xi_ref_x": ref.xi[0], "xi_ref_y": ref.xi[1],
    "com_x": state.com[0], "com_y": state.com[1],
    "zmp_ref_x": ref.zmp[0], "zmp_ref_y": ref.zmp[1],
    "vrp_cmd_x": vrp[0], "vrp_cmd_y": vrp[1],
    "swing_x": swing_xy[0], "swing_y": swing_xy[1], "swing_z": swing_z,
    "phase": phase.kind,
    "stance_side": stance,
    "push_x": push[0], "push_y": push[1],
  }


def max_dcm_error(log: SimLog) -> float:
  if not log.records:
    return 0.0
  df = log.trajectory()
  return float(np.max(np.hypot(df["xi_x"] - df["xi_ref_x"], df["xi_y"] - df["xi_ref_y"])))
