"""Online step position and timing adaptation during single support.

Every control cycle the adapter solves a 5-variable QP in [rT_x, rT_y, sigma, gamma_x,
gamma_y]: the next ZMP, the exponential timing variable sigma = e^{T/b} of the remaining
single-support time, and the DCM offset at touchdown. The only equality is the
boundary coupling of the exponential ZMP segment, which ties the three to the DCM
measured right now; the inequalities keep the step inside a kinematic rectangle in the
stance-foot frame and the timing inside [sigma_min, sigma_max].
"""
from dataclasses import dataclass, field, replace
import logging
import math
from typing import Dict, Optional, Sequence, Tuple

import numpy as np

from .dcm_planner import DcmPlan, build_plan
from .errors import AdapterInfeasibleError, ParameterError
from .footstep_planner import Footstep, Side
from .lip_model import LipParams, PlanarVec, as_planar, rotation
from .qp_dense import DEFAULT_MAX_ITER, DEFAULT_TOL, QpProblem, QpStatus, solve
from .zmp_exp_interp import coupling_residual, coupling_terms, is_consistent

logger = logging.getLogger(__name__)

MIN_REMAINING_TIME = 0.05
COUPLING_TOL = 1e-6

N_VARS = 5
RT = slice(0, 2)
SIGMA = 2
GAMMA = slice(3, 5)


@dataclass(frozen=True)
class AdapterNominal:
  rT_nom: PlanarVec
  T_nom: float
  gamma_nom: PlanarVec
  elapsed: float = 0.0
  min_remaining: float = MIN_REMAINING_TIME

  @property
  def remaining(self) -> float:
    return max(self.T_nom - self.elapsed, self.min_remaining)

  def sigma(self, params: LipParams) -> float:
    return math.exp(self.remaining / params.time_constant)

  def coupling_gap(self, xi_now: PlanarVec, r1: PlanarVec, r2: PlanarVec, params: LipParams) -> PlanarVec:
    """How far the nominal target is from the reachable set given the DCM measured now."""
    return coupling_residual(xi_now, None, r1, r2, self.rT_nom, self.gamma_nom, self.sigma(params))


@dataclass(frozen=True)
class AdapterWeights:
  alpha1: float = 1.0
  alpha2: float = 5.0
  alpha3: float = 0.5

  def __post_init__(self):
    if min(self.alpha1, self.alpha2, self.alpha3) <= 0:
      raise ParameterError(
        f"Adapter weights must be positive, got ({self.alpha1}, {self.alpha2}, {self.alpha3})"
      )


@dataclass(frozen=True)
class AdapterBounds:
  """Box on rT expressed in the frame (origin, yaw), plus the sigma interval."""
  rT_min: PlanarVec
  rT_max: PlanarVec
  sigma_min: float
  sigma_max: float
  origin: PlanarVec = field(default_factory=lambda: np.zeros(2))
  yaw: float = 0.0

  def __post_init__(self):
    if not np.all(np.asarray(self.rT_min) < np.asarray(self.rT_max)):
      raise ParameterError(f"rT_min {self.rT_min} must be below rT_max {self.rT_max}")
    if not 1.0 < self.sigma_min <= self.sigma_max:
      raise ParameterError(
        f"Need 1 < sigma_min <= sigma_max, got {self.sigma_min}, {self.sigma_max}"
      )

  def contains(self, rT: PlanarVec, tol: float = 1e-9) -> bool:
    local = rotation(self.yaw).T @ (np.asarray(rT) - self.origin)
    return bool(np.all(local >= self.rT_min - tol) and np.all(local <= self.rT_max + tol))


@dataclass(frozen=True)
class StepLimits:
  """Leg reach in the stance-foot frame and step-duration limits."""
  sagittal_max: float = 0.25
  lateral_min: float = 0.07
  lateral_max: float = 0.30
  t_min: float = 0.30
  t_max: float = 1.0
  epsilon: float = MIN_REMAINING_TIME

  def __post_init__(self):
    if not (self.sagittal_max > 0 and 0 <= self.lateral_min < self.lateral_max):
      raise ParameterError("Step limits need sagittal_max > 0 and 0 <= lateral_min < lateral_max")
    if not 0 < self.t_min <= self.t_max:
      raise ParameterError(f"Need 0 < t_min <= t_max, got {self.t_min}, {self.t_max}")

  def box(self, swing_side: Side) -> Tuple[PlanarVec, PlanarVec]:
    if swing_side is Side.LEFT:
      return np.array([-self.sagittal_max, self.lateral_min]), np.array([self.sagittal_max, self.lateral_max])
    return np.array([-self.sagittal_max, -self.lateral_max]), np.array([self.sagittal_max, -self.lateral_min])


@dataclass(frozen=True)
class AdapterSolution:
  rT: PlanarVec
  sigma: float
  T_adapted: float
  gammaT: PlanarVec
  xiT: PlanarVec
  status: QpStatus = QpStatus.OPTIMAL
  kkt_residual: float = 0.0
  active_set: Tuple[int, ...] = ()
  iterations: int = 0


def min_remaining_time(limits: StepLimits, ds_duration: float = 0.0) -> float:
  return max(limits.epsilon, 0.5 * ds_duration)


def timing_bounds(
  elapsed: float, limits: StepLimits, params: LipParams, ds_duration: float = 0.0
) -> Tuple[float, float]:
  """sigma interval for the remaining single support, never shorter than tau_min."""
  b = params.time_constant
  tau_min = min_remaining_time(limits, ds_duration)
  return (
    math.exp(max(limits.t_min - elapsed, tau_min) / b),
    math.exp(max(limits.t_max - elapsed, tau_min) / b),
  )


def stance_bounds(
  stance: Footstep, swing_side: Side, elapsed: float, limits: StepLimits, params: LipParams,
  ds_duration: float = 0.0,
) -> AdapterBounds:
  lo, hi = limits.box(swing_side)
  sigma_min, sigma_max = timing_bounds(elapsed, limits, params, ds_duration)
  return AdapterBounds(lo, hi, sigma_min, sigma_max, stance.position, stance.yaw)


def build_problem(
  xi_now: PlanarVec,
  r1: PlanarVec,
  r2: PlanarVec,
  nominal: AdapterNominal,
  weights: AdapterWeights,
  bounds: AdapterBounds,
  params: LipParams,
) -> QpProblem:
  xi_now, r1, r2 = as_planar(xi_now), as_planar(r1), as_planar(r2)
  if bounds.sigma_min > bounds.sigma_max:
    raise ParameterError("sigma_min exceeds sigma_max")
  diag = np.array([weights.alpha1, weights.alpha1, weights.alpha3, weights.alpha2, weights.alpha2])
  H = np.diag(2.0 * diag)
  target = np.concatenate([as_planar(nominal.rT_nom), [nominal.sigma(params)], as_planar(nominal.gamma_nom)])
  g = -2.0 * diag * target

  c, b_eq = coupling_terms(xi_now, r1, r2)
  A_eq = np.array([
    [1.0, 0.0, c[0], 1.0, 0.0],
    [0.0, 1.0, c[1], 0.0, 1.0],
  ])

  R = rotation(bounds.yaw)
  offset = R.T @ np.asarray(bounds.origin, dtype=float)
  A_in = np.zeros((6, N_VARS))
  A_in[0:2, RT] = R.T
  A_in[2:4, RT] = -R.T
  A_in[4, SIGMA] = 1.0
  A_in[5, SIGMA] = -1.0
  b_in = np.concatenate([
    bounds.rT_max + offset,
    -(bounds.rT_min + offset),
    [bounds.sigma_max, -bounds.sigma_min],
  ])
  return QpProblem(H, g, A_eq, b_eq, A_in, b_in)


def decode(z: np.ndarray, params: LipParams) -> Tuple[PlanarVec, float, float, PlanarVec, PlanarVec]:
  rT, sigma, gammaT = z[RT].copy(), float(z[SIGMA]), z[GAMMA].copy()
  return rT, sigma, params.time_constant * math.log(sigma), gammaT, gammaT + rT


def adapt(
  xi_now: PlanarVec,
  elapsed: float,
  stance: Footstep,
  swing_side: Side,
  nominal: AdapterNominal,
  weights: AdapterWeights,
  limits: StepLimits,
  params: LipParams,
  r2: Optional[PlanarVec] = None,
  ds_duration: float = 0.0,
  tol: float = DEFAULT_TOL,
  max_iter: int = DEFAULT_MAX_ITER,
  active_set: Optional[Sequence[int]] = None,
) -> AdapterSolution:
  """One adapter cycle: the ZMP runs from the stance centre to r2 (default: stays put)."""
  r1 = stance.position
  r2 = r1 if r2 is None else r2
  bounds = stance_bounds(stance, swing_side, elapsed, limits, params, ds_duration)
  nominal = replace(nominal, elapsed=elapsed, min_remaining=min_remaining_time(limits, ds_duration))
  problem = build_problem(xi_now, r1, r2, nominal, weights, bounds, params)
  sol = solve(problem, tol=tol, max_iter=max_iter, active_set=active_set)
  if sol.status is not QpStatus.OPTIMAL:
    raise AdapterInfeasibleError(
      f"Step adapter QP returned {sol.status.value} at elapsed={elapsed:.3f}s", sol.status.value
    )
  rT, sigma, T_adapted, gammaT, xiT = decode(sol.z, params)
  residual = coupling_residual(xi_now, xiT, r1, r2, rT, gammaT, sigma)
  if not is_consistent(residual, COUPLING_TOL):
    raise AdapterInfeasibleError(
      f"Adapted step misses the DCM coupling by {np.max(np.abs(residual)):.2e} at elapsed={elapsed:.3f}s",
      "Inconsistent",
    )
  return AdapterSolution(rT, sigma, T_adapted, gammaT, xiT, sol.status,
                         sol.kkt_residual, sol.active_set, sol.iterations)


def replan_after_adapt(
  solution: AdapterSolution, plan: DcmPlan, next_index: int, t_solve: float
) -> DcmPlan:
  """Rebuild the reference with the next footstep moved to rT and landing at t_solve + T_adapted.

  Footsteps after it keep their positions and are shifted by the same amount of time.
  The stance segment ends at xiT, so the new plan passes through the DCM the QP saw.
  """
  footsteps = list(plan.footsteps)
  if not 2 <= next_index < len(footsteps):
    raise ParameterError(f"next_index {next_index} does not name a walking footstep")
  nxt = footsteps[next_index]
  stance = footsteps[next_index - 1]
  impact = t_solve + solution.T_adapted
  shift = impact - nxt.impact_time
  footsteps[next_index] = replace(
    nxt, position=solution.rT.copy(), impact_time=impact, step_duration=impact - stance.impact_time
  )
  for k in range(next_index + 1, len(footsteps)):
    footsteps[k] = replace(footsteps[k], impact_time=footsteps[k].impact_time + shift)
  return build_plan(
    footsteps, plan.ds_duration, plan.params,
    initial_transfer=plan.initial_transfer,
    final_hold=plan.final_hold,
    eos_overrides={next_index - 1: solution.xiT},
  )


class StepAdapter:
  """Adapter state carried across control cycles: warm start and frozen gamma_nom."""

  def __init__(
    self,
    params: LipParams,
    weights: AdapterWeights = AdapterWeights(),
    limits: StepLimits = StepLimits(),
    ds_duration: float = 0.0,
    refresh_gamma_nom: bool = True,
    tol: float = DEFAULT_TOL,
    max_iter: int = DEFAULT_MAX_ITER,
  ):
    self.params = params
    self.weights = weights
    self.limits = limits
    self.ds_duration = ds_duration
    self.refresh_gamma_nom = refresh_gamma_nom
    self.tol = tol
    self.max_iter = max_iter
    self.last_solution: Optional[AdapterSolution] = None
    self._active_set: Tuple[int, ...] = ()
    self._frozen_gamma: Dict[int, PlanarVec] = {}

  def reset(self):
    self.last_solution = None
    self._active_set = ()
    self._frozen_gamma.clear()

  def nominal_for(
    self, plan: DcmPlan, nominal_steps: Sequence[Footstep], stance_index: int
  ) -> AdapterNominal:
    nxt = stance_index + 1
    gamma = plan.segments[nxt].xi_ios - plan.segments[nxt].zmp
    if not self.refresh_gamma_nom:
      gamma = self._frozen_gamma.setdefault(stance_index, gamma)
    return AdapterNominal(nominal_steps[nxt].position, nominal_steps[nxt].step_duration, gamma)

  def adapt(
    self,
    xi_now: PlanarVec,
    t: float,
    plan: DcmPlan,
    nominal_steps: Sequence[Footstep],
    stance_index: int,
  ) -> AdapterSolution:
    stance = plan.footsteps[stance_index]
    nominal = self.nominal_for(plan, nominal_steps, stance_index)
    solution = adapt(
      xi_now, t - stance.impact_time, stance, plan.footsteps[stance_index + 1].side,
      nominal, self.weights, self.limits, self.params,
      ds_duration=self.ds_duration, tol=self.tol, max_iter=self.max_iter,
      active_set=self._active_set,
    )
    self._active_set = solution.active_set
    self.last_solution = solution
    return solution
