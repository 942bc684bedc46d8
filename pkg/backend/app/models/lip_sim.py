"""Reduced-model plant: planar LIP dynamics, scripted pushes, swing feet and falls.

The plant realises the commanded VRP only inside the current support polygon (stance
foot in single support, convex hull of both feet in double support); commands outside
it are projected onto the polygon. The DCM and CoM are advanced with RK4, splitting
each control period at plan breakpoints and push edges so every sub-step integrates a
smooth right-hand side.
"""
from dataclasses import dataclass, field, replace
import logging
from typing import Callable, List, Optional, Sequence, Tuple, Union

import numpy as np
from shapely import affinity
from shapely.geometry import Point, Polygon, box
from shapely.ops import nearest_points, unary_union

from .dcm_planner import DcmPlan, Phase
from .errors import ParameterError
from .footstep_planner import Footstep, Side
from .lip_model import ZERO, DcmState, LipParams, PlanarVec, as_planar, cubic_hermite, dcm_rate, eval_cubic

logger = logging.getLogger(__name__)

FOOT_LENGTH = 0.19
FOOT_WIDTH = 0.09
DEFAULT_SUPPORT_MARGIN = 0.02
DEFAULT_APEX_HEIGHT = 0.03
DEFAULT_FALL_RADIUS = 0.5
FALL_PATIENCE = 3
_SPLIT_TOL = 1e-12

VrpLaw = Callable[[float, PlanarVec], PlanarVec]


@dataclass(frozen=True)
class PushEvent:
  t_start: float
  duration: float
  force: PlanarVec

  def __post_init__(self):
    if not self.duration > 0:
      raise ParameterError(f"Push duration must be positive, got {self.duration}")
    object.__setattr__(self, "force", as_planar(self.force))

  @property
  def t_end(self) -> float:
    return self.t_start + self.duration

  def active(self, t: float) -> bool:
    return self.t_start <= t < self.t_end


def total_force(pushes: Sequence[PushEvent], t: float) -> PlanarVec:
  force = np.zeros(2)
  for push in pushes:
    if push.active(t):
      force += push.force
  return force


@dataclass(frozen=True)
class SimState:
  time: float
  dcm_state: DcmState
  phase: str = "DS"
  phase_elapsed: float = 0.0
  stance_index: Optional[int] = None
  swing_index: Optional[int] = None
  swing_position: PlanarVec = field(default_factory=lambda: np.zeros(2))
  swing_z: float = 0.0

  @property
  def xi(self) -> PlanarVec:
    return self.dcm_state.xi

  @property
  def com(self) -> PlanarVec:
    return self.dcm_state.com


# -- support polygons ---------------------------------------------------------

def foot_polygon(step: Footstep, margin: float = 0.0) -> Polygon:
  half_l = 0.5 * FOOT_LENGTH - margin
  half_w = 0.5 * FOOT_WIDTH - margin
  if half_l <= 0 or half_w <= 0:
    raise ParameterError(f"support margin {margin} leaves no foot area")
  rect = box(-half_l, -half_w, half_l, half_w)
  rect = affinity.rotate(rect, step.yaw, origin=(0.0, 0.0), use_radians=True)
  return affinity.translate(rect, float(step.position[0]), float(step.position[1]))


def support_polygon(phase: Phase, footsteps: Sequence[Footstep], margin: float = DEFAULT_SUPPORT_MARGIN) -> Polygon:
  feet = [foot_polygon(footsteps[i], margin) for i in phase.support]
  if len(feet) == 1:
    return feet[0]
  return unary_union(feet).convex_hull


def support_centre(phase: Phase, footsteps: Sequence[Footstep]) -> PlanarVec:
  return np.mean([footsteps[i].position for i in phase.support], axis=0)


def project_into(polygon: Polygon, point: PlanarVec) -> PlanarVec:
  p = Point(float(point[0]), float(point[1]))
  if polygon.covers(p):
    return np.asarray(point, dtype=float)
  nearest = nearest_points(polygon, p)[0]
  return np.array([nearest.x, nearest.y])


# -- swing foot -----------------------------------------------------------------

@dataclass(frozen=True)
class SwingProfile:
  start: PlanarVec
  end: PlanarVec
  duration: float
  xy_coeffs: np.ndarray  # (4, 2)
  z_pieces: Tuple[Tuple[float, float, np.ndarray], ...]  # (t0, length, cubic coeffs)
  apex_height: float

  def _z(self, t: float) -> Tuple[float, float]:
    for t0, length, coeffs in self.z_pieces:
      if t <= t0 + length:
        z, dz = eval_cubic(coeffs, min(max(t - t0, 0.0), length))
        return max(float(z), 0.0), float(dz)
    return 0.0, 0.0

  def evaluate(self, t: float) -> Tuple[PlanarVec, float]:
    t = min(max(t, 0.0), self.duration)
    if t >= self.duration:
      return self.end.copy(), 0.0
    xy, _ = eval_cubic(self.xy_coeffs, t)
    return xy, self._z(t)[0]

  def velocity(self, t: float) -> Tuple[PlanarVec, float]:
    t = min(max(t, 0.0), self.duration)
    _, vxy = eval_cubic(self.xy_coeffs, t)
    return vxy, self._z(t)[1]

  @property
  def apex_time(self) -> float:
    return self.z_pieces[0][1] if len(self.z_pieces) > 1 else 0.0

  def retime(self, t: float, new_end: PlanarVec, remaining: float) -> "SwingProfile":
    """Profile starting from the state at t that lands on new_end after remaining seconds."""
    if not remaining > 0:
      raise ParameterError(f"Remaining swing time must be positive, got {remaining}")
    xy, z = self.evaluate(t)
    vxy, vz = self.velocity(t)
    new_end = as_planar(new_end)
    if t < self.apex_time:
      rise = min(self.apex_time - t, 0.5 * remaining)
      z_pieces = (
        (0.0, rise, cubic_hermite(z, vz, self.apex_height, 0.0, rise)),
        (rise, remaining - rise, cubic_hermite(self.apex_height, 0.0, 0.0, 0.0, remaining - rise)),
      )
    else:
      z_pieces = ((0.0, remaining, cubic_hermite(z, vz, 0.0, 0.0, remaining)),)
    return SwingProfile(xy, new_end, remaining, cubic_hermite(xy, vxy, new_end, ZERO, remaining),
                        z_pieces, self.apex_height)


def make_swing(start: PlanarVec, end: PlanarVec, duration: float,
               apex_height: float = DEFAULT_APEX_HEIGHT) -> SwingProfile:
  if not duration > 0:
    raise ParameterError(f"Swing duration must be positive, got {duration}")
  start, end = as_planar(start), as_planar(end)
  half = 0.5 * duration
  z_pieces = (
    (0.0, half, cubic_hermite(0.0, 0.0, apex_height, 0.0, half)),
    (half, half, cubic_hermite(apex_height, 0.0, 0.0, 0.0, half)),
  )
  return SwingProfile(start, end, duration, cubic_hermite(start, ZERO, end, ZERO, duration),
                      z_pieces, apex_height)


# -- dynamics -------------------------------------------------------------------

def _split_points(t0: float, t1: float, pushes: Sequence[PushEvent], timeline: Optional[DcmPlan]) -> List[float]:
  edges = set()
  for push in pushes:
    edges.update(e for e in (push.t_start, push.t_end) if t0 + _SPLIT_TOL < e < t1 - _SPLIT_TOL)
  if timeline is not None:
    edges.update(e for e in timeline.breakpoints(t0, t1) if t0 + _SPLIT_TOL < e < t1 - _SPLIT_TOL)
    edges.update(p.start for p in timeline.phases if t0 + _SPLIT_TOL < p.start < t1 - _SPLIT_TOL)
  return [t0] + sorted(edges) + [t1]


def _rk4(xi: PlanarVec, com: PlanarVec, t: float, h: float, vrp_at, force: PlanarVec,
         params: LipParams) -> Tuple[PlanarVec, PlanarVec]:
  b = params.time_constant

  def f(tau, x, c):
    return dcm_rate(x, vrp_at(tau, x), params, force), (x - c) / b

  k1x, k1c = f(t, xi, com)
  k2x, k2c = f(t + 0.5 * h, xi + 0.5 * h * k1x, com + 0.5 * h * k1c)
  k3x, k3c = f(t + 0.5 * h, xi + 0.5 * h * k2x, com + 0.5 * h * k2c)
  k4x, k4c = f(t + h, xi + h * k3x, com + h * k3c)
  return (xi + (h / 6.0) * (k1x + 2.0 * k2x + 2.0 * k3x + k4x),
          com + (h / 6.0) * (k1c + 2.0 * k2c + 2.0 * k3c + k4c))


def step_sim(
  state: SimState,
  vrp_cmd: Union[PlanarVec, VrpLaw],
  pushes: Sequence[PushEvent],
  dt: float,
  params: LipParams,
  timeline: Optional[DcmPlan] = None,
  support_margin: Optional[float] = DEFAULT_SUPPORT_MARGIN,
) -> SimState:
  """Advance the plant by dt under the commanded VRP (a point or a law (t, xi) -> vrp).

  With a timeline the VRP is limited to the support polygon of the phase being
  integrated and the phase bookkeeping follows the plan; without one the VRP is
  unconstrained and only the phase clock advances.
  """
  if not dt > 0:
    raise ParameterError(f"dt must be positive, got {dt}")
  law: VrpLaw = vrp_cmd if callable(vrp_cmd) else (lambda _t, _xi, v=as_planar(vrp_cmd): v)
  t0, t1 = state.time, state.time + dt
  xi, com = state.xi, state.com
  points = _split_points(t0, t1, pushes, timeline)
  for a, b in zip(points, points[1:]):
    mid = 0.5 * (a + b)
    force = total_force(pushes, mid)
    vrp_at = law
    if timeline is not None and support_margin is not None:
      polygon = support_polygon(timeline.phase_at(mid), timeline.footsteps, support_margin)
      vrp_at = lambda tau, x, poly=polygon: project_into(poly, law(tau, x))
    xi, com = _rk4(xi, com, a, b - a, vrp_at, force, params)

  dcm_state = DcmState(xi, com)
  if timeline is None:
    return replace(state, time=t1, dcm_state=dcm_state, phase_elapsed=state.phase_elapsed + dt)
  phase = timeline.phase_at(t1)
  return replace(state, time=t1, dcm_state=dcm_state, phase=phase.kind,
                 phase_elapsed=t1 - phase.start, stance_index=phase.stance_index,
                 swing_index=phase.swing_index)


def realised_vrp(t: float, xi: PlanarVec, vrp_cmd: PlanarVec, timeline: DcmPlan,
                 support_margin: float = DEFAULT_SUPPORT_MARGIN) -> PlanarVec:
  polygon = support_polygon(timeline.phase_at(t), timeline.footsteps, support_margin)
  return project_into(polygon, vrp_cmd)


# -- falls ------------------------------------------------------------------------

def kinematic_violation(target: PlanarVec, stance: Footstep, swing_side: Side,
                        sagittal_max: float, lateral_min: float, lateral_max: float,
                        tol: float = 1e-9) -> bool:
  local = stance.local(target)
  lateral = local[1] * swing_side.sign
  return bool(abs(local[0]) > sagittal_max + tol
              or not (lateral_min - tol <= lateral <= lateral_max + tol))


def detect_fall(state: SimState, centre: PlanarVec, fall_radius: float = DEFAULT_FALL_RADIUS,
                kinematic_violations: int = 0, patience: int = FALL_PATIENCE) -> bool:
  return bool(np.linalg.norm(state.xi - centre) > fall_radius or kinematic_violations >= patience)


class FallMonitor:
  """Counts consecutive cycles with an unreachable swing target."""

  def __init__(self, fall_radius: float = DEFAULT_FALL_RADIUS, patience: int = FALL_PATIENCE):
    self.fall_radius = fall_radius
    self.patience = patience
    self.violations = 0
    self.reason: Optional[str] = None

  def update(self, state: SimState, centre: PlanarVec, target_violates: bool = False) -> bool:
    self.violations = self.violations + 1 if target_violates else 0
    if not detect_fall(state, centre, self.fall_radius, self.violations, self.patience):
      return False
    distance = float(np.linalg.norm(state.xi - centre))
    if distance > self.fall_radius:
      self.reason = f"DCM {distance:.3f} m from the support centre"
    else:
      self.reason = f"swing target unreachable for {self.violations} cycles"
    logger.warning(f"Fall detected at t={state.time:.3f}s: {self.reason}")
    return True
