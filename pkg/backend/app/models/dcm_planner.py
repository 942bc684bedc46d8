"""Nominal DCM reference from a footstep sequence.

Single-support pieces follow the exponential DCM solution anchored on the stance foot,
computed by backward recursion from the final ZMP. Consecutive pieces are joined by
cubic double-support pieces that straddle the nominal transition instant, which keeps
the DCM C1 and the reconstructed ZMP continuous.
"""
from bisect import bisect_right
from dataclasses import dataclass, field
import math
from typing import Dict, List, NamedTuple, Optional, Sequence, Tuple

import numpy as np

from .errors import DcmPlanError
from .footstep_planner import Footstep
from .lip_model import LipParams, PlanarVec, as_planar, cubic_hermite, eval_cubic

DOMAIN_TOL = 1e-9


@dataclass(frozen=True)
class SsSegment:
  zmp: PlanarVec
  xi_ios: PlanarVec
  xi_eos: PlanarVec
  duration: float
  start_time: float = 0.0

  @property
  def end_time(self) -> float:
    return self.start_time + self.duration


@dataclass(frozen=True)
class DsSegment:
  poly_coeffs: np.ndarray  # (4, 2): c0 + c1 t + c2 t^2 + c3 t^3
  duration: float
  start_time: float = 0.0


class PlanSample(NamedTuple):
  xi: PlanarVec
  xi_dot: PlanarVec
  zmp: PlanarVec


@dataclass(frozen=True)
class Phase:
  kind: str  # "SS" or "DS"
  start: float
  end: float
  support: Tuple[int, ...]
  stance_index: Optional[int] = None
  swing_index: Optional[int] = None

  @property
  def duration(self) -> float:
    return self.end - self.start


def backward_recursion(
  zmp_points: Sequence[PlanarVec],
  durations: Sequence[float],
  params: LipParams,
  eos_overrides: Optional[Dict[int, PlanarVec]] = None,
) -> List[Tuple[PlanarVec, PlanarVec]]:
  """Boundary DCM values (ios, eos) of every single-support segment.

  Segment i keeps its ZMP at zmp_points[i] for durations[i] seconds; the last point
  is the final ZMP, where the DCM comes to rest. eos_overrides pins the end-of-step
  DCM of selected segments instead of taking it from the following segment.
  """
  if len(zmp_points) < 2:
    raise DcmPlanError("backward_recursion needs at least two ZMP points")
  if len(durations) != len(zmp_points) - 1:
    raise DcmPlanError(
      f"Expected {len(zmp_points) - 1} durations, got {len(durations)}"
    )
  if any(d <= 0 for d in durations):
    raise DcmPlanError("Segment durations must be positive")
  overrides = eos_overrides or {}
  b = params.time_constant
  points = [as_planar(p) for p in zmp_points]
  bounds: List[Tuple[PlanarVec, PlanarVec]] = [None] * len(durations)  # type: ignore
  eos = points[-1]
  for i in range(len(durations) - 1, -1, -1):
    if i in overrides:
      eos = as_planar(overrides[i])
    r = points[i]
    ios = r + math.exp(-durations[i] / b) * (eos - r)
    bounds[i] = (ios, eos)
    eos = ios
  return bounds


def eval_ss(segment: SsSegment, t: float, params: LipParams) -> Tuple[PlanarVec, PlanarVec]:
  """DCM position and velocity t seconds after the segment's nominal start."""
  if t < -DOMAIN_TOL or t > segment.duration + DOMAIN_TOL:
    raise DcmPlanError(f"t={t} outside single-support domain [0, {segment.duration}]")
  b = params.time_constant
  if t <= 0.0:
    xi = segment.xi_ios.copy()
  elif t >= segment.duration:
    xi = segment.xi_eos.copy()
  else:
    xi = segment.zmp + math.exp(t / b) * (segment.xi_ios - segment.zmp)
  return xi, (xi - segment.zmp) / b


def eval_ds(segment: DsSegment, t: float) -> Tuple[PlanarVec, PlanarVec]:
  return eval_cubic(segment.poly_coeffs, t)


def smooth_ds(prev: SsSegment, nxt: SsSegment, ds_duration: float, params: LipParams) -> DsSegment:
  """Cubic bridging prev and nxt over a window centred on their nominal transition."""
  if not ds_duration > 0:
    raise DcmPlanError(f"ds_duration must be positive, got {ds_duration}")
  if ds_duration > prev.duration + DOMAIN_TOL or ds_duration > nxt.duration + DOMAIN_TOL:
    raise DcmPlanError(
      f"ds_duration {ds_duration:.3f}s exceeds an adjacent single-support duration "
      f"({prev.duration:.3f}s, {nxt.duration:.3f}s)"
    )
  half = 0.5 * ds_duration
  p0, v0 = eval_ss(prev, prev.duration - half, params)
  p1, v1 = eval_ss(nxt, half, params)
  return DsSegment(cubic_hermite(p0, v0, p1, v1, ds_duration), ds_duration, prev.end_time - half)


@dataclass(frozen=True)
class DcmPlan:
  """Immutable once built; pieces are (active_from, segment) in time order.

  Replanning builds a new plan, so one instance can be shared by the controller law
  and the logs.
  """
  footsteps: List[Footstep]
  segments: List[SsSegment]
  pieces: List[Tuple[float, object]]
  phases: List[Phase]
  params: LipParams
  ds_duration: float
  initial_transfer: float
  final_hold: float
  _starts: Tuple[float, ...] = field(init=False, repr=False, compare=False)
  _phase_starts: Tuple[float, ...] = field(init=False, repr=False, compare=False)

  def __post_init__(self):
    object.__setattr__(self, "_starts", tuple(start for start, _ in self.pieces))
    object.__setattr__(self, "_phase_starts", tuple(phase.start for phase in self.phases))

  @property
  def total_duration(self) -> float:
    return self.segments[-1].end_time

  @property
  def final_zmp(self) -> PlanarVec:
    return self.segments[-1].zmp

  @property
  def final_dcm(self) -> PlanarVec:
    return self.segments[-1].xi_eos

  def sample(self, t: float) -> PlanSample:
    t = min(max(t, 0.0), self.total_duration)
    _, piece = self.pieces[max(0, bisect_right(self._starts, t) - 1)]
    local = t - piece.start_time
    if isinstance(piece, DsSegment):
      xi, xi_dot = eval_ds(piece, min(max(local, 0.0), piece.duration))
    else:
      xi, xi_dot = eval_ss(piece, min(max(local, 0.0), piece.duration), self.params)
    return PlanSample(xi, xi_dot, xi - self.params.time_constant * xi_dot)

  def phase_at(self, t: float) -> Phase:
    return self.phases[max(0, bisect_right(self._phase_starts, t) - 1)]

  def breakpoints(self, t0: float, t1: float) -> List[float]:
    """Piece boundaries strictly inside (t0, t1)."""
    return [s for s in self._starts[1:] if t0 < s < t1]

  def sample_grid(self, dt: float) -> Tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
    times = np.arange(0.0, self.total_duration + 0.5 * dt, dt)
    xi, xi_dot, zmp = zip(*(self.sample(t) for t in times))
    return times, np.array(xi), np.array(xi_dot), np.array(zmp)


def _anchors(footsteps: Sequence[Footstep]) -> List[PlanarVec]:
  n = len(footsteps)
  first = 0.5 * (footsteps[0].position + footsteps[1].position)
  last = 0.5 * (footsteps[n - 2].position + footsteps[n - 1].position)
  return [first] + [f.position for f in footsteps[1:n - 1]] + [last]


def build_plan(
  footsteps: Sequence[Footstep],
  ds_duration: float,
  params: LipParams,
  initial_transfer: Optional[float] = None,
  final_hold: Optional[float] = None,
  eos_overrides: Optional[Dict[int, PlanarVec]] = None,
) -> DcmPlan:
  """Build the piecewise DCM reference for a footstep sequence.

  Segment 0 holds the ZMP between the initial feet for initial_transfer seconds,
  segment j >= 1 keeps it on footstep j until footstep j+1 lands, and the last
  anchor (between the final stance pair) is held for final_hold seconds.
  """
  footsteps = list(footsteps)
  n = len(footsteps)
  if n < 2:
    raise DcmPlanError("A plan needs at least the initial stance pair")
  if not ds_duration > 0:
    raise DcmPlanError(f"ds_duration must be positive, got {ds_duration}")
  if final_hold is None:
    final_hold = footsteps[-1].step_duration
  anchors = _anchors(footsteps)

  if n == 2:
    standing = SsSegment(anchors[0], anchors[0].copy(), anchors[0].copy(), final_hold, 0.0)
    phases = [Phase("DS", 0.0, final_hold, (0, 1))]
    return DcmPlan(footsteps, [standing], [(0.0, standing)], phases, params,
                   ds_duration, 0.0, final_hold)

  if initial_transfer is None:
    initial_transfer = 0.5 * footsteps[2].step_duration
  starts = [0.0, initial_transfer] + [f.impact_time for f in footsteps[2:]]
  durations = [b - a for a, b in zip(starts, starts[1:])]
  if any(d <= 0 for d in durations):
    raise DcmPlanError("Footstep impact times must increase after the initial transfer")
  bounds = backward_recursion(anchors, durations, params, eos_overrides)
  segments = [
    SsSegment(anchors[j], ios, eos, durations[j], starts[j])
    for j, (ios, eos) in enumerate(bounds)
  ]
  segments.append(SsSegment(anchors[-1], anchors[-1].copy(), anchors[-1].copy(), final_hold, starts[-1]))

  half = 0.5 * ds_duration
  pieces: List[Tuple[float, object]] = []
  for j, seg in enumerate(segments):
    pieces.append((seg.start_time if j == 0 else seg.start_time + half, seg))
    if j + 1 < len(segments):
      ds = smooth_ds(seg, segments[j + 1], ds_duration, params)
      pieces.append((ds.start_time, ds))

  total = segments[-1].end_time
  phases = [Phase("DS", 0.0, starts[1] + half, (0, 1))]
  for j in range(1, n - 1):
    phases.append(Phase("SS", starts[j] + half, starts[j + 1] - half, (j,), j, j + 1))
    end = starts[j + 1] + half if j < n - 2 else total
    phases.append(Phase("DS", starts[j + 1] - half, end, (j, j + 1)))

  return DcmPlan(footsteps, segments, pieces, phases, params,
                 ds_duration, initial_transfer, final_hold)
