"""Nominal footstep planning by sampling a unicycle that rides between the two feet."""
from dataclasses import dataclass, replace
from enum import Enum
import logging
import math
from typing import List, Sequence, Union

import numpy as np

from .errors import FootstepPlanningError, ParameterError
from .lip_model import PlanarVec, planar, rotation

logger = logging.getLogger(__name__)

MAX_INSERTED_STEPS = 64


class Side(str, Enum):
  LEFT = "Left"
  RIGHT = "Right"

  @property
  def other(self) -> "Side":
    return Side.RIGHT if self is Side.LEFT else Side.LEFT

  @property
  def sign(self) -> float:
    return 1.0 if self is Side.LEFT else -1.0


@dataclass(frozen=True)
class Footstep:
  index: int
  side: Side
  position: PlanarVec
  yaw: float
  impact_time: float
  step_duration: float

  def local(self, point: PlanarVec) -> PlanarVec:
    """Express a world point in this footstep's frame."""
    return rotation(self.yaw).T @ (np.asarray(point, dtype=float) - self.position)


@dataclass(frozen=True)
class UnicycleParams:
  foot_lateral_offset: float = 0.08
  nominal_step_duration: float = 0.53
  t_min: float = 0.30
  t_max: float = 1.0
  l_min: float = 0.0
  l_max: float = 0.25
  max_yaw_rate: float = 0.6

  def __post_init__(self):
    if not (0 < self.t_min <= self.nominal_step_duration <= self.t_max):
      raise ParameterError(
        f"Need 0 < t_min <= nominal_step_duration <= t_max, got "
        f"{self.t_min}, {self.nominal_step_duration}, {self.t_max}"
      )
    if not (0 <= self.l_min < self.l_max):
      raise ParameterError(f"Need 0 <= l_min < l_max, got {self.l_min}, {self.l_max}")
    if self.foot_lateral_offset <= 0 or self.max_yaw_rate <= 0:
      raise ParameterError("foot_lateral_offset and max_yaw_rate must be positive")


@dataclass(frozen=True)
class StraightLine:
  length: float
  speed: float

  def __post_init__(self):
    if self.speed <= 0 or self.length < 0:
      raise ParameterError(f"StraightLine needs speed > 0 and length >= 0, got {self}")

  @property
  def path_length(self) -> float:
    return self.length

  def pose_at(self, s: float):
    return planar(s, 0.0), 0.0


@dataclass(frozen=True)
class CircularArc:
  radius: float
  arc_angle: float
  speed: float

  def __post_init__(self):
    if self.speed <= 0 or self.radius <= 0:
      raise ParameterError(f"CircularArc needs speed > 0 and radius > 0, got {self}")

  @property
  def path_length(self) -> float:
    return self.radius * abs(self.arc_angle)

  def pose_at(self, s: float):
    # arc starts at the origin heading +x; positive angles turn left
    if self.path_length == 0.0:
      return planar(0.0, 0.0), 0.0
    theta = self.arc_angle * (s / self.path_length)
    turn = math.copysign(1.0, self.arc_angle)
    x = self.radius * math.sin(abs(theta))
    y = turn * self.radius * (1.0 - math.cos(theta))
    return planar(x, y), theta


PathSpec = Union[StraightLine, CircularArc]


@dataclass(frozen=True)
class PoseSample:
  position: PlanarVec
  yaw: float
  time: float


def sample_unicycle(path: PathSpec, params: UnicycleParams) -> List[PoseSample]:
  """Sample the unicycle on a uniform grid of the nominal step duration."""
  length = path.path_length
  if length == 0.0:
    position, yaw = path.pose_at(0.0)
    return [PoseSample(position, yaw, 0.0)]
  if isinstance(path, CircularArc):
    yaw_rate = path.speed / path.radius
    if yaw_rate > params.max_yaw_rate:
      raise FootstepPlanningError(
        f"Path needs yaw rate {yaw_rate:.3f} rad/s, limit is {params.max_yaw_rate:.3f} rad/s"
      )
  duration = length / path.speed
  period = params.nominal_step_duration
  n = max(1, math.ceil(duration / period - 1e-9))
  samples = []
  for k in range(n + 1):
    t = k * period
    s = length if k == n else min(path.speed * t, length)
    position, yaw = path.pose_at(s)
    samples.append(PoseSample(position, yaw, t))
  return samples


def _place(sample: PoseSample, side: Side, offset: float) -> PlanarVec:
  return sample.position + rotation(sample.yaw) @ np.array([0.0, side.sign * offset])


def _midpoint(a: PoseSample, b: PoseSample) -> PoseSample:
  dyaw = math.atan2(math.sin(b.yaw - a.yaw), math.cos(b.yaw - a.yaw))
  return PoseSample(0.5 * (a.position + b.position), a.yaw + 0.5 * dyaw, 0.5 * (a.time + b.time))


def _initial_pair(sample: PoseSample, params: UnicycleParams) -> List[Footstep]:
  return [
    Footstep(i, side, _place(sample, side, params.foot_lateral_offset), sample.yaw,
             0.0, params.nominal_step_duration)
    for i, side in enumerate((Side.LEFT, Side.RIGHT))
  ]


def plan_footsteps(samples: Sequence[PoseSample], params: UnicycleParams) -> List[Footstep]:
  """Turn unicycle samples into alternating footsteps that respect the step bounds.

  Durations are clamped into [t_min, t_max] first (later samples are shifted in time),
  then steps longer than l_max are split by inserting an intermediate unicycle pose.
  """
  if not samples:
    raise FootstepPlanningError("No unicycle samples to plan from")
  if any(b.time <= a.time for a, b in zip(samples, samples[1:])):
    raise FootstepPlanningError("Unicycle samples must be strictly ordered in time")

  footsteps = _initial_pair(samples[0], params)
  if len(samples) == 1:
    return footsteps

  work = list(samples)
  offset = params.foot_lateral_offset
  side = Side.LEFT
  inserted = 0
  k = 1
  while k < len(work):
    prev = footsteps[-1]
    sample = work[k]
    duration = sample.time - prev.impact_time
    clamped = min(max(duration, params.t_min), params.t_max)
    if clamped != duration:
      shift = clamped - duration
      logger.debug(f"Re-timing sample {k}: duration {duration:.3f}s -> {clamped:.3f}s")
      work[k:] = [replace(s, time=s.time + shift) for s in work[k:]]
      sample = work[k]
    position = _place(sample, side, offset)
    if np.linalg.norm(position - prev.position) > params.l_max:
      inserted += 1
      if inserted > MAX_INSERTED_STEPS:
        raise FootstepPlanningError(
          f"Could not split step {len(footsteps)} below l_max={params.l_max} m"
        )
      logger.debug(f"Step {len(footsteps)} too long, inserting an intermediate pose")
      work.insert(k, _midpoint(work[k - 1], sample))
      continue
    footsteps.append(Footstep(len(footsteps), side, position, sample.yaw,
                              sample.time, sample.time - prev.impact_time))
    side = side.other
    k += 1

  last = footsteps[-1]
  closing_time = last.impact_time + params.nominal_step_duration
  footsteps.append(Footstep(len(footsteps), side, _place(work[-1], side, offset), work[-1].yaw,
                            closing_time, params.nominal_step_duration))
  check_footsteps(footsteps, params)
  return footsteps


def check_footsteps(footsteps: Sequence[Footstep], params: UnicycleParams, tol: float = 1e-9):
  """Raise FootstepPlanningError unless every walking step satisfies the bounds."""
  for prev, nxt in zip(footsteps[1:], footsteps[2:]):
    length = float(np.linalg.norm(nxt.position - prev.position))
    if not (params.l_min - tol <= length <= params.l_max + tol):
      raise FootstepPlanningError(
        f"Step {nxt.index} length {length:.4f} m outside [{params.l_min}, {params.l_max}]"
      )
    duration = nxt.impact_time - prev.impact_time
    if not (params.t_min - tol <= duration <= params.t_max + tol):
      raise FootstepPlanningError(
        f"Step {nxt.index} duration {duration:.4f} s outside [{params.t_min}, {params.t_max}]"
      )
    if nxt.side == prev.side:
      raise FootstepPlanningError(f"Step {nxt.index} does not alternate sides")
    lateral = prev.local(nxt.position)[1]
    if lateral * nxt.side.sign <= 0:
      raise FootstepPlanningError(f"Step {nxt.index} crosses the stance foot")
