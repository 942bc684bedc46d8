"""Planar linear-inverted-pendulum model shared by planner, controller and simulator.

All planar quantities are numpy arrays of shape (2,) expressed in the world frame.
"""
from dataclasses import dataclass
import math

import numpy as np
import numpy.typing as npt

from .errors import ParameterError

PlanarVec = npt.NDArray[np.float64]

ZERO = np.zeros(2)


def planar(x: float, y: float) -> PlanarVec:
  vec = np.array([x, y], dtype=float)
  if not np.all(np.isfinite(vec)):
    raise ParameterError(f"Planar vector must be finite, got ({x}, {y})")
  return vec


def as_planar(value) -> PlanarVec:
  """Coerce a length-2 sequence into a finite planar vector."""
  vec = np.asarray(value, dtype=float).reshape(2)
  if not np.all(np.isfinite(vec)):
    raise ParameterError(f"Planar vector must be finite, got {value!r}")
  return vec


def rotation(yaw: float) -> npt.NDArray[np.float64]:
  c, s = math.cos(yaw), math.sin(yaw)
  return np.array([[c, -s], [s, c]])


def cubic_hermite(p0, v0, p1, v1, T: float) -> np.ndarray:
  """Coefficients (c0, c1, c2, c3) of the cubic from (p0, v0) at 0 to (p1, v1) at T."""
  p0, v0, p1, v1 = (np.asarray(v, dtype=float) for v in (p0, v0, p1, v1))
  c2 = (3.0 * (p1 - p0) - (2.0 * v0 + v1) * T) / T ** 2
  c3 = (2.0 * (p0 - p1) + (v0 + v1) * T) / T ** 3
  return np.array([p0, v0, c2, c3])


def eval_cubic(c: np.ndarray, t: float):
  """Value and first derivative of c0 + c1 t + c2 t^2 + c3 t^3."""
  return c[0] + t * (c[1] + t * (c[2] + t * c[3])), c[1] + t * (2.0 * c[2] + 3.0 * t * c[3])


@dataclass(frozen=True)
class LipParams:
  mass: float = 33.0
  com_height: float = 0.53
  gravity: float = 9.81

  def __post_init__(self):
    if not (self.mass > 0 and self.com_height > 0 and self.gravity > 0):
      raise ParameterError(
        f"mass, com_height and gravity must be positive "
        f"(got m={self.mass}, z0={self.com_height}, g={self.gravity})"
      )

  @property
  def time_constant(self) -> float:
    # always derived, never stored: b = sqrt(z0 / g)
    return math.sqrt(self.com_height / self.gravity)

  @property
  def b(self) -> float:
    return self.time_constant


@dataclass(frozen=True)
class DcmState:
  xi: PlanarVec
  com: PlanarVec

  def __post_init__(self):
    object.__setattr__(self, "xi", as_planar(self.xi))
    object.__setattr__(self, "com", as_planar(self.com))


def dcm_rate(xi: PlanarVec, vrp: PlanarVec, params: LipParams, f_ext: PlanarVec = ZERO) -> PlanarVec:
  """DCM time derivative with the external force term retained."""
  b = params.time_constant
  return (xi - vrp) / b + (b / params.mass) * np.asarray(f_ext, dtype=float)


def com_rate(state: DcmState, params: LipParams) -> PlanarVec:
  return (state.xi - state.com) / params.time_constant


def dcm_from_com(com: PlanarVec, com_velocity: PlanarVec, params: LipParams) -> PlanarVec:
  return com + params.time_constant * com_velocity
