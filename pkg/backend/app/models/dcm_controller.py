"""DCM tracking law: desired VRP and the CoM acceleration that realises it."""
from dataclasses import dataclass, field

import numpy as np

from .errors import ParameterError
from .lip_model import LipParams, PlanarVec


@dataclass(frozen=True)
class ControllerGains:
  k_xi: np.ndarray = field(default_factory=lambda: np.diag([2.0, 2.0]))

  def __post_init__(self):
    k = np.asarray(self.k_xi, dtype=float)
    if k.ndim == 1:
      k = np.diag(k)
    if k.shape != (2, 2) or not np.allclose(k, np.diag(np.diag(k))):
      raise ParameterError(f"k_xi must be a 2x2 diagonal matrix, got {self.k_xi!r}")
    if np.any(np.diag(k) <= 1.0):
      raise ParameterError(f"Every k_xi gain must exceed 1 for a stable loop, got {np.diag(k)}")
    object.__setattr__(self, "k_xi", k)

  @classmethod
  def isotropic(cls, k: float) -> "ControllerGains":
    return cls(np.diag([k, k]))


def vrp_command(
  xi: PlanarVec, xi_ref: PlanarVec, xi_dot_ref: PlanarVec, gains: ControllerGains, params: LipParams
) -> PlanarVec:
  return xi_ref - params.time_constant * xi_dot_ref + gains.k_xi @ (xi - xi_ref)


def com_acc_command(com: PlanarVec, vrp_des: PlanarVec, params: LipParams) -> PlanarVec:
  b = params.time_constant
  return (com - vrp_des) / (b * b)
