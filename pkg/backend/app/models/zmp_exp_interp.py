"""Exponential ZMP interpolation and the closed-form DCM it induces.

The ZMP is interpolated as r(t) = A e^{-t/b} + B between r1 (t = 0) and r2 (t = T).
With this choice the DCM solution is linear in (xi_0, xi_T, sigma), which is what
makes the step adapter a QP.
"""
from dataclasses import dataclass
import math
from typing import Tuple

import numpy as np

from .errors import ParameterError
from .lip_model import LipParams, PlanarVec, as_planar

DOMAIN_TOL = 1e-12


@dataclass(frozen=True)
class ExpZmpSegment:
  r1: PlanarVec
  r2: PlanarVec
  T: float
  A: PlanarVec
  B: PlanarVec
  sigma: float
  b: float

  @property
  def delta(self) -> PlanarVec:
    return self.r2 - self.r1


@dataclass(frozen=True)
class DcmClosedForm:
  A: PlanarVec
  B: PlanarVec
  C: PlanarVec
  b: float

  def __call__(self, t: float) -> PlanarVec:
    return 0.5 * self.A * math.exp(-t / self.b) + self.B + self.C * math.exp(t / self.b)

  def rate(self, t: float) -> PlanarVec:
    return (-0.5 * self.A * math.exp(-t / self.b) + self.C * math.exp(t / self.b)) / self.b


def make_segment(r1: PlanarVec, r2: PlanarVec, T: float, params: LipParams) -> ExpZmpSegment:
  if not T > 0:
    raise ParameterError(f"Segment duration must be positive, got T={T}")
  r1, r2 = as_planar(r1), as_planar(r2)
  b = params.time_constant
  sigma = math.exp(T / b)
  A = (r2 - r1) * sigma / (1.0 - sigma)
  B = (r1 - r2 * sigma) / (1.0 - sigma)
  return ExpZmpSegment(r1=r1, r2=r2, T=T, A=A, B=B, sigma=sigma, b=b)


def _check_domain(seg: ExpZmpSegment, t: float):
  if t < -DOMAIN_TOL or t > seg.T + DOMAIN_TOL:
    raise ParameterError(f"t={t} outside segment domain [0, {seg.T}]")


def eval_zmp(seg: ExpZmpSegment, t: float) -> PlanarVec:
  _check_domain(seg, t)
  # exact endpoints
  if t <= 0.0:
    return seg.r1.copy()
  if t >= seg.T:
    return seg.r2.copy()
  return seg.A * math.exp(-t / seg.b) + seg.B


def solve_dcm_ivp(seg: ExpZmpSegment, xi0: PlanarVec) -> DcmClosedForm:
  xi0 = as_planar(xi0)
  C0 = xi0 - 0.5 * seg.A - seg.B
  return DcmClosedForm(A=seg.A, B=seg.B, C=C0, b=seg.b)


def final_dcm(seg: ExpZmpSegment, xi0: PlanarVec) -> PlanarVec:
  """DCM at t = T reached from xi0 under the segment's ZMP."""
  xi0 = as_planar(xi0)
  sigma = seg.sigma
  return sigma * xi0 + 0.5 * seg.delta * (1.0 + sigma) + seg.r1 - sigma * seg.r2


def coupling_terms(xi0: PlanarVec, r1: PlanarVec, r2: PlanarVec) -> Tuple[PlanarVec, PlanarVec]:
  """(c, d) of the coupling gammaT + rT_zmp + c * sigma = d, linear in the unknowns."""
  xi0, r1, r2 = as_planar(xi0), as_planar(r1), as_planar(r2)
  half_delta = 0.5 * (r2 - r1)
  return r2 - xi0 - half_delta, r1 + half_delta


def coupling_residual(
  xi0: PlanarVec,
  xiT: PlanarVec | None,
  r1: PlanarVec,
  r2: PlanarVec,
  rT_zmp: PlanarVec,
  gammaT: PlanarVec | None,
  sigma: float,
) -> PlanarVec:
  """Residual of the linear coupling between xi0, the next ZMP, the DCM offset and sigma.

  Either gammaT or xiT may be omitted; the missing one follows from xiT = gammaT + rT_zmp.
  When both are given the residual also carries any mismatch between them.
  """
  if not sigma > 1.0:
    raise ParameterError(f"sigma must exceed 1, got {sigma}")
  rT_zmp = as_planar(rT_zmp)
  if gammaT is None and xiT is None:
    raise ParameterError("coupling_residual needs gammaT or xiT")
  if gammaT is None:
    gammaT = as_planar(xiT) - rT_zmp
  gammaT = as_planar(gammaT)
  c, d = coupling_terms(xi0, r1, r2)
  residual = gammaT + rT_zmp + c * sigma - d
  if xiT is not None:
    residual = residual + (as_planar(xiT) - gammaT - rT_zmp)
  return residual


def is_consistent(residual: PlanarVec, tol: float = 1e-9) -> bool:
  return bool(np.max(np.abs(residual)) <= tol)
