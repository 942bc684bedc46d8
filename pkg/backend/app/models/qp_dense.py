"""Dense convex QP solver for small problems.

    minimize    0.5 z'Hz + g'z
    subject to  A_eq z = b_eq,  A_in z <= b_in

Dual active-set method (Goldfarb-Idnani): start from the equality-constrained
minimiser, which is dual feasible, and repeatedly add the most violated inequality,
dropping active constraints whose multiplier would turn negative. Every step solves
the KKT system of the working set directly; the problems this serves have a handful
of variables, so dense factorisations are cheaper than keeping updated factors.
"""
from dataclasses import dataclass, field
from enum import Enum
import logging
from typing import List, Optional, Sequence, Tuple

import numpy as np

from .errors import QpDimensionError, QpNonConvexError

logger = logging.getLogger(__name__)

DEFAULT_TOL = 1e-8
DEFAULT_MAX_ITER = 200
_ZERO_STEP = 1e-14


class QpStatus(str, Enum):
  OPTIMAL = "Optimal"
  INFEASIBLE = "Infeasible"
  MAX_ITERATIONS = "MaxIterations"


def _matrix(value, cols: int, name: str) -> np.ndarray:
  if value is None:
    return np.zeros((0, cols))
  arr = np.atleast_2d(np.asarray(value, dtype=float))
  if arr.size == 0:
    return np.zeros((0, cols))
  if arr.shape[1] != cols:
    raise QpDimensionError(f"{name} has {arr.shape[1]} columns, expected {cols}")
  return arr


def _vector(value, rows: int, name: str) -> np.ndarray:
  if value is None:
    value = np.zeros(0)
  arr = np.asarray(value, dtype=float).reshape(-1)
  if arr.shape[0] != rows:
    raise QpDimensionError(f"{name} has {arr.shape[0]} entries, expected {rows}")
  return arr


@dataclass(frozen=True)
class QpProblem:
  H: np.ndarray
  g: np.ndarray
  A_eq: Optional[np.ndarray] = None
  b_eq: Optional[np.ndarray] = None
  A_in: Optional[np.ndarray] = None
  b_in: Optional[np.ndarray] = None

  def __post_init__(self):
    H = np.atleast_2d(np.asarray(self.H, dtype=float))
    n = H.shape[0]
    if H.shape != (n, n):
      raise QpDimensionError(f"Hessian must be square, got shape {H.shape}")
    if not np.allclose(H, H.T, rtol=0.0, atol=1e-12):
      raise QpDimensionError("Hessian must be symmetric")
    A_eq = _matrix(self.A_eq, n, "A_eq")
    A_in = _matrix(self.A_in, n, "A_in")
    object.__setattr__(self, "H", H)
    object.__setattr__(self, "g", _vector(self.g, n, "g"))
    object.__setattr__(self, "A_eq", A_eq)
    object.__setattr__(self, "b_eq", _vector(self.b_eq, A_eq.shape[0], "b_eq"))
    object.__setattr__(self, "A_in", A_in)
    object.__setattr__(self, "b_in", _vector(self.b_in, A_in.shape[0], "b_in"))

  @property
  def n(self) -> int:
    return self.H.shape[0]

  def objective(self, z: np.ndarray) -> float:
    return float(0.5 * z @ self.H @ z + self.g @ z)


@dataclass(frozen=True)
class QpSolution:
  z: np.ndarray
  objective: float
  status: QpStatus
  kkt_residual: float
  iterations: int = 0
  active_set: Tuple[int, ...] = ()
  eq_multipliers: np.ndarray = field(default_factory=lambda: np.zeros(0))
  in_multipliers: np.ndarray = field(default_factory=lambda: np.zeros(0))

  @property
  def optimal(self) -> bool:
    return self.status is QpStatus.OPTIMAL


def kkt_residual(p: QpProblem, z: np.ndarray, lam: np.ndarray, mu: np.ndarray) -> float:
  """Largest violation among stationarity, primal and dual feasibility, complementarity."""
  stationarity = p.H @ z + p.g + p.A_eq.T @ lam + p.A_in.T @ mu
  parts = [np.max(np.abs(stationarity), initial=0.0)]
  parts.append(np.max(np.abs(p.A_eq @ z - p.b_eq), initial=0.0))
  slack = p.b_in - p.A_in @ z
  parts.append(np.max(-slack, initial=0.0))
  parts.append(np.max(-mu, initial=0.0))
  parts.append(np.max(np.abs(mu * slack), initial=0.0))
  return float(max(parts))


def _convex_hessian(H: np.ndarray, tol: float) -> np.ndarray:
  try:
    np.linalg.cholesky(H)
    return H
  except np.linalg.LinAlgError:
    pass
  min_eig = float(np.min(np.linalg.eigvalsh(H)))
  scale = max(1.0, float(np.max(np.abs(H))))
  if min_eig < -tol * scale:
    raise QpNonConvexError(f"Hessian is not positive semidefinite (min eigenvalue {min_eig:.3e})")
  # singular but PSD: a tiny shift keeps the working-set systems solvable
  return H + (tol * scale) * np.eye(H.shape[0])


def _kkt_solve(H: np.ndarray, N: np.ndarray, rhs_top: np.ndarray, rhs_bottom: np.ndarray):
  n, m = H.shape[0], N.shape[0]
  K = np.zeros((n + m, n + m))
  K[:n, :n] = H
  K[:n, n:] = N.T
  K[n:, :n] = N
  rhs = np.concatenate([rhs_top, rhs_bottom])
  try:
    sol = np.linalg.solve(K, rhs)
  except np.linalg.LinAlgError:
    sol = np.linalg.lstsq(K, rhs, rcond=None)[0]
  return sol[:n], sol[n:]


class _WorkingSet:
  """Equalities plus the active inequalities, with their multipliers."""

  def __init__(self, p: QpProblem, H: np.ndarray):
    self.p = p
    self.H = H
    self.active: List[int] = []

  def rows(self) -> np.ndarray:
    return np.vstack([self.p.A_eq, self.p.A_in[self.active]]) if self.active else self.p.A_eq

  def rhs(self) -> np.ndarray:
    return np.concatenate([self.p.b_eq, self.p.b_in[self.active]])

  def minimiser(self) -> Tuple[np.ndarray, np.ndarray]:
    return _kkt_solve(self.H, self.rows(), -self.p.g, self.rhs())

  def split(self, w: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    me = self.p.A_eq.shape[0]
    mu = np.zeros(self.p.A_in.shape[0])
    mu[self.active] = w[me:]
    return w[:me], mu


def _scale(p: QpProblem) -> float:
  terms = [p.H, p.g, p.b_eq, p.b_in]
  return max(1.0, *(float(np.max(np.abs(t), initial=0.0)) for t in terms))


def _rank(rows: np.ndarray) -> int:
  return int(np.linalg.matrix_rank(rows)) if rows.shape[0] else 0


def _warm_start(ws: _WorkingSet, active_set: Sequence[int], tol: float):
  m = ws.p.A_in.shape[0]
  # rows dependent on the equalities or on rows already kept would make the KKT matrix singular
  ws.active = []
  for j in sorted({int(j) for j in active_set if 0 <= int(j) < m}):
    rows = ws.rows()
    if _rank(np.vstack([rows, ws.p.A_in[j]])) > _rank(rows):
      ws.active.append(j)
  me = ws.p.A_eq.shape[0]
  while True:
    z, w = ws.minimiser()
    if not np.all(np.isfinite(z)):
      ws.active = []
      return ws.minimiser()
    if not ws.active:
      return z, w
    mu = w[me:]
    worst = int(np.argmin(mu))
    if mu[worst] >= -tol:
      return z, w
    ws.active.pop(worst)


def solve(
  p: QpProblem,
  tol: float = DEFAULT_TOL,
  max_iter: int = DEFAULT_MAX_ITER,
  active_set: Optional[Sequence[int]] = None,
) -> QpSolution:
  if not tol > 0:
    raise QpDimensionError(f"tol must be positive, got {tol}")
  H = _convex_hessian(p.H, tol)
  ws = _WorkingSet(p, H)
  me = p.A_eq.shape[0]
  z, w = _warm_start(ws, active_set or (), tol)
  status = QpStatus.OPTIMAL
  iterations = 0

  while True:
    violation = p.A_in @ z - p.b_in
    candidates = [j for j in range(len(violation)) if j not in ws.active]
    if not candidates:
      break
    j_add = max(candidates, key=lambda j: violation[j])
    if violation[j_add] <= tol:
      break
    a_p = p.A_in[j_add]
    mu_p = 0.0
    # partial steps on j_add until it joins the working set
    while True:
      iterations += 1
      if iterations > max_iter:
        status = QpStatus.MAX_ITERATIONS
        break
      dz, dw = _kkt_solve(H, ws.rows(), -a_p, np.zeros(me + len(ws.active)))
      dw_in = dw[me:]
      t1, j_drop = np.inf, None
      for k, j in enumerate(ws.active):
        if dw_in[k] < 0:
          step = -w[me + k] / dw_in[k]
          if step < t1:
            t1, j_drop = step, k
      curvature = float(-(a_p @ dz))
      t2 = np.inf if curvature <= _ZERO_STEP else float(a_p @ z - p.b_in[j_add]) / curvature
      if not np.isfinite(t1) and not np.isfinite(t2):
        status = QpStatus.INFEASIBLE
        break
      t = min(t1, t2)
      z = z + (0.0 if not np.isfinite(t2) else t) * dz
      w = w + t * dw
      mu_p += t
      if t2 <= t1:
        ws.active.append(j_add)
        w = np.append(w, mu_p)
        break
      ws.active.pop(j_drop)
      w = np.delete(w, me + j_drop)
    if status is not QpStatus.OPTIMAL:
      break

  if status is QpStatus.INFEASIBLE:
    logger.debug(f"QP infeasible after {iterations} iterations")
    lam, mu = ws.split(w)
    return QpSolution(z, p.objective(z), status, float("inf"), iterations,
                      tuple(sorted(ws.active)), lam, mu)

  z, w = ws.minimiser()
  lam, mu = ws.split(w)
  residual = kkt_residual(p, z, lam, mu)
  if active_set and status is QpStatus.OPTIMAL and residual > tol * _scale(p):
    logger.debug(f"Warm start {tuple(active_set)} ended with KKT residual {residual:.2e}, solving cold")
    return solve(p, tol, max_iter)
  return QpSolution(z, p.objective(z), status, residual, iterations,
                    tuple(sorted(ws.active)), lam, mu)
