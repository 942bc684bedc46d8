class WalkingError(Exception):
  """Base class for every error raised by the walking library."""


class ParameterError(WalkingError, ValueError):
  pass


class FootstepPlanningError(WalkingError):
  pass


class DcmPlanError(WalkingError):
  pass


class QpDimensionError(WalkingError, ValueError):
  pass


class QpNonConvexError(WalkingError):
  """The Hessian has a negative eigenvalue."""


class AdapterInfeasibleError(WalkingError):
  def __init__(self, message: str, status: str = "Infeasible"):
    super().__init__(message)
    self.status = status


class ScenarioConfigError(WalkingError):
  pass
