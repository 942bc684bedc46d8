"""Scenario configuration and HTTP payload models."""
from typing import Annotated, List, Literal, Optional, Tuple, Union

from pydantic import BaseModel, ConfigDict, Field

from .models.dcm_controller import ControllerGains
from .models.errors import ParameterError, ScenarioConfigError
from .models.footstep_planner import CircularArc, Footstep, StraightLine, UnicycleParams
from .models.lip_model import LipParams
from .models.lip_sim import DEFAULT_APEX_HEIGHT, DEFAULT_FALL_RADIUS, DEFAULT_SUPPORT_MARGIN, PushEvent
from .models.qp_dense import DEFAULT_MAX_ITER, DEFAULT_TOL
from .models.step_adapter import AdapterWeights, StepLimits
from .services.closed_loop import Scenario


class _Strict(BaseModel):
  model_config = ConfigDict(extra="forbid")


class StraightLineSpec(_Strict):
  kind: Literal["straight"] = "straight"
  length: float = Field(ge=0.0)
  speed: float = Field(gt=0.0)

  def build(self) -> StraightLine:
    return StraightLine(self.length, self.speed)


class CircularArcSpec(_Strict):
  kind: Literal["arc"] = "arc"
  radius: float = Field(gt=0.0)
  arc_angle: float = Field(description="Swept angle in radians, negative turns right")
  speed: float = Field(gt=0.0)

  def build(self) -> CircularArc:
    return CircularArc(self.radius, self.arc_angle, self.speed)


PathConfig = Annotated[Union[StraightLineSpec, CircularArcSpec], Field(discriminator="kind")]


class LipSpec(_Strict):
  mass: float = Field(33.0, gt=0.0)
  com_height: float = Field(0.53, gt=0.0)
  gravity: float = Field(9.81, gt=0.0)


class UnicycleSpec(_Strict):
  foot_lateral_offset: float = 0.08
  nominal_step_duration: float = 0.53
  t_min: float = 0.30
  t_max: float = 1.0
  l_min: float = 0.0
  l_max: float = 0.25
  max_yaw_rate: float = 0.6


class ControllerSpec(_Strict):
  k_xi: Tuple[float, float] = (2.0, 2.0)


class AdapterSpec(_Strict):
  alpha1: float = 1.0
  alpha2: float = 5.0
  alpha3: float = 0.5
  sagittal_max: float = 0.25
  lateral_min: float = 0.07
  lateral_max: float = 0.30
  epsilon: float = 0.05
  refresh_gamma_nom: bool = True


class PushSpec(_Strict):
  t_start: float = Field(ge=0.0)
  duration: float = Field(gt=0.0)
  force: Tuple[float, float]


class ScenarioConfig(_Strict):
  name: str = "scenario"
  description: str = ""
  path: PathConfig
  lip: LipSpec = LipSpec()
  unicycle: UnicycleSpec = UnicycleSpec()
  controller: ControllerSpec = ControllerSpec()
  adapter: AdapterSpec = AdapterSpec()
  adapter_enabled: bool = True
  ds_duration: Optional[float] = Field(None, gt=0.0)
  dt: float = Field(0.01, gt=0.0)
  pushes: List[PushSpec] = []
  support_margin: float = Field(DEFAULT_SUPPORT_MARGIN, ge=0.0)
  fall_radius: float = Field(DEFAULT_FALL_RADIUS, gt=0.0)
  apex_height: float = Field(DEFAULT_APEX_HEIGHT, ge=0.0)
  initial_transfer: Optional[float] = Field(None, gt=0.0)
  final_hold: Optional[float] = Field(None, gt=0.0)
  min_duration: float = Field(0.0, ge=0.0)
  output_prefix: str = ""

  def to_scenario(self, qp_tol: float = DEFAULT_TOL, qp_max_iter: int = DEFAULT_MAX_ITER) -> Scenario:
    """Build the library scenario; parameter errors become ScenarioConfigError."""
    try:
      unicycle = UnicycleParams(**self.unicycle.model_dump())
      adapter = self.adapter
      return Scenario(
        path=self.path.build(),
        params=LipParams(**self.lip.model_dump()),
        unicycle=unicycle,
        gains=ControllerGains(list(self.controller.k_xi)),
        weights=AdapterWeights(adapter.alpha1, adapter.alpha2, adapter.alpha3),
        limits=StepLimits(adapter.sagittal_max, adapter.lateral_min, adapter.lateral_max,
                          unicycle.t_min, unicycle.t_max, adapter.epsilon),
        ds_duration=self.ds_duration,
        dt=self.dt,
        pushes=[PushEvent(p.t_start, p.duration, p.force) for p in self.pushes],
        adapter_enabled=self.adapter_enabled,
        refresh_gamma_nom=adapter.refresh_gamma_nom,
        support_margin=self.support_margin,
        fall_radius=self.fall_radius,
        apex_height=self.apex_height,
        initial_transfer=self.initial_transfer,
        final_hold=self.final_hold,
        min_duration=self.min_duration,
        qp_tol=qp_tol,
        qp_max_iter=qp_max_iter,
      )
    except ParameterError as exc:
      raise ScenarioConfigError(f"{self.name}: {exc}") from exc


class FootstepPlanRequest(_Strict):
  path: PathConfig
  unicycle: UnicycleSpec = UnicycleSpec()


class FootstepOut(BaseModel):
  index: int
  side: str
  x: float
  y: float
  yaw: float
  impact_time: float
  step_duration: float

  @classmethod
  def from_footstep(cls, step: Footstep) -> "FootstepOut":
    return cls(index=step.index, side=step.side.value, x=float(step.position[0]),
               y=float(step.position[1]), yaw=float(step.yaw),
               impact_time=float(step.impact_time), step_duration=float(step.step_duration))


class AdaptedStepOut(BaseModel):
  index: int
  width_delta: float
  timing_delta: float


class SummaryOut(BaseModel):
  name: str
  fell: bool
  fall_time: Optional[float] = None
  fall_reason: Optional[str] = None
  duration: float
  adapted_steps: List[AdaptedStepOut]
  mean_width_delta: float
  mean_timing_delta: float
  max_dcm_error: float
  mean_cycle_time_ms: float
  adapter_failures: int
