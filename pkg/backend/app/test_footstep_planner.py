import math

import numpy as np
import pytest

from app.models.errors import FootstepPlanningError, ParameterError
from app.models.footstep_planner import (
  CircularArc, PoseSample, Side, StraightLine, UnicycleParams, plan_footsteps, sample_unicycle,
)
from app.models.lip_model import planar

PARAMS = UnicycleParams()


def test_straight_line_samples_end_on_the_path_end():
  samples = sample_unicycle(StraightLine(1.0, 0.28), PARAMS)
  assert samples[0].time == 0.0
  np.testing.assert_allclose(samples[-1].position, [1.0, 0.0], atol=1e-12)
  assert samples[-1].yaw == 0.0
  times = [s.time for s in samples]
  np.testing.assert_allclose(np.diff(times), PARAMS.nominal_step_duration)


def test_zero_length_path_gives_single_sample():
  samples = sample_unicycle(StraightLine(0.0, 0.5), PARAMS)
  assert len(samples) == 1
  np.testing.assert_array_equal(samples[0].position, [0.0, 0.0])


def test_arc_final_yaw():
  samples = sample_unicycle(CircularArc(1.0, math.pi, 0.28), PARAMS)
  assert abs(samples[-1].yaw - math.pi) <= 1e-9
  np.testing.assert_allclose(samples[-1].position, [0.0, 2.0], atol=1e-9)


def test_right_turning_arc_mirrors_left_turn():
  left = sample_unicycle(CircularArc(1.2, 1.0, 0.25), PARAMS)
  right = sample_unicycle(CircularArc(1.2, -1.0, 0.25), PARAMS)
  for a, b in zip(left, right):
    np.testing.assert_allclose(a.position * [1, -1], b.position, atol=1e-12)
    assert a.yaw == pytest.approx(-b.yaw)


def test_excessive_yaw_rate_rejected():
  with pytest.raises(FootstepPlanningError):
    sample_unicycle(CircularArc(0.3, math.pi, 0.28), PARAMS)


def test_params_validation():
  with pytest.raises(ParameterError):
    UnicycleParams(t_min=0.6, nominal_step_duration=0.53)
  with pytest.raises(ParameterError):
    UnicycleParams(l_min=0.3, l_max=0.25)


def test_standing_plan_is_initial_pair():
  steps = plan_footsteps(sample_unicycle(StraightLine(0.0, 0.28), PARAMS), PARAMS)
  assert [s.side for s in steps] == [Side.LEFT, Side.RIGHT]
  assert all(s.impact_time == 0.0 for s in steps)
  np.testing.assert_allclose(steps[0].position - steps[1].position, [0.0, 0.16])


def test_straight_walk_stride():
  steps = plan_footsteps(sample_unicycle(StraightLine(1.0, 0.28), PARAMS), PARAMS)
  walking = steps[2:-2]
  for a, b in zip(walking, walking[2:]):
    assert b.side == a.side
    assert b.position[0] - a.position[0] == pytest.approx(0.28 * 2 * 0.53, abs=1e-9)
  # closing step lands beside the last one at the path end
  np.testing.assert_allclose(0.5 * (steps[-1].position + steps[-2].position), [1.0, 0.0], atol=1e-12)


def test_sparse_samples_are_subdivided():
  samples = [PoseSample(planar(0.0, 0.0), 0.0, 0.0), PoseSample(planar(0.6, 0.0), 0.0, 0.53)]
  steps = plan_footsteps(samples, PARAMS)
  # one sample pair would need a 0.62 m step; the planner must have inserted poses
  assert len(steps) > 4
  for a, b in zip(steps[1:], steps[2:]):
    assert np.linalg.norm(b.position - a.position) <= PARAMS.l_max + 1e-9
    assert PARAMS.t_min - 1e-9 <= b.impact_time - a.impact_time <= PARAMS.t_max + 1e-9


def _random_path(rng):
  if rng.uniform() < 0.5:
    return StraightLine(rng.uniform(0.2, 3.0), rng.uniform(0.05, 0.35))
  radius = rng.uniform(0.6, 2.0)
  angle = rng.choice([-1.0, 1.0]) * rng.uniform(0.2, math.pi)
  return CircularArc(radius, angle, rng.uniform(0.05, min(0.3, 0.55 * radius)))


def test_bounds_hold_on_random_paths():
  rng = np.random.default_rng(11)
  for _ in range(40):
    steps = plan_footsteps(sample_unicycle(_random_path(rng), PARAMS), PARAMS)
    for a, b in zip(steps[1:], steps[2:]):
      length = np.linalg.norm(b.position - a.position)
      assert PARAMS.l_min - 1e-9 <= length <= PARAMS.l_max + 1e-9
      assert PARAMS.t_min - 1e-9 <= b.impact_time - a.impact_time <= PARAMS.t_max + 1e-9
      assert b.side != a.side
      # the swing foot stays on its own side of the stance foot
      assert a.local(b.position)[1] * b.side.sign > 0


def test_planning_is_deterministic():
  path = CircularArc(1.0, math.pi, 0.28)
  first = plan_footsteps(sample_unicycle(path, PARAMS), PARAMS)
  second = plan_footsteps(sample_unicycle(path, PARAMS), PARAMS)
  assert len(first) == len(second)
  for a, b in zip(first, second):
    assert a.side == b.side and a.yaw == b.yaw and a.impact_time == b.impact_time
    np.testing.assert_array_equal(a.position, b.position)


def test_unordered_samples_rejected():
  samples = [PoseSample(planar(0.0, 0.0), 0.0, 0.5), PoseSample(planar(0.1, 0.0), 0.0, 0.2)]
  with pytest.raises(FootstepPlanningError):
    plan_footsteps(samples, PARAMS)
