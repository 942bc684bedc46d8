import math

import numpy as np
import pytest

from app.models.dcm_planner import build_plan
from app.models.errors import ParameterError
from app.models.footstep_planner import (
  Footstep, Side, StraightLine, UnicycleParams, plan_footsteps, sample_unicycle,
)
from app.models.lip_model import DcmState, LipParams, planar
from app.models.lip_sim import (
  FallMonitor, PushEvent, SimState, detect_fall, foot_polygon, kinematic_violation, make_swing,
  project_into, realised_vrp, step_sim, support_polygon, total_force,
)

PARAMS = LipParams()
ORIGIN = planar(0.0, 0.0)


def _state(xi, com=None, t=0.0):
  return SimState(t, DcmState(xi, xi if com is None else com))


def _run(state, vrp, pushes, dt, steps, **kwargs):
  for _ in range(steps):
    state = step_sim(state, vrp, pushes, dt, PARAMS, **kwargs)
  return state


def _foot(x, y, yaw=0.0, side=Side.LEFT):
  return Footstep(0, side, planar(x, y), yaw, 0.0, 0.53)


def test_dcm_doubles_in_b_ln2():
  dt = PARAMS.b * math.log(2.0) / 100
  state = _run(_state(planar(0.01, 0.0)), ORIGIN, [], dt, 100)
  np.testing.assert_allclose(state.xi, [0.02, 0.0], atol=1e-9)
  assert state.time == pytest.approx(PARAMS.b * math.log(2.0))


def test_equilibrium_is_a_fixed_point():
  p = planar(0.1, -0.05)
  state = _run(_state(p), p, [], 0.01, 50)
  np.testing.assert_array_equal(state.xi, p)
  np.testing.assert_array_equal(state.com, p)


def test_push_matches_closed_form():
  force = planar(150.0, 0.0)
  push = PushEvent(0.005, 0.05, force)
  state = _run(_state(ORIGIN), ORIGIN, [push], 0.01, 6)
  b, T = PARAMS.b, 0.06
  expected = (b * b / PARAMS.mass) * force * (math.exp((T - push.t_start) / b) - math.exp((T - push.t_end) / b))
  np.testing.assert_allclose(state.xi, expected, atol=1e-8)
  # a 150 N, 50 ms push moves the DCM by a few centimetres
  assert 0.05 < state.xi[0] < 0.07


def test_push_window_is_half_open():
  push = PushEvent(1.0, 0.1, planar(10.0, 0.0))
  assert push.active(1.0) and not push.active(1.1)
  assert push.t_end == pytest.approx(1.1)
  np.testing.assert_array_equal(total_force([push, push], 1.05), [20.0, 0.0])
  np.testing.assert_array_equal(total_force([push], 0.5), [0.0, 0.0])
  with pytest.raises(ParameterError):
    PushEvent(0.0, 0.0, planar(1.0, 0.0))


def test_rk4_converges_at_fourth_order():
  xi0, vrp, T = planar(0.02, -0.01), planar(0.005, 0.0), 0.4

  def law(_t, xi):
    # state-dependent law so the integrator, not the closed form, does the work
    return vrp + 0.5 * (xi - vrp)

  exact = vrp + math.exp(0.5 * T / PARAMS.b) * (xi0 - vrp)
  errors = []
  for n in (20, 40):
    state = _run(_state(xi0), law, [], T / n, n)
    errors.append(np.max(np.abs(state.xi - exact)))
  assert errors[0] / errors[1] > 12.0


def test_com_follows_dcm():
  state = _run(_state(planar(0.05, 0.0), com=ORIGIN), planar(0.05, 0.0), [], 0.01, 100)
  np.testing.assert_allclose(state.xi, [0.05, 0.0], atol=1e-12)
  np.testing.assert_allclose(state.com, [0.05 * (1.0 - math.exp(-1.0 / PARAMS.b)), 0.0], atol=1e-8)


def test_non_positive_dt_rejected():
  with pytest.raises(ParameterError):
    step_sim(_state(ORIGIN), ORIGIN, [], 0.0, PARAMS)


def test_foot_polygon_and_projection():
  foot = foot_polygon(_foot(0.0, 0.0), margin=0.02)
  np.testing.assert_allclose(foot.bounds, [-0.075, -0.025, 0.075, 0.025], atol=1e-12)
  np.testing.assert_array_equal(project_into(foot, planar(0.01, 0.01)), [0.01, 0.01])
  np.testing.assert_allclose(project_into(foot, planar(0.3, 0.0)), [0.075, 0.0], atol=1e-12)
  turned = foot_polygon(_foot(0.0, 0.0, yaw=math.pi / 2), margin=0.02)
  np.testing.assert_allclose(project_into(turned, planar(0.3, 0.0)), [0.025, 0.0], atol=1e-12)
  with pytest.raises(ParameterError):
    foot_polygon(_foot(0.0, 0.0), margin=0.05)


def test_double_support_uses_the_hull():
  unicycle = UnicycleParams()
  plan = build_plan(plan_footsteps(sample_unicycle(StraightLine(1.0, 0.28), unicycle), unicycle), 0.106, PARAMS)
  first = plan.phases[0]
  hull = support_polygon(first, plan.footsteps)
  assert hull.covers(foot_polygon(plan.footsteps[0], 0.02))
  np.testing.assert_allclose(project_into(hull, planar(0.0, 0.0)), [0.0, 0.0])
  ss = next(p for p in plan.phases if p.kind == "SS")
  stance = plan.footsteps[ss.stance_index]
  mid = 0.5 * (ss.start + ss.end)
  far = stance.position + planar(1.0, 0.0)
  np.testing.assert_allclose(realised_vrp(mid, ORIGIN, far, plan), stance.position + planar(0.075, 0.0), atol=1e-9)


def test_timeline_limits_vrp_and_tracks_phases():
  unicycle = UnicycleParams()
  plan = build_plan(plan_footsteps(sample_unicycle(StraightLine(1.0, 0.28), unicycle), unicycle), 0.106, PARAMS)
  ss = next(p for p in plan.phases if p.kind == "SS")
  stance = plan.footsteps[ss.stance_index].position
  start = _state(stance, t=ss.start + 0.01)
  # a VRP far ahead would run the DCM backwards; clamped to the foot it moves away from the toe
  state = step_sim(start, stance + planar(1.0, 0.0), [], 0.01, PARAMS, timeline=plan)
  assert state.xi[0] < stance[0]
  assert state.phase == "SS"
  assert state.stance_index == ss.stance_index
  assert state.swing_index == ss.swing_index
  assert state.phase_elapsed == pytest.approx(0.02)
  free = step_sim(start, stance + planar(1.0, 0.0), [], 0.01, PARAMS, timeline=plan, support_margin=None)
  assert free.xi[0] < state.xi[0]


def test_swing_profile_boundaries():
  swing = make_swing(planar(0.0, 0.1), planar(0.3, 0.1), 0.4, apex_height=0.05)
  xy, z = swing.evaluate(0.0)
  np.testing.assert_allclose(xy, [0.0, 0.1])
  assert z == 0.0
  xy, z = swing.evaluate(0.4)
  np.testing.assert_allclose(xy, [0.3, 0.1])
  assert z == 0.0
  assert swing.evaluate(0.2)[1] == pytest.approx(0.05)
  for t in (0.0, 0.4):
    vxy, vz = swing.velocity(t)
    np.testing.assert_allclose(vxy, 0.0, atol=1e-12)
    assert vz == pytest.approx(0.0, abs=1e-12)
  heights = [swing.evaluate(t)[1] for t in np.linspace(0.0, 0.4, 41)]
  assert min(heights) >= 0.0 and max(heights) <= 0.05 + 1e-12
  with pytest.raises(ParameterError):
    make_swing(ORIGIN, ORIGIN, 0.0)


@pytest.mark.parametrize("t", [0.1, 0.3])
def test_retimed_swing_is_continuous_and_lands(t):
  swing = make_swing(planar(0.0, 0.1), planar(0.3, 0.1), 0.4)
  retimed = swing.retime(t, planar(0.35, 0.15), 0.2)
  for got, want in zip(retimed.evaluate(0.0), swing.evaluate(t)):
    np.testing.assert_allclose(got, want, atol=1e-12)
  np.testing.assert_allclose(retimed.velocity(0.0)[0], swing.velocity(t)[0], atol=1e-12)
  assert retimed.velocity(0.0)[1] == pytest.approx(swing.velocity(t)[1], abs=1e-12)
  xy, z = retimed.evaluate(0.2)
  np.testing.assert_allclose(xy, [0.35, 0.15])
  assert z == 0.0
  with pytest.raises(ParameterError):
    swing.retime(t, planar(0.35, 0.15), 0.0)


def test_kinematic_violation():
  stance = _foot(0.0, -0.08, side=Side.RIGHT)
  assert not kinematic_violation(planar(0.1, 0.08), stance, Side.LEFT, 0.25, 0.07, 0.30)
  assert kinematic_violation(planar(0.3, 0.08), stance, Side.LEFT, 0.25, 0.07, 0.30)
  assert kinematic_violation(planar(0.1, -0.05), stance, Side.LEFT, 0.25, 0.07, 0.30)
  assert kinematic_violation(planar(0.1, 0.3), stance, Side.LEFT, 0.25, 0.07, 0.30)


def test_detect_fall():
  assert detect_fall(_state(planar(0.6, 0.0)), ORIGIN)
  assert not detect_fall(_state(planar(0.1, 0.0)), ORIGIN)
  assert detect_fall(_state(planar(0.1, 0.0)), ORIGIN, kinematic_violations=3)
  assert not detect_fall(_state(planar(0.1, 0.0)), ORIGIN, kinematic_violations=2)


def test_fall_monitor_needs_consecutive_violations():
  monitor = FallMonitor()
  state = _state(planar(0.1, 0.0))
  assert not monitor.update(state, ORIGIN, True)
  assert not monitor.update(state, ORIGIN, True)
  assert not monitor.update(state, ORIGIN, False)
  assert not monitor.update(state, ORIGIN, True)
  assert not monitor.update(state, ORIGIN, True)
  assert monitor.update(state, ORIGIN, True)
  assert "unreachable" in monitor.reason
  far = FallMonitor(fall_radius=0.05)
  assert far.update(state, ORIGIN)
  assert "support centre" in far.reason
