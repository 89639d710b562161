import math

import pytest
from hypothesis import assume, given, settings, strategies as st

from mergecoord.kinematics import (
    InfeasibleTimeError,
    NoProfileError,
    PlanCase,
    latest_access_time,
    min_access_time,
    plan_motion,
    _stop_and_go,
    sample_state,
)
from mergecoord.model import ContractViolation, Params

from oracles import bang_cruise_time, integrate_phases

P = Params()


@pytest.mark.parametrize("x0,v0,expected", [
    (100.0, 10.0, 10.0),
    (15.0, 0.0, math.sqrt(90.0) / 3.0),
    (50.0, 4.0, 5.6),
])
def test_min_access_time_examples(x0, v0, expected):
    assert min_access_time(x0, v0, 0.0, P) == pytest.approx(expected, abs=1e-12)
    assert bang_cruise_time(x0, v0, P.a_max, P.v_max) == pytest.approx(expected, abs=1e-9)


def test_min_access_time_offsets_by_t0():
    assert min_access_time(50, 4, 7.0, P) == pytest.approx(12.6)


def test_min_access_time_rejects_bad_state():
    with pytest.raises(ContractViolation):
        min_access_time(-1, 5, 0, P)
    with pytest.raises(ContractViolation):
        min_access_time(10, 11, 0, P)


@given(st.floats(0.5, 300), st.floats(0, 10))
@settings(max_examples=200)
def test_min_access_time_is_the_bang_cruise_time(x0, v0):
    t = min_access_time(x0, v0, 0.0, P)
    t_acc = min((P.v_max - v0) / P.a_max, t)
    dist, _, vs = integrate_phases([(P.a_max, t_acc), (0.0, t - t_acc)], v0)
    assert dist == pytest.approx(x0, abs=1e-6)
    assert vs.max() <= P.v_max + 1e-9


def test_constant_case():
    plan = plan_motion(100, 10, 0, 10.0, P)
    assert plan.case is PlanCase.CONSTANT
    assert plan.phases == ((0.0, 10.0),)
    assert plan.v_cru == 10


def test_accelerate_then_cruise_at_minimum():
    plan = plan_motion(50, 4, 0, 5.6, P)
    assert plan.case is PlanCase.ACCEL_CRUISE
    (a1, d1), (a2, d2) = plan.phases
    assert (a1, a2) == (3.0, 0.0)
    assert d1 == pytest.approx(2.0, abs=1e-9) and d2 == pytest.approx(3.6, abs=1e-9)
    assert plan.v_cru == pytest.approx(10.0)


def test_decelerate_then_cruise():
    plan = plan_motion(100, 10, 0, 12.0, P)
    assert plan.case is PlanCase.DECEL_CRUISE
    (a1, t1), (a2, _) = plan.phases
    assert (a1, a2) == (-3.0, 0.0)
    # 100 = 10 t1 - 1.5 t1^2 + (10 - 3 t1)(12 - t1)  ->  1.5 t1^2 - 36 t1 + 20 = 0
    t1_hand = (36 - math.sqrt(36**2 - 4 * 1.5 * 20)) / 3.0
    assert t1 == pytest.approx(t1_hand, abs=1e-12)
    assert plan.v_cru == pytest.approx(10 - 3 * t1_hand)
    dist, t_end, _ = integrate_phases(plan.phases, 10.0)
    assert dist == pytest.approx(100.0, abs=1e-9)
    assert t_end == pytest.approx(12.0, abs=1e-12)


def test_full_acceleration_from_rest():
    plan = plan_motion(15, 0, 0, min_access_time(15, 0, 0, P), P)
    assert plan.case is PlanCase.ACCEL
    assert plan.phases[0][0] == pytest.approx(3.0)


def test_full_deceleration_at_cruise_boundary():
    # braking at a_min for the whole 2 s covers exactly 20 - 6 = 14 m
    plan = plan_motion(14, 10, 0, 2.0, P)
    assert plan.case is PlanCase.DECEL
    assert plan.phases[0][0] == pytest.approx(-3.0)
    assert plan.terminal_velocity(10) == pytest.approx(4.0)


def test_slow_arrival_prefers_braking_then_cruise():
    plan = plan_motion(20, 10, 0, 30.0, P)
    assert plan.case is PlanCase.DECEL_CRUISE
    dist, _, vs = integrate_phases(plan.phases, 10.0)
    assert dist == pytest.approx(20.0, abs=1e-9)
    assert vs.min() >= 0


def test_start_from_rest_late_arrival():
    plan = plan_motion(15, 0, 0, 10.0, P)
    assert plan.case is PlanCase.ACCEL_CRUISE
    dist, _, _ = integrate_phases(plan.phases, 0.0)
    assert dist == pytest.approx(15.0, abs=1e-9)


def test_stop_hold_go_profile():
    phases = _stop_and_go(20, 10, 30.0, P)
    dist, t_end, vs = integrate_phases(phases, 10.0)
    assert dist == pytest.approx(20.0, abs=1e-9)
    assert t_end == pytest.approx(30.0)
    assert vs.min() >= -1e-9 and vs.max() <= P.v_max + 1e-9


def test_no_profile_without_fallback():
    p = Params(v_min=2.0)
    late = latest_access_time(20, 10, 0, p)
    with pytest.raises(NoProfileError, match="fallback disabled"):
        plan_motion(20, 10, 0, late + 1.0, p, fallback=False)


def test_infeasible_time():
    with pytest.raises(InfeasibleTimeError):
        plan_motion(100, 10, 0, 9.0, P)


def test_no_profile_when_vmin_positive():
    p = Params(v_min=2.0)
    late = latest_access_time(20, 10, 0, p)
    assert math.isfinite(late)
    plan_motion(20, 10, 0, late, p)
    with pytest.raises(NoProfileError):
        plan_motion(20, 10, 0, late + 1.0, p)


def test_latest_access_time_infinite_when_stoppable():
    assert latest_access_time(20, 10, 0, P) == math.inf


def test_latest_access_time_when_braking_cannot_stop():
    # 10 m/s needs 16.67 m to stop; with 10 m left it enters while braking
    t = latest_access_time(10, 10, 0, P)
    assert 10 * t - 1.5 * t * t == pytest.approx(10.0)


def test_sample_state_boundaries():
    plan = plan_motion(100, 10, 0, 12.0, P)
    assert sample_state(plan, 100, 10, 0, 0) == (100, 10)
    x, v = sample_state(plan, 100, 10, 0, 12.0)
    assert x == pytest.approx(0.0, abs=1e-9)
    assert v == pytest.approx(plan.terminal_velocity(10))


def test_sample_state_uniform_motion():
    plan = plan_motion(100, 10, 0, 10.0, P)
    assert sample_state(plan, 100, 10, 0, 4.0) == pytest.approx((60.0, 10.0))


def test_sample_state_outside_plan():
    plan = plan_motion(100, 10, 0, 10.0, P)
    with pytest.raises(ContractViolation):
        sample_state(plan, 100, 10, 0, 11.0)


@given(x0=st.floats(1, 200), v0=st.floats(0, 10), extra=st.floats(0, 30))
@settings(max_examples=300)
def test_plan_hits_target(x0, v0, extra):
    t_min = min_access_time(x0, v0, 0, P)
    t_max = min(latest_access_time(x0, v0, 0, P), t_min + 30)
    t = min(t_min + extra, t_max)
    plan = plan_motion(x0, v0, 0, t, P)
    dist, t_end, vs = integrate_phases(plan.phases, v0)
    assert t_end == pytest.approx(t, abs=1e-9)
    assert dist == pytest.approx(x0, abs=1e-6)
    assert vs.min() >= P.v_min - 1e-9 and vs.max() <= P.v_max + 1e-9
    for a, d in plan.phases:
        assert P.a_min - 1e-9 <= a <= P.a_max + 1e-9
        assert d >= 0


@given(x0=st.floats(1, 200), v0=st.floats(0, 10), frac=st.floats(0, 1))
@settings(max_examples=100)
def test_sample_state_monotone_distance(x0, v0, frac):
    t_min = min_access_time(x0, v0, 0, P)
    plan = plan_motion(x0, v0, 0, min(t_min + 5, latest_access_time(x0, v0, 0, P)), P)
    t = frac * plan.t_arrive
    x1, _ = sample_state(plan, x0, v0, 0, t)
    x2, _ = sample_state(plan, x0, v0, 0, min(t + 0.5, plan.t_arrive))
    assert x2 <= x1 + 1e-9


@given(x0=st.floats(1, 200), v0=st.floats(0, 10))
def test_earlier_than_minimum_is_rejected(x0, v0):
    t_min = min_access_time(x0, v0, 0, P)
    assume(t_min > 1e-3)
    with pytest.raises(InfeasibleTimeError):
        plan_motion(x0, v0, 0, t_min - 1e-3, P)
