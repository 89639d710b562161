"""Minimum access time and piecewise-constant-acceleration motion plans."""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

from .model import ContractViolation, MergeCoordError, Params

TIME_TOL = 1e-9
# cruise phases shorter than this are sqrt roundoff at the full-ramp boundary
MIN_CRUISE = 1e-6


class InfeasibleTimeError(MergeCoordError, ValueError):
    """The requested arrival is earlier than the minimum access time."""


class NoProfileError(MergeCoordError, ValueError):
    """No motion profile reaches the merging zone at the requested time."""


class PlanCase(str, enum.Enum):
    ACCEL_CRUISE = "accelerate-cruise"
    ACCEL = "accelerate"
    DECEL_CRUISE = "decelerate-cruise"
    DECEL = "decelerate"
    CONSTANT = "constant"
    STOP_AND_GO = "stop-and-go"


@dataclass(frozen=True)
class MotionPlan:
    """Sequence of (acceleration, duration) phases starting at ``start``."""

    phases: tuple[tuple[float, float], ...]
    v_cru: float
    t_arrive: float
    start: float
    case: PlanCase

    @property
    def stop_and_go(self) -> bool:
        return self.case is PlanCase.STOP_AND_GO

    def terminal_velocity(self, v0: float) -> float:
        v = v0
        for a, d in self.phases:
            v += a * d
        return v


def _check_state(x0: float, v0: float, params: Params) -> None:
    if x0 < 0:
        raise ContractViolation(f"x0 must be >= 0 (got {x0})")
    if not (params.v_min - TIME_TOL <= v0 <= params.v_max + TIME_TOL):
        raise ContractViolation(f"v0={v0} outside [{params.v_min}, {params.v_max}]")


def min_access_time(x0: float, v0: float, t0: float, params: Params) -> float:
    """Earliest arrival: accelerate at ``a_max`` up to ``v_max``, then cruise."""
    _check_state(x0, v0, params)
    a, vmax = params.a_max, params.v_max
    v0 = min(v0, vmax)
    v = math.sqrt(v0 * v0 + 2.0 * a * x0)
    t1 = min((vmax - v0) / a, (v - v0) / a)
    t2 = max((2.0 * a * x0 - vmax * vmax + v0 * v0) / (2.0 * a * vmax), 0.0)
    return t0 + t1 + t2


def latest_access_time(x0: float, v0: float, t0: float, params: Params) -> float:
    """Latest reachable arrival, ``inf`` if the vehicle can wait indefinitely.

    Waiting is possible when ``v_min`` is zero and the vehicle can stop before
    the merging zone. Otherwise the slowest profile is full braking down to
    ``v_min`` (then cruising at it), or braking into the zone if it cannot
    shed enough speed first.
    """
    _check_state(x0, v0, params)
    b = -params.a_min
    brake_dist = (v0 * v0 - params.v_min ** 2) / (2.0 * b)
    if brake_dist <= x0:
        if params.v_min <= 0.0:
            return math.inf
        return t0 + (v0 - params.v_min) / b + (x0 - brake_dist) / params.v_min
    # x0 = v0 t - b t^2 / 2, smaller root
    disc = max(v0 * v0 - 2.0 * b * x0, 0.0)
    return t0 + 2.0 * x0 / (v0 + math.sqrt(disc))


def _ramp_then_cruise(x0: float, v0: float, D: float, a: float):
    """Ramp at ``a`` for t1 then cruise, covering ``x0`` in ``D``; None if no root."""
    # (a/2) t1^2 - a D t1 + (x0 - v0 D) = 0, smaller root in a cancellation-free form
    q = 2.0 * (x0 - v0 * D) / a
    disc = D * D - q
    if disc < 0.0:
        return None
    t1 = q / (D + math.sqrt(disc))
    return t1, v0 + a * t1


def plan_motion(
    x0: float,
    v0: float,
    now: float,
    t_assign: float,
    params: Params,
    fallback: bool = True,
) -> MotionPlan:
    """Plan a profile that reaches the merging zone exactly at ``t_assign``.

    Case precedence: constant speed, then accelerate-cruise / full
    acceleration when the arrival must be earlier than the constant-speed
    time, then decelerate-cruise / full deceleration when it must be later.
    A degenerate cruise phase (shorter than ``MIN_CRUISE``) is replaced by
    the matching full-ramp case when that one is admissible. With ``fallback`` a stop-hold-go profile is
    used when none of these apply and ``v_min`` is zero.
    """
    _check_state(x0, v0, params)
    t_min = min_access_time(x0, v0, now, params)
    if t_assign < t_min - TIME_TOL:
        raise InfeasibleTimeError(f"t_assign={t_assign} earlier than t_min={t_min}")
    D = max(t_assign - now, 0.0)
    eps_v = 1e-9

    def done(phases, v_cru, case):
        # pin the arrival time exactly by letting the last phase absorb roundoff
        if phases:
            head = sum(d for _, d in phases[:-1])
            a_last, _ = phases[-1]
            phases[-1] = (a_last, max(D - head, 0.0))
        return MotionPlan(tuple(phases), v_cru, now + D, now, case)

    if D <= TIME_TOL:
        if x0 > 1e-9:
            raise NoProfileError(f"x0={x0} m left but no time to arrive")
        return MotionPlan((), v0, now + D, now, PlanCase.CONSTANT)

    if v0 > 0 and abs(D - x0 / v0) <= TIME_TOL:
        return done([(0.0, D)], v0, PlanCase.CONSTANT)

    speed_up = v0 == 0 or D < x0 / v0
    a_lim = params.a_max if speed_up else params.a_min
    ramp_cruise = None
    sol = _ramp_then_cruise(x0, v0, D, a_lim)
    if sol is not None:
        t1, v_cru = sol
        v_ok = v_cru <= params.v_max + eps_v if speed_up else v_cru >= params.v_min - eps_v
        if 0.0 <= t1 <= D and v_ok:
            ramp_cruise = ([(a_lim, t1), (0.0, D - t1)], v_cru)
            if D - t1 >= MIN_CRUISE:
                return done(*ramp_cruise, PlanCase.ACCEL_CRUISE if speed_up else PlanCase.DECEL_CRUISE)
    a = 2.0 * (x0 - v0 * D) / (D * D)
    v_end = v0 + a * D
    if speed_up:
        ramp_ok = a <= params.a_max * (1 + 1e-9) and v_end <= params.v_max + eps_v
    else:
        ramp_ok = a >= params.a_min * (1 + 1e-9) and v_end >= params.v_min - eps_v
    if ramp_ok:
        return done([(a, D)], v_end, PlanCase.ACCEL if speed_up else PlanCase.DECEL)
    if ramp_cruise is not None:
        return done(*ramp_cruise, PlanCase.ACCEL_CRUISE if speed_up else PlanCase.DECEL_CRUISE)

    if fallback and params.v_min <= 0.0:
        plan = _stop_and_go(x0, v0, D, params)
        if plan is not None:
            return done(plan, 0.0, PlanCase.STOP_AND_GO)
    raise NoProfileError(
        f"no profile from x0={x0}, v0={v0} arrives after {D} s"
        + ("" if fallback else " (fallback disabled)")
    )


def _stop_and_go(x0: float, v0: float, D: float, params: Params):
    b = -params.a_min
    t_stop = v0 / b
    x_left = x0 - v0 * v0 / (2.0 * b)
    if x_left < -1e-9:
        return None
    x_left = max(x_left, 0.0)
    a, vmax = params.a_max, params.v_max
    t_acc = min(math.sqrt(2.0 * x_left / a), vmax / a)
    t_cru = max(x_left - 0.5 * a * t_acc * t_acc, 0.0) / vmax
    hold = D - t_stop - t_acc - t_cru
    if hold < -TIME_TOL:
        return None
    phases = [(params.a_min, t_stop), (0.0, max(hold, 0.0)), (a, t_acc)]
    if t_cru > 0:
        phases.append((0.0, t_cru))
    return phases


def sample_state(plan: MotionPlan, x0: float, v0: float, now: float, t: float) -> tuple[float, float]:
    """Remaining distance and velocity at time ``t`` along ``plan``."""
    if t < now - TIME_TOL or t > plan.t_arrive + TIME_TOL:
        raise ContractViolation(f"t={t} outside [{now}, {plan.t_arrive}]")
    left = min(max(t - now, 0.0), plan.t_arrive - now)
    x, v = x0, v0
    for a, d in plan.phases:
        step = min(d, left)
        x -= v * step + 0.5 * a * step * step
        v += a * step
        left -= step
        if left <= 0.0:
            break
    return max(x, 0.0), max(v, 0.0)
