"""Seeded rolling-horizon simulation of the on-ramp merge."""

from __future__ import annotations

import math
import time
from dataclasses import dataclass
from typing import Callable, Optional, Sequence

import numpy as np

from .kinematics import latest_access_time, min_access_time, plan_motion, sample_state
from .model import Anchor, MergeCoordError, Movement, Params, Scenario, Vehicle
from .scheduling import BudgetExceededError, Schedule
from .strategies import DEFAULT_BUDGET, Strategy, solve

DT_SIM = 0.1
_EPS = 1e-9


class InfeasibleRateError(MergeCoordError, ValueError):
    """An arrival rate whose mean headway does not exceed the minimum headway."""


class SafetyViolation(MergeCoordError, AssertionError):
    pass


@dataclass(frozen=True)
class ArrivalStream:
    """Per-movement (entry_time, entry_velocity) pairs."""

    main: tuple[tuple[float, float], ...]
    ramp: tuple[tuple[float, float], ...]

    def lane(self, movement: Movement) -> tuple[tuple[float, float], ...]:
        return self.main if movement is Movement.MAIN else self.ramp

    def __len__(self) -> int:
        return len(self.main) + len(self.ramp)


def check_rate(lam: float, params: Params) -> None:
    if lam < 0:
        raise InfeasibleRateError(f"arrival rate must be >= 0 (got {lam})")
    if lam > 0 and 1.0 / lam <= params.dt1:
        raise InfeasibleRateError(
            f"infeasible rate {lam} veh/s: mean headway {1.0 / lam:.6g} s must exceed "
            f"dt1={params.dt1} s (rate must be < {1.0 / params.dt1:.6g})"
        )


def _lane_arrivals(lam: float, duration: float, params: Params, rng: np.random.Generator,
                   velocity: float) -> tuple[tuple[float, float], ...]:
    if lam == 0:
        return ()
    scale = 1.0 / lam - params.dt1
    out = []
    t = 0.0
    batch = max(16, int(duration * lam * 1.2) + 16)
    while True:
        for gap in params.dt1 + rng.exponential(scale, batch):
            t += gap
            if t > duration:
                return tuple(out)
            out.append((t, velocity))


def generate_arrivals(lambda1: float, lambda2: float, duration: float, params: Params,
                      seed: int, entry_velocity: Optional[float] = None) -> ArrivalStream:
    """Displaced-exponential arrivals on both movements (one seed substream each)."""
    check_rate(lambda1, params)
    check_rate(lambda2, params)
    v = params.v_max if entry_velocity is None else entry_velocity
    rng_main, rng_ramp = (np.random.default_rng(s) for s in np.random.SeedSequence(seed).spawn(2))
    return ArrivalStream(_lane_arrivals(lambda1, duration, params, rng_main, v),
                         _lane_arrivals(lambda2, duration, params, rng_ramp, v))


@dataclass(frozen=True)
class ReplanRecord:
    sim_time: float
    n_vehicles: int
    n_scheduled: int
    J: float
    plan_wallclock_ms: float


@dataclass(frozen=True)
class ExitRecord:
    id: int
    movement: Movement
    entry_time: float
    t_min_entry: float
    t_assign: float

    @property
    def delay(self) -> float:
        return self.t_assign - self.t_min_entry


@dataclass(frozen=True)
class MetricsReport:
    strategy: Strategy
    average_delay: float
    average_plan_time: float
    average_vehicle_count: float
    log: tuple[ReplanRecord, ...]
    exits: tuple[ExitRecord, ...]
    frozen_events: int
    consistency_violations: int

    def summary(self) -> dict[str, float]:
        return {
            "average_delay": self.average_delay,
            "average_plan_time": self.average_plan_time,
            "average_vehicle_count": self.average_vehicle_count,
        }


@dataclass
class _Agent:
    id: int
    movement: Movement
    entry_time: float
    t_min_entry: float
    x0: float
    v0: float
    plan: object
    t_assign: Optional[float] = None

    def state(self, t: float) -> tuple[float, float]:
        return sample_state(self.plan, self.x0, self.v0, self.plan.start,
                            min(t, self.plan.t_arrive))


def _check_gaps(entries: Sequence[tuple[float, Movement]], params: Params, now: float) -> None:
    tol = 1e-6
    entries = sorted(entries)
    for i, (ti, mi) in enumerate(entries):
        for tj, mj in entries[i + 1:]:
            need = params.dt1 if mi is mj else params.dt2
            if tj - ti < need - tol:
                raise SafetyViolation(
                    f"t={now:.3f}: gap {tj - ti:.6f} s between {mi.name}@{ti:.6f} and "
                    f"{mj.name}@{tj:.6f} below {need}"
                )
            if tj - ti >= params.dt2:
                break


def simulate(
    lambda1: float,
    lambda2: float,
    duration: float,
    strategy: Strategy | str,
    params: Params,
    seed: int,
    *,
    dt_sim: float = DT_SIM,
    entry_velocity: Optional[float] = None,
    stream: Optional[ArrivalStream] = None,
    prune: bool = True,
    budget: int = DEFAULT_BUDGET,
    on_replan: Optional[Callable[[float, Scenario, Schedule], None]] = None,
    check_safety: bool = False,
) -> MetricsReport:
    """Run the merge for ``duration`` seconds and collect delay/plan-time metrics.

    Every ``T`` seconds all in-zone vehicles are rescheduled from their
    current state, except those due within one period (or unable to absorb
    another period of delay), which keep their assignment and anchor the
    rest. Delays are measured against the minimum access time at entry and
    averaged over vehicles that reached the merging zone.
    """
    strategy = Strategy(strategy)
    if duration <= 0:
        raise ValueError("duration must be > 0")
    if stream is None:
        stream = generate_arrivals(lambda1, lambda2, duration, params, seed, entry_velocity)

    steps = int(math.floor(duration / dt_sim + _EPS))
    replan_every = max(1, int(round(params.T / dt_sim)))
    pending = {m: list(stream.lane(m)) for m in Movement}
    cursor = {m: 0 for m in Movement}
    last_entry = {m: -math.inf for m in Movement}
    active: list[_Agent] = []
    next_id = 1
    last_exit: Optional[Anchor] = None
    recent_exits: list[tuple[float, Movement]] = []
    exits: list[ExitRecord] = []
    log: list[ReplanRecord] = []
    frozen_events = 0
    violations = 0

    for k in range(steps + 1):
        now = k * dt_sim

        still = []
        for ag in active:
            if ag.t_assign is not None and ag.t_assign <= now + _EPS:
                exits.append(ExitRecord(ag.id, ag.movement, ag.entry_time, ag.t_min_entry,
                                        ag.t_assign))
                if last_exit is None or ag.t_assign >= last_exit.time:
                    last_exit = Anchor(ag.t_assign, ag.movement)
                recent_exits.append((ag.t_assign, ag.movement))
            else:
                still.append(ag)
        active = still

        # admit arrivals in entry order across both movements
        ready = []
        for m in Movement:
            lane = pending[m]
            while cursor[m] < len(lane):
                t_arr, v_in = lane[cursor[m]]
                t_in = max(t_arr, last_entry[m] + params.dt1)
                if t_in > now + _EPS:
                    break
                ready.append((t_in, int(m), v_in))
                last_entry[m] = t_in
                cursor[m] += 1
        for t_in, m, v_in in sorted(ready):
            t_min = min_access_time(params.L, v_in, t_in, params)
            plan = plan_motion(params.L, v_in, t_in, t_min, params)
            active.append(_Agent(next_id, Movement(m), t_in, t_min, params.L, v_in, plan))
            next_id += 1

        if k % replan_every:
            continue

        states = {ag.id: ag.state(now) for ag in active}
        freeze_cut = -math.inf
        for ag in active:
            if ag.t_assign is None:
                continue
            x, v = states[ag.id]
            if (ag.t_assign - now < params.T
                    or latest_access_time(x, v, now, params) < ag.t_assign + params.T):
                freeze_cut = max(freeze_cut, ag.t_assign)
        frozen = [ag for ag in active if ag.t_assign is not None and ag.t_assign <= freeze_cut]
        free = [ag for ag in active if not (ag.t_assign is not None and ag.t_assign <= freeze_cut)]
        frozen_events += len(frozen)

        anchor = last_exit
        for ag in frozen:
            if anchor is None or ag.t_assign >= anchor.time:
                anchor = Anchor(ag.t_assign, ag.movement)

        vehicles = []
        floor = {m: -math.inf for m in Movement}
        raw_tmin = {}
        for ag in free:
            x, v = states[ag.id]
            t_min = min_access_time(x, v, now, params)
            raw_tmin[ag.id] = t_min
            if ag.t_assign is not None and t_min > ag.t_assign + 1e-6:
                violations += 1
            # lane order: a follower is never served before its leader
            t_eff = max(t_min, floor[ag.movement])
            floor[ag.movement] = t_eff
            vehicles.append(Vehicle(ag.id, ag.movement, t_eff, ag.entry_time, x, v))
        scenario = Scenario(params, tuple(vehicles), anchor)

        started = time.perf_counter()
        try:
            sched = solve(scenario, strategy, budget=budget, prune=prune)
        except BudgetExceededError as exc:
            raise BudgetExceededError(exc.count, exc.budget, f"sim time {now:.1f} s") from exc
        wall_ms = (time.perf_counter() - started) * 1000.0
        log.append(ReplanRecord(now, len(active), len(free), sched.J, wall_ms))
        if on_replan is not None:
            on_replan(now, scenario, sched)

        for ag in free:
            x, v = states[ag.id]
            t_new = sched.t_assign[ag.id]
            ag.plan = plan_motion(x, v, now, t_new, params)
            ag.x0, ag.v0 = x, v
            ag.t_assign = t_new

        if check_safety:
            recent_exits = [(t, m) for t, m in recent_exits if t > now - params.dt2 - 1.0]
            _check_gaps(recent_exits + [(ag.t_assign, ag.movement) for ag in active
                                        if ag.t_assign is not None], params, now)

    n_replans = len(log)
    return MetricsReport(
        strategy=strategy,
        average_delay=float(np.mean([e.delay for e in exits])) if exits else 0.0,
        average_plan_time=float(np.mean([r.plan_wallclock_ms for r in log])) if log else 0.0,
        average_vehicle_count=(sum(r.n_vehicles for r in log) / n_replans) if n_replans else 0.0,
        log=tuple(log),
        exits=tuple(exits),
        frozen_events=frozen_events,
        consistency_violations=violations,
    )


def snapshot_scenario(n_vehicles: int, lam: float, params: Params,
                      rng: np.random.Generator) -> Scenario:
    """First ``n_vehicles`` arrivals of two equal-rate streams, all at ``v_max``.

    Each vehicle sits at the control-zone entry, so its minimum access time
    is its arrival time plus ``L / v_max``.
    """
    check_rate(lam, params)
    scale = 1.0 / lam - params.dt1
    lanes = [np.cumsum(params.dt1 + rng.exponential(scale, n_vehicles)) for _ in Movement]
    tagged = sorted([(t, int(m)) for m in Movement for t in lanes[m]])[:n_vehicles]
    lead = params.L / params.v_max
    vehicles = [Vehicle(i + 1, Movement(m), t + lead, t, params.L, params.v_max)
                for i, (t, m) in enumerate(tagged)]
    return Scenario(params, tuple(vehicles))


@dataclass(frozen=True)
class TimingPoint:
    strategy: Strategy
    n_vehicles: int
    samples: int
    mean_ms: float


def timing_curve(counts: Sequence[int], lam: float, samples: int, params: Params, seed: int,
                 strategies: Sequence[Strategy] = tuple(Strategy),
                 budget: int = DEFAULT_BUDGET) -> list[TimingPoint]:
    """Mean planning wall-clock per strategy and vehicle count.

    The planning strategy runs as plain full enumeration here, which is the
    method whose cost curve is of interest. Every strategy sees the same
    sampled scenarios.
    """
    out = []
    for n in counts:
        rng = np.random.default_rng(np.random.SeedSequence([seed, n]))
        scenarios = [snapshot_scenario(n, lam, params, rng) for _ in range(samples)]
        for strat in strategies:
            strat = Strategy(strat)
            total = 0.0
            for sc in scenarios:
                started = time.perf_counter()
                solve(sc, strat, budget=budget, prune=False)
                total += time.perf_counter() - started
            out.append(TimingPoint(strat, n, samples, total * 1000.0 / samples))
    return out
