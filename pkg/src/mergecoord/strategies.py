"""The three cooperative driving strategies: FIFO, planning and grouping."""

from __future__ import annotations

import enum
import itertools
from dataclasses import dataclass
from typing import Iterator, Sequence

import numpy as np

from .model import Movement, Scenario
from .scheduling import (
    PassingOrder,
    Schedule,
    check_budget,
    evaluate_all,
    schedule_order,
    unrank_interleaving,
)

DEFAULT_BUDGET = 10**7
_PRUNE_SLACK = 1e-9


class Strategy(str, enum.Enum):
    PLANNING = "planning"
    FIFO = "fifo"
    GROUPING = "grouping"


@dataclass(frozen=True)
class GroupPartition:
    groups: tuple[tuple[Movement, tuple[int, ...]], ...]
    threshold_used: float
    iterations: int

    def lane_groups(self, movement: Movement) -> list[tuple[int, ...]]:
        return [ids for mov, ids in self.groups if mov is movement]


def solve_fifo(scenario: Scenario) -> Schedule:
    """Serve vehicles by ascending minimum access time (ties: lower id)."""
    order = sorted(scenario.vehicles, key=lambda v: (v.t_min, v.id))
    return schedule_order(scenario, PassingOrder(tuple(v.id for v in order)))


def _search_blocks(scenario: Scenario, main: Sequence[tuple[int, ...]],
                   ramp: Sequence[tuple[int, ...]], prune: bool):
    """Depth-first search over interleavings of two block sequences.

    Blocks keep their internal order and are placed whole. Main-first child
    order makes the visit order lexicographic, and only strictly better
    leaves replace the incumbent, so ties resolve to the first order in
    enumeration order. Returns (block choice string, J, leaves visited).
    """
    p = scenario.params
    veh = scenario.by_id()
    dt1, dt2, w1, w2 = p.dt1, p.dt2, p.w1, p.w2
    blocks = ([[veh[i].t_min for i in b] for b in main],
              [[veh[i].t_min for i in b] for b in ramp])
    counts = (len(main), len(ramp))
    # flat per-lane t_min lists for the lower bound
    lane_tm = ([t for b in blocks[0] for t in b], [t for b in blocks[1] for t in b])
    lane_start = ([0], [0])
    for m in (0, 1):
        for b in blocks[m]:
            lane_start[m].append(lane_start[m][-1] + len(b))

    best_J = float("inf")
    best_path: list[int] = []
    leaves = 0
    path: list[int] = []

    def bound(placed, t, s):
        final = t
        extra = 0.0
        for m in (0, 1):
            L = t
            for tm in lane_tm[m][lane_start[m][placed[m]]:]:
                L = tm if L is None else max(L + dt1, tm)
                extra += L - tm
            if L is not None and L > final:
                final = L
        return w1 * final + w2 * (s + extra)

    def visit(placed, last, t, s):
        nonlocal best_J, best_path, leaves
        if placed[0] == counts[0] and placed[1] == counts[1]:
            leaves += 1
            J = w1 * t + w2 * s if t is not None else 0.0
            if J < best_J:
                best_J = J
                best_path = list(path)
            return
        if prune and t is not None and bound(placed, t, s) > best_J + _PRUNE_SLACK:
            return
        for m in (0, 1):
            k = placed[m]
            if k == counts[m]:
                continue
            nt, ns, prev = t, s, last
            for tm in blocks[m][k]:
                if nt is None:
                    nt = tm
                else:
                    nt = max(nt + (dt1 if m == prev else dt2), tm)
                ns += nt - tm
                prev = m
            path.append(m)
            nxt = (k + 1, placed[1]) if m == 0 else (placed[0], k + 1)
            visit(nxt, m, nt, ns)
            path.pop()

    if scenario.anchor is None:
        visit((0, 0), None, None, 0.0)
    else:
        visit((0, 0), int(scenario.anchor.movement), scenario.anchor.time, 0.0)
    return best_path, best_J, leaves


def _expand(path: Sequence[int], main, ramp) -> PassingOrder:
    it = (iter(main), iter(ramp))
    return PassingOrder(tuple(i for m in path for i in next(it[m])))


def solve_planning(scenario: Scenario, prune: bool = True,
                   budget: int = DEFAULT_BUDGET) -> Schedule:
    """Global minimum of ``J`` over all interleavings.

    ``prune=False`` evaluates the whole space with the vectorized
    enumerator; ``prune=True`` runs a branch-and-bound whose bound chains
    each lane's remaining vehicles at the same-movement gap after the
    current tail. Both return the first optimum in enumeration order.
    """
    total = check_budget(scenario, budget)
    if not prune:
        values = evaluate_all(scenario, budget)
        best = int(np.argmin(values))
        sched = schedule_order(scenario, unrank_interleaving(scenario, best))
        return Schedule(sched.order, sched.t_assign, sched.J, sched.delays, total)
    main = [(v.id,) for v in scenario.lane(Movement.MAIN)]
    ramp = [(v.id,) for v in scenario.lane(Movement.RAMP)]
    path, _, leaves = _search_blocks(scenario, main, ramp, prune=True)
    sched = schedule_order(scenario, _expand(path, main, ramp))
    return Schedule(sched.order, sched.t_assign, sched.J, sched.delays, leaves)


def _group_lane(vehicles, threshold: float) -> list[tuple[int, ...]]:
    groups: list[list[int]] = []
    prev = None
    for v in vehicles:
        if prev is not None and v.t_min - prev.t_min < threshold:
            groups[-1].append(v.id)
        else:
            groups.append([v.id])
        prev = v
    return [tuple(g) for g in groups]


def group_at(scenario: Scenario, threshold: float) -> list[tuple[Movement, tuple[int, ...]]]:
    """Partition each lane where consecutive headways reach ``threshold``."""
    out = []
    for m in Movement:
        out.extend((m, g) for g in _group_lane(scenario.lane(m), threshold))
    out.sort(key=lambda item: item[1][0])
    return out


def form_groups(scenario: Scenario) -> GroupPartition:
    """Adaptive-threshold grouping capped at ``max_groups`` groups."""
    p = scenario.params
    k = 0
    while True:
        threshold = round(p.threshold_init + k * p.threshold_step, 10)
        groups = group_at(scenario, threshold)
        if len(groups) <= p.max_groups:
            return GroupPartition(tuple(groups), threshold, k)
        k += 1


def grouped_orders(scenario: Scenario, partition: GroupPartition) -> Iterator[PassingOrder]:
    """Expanded vehicle orders of every group-level interleaving."""
    main = partition.lane_groups(Movement.MAIN)
    ramp = partition.lane_groups(Movement.RAMP)
    n = len(main) + len(ramp)
    for slots in itertools.combinations(range(n), len(main)):
        chosen = set(slots)
        yield _expand([0 if k in chosen else 1 for k in range(n)], main, ramp)


def solve_grouping(scenario: Scenario) -> Schedule:
    """Best order among interleavings of groups, each group kept contiguous."""
    partition = form_groups(scenario)
    main = partition.lane_groups(Movement.MAIN)
    ramp = partition.lane_groups(Movement.RAMP)
    path, _, leaves = _search_blocks(scenario, main, ramp, prune=False)
    sched = schedule_order(scenario, _expand(path, main, ramp))
    return Schedule(sched.order, sched.t_assign, sched.J, sched.delays, leaves)


def solve(scenario: Scenario, strategy: Strategy | str, budget: int = DEFAULT_BUDGET,
          prune: bool = True) -> Schedule:
    strategy = Strategy(strategy)
    if strategy is Strategy.FIFO:
        return solve_fifo(scenario)
    if strategy is Strategy.GROUPING:
        return solve_grouping(scenario)
    return solve_planning(scenario, prune=prune, budget=budget)
