"""Fixed-order scheduling, objective evaluation and the interleaving solution space.

Per-movement order is fixed, so a passing order is an interleaving of the
two lane sequences. It is represented by the list of vehicle ids; the
binary ordering matrix of the MILP view is implicit in it.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from typing import Iterator, Optional, Sequence

import numpy as np

from .model import Anchor, MergeCoordError, Movement, Params, Scenario

INT64_MAX = 2**63 - 1


class InvalidOrderError(MergeCoordError, ValueError):
    """A passing order omits, duplicates or reorders vehicles of a lane."""


class BudgetExceededError(MergeCoordError, RuntimeError):
    def __init__(self, count: int, budget: int, context: str = ""):
        self.count = count
        self.budget = budget
        msg = f"{count} passing orders exceed the enumeration budget of {budget}"
        super().__init__(f"{context}: {msg}" if context else msg)


@dataclass(frozen=True)
class PassingOrder:
    sequence: tuple[int, ...]

    def __post_init__(self):
        object.__setattr__(self, "sequence", tuple(self.sequence))

    def __len__(self) -> int:
        return len(self.sequence)

    def __iter__(self):
        return iter(self.sequence)

    def label(self, names: dict[int, str]) -> str:
        return "".join(names[i] for i in self.sequence)


@dataclass(frozen=True)
class Schedule:
    order: PassingOrder
    t_assign: dict[int, float]
    J: float
    delays: dict[int, float]
    searched: int = 1

    @property
    def passing_time(self) -> float:
        return max(self.t_assign.values()) if self.t_assign else 0.0


def assign_times(
    t_mins: Sequence[float],
    movements: Sequence[int],
    params: Params,
    anchor: Optional[Anchor] = None,
) -> tuple[list[float], float, float]:
    """Access-time recurrence on plain sequences; returns (t_assign, J, summed delay)."""
    dt1, dt2 = params.dt1, params.dt2
    out = []
    if anchor is None:
        t, last = None, None
    else:
        t, last = anchor.time, int(anchor.movement)
    s = 0.0
    for tm, mov in zip(t_mins, movements):
        if t is None:
            t = tm
        else:
            t = max(t + (dt1 if mov == last else dt2), tm)
        s += t - tm
        out.append(t)
        last = mov
    J = params.w1 * t + params.w2 * s if out else 0.0
    return out, J, s


def lane_order_valid(scenario: Scenario, order: PassingOrder) -> bool:
    ids = [v.id for v in scenario.vehicles]
    if sorted(order.sequence) != sorted(ids) or len(set(order.sequence)) != len(ids):
        return False
    mov = {v.id: v.movement for v in scenario.vehicles}
    for m in Movement:
        lane = [i for i in order.sequence if mov[i] is m]
        if lane != [v.id for v in scenario.lane(m)]:
            return False
    return True


def schedule_order(scenario: Scenario, order: PassingOrder) -> Schedule:
    """Assign access times for a fixed passing order and evaluate ``J``."""
    if not lane_order_valid(scenario, order):
        raise InvalidOrderError(f"order {order.sequence} is not a lane-order-preserving permutation")
    veh = scenario.by_id()
    tm = [veh[i].t_min for i in order.sequence]
    mv = [int(veh[i].movement) for i in order.sequence]
    times, J, _ = assign_times(tm, mv, scenario.params, scenario.anchor)
    t_assign = dict(zip(order.sequence, times))
    delays = {i: t_assign[i] - veh[i].t_min for i in order.sequence}
    return Schedule(order, t_assign, J, delays)


def interleaving_count(n1: int, n2: int) -> int:
    if n1 < 0 or n2 < 0:
        raise ValueError("vehicle counts must be nonnegative")
    count = math.comb(n1 + n2, n1)
    if count > INT64_MAX:
        raise OverflowError(f"C({n1 + n2}, {n1}) does not fit in a signed 64-bit count")
    return count


def check_budget(scenario: Scenario, budget: int, context: str = "") -> int:
    count = interleaving_count(*scenario.counts())
    if count > budget:
        raise BudgetExceededError(count, budget, context)
    return count


def enumerate_interleavings(scenario: Scenario) -> Iterator[PassingOrder]:
    """Yield every lane-order-preserving order once, lexicographic in the
    movement-choice string with main (0) before ramp (1)."""
    main = [v.id for v in scenario.lane(Movement.MAIN)]
    ramp = [v.id for v in scenario.lane(Movement.RAMP)]
    n = len(main) + len(ramp)
    for slots in itertools.combinations(range(n), len(main)):
        mi = iter(main)
        ri = iter(ramp)
        chosen = set(slots)
        yield PassingOrder(tuple(next(mi) if k in chosen else next(ri) for k in range(n)))


def unrank_interleaving(scenario: Scenario, index: int) -> PassingOrder:
    """The ``index``-th order (0-based) in :func:`enumerate_interleavings` order."""
    main = [v.id for v in scenario.lane(Movement.MAIN)]
    ramp = [v.id for v in scenario.lane(Movement.RAMP)]
    a, b = len(main), len(ramp)
    if not 0 <= index < math.comb(a + b, a):
        raise IndexError(index)
    seq = []
    i = j = 0
    while i < a or j < b:
        # orders starting with a main vehicle come first
        with_main = math.comb(a - i - 1 + b - j, a - i - 1) if i < a else 0
        if index < with_main:
            seq.append(main[i])
            i += 1
        else:
            index -= with_main
            seq.append(ramp[j])
            j += 1
    return PassingOrder(tuple(seq))


def evaluate_all(scenario: Scenario, budget: int = 10**7) -> np.ndarray:
    """Objective of every interleaving, in enumeration order.

    Level-synchronous expansion of the order tree: each level holds all
    prefixes of that length in lexicographic order, so the final array lines
    up with :func:`enumerate_interleavings` and :func:`unrank_interleaving`.
    The arithmetic mirrors :func:`assign_times` operation for operation.
    """
    check_budget(scenario, budget)
    p = scenario.params
    tm_main = np.array([v.t_min for v in scenario.lane(Movement.MAIN)], dtype=float)
    tm_ramp = np.array([v.t_min for v in scenario.lane(Movement.RAMP)], dtype=float)
    n1, n2 = len(tm_main), len(tm_ramp)
    if n1 + n2 == 0:
        return np.zeros(1)

    placed_main = np.zeros(1, dtype=np.int16)
    if scenario.anchor is None:
        last = np.full(1, -1, dtype=np.int8)
        t = np.zeros(1)
    else:
        last = np.full(1, int(scenario.anchor.movement), dtype=np.int8)
        t = np.full(1, scenario.anchor.time)
    s = np.zeros(1)
    pad_main = np.append(tm_main, 0.0)
    pad_ramp = np.append(tm_ramp, 0.0)

    for depth in range(n1 + n2):
        can_main = placed_main < n1
        can_ramp = (depth - placed_main) < n2
        offset = np.cumsum(can_main.astype(np.int64) + can_ramp) - can_main - can_ramp
        size = int(offset[-1] + can_main[-1] + can_ramp[-1])
        nt = np.empty(size)
        ns = np.empty(size)
        nlast = np.empty(size, dtype=np.int8)
        nplaced = np.empty(size, dtype=np.int16)
        for mov, can, pos, tmins in (
            (0, can_main, offset, pad_main[placed_main]),
            (1, can_ramp, offset + can_main, pad_ramp[depth - placed_main]),
        ):
            gap = np.where(last == mov, p.dt1, p.dt2)
            child_t = np.where(last < 0, tmins, np.maximum(t + gap, tmins))
            child_s = s + (child_t - tmins)
            idx = pos[can]
            nt[idx] = child_t[can]
            ns[idx] = child_s[can]
            nlast[idx] = mov
            nplaced[idx] = placed_main[can] + (1 - mov)
        t, s, last, placed_main = nt, ns, nlast, nplaced
    return p.w1 * t + p.w2 * s
