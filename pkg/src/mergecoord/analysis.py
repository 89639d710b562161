"""Headway probability model, the four-vehicle special case and solution ranking."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from ._parallel import pmap
from .model import ContractViolation, Params, Scenario
from .scheduling import evaluate_all
from .strategies import DEFAULT_BUDGET, solve_fifo, solve_grouping

RANK_TOL = 1e-9
DEFAULT_G = (1, 2, 3, 5, 10, 20, 32, 50, 100, 200, 500, 1000)
MC_CHUNK = 250_000


@dataclass(frozen=True)
class HeadwayModel:
    """Displaced exponential headways: ``tau`` plus an exponential of mean ``h_bar - tau``."""

    lam: float
    tau: float

    def __post_init__(self):
        if not (self.lam > 0 and self.tau > 0 and self.h_bar > self.tau):
            raise ContractViolation(
                f"headway model needs 1/lambda > tau > 0 (lambda={self.lam}, tau={self.tau})"
            )

    @property
    def h_bar(self) -> float:
        return 1.0 / self.lam

    def sample(self, rng: np.random.Generator, size=None):
        return self.tau + rng.exponential(self.h_bar - self.tau, size)


def headway_cdf(model: HeadwayModel, H: float) -> float:
    if H <= model.tau:
        return 0.0
    return -math.expm1(-(H - model.tau) / (model.h_bar - model.tau))


def interval_probability(model: HeadwayModel, H1: float, H2: float) -> float:
    if H1 > H2:
        raise ContractViolation(f"interval needs H1 <= H2 (got {H1} > {H2})")
    return headway_cdf(model, H2) - headway_cdf(model, H1)


def special_case_probability(params: Params, delta: float, lambda1: float,
                             lambda2: float) -> float:
    """Probability that the four-vehicle headways fall in the region where
    grouping A and B can lose against the ACBD order.

    Both lanes use ``dt1`` as the minimum headway.
    """
    if delta < params.dt1:
        raise ContractViolation(f"delta={delta} must be >= dt1={params.dt1}")
    dt1, dt2 = params.dt1, params.dt2
    lane1 = HeadwayModel(lambda1, dt1)
    lane2 = HeadwayModel(lambda2, dt1)
    return (interval_probability(lane1, dt1, delta)
            * interval_probability(lane2, dt2 - dt1, dt2 - dt1 + delta)
            * interval_probability(lane1, dt1 + dt2, 2 * dt2 + delta))


def in_special_region(params: Params, delta: float, h_ab, c_off, d_off):
    """Membership in the relaxed region, vectorized over samples.

    ``h_ab`` is B's offset from A, ``c_off`` and ``d_off`` the offsets of C
    and D from A.
    """
    dt1, dt2 = params.dt1, params.dt2
    h_ab, c_off, d_off = map(np.asarray, (h_ab, c_off, d_off))
    return ((dt1 <= h_ab) & (h_ab <= delta)
            & (dt2 - dt1 <= c_off) & (c_off <= dt2 - dt1 + delta)
            & (dt1 + dt2 <= d_off) & (d_off <= 2 * dt2 + delta))


def sample_special_case(rng: np.random.Generator, size: int, lambda1: float,
                        lambda2: float, params: Params):
    """Draw (h_ab, c_off, d_off) for the four-vehicle case.

    The three offsets are independent displaced-exponential draws, the same
    independence the closed form multiplies out: h_ab and d_off from lane 1,
    c_off from lane 2.
    """
    lane1 = HeadwayModel(lambda1, params.dt1)
    lane2 = HeadwayModel(lambda2, params.dt1)
    return lane1.sample(rng, size), lane2.sample(rng, size), lane1.sample(rng, size)


def four_vehicle_passing_times(params: Params, h_ab, c_off, d_off) -> dict[str, np.ndarray]:
    """Total passing time of ABCD, ABDC, ACBD and CABD with A at t_min 0.

    D is kept behind B by at least ``dt1`` so the lane order stays valid.
    """
    dt1, dt2 = params.dt1, params.dt2
    tA = np.zeros_like(np.asarray(h_ab, dtype=float))
    tB = np.asarray(h_ab, dtype=float)
    tC = np.asarray(c_off, dtype=float)
    tD = np.maximum(np.asarray(d_off, dtype=float), tB + dt1)
    t_min = {"A": tA, "B": tB, "C": tC, "D": tD}
    lane = {"A": 1, "B": 1, "D": 1, "C": 2}
    out = {}
    for order in ("ABCD", "ABDC", "ACBD", "CABD"):
        t = t_min[order[0]]
        for prev, cur in zip(order, order[1:]):
            gap = dt1 if lane[prev] == lane[cur] else dt2
            t = np.maximum(t + gap, t_min[cur])
        out[order] = t
    return out


@dataclass(frozen=True)
class SpecialCaseMC:
    trials: int
    p_region: float
    p_acbd_optimal: float
    se_region: float
    se_acbd: float


def _mc_chunk(args):
    seed_seq, size, params, delta, lambda1, lambda2 = args
    rng = np.random.default_rng(seed_seq)
    h_ab, c_off, d_off = sample_special_case(rng, size, lambda1, lambda2, params)
    region = in_special_region(params, delta, h_ab, c_off, d_off)
    times = four_vehicle_passing_times(params, h_ab, c_off, d_off)
    acbd = times["ACBD"]
    best = (acbd < times["ABCD"]) & (acbd < times["ABDC"]) & (acbd < times["CABD"])
    # grouping only loses when A and B would actually be grouped
    loses = best & (h_ab <= delta)
    return int(region.sum()), int(loses.sum())


def mc_special_case(params: Params, delta: float, lambda1: float, lambda2: float,
                    trials: int, seed: int) -> SpecialCaseMC:
    """Monte-Carlo estimate of the region probability and of the frequency
    with which grouping A,B misses a strictly faster ACBD order.

    Trials are split into fixed-size chunks with spawned seed substreams, so
    results depend only on ``seed`` and ``trials``, not on worker count.
    """
    if trials < 1:
        raise ContractViolation("trials must be >= 1")
    n_chunks = -(-trials // MC_CHUNK)
    seqs = np.random.SeedSequence(seed).spawn(n_chunks)
    sizes = [MC_CHUNK] * (n_chunks - 1) + [trials - MC_CHUNK * (n_chunks - 1)]
    parts = pmap(_mc_chunk, [(s, n, params, delta, lambda1, lambda2) for s, n in zip(seqs, sizes)])
    hits_region = sum(r for r, _ in parts)
    hits_acbd = sum(a for _, a in parts)
    p_r = hits_region / trials
    p_a = hits_acbd / trials
    if p_a > p_r:
        raise AssertionError(f"p_acbd_optimal {p_a} exceeds p_region {p_r}")
    return SpecialCaseMC(trials, p_r, p_a,
                         math.sqrt(p_r * (1 - p_r) / trials),
                         math.sqrt(p_a * (1 - p_a) / trials))


@dataclass(frozen=True)
class AlignmentReport:
    total_orders: int
    rank: int
    top_fraction: float
    curve: tuple[tuple[int, bool], ...]

    @property
    def better_fraction(self) -> float:
        """Share of orders strictly better than the candidate."""
        return (self.rank - 1) / self.total_orders


def rank_in(values: np.ndarray, J_candidate: float) -> int:
    """1 + number of values strictly below the candidate (ties share the best rank)."""
    return 1 + int(np.count_nonzero(values < J_candidate - RANK_TOL))


def rank_of(scenario: Scenario, J_candidate: float, budget: int = DEFAULT_BUDGET,
            g_values: Sequence[int] = DEFAULT_G,
            values: Optional[np.ndarray] = None) -> AlignmentReport:
    """Rank a candidate objective among all passing orders of ``scenario``.

    Pass ``values`` to reuse an :func:`evaluate_all` result.
    """
    if values is None:
        values = evaluate_all(scenario, budget)
    total = len(values)
    rank = rank_in(values, J_candidate)
    curve = tuple((g, rank <= g) for g in g_values)
    return AlignmentReport(total, rank, rank / total, curve)


@dataclass(frozen=True)
class Histogram:
    edges: np.ndarray
    counts: np.ndarray
    marks: dict[str, tuple[float, int]]
    total_orders: int

    def rows(self):
        for k, c in enumerate(self.counts):
            yield float(self.edges[k]), float(self.edges[k + 1]), int(c)


def histogram_of_solutions(scenario: Scenario, bins: int,
                           budget: int = DEFAULT_BUDGET) -> Histogram:
    """Equal-width histogram of ``J`` over every order, with the grouping and
    FIFO solutions marked as (J, rank)."""
    if bins < 1:
        raise ContractViolation("bins must be >= 1")
    values = evaluate_all(scenario, budget)
    lo, hi = float(values.min()), float(values.max())
    if hi <= lo:
        edges = np.array([lo, lo])
        counts = np.array([len(values)])
    else:
        counts, edges = np.histogram(values, bins=bins, range=(lo, hi))
    marks = {}
    for name, sched in (("grouping", solve_grouping(scenario)), ("fifo", solve_fifo(scenario))):
        marks[name] = (sched.J, rank_in(values, sched.J))
    return Histogram(edges, counts, marks, len(values))
