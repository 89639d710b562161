"""Domain types, configuration and validation shared by every other module."""

from __future__ import annotations

import configparser
import enum
import json
from dataclasses import dataclass, fields, replace
from pathlib import Path
from typing import Iterable, Optional, Sequence


class MergeCoordError(Exception):
    """Base class for all errors raised by this package."""


class ContractViolation(MergeCoordError, ValueError):
    """A documented precondition was not met by the caller."""


class ConfigError(MergeCoordError, ValueError):
    """Configuration file could not be read or holds invalid values."""

    def __init__(self, violations: Sequence[str]):
        self.violations = list(violations)
        super().__init__("; ".join(self.violations))


class Movement(enum.IntEnum):
    MAIN = 0
    RAMP = 1

    def other(self) -> "Movement":
        return Movement.RAMP if self is Movement.MAIN else Movement.MAIN


@dataclass(frozen=True)
class Params:
    """Scenario constants.

    Times are seconds, distances meters. ``dt1`` is the same-movement safety
    gap and ``dt2`` the conflict-movement gap at the merging zone.
    """

    dt1: float = 1.5
    dt2: float = 2.0
    a_min: float = -3.0
    a_max: float = 3.0
    v_min: float = 0.0
    v_max: float = 10.0
    w1: float = 0.5
    w2: float = 0.5
    L: float = 150.0
    T: float = 2.0
    max_groups: int = 12
    threshold_init: float = 1.5
    threshold_step: float = 0.1

    def to_dict(self) -> dict:
        return {f.name: getattr(self, f.name) for f in fields(self)}


PARAM_KEYS = tuple(f.name for f in fields(Params))
_INT_KEYS = {"max_groups"}


def validate_config(params: Params) -> list[str]:
    """Return one description per violated invariant; empty means valid."""
    p = params
    out = []
    if not p.dt1 > 0:
        out.append(f"dt1: must be > 0 (got {p.dt1})")
    if not p.dt2 > p.dt1:
        out.append(f"dt2: must satisfy dt2 > dt1 (got dt2={p.dt2}, dt1={p.dt1})")
    if not p.a_min < 0:
        out.append(f"a_min: must be < 0 (got {p.a_min})")
    if not p.a_max > 0:
        out.append(f"a_max: must be > 0 (got {p.a_max})")
    if not p.v_min >= 0:
        out.append(f"v_min: must be >= 0 (got {p.v_min})")
    if not p.v_max > p.v_min:
        out.append(f"v_max: must satisfy v_max > v_min (got v_max={p.v_max}, v_min={p.v_min})")
    for name in ("w1", "w2"):
        if not getattr(p, name) >= 0:
            out.append(f"{name}: weights must be nonnegative (got {getattr(p, name)})")
    if not p.L > 0:
        out.append(f"L: must be > 0 (got {p.L})")
    if not p.T > 0:
        out.append(f"T: must be > 0 (got {p.T})")
    if not (isinstance(p.max_groups, int) and p.max_groups >= 2):
        out.append(f"max_groups: must be an integer >= 2 (got {p.max_groups})")
    if not p.threshold_init > 0:
        out.append(f"threshold_init: must be > 0 (got {p.threshold_init})")
    if not p.threshold_step > 0:
        out.append(f"threshold_step: must be > 0 (got {p.threshold_step})")
    return out


def load_params(path: str | Path, base: Optional[Params] = None) -> Params:
    """Read a flat key-value config file into :class:`Params`.

    ``.json`` files hold one flat object; anything else is read as
    ``key = value`` lines (``#`` comments allowed). Keys not given keep the
    value from ``base`` (defaults if omitted). Unknown keys are an error.
    Invariants are *not* checked here; call :func:`validate_config`.
    """
    path = Path(path)
    text = path.read_text(encoding="utf-8")
    if path.suffix.lower() == ".json":
        raw = json.loads(text)
        if not isinstance(raw, dict):
            raise ConfigError([f"{path}: expected a flat JSON object"])
    else:
        cp = configparser.ConfigParser(inline_comment_prefixes=("#", ";"))
        cp.optionxform = str  # keep key case (L, T)
        try:
            cp.read_string("[params]\n" + text, source=str(path))
        except configparser.Error as exc:
            raise ConfigError([f"{path}: {exc}"]) from exc
        raw = dict(cp["params"])

    unknown = sorted(set(raw) - set(PARAM_KEYS))
    if unknown:
        raise ConfigError([f"{k}: unknown configuration key" for k in unknown])
    values = {}
    errors = []
    for key, val in raw.items():
        try:
            values[key] = int(val) if key in _INT_KEYS else float(val)
        except (TypeError, ValueError):
            errors.append(f"{key}: not a number ({val!r})")
    if errors:
        raise ConfigError(errors)
    return replace(base or Params(), **values)


@dataclass(frozen=True)
class Vehicle:
    """One CAV as seen by the scheduler.

    ``x`` is the distance remaining to the merging zone, ``t_min`` and
    ``t_assign`` are absolute times.
    """

    id: int
    movement: Movement
    t_min: float
    t0: float = 0.0
    x: float = 0.0
    v: float = 0.0
    t_assign: Optional[float] = None

    def __post_init__(self):
        if self.id <= 0:
            raise ContractViolation(f"vehicle id must be positive (got {self.id})")
        if self.x < 0:
            raise ContractViolation(f"vehicle {self.id}: x must be >= 0 (got {self.x})")
        if self.t_assign is not None and self.t_assign < self.t_min:
            raise ContractViolation(
                f"vehicle {self.id}: t_assign {self.t_assign} earlier than t_min {self.t_min}"
            )


@dataclass(frozen=True)
class Anchor:
    """The last already-committed passage preceding every vehicle of a scenario.

    Used by the rolling-horizon simulator so that re-planned vehicles keep
    their safety gaps to vehicles whose assignment is frozen or spent.
    """

    time: float
    movement: Movement


@dataclass(frozen=True)
class Scenario:
    params: Params
    vehicles: tuple[Vehicle, ...]
    anchor: Optional[Anchor] = None

    def __post_init__(self):
        object.__setattr__(self, "vehicles", tuple(self.vehicles))
        p = self.params
        last_id = 0
        last_tmin = {Movement.MAIN: -float("inf"), Movement.RAMP: -float("inf")}
        for veh in self.vehicles:
            if veh.id <= last_id:
                raise ContractViolation("vehicle ids must be strictly increasing")
            last_id = veh.id
            if veh.t_min < last_tmin[veh.movement]:
                raise ContractViolation(
                    f"vehicle {veh.id}: t_min decreases within movement {veh.movement.name}"
                )
            last_tmin[veh.movement] = veh.t_min
            if not (p.v_min - 1e-9 <= veh.v <= p.v_max + 1e-9):
                raise ContractViolation(f"vehicle {veh.id}: velocity {veh.v} outside bounds")

    @classmethod
    def from_tmins(
        cls,
        main: Iterable[float],
        ramp: Iterable[float] = (),
        params: Optional[Params] = None,
        anchor: Optional[Anchor] = None,
    ) -> "Scenario":
        """Build a scenario from per-movement minimum access times.

        Ids follow ascending ``t_min`` (main first on ties), so entry order
        matches arrival order.
        """
        tagged = [(t, Movement.MAIN) for t in main] + [(t, Movement.RAMP) for t in ramp]
        tagged.sort(key=lambda item: (item[0], item[1]))
        vehicles = [Vehicle(i + 1, mov, float(t)) for i, (t, mov) in enumerate(tagged)]
        return cls(params or Params(), tuple(vehicles), anchor)

    def lane(self, movement: Movement) -> tuple[Vehicle, ...]:
        return tuple(v for v in self.vehicles if v.movement is movement)

    def by_id(self) -> dict[int, Vehicle]:
        return {v.id: v for v in self.vehicles}

    def counts(self) -> tuple[int, int]:
        n1 = sum(1 for v in self.vehicles if v.movement is Movement.MAIN)
        return n1, len(self.vehicles) - n1


def time_headway(lead: Vehicle, follow: Vehicle) -> float:
    """Headway between two same-movement vehicles, as a ``t_min`` difference."""
    if lead.movement is not follow.movement:
        raise ContractViolation("time_headway needs two vehicles on the same movement")
    if follow.id <= lead.id:
        raise ContractViolation("follow vehicle must have entered after lead vehicle")
    return follow.t_min - lead.t_min
