"""Shared domain types: clinician contracts, problem instances, schedule tensors.

Clinicians, shift types and days are dense 0-based integer ids. Dates are
ISO-8601 strings at the file boundary and day indices everywhere else.
"""

from __future__ import annotations

import csv
import datetime as dt
import io
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

__all__ = [
    "InputError",
    "ClinicianContract",
    "ShiftType",
    "ProblemInstance",
    "ScheduleMatrix",
    "Violation",
    "ViolationReport",
    "validate_schedule",
    "month_duty_days",
    "parse_schedule_csv",
    "read_schedule_csv",
    "write_schedule_csv",
    "read_instance_json",
    "write_instance_json",
]


class InputError(ValueError):
    """Rejected input: shapes, ids or values that break a type invariant."""


@dataclass(frozen=True)
class ClinicianContract:
    clinician: int
    cfte: float
    workload_lb: int
    workload_ub: int
    weekend_cap: int
    group: int = 0

    def __post_init__(self):
        if not 0.0 <= self.cfte <= 1.0:
            raise InputError(f"clinician {self.clinician}: cfte {self.cfte} outside [0, 1]")
        if self.workload_lb < 0 or self.workload_lb > self.workload_ub:
            raise InputError(
                f"clinician {self.clinician}: workload bounds "
                f"[{self.workload_lb}, {self.workload_ub}] invalid"
            )
        if self.weekend_cap < 0:
            raise InputError(f"clinician {self.clinician}: negative weekend cap")


@dataclass(frozen=True)
class ShiftType:
    id: int
    name: str


def _frozen(a, dtype) -> np.ndarray:
    a = np.array(a, dtype=dtype, copy=True)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class ProblemInstance:
    """One scheduling horizon: who can work, which shifts exist, what is needed.

    ``demand`` has shape ``(n_shift_types, n_days)`` and is zero outside
    ``duty_days``.
    """

    clinicians: tuple[ClinicianContract, ...]
    shift_types: tuple[ShiftType, ...]
    horizon: tuple[str, ...]
    duty_days: tuple[int, ...]
    weekend_days: tuple[int, ...]
    demand: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "clinicians", tuple(self.clinicians))
        object.__setattr__(self, "shift_types", tuple(self.shift_types))
        object.__setattr__(self, "horizon", tuple(str(d) for d in self.horizon))
        object.__setattr__(self, "duty_days", tuple(sorted(int(t) for t in self.duty_days)))
        object.__setattr__(self, "weekend_days", tuple(sorted(int(t) for t in self.weekend_days)))
        demand = np.asarray(self.demand)
        if demand.shape != (len(self.shift_types), len(self.horizon)):
            raise InputError(
                f"demand shape {demand.shape} != "
                f"({len(self.shift_types)}, {len(self.horizon)})"
            )
        if np.any(demand < 0) or not np.all(demand == np.round(demand)):
            raise InputError("demand must be non-negative integers")
        object.__setattr__(self, "demand", _frozen(demand, np.int64))

        if [c.clinician for c in self.clinicians] != list(range(len(self.clinicians))):
            raise InputError("clinician ids must be dense 0..N-1 in order")
        if [s.id for s in self.shift_types] != list(range(len(self.shift_types))):
            raise InputError("shift type ids must be dense 0..S-1 in order")
        n_days = len(self.horizon)
        for name in ("duty_days", "weekend_days"):
            days = getattr(self, name)
            if len(set(days)) != len(days) or any(t < 0 or t >= n_days for t in days):
                raise InputError(f"{name} must be distinct indices into the horizon")
        off_duty = np.ones(n_days, dtype=bool)
        off_duty[list(self.duty_days)] = False
        if np.any(self.demand[:, off_duty] != 0):
            raise InputError("demand must be zero outside duty days")

    @property
    def n_clinicians(self) -> int:
        return len(self.clinicians)

    @property
    def n_shift_types(self) -> int:
        return len(self.shift_types)

    @property
    def n_days(self) -> int:
        return len(self.horizon)

    @property
    def shape(self) -> tuple[int, int, int]:
        return (self.n_clinicians, self.n_shift_types, self.n_days)

    @property
    def cfte(self) -> np.ndarray:
        return np.array([c.cfte for c in self.clinicians], dtype=float)

    def shift_type_index(self, name: str) -> int:
        for s in self.shift_types:
            if s.name == name:
                return s.id
        raise KeyError(name)

    def dates(self) -> list[dt.date]:
        return [dt.date.fromisoformat(d) for d in self.horizon]

    def overbooked_days(self) -> list[int]:
        """Days whose total demand exceeds the clinician count."""
        total = self.demand.sum(axis=0)
        return [int(t) for t in np.flatnonzero(total > self.n_clinicians)]


@dataclass(frozen=True, eq=False)
class ScheduleMatrix:
    """Binary assignment tensor ``B[i, s, t]``."""

    entries: np.ndarray

    def __post_init__(self):
        b = np.asarray(self.entries)
        if b.ndim != 3:
            raise InputError(f"schedule must be 3-D, got shape {b.shape}")
        if not np.all((b == 0) | (b == 1)):
            raise InputError("schedule entries must be 0 or 1")
        object.__setattr__(self, "entries", _frozen(b, np.int8))

    @classmethod
    def zeros(cls, shape: tuple[int, int, int]) -> "ScheduleMatrix":
        return cls(np.zeros(shape, dtype=np.int8))

    @property
    def shape(self) -> tuple[int, int, int]:
        return self.entries.shape

    def worked(self) -> np.ndarray:
        """``(n_clinicians, n_days)`` 0/1 array: clinician works any shift that day."""
        return (self.entries.sum(axis=1) > 0).astype(np.int8)

    def n_assigned(self) -> int:
        return int(self.entries.sum())

    def __eq__(self, other):
        if not isinstance(other, ScheduleMatrix):
            return NotImplemented
        return self.shape == other.shape and bool(np.array_equal(self.entries, other.entries))

    __hash__ = None


@dataclass(frozen=True)
class Violation:
    family: str
    index: tuple[int, ...]
    expected: str
    actual: int


@dataclass(frozen=True)
class ViolationReport:
    violations: tuple[Violation, ...] = field(default_factory=tuple)

    FAMILIES = ("demand", "one_shift_per_day", "workload", "availability", "weekend")

    def __len__(self) -> int:
        return len(self.violations)

    def by_family(self, family: str) -> list[Violation]:
        return [v for v in self.violations if v.family == family]

    @property
    def ok(self) -> bool:
        return not self.violations


def validate_schedule(
    sched: ScheduleMatrix,
    inst: ProblemInstance,
    hard_available: np.ndarray | None = None,
) -> ViolationReport:
    """Check a schedule against the five hard constraint families.

    Families: demand met exactly, at most one shift per clinician-day,
    workload bounds, hard availability, weekend caps.

    ``hard_available`` is the ``(n_clinicians, n_days)`` 0/1 mask; when
    omitted every clinician-day counts as available.
    """
    if sched.shape != inst.shape:
        raise InputError(f"schedule shape {sched.shape} != instance shape {inst.shape}")
    b = sched.entries.astype(np.int64)
    out: list[Violation] = []

    filled = b.sum(axis=0)
    for s, t in zip(*np.nonzero(filled != inst.demand)):
        out.append(Violation("demand", (int(s), int(t)), f"== {inst.demand[s, t]}", int(filled[s, t])))

    per_day = b.sum(axis=1)
    for i, t in zip(*np.nonzero(per_day > 1)):
        out.append(Violation("one_shift_per_day", (int(i), int(t)), "<= 1", int(per_day[i, t])))

    load = b.sum(axis=(1, 2))
    for c in inst.clinicians:
        n = int(load[c.clinician])
        if not c.workload_lb <= n <= c.workload_ub:
            out.append(
                Violation("workload", (c.clinician,), f"in [{c.workload_lb}, {c.workload_ub}]", n)
            )

    if hard_available is not None:
        mask = np.asarray(hard_available)
        if mask.shape != (inst.n_clinicians, inst.n_days):
            raise InputError(f"hard availability mask shape {mask.shape} mismatched")
        for i, s, t in zip(*np.nonzero((b == 1) & (mask[:, None, :] == 0))):
            out.append(Violation("availability", (int(i), int(s), int(t)), "<= 0", 1))

    if inst.weekend_days:
        wk = b[:, :, list(inst.weekend_days)].sum(axis=(1, 2))
        for c in inst.clinicians:
            if wk[c.clinician] > c.weekend_cap:
                out.append(
                    Violation("weekend", (c.clinician,), f"<= {c.weekend_cap}", int(wk[c.clinician]))
                )
    return ViolationReport(tuple(out))


# --- calendars ---------------------------------------------------------------


def month_duty_days(
    year: int, month: int, holidays: Iterable[str] = ()
) -> tuple[list[str], list[int], list[int]]:
    """Horizon, duty days and weekend days for one calendar month.

    Duty days are weekdays minus ``holidays``; weekends are listed separately
    but carry no duty.
    """
    first = dt.date(year, month, 1)
    nxt = dt.date(year + month // 12, month % 12 + 1, 1)
    skip = set(holidays)
    horizon, duty, weekend = [], [], []
    d = first
    while d < nxt:
        idx = len(horizon)
        horizon.append(d.isoformat())
        if d.weekday() >= 5:
            weekend.append(idx)
        elif d.isoformat() not in skip:
            duty.append(idx)
        d += dt.timedelta(days=1)
    return horizon, duty, weekend


# --- file formats --------------------------------------------------------------


def write_schedule_csv(sched: ScheduleMatrix, inst: ProblemInstance, path=None) -> str:
    """Serialize assigned cells as ``clinician_id,shift_type_id,date,assigned``."""
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["clinician_id", "shift_type_id", "date", "assigned"])
    for i, s, t in zip(*np.nonzero(sched.entries)):
        w.writerow([int(i), int(s), inst.horizon[t], 1])
    text = buf.getvalue()
    if path is not None:
        Path(path).write_text(text)
    return text


def parse_schedule_csv(text: str, inst: ProblemInstance) -> ScheduleMatrix:
    day_of = {d: k for k, d in enumerate(inst.horizon)}
    b = np.zeros(inst.shape, dtype=np.int8)
    for row in csv.DictReader(io.StringIO(text)):
        try:
            i, s = int(row["clinician_id"]), int(row["shift_type_id"])
            t = day_of[row["date"]]
            v = int(row["assigned"])
        except (KeyError, ValueError, TypeError) as exc:
            raise InputError(f"bad schedule row {row!r}") from exc
        if not (0 <= i < inst.n_clinicians and 0 <= s < inst.n_shift_types) or v not in (0, 1):
            raise InputError(f"bad schedule row {row!r}")
        b[i, s, t] = v
    return ScheduleMatrix(b)


def read_schedule_csv(path, inst: ProblemInstance) -> ScheduleMatrix:
    return parse_schedule_csv(Path(path).read_text(), inst)


def instance_to_dict(inst: ProblemInstance) -> dict:
    return {
        "clinicians": [
            {
                "clinician": c.clinician,
                "cfte": c.cfte,
                "workload_lb": c.workload_lb,
                "workload_ub": c.workload_ub,
                "weekend_cap": c.weekend_cap,
                "group": c.group,
            }
            for c in inst.clinicians
        ],
        "shift_types": [{"id": s.id, "name": s.name} for s in inst.shift_types],
        "horizon": list(inst.horizon),
        "duty_days": list(inst.duty_days),
        "weekend_days": list(inst.weekend_days),
        "demand": [
            [int(s), int(t), int(inst.demand[s, t])] for s, t in zip(*np.nonzero(inst.demand))
        ],
    }


def instance_from_dict(obj: dict) -> ProblemInstance:
    try:
        shift_types = [ShiftType(int(s["id"]), str(s["name"])) for s in obj["shift_types"]]
        horizon = list(obj["horizon"])
        demand = np.zeros((len(shift_types), len(horizon)), dtype=np.int64)
        for s, t, r in obj["demand"]:
            demand[int(s), int(t)] = int(r)
        return ProblemInstance(
            clinicians=tuple(ClinicianContract(**c) for c in obj["clinicians"]),
            shift_types=tuple(shift_types),
            horizon=tuple(horizon),
            duty_days=tuple(obj["duty_days"]),
            weekend_days=tuple(obj.get("weekend_days", ())),
            demand=demand,
        )
    except (KeyError, TypeError, IndexError) as exc:
        raise InputError(f"malformed instance object: {exc}") from exc


def write_instance_json(inst: ProblemInstance, path=None) -> str:
    text = json.dumps(instance_to_dict(inst), indent=1, sort_keys=True) + "\n"
    if path is not None:
        Path(path).write_text(text)
    return text


def read_instance_json(path) -> ProblemInstance:
    return instance_from_dict(json.loads(Path(path).read_text()))


def stack_schedules(schedules: Sequence[ScheduleMatrix]) -> np.ndarray:
    return np.stack([s.entries for s in schedules])
