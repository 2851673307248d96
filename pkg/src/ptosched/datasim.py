"""Synthetic multi-month scheduling corpus.

Each month gets a problem instance, a historical schedule template drawn
the way a busy scheduler might fill a grid (cohort habits, absences, some
unfilled slots), and templated free-text notes on a fixed fraction of the
assigned clinician-days. All randomness flows from ``(seed, year, month)``
substreams so months can be generated independently and reproducibly.
"""

from __future__ import annotations

import csv
import datetime as dt
import io
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from .core import (
    ClinicianContract,
    ProblemInstance,
    ScheduleMatrix,
    ShiftType,
    month_duty_days,
)

AVAILABLE = "available"
UNAVAILABLE = "unavailable"
NEUTRAL = "neutral"


class SimConfigError(ValueError):
    """The simulation config cannot produce a valid corpus."""


def _month_range(start: tuple[int, int], n: int) -> tuple[tuple[int, int], ...]:
    y, m = start
    out = []
    for _ in range(n):
        out.append((y, m))
        y, m = (y + 1, 1) if m == 12 else (y, m + 1)
    return tuple(out)


@dataclass
class SimConfig:
    seed: int = 42
    months: tuple = field(default_factory=lambda: _month_range((2023, 1), 20))
    n_clinicians: int = 10
    n_groups: int = 2
    shift_type_names: tuple = ("Clin", "Proc")
    note_rate: float = 0.10
    cfte_range: tuple = (0.45, 0.8)
    # inclusive daily headcount range per shift type
    demand_profile: dict = field(default_factory=lambda: {"Clin": (3, 5), "Proc": (1, 3)})
    # per-month fraction of required slots left unfilled, drawn uniformly
    shortfall_range: tuple = (0.03, 0.2)
    absence_rate: float = 0.3
    weekend_cap: int = 2

    def __post_init__(self):
        self.months = tuple((int(y), int(m)) for y, m in self.months)
        self.shift_type_names = tuple(self.shift_type_names)
        self.cfte_range = tuple(float(v) for v in self.cfte_range)
        self.shortfall_range = tuple(float(v) for v in self.shortfall_range)
        self.demand_profile = {k: (int(v[0]), int(v[1])) for k, v in self.demand_profile.items()}
        self.validate()

    def validate(self) -> None:
        if not self.months:
            raise SimConfigError("months must be nonempty")
        if list(self.months) != sorted(set(self.months)):
            raise SimConfigError("months must be distinct and chronologically ordered")
        if any(not 1 <= m <= 12 for _, m in self.months):
            raise SimConfigError("month numbers must lie in 1..12")
        if not 0.0 <= self.note_rate <= 1.0:
            raise SimConfigError(f"note_rate {self.note_rate} outside [0, 1]")
        if self.n_clinicians < 1 or self.n_groups < 1:
            raise SimConfigError("need at least one clinician and one group")
        lo, hi = self.cfte_range
        if not 0.0 <= lo <= hi <= 1.0:
            raise SimConfigError(f"cfte_range {self.cfte_range} invalid")
        a, b = self.shortfall_range
        if not 0.0 <= a <= b < 0.4:
            raise SimConfigError(f"shortfall_range {self.shortfall_range} invalid")
        missing = [s for s in self.shift_type_names if s not in self.demand_profile]
        if missing:
            raise SimConfigError(f"demand_profile lacks shift types {missing}")
        for s in self.shift_type_names:
            r0, r1 = self.demand_profile[s]
            if not 0 <= r0 <= r1:
                raise SimConfigError(f"demand range for {s} invalid: {(r0, r1)}")
        peak = sum(self.demand_profile[s][1] for s in self.shift_type_names)
        if peak > self.n_clinicians:
            raise SimConfigError(
                f"peak daily demand {peak} exceeds {self.n_clinicians} clinicians"
            )

    def to_dict(self) -> dict:
        return {
            "seed": self.seed,
            "months": [f"{y:04d}-{m:02d}" for y, m in self.months],
            "n_clinicians": self.n_clinicians,
            "n_groups": self.n_groups,
            "shift_type_names": list(self.shift_type_names),
            "note_rate": self.note_rate,
            "cfte_range": list(self.cfte_range),
            "demand_profile": {k: list(v) for k, v in self.demand_profile.items()},
            "shortfall_range": list(self.shortfall_range),
            "absence_rate": self.absence_rate,
            "weekend_cap": self.weekend_cap,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "SimConfig":
        d = dict(d)
        if "months" in d:
            d["months"] = tuple(parse_month(m) if isinstance(m, str) else tuple(m) for m in d["months"])
        return cls(**d)


def parse_month(text: str) -> tuple[int, int]:
    y, m = text.split("-")
    return int(y), int(m)


def month_key(ym: tuple[int, int]) -> str:
    return f"{ym[0]:04d}-{ym[1]:02d}"


@dataclass(frozen=True)
class NoteRecord:
    clinician: int
    date: str
    text: str
    created_at_month: tuple[int, int]

    def __post_init__(self):
        if not self.text or not self.text.strip():
            raise ValueError("note text must be nonempty")


# (text, intended signal). Conflicts and overtime remarks reuse the working
# vocabulary of clinic notes; neutral remarks avoid every lexicon term.
_BANK = (
    ("paid-time-off", UNAVAILABLE),
    ("PTO", UNAVAILABLE),
    ("PTO - family event", UNAVAILABLE),
    ("Vacation", UNAVAILABLE),
    ("Vacation week, back Monday", UNAVAILABLE),
    ("Interview Day", UNAVAILABLE),
    ("Conference", UNAVAILABLE),
    ("Out for conference travel", UNAVAILABLE),
    ("Covering OR", UNAVAILABLE),
    ("OR coverage all day", UNAVAILABLE),
    ("illness", UNAVAILABLE),
    ("Out sick", UNAVAILABLE),
    ("ICU week", UNAVAILABLE),
    ("Overtime", AVAILABLE),
    ("stayed late", AVAILABLE),
    ("Stayed late to finish add-ons", AVAILABLE),
    ("extended clinic", AVAILABLE),
    ("Extra hours if needed", AVAILABLE),
    ("Can cover the afternoon", AVAILABLE),
    ("thanks for the swap last week", NEUTRAL),
    ("Parking garage closed, using lot B", NEUTRAL),
    ("Please confirm room assignment", NEUTRAL),
    ("New fellow shadowing today", NEUTRAL),
    ("Badge reader at the front desk is broken", NEUTRAL),
)


def phrase_bank() -> tuple[tuple[str, str], ...]:
    """Note templates tagged with their intended availability signal."""
    return _BANK


_SIGNAL_MIX = {UNAVAILABLE: 0.45, AVAILABLE: 0.25, NEUTRAL: 0.30}


@dataclass(frozen=True)
class MonthData:
    year: int
    month: int
    instance: ProblemInstance
    template: ScheduleMatrix

    @property
    def key(self) -> str:
        return month_key((self.year, self.month))


@dataclass(frozen=True)
class Corpus:
    months: tuple[MonthData, ...]
    notes: tuple[NoteRecord, ...]

    def __iter__(self):
        # allows ``months, notes = simulate_corpus(cfg)``
        yield [(m.instance, m.template) for m in self.months]
        yield list(self.notes)

    def month(self, key: str) -> MonthData:
        for m in self.months:
            if m.key == key:
                return m
        raise KeyError(key)


def _contracts_base(cfg: SimConfig):
    rng = np.random.default_rng([cfg.seed, 0])
    lo, hi = cfg.cfte_range
    cfte = np.round(rng.uniform(lo, hi, cfg.n_clinicians), 2)
    groups = np.arange(cfg.n_clinicians) % cfg.n_groups
    # weekday habits: a mild preference spread plus one lighter weekday
    dow_pref = rng.uniform(0.8, 1.2, (cfg.n_clinicians, 5))
    dow_pref[np.arange(cfg.n_clinicians), rng.integers(0, 5, cfg.n_clinicians)] *= 0.4
    return cfte, groups, dow_pref


def _shift_bias(n_groups: int, n_types: int) -> np.ndarray:
    """Cohort-level shift-type habits; rows sum to 1.

    Cohort 0 leans strongly toward the last shift type, the others toward
    the first. This is the historical inequity the optimizer can remove.
    """
    bias = np.full((n_groups, n_types), 1.0)
    if n_types > 1:
        bias[0, -1] = 4.0
        bias[1:, -1] = 0.25
    return bias / bias.sum(axis=1, keepdims=True)


def build_instance(cfg: SimConfig, year: int, month: int, rng, cfte) -> ProblemInstance:
    horizon, duty, weekend = month_duty_days(year, month)
    nd = len(duty)
    names = cfg.shift_type_names
    demand = np.zeros((len(names), len(horizon)), dtype=np.int64)
    for s, name in enumerate(names):
        r0, r1 = cfg.demand_profile[name]
        demand[s, duty] = rng.integers(r0, r1 + 1, nd)
    clinicians = []
    groups = np.arange(cfg.n_clinicians) % cfg.n_groups
    for i in range(cfg.n_clinicians):
        target = math.floor(cfte[i] * nd + 0.5 + 1e-9)
        lb = int(math.floor(0.5 * target))
        ub = int(min(nd, target + 4))
        clinicians.append(
            ClinicianContract(i, float(cfte[i]), lb, ub, cfg.weekend_cap, int(groups[i]))
        )
    return ProblemInstance(
        clinicians=clinicians,
        shift_types=[ShiftType(s, n) for s, n in enumerate(names)],
        horizon=horizon,
        duty_days=duty,
        weekend_days=weekend,
        demand=demand,
    )


def _absences(cfg: SimConfig, inst: ProblemInstance, rng) -> np.ndarray:
    """``(I, D)`` mask of days each clinician is away (vacation blocks, single days)."""
    away = np.zeros((inst.n_clinicians, inst.n_days), dtype=bool)
    duty = np.array(inst.duty_days)
    for i in range(inst.n_clinicians):
        if rng.random() < cfg.absence_rate:
            length = int(rng.integers(2, 6))
            start = int(rng.integers(0, max(1, len(duty) - length)))
            away[i, duty[start : start + length]] = True
        if rng.random() < 0.5:
            away[i, duty[int(rng.integers(0, len(duty)))]] = True
    return away


def _draw_template(cfg, inst: ProblemInstance, rng, cfte, dow_pref, bias, away) -> np.ndarray:
    n_i, n_s, n_d = inst.shape
    b = np.zeros(inst.shape, dtype=np.int8)
    groups = np.array([c.group for c in inst.clinicians])
    dates = inst.dates()
    load = np.zeros(n_i)
    nd = len(inst.duty_days)
    target = cfte * nd
    # scarcest shift types first so cohort habits show up in the mix
    order = np.argsort(inst.demand.sum(axis=1), kind="stable")
    for t in inst.duty_days:
        free = ~away[:, t]
        dow = dates[t].weekday()
        for s in order:
            need = int(inst.demand[s, t])
            cand = np.flatnonzero(free)
            if need == 0 or cand.size == 0:
                continue
            # keep drawing toward each clinician's contract, loosely
            room = np.clip(target[cand] - load[cand] + 2.0, 0.3, None)
            w = bias[groups[cand], s] * dow_pref[cand, dow] * room
            k = min(need, cand.size)
            pick = rng.choice(cand, size=k, replace=False, p=w / w.sum())
            b[pick, s, t] = 1
            free[pick] = False
            load[pick] += 1
    return b


def _inject_shortfalls(cfg, inst: ProblemInstance, b: np.ndarray, rng) -> None:
    """Unfill a random share of each shift type's assigned slots in place."""
    lo, hi = cfg.shortfall_range
    for s in range(inst.n_shift_types):
        cells = np.argwhere(b[:, s, :] == 1)
        if len(cells) == 0:
            continue
        q = rng.uniform(lo, hi)
        k = max(1, int(round(q * len(cells)))) if hi > 0 else 0
        k = min(k, len(cells))
        if k == 0:
            continue
        drop = rng.choice(len(cells), size=k, replace=False)
        for i, t in cells[np.sort(drop)]:
            b[i, s, t] = 0


def sample_notes(
    template: ScheduleMatrix,
    inst: ProblemInstance,
    note_rate: float,
    rng,
    created_at: tuple[int, int],
    advance_month: tuple[int, int] | None = None,
) -> list[NoteRecord]:
    """Annotate exactly ``floor(note_rate * assigned)`` assigned clinician-days.

    Conflict remarks are filed ahead (``advance_month``) when one is given, as
    leave requests usually are; other remarks are filed in the month itself.
    """
    worked = template.worked()
    cells = np.argwhere(worked == 1)
    n_assigned = template.n_assigned()
    k = int(math.floor(note_rate * n_assigned + 1e-9))
    k = min(k, len(cells))
    if k == 0:
        return []
    pick = np.sort(rng.choice(len(cells), size=k, replace=False))
    by_tag = {tag: [t for t, g in _BANK if g == tag] for tag in _SIGNAL_MIX}
    tags = list(_SIGNAL_MIX)
    probs = np.array([_SIGNAL_MIX[t] for t in tags])
    out = []
    for idx in pick:
        i, t = cells[idx]
        tag = tags[int(rng.choice(len(tags), p=probs))]
        texts = by_tag[tag]
        text = texts[int(rng.integers(len(texts)))]
        when = advance_month if (tag == UNAVAILABLE and advance_month is not None) else created_at
        out.append(NoteRecord(int(i), inst.horizon[t], text, when))
    return out


def _previous_month(ym: tuple[int, int]) -> tuple[int, int]:
    y, m = ym
    return (y - 1, 12) if m == 1 else (y, m - 1)


def simulate_month(cfg: SimConfig, year: int, month: int, base=None):
    """One month's instance, template and notes from its own substream."""
    cfte, groups, dow_pref = base or _contracts_base(cfg)
    rng = np.random.default_rng([cfg.seed, year, month])
    inst = build_instance(cfg, year, month, rng, cfte)
    bias = _shift_bias(cfg.n_groups, inst.n_shift_types)
    away = _absences(cfg, inst, rng)
    b = _draw_template(cfg, inst, rng, cfte, dow_pref, bias, away)
    _inject_shortfalls(cfg, inst, b, rng)
    sched = ScheduleMatrix(b)
    notes = sample_notes(sched, inst, cfg.note_rate, rng, (year, month), _previous_month((year, month)))
    return MonthData(year, month, inst, sched), notes


def simulate_corpus(cfg: SimConfig) -> Corpus:
    """Instances, historical templates and notes for every configured month."""
    cfg.validate()
    base = _contracts_base(cfg)
    months, notes = [], []
    for y, m in cfg.months:
        md, nn = simulate_month(cfg, y, m, base)
        months.append(md)
        notes.extend(nn)
    return Corpus(tuple(months), tuple(notes))


# --- labels and features --------------------------------------------------------


def structural_labels(inst: ProblemInstance, sched: ScheduleMatrix) -> np.ndarray:
    """``(I, D)`` labels: 1 scheduled, 0 unscheduled duty day, -1 off duty."""
    lab = np.full((inst.n_clinicians, inst.n_days), -1, dtype=np.int8)
    duty = list(inst.duty_days)
    lab[:, duty] = sched.worked()[:, duty]
    return lab


@dataclass(frozen=True)
class FeatureTable:
    feature_names: tuple[str, ...]
    X: np.ndarray
    y: np.ndarray
    clinician: np.ndarray
    date: tuple[str, ...]
    month: str

    def __len__(self) -> int:
        return len(self.y)

    def to_csv(self, path=None) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["clinician_id", "date", *self.feature_names, "label"])
        for k in range(len(self.y)):
            w.writerow(
                [int(self.clinician[k]), self.date[k], *(repr(float(v)) for v in self.X[k]),
                 int(self.y[k])]
            )
        text = buf.getvalue()
        if path is not None:
            Path(path).write_text(text)
        return text


def feature_names(n_groups: int) -> tuple[str, ...]:
    names = [f"dow_{d}" for d in ("mon", "tue", "wed", "thu", "fri")]
    names += ["day_of_month"]
    names += [f"month_{m:02d}" for m in range(1, 13)]
    names += ["year"]
    names += ["rate_weekly", "rate_monthly", "rate_weekday", "rate_history"]
    names += [f"group_{g}" for g in range(n_groups)]
    return tuple(names)


PRIOR_RATE = 0.5
YEAR_ORIGIN = 2020


def _rate(values) -> float:
    return float(np.mean(values)) if len(values) else PRIOR_RATE


def engineer_features(
    templates: Sequence[tuple[ProblemInstance, ScheduleMatrix]],
    labels: Sequence[np.ndarray],
    as_of_month: int,
    n_groups: int | None = None,
) -> FeatureTable:
    """Feature rows for every clinician duty-day of month ``as_of_month``.

    ``templates`` and ``labels`` are aligned, chronologically ordered month
    lists; ``labels[k]`` is an ``(I, D)`` label array (-1 off duty).
    Rolling rates read only months ``< as_of_month``; the target month
    contributes its calendar and its own labels as ``y`` and nothing else.
    """
    if not 0 <= as_of_month < len(templates):
        raise IndexError(f"as_of_month {as_of_month} outside corpus of {len(templates)} months")
    inst, _ = templates[as_of_month]
    if n_groups is None:
        n_groups = max(c.group for c in inst.clinicians) + 1
    names = feature_names(n_groups)
    n_i = inst.n_clinicians

    # per clinician: chronological (weekday, label) history of duty days
    hist_days: list[int] = []
    hist_lab = []
    for k in range(as_of_month):
        pinst, _ = templates[k]
        lab = np.asarray(labels[k])
        for t in pinst.duty_days:
            hist_days.append(dt.date.fromisoformat(pinst.horizon[t]).weekday())
            hist_lab.append(lab[:, t])
    hist_days_a = np.array(hist_days, dtype=int)
    hist = np.array(hist_lab, dtype=float).reshape(len(hist_lab), n_i)
    prev_month = None
    if as_of_month > 0:
        pinst, _ = templates[as_of_month - 1]
        lab = np.asarray(labels[as_of_month - 1])
        prev_month = lab[:, list(pinst.duty_days)].astype(float)

    target_lab = np.asarray(labels[as_of_month])
    rows, ys, cl, dates = [], [], [], []
    for i in range(n_i):
        weekly = _rate(hist[-5:, i])
        monthly = _rate(prev_month[i]) if prev_month is not None else PRIOR_RATE
        overall = _rate(hist[:, i])
        wd_rate = {}
        for wd in range(7):
            sel = hist[hist_days_a == wd, i] if len(hist_days_a) else np.empty(0)
            wd_rate[wd] = _rate(sel[-4:])
        group = inst.clinicians[i].group
        for t in inst.duty_days:
            d = dt.date.fromisoformat(inst.horizon[t])
            f = np.zeros(len(names))
            if d.weekday() < 5:
                f[d.weekday()] = 1.0
            f[5] = d.day / 31.0
            f[6 + d.month - 1] = 1.0
            f[18] = (d.year - YEAR_ORIGIN) / 10.0
            f[19:23] = (weekly, monthly, wd_rate[d.weekday()], overall)
            f[23 + group] = 1.0
            rows.append(f)
            ys.append(int(target_lab[i, t]))
            cl.append(i)
            dates.append(inst.horizon[t])
    X = np.array(rows).reshape(len(rows), len(names))
    key = inst.horizon[0][:7]
    return FeatureTable(names, X, np.array(ys, dtype=np.int8), np.array(cl, dtype=np.int64),
                        tuple(dates), key)


# --- files -----------------------------------------------------------------------


def write_notes_csv(notes: Sequence[NoteRecord], path=None) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["clinician_id", "date", "text", "created_month"])
    for n in notes:
        w.writerow([n.clinician, n.date, n.text, month_key(n.created_at_month)])
    text = buf.getvalue()
    if path is not None:
        Path(path).write_text(text)
    return text


def read_notes_csv(path) -> list[NoteRecord]:
    with open(path, newline="") as fh:
        return [
            NoteRecord(int(r["clinician_id"]), r["date"], r["text"], parse_month(r["created_month"]))
            for r in csv.DictReader(fh)
        ]
