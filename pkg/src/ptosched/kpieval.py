"""Schedule quality indicators and month-by-month comparison reports.

Four indicators: demand coverage per shift type, total deviation from
contracted clinical FTE, per-shift-type equity (variance of each
clinician's share of that type), and match accuracy of an optimized
schedule against the historical one.
"""

from __future__ import annotations

import csv
import io
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from .core import InputError, ProblemInstance, ScheduleMatrix

CLINIC_SHIFT = "Clin"
KPI_NAMES = ("coverage_rate", "total_cfte_deviation", "equity_index", "match_accuracy")


def _check(sched: ScheduleMatrix, inst: ProblemInstance) -> np.ndarray:
    if sched.shape != inst.shape:
        raise InputError(f"schedule shape {sched.shape} != instance shape {inst.shape}")
    return sched.entries.astype(np.int64)


def coverage_rate(sched: ScheduleMatrix, inst: ProblemInstance) -> dict[str, float]:
    """Filled over required slots per shift type; over-filling earns no credit."""
    b = _check(sched, inst)
    filled = np.minimum(b.sum(axis=0), inst.demand)
    out = {}
    for st in inst.shift_types:
        req = int(inst.demand[st.id].sum())
        out[st.name] = 1.0 if req == 0 else float(filled[st.id].sum()) / req
    return out


def total_cfte_deviation(
    sched: ScheduleMatrix, inst: ProblemInstance, shift_types: Sequence[str] | None = (CLINIC_SHIFT,)
) -> float:
    """Sum over clinicians of ``|counted shifts / duty days - cfte|``.

    By default only clinic shifts are counted; ``shift_types=None`` counts
    every shift type.
    """
    b = _check(sched, inst)
    nd = len(inst.duty_days)
    if nd == 0:
        raise InputError("instance has no duty days")
    if shift_types is None:
        cols = list(range(inst.n_shift_types))
    else:
        cols = [inst.shift_type_index(n) for n in shift_types]
    counted = b[:, cols, :].sum(axis=(1, 2))
    return float(np.abs(counted / nd - inst.cfte).sum())


@dataclass(frozen=True)
class EquityResult:
    variance: np.ndarray
    excluded: tuple[int, ...]

    def __getitem__(self, s):
        return self.variance[s]

    def __len__(self) -> int:
        return len(self.variance)


def equity_index(sched: ScheduleMatrix) -> EquityResult:
    """Population variance across clinicians of each one's share of type ``s``.

    Clinicians with no assignments have no share and are left out; their
    ids come back in ``excluded``.
    """
    b = sched.entries.astype(np.int64)
    per = b.sum(axis=2)  # (I, S)
    total = per.sum(axis=1)
    keep = total > 0
    excluded = tuple(int(i) for i in np.flatnonzero(~keep))
    if not keep.any():
        return EquityResult(np.zeros(b.shape[1]), excluded)
    share = per[keep] / total[keep, None]
    return EquityResult(share.var(axis=0), excluded)


def match_accuracy(optimized: ScheduleMatrix, historical: ScheduleMatrix) -> float | None:
    """Share of historical clinician-days also worked in ``optimized`` (shift type ignored).

    ``None`` when the historical schedule assigns nobody.
    """
    if optimized.shape != historical.shape:
        raise InputError("schedules differ in shape")
    h = historical.worked().astype(bool)
    o = optimized.worked().astype(bool)
    denom = int(h.sum())
    if denom == 0:
        return None
    return float((h & o).sum()) / denom


# --- reports ---------------------------------------------------------------------


@dataclass
class KpiReport:
    rows: list = field(default_factory=list)  # (kpi, month, source, shift_type, value)
    flags: list = field(default_factory=list)

    def add_month(self, month: str, inst: ProblemInstance, historical: ScheduleMatrix,
                  optimized: ScheduleMatrix | None = None, cfte_shift_types=(CLINIC_SHIFT,)) -> None:
        sources = [("historical", historical)]
        if optimized is not None:
            sources.append(("optimized", optimized))
        for source, sched in sources:
            for name, v in coverage_rate(sched, inst).items():
                self.rows.append(("coverage_rate", month, source, name, v))
            self.rows.append(("total_cfte_deviation", month, source,
                              "+".join(cfte_shift_types) if cfte_shift_types else "all",
                              total_cfte_deviation(sched, inst, cfte_shift_types)))
            eq = equity_index(sched)
            for st in inst.shift_types:
                self.rows.append(("equity_index", month, source, st.name, float(eq[st.id])))
            if eq.excluded:
                self.flags.append({"month": month, "source": source, "kpi": "equity_index",
                                   "excluded_clinicians": list(eq.excluded)})
        if optimized is not None:
            ma = match_accuracy(optimized, historical)
            self.rows.append(("match_accuracy", month, "optimized", "all", ma))
            if ma is None:
                self.flags.append({"month": month, "source": "optimized", "kpi": "match_accuracy",
                                   "reason": "no historical assignments"})

    def value(self, kpi: str, month: str, source: str, shift_type: str | None = None):
        for k, m, s, st, v in self.rows:
            if k == kpi and m == month and s == source and (shift_type is None or st == shift_type):
                return v
        raise KeyError((kpi, month, source, shift_type))

    def months(self) -> list[str]:
        return sorted({r[1] for r in self.rows})

    def kpi_csv(self, kpi: str) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["month", "source", "shift_type", "value"])
        for k, m, s, st, v in self.rows:
            if k == kpi:
                w.writerow([m, s, st, "" if v is None else repr(float(v))])
        return buf.getvalue()

    def to_dict(self) -> dict:
        out: dict = {"kpis": {}, "flags": self.flags}
        for k, m, s, st, v in self.rows:
            out["kpis"].setdefault(k, []).append(
                {"month": m, "source": s, "shift_type": st, "value": v}
            )
        return out

    def plot_tsv(self) -> str:
        """Wide table, one row per month and one column per indicator series."""
        cols = sorted({(k, s, st) for k, _, s, st, _ in self.rows})
        head = ["month"] + [f"{k}:{s}:{st}" for k, s, st in cols]
        lines = ["\t".join(head)]
        for m in self.months():
            vals = []
            for k, s, st in cols:
                try:
                    v = self.value(k, m, s, st)
                except KeyError:
                    v = None
                vals.append("" if v is None else f"{v:.6f}")
            lines.append("\t".join([m] + vals))
        return "\n".join(lines) + "\n"

    def write(self, out_dir) -> list[Path]:
        d = Path(out_dir)
        d.mkdir(parents=True, exist_ok=True)
        paths = []
        for k in KPI_NAMES:
            p = d / f"{k}.csv"
            p.write_text(self.kpi_csv(k))
            paths.append(p)
        p = d / "kpi_report.json"
        p.write_text(json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n")
        paths.append(p)
        p = d / "plot_data.tsv"
        p.write_text(self.plot_tsv())
        paths.append(p)
        return paths
