"""Merge model probabilities with note signals into the optimizer's availability grid."""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass
from pathlib import Path
from typing import Mapping

import numpy as np

MODEL = "model"
NOTE_FORCED_ZERO = "note-forced-zero"


@dataclass(frozen=True, eq=False)
class ProbabilityGrid:
    """``p[i, t]`` with hard mask ``hard_mask[i, t]``; a masked cell has ``p = 0``."""

    p: np.ndarray
    hard_mask: np.ndarray
    provenance: np.ndarray

    def __post_init__(self):
        p = np.array(self.p, dtype=float)
        mask = np.array(self.hard_mask, dtype=np.int8)
        prov = np.array(self.provenance, dtype=object)
        if p.ndim != 2 or p.shape != mask.shape or p.shape != prov.shape:
            raise ValueError("p, hard_mask and provenance must share one 2-D shape")
        if np.any((p < 0) | (p > 1)) or not np.all(np.isfinite(p)):
            raise ValueError("probabilities must lie in [0, 1]")
        if not np.all((mask == 0) | (mask == 1)):
            raise ValueError("hard mask must be 0/1")
        if np.any((mask == 0) & (p != 0)):
            raise ValueError("masked cells must carry zero probability")
        for a in (p, mask, prov):
            a.setflags(write=False)
        object.__setattr__(self, "p", p)
        object.__setattr__(self, "hard_mask", mask)
        object.__setattr__(self, "provenance", prov)

    @property
    def shape(self) -> tuple[int, int]:
        return self.p.shape

    @classmethod
    def from_probabilities(cls, p) -> "ProbabilityGrid":
        p = np.asarray(p, dtype=float)
        return cls(p, np.ones(p.shape, dtype=np.int8), np.full(p.shape, MODEL, dtype=object))


def _signal_value(sig):
    if sig is None:
        return None
    return int(getattr(sig, "signal", sig))


def fuse_probabilities(p_c, signals: Mapping[tuple[int, int], object]) -> ProbabilityGrid:
    """Zero out (and hard-mask) every cell whose resolved note signal is 0.

    ``signals`` maps ``(clinician, day index)`` to a resolved signal: a
    ``NoteSignal``, a plain 0/1, or ``None`` for neutral. Signal 1 and
    neutral leave the model probability in place.
    """
    p = np.array(p_c, dtype=float)
    mask = np.ones(p.shape, dtype=np.int8)
    prov = np.full(p.shape, MODEL, dtype=object)
    for (i, t), sig in signals.items():
        if not (0 <= i < p.shape[0] and 0 <= t < p.shape[1]):
            raise IndexError(f"signal cell {(i, t)} outside grid {p.shape}")
        v = _signal_value(sig)
        if v == 0:
            p[i, t] = 0.0
            mask[i, t] = 0
            prov[i, t] = NOTE_FORCED_ZERO
    return ProbabilityGrid(p, mask, prov)


def write_grid_csv(grid: ProbabilityGrid, horizon, path=None, days=None) -> str:
    """``clinician_id,date,p,hard_available,provenance``; ``days`` limits the rows."""
    days = range(grid.shape[1]) if days is None else days
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["clinician_id", "date", "p", "hard_available", "provenance"])
    for i in range(grid.shape[0]):
        for t in days:
            w.writerow([i, horizon[t], repr(float(grid.p[i, t])), int(grid.hard_mask[i, t]),
                        grid.provenance[i, t]])
    text = buf.getvalue()
    if path is not None:
        Path(path).write_text(text)
    return text


def read_grid_csv(path, horizon, n_clinicians: int) -> ProbabilityGrid:
    """Inverse of :func:`write_grid_csv`; cells not listed get ``p = 0``, unmasked."""
    pos = {d: t for t, d in enumerate(horizon)}
    shape = (n_clinicians, len(horizon))
    p = np.zeros(shape)
    mask = np.ones(shape, dtype=np.int8)
    prov = np.full(shape, MODEL, dtype=object)
    with open(path, newline="") as fh:
        for r in csv.DictReader(fh):
            i, t = int(r["clinician_id"]), pos[r["date"]]
            p[i, t] = float(r["p"])
            mask[i, t] = int(r["hard_available"])
            prov[i, t] = r["provenance"]
    return ProbabilityGrid(p, mask, prov)
