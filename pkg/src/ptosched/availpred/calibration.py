"""Equal-width histogram binning calibration."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


def _bin_index(edges: np.ndarray, p: np.ndarray) -> np.ndarray:
    n = len(edges) - 1
    if np.allclose(edges, np.linspace(0.0, 1.0, n + 1)):
        # equal width: floor(p * n) avoids rounding in the stored edges (0.7 -> 0.70000001)
        idx = np.floor(p * n).astype(np.int64)
    else:
        idx = np.searchsorted(edges, p, side="right") - 1
    return np.clip(idx, 0, n - 1)


@dataclass
class Calibrator:
    edges: np.ndarray
    freqs: np.ndarray  # NaN marks an empty bin (identity mapping)
    counts: np.ndarray
    fit_month: str = ""

    def __post_init__(self):
        self.edges = np.asarray(self.edges, dtype=float)
        self.freqs = np.asarray(self.freqs, dtype=float)
        self.counts = np.asarray(self.counts, dtype=np.int64)
        e = self.edges
        if e.ndim != 1 or len(e) < 2 or e[0] != 0.0 or e[-1] != 1.0 or np.any(np.diff(e) <= 0):
            raise ValueError("edges must increase strictly from 0 to 1")
        if self.freqs.shape != (len(e) - 1,):
            raise ValueError("one frequency per bin required")
        f = self.freqs[~np.isnan(self.freqs)]
        if np.any((f < 0) | (f > 1)):
            raise ValueError("bin frequencies must lie in [0, 1]")

    @property
    def n_bins(self) -> int:
        return len(self.freqs)

    def bin_of(self, p) -> np.ndarray:
        p = np.asarray(p, dtype=float)
        return _bin_index(self.edges, p)

    def apply(self, p) -> np.ndarray:
        p = np.asarray(p, dtype=float)
        f = self.freqs[self.bin_of(p)]
        return np.where(np.isnan(f), p, f)


def fit_calibrator(raw_preds, outcomes, n_bins: int = 10, fit_month: str = "") -> Calibrator:
    p = np.asarray(raw_preds, dtype=float)
    y = np.asarray(outcomes, dtype=float)
    if p.shape != y.shape:
        raise ValueError("predictions and outcomes differ in shape")
    if np.any((p < 0) | (p > 1)):
        raise ValueError("raw predictions must lie in [0, 1]")
    edges = np.linspace(0.0, 1.0, n_bins + 1)
    idx = _bin_index(edges, p)
    counts = np.bincount(idx, minlength=n_bins)
    hits = np.bincount(idx, weights=y, minlength=n_bins)
    with np.errstate(invalid="ignore", divide="ignore"):
        freqs = np.where(counts > 0, hits / np.maximum(counts, 1), np.nan)
    return Calibrator(edges, freqs, counts, fit_month)


def apply_calibrator(cal: Calibrator, p) -> np.ndarray:
    return cal.apply(p)
