"""JSON persistence for fitted logistic models and their calibrators."""

from __future__ import annotations

import json
import math
from pathlib import Path

import numpy as np

from .calibration import Calibrator
from .logistic import LogisticModel

SCHEMA_VERSION = 1


def model_to_dict(model: LogisticModel) -> dict:
    cal = model.calibrator
    d = {
        "schema_version": SCHEMA_VERSION,
        "feature_names": list(model.feature_names),
        "standardization": {"mean": model.mean.tolist(), "std": model.std.tolist()},
        "beta0": model.beta0,
        "beta": model.beta.tolist(),
        "calibrator": None,
        "training": {
            "seed": model.seed,
            "iterations": model.iterations,
            "final_loss": model.final_loss,
            "converged": model.converged,
            **model.meta,
        },
    }
    if cal is not None:
        d["calibrator"] = {
            "edges": cal.edges.tolist(),
            "freqs": [None if math.isnan(f) else float(f) for f in cal.freqs],
            "counts": cal.counts.tolist(),
            "fit_month": cal.fit_month,
        }
    return d


def model_from_dict(d: dict) -> LogisticModel:
    if d.get("schema_version") != SCHEMA_VERSION:
        raise ValueError(f"unsupported model schema {d.get('schema_version')!r}")
    cal = None
    c = d.get("calibrator")
    if c is not None:
        freqs = [np.nan if f is None else f for f in c["freqs"]]
        cal = Calibrator(c["edges"], freqs, c.get("counts", [0] * len(freqs)), c.get("fit_month", ""))
    tr = dict(d.get("training", {}))
    meta = {k: v for k, v in tr.items() if k not in ("seed", "iterations", "final_loss", "converged")}
    return LogisticModel(
        feature_names=tuple(d["feature_names"]),
        mean=d["standardization"]["mean"],
        std=d["standardization"]["std"],
        beta0=float(d["beta0"]),
        beta=d["beta"],
        seed=tr.get("seed", 0),
        iterations=tr.get("iterations", 0),
        final_loss=tr.get("final_loss", float("nan")),
        converged=tr.get("converged", False),
        calibrator=cal,
        meta=meta,
    )


def save_model(model: LogisticModel, path) -> None:
    Path(path).write_text(json.dumps(model_to_dict(model), indent=2, sort_keys=True) + "\n")


def load_model(path) -> LogisticModel:
    return model_from_dict(json.loads(Path(path).read_text()))
