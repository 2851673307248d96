"""End-to-end predict-then-optimize run: simulate, label, train, predict, optimize, evaluate.

Every stage reads only artifacts written by earlier stages and writes its
own directory under the run's output root. A stage builds its outputs in a
scratch directory and swaps it in only on success, so a failed stage never
leaves earlier artifacts half-overwritten.
"""

from __future__ import annotations

import copy
import csv
import datetime as dt
import json
import logging
import shutil
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import availpred, datasim, kpieval, notelab, schedopt
from .core import (
    ProblemInstance,
    ScheduleMatrix,
    read_instance_json,
    read_schedule_csv,
    write_instance_json,
    write_schedule_csv,
)
from .ilpsolve import SolverConfig

log = logging.getLogger(__name__)

STAGES = ("simulate", "label", "train", "predict", "optimize", "evaluate")


class ConfigError(ValueError):
    """Invalid or inconsistent pipeline configuration."""


class DependencyError(RuntimeError):
    """A stage's input artifacts are missing."""


def _default_sim() -> dict:
    return datasim.SimConfig().to_dict()


@dataclass
class PipelineConfig:
    out: str = "runs/default"
    sim: dict = field(default_factory=_default_sim)
    classifier: dict = field(default_factory=lambda: {"mode": "rules", "url": None, "timeout_ms": 2000})
    predictor: dict = field(default_factory=lambda: {
        "l2": 1e-4, "tol": 1e-6, "max_iter": 5000, "seed": 0, "n_bins": 10,
        "tree_max_depth": 6, "tree_min_leaf": 20, "benchmark": True,
    })
    optimizer: dict = field(default_factory=lambda: {
        "mode": "lex", "ranks": [1, 2, 3, 4], "weights": [1.0, 1.0, 1.0, 1.0], "eps": 1e-6,
        "time_limit": None, "node_limit": 200000,
    })
    evaluation: dict = field(default_factory=lambda: {
        "start": "2024-03", "n_months": 6, "cfte_shift_types": ["Clin"],
    })

    def to_dict(self) -> dict:
        return {
            "out": self.out,
            "sim": copy.deepcopy(self.sim),
            "classifier": dict(self.classifier),
            "predictor": dict(self.predictor),
            "optimizer": copy.deepcopy(self.optimizer),
            "evaluation": copy.deepcopy(self.evaluation),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "PipelineConfig":
        base = cls()
        known = set(base.to_dict())
        extra = set(d) - known
        if extra:
            raise ConfigError(f"unknown config sections {sorted(extra)}")
        cfg = cls()
        for key in known:
            if key not in d:
                continue
            if key == "out":
                cfg.out = str(d["out"])
                continue
            section = getattr(cfg, key)
            unknown = set(d[key]) - set(section)
            if unknown:
                raise ConfigError(f"unknown keys in [{key}]: {sorted(unknown)}")
            section.update(copy.deepcopy(d[key]))
        cfg.validate()
        return cfg

    def sim_config(self) -> datasim.SimConfig:
        try:
            return datasim.SimConfig.from_dict(self.sim)
        except (datasim.SimConfigError, TypeError, ValueError) as exc:
            raise ConfigError(f"sim: {exc}") from exc

    def eval_months(self) -> list[str]:
        start = datasim.parse_month(self.evaluation["start"])
        return [datasim.month_key(m) for m in datasim._month_range(start, int(self.evaluation["n_months"]))]

    def validate(self) -> None:
        sim = self.sim_config()
        keys = [datasim.month_key(m) for m in sim.months]
        try:
            months = self.eval_months()
        except (ValueError, KeyError) as exc:
            raise ConfigError(f"evaluation window: {exc}") from exc
        if not months:
            raise ConfigError("evaluation window is empty")
        missing = [m for m in months if m not in keys]
        if missing:
            raise ConfigError(f"evaluation months {missing} outside the simulated corpus")
        if keys.index(months[0]) < 2:
            raise ConfigError("evaluation needs at least two earlier corpus months for training and calibration")
        if self.classifier.get("mode") not in ("rules", "external"):
            raise ConfigError("classifier.mode must be 'rules' or 'external'")
        if self.classifier.get("mode") == "external" and not self.classifier.get("url"):
            raise ConfigError("external classifier needs a url")
        if self.optimizer.get("mode") not in ("lex", "weighted"):
            raise ConfigError("optimizer.mode must be 'lex' or 'weighted'")
        ranks = list(self.optimizer.get("ranks", []))
        if sorted(ranks) != [1, 2, 3, 4]:
            raise ConfigError("optimizer.ranks must order goals 1..4")
        w = self.optimizer.get("weights", [])
        if len(w) != 4 or any(float(v) < 0 for v in w) or not any(float(v) > 0 for v in w):
            raise ConfigError("optimizer.weights must be four non-negative numbers, not all zero")
        if int(self.predictor.get("n_bins", 0)) < 1:
            raise ConfigError("predictor.n_bins must be positive")


def load_config(path) -> PipelineConfig:
    try:
        data = json.loads(Path(path).read_text())
    except FileNotFoundError as exc:
        raise ConfigError(f"config file not found: {path}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config is not valid JSON: {exc}") from exc
    if not isinstance(data, dict):
        raise ConfigError("config must be a JSON object")
    return PipelineConfig.from_dict(data)


def dump_config(cfg: PipelineConfig) -> str:
    return json.dumps(cfg.to_dict(), indent=2, sort_keys=True) + "\n"


# --- artifact layout -----------------------------------------------------------------


class Run:
    """Paths and stage bookkeeping for one output root."""

    def __init__(self, cfg: PipelineConfig):
        self.cfg = cfg
        self.root = Path(cfg.out)

    def stage_dir(self, stage: str) -> Path:
        return self.root / stage

    def require(self, stage: str, *names: str) -> Path:
        d = self.stage_dir(stage)
        for n in names:
            if not (d / n).exists():
                raise DependencyError(
                    f"missing artifact {d / n}; run the '{stage}' stage first"
                )
        if not d.exists():
            raise DependencyError(f"missing artifacts in {d}; run the '{stage}' stage first")
        return d

    def write_effective_config(self) -> None:
        self.root.mkdir(parents=True, exist_ok=True)
        (self.root / "config.effective.json").write_text(dump_config(self.cfg))

    def record(self, stage: str, seconds: float, extra: dict | None = None) -> None:
        path = self.root / "manifest.json"
        data = json.loads(path.read_text()) if path.exists() else {"stages": {}}
        data["stages"][stage] = {"seconds": round(seconds, 3), **(extra or {})}
        data["written_at"] = dt.datetime.now().isoformat(timespec="seconds")
        path.write_text(json.dumps(data, indent=2, sort_keys=True) + "\n")


class _StageWriter:
    """Scratch directory swapped into place when the ``with`` block succeeds."""

    def __init__(self, run: Run, stage: str):
        self.final = run.stage_dir(stage)
        self.tmp = run.root / f".{stage}.partial"

    def __enter__(self) -> Path:
        if self.tmp.exists():
            shutil.rmtree(self.tmp)
        self.tmp.mkdir(parents=True)
        return self.tmp

    def __exit__(self, exc_type, exc, tb):
        if exc_type is not None:
            shutil.rmtree(self.tmp, ignore_errors=True)
            return False
        old = self.final.with_name(f".{self.final.name}.old")
        if old.exists():
            shutil.rmtree(old)
        if self.final.exists():
            self.final.rename(old)
        self.tmp.rename(self.final)
        if old.exists():
            shutil.rmtree(old)
        return False


def _write_json(path: Path, obj) -> None:
    path.write_text(json.dumps(obj, indent=2, sort_keys=True) + "\n")


# --- corpus access -------------------------------------------------------------------


def load_corpus(run: Run):
    d = run.require("simulate", "months.json", "notes.csv")
    keys = json.loads((d / "months.json").read_text())["months"]
    months = []
    for k in keys:
        inst = read_instance_json(d / "instances" / f"{k}.json")
        sched = read_schedule_csv(d / "templates" / f"{k}.csv", inst)
        months.append((k, inst, sched))
    notes = datasim.read_notes_csv(d / "notes.csv")
    return months, notes


def align_previous(prev_inst: ProblemInstance, prev: ScheduleMatrix, inst: ProblemInstance) -> ScheduleMatrix:
    """Carry a prior month's schedule onto this month's calendar.

    The n-th occurrence of a weekday copies the prior month's n-th
    occurrence of that weekday (its last one if the prior month has fewer).
    """
    if prev_inst.n_shift_types != inst.n_shift_types or prev_inst.n_clinicians != inst.n_clinicians:
        raise ValueError("previous month has different clinicians or shift types")
    by_wd: dict[int, list[int]] = {}
    for t in prev_inst.duty_days:
        by_wd.setdefault(dt.date.fromisoformat(prev_inst.horizon[t]).weekday(), []).append(t)
    out = np.zeros(inst.shape, dtype=np.int8)
    seen: dict[int, int] = {}
    for t in inst.duty_days:
        wd = dt.date.fromisoformat(inst.horizon[t]).weekday()
        k = seen.get(wd, 0)
        seen[wd] = k + 1
        src = by_wd.get(wd)
        if src:
            out[:, :, t] = prev.entries[:, :, src[min(k, len(src) - 1)]]
    return ScheduleMatrix(out)


# --- stages ----------------------------------------------------------------------------


def stage_simulate(run: Run) -> dict:
    sim = run.cfg.sim_config()
    corpus = datasim.simulate_corpus(sim)
    with _StageWriter(run, "simulate") as d:
        (d / "instances").mkdir()
        (d / "templates").mkdir()
        for md in corpus.months:
            write_instance_json(md.instance, d / "instances" / f"{md.key}.json")
            write_schedule_csv(md.template, md.instance, d / "templates" / f"{md.key}.csv")
        datasim.write_notes_csv(corpus.notes, d / "notes.csv")
        _write_json(d / "months.json", {"months": [m.key for m in corpus.months]})
        _write_json(d / "sim_config.json", sim.to_dict())
    return {"months": len(corpus.months), "notes": len(corpus.notes)}


def _classify(run: Run, notes, audit):
    c = run.cfg.classifier
    if c.get("mode") == "external":
        ep = notelab.EndpointConfig(c["url"], int(c.get("timeout_ms", 2000)))
        return notelab.external_classify(notes, ep, audit)
    return notelab.classify_notes(notes, audit)


def stage_label(run: Run) -> dict:
    months, notes = load_corpus(run)
    audit = notelab.AuditTrail()
    classified = _classify(run, notes, audit)
    resolved = notelab.resolve_all(classified)
    with _StageWriter(run, "label") as d:
        audit.write(d / "audit.jsonl")
        with open(d / "classified.csv", "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["clinician_id", "date", "created_month", "signal", "rationale", "source"])
            for c in classified:
                n = c.note
                w.writerow([n.clinician, n.date, datasim.month_key(n.created_at_month),
                            "" if c.signal is None else c.signal, c.rationale, c.source])
        (d / "labels").mkdir()
        flips = 0
        for key, inst, sched in months:
            lab = datasim.structural_labels(inst, sched)
            with open(d / "labels" / f"{key}.csv", "w", newline="") as fh:
                w = csv.writer(fh, lineterminator="\n")
                w.writerow(["clinician_id", "date", "y_struct", "y_final"])
                for i in range(inst.n_clinicians):
                    for t in inst.duty_days:
                        sig = resolved.get((i, inst.horizon[t]))
                        y = int(lab[i, t])
                        yf = notelab.fuse_labels(y, None if sig is None else sig.signal)
                        flips += int(yf != y)
                        w.writerow([i, inst.horizon[t], y, yf])
    return {"notes": len(notes), "signals": len(resolved), "label_flips": flips}


def _read_labels(run: Run, key: str, inst: ProblemInstance) -> np.ndarray:
    d = run.require("label", "labels")
    path = d / "labels" / f"{key}.csv"
    if not path.exists():
        raise DependencyError(f"missing artifact {path}; run the 'label' stage first")
    pos = {day: t for t, day in enumerate(inst.horizon)}
    lab = np.full((inst.n_clinicians, inst.n_days), -1, dtype=np.int8)
    with open(path, newline="") as fh:
        for r in csv.DictReader(fh):
            lab[int(r["clinician_id"]), pos[r["date"]]] = int(r["y_final"])
    return lab


def _feature_tables(run: Run, months, upto: int, n_groups: int):
    templates = [(inst, sched) for _, inst, sched in months]
    labels = [_read_labels(run, key, inst) for key, inst, _ in months[: upto + 1]]
    return [datasim.engineer_features(templates[: k + 1], labels[: k + 1], k, n_groups)
            for k in range(upto + 1)]


def _logistic_cfg(run: Run) -> availpred.LogisticConfig:
    p = run.cfg.predictor
    return availpred.LogisticConfig(l2=float(p["l2"]), tol=float(p["tol"]),
                                    max_iter=int(p["max_iter"]), seed=int(p["seed"]))


def _stack(tables):
    return np.vstack([t.X for t in tables]), np.concatenate([t.y for t in tables])


def stage_train(run: Run) -> dict:
    months, _ = load_corpus(run)
    keys = [k for k, _, _ in months]
    targets = run.cfg.eval_months()
    n_groups = int(run.cfg.sim_config().n_groups)
    last = keys.index(targets[-1])
    tables = _feature_tables(run, months, last, n_groups)
    lcfg = _logistic_cfg(run)
    n_bins = int(run.cfg.predictor["n_bins"])
    summary = {}
    with _StageWriter(run, "train") as d:
        (d / "models").mkdir()
        (d / "features").mkdir()
        for key in targets:
            m = keys.index(key)
            tables[m].to_csv(d / "features" / f"{key}.csv")
            X, y = _stack(tables[:m])
            model = availpred.train_logistic(X, y, lcfg, tables[m].feature_names)
            # month-ahead calibration: a model that has not seen month m-1 scores it
            Xc, yc = _stack(tables[: m - 1])
            prior = availpred.train_logistic(Xc, yc, lcfg, tables[m].feature_names)
            model.calibrator = availpred.fit_calibrator(
                prior.predict_raw(tables[m - 1].X), tables[m - 1].y, n_bins, keys[m - 1]
            )
            model.meta = {"target_month": key, "train_months": keys[:m]}
            availpred.save_model(model, d / "models" / f"{key}.json")
            summary[key] = {"iterations": model.iterations, "converged": model.converged}
        if run.cfg.predictor.get("benchmark", True):
            bench = _benchmark(run, tables, [keys.index(k) for k in targets])
            _write_json(d / "benchmark.json", bench)
    return summary


def _benchmark(run: Run, tables, target_idx) -> dict:
    p = run.cfg.predictor
    out = {}
    families = {
        "logistic": _logistic_cfg(run),
        "tree": availpred.TreeConfig(int(p["tree_max_depth"]), int(p["tree_min_leaf"]), int(p["seed"])),
    }
    for fam, fcfg in families.items():
        reps = []
        for m in target_idx:
            X, y = _stack(tables[:m])
            model = availpred.evaluation.fit_family(fam, X, y, fcfg, tables[m].feature_names)
            pred = (availpred.evaluation._raw(model, tables[m].X) >= 0.5).astype(int)
            reps.append(availpred.classification_report(tables[m].y, pred, tables[m].month).as_dict())
        out[fam] = reps
    return out


def _advance_signals(run: Run, inst: ProblemInstance, key: str) -> dict:
    """Resolved note signals for this month's days, using notes filed before it."""
    d = run.require("label", "classified.csv")
    pos = {day: t for t, day in enumerate(inst.horizon)}
    groups: dict = {}
    with open(d / "classified.csv", newline="") as fh:
        for r in csv.DictReader(fh):
            if r["date"] not in pos or r["created_month"] >= key:
                continue
            sig = None if r["signal"] == "" else int(r["signal"])
            note = datasim.NoteRecord(int(r["clinician_id"]), r["date"], "-",
                                      datasim.parse_month(r["created_month"]))
            groups.setdefault((note.clinician, r["date"]), []).append(
                notelab.Classified(note, sig, r["rationale"], r["source"], "")
            )
    out = {}
    for (i, day), cl in sorted(groups.items()):
        s = notelab.resolve_multi(cl)
        if s is not None:
            out[(i, pos[day])] = s
    return out


def stage_predict(run: Run) -> dict:
    months, _ = load_corpus(run)
    by_key = {k: inst for k, inst, _ in months}
    tdir = run.require("train", "models", "features")
    summary = {}
    with _StageWriter(run, "predict") as d:
        for key in run.cfg.eval_months():
            inst = by_key[key]
            mpath = tdir / "models" / f"{key}.json"
            if not mpath.exists():
                raise DependencyError(f"missing artifact {mpath}; run the 'train' stage first")
            model = availpred.load_model(mpath)
            X, cl, dates = _read_features(tdir / "features" / f"{key}.csv", model.feature_names)
            pc = np.zeros((inst.n_clinicians, inst.n_days))
            pos = {day: t for t, day in enumerate(inst.horizon)}
            pc[cl, [pos[x] for x in dates]] = model.predict_proba(X)
            grid = availpred.fuse_probabilities(pc, _advance_signals(run, inst, key))
            availpred.write_grid_csv(grid, inst.horizon, d / f"{key}.csv", days=inst.duty_days)
            summary[key] = {"forced_zero": int((grid.hard_mask == 0).sum())}
    return summary


def _read_features(path: Path, names):
    with open(path, newline="") as fh:
        rows = list(csv.DictReader(fh))
    X = np.array([[float(r[n]) for n in names] for r in rows]).reshape(len(rows), len(names))
    return X, np.array([int(r["clinician_id"]) for r in rows], dtype=int), [r["date"] for r in rows]


def _solver_cfg(run: Run) -> SolverConfig:
    o = run.cfg.optimizer
    tl = o.get("time_limit")
    nl = o.get("node_limit")
    return SolverConfig(time_limit=None if tl is None else float(tl),
                        node_limit=None if nl is None else int(nl))


def stage_optimize(run: Run) -> dict:
    months, _ = load_corpus(run)
    keys = [k for k, _, _ in months]
    pdir = run.require("predict")
    o = run.cfg.optimizer
    summary = {}
    with _StageWriter(run, "optimize") as d:
        for key in run.cfg.eval_months():
            m = keys.index(key)
            _, inst, _ = months[m]
            gpath = pdir / f"{key}.csv"
            if not gpath.exists():
                raise DependencyError(f"missing artifact {gpath}; run the 'predict' stage first")
            grid = availpred.read_grid_csv(gpath, inst.horizon, inst.n_clinicians)
            _, pinst, psched = months[m - 1]
            prev = align_previous(pinst, psched, inst)
            if o["mode"] == "lex":
                sol = schedopt.solve_lexicographic(inst, grid, prev, ranks=o["ranks"],
                                                   eps=float(o["eps"]), solver_cfg=_solver_cfg(run))
            else:
                sol = schedopt.solve_weighted(inst, grid, prev, weights=o["weights"],
                                              solver_cfg=_solver_cfg(run))
            write_schedule_csv(sol.schedule, inst, d / f"{key}.csv")
            _write_json(d / f"{key}.json", sol.report(timings=False))
            summary[key] = {
                "wall_s": round(sol.wall_time, 3),
                "proved_optimal": sol.proved_optimal,
                "stages": [{"goal": s.goal, "nodes": s.nodes, "wall_ms": round(s.wall_ms, 1)}
                           for s in sol.stages],
            }
    return summary


def stage_evaluate(run: Run) -> dict:
    months, _ = load_corpus(run)
    by_key = {k: (inst, sched) for k, inst, sched in months}
    odir = run.require("optimize")
    report = kpieval.KpiReport()
    shift_types = run.cfg.evaluation.get("cfte_shift_types")
    shift_types = tuple(shift_types) if shift_types else None
    for key in run.cfg.eval_months():
        inst, hist = by_key[key]
        spath = odir / f"{key}.csv"
        if not spath.exists():
            raise DependencyError(f"missing artifact {spath}; run the 'optimize' stage first")
        opt = read_schedule_csv(spath, inst)
        report.add_month(key, inst, hist, opt, shift_types)
    with _StageWriter(run, "evaluate") as d:
        report.write(d)
    return {"months": len(run.cfg.eval_months())}


_STAGE_FUNCS = {
    "simulate": stage_simulate,
    "label": stage_label,
    "train": stage_train,
    "predict": stage_predict,
    "optimize": stage_optimize,
    "evaluate": stage_evaluate,
}


def run_stage(cfg: PipelineConfig, stage: str) -> dict:
    run = Run(cfg)
    run.write_effective_config()
    t0 = time.perf_counter()
    info = _STAGE_FUNCS[stage](run)
    run.record(stage, time.perf_counter() - t0, {"summary": info})
    log.info("stage %s done in %.2fs", stage, time.perf_counter() - t0)
    return info


def run_pipeline(cfg: PipelineConfig, stages=STAGES) -> dict:
    return {s: run_stage(cfg, s) for s in stages}
