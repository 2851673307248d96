import time

import numpy as np
import pytest

from ptosched.core import ClinicianContract, ProblemInstance, ShiftType

ACCEPTANCE_RESULTS: dict = {}


def make_instance(cfte, demand, lb=None, ub=None, weekend=(), weekend_cap=2, groups=None,
                  start="2024-01-01"):
    """Small all-duty instance from a cfte list and an ``(S, D)`` demand array."""
    import datetime as dt

    demand = np.asarray(demand)
    n_s, n_d = demand.shape
    d0 = dt.date.fromisoformat(start)
    horizon = [(d0 + dt.timedelta(days=k)).isoformat() for k in range(n_d)]
    duty = [t for t in range(n_d) if t not in set(weekend)]
    clinicians = []
    for i, c in enumerate(cfte):
        clinicians.append(ClinicianContract(
            i, c, 0 if lb is None else lb[i], len(duty) if ub is None else ub[i], weekend_cap,
            0 if groups is None else groups[i],
        ))
    return ProblemInstance(clinicians, [ShiftType(s, f"S{s}") for s in range(n_s)], horizon,
                           duty, list(weekend), demand)


def random_toy(rng, n_i, n_s, n_d):
    """Random feasible-looking toy with at most one unit of demand per cell."""
    demand = np.zeros((n_s, n_d), dtype=int)
    for t in range(n_d):
        k = int(rng.integers(1, min(n_i, n_s) + 1))
        demand[rng.choice(n_s, size=k, replace=False), t] = 1
    cfte = [round(float(v), 2) for v in rng.uniform(0.2, 1.0, n_i)]
    return make_instance(cfte, demand)


class FakeGrid:
    def __init__(self, p, mask=None):
        self.p = np.asarray(p, dtype=float)
        self.hard_mask = np.ones(self.p.shape, dtype=np.int8) if mask is None else np.asarray(mask)


@pytest.fixture(scope="session")
def pipeline_runs(tmp_path_factory):
    """Two independent default pipeline runs (same config and seed)."""
    from ptosched import pipeline

    out = {}
    for name in ("a", "b"):
        cfg = pipeline.PipelineConfig()
        cfg.out = str(tmp_path_factory.mktemp(f"run_{name}"))
        t0 = time.perf_counter()
        pipeline.run_pipeline(cfg)
        out[name] = (cfg, time.perf_counter() - t0)
    return out


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for key in sorted(ACCEPTANCE_RESULTS):
        ok, title, detail = ACCEPTANCE_RESULTS[key]
        terminalreporter.write_line(f"{'PASS' if ok else 'FAIL'}  {key}. {title}: {detail}")
