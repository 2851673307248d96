"""End to end: simulate, label, train, predict, optimize and evaluate two months.

Equivalent CLI: pto-sched run --months 2024-03..2024-04 --out <dir>
Run: python demos/04_full_pipeline.py [out_dir]
"""

import json
import sys
import tempfile
from pathlib import Path

from ptosched import pipeline

out = Path(sys.argv[1]) if len(sys.argv) > 1 else Path(tempfile.mkdtemp(prefix="pto_demo_"))
cfg = pipeline.PipelineConfig()
cfg.out = str(out)
cfg.evaluation["n_months"] = 2

info = pipeline.run_pipeline(cfg)
for stage, summary in info.items():
    print(f"{stage:9} {json.dumps(summary, sort_keys=True)[:110]}")

# %% Historical templates against optimized schedules, per month.
rep = json.loads((out / "evaluate" / "kpi_report.json").read_text())
rows = {}
for kpi, entries in rep["kpis"].items():
    for e in entries:
        rows.setdefault((e["month"], kpi, e["shift_type"]), {})[e["source"]] = e["value"]
print(f"\n{'month':8} {'kpi':22} {'type':5} {'historical':>10} {'optimized':>10}")
for (month, kpi, st), v in sorted(rows.items()):
    h, o = v.get("historical"), v.get("optimized")
    fmt = lambda x: "-" if x is None else f"{x:.4f}"
    print(f"{month:8} {kpi:22} {st:5} {fmt(h):>10} {fmt(o):>10}")
print(f"\nartifacts in {out}")
