"""Forward-chaining evaluation of the availability predictors on the simulated corpus.

Each month is scored by a model trained only on the months before it.
Run: python demos/02_availability_model.py
"""

import numpy as np

from ptosched import datasim
from ptosched.availpred import TreeConfig, fit_calibrator, forward_chain_eval, train_logistic

cfg = datasim.SimConfig(months=tuple((2023, m) for m in range(1, 13)))
corpus = datasim.simulate_corpus(cfg)
templates = [(m.instance, m.template) for m in corpus.months]
labels = [datasim.structural_labels(m.instance, m.template) for m in corpus.months]

# %% Features for month k are built only from months < k (rolling attendance rates plus calendar).
tables = [datasim.engineer_features(templates, labels, k, cfg.n_groups) for k in range(len(templates))]
print(f"{len(tables)} monthly tables, {tables[0].X.shape[1]} features, "
      f"{sum(len(t.y) for t in tables)} clinician-days")

# %% Logistic regression (production) against the CART benchmark.
for family, mcfg in (("logistic", None), ("tree", TreeConfig(max_depth=4))):
    reps = forward_chain_eval(tables[1:], family=family, cfg=mcfg)
    acc = np.array([r.accuracy for r in reps])
    f1 = np.array([r.macro_f1 for r in reps])
    print(f"{family:9} accuracy {acc.mean():.3f} (min {acc.min():.3f})  macro-F1 {f1.mean():.3f}")

# %% Month-ahead calibration: bin frequencies from the previous month adjust the next one.
Xtr = np.vstack([t.X for t in tables[:10]])
ytr = np.concatenate([t.y for t in tables[:10]])
model = train_logistic(Xtr, ytr)
cal = fit_calibrator(model.predict_raw(tables[10].X), tables[10].y, fit_month=tables[10].month)
raw = model.predict_raw(tables[11].X)
adj = cal.apply(raw)
print("\nbin   raw-mean  calibrated  observed  n")
for b in range(cal.n_bins):
    sel = cal.bin_of(raw) == b
    if sel.sum():
        print(f"{b:3d}   {raw[sel].mean():8.3f}  {adj[sel].mean():10.3f}  {tables[11].y[sel].mean():8.3f}  {sel.sum()}")
