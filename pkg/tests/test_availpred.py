import json

import numpy as np
import pytest

from ptosched.availpred import (
    MODEL,
    NOTE_FORCED_ZERO,
    LogisticConfig,
    ProbabilityGrid,
    TrainingError,
    TreeConfig,
    classification_report,
    fit_calibrator,
    apply_calibrator,
    forward_chain_eval,
    fuse_probabilities,
    load_model,
    loss_and_grad,
    read_grid_csv,
    save_model,
    sigmoid,
    train_logistic,
    train_tree,
    write_grid_csv,
)
from ptosched.datasim import FeatureTable
from ptosched.notelab import NoteSignal


def central_diff(f, theta, h=1e-5):
    g = np.zeros_like(theta)
    for k in range(len(theta)):
        e = np.zeros_like(theta)
        e[k] = h
        g[k] = (f(theta + e) - f(theta - e)) / (2 * h)
    return g


# --- sigmoid and logistic --------------------------------------------------------


def test_sigmoid_examples():
    assert sigmoid(0.0) == 0.5
    with np.errstate(over="raise"):
        assert sigmoid(40.0) == pytest.approx(1.0, abs=1e-15)
        assert sigmoid(-800.0) >= 0.0
        assert sigmoid(800.0) == 1.0
    eta = np.linspace(-30, 30, 41)
    assert np.allclose(sigmoid(eta) + sigmoid(-eta), 1.0, atol=1e-15)
    assert np.all(np.diff(sigmoid(eta)) >= 0)


def test_symmetric_data_gives_zero_intercept():
    x = np.array([-2.0, -1.0, 1.0, 2.0, -0.5, 0.5])[:, None]
    y = np.array([0, 0, 1, 1, 0, 1])
    m = train_logistic(x, y, LogisticConfig(resample=False))
    assert abs(m.beta0) < 1e-3


def test_gradient_matches_finite_differences():
    rng = np.random.default_rng(5)
    Z = rng.normal(size=(60, 4))
    y = rng.integers(0, 2, 60).astype(float)
    worst = 0.0
    for _ in range(20):
        theta = rng.normal(scale=2.0, size=5)
        _, g = loss_and_grad(theta, Z, y, 0.3)
        num = central_diff(lambda th: loss_and_grad(th, Z, y, 0.3)[0], theta)
        worst = max(worst, float(np.max(np.abs(g - num))))
    assert worst < 1e-6


def _separable(seed=0):
    rng = np.random.default_rng(seed)
    X = rng.uniform(-1, 1, size=(200, 2))
    X = X[np.abs(X[:, 0] + X[:, 1]) > 0.2]
    y = (X[:, 0] + X[:, 1] > 0).astype(int)
    return X, y


def test_separable_toy_reaches_full_accuracy():
    X, y = _separable()
    m = train_logistic(X, y, LogisticConfig(l2=0.0, max_iter=5000))
    assert np.mean(m.predict(X) == y) == 1.0
    # well below the loss of the best constant predictor
    assert m.final_loss < 0.1 * np.log(2)


def test_single_class_and_bad_features_rejected():
    with pytest.raises(TrainingError):
        train_logistic(np.ones((4, 1)), np.ones(4))
    with pytest.raises(ValueError):
        train_logistic(np.array([[0.0], [np.nan]]), np.array([0, 1]))


def test_training_is_deterministic():
    rng = np.random.default_rng(2)
    X = rng.normal(size=(300, 3))
    y = (X[:, 0] + rng.normal(size=300) > 0.8).astype(int)
    a = train_logistic(X, y, LogisticConfig(seed=7))
    b = train_logistic(X, y, LogisticConfig(seed=7))
    assert a.beta0 == b.beta0 and np.array_equal(a.beta, b.beta)


def test_oversampling_balances_minority():
    rng = np.random.default_rng(3)
    X = rng.normal(size=(400, 1))
    y = (X[:, 0] > 1.0).astype(int)  # about 16% positives
    balanced = train_logistic(X, y, LogisticConfig(resample=True))
    plain = train_logistic(X, y, LogisticConfig(resample=False))
    assert balanced.predict(X).mean() > plain.predict(X).mean()


def test_raw_probability_monotone_in_positive_coefficient():
    rng = np.random.default_rng(11)
    X = rng.normal(size=(300, 3))
    y = (X @ np.array([1.5, -1.0, 0.3]) + rng.normal(size=300) > 0).astype(int)
    m = train_logistic(X, y)
    for k in np.flatnonzero(m.beta > 0):
        Xp = X.copy()
        Xp[:, k] += 0.5
        assert np.all(m.predict_raw(Xp) >= m.predict_raw(X))


# --- tree ----------------------------------------------------------------------


def _xor(reps=30):
    cells = np.array([[0, 0], [0, 1], [1, 0], [1, 1]], dtype=float)
    X = np.repeat(cells, reps, axis=0)
    y = np.repeat([0, 1, 1, 0], reps)
    return X, y


def test_tree_solves_xor_where_logistic_cannot():
    X, y = _xor()
    tree = train_tree(X, y, TreeConfig(max_depth=2, min_leaf=1))
    assert tree.depth() == 2
    assert np.mean(tree.predict(X) == y) == 1.0
    lin = train_logistic(X, y)
    assert np.mean(lin.predict(X) == y) <= 0.5 + 1e-9


def test_pure_labels_give_single_leaf():
    X = np.random.default_rng(0).normal(size=(50, 2))
    tree = train_tree(X, np.ones(50, dtype=int))
    assert tree.n_leaves() == 1
    assert np.all(tree.predict_proba(X) == 1.0)


def test_depth_zero_is_base_rate():
    X = np.random.default_rng(0).normal(size=(40, 2))
    y = np.array([1] * 10 + [0] * 30)
    tree = train_tree(X, y, TreeConfig(max_depth=0, resample=False))
    assert np.all(tree.predict_proba(X) == 0.25)


def test_tree_tie_break_prefers_lowest_feature():
    # both columns split the labels perfectly; feature 0 must win
    X = np.array([[0, 0], [0, 0], [1, 1], [1, 1]], dtype=float)
    y = np.array([0, 0, 1, 1])
    tree = train_tree(X, y, TreeConfig(max_depth=1, min_leaf=1, resample=False))
    assert tree.root.feature == 0
    assert tree.root.threshold == 0.5


def test_tree_respects_min_leaf():
    X, y = _xor(reps=5)
    tree = train_tree(X, y, TreeConfig(max_depth=6, min_leaf=20, resample=False))
    assert tree.n_leaves() == 1


# --- evaluation ----------------------------------------------------------------


def test_hand_built_confusion_metrics():
    # tp=4 fp=1 fn=2 tn=3 for class 1
    y_true = [1, 1, 1, 1, 1, 1, 0, 0, 0, 0]
    y_pred = [1, 1, 1, 1, 0, 0, 1, 0, 0, 0]
    r = classification_report(y_true, y_pred)
    assert r.accuracy == 0.7
    assert r.precision[1] == 4 / 5 and r.recall[1] == 4 / 6
    assert r.precision[0] == 3 / 5 and r.recall[0] == 3 / 4
    f1_1 = 2 * (4 / 5) * (4 / 6) / (4 / 5 + 4 / 6)
    f1_0 = 2 * (3 / 5) * (3 / 4) / (3 / 5 + 3 / 4)
    assert r.f1[1] == pytest.approx(f1_1) and r.macro_f1 == pytest.approx((f1_0 + f1_1) / 2)
    assert r.flags == []


def _tables(n_months=4, seed=0, constant=None):
    rng = np.random.default_rng(seed)
    out = []
    for m in range(n_months):
        X = rng.normal(size=(120, 2))
        y = (X[:, 0] + 0.5 * rng.normal(size=120) > 0).astype(np.int8)
        if constant is not None:
            y[:] = constant
        out.append(FeatureTable(("a", "b"), X, y, np.zeros(120, dtype=np.int64),
                                tuple(["2024-01-01"] * 120), f"2024-{m + 1:02d}"))
    return out


def test_constant_label_corpus_flags_undefined_metrics():
    reps = forward_chain_eval(_tables(constant=1))
    for r in reps:
        assert r.accuracy == 1.0
        assert r.precision[0] == 0.0 and r.recall[0] == 0.0
        assert "recall[0] undefined" in r.flags


def test_forward_chain_needs_two_months():
    with pytest.raises(ValueError):
        forward_chain_eval(_tables(n_months=1))


def test_perturbing_target_month_leaves_earlier_reports_unchanged():
    base = _tables()
    pert = _tables()
    last = pert[-1]
    pert[-1] = FeatureTable(last.feature_names, last.X, 1 - last.y, last.clinician, last.date, last.month)
    a = forward_chain_eval(base, calibrate=True)
    b = forward_chain_eval(pert, calibrate=True)
    assert [r.as_dict() for r in a[:-1]] == [r.as_dict() for r in b[:-1]]
    # flipping every label flips every correct prediction
    assert b[-1].accuracy == pytest.approx(1 - a[-1].accuracy)


def test_forward_chain_tree_family_runs():
    reps = forward_chain_eval(_tables(), family="tree", cfg=TreeConfig(max_depth=3))
    assert [r.month for r in reps] == ["2024-02", "2024-03", "2024-04"]
    assert all(r.accuracy > 0.6 for r in reps)


# --- calibration ---------------------------------------------------------------


def test_hand_built_twenty_point_calibration():
    raw = [0.05] * 4 + [0.35] * 6 + [0.55] * 5 + [0.95] * 5
    out = [1, 0, 0, 0] + [1, 1, 1, 0, 0, 0] + [1, 1, 1, 1, 0] + [1, 1, 1, 1, 1]
    cal = fit_calibrator(raw, out)
    assert cal.apply([0.01, 0.38, 0.58, 0.99]).tolist() == [0.25, 0.5, 0.8, 1.0]
    # empty bin maps to itself
    assert apply_calibrator(cal, [0.75]).tolist() == [0.75]
    assert cal.counts.tolist() == [4, 0, 0, 6, 0, 5, 0, 0, 0, 5]


def test_perfectly_calibrated_input_is_near_fixed_point():
    rng = np.random.default_rng(0)
    p = rng.uniform(0, 1, 200000)
    y = rng.uniform(0, 1, p.size) < p
    cal = fit_calibrator(p, y)
    q = np.linspace(0.001, 0.999, 200)
    assert np.all(np.abs(cal.apply(q) - q) <= 0.05 + 0.01)


def test_all_positive_outcomes_map_to_one():
    cal = fit_calibrator([0.1, 0.2, 0.7], [1, 1, 1])
    assert cal.apply([0.15, 0.25, 0.75]).tolist() == [1.0, 1.0, 1.0]


def test_calibration_on_held_out_data():
    rng = np.random.default_rng(9)

    def draw(n):
        X = rng.normal(size=(n, 2))
        y = (rng.uniform(size=n) < sigmoid(0.3 + X @ np.array([1.2, -0.7]) + 0.8 * np.sin(2 * X[:, 0]))).astype(int)
        return X, y

    X, y = draw(4000)
    m = train_logistic(X, y)
    Xc, yc = draw(20000)
    cal = fit_calibrator(m.predict_raw(Xc), yc)
    Xh, yh = draw(20000)
    ph = cal.apply(m.predict_raw(Xh))
    idx = cal.bin_of(m.predict_raw(Xh))
    for b in range(cal.n_bins):
        sel = idx == b
        if sel.sum() >= 50:
            assert abs(ph[sel].mean() - yh[sel].mean()) <= 0.05


# --- fusion and files ----------------------------------------------------------


def test_fusion_examples():
    p_c = np.array([[0.92, 0.92, 0.92]])
    g = fuse_probabilities(p_c, {(0, 0): NoteSignal(0, "2024-03-04", 0, "conflict:pto", "rule-engine", "pto"), (0, 1): None, (0, 2): 1})
    assert g.p.tolist() == [[0.0, 0.92, 0.92]]
    assert g.hard_mask.tolist() == [[0, 1, 1]]
    assert g.provenance.tolist() == [[NOTE_FORCED_ZERO, MODEL, MODEL]]


def test_fusion_never_raises_probability():
    rng = np.random.default_rng(1)
    p_c = rng.uniform(size=(6, 10))
    sig = {(int(i), int(t)): int(rng.integers(0, 2)) for i, t in rng.integers(0, [6, 10], (30, 2))}
    g = fuse_probabilities(p_c, sig)
    assert np.all(g.p <= p_c)
    assert np.all(g.p[g.hard_mask == 0] == 0)


def test_grid_invariant_enforced():
    with pytest.raises(ValueError):
        ProbabilityGrid(np.array([[0.5]]), np.array([[0]]), np.array([[MODEL]], dtype=object))


def test_grid_csv_round_trip(tmp_path):
    g = fuse_probabilities(np.array([[0.25, 0.5], [0.125, 1.0]]), {(1, 0): 0})
    horizon = ["2024-03-01", "2024-03-04"]
    path = tmp_path / "grid.csv"
    text = write_grid_csv(g, horizon, path)
    assert text.splitlines()[0] == "clinician_id,date,p,hard_available,provenance"
    back = read_grid_csv(path, horizon, 2)
    assert np.array_equal(back.p, g.p) and np.array_equal(back.hard_mask, g.hard_mask)
    assert back.provenance.tolist() == g.provenance.tolist()


def test_model_json_round_trip(tmp_path):
    X, y = _separable(1)
    m = train_logistic(X, y, feature_names=("u", "v"))
    m.calibrator = fit_calibrator(m.predict_raw(X), y)
    path = tmp_path / "model.json"
    save_model(m, path)
    d = json.loads(path.read_text())
    assert {"schema_version", "feature_names", "standardization", "beta0", "beta", "calibrator"} <= set(d)
    back = load_model(path)
    assert np.array_equal(back.predict_proba(X), m.predict_proba(X))
    assert back.beta0 == m.beta0 and back.feature_names == ("u", "v")
