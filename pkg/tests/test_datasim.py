import math

import numpy as np
import pytest

from ptosched import datasim
from ptosched.core import ScheduleMatrix, validate_schedule
from ptosched.datasim import (
    AVAILABLE,
    NEUTRAL,
    UNAVAILABLE,
    SimConfig,
    SimConfigError,
    engineer_features,
    phrase_bank,
    sample_notes,
    simulate_corpus,
    structural_labels,
)
from ptosched.notelab import classify_note

from conftest import make_instance

SHORT = dict(months=((2024, 1), (2024, 2), (2024, 3)))


@pytest.fixture(scope="module")
def corpus():
    return simulate_corpus(SimConfig(**SHORT))


def test_templates_never_double_book(corpus):
    for md in corpus.months:
        rep = validate_schedule(md.template, md.instance)
        assert rep.by_family("one_shift_per_day") == []


def test_historical_coverage_in_regime(corpus):
    for md in corpus.months:
        for s in range(md.instance.n_shift_types):
            cov = md.template.entries[:, s].sum() / md.instance.demand[s].sum()
            assert 0.6 < cov < 1.0


def test_note_count_is_floor_of_rate(corpus):
    for md in corpus.months:
        n = sum(1 for nt in corpus.notes if nt.date[:7] == md.key)
        assert n == math.floor(0.10 * md.template.n_assigned())


def test_400_assignments_give_40_notes():
    inst = make_instance([0.9] * 20, [[20] * 20])
    b = np.ones(inst.shape, dtype=np.int8)
    notes = sample_notes(ScheduleMatrix(b), inst, 0.10, np.random.default_rng(0), (2024, 1))
    assert len(notes) == 40
    assert len({(n.clinician, n.date) for n in notes}) == 40


def test_zero_note_rate():
    c = simulate_corpus(SimConfig(note_rate=0.0, **SHORT))
    assert len(c.notes) == 0


def test_notes_sit_on_assigned_days(corpus):
    by_key = {md.key: md for md in corpus.months}
    for n in corpus.notes:
        md = by_key[n.date[:7]]
        t = md.instance.horizon.index(n.date)
        assert md.template.worked()[n.clinician, t] == 1


def test_determinism():
    a = simulate_corpus(SimConfig(**SHORT))
    b = simulate_corpus(SimConfig(**SHORT))
    assert datasim.write_notes_csv(a.notes) == datasim.write_notes_csv(b.notes)
    for x, y in zip(a.months, b.months):
        assert x.template == y.template
        assert np.array_equal(x.instance.demand, y.instance.demand)


def test_months_are_independent_substreams():
    # generating a month alone or inside a longer run gives the same data
    a = simulate_corpus(SimConfig(months=((2024, 2),)))
    b = simulate_corpus(SimConfig(**SHORT))
    assert a.months[0].template == b.month("2024-02").template


def test_config_errors():
    with pytest.raises(SimConfigError):
        SimConfig(n_clinicians=3, demand_profile={"Clin": (2, 2), "Proc": (2, 2)})
    with pytest.raises(SimConfigError):
        SimConfig(note_rate=1.5)
    with pytest.raises(SimConfigError):
        SimConfig(months=((2024, 2), (2024, 1)))
    with pytest.raises(SimConfigError):
        SimConfig(months=())


def test_phrase_bank_contents():
    bank = dict(phrase_bank())
    assert bank["Vacation"] == UNAVAILABLE
    assert bank["stayed late"] == AVAILABLE
    assert NEUTRAL in bank.values()
    for phrase in ("paid-time-off", "Interview Day", "Conference", "Covering OR", "OR coverage all day",
                   "illness", "Overtime", "extended clinic"):
        assert phrase in bank


def test_phrase_bank_agrees_with_rule_engine():
    want = {UNAVAILABLE: 0, AVAILABLE: 1, NEUTRAL: None}
    for text, tag in phrase_bank():
        assert classify_note(text)[0] == want[tag], text


def _two_month_history():
    # month 0 = January 2024 (Mondays: 1, 8, 15, 22, 29), month 1 = February 2024
    jan = make_instance([0.5], [[0] * 31], start="2024-01-01")
    feb = make_instance([0.5], [[0] * 29], start="2024-02-01")
    return jan, feb


def test_full_attendance_gives_rate_one_and_no_history_gives_prior():
    jan, feb = _two_month_history()
    lab_jan = np.ones((1, 31), dtype=np.int8)
    lab_feb = np.zeros((1, 29), dtype=np.int8)
    templates = [(jan, ScheduleMatrix.zeros(jan.shape)), (feb, ScheduleMatrix.zeros(feb.shape))]
    ft = engineer_features(templates, [lab_jan, lab_feb], 1)
    col = ft.feature_names.index("rate_monthly")
    assert np.all(ft.X[:, col] == 1.0)
    ft0 = engineer_features(templates, [lab_jan, lab_feb], 0)
    for name in ("rate_weekly", "rate_monthly", "rate_weekday", "rate_history"):
        assert np.all(ft0.X[:, ft0.feature_names.index(name)] == 0.5)


def test_weekday_rate_counts_last_four_occurrences():
    jan, feb = _two_month_history()
    lab_jan = np.zeros((1, 31), dtype=np.int8)
    mondays = [0, 7, 14, 21, 28]  # Jan 1, 8, 15, 22, 29
    lab_jan[0, mondays] = [0, 1, 0, 1, 1]  # last four Mondays: 1, 0, 1, 1
    templates = [(jan, ScheduleMatrix.zeros(jan.shape)), (feb, ScheduleMatrix.zeros(feb.shape))]
    ft = engineer_features(templates, [lab_jan, np.zeros((1, 29), dtype=np.int8)], 1)
    col = ft.feature_names.index("rate_weekday")
    mon = [k for k, d in enumerate(ft.date) if d in ("2024-02-05", "2024-02-12")]
    assert np.allclose(ft.X[mon, col], 0.75)


def test_features_ignore_target_and_future_months(corpus):
    templates = [(m.instance, m.template) for m in corpus.months]
    labels = [structural_labels(m.instance, m.template) for m in corpus.months]
    base = engineer_features(templates, labels, 1)
    corrupted = [l.copy() for l in labels]
    corrupted[1][:] = 1 - np.clip(corrupted[1], 0, 1)
    corrupted[2][:] = 0
    again = engineer_features(templates, corrupted, 1)
    assert np.array_equal(base.X, again.X)
    assert np.all((base.X[:, 19:23] >= 0) & (base.X[:, 19:23] <= 1))
    assert base.X.shape[1] == len(base.feature_names) == 25


def test_notes_csv_round_trip(tmp_path, corpus):
    path = tmp_path / "notes.csv"
    datasim.write_notes_csv(corpus.notes, path)
    assert path.read_text().splitlines()[0] == "clinician_id,date,text,created_month"
    assert tuple(datasim.read_notes_csv(path)) == corpus.notes


def test_feature_csv_header(corpus):
    templates = [(m.instance, m.template) for m in corpus.months]
    labels = [structural_labels(m.instance, m.template) for m in corpus.months]
    ft = engineer_features(templates, labels, 2)
    head = ft.to_csv().splitlines()[0].split(",")
    assert head[-1] == "label"
    assert head[2:-1] == list(ft.feature_names)
