import json

import numpy as np
import pytest
from hypothesis import given, strategies as st

from birdsdm.checklists import Hotspot
from birdsdm.errors import DataError
from birdsdm.metrics import (EvalReport, adaptive_top_k, evaluate, export_performance_geojson, mae, mse,
                             per_species_precision_recall, table_row, top_k_accuracy, write_per_species_csv)
from oracles import adaptive_oracle, confusion_oracle, mae_oracle, mse_oracle, random_rows, topk_oracle


def test_regression_examples(rng):
    t = rng.random((5, 7))
    assert mse(t, t) == 0.0 and mae(t, t) == 0.0
    assert mse([[0.2]], [[0.5]]) == pytest.approx(0.09, abs=1e-15)
    assert mae([[0.2]], [[0.5]]) == pytest.approx(0.3, abs=1e-15)
    p = rng.random((5, 7))
    assert abs(mse(p, t) - mse_oracle(p.tolist(), t.tolist())) < 1e-12
    assert abs(mae(p, t) - mae_oracle(p.tolist(), t.tolist())) < 1e-12
    with pytest.raises(DataError):
        mse(p, t[:, :3])


def test_top_k_example():
    # species A,B,C,D; prediction ranks A > D > B > C, observed {A, B, C}
    pred = np.array([0.9, 0.5, 0.1, 0.7])
    truth = np.array([0.3, 0.2, 0.1, 0.0])
    assert top_k_accuracy(pred, truth, 3) == pytest.approx(2 / 3)
    assert top_k_accuracy(truth, truth, 3) == 1.0
    assert top_k_accuracy(pred, np.zeros(4), 3) is None
    with pytest.raises(DataError):
        top_k_accuracy(pred, truth, 5)


def test_adaptive_examples():
    truth = np.array([0.0, 0.4, 0.0])
    assert adaptive_top_k(np.array([0.1, 0.9, 0.2]), truth) == 1.0
    assert adaptive_top_k(np.array([0.9, 0.1, 0.2]), truth) == 0.0


@given(st.integers(0, 2**31), st.integers(1, 12), st.sampled_from(["min", "k"]))
def test_rank_metrics_match_oracle(seed, k, denom):
    preds, truth = random_rows(np.random.default_rng(seed), 8, 12)
    for p, t in zip(preds, truth):
        assert top_k_accuracy(p, t, k, denom) == topk_oracle(p.tolist(), t.tolist(), k, denom)
        assert adaptive_top_k(p, t) == adaptive_oracle(p.tolist(), t.tolist())


def test_precision_recall_examples():
    truth = np.array([[0.5, 0.0], [0.0, 0.5]])
    scores = per_species_precision_recall(truth, truth)
    assert [(s.precision, s.recall) for s in scores] == [(1.0, 1.0), (1.0, 1.0)]
    # species 1 observed at 4 hotspots but always outranked by species 0
    truth = np.array([[0.0, 0.5]] * 4)
    preds = np.array([[0.9, 0.1]] * 4)
    s1 = per_species_precision_recall(preds, truth)[1]
    assert (s1.recall, s1.occurrences, s1.precision) == (0.0, 4, None)


@given(st.integers(0, 2**31))
def test_precision_recall_match_confusion_oracle(seed):
    preds, truth = random_rows(np.random.default_rng(seed), 10, 6)
    got = [(s.precision, s.recall, s.occurrences) for s in per_species_precision_recall(preds, truth)]
    assert got == confusion_oracle(preds.tolist(), truth.tolist())


def hotspots(n):
    return [Hotspot(f"H{i}", 10.0 + i, -20.0 - i, "R") for i in range(n)]


def test_evaluate_identity(rng):
    truth = np.where(rng.random((6, 12)) < 0.5, rng.random((6, 12)), 0.0)
    truth[:, 0] = 0.5
    r = evaluate(truth, truth)
    assert r.mse == 0 and r.adaptive_topk == 1.0 and r.top10 == 1.0 and r.top30 is None


def test_report_totals_match_entries(rng):
    preds, truth = random_rows(rng, 20, 31)
    truth[3] = 0.0
    r = evaluate(preds, truth, hotspots(20))
    defined = [h.adaptive_topk for h in r.per_hotspot if h.adaptive_topk is not None]
    assert r.adaptive_topk == pytest.approx(sum(defined) / len(defined), abs=1e-15)
    assert r.skipped == 1 and r.per_hotspot[3].adaptive_topk is None and r.n_hotspots == 20
    assert r.top30 is not None
    assert [h.k for h in r.per_hotspot] == [int((t > 0).sum()) for t in truth]


def test_report_json_and_csv(tmp_path, rng):
    preds, truth = random_rows(rng, 5, 10)
    r = evaluate(preds, truth, hotspots(5), [f"s{i}" for i in range(10)])
    assert EvalReport.from_json(r.to_json()) == r
    write_per_species_csv(tmp_path / "ps.csv", r)
    lines = (tmp_path / "ps.csv").read_text().splitlines()
    assert lines[0] == "species,recall,precision,occurrences" and len(lines) == 11
    recalls = [float(x.split(",")[1]) for x in lines[1:] if x.split(",")[1]]
    assert recalls == sorted(recalls, reverse=True)


def test_geojson(tmp_path, rng):
    preds, truth = random_rows(rng, 3, 10)
    r = evaluate(preds, truth, hotspots(3))
    coll = export_performance_geojson(r, tmp_path / "p.geojson")
    back = json.loads((tmp_path / "p.geojson").read_text())
    assert back == coll and len(back["features"]) == 3
    assert back["features"][1]["geometry"]["coordinates"] == [-21.0, 11.0]
    assert back["features"][1]["properties"]["adaptive_topk"] == r.per_hotspot[1].adaptive_topk


def test_table_row_units():
    r = EvalReport(mse=0.0123, mae=0.045, top10=0.5, top30=None, adaptive_topk=0.7338, n_hotspots=1, skipped=0)
    row = table_row(r)
    assert row["MSE[1e-3]"] == pytest.approx(12.3) and row["MAE[1e-2]"] == pytest.approx(4.5)
    assert row["Top-k"] == pytest.approx(73.38) and row["Top-30"] is None


@given(st.integers(0, 2**31))
def test_species_permutation_invariance(seed):
    r = np.random.default_rng(seed)
    # continuous values: no ties for the index rule to break
    truth = r.random((12, 31)) * (r.random((12, 31)) < 0.5)
    preds = r.random((12, 31))
    perm = r.permutation(31)
    a, b = evaluate(preds, truth), evaluate(preds[:, perm], truth[:, perm])
    for field in ("mse", "mae", "top10", "top30", "adaptive_topk"):
        assert getattr(a, field) == pytest.approx(getattr(b, field), abs=1e-15)


@given(st.integers(0, 2**31))
def test_monotone_transform_invariance(seed):
    preds, truth = random_rows(np.random.default_rng(seed), 10, 12)
    moved = np.exp(3 * preds) - 7
    for p, q, t in zip(preds, moved, truth):
        assert top_k_accuracy(p, t, 5) == top_k_accuracy(q, t, 5)
        assert adaptive_top_k(p, t) == adaptive_top_k(q, t)


@given(st.integers(0, 2**31))
def test_bounds_and_full_prediction_recall(seed):
    r = np.random.default_rng(seed)
    preds, truth = random_rows(r, 10, 12)
    rep = evaluate(preds, truth)
    assert 0 <= rep.mse <= 1 and rep.mae >= 0
    assert all(v is None or 0 <= v <= 1 for v in (rep.top10, rep.adaptive_topk))
    full = r.uniform(0.1, 1, (5, 12))  # every species observed, so every species is predicted present
    assert all(s.recall == 1.0 for s in per_species_precision_recall(r.random((5, 12)), full))
