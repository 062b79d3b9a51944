import datetime as dt
import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from causalpanel import errors
from causalpanel.artifacts import read_csv
from causalpanel.evaluate import (
    evaluate_model,
    per_entity_errors,
    rmse_by_date,
    rmse_mean_over_dates,
    rmse_overall,
    write_rmse_by_date,
    write_rmse_by_entity,
    write_summary,
)

D0 = dt.date(2020, 5, 19)


def _index(n_ent, n_dates):
    return [(f"s{e}", D0 + dt.timedelta(days=d)) for e in range(n_ent) for d in range(n_dates)]


def test_perfect_predictions():
    assert rmse_overall([1.0, 2.0], [1.0, 2.0]) == 0.0


def test_three_four():
    assert rmse_overall([3.0, 4.0], [0.0, 0.0]) == pytest.approx(np.sqrt(12.5), abs=1e-15)
    assert np.sqrt(12.5) == pytest.approx(3.53553, abs=1e-5)


def test_length_mismatch_and_empty():
    with pytest.raises(errors.ValidationError):
        rmse_overall([1.0], [1.0, 2.0])
    with pytest.raises(errors.ValidationError):
        rmse_overall([], [])
    with pytest.raises(errors.ValidationError):
        rmse_mean_over_dates([])


def test_by_date_simple_cases():
    assert rmse_by_date([1.0], [1.0], [("a", D0)]) == [(D0, 0.0)]
    assert rmse_by_date([1.0, 1.0], [0.0, 2.0], [("a", D0), ("b", D0)]) == [(D0, 1.0)]


def test_mean_over_dates():
    assert rmse_mean_over_dates([1.0, 3.0]) == 2.0
    assert rmse_mean_over_dates([(D0, 0.7)] * 5) == pytest.approx(0.7, abs=1e-15)


def test_ragged_panel_rejected():
    idx = [("a", D0), ("b", D0), ("a", D0 + dt.timedelta(days=1))]
    with pytest.raises(errors.ValidationError, match="ragged"):
        rmse_by_date([0.0] * 3, [1.0] * 3, idx)


def test_entity_without_rows():
    with pytest.raises(errors.ValidationError):
        per_entity_errors([0.0], [1.0], [("a", D0)], entities=["a", "b"])


@settings(max_examples=40, deadline=None)
@given(st.integers(1, 6), st.integers(1, 8), st.integers(0, 10_000))
def test_brute_force_oracles(n_ent, n_dates, seed):
    rng = np.random.default_rng(seed)
    obs = rng.standard_normal((n_ent, n_dates))
    pred = rng.standard_normal((n_ent, n_dates))
    idx = _index(n_ent, n_dates)
    o, p = obs.reshape(-1), pred.reshape(-1)

    by_date = rmse_by_date(o, p, idx)
    for d, (date, r) in enumerate(by_date):
        assert date == D0 + dt.timedelta(days=d)
        expected = np.sqrt(sum((obs[e, d] - pred[e, d]) ** 2 for e in range(n_ent)) / n_ent)
        assert r == pytest.approx(expected, abs=1e-12)

    for e, (name, r) in enumerate(per_entity_errors(o, p, idx)):
        expected = np.sqrt(sum((obs[e, d] - pred[e, d]) ** 2 for d in range(n_dates)) / n_dates)
        assert name == f"s{e}" and r == pytest.approx(expected, abs=1e-12)

    overall = rmse_overall(o, p)
    assert overall**2 == pytest.approx(np.mean([r**2 for _, r in by_date]), abs=1e-12)
    assert rmse_mean_over_dates(by_date) == pytest.approx(np.mean([r for _, r in by_date]), abs=1e-15)

    perm = rng.permutation(len(o))
    shuffled = per_entity_errors(o[perm], p[perm], [idx[i] for i in perm])
    for (n1, r1), (n2, r2) in zip(shuffled, per_entity_errors(o, p, idx)):
        assert n1 == n2 and r1 == pytest.approx(r2, abs=1e-15)
    assert min(r for _, r in by_date) >= 0


def test_single_entity_matches_overall():
    rng = np.random.default_rng(1)
    o, p = rng.standard_normal(7), rng.standard_normal(7)
    [(name, r)] = per_entity_errors(o, p, _index(1, 7))
    assert r == pytest.approx(rmse_overall(o, p), abs=1e-15)


def _reports():
    rng = np.random.default_rng(2)
    idx = _index(3, 4)
    obs = rng.standard_normal(12)
    out = {}
    for i, kind in enumerate(["ridge", "ols", "lasso"]):
        pred = obs + (i + 1) * 0.1 * rng.standard_normal(12)
        out[kind] = evaluate_model(kind, obs, pred, obs, pred, idx, inverse=np.exp)
    return out


def test_report_files(tmp_path):
    reports = _reports()
    write_rmse_by_date(tmp_path / "d.csv", reports, "k")
    write_rmse_by_entity(tmp_path / "e.csv", reports, "k")
    write_summary(tmp_path / "s.json", reports, "ln", "k")
    assert (tmp_path / "d.csv").read_text().splitlines()[:2] == [
        "# config_digest: k",
        "date,rmse_linear,rmse_lasso,rmse_ridge",
    ]
    rows = read_csv(tmp_path / "e.csv")
    assert len(rows) == 9 and rows[0]["model"] == "linear"
    doc = json.loads((tmp_path / "s.json").read_text())
    assert doc["config_digest"] == "k" and doc["response_scale"] == "ln"
    first = doc["models"][0]
    assert first["model"] == "linear"
    assert first["rmse_test"] == float(f"{reports['ols'].test_rmse:.6g}")
    assert "original_scale" in first
