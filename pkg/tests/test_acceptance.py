"""Acceptance criteria, each run at its stated tolerance.

Every test records one ``PASS``/``FAIL`` line that is printed in the terminal
summary. Criterion 10 needs the study panel; point ``CAUSALPANEL_STUDY_DIR``
at a directory holding ``panel.csv`` and ``schema.yaml`` to enable it.
"""

import datetime as dt
import json
import os
import time
from pathlib import Path

import numpy as np
import pytest

from causalpanel.artifacts import read_csv
from causalpanel.cli import main
from causalpanel.evaluate import per_entity_errors, rmse_by_date, rmse_mean_over_dates, rmse_overall
from causalpanel.granger import bivariate_granger, conditional_granger
from causalpanel.regression import compute_path, default_grid, fit_lasso, fit_ols, fit_ridge, soft_threshold
from causalpanel.synth import VarProcessSpec, generate_var_series, make_chain_spec
from causalpanel.var import select_lag
from conftest import ACCEPTANCE_LINES


def record(number, title, passed, detail):
    line = f"[{'PASS' if passed else 'FAIL'}] criterion {number:>2}: {title} ({detail})"
    ACCEPTANCE_LINES.append(line)
    print(line)
    assert passed, line


def _std(X):
    Z = (X - X.mean(axis=0)) / X.std(axis=0)
    return Z - Z.mean(axis=0)


def test_c01_chain_discrimination():
    t0 = time.perf_counter()
    ok, worst_biv, worst_cond = 0, np.inf, -np.inf
    for seed in range(20):
        data = generate_var_series(make_chain_spec(0.5, seed=seed, length=5000))
        biv = bivariate_granger(data, "Y", "X", 4).g_x_to_y
        cond = conditional_granger(data, "X", "Y", ["Z"], 4)
        ok += biv > 0.05 and cond < 0.01
        worst_biv, worst_cond = min(worst_biv, biv), max(worst_cond, cond)
    elapsed = time.perf_counter() - t0
    record(1, "chain discrimination", ok >= 18 and elapsed < 10,
           f"{ok}/20 seeds, min bivariate {worst_biv:.4f}, max conditional {worst_cond:.4f}, {elapsed:.2f}s")


def test_c02_geweke_additivity():
    rng = np.random.default_rng(2024)
    worst = 0.0
    for i in range(100):
        T, p = int(rng.integers(50, 400)), int(rng.integers(1, 5))
        A = rng.uniform(-0.4, 0.4, (1, 2, 2))
        L = np.tril(rng.uniform(-0.5, 0.5, (2, 2))) + np.eye(2)
        data = generate_var_series(VarProcessSpec(A, L @ L.T, seed=i, length=T, names=("X", "Y")))
        worst = max(worst, abs(bivariate_granger(data, "X", "Y", p).additivity_gap))
    record(2, "Geweke additivity", worst < 1e-10, f"max gap {worst:.2e} over 100 fits")


def test_c03_null_causality():
    ok = 0
    for seed in range(100):
        spec = VarProcessSpec(np.zeros((1, 2, 2)), np.eye(2), seed=10_000 + seed, length=5000, names=("X", "Y"))
        res = bivariate_granger(generate_var_series(spec), "X", "Y", 4)
        ok += res.g_x_to_y < 0.02 and res.g_y_to_x < 0.02
    record(3, "null causality", ok >= 95, f"{ok}/100 seeds with both scores < 0.02")


VAR3 = np.zeros((3, 2, 2))
VAR3[0] = [[0.3, 0.1], [0.0, 0.2]]
VAR3[2] = [[0.4, 0.0], [0.3, 0.3]]


def test_c04_aic_lag_recovery():
    t0 = time.perf_counter()
    picks = []
    for seed in range(20):
        data = generate_var_series(VarProcessSpec(VAR3, np.eye(2), seed=seed, length=2000))
        picks.append(select_lag(data, data.names, 8))
    elapsed = time.perf_counter() - t0
    hits = picks.count(3)
    record(4, "AIC lag recovery", hits >= 18 and elapsed < 30,
           f"{hits}/20 seeds select 3, picks {picks}, {elapsed:.2f}s")


def test_c05_regularization_reductions():
    rng = np.random.default_rng(5)
    worst_ridge = worst_lasso = 0.0
    for _ in range(20):
        n, k = int(rng.integers(30, 120)), int(rng.integers(2, 8))
        X = rng.standard_normal((n, k)) @ rng.standard_normal((k, k)) + rng.uniform(-3, 3, k)
        y = X @ rng.standard_normal(k) + rng.standard_normal(n)
        ols = np.array([fit_ols(X, y).intercept, *fit_ols(X, y).coefficients.values()])
        ridge = fit_ridge(X, y, 0.0)
        lasso = fit_lasso(X, y, 0.0)
        worst_ridge = max(worst_ridge, np.max(np.abs(np.array([ridge.intercept, *ridge.coefficients.values()]) - ols)))
        worst_lasso = max(worst_lasso, np.max(np.abs(np.array([lasso.intercept, *lasso.coefficients.values()]) - ols)))
    record(5, "regularization reductions", worst_ridge < 1e-10 and worst_lasso < 1e-6,
           f"ridge max diff {worst_ridge:.1e}, lasso max diff {worst_lasso:.1e}")


def test_c06_lasso_oracle_and_kkt():
    rng = np.random.default_rng(6)
    worst_soft = worst_kkt = 0.0
    fits = 0
    for lam in (0.01, 0.1, 0.5, 1.0, 3.0):
        q = rng.standard_normal((60, 5))
        q, _ = np.linalg.qr(q - q.mean(axis=0))
        y = q @ rng.uniform(-4, 4, 5) + 0.2 * rng.standard_normal(60)
        m = fit_lasso(q, y, lam, standardize=False)
        oracle = soft_threshold(q.T @ (y - y.mean()), lam)
        worst_soft = max(worst_soft, np.max(np.abs(m.coefficients_std - oracle)))
        problems = [(q, y, False)]
        X = rng.standard_normal((80, 6))
        X[:, 1] = X[:, 0] + 0.05 * rng.standard_normal(80)
        problems.append((X, X[:, :3] @ [1.0, -1.0, 0.5] + rng.standard_normal(80), True))
        for Xp, yp, std in problems:
            m = fit_lasso(Xp, yp, lam, standardize=std)
            Z = _std(Xp) if std else Xp - Xp.mean(axis=0)
            a = m.coefficients_std
            g = Z.T @ (yp - yp.mean() - Z @ a)
            nz = a != 0
            viol = np.concatenate([np.maximum(np.abs(g[~nz]) - lam, 0), np.abs(g[nz] - lam * np.sign(a[nz]))])
            worst_kkt = max(worst_kkt, float(viol.max(initial=0.0)))
            fits += 1
    record(6, "lasso soft-threshold oracle and KKT", worst_soft < 1e-8 and worst_kkt < 1e-6,
           f"soft-threshold max diff {worst_soft:.1e}, KKT max violation {worst_kkt:.1e} over {fits} fits")


def test_c07_ridge_shrinkage_monotone():
    rng = np.random.default_rng(7)
    X = rng.standard_normal((100, 6)) @ rng.standard_normal((6, 6))
    y = X @ rng.standard_normal(6) + rng.standard_normal(100)
    worst = 0.0
    for grid in (default_grid(50), np.logspace(-4, 4, 50)):
        path = compute_path(X, y, "ridge", grid)
        norms = np.linalg.norm(path.coefficients, axis=1)[::-1]  # ascending lambda
        worst = max(worst, float(np.max(np.diff(norms), initial=0.0)))
    record(7, "ridge shrinkage monotonicity", worst <= 1e-10, f"largest norm increase {worst:.1e}")


def test_c08_evaluation_identities():
    rng = np.random.default_rng(8)
    worst = 0.0
    for _ in range(20):
        n_ent, n_dates = int(rng.integers(1, 10)), int(rng.integers(1, 30))
        obs, pred = rng.standard_normal((2, n_ent, n_dates))
        idx = [(f"s{e:02d}", dt.date(2020, 5, 19) + dt.timedelta(days=d)) for e in range(n_ent) for d in range(n_dates)]
        res = obs - pred
        r_d = np.sqrt((res**2).sum(axis=0) / n_ent)
        r_e = np.sqrt((res**2).sum(axis=1) / n_dates)
        got_d = np.array([r for _, r in rmse_by_date(obs.ravel(), pred.ravel(), idx)])
        got_e = np.array([r for _, r in per_entity_errors(obs.ravel(), pred.ravel(), idx)])
        diffs = [
            np.max(np.abs(got_d - r_d)),
            np.max(np.abs(got_e - r_e)),
            abs(rmse_overall(obs.ravel(), pred.ravel()) - np.sqrt((res**2).sum() / res.size)),
            abs(rmse_mean_over_dates(got_d.tolist()) - r_d.sum() / n_dates),
        ]
        worst = max(worst, *diffs)
    three_four = rmse_overall([3.0, 4.0], [0.0, 0.0])
    ok = worst < 1e-12 and abs(three_four - np.sqrt(12.5)) < 1e-12
    record(8, "evaluation identities", ok, f"max diff {worst:.1e}, rmse([3,4]) = {three_four:.6f}")


def test_c09_pipeline_determinism(tmp_path):
    assert main(["synth", "--out", str(tmp_path / "data"), "--seed", "9", "--length", "200", "--entities", "5"]) == 0
    common = ["--input", str(tmp_path / "data" / "panel.csv"), "--schema", str(tmp_path / "data" / "schema.yaml"),
              "--train-end", "2020-08-31", "--test-start", "2020-09-01", "--test-end", "2020-09-16", "--pmax", "4"]
    codes = [main(["run", *common, "--out", str(tmp_path / name)]) for name in ("a", "b")]
    files_a = sorted(p.name for p in (tmp_path / "a").iterdir())
    files_b = sorted(p.name for p in (tmp_path / "b").iterdir())
    same = files_a == files_b and all(
        (tmp_path / "a" / n).read_bytes() == (tmp_path / "b" / n).read_bytes() for n in files_a
    )
    record(9, "pipeline determinism", codes == [0, 0] and same, f"exit codes {codes}, {len(files_a)} artifacts compared")


STUDY_DIR = os.environ.get("CAUSALPANEL_STUDY_DIR")


@pytest.mark.skipif(not STUDY_DIR, reason="study panel not provided (set CAUSALPANEL_STUDY_DIR)")
def test_c10_study_reproduction(tmp_path):
    study = Path(STUDY_DIR)
    code = main(["run", "--input", str(study / "panel.csv"), "--schema", str(study / "schema.yaml"),
                 "--train-end", "2020-05-18", "--test-start", "2020-05-19", "--test-end", "2020-06-13",
                 "--cutoff", "0.003", "--out", str(tmp_path)])
    if code != 0:
        record(10, "study reproduction", False, f"pipeline exit code {code}")
    summary = {m["model"]: m for m in json.loads((tmp_path / "summary.json").read_text())["models"]}
    test_rmse = {k: summary[k]["rmse_test"] for k in ("ridge", "lasso", "linear")}
    n_selected = len(json.loads((tmp_path / "selected.json").read_text())["selected"])
    ordering = test_rmse["ridge"] < test_rmse["lasso"] < test_rmse["linear"]
    signs = {}
    for kind in ("ols", "ridge", "lasso"):
        coef = json.loads((tmp_path / f"model_{kind}.json").read_text())["coefficients"]
        signs[kind] = {n: np.sign(c) for n, c in coef.items()}
    causality = read_csv(tmp_path / "causality.csv")
    record(10, "study reproduction", ordering and n_selected == 17,
           f"test RMSE {test_rmse}, {n_selected} selected of {len(causality)}, signs {signs}")


def test_c10_unavailable_note():
    if STUDY_DIR:
        pytest.skip("study panel provided; criterion 10 runs above")
    ACCEPTANCE_LINES.append("[SKIP] criterion 10: study reproduction (study panel not provided; criteria 1-9 constitute acceptance)")
