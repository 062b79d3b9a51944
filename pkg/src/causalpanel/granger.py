"""Time-domain Granger causality from residual variances of pooled VARs.

All scores are natural-log ratios of residual variances, reduced model over
full model, fitted on identical rows (same lag order). No test statistics or
p-values are produced; predictors are ranked by magnitude and kept when the
score reaches a cutoff.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np

from .artifacts import read_csv, write_csv
from .dataset import PanelDataset
from .errors import ValidationError, ZeroVarianceError
from .var import build_lag_design, fit_var

CAUSALITY_HEADER = (
    "variable",
    "score_bivariate",
    "score_conditional",
    "rank",
    "selected",
    "score_bivariate_raw",
    "score_conditional_raw",
)


def _residual_cov(data: PanelDataset, names: Sequence[str], p: int, entity_intercepts: bool) -> np.ndarray:
    design = build_lag_design(data, names, p, entity_intercepts)
    flat = [n for n, col in zip(names, design.targets.T) if np.ptp(col) == 0]
    if flat:
        raise ZeroVarianceError(f"constant series {flat}: Granger scores are undefined")
    model = fit_var(design)
    cov = model.residual_covariance
    diag = np.diag(cov)
    if np.any(diag <= 0):
        zero = [n for n, v in zip(names, diag) if v <= 0]
        raise ZeroVarianceError(f"VAR({p}) on {list(names)}: zero residual variance for {zero}")
    return cov


def _log_ratio(num: float, den: float, what: str) -> float:
    if not (num > 0 and den > 0):
        raise ZeroVarianceError(f"{what}: log of a non-positive variance ratio ({num!r}/{den!r})")
    return math.log(num / den)


@dataclass(frozen=True)
class BivariateCausality:
    x: str
    y: str
    g_x_to_y: float
    g_y_to_x: float
    g_instantaneous: float
    g_total: float
    lag: int

    @property
    def additivity_gap(self) -> float:
        return self.g_total - (self.g_x_to_y + self.g_y_to_x + self.g_instantaneous)


def bivariate_granger(
    data: PanelDataset, x: str, y: str, p: int, entity_intercepts: bool = False
) -> BivariateCausality:
    """Directional, instantaneous and total interdependence between ``x`` and ``y``.

    Uses univariate AR(p) baselines for each series and a joint VAR(p),
    all on the same rows.
    """
    if x == y:
        raise ValidationError("bivariate Granger causality needs two distinct variables")
    s_x = _residual_cov(data, [x], p, entity_intercepts)[0, 0]
    s_y = _residual_cov(data, [y], p, entity_intercepts)[0, 0]
    joint = _residual_cov(data, [x, y], p, entity_intercepts)
    s_xx, s_yy = joint[0, 0], joint[1, 1]
    det = s_xx * s_yy - joint[0, 1] * joint[1, 0]
    return BivariateCausality(
        x=x,
        y=y,
        g_x_to_y=_log_ratio(s_y, s_yy, f"{x}->{y}"),
        g_y_to_x=_log_ratio(s_x, s_xx, f"{y}->{x}"),
        g_instantaneous=_log_ratio(s_xx * s_yy, det, f"{x}.{y}"),
        g_total=_log_ratio(s_x * s_y, det, f"{x},{y}"),
        lag=p,
    )


def bivariate_scan(
    data: PanelDataset,
    dep: str,
    p: int,
    predictors: Sequence[str] | None = None,
    entity_intercepts: bool = False,
) -> list[tuple[str, float]]:
    """``G_{pred -> dep}`` for every predictor, sorted by descending score."""
    predictors = [n for n in (predictors or data.predictors) if n != dep]
    scores = [(name, bivariate_granger(data, name, dep, p, entity_intercepts).g_x_to_y) for name in predictors]
    return sorted(scores, key=lambda t: (-t[1], t[0]))


def conditional_granger(
    data: PanelDataset,
    dep: str,
    pred: str,
    conditioning: Sequence[str],
    p: int,
    entity_intercepts: bool = False,
) -> float:
    """``ln(var_reduced / var_full)`` for the dependent equation, conditioned on ``conditioning``."""
    conditioning = list(conditioning)
    if pred == dep:
        raise ValidationError("predictor and dependent variable must differ")
    if pred in conditioning or dep in conditioning:
        raise ValidationError("conditioning set must exclude the predictor and the dependent variable")
    reduced = _residual_cov(data, [dep, *conditioning], p, entity_intercepts)[0, 0]
    full = _residual_cov(data, [dep, pred, *conditioning], p, entity_intercepts)[0, 0]
    return _log_ratio(reduced, full, f"{pred}->{dep}|{len(conditioning)} vars")


@dataclass(frozen=True)
class CausalityEntry:
    name: str
    score: float  # raw log-ratio, may be slightly negative in finite samples
    rank: int

    @property
    def reported(self) -> float:
        return max(self.score, 0.0)


@dataclass(frozen=True)
class ConditionalCausalityReport:
    dependent: str
    entries: tuple[CausalityEntry, ...]
    lag: int
    cutoff: float

    @property
    def selected(self) -> list[str]:
        return [e.name for e in self.entries if e.reported >= self.cutoff]

    @property
    def scores(self) -> dict[str, float]:
        return {e.name: e.score for e in self.entries}

    def with_cutoff(self, cutoff: float) -> "ConditionalCausalityReport":
        return replace(self, cutoff=float(cutoff))


def rank_scores(scores: Mapping[str, float]) -> tuple[CausalityEntry, ...]:
    """Rank 1 is the largest score; ties are broken by name."""
    order = sorted(scores, key=lambda n: (-max(scores[n], 0.0), -scores[n], n))
    return tuple(CausalityEntry(n, float(scores[n]), i + 1) for i, n in enumerate(order))


def conditional_scan(
    data: PanelDataset,
    dep: str,
    p: int,
    cutoff: float,
    predictors: Sequence[str] | None = None,
    entity_intercepts: bool = False,
    workers: int = 1,
) -> ConditionalCausalityReport:
    """Score each predictor conditioned on all remaining predictors.

    One full VAR plus one reduced VAR per predictor are fitted.
    """
    predictors = [n for n in (predictors or data.predictors) if n != dep]
    if len(predictors) < 2:
        raise ValidationError("a conditional scan needs at least two predictors")
    if cutoff < 0:
        raise ValidationError(f"cutoff must be non-negative, got {cutoff}")
    full = _residual_cov(data, [dep, *predictors], p, entity_intercepts)[0, 0]

    def reduced_variance(name: str) -> float:
        rest = [n for n in predictors if n != name]
        return _residual_cov(data, [dep, *rest], p, entity_intercepts)[0, 0]

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            reduced = list(pool.map(reduced_variance, predictors))
    else:
        reduced = [reduced_variance(n) for n in predictors]
    scores = {n: _log_ratio(r, full, f"{n}->{dep}|rest") for n, r in zip(predictors, reduced)}
    return ConditionalCausalityReport(dep, rank_scores(scores), p, float(cutoff))


def write_causality_csv(
    path: str | Path,
    report: ConditionalCausalityReport,
    bivariate: Mapping[str, float] | None = None,
    config_digest: str | None = None,
) -> None:
    """Ranked scores; clamped columns first, raw values kept for diagnosis."""
    bivariate = bivariate or {}
    selected = set(report.selected)
    rows = []
    for e in report.entries:
        b = bivariate.get(e.name, float("nan"))
        rows.append(
            [e.name, max(b, 0.0) if b == b else b, e.reported, e.rank, str(e.name in selected).lower(), b, e.score]
        )
    write_csv(path, CAUSALITY_HEADER, rows, config_digest)


def read_causality_csv(path: str | Path, dependent: str = "", lag: int = 0, cutoff: float = 0.0):
    """Rebuild a report (and the bivariate scores) from a causality CSV.

    Raw conditional scores are used when present so re-selection matches the
    original run up to the six-digit rounding of the file.
    """
    rows = read_csv(path)
    if not rows:
        raise ValidationError(f"{path}: no causality rows")
    missing = set(CAUSALITY_HEADER[:5]) - set(rows[0])
    if missing:
        raise ValidationError(f"{path}: missing columns {sorted(missing)}")
    scores = {r["variable"]: float(r.get("score_conditional_raw") or r["score_conditional"]) for r in rows}
    bivariate = {r["variable"]: float(r.get("score_bivariate_raw") or r["score_bivariate"]) for r in rows}
    return ConditionalCausalityReport(dependent, rank_scores(scores), lag, float(cutoff)), bivariate
