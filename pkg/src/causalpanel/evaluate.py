"""Prediction error summaries: overall, per date, per entity."""

from __future__ import annotations

import datetime as dt
from collections import defaultdict
from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np

from .artifacts import write_csv, write_json
from .errors import ValidationError

MODEL_LABELS = {"ols": "linear", "lasso": "lasso", "ridge": "ridge"}
LABEL_ORDER = ("ols", "lasso", "ridge")


def _residuals(observed, predicted) -> np.ndarray:
    obs = np.asarray(observed, dtype=float).reshape(-1)
    pred = np.asarray(predicted, dtype=float).reshape(-1)
    if obs.shape != pred.shape:
        raise ValidationError(f"observed has {obs.size} values, predicted has {pred.size}")
    if obs.size == 0:
        raise ValidationError("no observations to evaluate")
    return obs - pred


def rmse_overall(observed, predicted) -> float:
    r = _residuals(observed, predicted)
    return float(np.sqrt(np.mean(r**2)))


def _grouped(observed, predicted, row_index, key: int) -> dict:
    r = _residuals(observed, predicted)
    row_index = list(row_index)
    if len(row_index) != r.size:
        raise ValidationError(f"row index has {len(row_index)} entries for {r.size} residuals")
    if len(set(row_index)) != len(row_index):
        raise ValidationError("duplicate (entity, date) rows")
    groups: dict = defaultdict(list)
    for (entity, date), res in zip(row_index, r):
        groups[(entity, date)[key]].append(res)
    return groups


def rmse_by_date(observed, predicted, row_index: Sequence[tuple[str, dt.date]]) -> list[tuple[dt.date, float]]:
    """Per-date RMSE across entities; every date must carry the same entity count."""
    groups = _grouped(observed, predicted, row_index, key=1)
    sizes = {len(v) for v in groups.values()}
    if len(sizes) != 1:
        raise ValidationError(f"ragged panel: dates carry differing entity counts {sorted(sizes)}")
    return [(d, float(np.sqrt(np.mean(np.square(groups[d]))))) for d in sorted(groups)]


def rmse_mean_over_dates(per_date) -> float:
    vals = [v[1] if isinstance(v, tuple) else v for v in per_date]
    if not vals:
        raise ValidationError("no per-date errors to average")
    return float(np.mean(vals))


def per_entity_errors(
    observed, predicted, row_index: Sequence[tuple[str, dt.date]], entities: Sequence[str] | None = None
) -> list[tuple[str, float]]:
    groups = _grouped(observed, predicted, row_index, key=0)
    if entities is not None:
        empty = [e for e in entities if e not in groups]
        if empty:
            raise ValidationError(f"entities with no evaluation rows: {empty}")
    return [(e, float(np.sqrt(np.mean(np.square(groups[e]))))) for e in sorted(groups)]


@dataclass
class EvaluationReport:
    kind: str
    train_rmse: float
    test_rmse: float
    per_date: list[tuple[dt.date, float]]
    per_entity: list[tuple[str, float]]
    mean_over_dates: float
    original_scale: dict = field(default_factory=dict)

    @property
    def label(self) -> str:
        return MODEL_LABELS.get(self.kind, self.kind)


def evaluate_model(
    kind: str,
    train_observed,
    train_predicted,
    test_observed,
    test_predicted,
    test_index: Sequence[tuple[str, dt.date]],
    inverse=None,
) -> EvaluationReport:
    """Errors in the response's modeling scale.

    ``inverse`` (e.g. ``np.exp`` for a log response) adds back-transformed
    overall RMSEs under ``original_scale``.
    """
    per_date = rmse_by_date(test_observed, test_predicted, test_index)
    report = EvaluationReport(
        kind=kind,
        train_rmse=rmse_overall(train_observed, train_predicted),
        test_rmse=rmse_overall(test_observed, test_predicted),
        per_date=per_date,
        per_entity=per_entity_errors(test_observed, test_predicted, test_index),
        mean_over_dates=rmse_mean_over_dates(per_date),
    )
    if inverse is not None:
        report.original_scale = {
            "train_rmse": rmse_overall(inverse(np.asarray(train_observed)), inverse(np.asarray(train_predicted))),
            "test_rmse": rmse_overall(inverse(np.asarray(test_observed)), inverse(np.asarray(test_predicted))),
        }
    return report


def _sig6(x: float) -> float:
    return float(f"{x:.6g}")


def _ordered(reports: Mapping[str, EvaluationReport]) -> list[EvaluationReport]:
    return [reports[k] for k in LABEL_ORDER if k in reports]


def write_rmse_by_date(path: str | Path, reports: Mapping[str, EvaluationReport], config_digest=None) -> None:
    ordered = _ordered(reports)
    dates = [d for d, _ in ordered[0].per_date]
    columns = [dict(r.per_date) for r in ordered]
    rows = [[d.isoformat(), *(float(c[d]) for c in columns)] for d in dates]
    write_csv(path, ["date", *(f"rmse_{r.label}" for r in ordered)], rows, config_digest)


def write_rmse_by_entity(path: str | Path, reports: Mapping[str, EvaluationReport], config_digest=None) -> None:
    rows = []
    ordered = _ordered(reports)
    entities = sorted({e for r in ordered for e, _ in r.per_entity})
    for e in entities:
        for r in ordered:
            rows.append([e, r.label, float(dict(r.per_entity)[e])])
    write_csv(path, ["entity", "model", "rmse"], rows, config_digest)


def summary_dict(reports: Mapping[str, EvaluationReport], scale: str = "ln") -> dict:
    models = []
    for r in _ordered(reports):
        entry = {
            "model": r.label,
            "rmse_train": _sig6(r.train_rmse),
            "rmse_test": _sig6(r.test_rmse),
            "rmse_mean_over_dates": _sig6(r.mean_over_dates),
        }
        if r.original_scale:
            entry["original_scale"] = {k: _sig6(v) for k, v in r.original_scale.items()}
        models.append(entry)
    return {
        "response_scale": scale,
        "note": "RMSE is computed in the modeling scale of the dependent variable "
        "(natural log when the schema flags it)",
        "models": models,
    }


def write_summary(path: str | Path, reports: Mapping[str, EvaluationReport], scale="ln", config_digest=None) -> None:
    doc = summary_dict(reports, scale)
    if config_digest:
        doc = {"config_digest": config_digest, **doc}
    write_json(path, doc)
