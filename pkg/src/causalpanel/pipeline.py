"""End-to-end orchestration: ingest -> lags -> causality -> selection -> fit -> predict -> evaluate.

Each stage reads and writes plain files in the output directory so it can be
rerun on its own from the CLI. Every artifact carries the digest of the
resolved configuration (a ``# config_digest:`` line in CSVs, a
``config_digest`` key in JSON).
"""

from __future__ import annotations

import datetime as dt
import logging
from collections import Counter
from dataclasses import asdict, dataclass, fields, replace
from pathlib import Path
from typing import Any, Mapping, Sequence

import numpy as np
import yaml

from . import evaluate as ev
from .artifacts import digest, file_digest, fmt, read_csv, read_json, write_csv, write_json
from .dataset import (
    PanelDataset,
    SplitSpec,
    apply_transforms,
    ingest_csv,
    load_schema,
    split_by_date,
)
from .errors import ValidationError
from .granger import (
    ConditionalCausalityReport,
    bivariate_scan,
    conditional_scan,
    write_causality_csv,
)
from .regression import (
    KINDS,
    LinearModel,
    compute_path,
    default_grid,
    final_block_mask,
    fit,
    predict,
    select_lambda,
)
from .var import aic_table

log = logging.getLogger(__name__)


@dataclass
class PipelineConfig:
    input: str | None = None
    schema: str | None = None
    train_end: str | None = None
    test_start: str | None = None
    test_end: str | None = None
    pmax: int = 10
    cutoff: float = 0.003
    models: tuple[str, ...] = KINDS
    lambda_grid: tuple[float, ...] = tuple(float(x) for x in default_grid())
    out: str = "out"
    seed: int = 0
    holdout_days: int | None = None
    granger_window: str = "train"
    penalty_scale: str = "sum"
    entity_intercepts: bool = False
    workers: int = 1
    bivariate_lag: int | None = None
    conditional_lag: int | None = None

    def __post_init__(self):
        if isinstance(self.models, str):
            self.models = tuple(m.strip() for m in self.models.split(",") if m.strip())
        self.models = tuple(self.models)
        if isinstance(self.lambda_grid, str):
            self.lambda_grid = parse_grid(self.lambda_grid)
        self.lambda_grid = tuple(float(x) for x in self.lambda_grid)
        unknown = [m for m in self.models if m not in KINDS]
        if unknown or not self.models:
            raise ValidationError(f"--models must be a non-empty subset of {KINDS}, got {list(self.models)}")
        if not self.cutoff >= 0:
            raise ValidationError(f"cutoff must be >= 0, got {self.cutoff}")
        if int(self.pmax) < 1:
            raise ValidationError(f"pmax must be >= 1, got {self.pmax}")
        self.pmax = int(self.pmax)
        if self.granger_window not in ("train", "all"):
            raise ValidationError("granger_window must be 'train' or 'all'")
        for name in ("train_end", "test_start", "test_end"):
            value = getattr(self, name)
            if value is not None:
                setattr(self, name, str(value))

    @property
    def split(self) -> SplitSpec:
        if not (self.train_end and self.test_start and self.test_end):
            raise ValidationError("train_end, test_start and test_end are all required")
        return SplitSpec(self.train_end, self.test_start, self.test_end)

    def require(self, *names: str) -> None:
        missing = [n for n in names if getattr(self, n) in (None, "")]
        if missing:
            raise ValidationError(f"missing required setting(s): {', '.join('--' + m.replace('_', '-') for m in missing)}")
        for n in ("input", "schema"):
            if n in names and not Path(getattr(self, n)).is_file():
                raise ValidationError(f"{n} file not found: {getattr(self, n)}")

    def digest(self) -> str:
        doc = asdict(self)
        doc.pop("out")
        doc.pop("workers")
        for key in ("input", "schema"):
            path = doc.pop(key)
            doc[f"{key}_sha256"] = file_digest(path) if path and Path(path).is_file() else None
        return digest(doc)


def parse_grid(text: str) -> tuple[float, ...]:
    """``"0.1,0.01"`` or ``"logspace:LOW:HIGH:N"``."""
    text = text.strip()
    try:
        if text.startswith("logspace:"):
            _, low, high, n = text.split(":")
            return tuple(float(x) for x in default_grid(int(n), float(low), float(high)))
        return tuple(float(x) for x in text.split(",") if x.strip())
    except ValueError:
        raise ValidationError(f"cannot parse lambda grid {text!r}") from None


def load_config(path: str | Path | None, overrides: Mapping[str, Any]) -> PipelineConfig:
    """Defaults, then the YAML config file, then explicit overrides."""
    values: dict[str, Any] = {}
    if path:
        try:
            with open(path, encoding="utf-8") as fh:
                raw = yaml.safe_load(fh) or {}
        except FileNotFoundError:
            raise ValidationError(f"config file not found: {path}") from None
        if not isinstance(raw, dict):
            raise ValidationError(f"{path}: config must be a mapping")
        values.update({k.replace("-", "_"): v for k, v in raw.items()})
    values.update({k: v for k, v in overrides.items() if v is not None})
    known = {f.name for f in fields(PipelineConfig)}
    unknown = sorted(set(values) - known)
    if unknown:
        raise ValidationError(f"unknown configuration keys: {unknown}")
    return PipelineConfig(**values)


# -- stages ---------------------------------------------------------------------------


def load_data(cfg: PipelineConfig) -> PanelDataset:
    cfg.require("input", "schema")
    return apply_transforms(ingest_csv(cfg.input, load_schema(cfg.schema)))


def causal_window(cfg: PipelineConfig, data: PanelDataset) -> PanelDataset:
    if cfg.granger_window == "all" or not cfg.train_end:
        return data
    return split_by_date(data, cfg.split)[0]


def stage_ingest(cfg: PipelineConfig, out: Path, key: str) -> dict:
    data = load_data(cfg)
    doc = {
        "config_digest": key,
        "entities": len(data.entities),
        "dates": len(data.dates),
        "rows": data.n_rows,
        "first_date": data.dates[0].isoformat(),
        "last_date": data.dates[-1].isoformat(),
        "dependent": data.dependent,
        "variables": {v.name: v.to_dict() for v in data.variables},
    }
    write_json(out / "ingest.json", doc)
    return doc


def stage_select_lag(cfg: PipelineConfig, data: PanelDataset, out: Path, key: str) -> dict:
    window = causal_window(cfg, data)
    dep, preds = window.dependent, list(window.predictors)
    per_pred = {}
    for name in preds:
        table = aic_table(window, [name, dep], cfg.pmax, cfg.entity_intercepts)
        per_pred[name] = min(table, key=lambda p: (table[p], p))
    counts = Counter(per_pred.values())
    bivariate = cfg.bivariate_lag or (min(counts, key=lambda p: (-counts[p], p)) if counts else 1)
    cond_table = aic_table(window, [dep, *preds], cfg.pmax, cfg.entity_intercepts)
    conditional = cfg.conditional_lag or min(cond_table, key=lambda p: (cond_table[p], p))
    doc = {
        "config_digest": key,
        "bivariate_lag": int(bivariate),
        "conditional_lag": int(conditional),
        "bivariate_lag_by_predictor": per_pred,
        "conditional_aic": {str(p): fmt(v) for p, v in cond_table.items()},
        "criterion": "AIC = ln det(Sigma_ML) + 2 k (1 + k p) / T, common sample across lags; "
        "bivariate lag is the most frequent per-pair choice",
        "pooling": "entity intercepts" if cfg.entity_intercepts else "pooled, shared intercept",
        "window": cfg.granger_window if cfg.train_end else "all",
    }
    write_json(out / "lags.json", doc)
    return doc


def stage_granger(
    cfg: PipelineConfig, data: PanelDataset, lags: Mapping, out: Path, key: str
) -> tuple[ConditionalCausalityReport, dict[str, float]]:
    window = causal_window(cfg, data)
    dep = window.dependent
    bivariate = dict(bivariate_scan(window, dep, int(lags["bivariate_lag"]), entity_intercepts=cfg.entity_intercepts))
    report = conditional_scan(
        window, dep, int(lags["conditional_lag"]), cfg.cutoff,
        entity_intercepts=cfg.entity_intercepts, workers=cfg.workers,
    )
    write_causality_csv(out / "causality.csv", report, bivariate, key)
    return report, bivariate


def stage_select_features(cfg: PipelineConfig, report: ConditionalCausalityReport, out: Path, key: str) -> list[str]:
    report = report.with_cutoff(cfg.cutoff)
    selected = report.selected
    doc = {
        "config_digest": key,
        "cutoff": cfg.cutoff,
        "max_score": float(fmt(max(e.reported for e in report.entries))),
        "selected": selected,
        "note": "scores are raw log variance ratios; negative estimates are clamped to 0 before applying the cutoff",
    }
    write_json(out / "selected.json", doc)
    if not selected:
        log.warning("no predictor reaches the cutoff %s", fmt(cfg.cutoff))
    return selected


def stage_fit(
    cfg: PipelineConfig, data: PanelDataset, selected: Sequence[str], out: Path, key: str
) -> dict[str, LinearModel]:
    if not selected:
        raise ValidationError("no selected predictors (cutoff too high?); nothing to fit")
    train, _ = split_by_date(data, cfg.split)
    X = train.matrix(selected)
    y = train.column(train.dependent)
    exempt = [n for n in selected if train.spec(n).kind == "binary"]
    opts = dict(names=list(selected), exempt=exempt)
    grid = np.array(cfg.lambda_grid)
    row_dates = [d for _, d in train.row_index()]
    holdout_days = cfg.holdout_days or max(1, round(0.2 * len(train.dates)))
    models = {}
    for kind in cfg.models:
        notes = {"dependent": train.dependent, "response_transform": train.spec(train.dependent).transform}
        if kind == "ols":
            model = fit("ols", X, y, **opts)
        else:
            mask = final_block_mask(row_dates, holdout_days)
            lam = select_lambda(X, y, kind, grid, mask, penalty_scale=cfg.penalty_scale, **opts)
            model = fit(kind, X, y, lam, penalty_scale=cfg.penalty_scale, **opts)
            notes["lambda_selection"] = f"min holdout RMSE over final {holdout_days} training dates; ties -> larger"
            path = compute_path(X, y, kind, grid, penalty_scale=cfg.penalty_scale, **opts)
            path.write_csv(out / f"path_{kind}.csv", key)
        model = replace(model, notes=notes)
        model.save(out / f"model_{kind}.json", {"config_digest": key})
        models[kind] = model
        log.info("fitted %s (lambda=%s, train RMSE %.4f)", kind, fmt(model.lam), model.train_rmse)
    return models


PREDICTION_HEADER = ("entity", "date", "partition", "observed", "predicted")


def stage_predict(
    cfg: PipelineConfig, data: PanelDataset, model: LinearModel, out: Path, key: str
) -> Path:
    parts = []
    if cfg.train_end:
        train, test = split_by_date(data, cfg.split)
        parts = [("train", train), ("test", test)]
    else:
        parts = [("all", data)]
    rows = []
    for label, part in parts:
        pred = predict(model, {n: part.column(n) for n in model.names})
        obs = part.column(part.dependent)
        for (e, d), o, p in zip(part.row_index(), obs, pred):
            rows.append([e, d.isoformat(), label, repr(float(o)), repr(float(p))])
    path = out / f"predictions_{model.kind}.csv"
    write_csv(path, PREDICTION_HEADER, rows, key)
    return path


def stage_evaluate(prediction_files: Sequence[Path], out: Path, key: str, dependent_transform: str | None = None):
    reports = {}
    for path in prediction_files:
        rows = read_csv(path)
        kind = Path(path).stem.removeprefix("predictions_")
        if kind not in KINDS:
            raise ValidationError(f"{path}: cannot infer model kind from file name")
        train = [r for r in rows if r["partition"] == "train"]
        test = [r for r in rows if r["partition"] == "test"]
        if not train or not test:
            raise ValidationError(f"{path}: evaluation needs both train and test rows")
        inverse = np.exp if dependent_transform == "log" else None
        reports[kind] = ev.evaluate_model(
            kind,
            [float(r["observed"]) for r in train],
            [float(r["predicted"]) for r in train],
            [float(r["observed"]) for r in test],
            [float(r["predicted"]) for r in test],
            [(r["entity"], dt.date.fromisoformat(r["date"])) for r in test],
            inverse=inverse,
        )
    scale = "ln" if dependent_transform == "log" else "identity"
    ev.write_rmse_by_date(out / "rmse_by_date.csv", reports, key)
    ev.write_rmse_by_entity(out / "rmse_by_entity.csv", reports, key)
    ev.write_summary(out / "summary.json", reports, scale, key)
    return reports


def run_pipeline(cfg: PipelineConfig) -> dict:
    """Execute every stage, writing all artifacts into ``cfg.out``.

    On failure an ``INCOMPLETE.json`` marker names the failing stage and the
    exception is re-raised for the caller to map onto an exit code.
    """
    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    marker = out / "INCOMPLETE.json"
    if marker.exists():
        marker.unlink()
    stage = "config"
    try:
        cfg.require("input", "schema", "train_end", "test_start", "test_end")
        key = cfg.digest()
        stage = "ingest"
        stage_ingest(cfg, out, key)
        data = load_data(cfg)
        split_by_date(data, cfg.split)
        stage = "select-lag"
        lags = stage_select_lag(cfg, data, out, key)
        stage = "granger"
        report, _ = stage_granger(cfg, data, lags, out, key)
        stage = "select-features"
        selected = stage_select_features(cfg, report, out, key)
        stage = "fit"
        models = stage_fit(cfg, data, selected, out, key)
        stage = "predict"
        files = [stage_predict(cfg, data, m, out, key) for m in models.values()]
        stage = "evaluate"
        reports = stage_evaluate(files, out, key, data.spec(data.dependent).transform)
    except Exception as exc:
        write_json(marker, {"stage": stage, "error": f"{type(exc).__name__}: {exc}"})
        exc.stage = stage  # type: ignore[attr-defined]
        raise
    write_json(out / "config.json", {"config_digest": key, **{k: v for k, v in asdict(cfg).items() if k != "out"}})
    return {"lags": lags, "selected": selected, "models": models, "reports": reports}


def load_selected(path: str | Path) -> list[str]:
    doc = read_json(path)
    if isinstance(doc, dict):
        doc = doc.get("selected", [])
    return [str(n) for n in doc]


def load_lags(path: str | Path) -> dict:
    doc = read_json(path)
    for k in ("bivariate_lag", "conditional_lag"):
        if k not in doc:
            raise ValidationError(f"{path}: missing {k}")
    return doc

