"""Command-line front end.

Exit codes: 0 success, 2 validation error, 3 numerical failure.
"""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

import yaml

from . import pipeline as pl
from .dataset import load_schema, write_schema
from .errors import NumericalError, ValidationError
from .granger import read_causality_csv
from .regression import LinearModel
from .synth import generate_var_series, make_chain_spec, spec_from_config

log = logging.getLogger("causalpanel")

EXIT_OK, EXIT_VALIDATION, EXIT_NUMERICAL = 0, 2, 3


def _common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="YAML config file; flags override its values")
    p.add_argument("--input", help="panel CSV (entity,date,<vars...>)")
    p.add_argument("--schema", help="YAML schema: variable -> {role, transform, kind}")
    p.add_argument("--train-end", dest="train_end")
    p.add_argument("--test-start", dest="test_start")
    p.add_argument("--test-end", dest="test_end")
    p.add_argument("--pmax", type=int, help="largest lag tried by AIC (default 10)")
    p.add_argument("--cutoff", type=float, help="conditional Granger selection cutoff (default 0.003)")
    p.add_argument("--models", help="comma list from ols,ridge,lasso")
    p.add_argument("--lambda-grid", dest="lambda_grid", help="comma list or logspace:LOW:HIGH:N")
    p.add_argument("--out", help="output directory")
    p.add_argument("--seed", type=int)
    p.add_argument("-v", "--verbose", action="store_true")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="causalpanel", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    for name, help_ in [
        ("ingest", "validate a panel CSV against its schema"),
        ("select-lag", "choose bivariate and conditional VAR lags by AIC"),
        ("granger", "bivariate and conditional Granger scans"),
        ("select-features", "apply the cutoff to a causality CSV"),
        ("fit", "fit OLS/ridge/lasso on the selected predictors"),
        ("predict", "predict train/test rows with a saved model"),
        ("evaluate", "RMSE reports from prediction files"),
        ("synth", "generate a synthetic VAR panel"),
        ("run", "full pipeline"),
    ]:
        p = sub.add_parser(name, help=help_)
        _common(p)
        if name == "granger":
            p.add_argument("--lags", help="lags.json from select-lag (otherwise lags are selected here)")
        if name == "select-features":
            p.add_argument("--causality", required=True, help="causality.csv from the granger stage")
        if name == "fit":
            p.add_argument("--features", required=True, help="selected.json from select-features")
        if name == "predict":
            p.add_argument("--model", required=True, nargs="+", help="model_<kind>.json file(s)")
        if name == "evaluate":
            p.add_argument("--predictions", required=True, nargs="+", help="predictions_<kind>.csv files")
            p.add_argument("--dependent-transform", choices=["none", "log"], default=None,
                           help="transform of the response (adds back-transformed RMSE for log)")
        if name == "synth":
            p.add_argument("--synth-config", help="YAML process spec (chain or coefficients)")
            p.add_argument("--length", type=int, default=None)
            p.add_argument("--entities", type=int, default=None)
            p.add_argument("--strength", type=float, default=None, help="chain strength (default 0.5)")
    return parser


_CONFIG_KEYS = ("input", "schema", "train_end", "test_start", "test_end", "pmax", "cutoff",
                "models", "lambda_grid", "out", "seed")


def _config(args) -> pl.PipelineConfig:
    return pl.load_config(args.config, {k: getattr(args, k) for k in _CONFIG_KEYS})


def _synth(args, cfg: pl.PipelineConfig, out: Path, key: str) -> None:
    if args.synth_config:
        with open(args.synth_config, encoding="utf-8") as fh:
            raw = yaml.safe_load(fh) or {}
        if args.seed is not None:
            raw["seed"] = args.seed
        for k in ("length", "entities"):
            if getattr(args, k) is not None:
                raw[k] = getattr(args, k)
        spec = spec_from_config(raw)
    else:
        spec = make_chain_spec(
            strength=0.5 if args.strength is None else args.strength,
            seed=cfg.seed,
            length=args.length or 200,
            entities=args.entities or 4,
        )
    data = generate_var_series(spec)
    data.write_csv(out / "panel.csv")
    write_schema(data.variables, out / "schema.yaml")
    log.info("wrote %d rows (%d entities x %d dates) to %s", data.n_rows, len(data.entities), len(data.dates), out)


def dispatch(args) -> int:
    cfg = _config(args)
    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    cmd = args.command
    if cmd == "run":
        result = pl.run_pipeline(cfg)
        log.info("selected %d predictors: %s", len(result["selected"]), result["selected"])
        return EXIT_OK
    key = cfg.digest()
    if cmd == "synth":
        _synth(args, cfg, out, key)
    elif cmd == "ingest":
        pl.stage_ingest(cfg, out, key)
    elif cmd == "select-lag":
        pl.stage_select_lag(cfg, pl.load_data(cfg), out, key)
    elif cmd == "granger":
        data = pl.load_data(cfg)
        lags = pl.load_lags(args.lags) if args.lags else pl.stage_select_lag(cfg, data, out, key)
        pl.stage_granger(cfg, data, lags, out, key)
    elif cmd == "select-features":
        report, _ = read_causality_csv(args.causality, cutoff=cfg.cutoff)
        pl.stage_select_features(cfg, report, out, key)
    elif cmd == "fit":
        cfg.require("train_end", "test_start", "test_end")
        pl.stage_fit(cfg, pl.load_data(cfg), pl.load_selected(args.features), out, key)
    elif cmd == "predict":
        data = pl.load_data(cfg)
        for path in args.model:
            pl.stage_predict(cfg, data, LinearModel.load(path), out, key)
    elif cmd == "evaluate":
        transform = args.dependent_transform
        if transform is None and cfg.schema:
            transform = next(v.transform for v in load_schema(cfg.schema) if v.role == "dependent")
        pl.stage_evaluate([Path(p) for p in args.predictions], out, key, transform)
    return EXIT_OK


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        stream=sys.stderr,
        level=logging.DEBUG if args.verbose else logging.INFO,
        format="%(levelname)s %(name)s: %(message)s",
    )
    try:
        return dispatch(args)
    except ValidationError as exc:
        stage = getattr(exc, "stage", args.command)
        log.error("validation error in stage %s: %s", stage, exc)
        return EXIT_VALIDATION
    except NumericalError as exc:
        stage = getattr(exc, "stage", args.command)
        log.error("numerical failure in stage %s: %s", stage, exc)
        return EXIT_NUMERICAL
    except (OSError, yaml.YAMLError) as exc:
        log.error("%s: %s", args.command, exc)
        return EXIT_VALIDATION


if __name__ == "__main__":
    sys.exit(main())
