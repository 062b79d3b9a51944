"""OLS, ridge and lasso linear predictors with regularization paths.

Fits happen on standardized predictors (binary indicators exempt) with an
unpenalized intercept, which is equivalent to solving the centered problem
and recovering the intercept from the means. Coefficients are reported on
the original predictor scale.

Penalty conventions (``penalty_scale="sum"``, the default)::

    ridge:  ||y - b0 - Z a||^2 + lam * ||a||^2
    lasso:  1/2 ||y - b0 - Z a||^2 + lam * ||a||_1

``penalty_scale="mean"`` divides the loss by ``n`` instead, i.e. multiplies
``lam`` by the number of training rows.
"""

from __future__ import annotations

import json
import logging
import math
import warnings
from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np

from .artifacts import write_csv
from .dataset import StandardizationParams, fit_standardization
from .errors import ConvergenceError, ValidationError

log = logging.getLogger(__name__)

KINDS = ("ols", "ridge", "lasso")
LASSO_TOL = 1e-8
LASSO_MAX_SWEEPS = 100_000

CONVENTIONS = {
    "ridge": "squared Tikhonov form: ||y - Xa||_2^2 + lambda ||a||_2^2 on standardized predictors",
    "lasso": "penalized form: 1/2 ||y - Xa||_2^2 + lambda ||a||_1 on standardized predictors",
    "ols": "least squares, minimum-norm solution if rank deficient",
    "intercept": "unpenalized",
}


class MinimumNormWarning(RuntimeWarning):
    pass


def default_grid(n: int = 50, low: float = 1e-4, high: float = 1.0) -> np.ndarray:
    """Descending log-spaced grid."""
    return np.logspace(math.log10(high), math.log10(low), n)


def soft_threshold(x, lam):
    return np.sign(x) * np.maximum(np.abs(x) - lam, 0.0)


@dataclass(frozen=True, eq=False)
class LinearModel:
    kind: str
    lam: float
    intercept: float
    coefficients: dict[str, float]
    standardization: StandardizationParams
    intercept_std: float
    coefficients_std: np.ndarray
    penalty_scale: str = "sum"
    train_rmse: float = float("nan")
    iterations: int = 0
    notes: dict = field(default_factory=dict)

    @property
    def names(self) -> tuple[str, ...]:
        return tuple(self.coefficients)

    def to_dict(self) -> dict:
        return {
            "kind": self.kind,
            "lambda": self.lam,
            "penalty_scale": self.penalty_scale,
            "intercept": self.intercept,
            "coefficients": dict(self.coefficients),
            "intercept_standardized": self.intercept_std,
            "coefficients_standardized": [float(c) for c in self.coefficients_std],
            "standardization": self.standardization.to_dict(),
            "diagnostics": {"train_rmse": self.train_rmse, "iterations": self.iterations},
            "conventions": {"penalty": CONVENTIONS[self.kind], "intercept": CONVENTIONS["intercept"]},
            "notes": dict(self.notes),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "LinearModel":
        diag = d.get("diagnostics", {})
        return cls(
            kind=d["kind"],
            lam=float(d["lambda"]),
            intercept=float(d["intercept"]),
            coefficients={k: float(v) for k, v in d["coefficients"].items()},
            standardization=StandardizationParams.from_dict(d["standardization"]),
            intercept_std=float(d["intercept_standardized"]),
            coefficients_std=np.array(d["coefficients_standardized"], dtype=float),
            penalty_scale=d.get("penalty_scale", "sum"),
            train_rmse=float(diag.get("train_rmse", float("nan"))),
            iterations=int(diag.get("iterations", 0)),
            notes=dict(d.get("notes", {})),
        )

    def save(self, path: str | Path, extra: Mapping | None = None) -> None:
        doc = self.to_dict()
        if extra:
            doc.update(extra)
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(doc, fh, indent=2)
            fh.write("\n")

    @classmethod
    def load(cls, path: str | Path) -> "LinearModel":
        with open(path, encoding="utf-8") as fh:
            return cls.from_dict(json.load(fh))


# -- problem preparation ------------------------------------------------------


@dataclass(frozen=True, eq=False)
class _Problem:
    names: tuple[str, ...]
    params: StandardizationParams
    Zc: np.ndarray  # centered standardized predictors
    yc: np.ndarray
    zbar: np.ndarray
    ybar: float

    @property
    def n(self) -> int:
        return self.Zc.shape[0]


def _prepare(X, y, names, standardize, exempt) -> _Problem:
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float).reshape(-1)
    if X.ndim == 1:
        X = X[:, None]
    if X.ndim != 2 or X.shape[0] != y.shape[0]:
        raise ValidationError(f"design has shape {X.shape} but response has {y.shape[0]} rows")
    if X.shape[0] == 0:
        raise ValidationError("empty design")
    if not (np.all(np.isfinite(X)) and np.all(np.isfinite(y))):
        raise ValidationError("non-finite values in design or response")
    names = tuple(names) if names is not None else tuple(f"x{j}" for j in range(X.shape[1]))
    if len(names) != X.shape[1]:
        raise ValidationError(f"{len(names)} names for {X.shape[1]} columns")
    if len(set(names)) != len(names):
        raise ValidationError("duplicate predictor names")
    if standardize:
        params = fit_standardization(X, names, exempt=[n for n in names if n in set(exempt)])
    else:
        params = StandardizationParams.identity(names)
    Z = params.transform(X)
    zbar = Z.mean(axis=0)
    ybar = float(y.mean())
    return _Problem(names, params, Z - zbar, y - ybar, zbar, ybar)


def _effective_lambda(lam: float, n: int, penalty_scale: str) -> float:
    if penalty_scale == "sum":
        return lam
    if penalty_scale == "mean":
        return lam * n
    raise ValidationError(f"penalty_scale must be 'sum' or 'mean', got {penalty_scale!r}")


def _finish(kind, lam, prob: _Problem, alpha, penalty_scale, iterations=0, notes=None) -> LinearModel:
    params = prob.params
    alpha = np.asarray(alpha, dtype=float)
    intercept_std = prob.ybar - float(prob.zbar @ alpha)
    coef = alpha / params.scales
    intercept = intercept_std - float(np.sum(alpha * params.means / params.scales))
    resid = prob.yc - prob.Zc @ alpha
    return LinearModel(
        kind=kind,
        lam=float(lam),
        intercept=float(intercept),
        coefficients={n: float(c) for n, c in zip(prob.names, coef)},
        standardization=params,
        intercept_std=float(intercept_std),
        coefficients_std=alpha.copy(),
        penalty_scale=penalty_scale,
        train_rmse=float(np.sqrt(np.mean(resid**2))),
        iterations=iterations,
        notes=notes or {},
    )


# -- solvers --------------------------------------------------------------------


def _ridge_solve(prob: _Problem, lam_eff: float) -> np.ndarray:
    """Stacked least squares ``[Zc; sqrt(lam) I] a = [yc; 0]``."""
    n_feat = prob.Zc.shape[1]
    if lam_eff > 0:
        A = np.vstack([prob.Zc, math.sqrt(lam_eff) * np.eye(n_feat)])
        b = np.concatenate([prob.yc, np.zeros(n_feat)])
    else:
        A, b = prob.Zc, prob.yc
    alpha, _, rank, _ = np.linalg.lstsq(A, b, rcond=None)
    if rank < n_feat:
        warnings.warn(
            f"design has rank {rank} < {n_feat} predictors; returning the minimum-norm solution",
            MinimumNormWarning,
            stacklevel=3,
        )
    return alpha


def _lasso_polish(G, c, alpha, lam, tol=1e-9):
    """Solve the KKT system on the current active set exactly.

    Returns the refined coefficients, or ``None`` when the sign pattern or
    the inactive-set bounds disagree with the exact solution.
    """
    active = np.flatnonzero(alpha)
    out = np.zeros_like(alpha)
    if active.size:
        s = np.sign(alpha[active])
        try:
            sol = np.linalg.solve(G[np.ix_(active, active)], c[active] - lam * s)
        except np.linalg.LinAlgError:
            return None
        if np.any(np.sign(sol) != s):
            return None
        out[active] = sol
    grad = c - G @ out
    inactive = np.setdiff1d(np.arange(alpha.size), active)
    if inactive.size and np.any(np.abs(grad[inactive]) > lam + tol * max(1.0, lam)):
        return None
    return out


def _cd_sweep(G, diag, grad, alpha, lam) -> float:
    """One cyclic pass in place; returns the largest coefficient change."""
    max_change = 0.0
    for j in range(alpha.size):
        if diag[j] <= 0:
            continue
        old = alpha[j]
        rho = grad[j] + diag[j] * old
        new = math.copysign(max(abs(rho) - lam, 0.0), rho) / diag[j]
        delta = new - old
        if delta != 0.0:
            alpha[j] = new
            grad -= G[:, j] * delta
            max_change = max(max_change, abs(delta))
    return max_change


def _lasso_cd(
    prob: _Problem, lam_eff: float, start=None, tol=LASSO_TOL, max_sweeps=LASSO_MAX_SWEEPS, polish_every=25
):
    """Cyclic coordinate descent in covariance form; returns ``(alpha, sweeps)``.

    Every ``polish_every`` sweeps the active set is solved exactly; the exact
    point is accepted once a further sweep from it moves no coefficient by
    ``tol`` or more. This rescues badly conditioned designs where plain
    cyclic descent crawls.
    """
    G = prob.Zc.T @ prob.Zc
    c = prob.Zc.T @ prob.yc
    n_feat = c.size
    alpha = np.zeros(n_feat) if start is None else np.array(start, dtype=float)
    diag = np.diag(G).copy()
    grad = c - G @ alpha  # x_j^T residual
    max_change = float("inf")
    for sweep in range(1, max_sweeps + 1):
        max_change = _cd_sweep(G, diag, grad, alpha, lam_eff)
        if max_change < tol or sweep % polish_every == 0:
            polished = _lasso_polish(G, c, alpha, lam_eff)
            if polished is not None:
                check = polished.copy()
                if _cd_sweep(G, diag, c - G @ check, check, lam_eff) < tol:
                    return polished, sweep
            if max_change < tol:
                return alpha, sweep
    raise ConvergenceError(
        f"lasso coordinate descent did not converge in {max_sweeps} sweeps "
        f"(last max coefficient change {max_change:.3g}, tolerance {tol:.3g})",
        iterations=max_sweeps,
        max_change=max_change,
    )


# -- public fitting API -------------------------------------------------------


def fit_ols(X, y, names=None, standardize=True, exempt=()) -> LinearModel:
    """Least squares with intercept; ``X`` holds predictors only (no constant column)."""
    prob = _prepare(X, y, names, standardize, exempt)
    return _finish("ols", 0.0, prob, _ridge_solve(prob, 0.0), "sum")


def fit_ridge(X, y, lam: float, names=None, standardize=True, exempt=(), penalty_scale="sum") -> LinearModel:
    if not lam >= 0:
        raise ValidationError(f"ridge lambda must be >= 0, got {lam}")
    prob = _prepare(X, y, names, standardize, exempt)
    alpha = _ridge_solve(prob, _effective_lambda(lam, prob.n, penalty_scale))
    return _finish("ridge", lam, prob, alpha, penalty_scale)


def fit_lasso(
    X, y, lam: float, names=None, standardize=True, exempt=(), penalty_scale="sum",
    tol=LASSO_TOL, max_sweeps=LASSO_MAX_SWEEPS, start=None,
) -> LinearModel:
    if not lam >= 0:
        raise ValidationError(f"lasso lambda must be >= 0, got {lam}")
    prob = _prepare(X, y, names, standardize, exempt)
    alpha, sweeps = _lasso_cd(prob, _effective_lambda(lam, prob.n, penalty_scale), start, tol, max_sweeps)
    return _finish("lasso", lam, prob, alpha, penalty_scale, iterations=sweeps)


def fit(kind: str, X, y, lam: float = 0.0, **kwargs) -> LinearModel:
    if kind == "ols":
        kwargs.pop("penalty_scale", None)
        return fit_ols(X, y, **kwargs)
    if kind == "ridge":
        return fit_ridge(X, y, lam, **kwargs)
    if kind == "lasso":
        return fit_lasso(X, y, lam, **kwargs)
    raise ValidationError(f"unknown model kind {kind!r}; expected one of {KINDS}")


# -- regularization paths -------------------------------------------------------


@dataclass(frozen=True, eq=False)
class RegularizationPath:
    kind: str
    lambdas: np.ndarray  # strictly descending
    coefficients: np.ndarray  # (grid, predictors), standardized scale
    names: tuple[str, ...]
    monotonicity_violations: int = 0

    def write_csv(self, path: str | Path, config_digest: str | None = None) -> None:
        rows = [[float(lam), math.log(lam), *map(float, row)] for lam, row in zip(self.lambdas, self.coefficients)]
        write_csv(path, ["lambda", "log_lambda", *self.names], rows, config_digest)


def _check_grid(grid) -> np.ndarray:
    grid = np.sort(np.asarray(grid, dtype=float).reshape(-1))[::-1]
    if grid.size == 0:
        raise ValidationError("empty lambda grid")
    if not np.all(grid > 0):
        raise ValidationError("lambda grid values must be positive")
    if np.any(np.diff(grid) == 0):
        raise ValidationError("lambda grid contains duplicates")
    return grid


def compute_path(
    X, y, kind: str, grid, names=None, standardize=True, exempt=(), penalty_scale="sum"
) -> RegularizationPath:
    """Coefficients across a descending grid; lasso fits are warm-started."""
    if kind not in ("ridge", "lasso"):
        raise ValidationError(f"paths are defined for ridge and lasso, not {kind!r}")
    grid = _check_grid(grid)
    prob = _prepare(X, y, names, standardize, exempt)
    rows = []
    alpha = None
    for lam in grid:
        lam_eff = _effective_lambda(float(lam), prob.n, penalty_scale)
        if kind == "ridge":
            alpha = _ridge_solve(prob, lam_eff)
        else:
            alpha, _ = _lasso_cd(prob, lam_eff, start=alpha)
        rows.append(np.array(alpha))
    coefs = np.vstack(rows)
    violations = 0
    if kind == "lasso":
        nnz = np.count_nonzero(coefs, axis=1)
        # grid descends, so the active count should not shrink along it
        violations = int(np.sum(np.diff(nnz) < 0))
        if violations:
            log.info("lasso path: active-set size decreased at %d of %d steps", violations, grid.size - 1)
    return RegularizationPath(kind, grid, coefs, prob.names, violations)


def final_block_mask(row_dates: Sequence, n_days: int) -> np.ndarray:
    """Rows whose date is among the last ``n_days`` distinct dates."""
    distinct = sorted(set(row_dates))
    if not 0 < n_days < len(distinct):
        raise ValidationError(f"holdout of {n_days} days needs between 1 and {len(distinct) - 1} days")
    cut = distinct[-n_days]
    return np.array([d >= cut for d in row_dates])


def select_lambda(
    X, y, kind: str, grid, holdout, names=None, standardize=True, exempt=(), penalty_scale="sum"
) -> float:
    """Grid value minimising RMSE on the holdout rows; ties go to the larger lambda.

    ``holdout`` is a boolean row mask, normally the final contiguous block of
    training dates (see :func:`final_block_mask`).
    """
    grid = _check_grid(grid)
    if np.any(grid > 1):
        raise ValidationError("lambda grid must lie in (0, 1]")
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float).reshape(-1)
    holdout = np.asarray(holdout, dtype=bool)
    if holdout.shape != y.shape or holdout.all() or not holdout.any():
        raise ValidationError("holdout mask must select some but not all rows")
    names = tuple(names) if names is not None else tuple(f"x{j}" for j in range(X.shape[1]))
    best_lam, best_err = None, float("inf")
    start = None
    for lam in grid:  # descending, so the first minimum seen is the larger lambda
        if kind == "lasso":
            model = fit_lasso(X[~holdout], y[~holdout], lam, names, standardize, exempt, penalty_scale, start=start)
            start = model.coefficients_std
        else:
            model = fit(kind, X[~holdout], y[~holdout], lam, names=names, standardize=standardize,
                        exempt=exempt, penalty_scale=penalty_scale)
        err = float(np.sqrt(np.mean((y[holdout] - predict(model, X[holdout], names)) ** 2)))
        if err < best_err * (1 - 1e-12):
            best_lam, best_err = float(lam), err
    return best_lam


# -- prediction ---------------------------------------------------------------------


def predict(model: LinearModel, X, columns: Sequence[str] | None = None) -> np.ndarray:
    """Predictions in the response's (transformed) scale.

    ``X`` is either a mapping/data frame keyed by predictor name, or a 2-D
    array whose columns are named by ``columns``.
    """
    if hasattr(X, "keys"):
        given = list(X.keys())
        _check_columns(model, given)
        mat = np.column_stack([np.asarray(X[n], dtype=float) for n in model.names])
    else:
        if columns is None:
            raise ValidationError("column names are required for array input")
        given = list(columns)
        _check_columns(model, given)
        arr = np.asarray(X, dtype=float)
        if arr.ndim == 1:
            arr = arr[None, :]
        mat = arr[:, [given.index(n) for n in model.names]]
    Z = model.standardization.transform(mat)
    return model.intercept_std + Z @ model.coefficients_std


def _check_columns(model: LinearModel, given: Sequence[str]) -> None:
    missing = [n for n in model.names if n not in given]
    extra = [n for n in given if n not in model.coefficients]
    if missing or extra:
        raise ValidationError(f"predictor columns mismatch: missing {missing}, unexpected {extra}")
