"""Pooled panel vector autoregressions.

Every entity contributes ``dates - p`` rows to a single stacked regression;
lags are taken within an entity only, so no row mixes two entities.
"""

from __future__ import annotations

import datetime as dt
import logging
import warnings
from dataclasses import dataclass
from typing import Sequence

import numpy as np
import scipy.linalg

from .dataset import PanelDataset
from .errors import NumericalError, RankDeficiencyError, ValidationError

log = logging.getLogger(__name__)

# Relative diagonal jitter used when the regressor Gram matrix is singular.
RIDGE_FALLBACK = 1e-10


class RankFallbackWarning(RuntimeWarning):
    pass


@dataclass(frozen=True, eq=False)
class LagDesign:
    """Stacked VAR(p) regression problem.

    ``regressors`` columns are ``[1, x_{t-1}, ..., x_{t-p}]`` where each lag
    block holds one column per modeled variable in declared order. Optional
    per-entity intercept dummies (first entity dropped) follow the lag blocks.
    """

    targets: np.ndarray
    regressors: np.ndarray
    lag: int
    names: tuple[str, ...]
    row_index: tuple[tuple[str, dt.date], ...]
    entity_intercepts: bool = False

    @property
    def n_rows(self) -> int:
        return self.targets.shape[0]

    def column_names(self) -> list[str]:
        cols = ["const"]
        for j in range(1, self.lag + 1):
            cols += [f"{n}.L{j}" for n in self.names]
        extra = self.regressors.shape[1] - len(cols)
        cols += [f"entity_dummy{i}" for i in range(1, extra + 1)]
        return cols


def lag_embed(values: np.ndarray, p: int, entity_intercepts: bool = False) -> tuple[np.ndarray, np.ndarray]:
    """Stack per-entity lag embeddings of an ``(entities, dates, k)`` array.

    Returns ``(targets, regressors)`` with ``entities * (dates - p)`` rows.
    """
    values = np.asarray(values, dtype=float)
    n_ent, n_dates, k = values.shape
    if p < 1:
        raise ValidationError(f"lag order must be >= 1, got {p}")
    if p >= n_dates:
        raise ValidationError(f"lag order {p} needs more than {p} dates per entity, panel has {n_dates}")
    rows = n_dates - p
    targets = values[:, p:, :].reshape(n_ent * rows, k)
    blocks = [np.ones((n_ent * rows, 1))]
    for j in range(1, p + 1):
        blocks.append(values[:, p - j : n_dates - j, :].reshape(n_ent * rows, k))
    if entity_intercepts and n_ent > 1:
        dummies = np.zeros((n_ent * rows, n_ent - 1))
        for e in range(1, n_ent):
            dummies[e * rows : (e + 1) * rows, e - 1] = 1.0
        blocks.append(dummies)
    return targets, np.hstack(blocks)


def build_lag_design(
    data: PanelDataset, vars: Sequence[str], p: int, entity_intercepts: bool = False
) -> LagDesign:
    vars = tuple(vars)
    if not vars:
        raise ValidationError("at least one variable is required")
    targets, regressors = lag_embed(data.select(vars), p, entity_intercepts)
    row_index = tuple((e, d) for e in data.entities for d in data.dates[p:])
    return LagDesign(targets, regressors, p, vars, row_index, entity_intercepts)


@dataclass(frozen=True, eq=False)
class VarModel:
    coefficients: np.ndarray  # (regressor columns, k)
    residual_covariance: np.ndarray
    lag: int
    n_effective: int
    names: tuple[str, ...]
    residuals: np.ndarray
    rank_fallback: bool = False

    @property
    def k(self) -> int:
        return len(self.names)

    @property
    def intercept(self) -> np.ndarray:
        return self.coefficients[0]

    @property
    def lag_matrices(self) -> np.ndarray:
        """``A[j-1][i, m]``: effect of variable ``m`` at lag ``j`` on equation ``i``."""
        k, p = self.k, self.lag
        block = self.coefficients[1 : 1 + k * p].reshape(p, k, k)
        return np.transpose(block, (0, 2, 1))

    def residual_variance(self, name: str) -> float:
        i = self.names.index(name)
        return float(self.residual_covariance[i, i])


def _collinear_columns(X: np.ndarray, names: Sequence[str]) -> list[str]:
    norms = np.linalg.norm(X, axis=0)
    norms[norms == 0] = 1.0
    _, s, vt = np.linalg.svd(X / norms, full_matrices=False)
    tol = s.max() * max(X.shape) * np.finfo(float).eps if s.size else 0.0
    null = vt[s <= tol]
    involved = np.any(np.abs(null) > 1e-6, axis=0) if null.size else np.zeros(X.shape[1], bool)
    return [names[j] for j in np.flatnonzero(involved)]


def least_squares(X: np.ndarray, Y: np.ndarray, names: Sequence[str] | None = None) -> tuple[np.ndarray, bool]:
    """Minimise ``||Y - X B||`` column-wise.

    Full-rank problems go through LAPACK least squares. A singular Gram matrix
    gets a jitter of ``RIDGE_FALLBACK * mean(diag)`` with a warning; if that
    still cannot be factorised a ``RankDeficiencyError`` names the columns
    involved. Returns ``(coefficients, used_fallback)``.
    """
    coef, _, rank, _ = np.linalg.lstsq(X, Y, rcond=None)
    if rank == X.shape[1]:
        return coef, False
    names = list(names) if names is not None else [f"col{j}" for j in range(X.shape[1])]
    cols = _collinear_columns(X, names)
    gram = X.T @ X
    jitter = RIDGE_FALLBACK * float(np.mean(np.diag(gram)))
    warnings.warn(
        f"regressor matrix has rank {rank} < {X.shape[1]} (collinear: {cols}); "
        f"adding {jitter:.3g} to the Gram diagonal",
        RankFallbackWarning,
        stacklevel=3,
    )
    try:
        if not jitter > 0:
            raise np.linalg.LinAlgError("zero Gram matrix")
        factor = scipy.linalg.cho_factor(gram + jitter * np.eye(gram.shape[0]))
        coef = scipy.linalg.cho_solve(factor, X.T @ Y)
    except (np.linalg.LinAlgError, scipy.linalg.LinAlgError) as exc:
        raise RankDeficiencyError(f"singular regressor matrix; collinear columns: {cols}", cols) from exc
    if not np.all(np.isfinite(coef)):
        raise RankDeficiencyError(f"singular regressor matrix; collinear columns: {cols}", cols)
    return coef, True


def fit_var(design: LagDesign) -> VarModel:
    """OLS per equation; residual covariance uses the 1/T (ML) normalisation."""
    coef, fallback = least_squares(design.regressors, design.targets, design.column_names())
    resid = design.targets - design.regressors @ coef
    T = design.n_rows
    cov = resid.T @ resid / T
    cov = 0.5 * (cov + cov.T)
    return VarModel(coef, cov, design.lag, T, design.names, resid, fallback)


def aic(model: VarModel) -> float:
    """``ln det(Sigma) + 2 k (1 + k p) / T``."""
    sign, logdet = np.linalg.slogdet(model.residual_covariance)
    if sign <= 0 or not np.isfinite(logdet):
        raise NumericalError("residual covariance is singular; AIC undefined")
    k, p, T = model.k, model.lag, model.n_effective
    return float(logdet + 2.0 * k * (1 + k * p) / T)


def aic_table(
    data: PanelDataset, vars: Sequence[str], p_max: int, entity_intercepts: bool = False
) -> dict[int, float]:
    """AIC for every lag in ``1..p_max``, all fitted on the same target rows.

    Each candidate drops the first ``p_max - p`` dates per entity so that the
    criteria compare residuals of identical observations.
    """
    if p_max < 1:
        raise ValidationError(f"p_max must be >= 1, got {p_max}")
    if p_max >= len(data.dates):
        raise ValidationError(f"p_max={p_max} must be below the number of dates per entity ({len(data.dates)})")
    table = {}
    for p in range(1, p_max + 1):
        window = data.date_slice(data.dates[p_max - p], data.dates[-1])
        table[p] = aic(fit_var(build_lag_design(window, vars, p, entity_intercepts)))
    return table


def select_lag(data: PanelDataset, vars: Sequence[str], p_max: int, entity_intercepts: bool = False) -> int:
    """AIC-minimising lag in ``1..p_max``; ties go to the smaller lag."""
    table = aic_table(data, vars, p_max, entity_intercepts)
    best = min(table, key=lambda p: (table[p], p))
    log.debug("AIC by lag for %s: %s -> %d", list(vars), table, best)
    return best
