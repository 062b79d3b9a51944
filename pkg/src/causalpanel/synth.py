"""Synthetic VAR(p) panels with planted causal structure.

Noise is Gaussian, drawn with NumPy's ``Generator(PCG64(seed + entity))``
``standard_normal`` stream (NumPy >= 1.17) and coloured by the lower Cholesky
factor of the noise covariance. Each entity is simulated from a zero state
for ``burn_in + length`` steps and the burn-in is discarded.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np

from .dataset import PanelDataset, VariableSpec, daily_dates
from .errors import ValidationError


@dataclass(frozen=True, eq=False)
class VarProcessSpec:
    coefficients: np.ndarray  # (p, k, k); coefficients[j-1][i, m] = effect of m at lag j on i
    noise_cov: np.ndarray
    burn_in: int = 500
    seed: int = 0
    entities: int = 1
    length: int = 1000
    names: tuple[str, ...] | None = None
    dependent: str | None = None
    start: str = "2020-03-01"

    def __post_init__(self):
        coefs = np.asarray(self.coefficients, dtype=float)
        if coefs.ndim == 2:
            coefs = coefs[None]
        object.__setattr__(self, "coefficients", coefs)
        object.__setattr__(self, "noise_cov", np.atleast_2d(np.asarray(self.noise_cov, dtype=float)))
        if self.names is None:
            k = coefs.shape[-1] if coefs.ndim == 3 else 0
            object.__setattr__(self, "names", tuple(f"x{i}" for i in range(k)))
        else:
            object.__setattr__(self, "names", tuple(self.names))

    @property
    def p(self) -> int:
        return self.coefficients.shape[0]

    @property
    def k(self) -> int:
        return self.coefficients.shape[1]


def _check_dims(spec: VarProcessSpec) -> None:
    A = spec.coefficients
    if A.ndim != 3 or A.shape[1] != A.shape[2] or A.shape[0] < 1:
        raise ValidationError(f"coefficients must have shape (p, k, k), got {A.shape}")
    k = A.shape[1]
    if spec.noise_cov.shape != (k, k):
        raise ValidationError(f"noise covariance has shape {spec.noise_cov.shape}, expected {(k, k)}")
    if len(spec.names) != k:
        raise ValidationError(f"{len(spec.names)} names for {k} variables")


def companion_matrix(coefficients: np.ndarray) -> np.ndarray:
    A = np.asarray(coefficients, dtype=float)
    p, k, _ = A.shape
    C = np.zeros((k * p, k * p))
    C[:k, :] = np.hstack(list(A))
    C[k:, :-k] = np.eye(k * (p - 1))
    return C


def check_stationarity(spec: VarProcessSpec) -> float:
    """Spectral radius of the companion matrix (stationary iff < 1)."""
    _check_dims(spec)
    return float(np.max(np.abs(np.linalg.eigvals(companion_matrix(spec.coefficients)))))


def simulate(coefficients: np.ndarray, noise: np.ndarray, burn_in: int) -> np.ndarray:
    """Run ``x_t = sum_j A_j x_{t-j} + e_t`` from a zero state; drop the burn-in."""
    A = np.asarray(coefficients)
    p, k, _ = A.shape
    n = noise.shape[0]
    x = np.zeros((n + p, k))
    stacked = np.hstack(list(A))  # (k, k*p) acting on [x_{t-1}; ...; x_{t-p}]
    for t in range(n):
        past = x[t : t + p][::-1].reshape(-1)
        x[t + p] = stacked @ past + noise[t]
    return x[p + burn_in :]


def generate_var_series(spec: VarProcessSpec) -> PanelDataset:
    radius = check_stationarity(spec)
    if radius >= 1:
        raise ValidationError(f"refusing non-stationary spec (companion spectral radius {radius:.6g} >= 1)")
    if spec.length < 1 or spec.entities < 1 or spec.burn_in < 0:
        raise ValidationError("length and entities must be positive, burn_in non-negative")
    try:
        chol = np.linalg.cholesky(spec.noise_cov)
    except np.linalg.LinAlgError:
        raise ValidationError("noise covariance must be symmetric positive definite") from None
    if not np.allclose(spec.noise_cov, spec.noise_cov.T):
        raise ValidationError("noise covariance must be symmetric positive definite")

    steps = spec.burn_in + spec.length
    panels = []
    for e in range(spec.entities):
        rng = np.random.Generator(np.random.PCG64(spec.seed + e))
        noise = rng.standard_normal((steps, spec.k)) @ chol.T
        panels.append(simulate(spec.coefficients, noise, spec.burn_in))
    dependent = spec.dependent or spec.names[0]
    variables = tuple(
        VariableSpec(n, role="dependent" if n == dependent else "predictor") for n in spec.names
    )
    entities = [f"e{i:03d}" for i in range(spec.entities)]
    return PanelDataset(tuple(entities), daily_dates(spec.start, spec.length), variables, np.stack(panels))


def make_chain_spec(
    strength: float = 0.5,
    seed: int = 0,
    persistence: float = 0.5,
    length: int = 5000,
    entities: int = 1,
    burn_in: int = 500,
) -> VarProcessSpec:
    """Three-variable chain ``Y -> Z -> X`` with no direct ``Y -> X`` term.

    Variables are ordered ``(X, Y, Z)``; ``X`` is the dependent variable.
    """
    d, s = persistence, strength
    A = np.array(
        [
            [d, 0.0, s],  # X <- Z
            [0.0, d, 0.0],
            [0.0, s, d],  # Z <- Y
        ]
    )
    spec = VarProcessSpec(A[None], np.eye(3), burn_in, seed, entities, length, ("X", "Y", "Z"), "X")
    radius = check_stationarity(spec)
    if radius >= 1:
        raise ValidationError(f"chain spec with strength {strength} is not stationary (radius {radius:.6g})")
    return spec


def spec_from_config(cfg: Mapping) -> VarProcessSpec:
    """Build a spec from a parsed key-value config.

    Either ``chain: {strength, persistence}`` or explicit ``coefficients``
    (list of k x k matrices, one per lag) plus optional ``noise_cov``.
    """
    cfg = dict(cfg)
    common = {k: cfg[k] for k in ("burn_in", "seed", "entities", "length") if k in cfg}
    if "chain" in cfg:
        chain = dict(cfg["chain"] or {})
        unknown = set(chain) - {"strength", "persistence"}
        if unknown:
            raise ValidationError(f"unknown chain keys {sorted(unknown)}")
        spec = make_chain_spec(**chain, **common)
        if "start" in cfg:
            spec = VarProcessSpec(**{**spec.__dict__, "start": str(cfg["start"])})
        return spec
    if "coefficients" not in cfg:
        raise ValidationError("synthetic config needs 'chain' or 'coefficients'")
    coefs = np.asarray(cfg["coefficients"], dtype=float)
    k = coefs.shape[-1]
    noise = np.asarray(cfg.get("noise_cov", np.eye(k)), dtype=float)
    names: Sequence[str] | None = cfg.get("names")
    return VarProcessSpec(
        coefs, noise, names=tuple(names) if names else None, dependent=cfg.get("dependent"),
        start=str(cfg.get("start", "2020-03-01")), **common,
    )
