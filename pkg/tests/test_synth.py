import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from causalpanel import errors
from causalpanel.dataset import ingest_csv
from causalpanel.synth import (
    VarProcessSpec,
    check_stationarity,
    generate_var_series,
    make_chain_spec,
    spec_from_config,
)


def _charpoly_radius(A):
    """Radius from characteristic polynomial coefficients (no eigen routine on A)."""
    k = A.shape[0]
    if k == 2:
        coeffs = [1.0, -np.trace(A), np.linalg.det(A)]
    else:
        minors = sum(np.linalg.det(A[np.ix_([i, j], [i, j])]) for i in range(3) for j in range(i + 1, 3))
        coeffs = [1.0, -np.trace(A), minors, -np.linalg.det(A)]
    return float(np.max(np.abs(np.roots(coeffs))))


def test_zero_matrices_radius_zero():
    assert check_stationarity(VarProcessSpec(np.zeros((2, 3, 3)), np.eye(3))) == 0.0


def test_scalar_radius():
    assert check_stationarity(VarProcessSpec(np.array([[[0.5]]]), np.eye(1))) == pytest.approx(0.5)


def test_two_variable_chain_radius():
    A = np.array([[0.5, 0.8], [0.0, 0.5]])
    radius = check_stationarity(VarProcessSpec(A[None], np.eye(2)))
    assert radius == pytest.approx(_charpoly_radius(A), abs=1e-7)
    assert radius < 1


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 10_000))
def test_radius_matches_charpoly(seed):
    A = np.random.default_rng(seed).uniform(-0.6, 0.6, (3, 3))
    assert check_stationarity(VarProcessSpec(A[None], np.eye(3))) == pytest.approx(_charpoly_radius(A), abs=1e-6)


def test_ar2_radius_from_quadratic():
    a1, a2 = 0.5, 0.3
    radius = check_stationarity(VarProcessSpec(np.array([[[a1]], [[a2]]]), np.eye(1)))
    assert radius == pytest.approx(np.max(np.abs(np.roots([1, -a1, -a2]))), abs=1e-12)


def test_dimension_mismatch():
    with pytest.raises(errors.ValidationError):
        check_stationarity(VarProcessSpec(np.zeros((1, 2, 2)), np.eye(3)))
    with pytest.raises(errors.ValidationError):
        check_stationarity(VarProcessSpec(np.zeros((1, 2, 3)), np.eye(2)))


def test_non_stationary_refused():
    with pytest.raises(errors.ValidationError, match="non-stationary"):
        generate_var_series(VarProcessSpec(np.array([[[1.0]]]), np.eye(1)))


def test_white_noise_covariance():
    data = generate_var_series(VarProcessSpec(np.zeros((1, 2, 2)), np.eye(2), seed=1, length=10_000))
    cov = np.cov(data.values[0].T, bias=True)
    assert np.max(np.abs(cov - np.eye(2))) < 0.05


def test_ar_autocorrelation():
    x = generate_var_series(VarProcessSpec(np.array([[[0.9]]]), np.eye(1), seed=2, length=10_000)).values[0, :, 0]
    x = x - x.mean()
    rho = (x[1:] @ x[:-1]) / (x @ x)
    assert abs(rho - 0.9) <= 0.03


def test_determinism_and_seed_sensitivity():
    spec = make_chain_spec(0.5, seed=3, length=200, entities=2)
    a, b = generate_var_series(spec), generate_var_series(spec)
    assert np.array_equal(a.values, b.values)
    c = generate_var_series(make_chain_spec(0.5, seed=4, length=200, entities=2))
    assert not np.array_equal(a.values, c.values)
    # entity e derives seed + e
    assert np.array_equal(a.values[1], c.values[0])


def test_chain_structure():
    A = make_chain_spec(0.5).coefficients[0]
    off = A - np.diag(np.diag(A))
    assert np.count_nonzero(off) == 2
    assert off[0, 2] == 0.5 and off[2, 1] == 0.5  # X <- Z, Z <- Y
    assert off[0, 1] == 0.0


def test_unstable_chain_refused():
    with pytest.raises(errors.ValidationError):
        make_chain_spec(0.5, persistence=1.0)


@pytest.mark.parametrize(
    "A",
    [np.zeros((1, 2, 2)), np.array([[[0.2, 0.1], [0.0, 0.2]]])],
    ids=["white", "mild"],
)
def test_ergodic_mean(A):
    T = 10_000
    data = generate_var_series(VarProcessSpec(A, np.eye(2), seed=5, length=T))
    assert np.all(np.abs(data.values[0].mean(axis=0)) < 5 / np.sqrt(T))


def test_generated_data_round_trips_through_ingest(tmp_path):
    data = generate_var_series(make_chain_spec(0.5, seed=6, length=50, entities=3))
    data.write_csv(tmp_path / "p.csv")
    back = ingest_csv(tmp_path / "p.csv", data.variables)
    assert np.array_equal(back.values, data.values)
    assert back.dependent == "X"


def test_spec_from_config():
    spec = spec_from_config({"chain": {"strength": 0.4}, "seed": 9, "length": 30, "entities": 2})
    assert spec.seed == 9 and spec.entities == 2 and spec.coefficients[0, 0, 2] == 0.4
    spec = spec_from_config({"coefficients": [[[0.2, 0.0], [0.1, 0.3]]], "names": ["a", "b"]})
    assert spec.k == 2 and spec.names == ("a", "b")
    with pytest.raises(errors.ValidationError):
        spec_from_config({"chain": {"strenght": 0.4}})
