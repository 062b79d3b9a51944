import datetime as dt

import numpy as np
import pytest

from causalpanel.dataset import PanelDataset, VariableSpec
from causalpanel.synth import VarProcessSpec, generate_var_series, make_chain_spec

ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


def panel(values, names=None, dependent=None, kinds=None, transforms=None, start="2020-03-01"):
    """Small helper: wrap an (E, D, K) or (D, K) array as a PanelDataset."""
    values = np.asarray(values, dtype=float)
    if values.ndim == 2:
        values = values[None]
    k = values.shape[2]
    names = names or [f"v{i}" for i in range(k)]
    dependent = dependent or names[0]
    kinds = kinds or {}
    transforms = transforms or {}
    specs = [
        VariableSpec(
            n,
            role="dependent" if n == dependent else "predictor",
            kind=kinds.get(n, "continuous"),
            transform=transforms.get(n, "none"),
        )
        for n in names
    ]
    return PanelDataset.from_array(values, specs, start=start)


@pytest.fixture
def make_panel():
    return panel


@pytest.fixture(scope="session")
def chain_data():
    return generate_var_series(make_chain_spec(0.5, seed=11, length=5000))


def white_noise(seed, length=5000, k=2, names=("X", "Y")):
    spec = VarProcessSpec(np.zeros((1, k, k)), np.eye(k), seed=seed, length=length, names=names)
    return generate_var_series(spec)


def study_dates():
    start = dt.date(2020, 3, 1)
    return [start + dt.timedelta(days=i) for i in range((dt.date(2020, 6, 13) - start).days + 1)]
