import numpy as np
import pytest

from olsweights import Dataset
from oracles import TOY8_ROWS

ACCEPTANCE_LINES = {}


def record_criterion(number, ok, detail):
    ACCEPTANCE_LINES[number] = f"criterion {number}: {'PASS' if ok else 'FAIL'} ({detail})"
    print(ACCEPTANCE_LINES[number])


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for k in sorted(ACCEPTANCE_LINES):
        terminalreporter.write_line(ACCEPTANCE_LINES[k])


@pytest.fixture
def toy8():
    a = np.array(TOY8_ROWS, dtype=float)
    return Dataset(a[:, 2], a[:, 1], a[:, [0]], ("x",))


def random_dataset(rng, n, p, discrete=False, levels=4):
    """Treatment depends on X so the arms differ; both arms always present."""
    if discrete:
        X = rng.integers(0, levels, size=(n, p)).astype(float)
    else:
        X = rng.normal(size=(n, p))
    lin = X @ rng.normal(size=p) * 0.7
    d = (rng.random(n) < 1 / (1 + np.exp(-lin))).astype(float)
    d[:2] = [1.0, 0.0]
    y = 1.0 + X @ rng.normal(size=p) + d * (1.0 + X[:, 0]) + rng.normal(size=n)
    return Dataset(y, d, X, tuple(f"x{j}" for j in range(p)))
