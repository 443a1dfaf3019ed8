import numpy as np
import pytest

from locnoise.dataset import LabeledDataset

# filled by the acceptance suite, echoed in the terminal summary
ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


def smooth_1d(n, seed, slope=1.5, intercept=0.3):
    """1-d data with eta(x) = logistic(intercept + slope * x), x ~ N(0, 1)."""
    rng = np.random.default_rng(seed)
    x = rng.standard_normal(n)
    eta = 1.0 / (1.0 + np.exp(-(intercept + slope * x)))
    y = (rng.random(n) < eta).astype(int)
    return LabeledDataset(x[:, None], y)


def mirrored_1d(copies=50):
    """{(-1, 0), (+1, 1)} repeated; label symmetry about 0 plus a few crossovers."""
    x = np.array([-1.0, 1.0, -0.5, 0.5] * copies)
    y = np.array([0, 1, 1, 0] * copies)
    return LabeledDataset(x[:, None], y)


@pytest.fixture
def small_2d():
    rng = np.random.default_rng(7)
    X = rng.normal(size=(10, 2))
    y = (rng.random(10) < 1.0 / (1.0 + np.exp(-X[:, 0] + 0.5 * X[:, 1]))).astype(int)
    y[:2] = [0, 1]
    return LabeledDataset(X, y)
