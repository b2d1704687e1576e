import numpy as np
import pytest

from neuroscore.core import EpochSet


def make_epochset(data, labels, rate_hz=250.0, window_ms=None, names=None):
    data = np.asarray(data, dtype=float)
    if window_ms is None:
        window_ms = (0.0, 1000.0 * data.shape[2] / rate_hz)
    if names is None:
        names = tuple(f"c{i}" for i in range(data.shape[1]))
    return EpochSet(data, tuple(labels), rate_hz, names, window_ms)


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)
