import numpy as np
import pytest

from sepembed.model import DiffusionSpec


def zero(x):
    return np.zeros_like(np.asarray(x, dtype=float))


def constant(v):
    return lambda x: np.full(np.shape(x), float(v))


@pytest.fixture
def brownian_spec():
    """Standard Brownian motion without any closed forms attached."""
    return DiffusionSpec(drift=zero, volatility=constant(1.0), start=0.0, name="plain_bm")


@pytest.fixture
def quadratic_vol_spec():
    """``dX = (1 + X^2) dW``, already in natural scale."""
    return DiffusionSpec(drift=zero, volatility=lambda x: 1.0 + np.asarray(x, dtype=float) ** 2,
                         start=0.0, name="quadratic")


def pytest_terminal_summary(terminalreporter):
    import sys
    mod = sys.modules.get("test_acceptance")
    if mod is None or not getattr(mod, "RESULTS", None):
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(mod.RESULTS):
        terminalreporter.write_line(mod.RESULTS[n])
