import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).resolve().parents[1] / "src"))

from hypothesis import HealthCheck, settings

settings.register_profile(
    "suite",
    max_examples=40,
    deadline=None,
    suppress_health_check=[HealthCheck.too_slow],
    derandomize=True,
)
settings.load_profile("suite")


@pytest.fixture(scope="session")
def line2f():
    from optdesign import make_model

    return make_model("linear-2f-no-intercept")


@pytest.fixture(scope="session")
def line2f_grid(line2f):
    from optdesign import discretize

    return discretize(line2f.space, 0.01)


@pytest.fixture(scope="session")
def design_21d():
    """Determinant-optimal design of the two-factor line model."""
    from optdesign import design

    return design([[1.0, 1.0], [1.0, 0.0], [0.0, 1.0]], [1 / 3, 1 / 3, 1 / 3])


def random_psd(rng, s, scale=1.0, jitter=0.0):
    L = rng.normal(size=(s, s))
    M = L @ L.T * scale / s + jitter * np.eye(s)
    return 0.5 * (M + M.T)
