import numpy as np
import pytest
from hypothesis import settings

from lrrinfer.moments import MomentModel

settings.register_profile("default", max_examples=60, deadline=None)
settings.load_profile("default")

ACCEPTANCE_LINES = []


class MeanModel(MomentModel):
    """One inequality per column: ``E[y_j] - theta_j <= 0`` (theta broadcast to all columns)."""

    def __init__(self, p=1):
        self.p = p

    def moment_matrix(self, data, thetas):
        y = np.asarray(data, dtype=float).reshape(len(data), -1)
        thetas = np.atleast_2d(np.asarray(thetas, dtype=float))
        return y[:, None, :] - thetas[None, :, :1]


@pytest.fixture
def mean_model():
    return MeanModel()


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
