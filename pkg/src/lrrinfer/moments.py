"""Sample moments, studentized criterion and estimated sets.

Everything here works on a moment matrix of shape ``(n, ..., p)``: one row
per observation and one trailing column per inequality ``E[m_j] <= 0``.
Grid-level routines use ``(n, G, p)`` for ``G`` grid points at once.
"""

from __future__ import annotations

from abc import ABC, abstractmethod
from dataclasses import dataclass

import numpy as np

from .grid import GridMask, ParameterGrid, ParameterPoint

SIGMA_FLOOR = 1e-10
SLACK_CLAMP = -1e6
ZERO_TOL = 1e-12


class EmptyDatasetError(ValueError):
    pass


class MomentModel(ABC):
    """A moment-inequality model ``E[m_j(Z; theta)] <= 0, j = 1..p``.

    Subclasses implement :meth:`moment_matrix`, vectorized over grid points.
    Datasets only need ``len()`` and ``take(indices)``.
    """

    n_moments: int

    @abstractmethod
    def moment_matrix(self, data, thetas: np.ndarray) -> np.ndarray:
        """Per-observation moments, shape ``(n, G, p)`` for ``thetas`` of shape ``(G, d)``."""

    def evaluate(self, observation, theta) -> np.ndarray:
        """Moments of a single observation at a single theta."""
        return self.moment_matrix(observation, _theta_rows(theta))[0, 0]


@dataclass(frozen=True)
class MomentSummary:
    mbar: np.ndarray
    sigma_hat: np.ndarray
    n: int

    @property
    def sigma_floored(self) -> np.ndarray:
        return self.sigma_hat < SIGMA_FLOOR


def _theta_rows(theta) -> np.ndarray:
    if isinstance(theta, ParameterPoint):
        theta = theta.theta
    return np.atleast_2d(np.asarray(theta, dtype=float))


def summarize(m: np.ndarray) -> MomentSummary:
    """Mean and divisor-``n`` standard deviation over the first axis."""
    m = np.asarray(m, dtype=float)
    n = m.shape[0]
    if n == 0:
        raise EmptyDatasetError("no observations")
    mbar = m.mean(axis=0)
    sigma = np.sqrt(np.mean((m - mbar) ** 2, axis=0))
    return MomentSummary(mbar, sigma, n)


def sample_moments(data, model: MomentModel, theta) -> MomentSummary:
    if len(data) == 0:
        raise EmptyDatasetError("no observations")
    m = model.moment_matrix(data, _theta_rows(theta))[:, 0, :]
    return summarize(m)


def grid_moments(data, model: MomentModel, grid: ParameterGrid) -> tuple[np.ndarray, MomentSummary]:
    """Moment matrix ``(n, G, p)`` over every grid point, with its summary."""
    if len(data) == 0:
        raise EmptyDatasetError("no observations")
    m = model.moment_matrix(data, grid.theta_array())
    return m, summarize(m)


def summarize_points(data, model: MomentModel, thetas, chunk: int = 128) -> MomentSummary:
    """Summary over many parameter values without holding the full moment array.

    Models may provide ``moment_summary(data, thetas)`` as a faster exact route.
    """
    thetas = _theta_rows(thetas)
    if len(data) == 0:
        raise EmptyDatasetError("no observations")
    if hasattr(model, "moment_summary"):
        return model.moment_summary(data, thetas)
    parts = [summarize(model.moment_matrix(data, thetas[i:i + chunk])) for i in range(0, len(thetas), chunk)]
    return MomentSummary(np.concatenate([s.mbar for s in parts]), np.concatenate([s.sigma_hat for s in parts]),
                         parts[0].n)


def normalized_moments(summary: MomentSummary) -> np.ndarray:
    """``mbar / sigma_hat`` with the degenerate-variance rule.

    sigma below the floor is replaced by the floor; a degenerate moment with
    a nonpositive mean is treated as maximally slack.
    """
    floored = summary.sigma_floored
    sigma = np.where(floored, SIGMA_FLOOR, summary.sigma_hat)
    z = summary.mbar / sigma
    return np.where(floored & (summary.mbar <= 0), SLACK_CLAMP, z)


def q_hat_from_normalized(z: np.ndarray, kappa: float = 0.0) -> np.ndarray:
    return np.maximum(z + kappa, 0.0).sum(axis=-1)


def q_hat(summary: MomentSummary, kappa: float = 0.0):
    """Studentized criterion ``sum_j [mbar_j / sigma_j + kappa]_+``."""
    out = q_hat_from_normalized(normalized_moments(summary), kappa)
    return float(out) if np.ndim(out) == 0 else out


def test_statistic(summary: MomentSummary):
    """``sqrt(n) * q_hat(summary, 0)``."""
    out = np.sqrt(summary.n) * q_hat_from_normalized(normalized_moments(summary), 0.0)
    return float(out) if np.ndim(out) == 0 else out


# pytest would otherwise try to collect it when imported into a test module
test_statistic.__test__ = False


def kappa_set_flags(summary: MomentSummary, kappa: float) -> np.ndarray:
    """Flags of points where the kappa-shifted criterion is (numerically) zero."""
    return q_hat_from_normalized(normalized_moments(summary), kappa) <= ZERO_TOL


def gamma_hat_kappa(data, model: MomentModel, grid: ParameterGrid, beta, kappa: float) -> GridMask:
    """Estimated nuisance set at one beta on the grid's gamma axes."""
    b = grid.beta_index_of(beta)
    block = grid.theta_array()[grid.beta_block(b)]
    flags = kappa_set_flags(summarize_points(data, model, block), kappa)
    return GridMask(grid.gamma_grid(), flags)
