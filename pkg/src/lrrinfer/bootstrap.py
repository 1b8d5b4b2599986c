"""Bootstrap critical values for the studentized moment statistic.

Two schemes are provided:

* least favorable: every moment is recentred at zero, critical value is the
  ``1 - alpha`` quantile of ``sqrt(n) sum_j [(mbar*_j - mbar_j) / sigma_j]_+``;
* Bonferroni: an ``alpha1`` first stage estimates moment slackness through the
  bootstrap minimum ``min_j sqrt(n)(mbar*_j - mbar_j)/sigma_j`` and the
  recentred draws are shifted by ``lambda_j <= 0`` before taking the
  ``1 - alpha + alpha1`` quantile.

Both use one set of ``B`` resamples per dataset. The resamples are shared by
every grid point and by both stages of the Bonferroni scheme. Denominators
are always the full-sample standard deviations.

Random streams
--------------
Resample ``b`` of a run with seed ``s`` is drawn from
``Generator(Philox(SeedSequence(s, spawn_key=(*stream, b))))``. Philox is a
counter-based generator and ``SeedSequence`` hashes the spawn key, so each
resample depends only on ``(seed, stream, b)``. It does not depend on how
resamples are split across workers.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .moments import SIGMA_FLOOR, MomentModel, MomentSummary, summarize, _theta_rows

QUANTILE_CONVENTION = "order-statistic"
# absorbs representation error in q * (B + 1), e.g. 0.955 * 1000
_QUANTILE_SLACK = 1e-9


@dataclass(frozen=True)
class BootstrapPlan:
    B: int = 199
    alpha: float = 0.05
    alpha1: float = 0.005
    kappa: float = 0.02
    seed: int = 0
    quantile: str = QUANTILE_CONVENTION

    def __post_init__(self):
        if int(self.B) != self.B or self.B < 1:
            raise ValueError("B must be a positive integer")
        if not 0 < self.alpha1 < self.alpha < 1:
            raise ValueError("need 0 < alpha1 < alpha < 1")
        if self.kappa < 0:
            raise ValueError("kappa must be nonnegative")
        if self.quantile != QUANTILE_CONVENTION:
            raise ValueError(f"unknown quantile convention {self.quantile!r}")
        if not 0 <= int(self.seed) < 2**64:
            raise ValueError("seed must fit in 64 unsigned bits")

    def to_dict(self) -> dict:
        return {
            "B": self.B,
            "alpha": self.alpha,
            "alpha1": self.alpha1,
            "kappa": self.kappa,
            "seed": self.seed,
            "quantile": self.quantile,
        }


def substream(seed: int, *key: int) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(int(seed), spawn_key=tuple(int(k) for k in key))))


def resample_indices(n: int, B: int, seed: int, stream: tuple[int, ...] = ()) -> np.ndarray:
    """``(B, n)`` zero-based indices drawn uniformly with replacement."""
    if n < 1:
        raise ValueError("n must be positive")
    out = np.empty((B, n), dtype=np.int64)
    for b in range(B):
        out[b] = substream(seed, *stream, b).integers(0, n, size=n)
    return out


def resample_counts(indices: np.ndarray, n: int) -> np.ndarray:
    """Multiplicity of each original row in each resample, shape ``(B, n)``."""
    indices = np.atleast_2d(indices)
    B = indices.shape[0]
    offsets = (np.arange(B) * n)[:, None]
    return np.bincount((indices + offsets).ravel(), minlength=B * n).reshape(B, n).astype(float)


def order_statistic_quantile(draws, q: float, axis: int = 0):
    """Level-``q`` quantile ``t_(k)`` with ``k = clamp(ceil(q (B + 1)), 1, B)``."""
    draws = np.asarray(draws, dtype=float)
    B = draws.shape[axis]
    k = min(max(math.ceil(q * (B + 1) - _QUANTILE_SLACK), 1), B)
    part = np.partition(draws, k - 1, axis=axis)
    return np.take(part, k - 1, axis=axis)


@dataclass
class CriticalValues:
    c_conservative: np.ndarray
    c_bonferroni: np.ndarray
    kappa_hat: np.ndarray
    lambda_hat: np.ndarray
    extra: dict = field(default_factory=dict)


def _safe_sigma(summary: MomentSummary):
    floored = summary.sigma_floored
    return np.where(floored, SIGMA_FLOOR, summary.sigma_hat), floored


def lambda_hat(summary: MomentSummary, kappa_hat, n: int) -> np.ndarray:
    """Slackness shift ``min(mbar_j - sigma_j kappa_hat / sqrt(n), 0)``."""
    kappa_hat = np.asarray(kappa_hat, dtype=float)[..., None]
    return np.minimum(summary.mbar - summary.sigma_hat * kappa_hat / np.sqrt(n), 0.0)


def _normalized_deviations(m: np.ndarray, summary: MomentSummary, counts: np.ndarray):
    """``(mbar* - mbar) / sigma`` for every resample, shape ``(B, G, p)``."""
    n, G, p = m.shape
    boot_means = (counts @ m.reshape(n, G * p)).reshape(-1, G, p) / n
    dev = boot_means - summary.mbar
    sigma, floored = _safe_sigma(summary)
    # a degenerate moment has identical rows; its bootstrap deviation is exactly zero
    dev = np.where(floored, 0.0, dev)
    return dev, sigma


def bootstrap_draws(m: np.ndarray, summary: MomentSummary, counts: np.ndarray, alpha1: float, shift=None):
    """Bootstrap draws for every grid point.

    Returns ``(conservative, minimum, bonferroni, kappa_hat, lambda_hat)``
    where the draw arrays have shape ``(B, G)``. ``shift`` overrides the
    estimated lambda (used for oracle comparisons with population moments).
    """
    n = m.shape[0]
    dev, sigma = _normalized_deviations(m, summary, counts)
    rootn = np.sqrt(n)
    nu = dev / sigma
    conservative = rootn * np.maximum(nu, 0.0).sum(axis=-1)
    minimum = rootn * nu.min(axis=-1)
    kappa = order_statistic_quantile(minimum, alpha1, axis=0)
    lam = lambda_hat(summary, kappa, n) if shift is None else np.asarray(shift, dtype=float)
    bonferroni = rootn * np.maximum((dev + lam) / sigma, 0.0).sum(axis=-1)
    return conservative, minimum, bonferroni, kappa, lam


def critical_values(m: np.ndarray, summary: MomentSummary, plan: BootstrapPlan, counts: np.ndarray,
                    population_mean=None, chunk: int = 2048) -> CriticalValues:
    """Both critical values at every grid point of a moment matrix ``(n, G, p)``.

    ``population_mean`` (shape ``(G, p)``), when given, also yields the
    comparison critical value obtained by shifting with the true moment
    means, stored under ``extra["c_oracle"]``.
    """
    G = m.shape[1]
    c_cons = np.empty(G)
    c_bonf = np.empty(G)
    kap = np.empty(G)
    lam = np.empty(summary.mbar.shape)
    c_orc = np.empty(G) if population_mean is not None else None
    for start in range(0, G, chunk):
        sl = slice(start, min(start + chunk, G))
        sub = MomentSummary(summary.mbar[sl], summary.sigma_hat[sl], summary.n)
        cons, _, bonf, k, l = bootstrap_draws(m[:, sl], sub, counts, plan.alpha1)
        c_cons[sl] = order_statistic_quantile(cons, 1 - plan.alpha, axis=0)
        c_bonf[sl] = order_statistic_quantile(bonf, 1 - plan.alpha + plan.alpha1, axis=0)
        kap[sl] = k
        lam[sl] = l
        if population_mean is not None:
            _, _, orc, _, _ = bootstrap_draws(m[:, sl], sub, counts, plan.alpha1,
                                              shift=np.asarray(population_mean)[sl])
            c_orc[sl] = order_statistic_quantile(orc, 1 - plan.alpha + plan.alpha1, axis=0)
    extra = {} if c_orc is None else {"c_oracle": c_orc}
    return CriticalValues(c_cons, c_bonf, kap, lam, extra)


def plan_counts(n: int, plan: BootstrapPlan, stream: tuple[int, ...] = ()) -> np.ndarray:
    return resample_counts(resample_indices(n, plan.B, plan.seed, stream), n)


# Single-point entry points ------------------------------------------------


def _point_moments(data, model: MomentModel, theta):
    m = model.moment_matrix(data, _theta_rows(theta))
    return m, summarize(m)


def conservative_statistic(data, resample, model: MomentModel, theta) -> float:
    """``sqrt(n) sum_j [(mbar*_j - mbar_j)/sigma_j]_+`` for one resample of row indices."""
    m, s = _point_moments(data, model, theta)
    counts = resample_counts(np.asarray(resample)[None, :], m.shape[0])
    cons, *_ = bootstrap_draws(m, s, counts, alpha1=0.5)
    return float(cons[0, 0])


def _point_draws(data, model, theta, plan, stream=()):
    m, s = _point_moments(data, model, theta)
    counts = plan_counts(m.shape[0], plan, stream)
    return m, s, bootstrap_draws(m, s, counts, plan.alpha1)


def conservative_critical_value(data, model: MomentModel, theta, plan: BootstrapPlan, stream=()) -> float:
    _, _, (cons, *_rest) = _point_draws(data, model, theta, plan, stream)
    return float(order_statistic_quantile(cons[:, 0], 1 - plan.alpha))


def kappa_hat(data, model: MomentModel, theta, plan: BootstrapPlan, stream=()) -> float:
    """``alpha1`` quantile of the bootstrap minimum of the studentized deviations."""
    _, _, (_, _, _, kap, _) = _point_draws(data, model, theta, plan, stream)
    return float(kap[0])


def bonferroni_critical_value(data, model: MomentModel, theta, plan: BootstrapPlan, stream=()) -> float:
    _, _, (_, _, bonf, _, _) = _point_draws(data, model, theta, plan, stream)
    return float(order_statistic_quantile(bonf[:, 0], 1 - plan.alpha + plan.alpha1))
