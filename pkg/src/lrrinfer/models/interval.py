"""Linear model with top-coded outcome.

The latent outcome is ``Y* = x1'theta + eps`` with ``x1 = (1, x)`` for a
binary covariate ``x`` and ``theta = (beta, gamma)`` = (intercept, slope).
Values above ``z1`` are only known to lie in ``[z1, z2]``; the bracket
``(z1_tilde, z2_tilde)`` collapses to ``(Y*, Y*)`` for uncensored rows.
When censored, the realised outcome is ``eta z1 + (1 - eta) z2`` for an
unobserved index ``eta`` in ``[0, 1]``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..moments import MomentModel, MomentSummary, summarize
from ..normal import norm_sf
from ..statespace import CounterfactualContext, EtaGrid, StateSpace, eta_grid, normal_quadrature


@dataclass(frozen=True)
class IntervalData:
    """Observed brackets and binary covariate, one entry per row.

    ``y_star`` keeps the latent outcome when the data were simulated.
    """

    z1_tilde: np.ndarray
    z2_tilde: np.ndarray
    x: np.ndarray
    y_star: np.ndarray | None = None

    def __post_init__(self):
        z1 = np.asarray(self.z1_tilde, dtype=float).ravel()
        z2 = np.asarray(self.z2_tilde, dtype=float).ravel()
        x = np.asarray(self.x, dtype=float).ravel()
        if not (z1.size == z2.size == x.size):
            raise ValueError("columns must have equal length")
        if np.any(z1 > z2):
            raise ValueError("z1_tilde must not exceed z2_tilde")
        if not np.all((x == 0) | (x == 1)):
            raise ValueError("covariate must be binary")
        object.__setattr__(self, "z1_tilde", z1)
        object.__setattr__(self, "z2_tilde", z2)
        object.__setattr__(self, "x", x)
        if self.y_star is not None:
            object.__setattr__(self, "y_star", np.asarray(self.y_star, dtype=float).ravel())

    def __len__(self) -> int:
        return self.x.size

    @property
    def censored(self) -> np.ndarray:
        return self.z1_tilde < self.z2_tilde

    def take(self, idx) -> "IntervalData":
        ys = None if self.y_star is None else self.y_star[idx]
        return IntervalData(self.z1_tilde[idx], self.z2_tilde[idx], self.x[idx], ys)

    @classmethod
    def from_latent(cls, y_star, x, z1: float, z2: float) -> "IntervalData":
        """Top-code latent outcomes at ``z1``; ``y_star == z1`` stays uncensored."""
        y_star = np.asarray(y_star, dtype=float)
        cens = y_star > z1
        return cls(np.where(cens, z1, y_star), np.where(cens, z2, y_star), x, y_star)


def interval_moments(z1_tilde, z2_tilde, x, beta, gamma) -> np.ndarray:
    """The four inequalities, broadcasting over rows and parameter values.

    Returns ``(..., 4)``:
    ``(Z1~ - beta) 1{x=0}``, ``(beta - Z2~) 1{x=0}``,
    ``(Z1~ - beta - gamma) 1{x=1}``, ``(beta + gamma - Z2~) 1{x=1}``.
    """
    d1 = np.asarray(x, dtype=float)
    d0 = 1.0 - d1
    level1 = beta + gamma
    return np.stack(
        [
            (z1_tilde - beta) * d0,
            (beta - z2_tilde) * d0,
            (z1_tilde - level1) * d1,
            (level1 - z2_tilde) * d1,
        ],
        axis=-1,
    )


def interval_rho(x1, z1, z2, eps, eta, theta):
    """Structural outcome: ``x1'theta + eps`` if at most ``z1``, else ``eta z1 + (1 - eta) z2``."""
    latent = np.dot(np.asarray(x1, dtype=float), np.asarray(theta, dtype=float)) + eps
    return np.where(latent <= z1, latent, eta * z1 + (1 - eta) * z2)


def q_lrr_interval(theta, atoms, weights=None, eps_sf=None, eps_scale: float = 1.0) -> float:
    """Closed-form robustness criterion.

    ``(1/12) sum_a w_a (z1_a - z2_a)^2 P(eps > z1_a - x1_a'theta)``, where
    atom rows are ``(x1..., z1, z2)``. ``eps_sf`` is the error survival
    function; the default is the ``N(0, eps_scale^2)`` upper tail.
    """
    atoms = np.atleast_2d(np.asarray(atoms, dtype=float))
    weights = np.full(atoms.shape[0], 1.0 / atoms.shape[0]) if weights is None else np.asarray(weights, dtype=float)
    x1, z1, z2 = atoms[:, :-2], atoms[:, -2], atoms[:, -1]
    if eps_sf is None:
        def eps_sf(c):
            return norm_sf(c / eps_scale)
    index = x1 @ np.asarray(theta, dtype=float)
    return float(np.sum(weights * (z1 - z2) ** 2 * eps_sf(z1 - index)) / 12.0)


class IntervalModel(MomentModel):
    """Moment inequalities and robustness criterion for top-coded data.

    ``z1`` and ``z2`` are the known top-coding threshold and upper bound,
    which enter the counterfactual atoms.
    """

    n_moments = 4
    dim = 2
    n_beta = 1
    eta_kind = "midpoint"

    def __init__(self, z1: float, z2: float, eps_scale: float = 1.0):
        if not z1 < z2:
            raise ValueError("need z1 < z2")
        self.z1 = float(z1)
        self.z2 = float(z2)
        self.eps_scale = float(eps_scale)

    def moment_matrix(self, data: IntervalData, thetas) -> np.ndarray:
        thetas = np.atleast_2d(np.asarray(thetas, dtype=float))
        beta = thetas[None, :, 0]
        gamma = thetas[None, :, 1]
        return interval_moments(
            data.z1_tilde[:, None], data.z2_tilde[:, None], data.x[:, None], beta, gamma
        )

    def moment_summary(self, data: IntervalData, thetas) -> MomentSummary:
        """Exact summaries from sample covariances; each moment is affine in ``theta``.

        Moment ``j`` is ``a_j + s_j(theta) c_j`` with ``s = (beta, beta,
        beta + gamma, beta + gamma)``. Points where the variance nearly
        cancels are recomputed directly so the degenerate-variance rule sees
        the same numbers as :func:`summarize`.
        """
        thetas = np.atleast_2d(np.asarray(thetas, dtype=float))
        d1 = data.x
        d0 = 1.0 - d1
        a = np.column_stack([d0 * data.z1_tilde, -d0 * data.z2_tilde, d1 * data.z1_tilde, -d1 * data.z2_tilde])
        c = np.column_stack([-d0, d0, -d1, d1])
        abar, cbar = a.mean(axis=0), c.mean(axis=0)
        au, cu = a - abar, c - cbar
        vaa, vac, vcc = (au * au).mean(axis=0), (au * cu).mean(axis=0), (cu * cu).mean(axis=0)
        level = thetas[:, 0] + thetas[:, 1]
        s = np.column_stack([thetas[:, 0], thetas[:, 0], level, level])
        mbar = abar + s * cbar
        scale = vaa + 2 * np.abs(s * vac) + s * s * vcc
        var = vaa + 2 * s * vac + s * s * vcc
        sigma = np.sqrt(np.maximum(var, 0.0))
        shaky = np.flatnonzero(np.any(var <= 1e-6 * scale, axis=1))
        if shaky.size:
            direct = summarize(self.moment_matrix(data, thetas[shaky]))
            mbar[shaky], sigma[shaky] = direct.mbar, direct.sigma_hat
        return MomentSummary(mbar, sigma, len(data))

    # counterfactual side -------------------------------------------------

    def context_from_data(self, data: IntervalData) -> CounterfactualContext:
        """Empirical covariate law of the sample with this model's thresholds."""
        rows = np.column_stack([np.ones(len(data)), data.x, np.full(len(data), self.z1), np.full(len(data), self.z2)])
        return CounterfactualContext.empirical(rows, self.eps_scale)

    def lrr_criterion(self, data: IntervalData, context: CounterfactualContext | None = None):
        return IntervalLrr(context or self.context_from_data(data))

    def state_space(self, theta, context: CounterfactualContext, eta: EtaGrid | None = None,
                    nodes_per_piece: int = 8) -> StateSpace:
        """Discretize ``w = (x1, z1, z2, eps)`` around the censoring point of each atom."""
        eta = eta or eta_grid(101, self.eta_kind)
        theta = np.asarray(theta, dtype=float)
        weights, rhos = [], []
        for atom, wa in zip(context.atoms, context.weights):
            x1, z1, z2 = atom[:-2], atom[-2], atom[-1]
            cut = z1 - x1 @ theta
            eps, we = normal_quadrature([cut], context.eps_scale, nodes_per_piece)
            rho = interval_rho(x1, z1, z2, eps[:, None], eta.nodes[None, :], theta)
            weights.append(wa * we)
            rhos.append(rho)
        return StateSpace(np.concatenate(weights), eta, np.concatenate(rhos)[..., None])


class IntervalLrr:
    """Closed-form criterion over a fixed counterfactual context."""

    def __init__(self, context: CounterfactualContext):
        self.context = context

    def evaluate(self, theta) -> float:
        return q_lrr_interval(theta, self.context.atoms, self.context.weights, eps_scale=self.context.eps_scale)

    def evaluate_grid(self, thetas) -> np.ndarray:
        thetas = np.atleast_2d(np.asarray(thetas, dtype=float))
        a = self.context.atoms
        x1, z1, z2 = a[:, :-2], a[:, -2], a[:, -1]
        index = thetas @ x1.T
        tail = norm_sf((z1[None, :] - index) / self.context.eps_scale)
        return tail @ (self.context.weights * (z1 - z2) ** 2) / 12.0
