"""Two-firm complete-information entry game.

Firm ``i`` enters when ``beta_i D_{-i} + x'gamma_i >= eps_i``. With
``beta_1, beta_2 <= 0`` (entry deterrence) the error plane splits into

* ``A1``: nobody enters, ``(0, 0)``;
* ``A2``: both enter, ``(1, 1)``;
* ``A3``: ``(0, 1)`` is an equilibrium;
* ``A4``: ``(1, 0)`` is an equilibrium;

and on the rectangle ``A3 & A4`` both monopoly outcomes are equilibria.
There the index ``eta`` selects ``(1, 0)`` with weight ``eta`` and
``(0, 1)`` with weight ``1 - eta``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..normal import norm_cdf
from ..statespace import CounterfactualContext, EtaGrid, StateSpace, eta_grid, normal_quadrature


class SignConfigurationError(ValueError):
    """The region geometry is only derived for ``beta_1, beta_2 <= 0``."""


@dataclass(frozen=True)
class EntryParameters:
    beta1: float
    beta2: float
    gamma1: tuple[float, ...]
    gamma2: tuple[float, ...]

    def __post_init__(self):
        g1 = tuple(float(v) for v in np.atleast_1d(self.gamma1))
        g2 = tuple(float(v) for v in np.atleast_1d(self.gamma2))
        if len(g1) != len(g2):
            raise ValueError("gamma1 and gamma2 must have equal length")
        vals = np.array([self.beta1, self.beta2, *g1, *g2], dtype=float)
        if not np.all(np.isfinite(vals)):
            raise ValueError("entry parameters must be finite")
        object.__setattr__(self, "beta1", float(self.beta1))
        object.__setattr__(self, "beta2", float(self.beta2))
        object.__setattr__(self, "gamma1", g1)
        object.__setattr__(self, "gamma2", g2)

    @property
    def deterrence(self) -> bool:
        return self.beta1 <= 0 and self.beta2 <= 0

    def check_signs(self):
        if not self.deterrence:
            raise SignConfigurationError(
                f"region formulas need beta1, beta2 <= 0, got ({self.beta1}, {self.beta2})"
            )

    @property
    def theta(self) -> np.ndarray:
        return np.array([self.beta1, self.beta2, *self.gamma1, *self.gamma2])

    @classmethod
    def from_theta(cls, theta) -> "EntryParameters":
        theta = np.asarray(theta, dtype=float).ravel()
        k = (theta.size - 2) // 2
        if theta.size != 2 + 2 * k or k < 1:
            raise ValueError("theta must be (beta1, beta2, gamma1..., gamma2...)")
        return cls(theta[0], theta[1], tuple(theta[2:2 + k]), tuple(theta[2 + k:]))

    def indices(self, x) -> tuple[np.ndarray, np.ndarray]:
        x = np.atleast_2d(np.asarray(x, dtype=float))
        return x @ np.asarray(self.gamma1), x @ np.asarray(self.gamma2)


def regions(x, e1, e2, params: EntryParameters) -> dict[str, np.ndarray]:
    """Membership of ``(e1, e2)`` in ``A1..A4`` at covariate ``x``."""
    a1, a2 = params.indices(x)
    a1, a2 = (a1[0], a2[0]) if np.ndim(x) == 1 else (a1, a2)
    b1, b2 = params.beta1, params.beta2
    return {
        "A1": (a1 < e1) & (a2 < e2),
        "A2": (b1 + a1 >= e1) & (b2 + a2 >= e2),
        "A3": (b1 + a1 < e1) & (a2 >= e2),
        "A4": (a1 >= e1) & (b2 + a2 < e2),
    }


def entry_rho(x, e1, e2, eta, params: EntryParameters) -> np.ndarray:
    """Entry profile ``(D1, D2)``; shape ``broadcast(e1, e2, eta) + (2,)``."""
    params.check_signs()
    r = regions(x, e1, e2, params)
    d1 = r["A2"] + r["A4"] * eta + (r["A4"] & ~r["A3"]) * (1 - eta)
    d2 = r["A2"] + r["A3"] * (1 - eta) + (r["A3"] & ~r["A4"]) * eta
    d1, d2 = np.broadcast_arrays(np.asarray(d1, dtype=float), np.asarray(d2, dtype=float))
    return np.stack([d1, d2], axis=-1)


def multiplicity_probability(x, params: EntryParameters, rho_eps: float = 0.0) -> np.ndarray:
    """``P{(eps1, eps2) in A3 & A4}`` under independent standard normal errors."""
    params.check_signs()
    if rho_eps != 0.0:
        raise SignConfigurationError("only independent errors are supported")
    a1, a2 = params.indices(x)
    p = (norm_cdf(a1) - norm_cdf(a1 + params.beta1)) * (norm_cdf(a2) - norm_cdf(a2 + params.beta2))
    return p[0] if np.ndim(x) == 1 else p


def q_lrr_entry(params: EntryParameters, atoms, weights=None) -> float:
    """Closed-form criterion: half the average multiplicity probability."""
    atoms = np.atleast_2d(np.asarray(atoms, dtype=float))
    weights = np.full(atoms.shape[0], 1.0 / atoms.shape[0]) if weights is None else np.asarray(weights)
    return 0.5 * float(np.sum(weights * multiplicity_probability(atoms, params)))


class EntryGame:
    """Structural function of the entry game on the binary selection support.

    With ``eta`` on ``{0, 1}`` (each pure equilibrium selected with
    probability one) and uniform ``mu`` on the two points, the generic
    criterion equals :func:`q_lrr_entry`.
    """

    eta_kind = "binary"
    n_outputs = 2

    def state_space(self, theta, context: CounterfactualContext, eta: EtaGrid | None = None,
                    nodes_per_piece: int = 1) -> StateSpace:
        params = theta if isinstance(theta, EntryParameters) else EntryParameters.from_theta(theta)
        params.check_signs()
        eta = eta or eta_grid(2, self.eta_kind)
        weights, rhos = [], []
        for atom, wa in zip(context.atoms, context.weights):
            a1, a2 = params.indices(atom)
            # the regions are rectangles, so rho is constant on every cell
            e1, w1 = normal_quadrature([a1[0] + params.beta1, a1[0]], context.eps_scale, nodes_per_piece, subdivide=False)
            e2, w2 = normal_quadrature([a2[0] + params.beta2, a2[0]], context.eps_scale, nodes_per_piece, subdivide=False)
            E1, E2 = np.meshgrid(e1, e2, indexing="ij")
            rho = entry_rho(atom, E1.ravel()[:, None], E2.ravel()[:, None], eta.nodes[None, :], params)
            weights.append(wa * np.outer(w1, w2).ravel())
            rhos.append(rho)
        return StateSpace(np.concatenate(weights), eta, np.concatenate(rhos))

    def lrr_criterion(self, context: CounterfactualContext):
        return EntryLrr(context)


class EntryLrr:
    def __init__(self, context: CounterfactualContext):
        if context.eps_scale != 1.0:
            raise SignConfigurationError("closed form assumes unit-variance errors")
        self.context = context

    def evaluate(self, theta) -> float:
        params = theta if isinstance(theta, EntryParameters) else EntryParameters.from_theta(theta)
        return q_lrr_entry(params, self.context.atoms, self.context.weights)

    def evaluate_grid(self, thetas) -> np.ndarray:
        return np.array([self.evaluate(t) for t in np.atleast_2d(thetas)])
