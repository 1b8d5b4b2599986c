"""Finite discretizations of the external variables and the reduced-form index.

The robustness criterion integrates the structural function over the
counterfactual law of ``w = (x, eps)`` and over a dominating measure ``mu``
for the index ``eta``. Here both are replaced by weighted atoms, which turns
the space of selection-rule densities into a finite weighted inner-product
space with ``<h1, h2> = sum_w f_w sum_k mu_k h1[w, k] h2[w, k]``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .normal import norm_cdf, norm_pdf


@dataclass(frozen=True)
class EtaGrid:
    nodes: np.ndarray
    mu: np.ndarray
    kind: str

    @property
    def m(self) -> int:
        return self.nodes.size


def eta_grid(m: int = 101, kind: str = "midpoint") -> EtaGrid:
    """Discretized ``eta`` support with uniform ``mu`` weights.

    ``midpoint`` places ``m`` equal bins on ``[0, 1]`` at their centres.
    ``binary`` is the two-point support ``{0, 1}`` with mass 1/2 each and
    ignores ``m``.
    """
    if kind == "midpoint":
        if m < 1:
            raise ValueError("need at least one eta bin")
        nodes = (np.arange(m) + 0.5) / m
        return EtaGrid(nodes, np.full(m, 1.0 / m), kind)
    if kind == "binary":
        return EtaGrid(np.array([0.0, 1.0]), np.array([0.5, 0.5]), kind)
    raise ValueError(f"unknown eta grid kind {kind!r}")


@dataclass(frozen=True)
class CounterfactualContext:
    """Atoms of the counterfactual covariate law plus the error scale.

    ``atoms`` rows are model specific; ``weights`` must sum to one.
    """

    atoms: np.ndarray
    weights: np.ndarray
    eps_scale: float = 1.0

    def __post_init__(self):
        atoms = np.atleast_2d(np.asarray(self.atoms, dtype=float))
        weights = np.asarray(self.weights, dtype=float).ravel()
        if atoms.shape[0] != weights.size:
            raise ValueError("one weight per atom required")
        if np.any(weights < 0) or not np.isclose(weights.sum(), 1.0, rtol=0, atol=1e-12):
            raise ValueError("atom weights must be nonnegative and sum to one")
        if not self.eps_scale > 0:
            raise ValueError("eps_scale must be positive")
        object.__setattr__(self, "atoms", atoms)
        object.__setattr__(self, "weights", weights)

    @classmethod
    def empirical(cls, rows, eps_scale: float = 1.0) -> "CounterfactualContext":
        """Distinct rows with their empirical frequencies, in sorted order."""
        rows = np.atleast_2d(np.asarray(rows, dtype=float))
        uniq, counts = np.unique(rows, axis=0, return_counts=True)
        return cls(uniq, counts / counts.sum(), eps_scale)

    def to_dict(self) -> dict:
        return {"atoms": self.atoms.tolist(), "weights": self.weights.tolist(), "eps_scale": self.eps_scale}


def normal_quadrature(breaks, scale: float = 1.0, nodes_per_piece: int = 8, subdivide: bool = True,
                      tail: float = 10.0):
    """Nodes and weights for integrating against ``N(0, scale^2)``.

    The real line is cut at ``breaks`` (and, with ``subdivide``, at every
    integer multiple of ``scale`` inside ``[-tail, tail]`` standard
    deviations). Each piece gets Gauss-Legendre nodes weighted by the normal
    density, renormalized so the piece's weights sum exactly to its
    probability. Integrands that are smooth on every piece are then
    integrated to near machine precision, and piecewise constant ones
    exactly.
    """
    z_breaks = np.asarray(breaks, dtype=float).ravel() / scale
    cuts = [c for c in z_breaks if np.isfinite(c)]
    if subdivide:
        cuts.extend(np.arange(-tail + 1, tail))
    cuts = np.unique(np.asarray(cuts, dtype=float))
    edges = np.concatenate([[-np.inf], cuts, [np.inf]])
    gl_x, gl_w = np.polynomial.legendre.leggauss(nodes_per_piece)
    nodes, weights = [], []
    for lo, hi in zip(edges[:-1], edges[1:]):
        mass = norm_cdf(hi) - norm_cdf(lo)
        if mass <= 0:
            continue
        a = max(lo, min(-tail, hi - 1.0))
        b = min(hi, max(tail, lo + 1.0))
        x = 0.5 * (b - a) * gl_x + 0.5 * (a + b)
        w = 0.5 * (b - a) * gl_w * norm_pdf(x)
        if w.sum() <= 0:
            x, w = np.array([0.5 * (a + b)]), np.array([1.0])
        nodes.append(x)
        weights.append(w * (mass / w.sum()))
    return np.concatenate(nodes) * scale, np.concatenate(weights)


@dataclass(frozen=True)
class StateSpace:
    """Structural function on a finite grid of ``(w, eta)`` states.

    ``rho`` has shape ``(N, m, C)`` for ``N`` atoms of ``w``, ``m`` eta
    nodes and ``C`` outcome components.
    """

    w_weights: np.ndarray
    eta: EtaGrid
    rho: np.ndarray

    @property
    def shape(self) -> tuple[int, int]:
        return self.rho.shape[0], self.rho.shape[1]

    def cell_weights(self) -> np.ndarray:
        return self.w_weights[:, None] * self.eta.mu[None, :]

    def inner(self, h1, h2) -> float:
        return float(np.sum(self.cell_weights() * h1 * h2))

    def norm(self, h) -> float:
        return float(np.sqrt(self.inner(h, h)))

    def deviation(self) -> np.ndarray:
        """``rho`` minus its ``mu``-average over eta, per atom and component."""
        mean = np.einsum("wkc,k->wc", self.rho, self.eta.mu)
        return self.rho - mean[:, None, :]

    def q_lrr(self) -> float:
        dev = self.deviation()
        return float(np.einsum("wkc,wk->", dev * dev, self.cell_weights()))

    def aso(self, density) -> np.ndarray:
        """Counterfactual average outcome under selection density ``density``."""
        g = np.broadcast_to(np.asarray(density, dtype=float), self.shape)
        return np.einsum("wkc,wk->c", self.rho, self.cell_weights() * g)
