"""Locally robust refinement of an estimated set.

The robustness criterion of a parameter value is the average squared
deviation of the structural function from its ``mu``-mean over the
reduced-form index. Its square root is the worst-case rate at which the
counterfactual average outcome moves when the selection rule is perturbed;
:func:`sensitivity_oracle` checks that numerically by perturbing a
discretized selection rule.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import bootstrap as bs
from .grid import GridMask, ParameterGrid
from .moments import (
    ZERO_TOL,
    MomentModel,
    grid_moments,
    kappa_set_flags,
    normalized_moments,
    q_hat_from_normalized,
    summarize_points,
)
from .statespace import CounterfactualContext, EtaGrid, StateSpace, eta_grid


class InfeasiblePerturbationError(ValueError):
    pass


@dataclass(frozen=True)
class DiscretizedSelectionRule:
    """Density of ``eta`` with respect to ``mu`` on an eta grid.

    ``density`` is ``(m,)`` for a rule that ignores ``w`` or ``(N, m)`` for
    one density per atom of ``w``.
    """

    eta: EtaGrid
    density: np.ndarray

    def __post_init__(self):
        g = np.asarray(self.density, dtype=float)
        if g.shape[-1] != self.eta.m:
            raise ValueError("density needs one value per eta node")
        if np.any(g < 0):
            raise ValueError("density must be nonnegative")
        total = g @ self.eta.mu
        if not np.allclose(total, 1.0, rtol=0, atol=1e-9):
            raise ValueError("density must integrate to one against mu")
        object.__setattr__(self, "density", g)

    @classmethod
    def uniform(cls, eta: EtaGrid) -> "DiscretizedSelectionRule":
        return cls(eta, np.ones(eta.m))

    @classmethod
    def random(cls, eta: EtaGrid, n_atoms: int, rng: np.random.Generator, floor: float = 0.1):
        """Random strictly positive densities, one per atom."""
        raw = floor + rng.exponential(size=(n_atoms, eta.m))
        return cls(eta, raw / (raw @ eta.mu)[:, None])

    @property
    def m(self) -> int:
        return self.eta.m


def _state_space(model, theta, context, m=None, eta=None) -> StateSpace:
    if eta is None:
        eta = eta_grid(m or 101, getattr(model, "eta_kind", "midpoint"))
    return model.state_space(theta, context, eta)


def aso(model, theta, rule: DiscretizedSelectionRule, context: CounterfactualContext) -> np.ndarray:
    """Counterfactual average outcome under a discretized selection rule."""
    space = _state_space(model, theta, context, eta=rule.eta)
    return space.aso(rule.density)


def q_lrr_generic(model, theta, context: CounterfactualContext, m: int | None = None,
                  eta: EtaGrid | None = None) -> float:
    """Robustness criterion by direct integration of the squared deviation."""
    return _state_space(model, theta, context, m, eta).q_lrr()


class GenericLrr:
    """Criterion object evaluating :func:`q_lrr_generic` pointwise."""

    def __init__(self, model, context: CounterfactualContext, m: int = 101):
        self.model, self.context, self.m = model, context, m

    def evaluate(self, theta) -> float:
        return q_lrr_generic(self.model, theta, self.context, self.m)

    def evaluate_grid(self, thetas) -> np.ndarray:
        return np.array([self.evaluate(t) for t in np.atleast_2d(thetas)])


# sensitivity oracle -------------------------------------------------------


@dataclass
class SensitivityReport:
    q_lrr: float
    max_observed_ratio: float
    extremal_ratio: float
    n_perturbations: int
    K: float
    extremal_scale: float
    extremal_feasible: bool
    aso_base: list = field(default_factory=list)

    @property
    def bound(self) -> float:
        return float(np.sqrt(self.q_lrr))

    def to_dict(self) -> dict:
        return {
            "q_lrr": self.q_lrr,
            "sqrt_q_lrr": self.bound,
            "max_observed_ratio": self.max_observed_ratio,
            "extremal_ratio": self.extremal_ratio,
            "n_perturbations": self.n_perturbations,
            "K": self.K,
            "extremal_scale": self.extremal_scale,
            "extremal_feasible": self.extremal_feasible,
            "aso_base": list(self.aso_base),
        }


def _max_feasible_scale(g: np.ndarray, direction: np.ndarray) -> float:
    """Largest ``s`` with ``g + s * direction >= 0``."""
    neg = direction < 0
    if not neg.any():
        return np.inf
    return float(np.min(g[neg] / -direction[neg]))


def _ratio(space: StateSpace, g: np.ndarray, h: np.ndarray) -> float:
    change = space.aso(g + h) - space.aso(g)
    dist = space.norm(h)
    return float(np.linalg.norm(change) / dist)


def _extremal_direction(space: StateSpace) -> np.ndarray | None:
    """Unit-norm perturbation maximizing the change in the average outcome.

    For scalar outcomes this is the normalized deviation of the structural
    function; for vector outcomes the leading right singular vector of the
    map ``h -> <rho_c, h>``.
    """
    dev = space.deviation()
    n_out = dev.shape[-1]
    gram = np.array([[space.inner(dev[..., a], dev[..., b]) for b in range(n_out)] for a in range(n_out)])
    vals, vecs = np.linalg.eigh(gram)
    if vals[-1] <= 0:
        return None
    h = dev @ vecs[:, -1]
    return h / space.norm(h)


def sensitivity_oracle(model, theta, rule: DiscretizedSelectionRule | None, K: float, n_perturbations: int,
                       seed: int, context: CounterfactualContext, m: int | None = None) -> SensitivityReport:
    """Probe the worst-case sensitivity of the counterfactual average outcome.

    Random perturbations with zero ``mu``-mean per atom are scaled to the
    largest feasible size not exceeding ``K``. The maximum ratio
    ``|ASO(G + h) - ASO(G)| / delta(G + h, G)`` is recorded together with
    the ratio along the extremal direction.
    """
    if not K > 0:
        raise InfeasiblePerturbationError("K must be positive")
    if rule is None:
        rule = DiscretizedSelectionRule.uniform(eta_grid(m or 101, getattr(model, "eta_kind", "midpoint")))
    if rule.m < 2:
        raise InfeasiblePerturbationError("a selection rule on one eta state cannot be perturbed")
    space = _state_space(model, theta, context, eta=rule.eta)
    try:
        g = np.broadcast_to(rule.density, space.shape).copy()
    except ValueError:
        raise ValueError("per-atom density does not match the discretized atoms") from None
    q = space.q_lrr()
    mu = rule.eta.mu

    rng = bs.substream(seed, 0)
    best, used = 0.0, 0
    for _ in range(n_perturbations):
        d = rng.standard_normal(space.shape)
        d -= (d @ mu)[:, None]
        norm = space.norm(d)
        if norm == 0:
            continue
        d /= norm
        s = min(K, _max_feasible_scale(g, d))
        if not s > 0:
            continue
        best = max(best, _ratio(space, g, s * d))
        used += 1
    if used == 0:
        raise InfeasiblePerturbationError("no feasible perturbation found around the base rule")

    h_star = _extremal_direction(space)
    if h_star is None:
        ext, scale, feasible = 0.0, 0.0, True
    else:
        s_max = _max_feasible_scale(g, h_star)
        feasible = K <= s_max
        scale = min(K, s_max)
        ext = _ratio(space, g, scale * h_star) if scale > 0 else np.nan
    return SensitivityReport(q, best, ext, used, K, scale, feasible, space.aso(g).tolist())


# estimated refinement and confidence regions ---------------------------------


def lrr_upper_flags(grid: ParameterGrid, minus_flags: np.ndarray, plus_flags: np.ndarray,
                    q_lrr: np.ndarray, kappa: float) -> np.ndarray:
    """Upper refinement set for every beta block of the grid.

    Keeps ``gamma`` in the relaxed set (slack ``-kappa``) whose criterion is
    within ``2 kappa`` of the smallest criterion over the tightened set
    (slack ``+kappa``). An empty tightened set gives an infinite bound.
    """
    out = np.zeros(grid.size, dtype=bool)
    for b in range(grid.n_beta_points):
        sl = grid.beta_block(b)
        inner = plus_flags[sl]
        bound = q_lrr[sl][inner].min() if inner.any() else np.inf
        out[sl] = minus_flags[sl] & (q_lrr[sl] <= bound + 2 * kappa)
    return out


def gamma_lrr_upper(data, model: MomentModel, criterion, grid: ParameterGrid, beta, kappa: float) -> GridMask:
    """Upper refinement set over the gamma axes at one beta."""
    b = grid.beta_index_of(beta)
    thetas = grid.theta_array()[grid.beta_block(b)]
    s = summarize_points(data, model, thetas)
    gg = grid.gamma_grid()
    flags = lrr_upper_flags(gg, kappa_set_flags(s, -kappa), kappa_set_flags(s, kappa),
                            criterion.evaluate_grid(thetas), kappa)
    return GridMask(gg, flags)


@dataclass
class ConfidenceReport:
    grid: ParameterGrid
    method: str
    statistic: np.ndarray
    critical_value: np.ndarray
    q_lrr: np.ndarray
    identified: GridMask
    relaxed: GridMask
    lrr_upper: GridMask
    lrr: GridMask
    kappa: float
    kappa_hat: np.ndarray | None = None
    diagnostics: dict = field(default_factory=dict)

    def summary(self) -> dict:
        return {
            "method": self.method,
            "kappa": self.kappa,
            "n_grid": self.grid.size,
            "identified_count": self.identified.count(),
            "lrr_count": self.lrr.count(),
            "identified_empty": self.identified.is_empty(),
            "lrr_empty": self.lrr.is_empty(),
        }


METHODS = ("conservative", "bonferroni")


def confidence_sets(data, model: MomentModel, criterion, grid: ParameterGrid, plan: bs.BootstrapPlan,
                    stream: tuple[int, ...] = (), population_mean=None) -> dict[str, ConfidenceReport]:
    """Confidence regions under both critical-value schemes from one bootstrap pass.

    The criterion is evaluated once per grid point and shared by both
    reports.
    """
    m, summary = grid_moments(data, model, grid)
    z = normalized_moments(summary)
    stat = np.sqrt(summary.n) * q_hat_from_normalized(z, 0.0)
    minus = q_hat_from_normalized(z, -plan.kappa) <= ZERO_TOL
    plus = q_hat_from_normalized(z, plan.kappa) <= ZERO_TOL
    q_lrr = np.asarray(criterion.evaluate_grid(grid.theta_array()), dtype=float)
    upper = lrr_upper_flags(grid, minus, plus, q_lrr, plan.kappa)
    counts = bs.plan_counts(summary.n, plan, stream)
    cv = bs.critical_values(m, summary, plan, counts, population_mean=population_mean)

    reports = {}
    for method, crit in (("conservative", cv.c_conservative), ("bonferroni", cv.c_bonferroni)):
        ident = stat <= crit
        reports[method] = ConfidenceReport(
            grid=grid,
            method=method,
            statistic=stat,
            critical_value=crit,
            q_lrr=q_lrr,
            identified=GridMask(grid, ident),
            relaxed=GridMask(grid, minus),
            lrr_upper=GridMask(grid, upper),
            lrr=GridMask(grid, ident & upper),
            kappa=plan.kappa,
            kappa_hat=cv.kappa_hat if method == "bonferroni" else None,
            diagnostics=dict(cv.extra),
        )
    return reports


def confidence_set(data, model: MomentModel, criterion, grid: ParameterGrid, plan: bs.BootstrapPlan,
                   method: str = "conservative", stream: tuple[int, ...] = ()) -> ConfidenceReport:
    if method not in METHODS:
        raise ValueError(f"method must be one of {METHODS}")
    return confidence_sets(data, model, criterion, grid, plan, stream)[method]
