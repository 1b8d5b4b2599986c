"""Monte Carlo coverage experiments for the top-coded linear model.

Data: ``x ~ Bernoulli(0.5)``, ``eps ~ N(0, 1)``,
``Y* = beta0 + gamma0 x + eps``, top-coded at ``z1`` with bracket
``[z1, z2]``. Two designs are predefined: ``SPEC1`` (moments close to
binding) and ``SPEC2`` (wide bracket, moments far from binding).
"""

from __future__ import annotations

import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np

from . import bootstrap as bs
from .grid import GridMask, ParameterGrid
from .lrr import confidence_sets
from .models.interval import IntervalData, IntervalModel
from .normal import norm_cdf, norm_pdf
from .statespace import CounterfactualContext

TRUNCATIONS = ("none", "reject")
_DATA_STREAM = 1
_BOOT_STREAM = 2


@dataclass(frozen=True)
class McSpec:
    beta0: float
    gamma0: float
    z1: float
    z2: float
    n: int = 200
    R: int = 200
    plan: bs.BootstrapPlan = field(default_factory=bs.BootstrapPlan)
    p: float = 0.5
    truncation: str = "none"

    def __post_init__(self):
        if not self.z1 < self.z2:
            raise ValueError("need z1 < z2")
        if self.n < 2 or self.R < 1:
            raise ValueError("need n >= 2 and R >= 1")
        if self.truncation not in TRUNCATIONS:
            raise ValueError(f"truncation must be one of {TRUNCATIONS}")

    @property
    def model(self) -> IntervalModel:
        return IntervalModel(self.z1, self.z2)

    def to_dict(self) -> dict:
        return {
            "beta0": self.beta0, "gamma0": self.gamma0, "z1": self.z1, "z2": self.z2,
            "n": self.n, "R": self.R, "p": self.p, "truncation": self.truncation,
            "plan": self.plan.to_dict(),
        }


SPEC1 = McSpec(beta0=2.0, gamma0=1.0, z1=2.3, z2=4.5)
SPEC2 = McSpec(beta0=2.0, gamma0=1.0, z1=1.0, z2=5.0)
SPECS = {1: SPEC1, 2: SPEC2}

# Desk-scale display grids; the identified sets sit well inside them.
DEFAULT_GRIDS = {
    1: ParameterGrid.from_bounds(beta=[(1.2, 3.2, 41)], gamma=[(-1.2, 2.8, 41)]),
    2: ParameterGrid.from_bounds(beta=[(0.0, 5.0, 51)], gamma=[(-4.5, 5.5, 51)]),
}


def dgp_interval(spec: McSpec, seed: int, replicate: int) -> IntervalData:
    """Simulate one dataset.

    With ``truncation="reject"`` the error of any row with ``Y* > z2`` is
    redrawn until ``Y* <= z2``; with ``"none"`` such rows keep the bracket
    ``[z1, z2]``.
    """
    rng = bs.substream(seed, _DATA_STREAM, replicate)
    x = (rng.random(spec.n) < spec.p).astype(float)
    mean = spec.beta0 + spec.gamma0 * x
    eps = rng.standard_normal(spec.n)
    if spec.truncation == "reject":
        bad = mean + eps > spec.z2
        while bad.any():
            eps[bad] = rng.standard_normal(int(bad.sum()))
            bad = mean + eps > spec.z2
    return IntervalData.from_latent(mean + eps, x, spec.z1, spec.z2)


def conditional_bracket_means(spec: McSpec) -> np.ndarray:
    """``[[E(Z1~|x=0), E(Z2~|x=0)], [E(Z1~|x=1), E(Z2~|x=1)]]`` under the design."""
    out = np.empty((2, 2))
    for x in (0, 1):
        mu = spec.beta0 + spec.gamma0 * x
        a = spec.z1 - mu
        if spec.truncation == "reject":
            mass = norm_cdf(spec.z2 - mu)
        else:
            mass = 1.0
        # E[Y* 1{Y* <= z1}] and P(z1 < Y* [<= z2])
        low = mu * norm_cdf(a) - norm_pdf(a)
        upper_mass = mass - norm_cdf(a)
        out[x, 0] = (low + spec.z1 * upper_mass) / mass
        out[x, 1] = (low + spec.z2 * upper_mass) / mass
    return out


def censoring_probability(spec: McSpec) -> float:
    probs = []
    for x in (0, 1):
        mu = spec.beta0 + spec.gamma0 * x
        mass = norm_cdf(spec.z2 - mu) if spec.truncation == "reject" else 1.0
        probs.append((mass - norm_cdf(spec.z1 - mu)) / mass)
    return float((1 - spec.p) * probs[0] + spec.p * probs[1])


def population_moments(spec: McSpec, thetas) -> np.ndarray:
    """Population means of the four inequalities, shape ``(G, 4)``."""
    thetas = np.atleast_2d(np.asarray(thetas, dtype=float))
    e = conditional_bracket_means(spec)
    beta, level1 = thetas[:, 0], thetas[:, 0] + thetas[:, 1]
    q0, q1 = 1 - spec.p, spec.p
    return np.column_stack([
        q0 * (e[0, 0] - beta),
        q0 * (beta - e[0, 1]),
        q1 * (e[1, 0] - level1),
        q1 * (level1 - e[1, 1]),
    ])


def population_identified_mask(spec: McSpec, grid: ParameterGrid) -> GridMask:
    return GridMask(grid, np.all(population_moments(spec, grid.theta_array()) <= 0, axis=1))


def interior_mask(mask: GridMask) -> GridMask:
    """Points whose whole 3x3 neighbourhood lies in ``mask`` (2-D grids)."""
    arr = mask.as_array()
    if arr.ndim != 2:
        raise ValueError("interior_mask needs a two-dimensional grid")
    pad = np.pad(arr, 1, constant_values=False)
    inner = np.ones_like(arr)
    for di in (-1, 0, 1):
        for dj in (-1, 0, 1):
            inner &= pad[1 + di:1 + di + arr.shape[0], 1 + dj:1 + dj + arr.shape[1]]
    return GridMask(mask.grid, inner.ravel())


def population_lrr_mask(spec: McSpec, grid: ParameterGrid, kappa: float = 0.0) -> GridMask:
    """Population refinement on the grid: per beta, gamma within ``kappa`` of the minimal criterion."""
    model = spec.model
    ident = population_identified_mask(spec, grid).flags
    ctx_rows = np.array([[1, 0, spec.z1, spec.z2], [1, 1, spec.z1, spec.z2]], dtype=float)
    crit = model.lrr_criterion(None, CounterfactualContext(ctx_rows, [1 - spec.p, spec.p]))
    q = crit.evaluate_grid(grid.theta_array())
    out = np.zeros(grid.size, dtype=bool)
    for b in range(grid.n_beta_points):
        sl = grid.beta_block(b)
        ok = ident[sl]
        if ok.any():
            out[sl] = ok & (q[sl] <= q[sl][ok].min() + kappa)
    return GridMask(grid, out)


# coverage ---------------------------------------------------------------------

KEYS = ("identified_conservative", "identified_bonferroni", "lrr_conservative", "lrr_bonferroni")


@dataclass
class CoverageGrid:
    grid: ParameterGrid
    R: int
    counts: dict
    cardinality: dict
    strict_containment: dict
    containment_violations: int
    oracle_hits: int
    oracle_total: int
    oracle_hits_per_point: np.ndarray
    elapsed: float = 0.0

    def frequencies(self) -> dict:
        return {k: v / self.R for k, v in self.counts.items()}

    def mean_cardinality(self) -> dict:
        return {k: float(np.mean(v)) for k, v in self.cardinality.items()}

    def summary(self) -> dict:
        return {
            "R": self.R,
            "mean_cardinality": self.mean_cardinality(),
            "strict_containment_fraction": {k: v / self.R for k, v in self.strict_containment.items()},
            "containment_violations": self.containment_violations,
            "critical_value_comparison_fraction": self.oracle_hits / max(self.oracle_total, 1),
            "elapsed_seconds": self.elapsed,
        }


def _one_replicate(args):
    spec, grid, r, pop_mean = args
    data = dgp_interval(spec, spec.plan.seed, r)
    model = spec.model
    crit = model.lrr_criterion(data)
    reports = confidence_sets(data, model, crit, grid, spec.plan, stream=(_BOOT_STREAM, r), population_mean=pop_mean)
    out = {}
    for method, rep in reports.items():
        out[f"identified_{method}"] = rep.identified.flags
        out[f"lrr_{method}"] = rep.lrr.flags
    bonf = reports["bonferroni"]
    out["oracle_ok"] = bonf.critical_value >= bonf.diagnostics["c_oracle"]
    return out


def run_coverage(spec_id, grid: ParameterGrid | None = None, plan: bs.BootstrapPlan | None = None,
                 R: int | None = None, n: int | None = None, workers: int = 1, spec: McSpec | None = None) -> CoverageGrid:
    """Per-grid-point coverage frequencies over ``R`` simulated datasets.

    Replicate ``r`` uses data stream ``(seed, 1, r)`` and bootstrap streams
    ``(seed, 2, r, b)``, so results do not depend on ``workers``.
    """
    if spec is None:
        if spec_id not in SPECS:
            raise ValueError("spec_id must be 1 or 2")
        spec = SPECS[spec_id]
    spec = replace(spec, **{k: v for k, v in (("plan", plan), ("R", R), ("n", n)) if v is not None})
    grid = grid or DEFAULT_GRIDS.get(spec_id)
    ident_pop = population_identified_mask(spec, grid).flags
    pop_mean = population_moments(spec, grid.theta_array())

    counts = {k: np.zeros(grid.size, dtype=np.int64) for k in KEYS}
    card = {k: np.zeros(spec.R, dtype=np.int64) for k in KEYS}
    strict = {"conservative": 0, "bonferroni": 0}
    violations = 0
    hits_pp = np.zeros(grid.size, dtype=np.int64)

    start = time.perf_counter()
    jobs = [(spec, grid, r, pop_mean) for r in range(spec.R)]
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = pool.map(_one_replicate, jobs, chunksize=max(1, spec.R // (4 * workers)))
            results = list(results)
    else:
        results = map(_one_replicate, jobs)
    for r, res in enumerate(results):
        for k in KEYS:
            counts[k] += res[k]
            card[k][r] = res[k].sum()
        for method in ("conservative", "bonferroni"):
            ident, lrr = res[f"identified_{method}"], res[f"lrr_{method}"]
            if np.any(lrr & ~ident):
                violations += 1
            if np.any(ident & ~lrr):
                strict[method] += 1
        hits_pp += res["oracle_ok"] & ident_pop
    elapsed = time.perf_counter() - start
    return CoverageGrid(
        grid=grid,
        R=spec.R,
        counts=counts,
        cardinality=card,
        strict_containment=strict,
        containment_violations=violations,
        oracle_hits=int(hits_pp.sum()),
        oracle_total=int(ident_pop.sum()) * spec.R,
        oracle_hits_per_point=hits_pp,
        elapsed=elapsed,
    )
