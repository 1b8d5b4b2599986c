import numpy as np
import pytest

from lrrinfer.lrr import DiscretizedSelectionRule, aso, q_lrr_generic
from lrrinfer.models import (
    EntryGame,
    EntryParameters,
    IntervalData,
    IntervalModel,
    SignConfigurationError,
    entry_rho,
    interval_moments,
    interval_rho,
    multiplicity_probability,
    q_lrr_entry,
    q_lrr_interval,
    regions,
)
from lrrinfer.normal import norm_cdf
from lrrinfer.statespace import CounterfactualContext, eta_grid

MC_DRAWS = 2_000_000


# interval model ---------------------------------------------------------------


def test_interval_moment_examples():
    np.testing.assert_array_equal(interval_moments(3.0, 4.0, 1, 2.0, 0.5)[:2], [0, 0])
    np.testing.assert_array_equal(interval_moments(2.0, 2.0, 0, 2.0, 1.0), [0, 0, 0, 0])
    np.testing.assert_allclose(interval_moments(2.3, 4.5, 1, 2.0, 1.0), [0, 0, -0.7, -1.5], atol=1e-15)


def test_interval_data_validation():
    with pytest.raises(ValueError):
        IntervalData([3.0], [2.0], [0])
    with pytest.raises(ValueError):
        IntervalData([1.0], [2.0], [0.5])
    with pytest.raises(ValueError):
        IntervalData([1.0, 2.0], [2.0], [0])


def test_topcoding_boundary_stays_uncensored():
    d = IntervalData.from_latent([2.3, 2.31, 1.0], [0, 1, 1], 2.3, 4.5)
    assert d.censored.tolist() == [False, True, False]
    assert d.z1_tilde[1] == 2.3 and d.z2_tilde[1] == 4.5


def test_rho_branches():
    x1, theta = np.array([1.0, 0.0]), np.array([2.0, 1.0])
    assert interval_rho(x1, 2.3, 4.5, 0.3, 0.4, theta) == 2.3
    assert interval_rho(x1, 2.3, 4.5, 1.0, 1.0, theta) == 2.3
    assert interval_rho(x1, 2.3, 4.5, 1.0, 0.0, theta) == 4.5
    assert interval_rho(x1, 2.3, 4.5, -0.5, 0.9, theta) == 1.5


def test_interval_q_zero_width():
    assert q_lrr_interval([2.0, 1.0], [[1, 0, 2.3, 2.3], [1, 1, 3.0, 3.0]]) == 0.0


def test_interval_q_single_atom_against_simulation():
    closed = q_lrr_interval([2.0, 1.0], [[1, 0, 2.3, 4.5]])
    assert closed == pytest.approx(2.2 ** 2 / 12 * (1 - norm_cdf(0.3)), rel=1e-14)
    # E_eps Var_eta rho, via the unbiased pair estimator (rho(eta) - rho(eta'))^2 / 2
    rng = np.random.default_rng(0)
    eps = rng.standard_normal(MC_DRAWS)
    e1, e2 = rng.random(MC_DRAWS), rng.random(MC_DRAWS)
    x1, th = np.array([1.0, 0.0]), np.array([2.0, 1.0])
    r1 = interval_rho(x1, 2.3, 4.5, eps, e1, th)
    r2 = interval_rho(x1, 2.3, 4.5, eps, e2, th)
    assert np.mean((r1 - r2) ** 2 / 2) == pytest.approx(closed, rel=5e-3)
    assert closed == pytest.approx(0.1541, abs=5e-5)


def _one_atom():
    return CounterfactualContext([[1, 0, 2.3, 4.5]], [1.0])


def test_aso_single_atom_against_simulation():
    model = IntervalModel(2.3, 4.5)
    value = aso(model, [2.0, 1.0], DiscretizedSelectionRule.uniform(eta_grid(101)), _one_atom())[0]
    rng = np.random.default_rng(1)
    sim = interval_rho(np.array([1.0, 0.0]), 2.3, 4.5, rng.standard_normal(MC_DRAWS), rng.random(MC_DRAWS), [2.0, 1.0])
    se = sim.std() / np.sqrt(MC_DRAWS)
    assert abs(value - sim.mean()) < 4 * se
    exact = 2 * norm_cdf(0.3) - np.exp(-0.045) / np.sqrt(2 * np.pi) + (1 - norm_cdf(0.3)) * 3.4
    assert value == pytest.approx(exact, rel=1e-9)


def test_aso_without_topcoding_is_linear_index():
    model = IntervalModel(1e9, 2e9)
    ctx = CounterfactualContext([[1, 0, 1e9, 2e9], [1, 1, 1e9, 2e9]], [0.25, 0.75])
    eta = eta_grid(11)
    g = DiscretizedSelectionRule(eta, np.linspace(0.5, 1.5, 11))
    assert aso(model, [2.0, 1.0], g, ctx)[0] == pytest.approx(2.75, abs=1e-9)
    assert q_lrr_generic(model, [2.0, 1.0], ctx, m=11) == pytest.approx(0.0, abs=1e-12)


def test_aso_depends_on_rule_only_through_censoring():
    model = IntervalModel(2.3, 4.5)
    eta = eta_grid(21)
    low = DiscretizedSelectionRule(eta, 2 * eta.nodes)
    high = DiscretizedSelectionRule(eta, 2 * (1 - eta.nodes))
    a, b = aso(model, [2.0, 1.0], low, _one_atom()), aso(model, [2.0, 1.0], high, _one_atom())
    # more weight on eta near 1 pulls censored outcomes towards z1
    assert a[0] < b[0]


def test_model_context_from_data():
    data = IntervalData.from_latent([1.0, 3.0, 2.0, 2.0], [0, 1, 1, 0], 2.3, 4.5)
    ctx = IntervalModel(2.3, 4.5).context_from_data(data)
    np.testing.assert_allclose(ctx.weights, [0.5, 0.5])
    crit = IntervalModel(2.3, 4.5).lrr_criterion(data)
    thetas = np.array([[2.0, 1.0], [1.0, 0.0]])
    np.testing.assert_allclose(crit.evaluate_grid(thetas), [crit.evaluate(t) for t in thetas], rtol=1e-14)


# entry game -------------------------------------------------------------------

DET = EntryParameters(-1.0, -1.0, (0.0,), (0.0,))
X = np.array([1.0])


def test_entry_regions_and_outcomes():
    assert regions(X, -2.0, -2.0, DET)["A2"]
    np.testing.assert_array_equal(entry_rho(X, -2.0, -2.0, 0.3, DET), [1, 1])
    assert regions(X, 1.0, 1.0, DET)["A1"]
    np.testing.assert_array_equal(entry_rho(X, 1.0, 1.0, 0.3, DET), [0, 0])


def test_multiple_equilibria_selection():
    r = regions(X, -0.5, -0.5, DET)
    assert r["A3"] and r["A4"]
    np.testing.assert_array_equal(entry_rho(X, -0.5, -0.5, 1.0, DET), [1, 0])
    np.testing.assert_array_equal(entry_rho(X, -0.5, -0.5, 0.0, DET), [0, 1])


def test_unique_monopoly_outcomes():
    # firm 1 enters alone, firm 2 cannot profitably enter whatever firm 1 does
    np.testing.assert_array_equal(entry_rho(X, -0.5, 0.5, 0.0, DET), [1, 0])
    np.testing.assert_array_equal(entry_rho(X, 0.5, -0.5, 1.0, DET), [0, 1])


def test_sign_configuration():
    with pytest.raises(SignConfigurationError):
        entry_rho(X, 0.0, 0.0, 0.5, EntryParameters(0.5, -1.0, (0.0,), (0.0,)))
    with pytest.raises(SignConfigurationError):
        multiplicity_probability(X, EntryParameters(-1.0, 0.2, (0.0,), (0.0,)))


def test_no_interaction_gives_zero():
    p = EntryParameters(0.0, -1.0, (0.3,), (0.1,))
    assert multiplicity_probability(X, p) == 0.0
    assert q_lrr_entry(EntryParameters(0.0, 0.0, (0.0,), (0.0,)), [X]) == 0.0


def test_multiplicity_against_simulation():
    closed = multiplicity_probability(X, DET)
    assert closed == pytest.approx((0.5 - norm_cdf(-1.0)) ** 2, rel=1e-14)
    assert closed == pytest.approx(0.11652, abs=1e-5)
    e = np.random.default_rng(2).standard_normal((MC_DRAWS, 2))
    r = regions(X, e[:, 0], e[:, 1], DET)
    assert np.mean(r["A3"] & r["A4"]) == pytest.approx(closed, abs=1.5e-3)


def test_entry_q_against_simulation():
    closed = q_lrr_entry(DET, [X])
    assert closed == pytest.approx(0.0583, abs=5e-5)
    # half the probability of the multiplicity rectangle, by direct simulation
    e = np.random.default_rng(3).standard_normal((MC_DRAWS, 2))
    r0 = entry_rho(X, e[:, 0], e[:, 1], 0.0, DET)
    r1 = entry_rho(X, e[:, 0], e[:, 1], 1.0, DET)
    # with mu uniform on {0, 1}: deviation from the mean is +-(r1 - r0) / 2
    sim = np.mean(np.sum((r1 - r0) ** 2, axis=1) / 4)
    assert sim == pytest.approx(closed, abs=1e-3)


def test_entry_generic_matches_closed_form():
    ctx = CounterfactualContext([[1.0, 0.5], [1.0, -1.0]], [0.3, 0.7])
    p = EntryParameters(-0.7, -1.4, (0.2, 0.5), (-0.1, 0.3))
    assert q_lrr_generic(EntryGame(), p, ctx) == pytest.approx(q_lrr_entry(p, ctx.atoms, ctx.weights), rel=1e-12)


def test_entry_theta_round_trip():
    p = EntryParameters(-0.7, -1.4, (0.2, 0.5), (-0.1, 0.3))
    assert EntryParameters.from_theta(p.theta) == p
    with pytest.raises(ValueError):
        EntryParameters.from_theta([1.0, 2.0, 3.0])
