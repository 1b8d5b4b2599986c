import numpy as np
import pytest
from hypothesis import given, strategies as st

from lrrinfer.grid import Axis, GridMask, GridMismatchError, ParameterGrid, ParameterPoint, mask_subset


def test_corner_enumeration():
    g = ParameterGrid.from_bounds(beta=[(0, 1, 2)], gamma=[(0, 1, 2)])
    assert [tuple(p.theta) for p in g.enumerate()] == [(0, 0), (0, 1), (1, 0), (1, 1)]


def test_single_axis_progressions():
    assert Axis(2, 4, 3).values().tolist() == [2, 3, 4]
    assert Axis(0, 1, 5).values().tolist() == [0, 0.25, 0.5, 0.75, 1]


@pytest.mark.parametrize("lo,hi,steps", [(1, 1, 3), (2, 1, 3), (0, 1, 1)])
def test_axis_validation(lo, hi, steps):
    with pytest.raises(ValueError):
        Axis(lo, hi, steps)


def test_parameter_point_rejects_nan():
    with pytest.raises(ValueError):
        ParameterPoint((np.nan,), (0.0,))


def test_point_and_beta_blocks():
    g = ParameterGrid.from_bounds(beta=[(0, 2, 3)], gamma=[(-1, 1, 5)])
    assert g.shape == (3, 5) and g.size == 15
    p = g.point((1, 4))
    assert p.beta == (1.0,) and p.gamma == (1.0,)
    sl = g.beta_block(2)
    assert np.all(g.theta_array()[sl, 0] == 2.0)
    assert g.beta_index_of((1.0,)) == 1
    with pytest.raises(ValueError):
        g.beta_index_of((0.5,))
    assert g.gamma_grid().size == 5


def test_dict_round_trip():
    g = ParameterGrid.from_bounds(beta=[(1.2, 3.2, 41)], gamma=[(-1.2, 2.8, 41)])
    assert ParameterGrid.from_dict(g.to_dict()) == g


def test_subset_examples():
    g = ParameterGrid.from_bounds(beta=[(0, 1, 2)], gamma=[(0, 1, 2)])
    empty = GridMask.empty(g)
    b = GridMask(g, [True, False, True, True])
    assert mask_subset(empty, b)
    assert mask_subset(b, b)
    a = GridMask(g, [True, False, False, False])
    c = GridMask(g, [False, False, False, True])
    assert not mask_subset(a, c)


def test_mask_ops_require_same_grid():
    g1 = ParameterGrid.from_bounds(beta=[(0, 1, 2)], gamma=[(0, 1, 2)])
    g2 = ParameterGrid.from_bounds(beta=[(0, 1, 3)], gamma=[(0, 1, 2)])
    with pytest.raises(GridMismatchError):
        GridMask.full(g1) & GridMask.full(g2)
    with pytest.raises(GridMismatchError):
        GridMask.full(g1).issubset(GridMask.full(g2))


def test_mask_shape_checked():
    g = ParameterGrid.from_bounds(beta=[(0, 1, 2)], gamma=[(0, 1, 2)])
    with pytest.raises(ValueError):
        GridMask(g, [True])


@given(st.integers(2, 6), st.integers(2, 6), st.data())
def test_ravel_unravel_inverse(nb, ng, data):
    g = ParameterGrid.from_bounds(beta=[(0, 1, nb)], gamma=[(0, 1, ng)])
    flat = data.draw(st.integers(0, g.size - 1))
    assert g.ravel(g.unravel(flat)) == flat
    np.testing.assert_array_equal(g.point(flat).theta, g.theta_array()[flat])


@given(st.lists(st.booleans(), min_size=6, max_size=6), st.lists(st.booleans(), min_size=6, max_size=6))
def test_mask_algebra(fa, fb):
    g = ParameterGrid.from_bounds(beta=[(0, 1, 2)], gamma=[(0, 1, 3)])
    a, b = GridMask(g, fa), GridMask(g, fb)
    assert (a & b).issubset(a) and a.issubset(a | b)
    assert (a & b).count() + (a | b).count() == a.count() + b.count()
    assert len(a.points()) == a.count() == len(a.indices())
    assert a.as_array().shape == g.shape
