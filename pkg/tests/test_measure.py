import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from rareflow import Field, MeasureGrid, inner_l2, norm_l2
from rareflow.errors import DimensionError, ValidationError


def test_zero_fields_have_zero_inner_product():
    grid = MeasureGrid.from_weights([1.0, 2.0, 0.5])
    z = Field.zeros(grid)
    assert inner_l2(z, z) == 0.0


def test_orthogonal_indicators():
    grid = MeasureGrid.from_weights([1.0, 1.0])
    u = Field(grid, [1.0, 0.0])
    v = Field(grid, [0.0, 1.0])
    assert inner_l2(u, v) == 0.0


def test_weighted_sum_hand_value():
    grid = MeasureGrid.from_weights([0.5, 2.0])
    u = Field(grid, [2.0, 1.0])
    v = Field(grid, [1.0, 3.0])
    assert inner_l2(u, v) == pytest.approx(7.0, rel=1e-15)


def test_norm_examples():
    assert norm_l2(Field.zeros(MeasureGrid.from_weights([1.0, 1.0]))) == 0.0
    grid = MeasureGrid.from_weights([1.0, 1.0])
    assert norm_l2(Field(grid, [3.0, 4.0])) == pytest.approx(5.0, rel=1e-15)
    assert norm_l2(Field(MeasureGrid.from_weights([4.0]), [1.0])) == pytest.approx(2.0)


def test_grid_validation():
    with pytest.raises(ValidationError):
        MeasureGrid.from_weights([])
    with pytest.raises(ValidationError):
        MeasureGrid.from_weights([1.0, 0.0])
    with pytest.raises(ValidationError):
        MeasureGrid.from_weights([1.0, -2.0])
    with pytest.raises(ValidationError):
        MeasureGrid.from_weights([1.0, math.inf])


def test_field_validation():
    grid = MeasureGrid.from_weights([1.0, 1.0])
    with pytest.raises(DimensionError):
        Field(grid, [1.0])
    with pytest.raises(ValidationError):
        Field(grid, [1.0, math.nan])


def test_grid_mismatch_is_dimension_error():
    u = Field(MeasureGrid.from_weights([1.0, 1.0]), [1.0, 2.0])
    v = Field(MeasureGrid.from_weights([1.0, 2.0]), [1.0, 2.0])
    with pytest.raises(DimensionError):
        inner_l2(u, v)


def test_periodic_grid_mass():
    grid = MeasureGrid.periodic_1d(10, length=5.0)
    assert grid.total_mass == pytest.approx(5.0)
    assert grid.labels[1] - grid.labels[0] == pytest.approx(0.5)


# values small enough to square without overflow and floored away from the
# subnormal range so norms cannot underflow to zero
_component = st.floats(-1e3, 1e3).map(lambda x: 0.0 if abs(x) < 1e-6 else x)
_vectors = st.integers(min_value=1, max_value=12).flatmap(
    lambda n: st.tuples(
        st.lists(st.floats(1e-3, 1e3), min_size=n, max_size=n),
        st.lists(_component, min_size=n, max_size=n),
        st.lists(_component, min_size=n, max_size=n),
    )
)


@settings(max_examples=100, deadline=None)
@given(_vectors)
def test_cauchy_schwarz(data):
    w, uv, vv = data
    grid = MeasureGrid.from_weights(w)
    u, v = Field(grid, uv), Field(grid, vv)
    lhs = abs(inner_l2(u, v))
    rhs = norm_l2(u) * norm_l2(v)
    assert lhs <= rhs * (1.0 + 1e-12) + 1e-300


@settings(max_examples=100, deadline=None)
@given(_vectors)
def test_parallelogram_law(data):
    w, uv, vv = data
    grid = MeasureGrid.from_weights(w)
    u, v = np.asarray(uv), np.asarray(vv)
    s = norm_l2(Field(grid, u + v)) ** 2 + norm_l2(Field(grid, u - v)) ** 2
    t = 2.0 * (norm_l2(Field(grid, u)) ** 2 + norm_l2(Field(grid, v)) ** 2)
    assert s == pytest.approx(t, rel=1e-12, abs=1e-12)
