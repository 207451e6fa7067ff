import math

import numpy as np
import pytest

from conftest import builtin_family
from rareflow import Field, MeasureGrid, Nonlinearity, check_monotone_inequality
from rareflow.errors import ValidationError
from rareflow.nonlinearity import validate_drift_hypothesis


def test_linear_is_identity_on_fields():
    grid = MeasureGrid.from_weights([1.0, 1.0, 1.0])
    psi = Nonlinearity.linear(1.0)
    u = Field(grid, [-2.0, 0.0, 3.5])
    assert np.array_equal(psi.apply(u).values, u.values)


def test_atan_scalar_value():
    psi = Nonlinearity.atan_saturated(1.0)
    assert psi(1.0) == pytest.approx(math.pi / 4.0, rel=1e-12)


def test_every_builtin_vanishes_at_zero():
    for psi in builtin_family():
        assert psi(0.0) == 0.0
        grid = MeasureGrid.from_weights([1.0, 2.0])
        assert not np.any(psi.apply(Field.zeros(grid)).values)


def test_alpha_tilde_values():
    assert Nonlinearity.linear(1.0).alpha_tilde() == pytest.approx(0.5)
    assert Nonlinearity.zero().alpha_tilde() == pytest.approx(1.0)
    assert Nonlinearity.linear(3.0).alpha_tilde() == pytest.approx(0.25)


def test_monotone_inequality_linear_identity():
    # for a pure slope the gap is (1 - alpha_tilde (k)) ... spot check algebra
    psi = Nonlinearity.linear(1.0)
    a = psi.alpha_tilde()
    rng = np.random.default_rng(3)
    r, rp = rng.uniform(-5, 5, 100), rng.uniform(-5, 5, 100)
    gap = (psi(r) - psi(rp)) * (r - rp) - a * (psi(r) - psi(rp)) ** 2
    assert np.allclose(gap, (1.0 - a) * (r - rp) ** 2, rtol=1e-12, atol=1e-12)
    assert gap.min() >= 0.0


def test_monotone_inequality_equal_arguments():
    psi = Nonlinearity.atan_saturated(1.0)
    assert (psi(2.0) - psi(2.0)) * 0.0 == 0.0


def test_monotone_inequality_reports():
    for psi in builtin_family():
        rep = check_monotone_inequality(psi, samples=10_000, seed=1)
        assert rep.passed, (psi.kind, rep.worst_margin)
    rep = check_monotone_inequality(Nonlinearity.atan_saturated(1.0), samples=100_000, seed=2)
    assert rep.worst_margin >= 0.0


from hypothesis import given, settings
from hypothesis import strategies as st


@settings(max_examples=40, deadline=None)
@given(
    st.floats(0.0, 5.0),
    st.floats(0.0, 5.0),
    st.integers(min_value=0, max_value=2**31 - 1),
)
def test_monotone_inequality_across_family_parameters(k1, k2, seed):
    for psi in (
        Nonlinearity.linear(k1),
        Nonlinearity.atan_saturated(k2),
        Nonlinearity.linear_plus_atan(k1, k2),
    ):
        rep = check_monotone_inequality(psi, samples=500, seed=seed)
        assert rep.passed, (psi.kind, k1, k2, rep.worst_margin)


def test_sampled_monotone_and_lipschitz():
    for psi in builtin_family():
        rep = validate_drift_hypothesis(psi, samples=5_000, seed=4)
        assert rep.passed, psi.kind
        assert rep.monotone_margin >= -1e-12
        assert rep.lipschitz_margin >= -1e-12


def test_oddness():
    rng = np.random.default_rng(5)
    r = rng.uniform(-1e4, 1e4, 256)
    for psi in builtin_family():
        assert np.allclose(psi(-r), -psi(r), rtol=1e-12, atol=1e-300)


def test_linear_plus_atan_coercivity():
    psi = Nonlinearity.linear_plus_atan(0.5, 1.0)
    assert psi.coercivity_c == pytest.approx(0.5)
    r = np.concatenate([-np.geomspace(1e-6, 1e6, 50), np.geomspace(1e-6, 1e6, 50)])
    assert np.all(psi(r) * r >= psi.coercivity_c * r * r - 1e-9)


def test_atan_is_not_coercive():
    assert Nonlinearity.atan_saturated(1.0).coercivity_c is None


def test_clamped_power_is_globally_lipschitz():
    psi = Nonlinearity.slope_clamped_power(3.0, 2.0)
    assert psi.lipschitz_k == 2.0
    r = np.linspace(-50.0, 50.0, 20_001)
    dq = np.abs(np.diff(psi(r))) / np.diff(r)
    assert dq.max() <= 2.0 + 1e-9
    # pure power inside the clamp radius
    assert psi(0.5) == pytest.approx(0.125)


def test_clamped_power_extreme_exponent_stays_finite():
    # exponent barely above 1: the clamp radius leaves float range and the
    # power branch applies everywhere without overflow
    psi = Nonlinearity.slope_clamped_power(1.001, 10.0)
    vals = psi(np.array([-1e8, -1.0, 0.0, 1.0, 1e8]))
    assert np.all(np.isfinite(vals))
    assert vals[2] == 0.0
    rep = check_monotone_inequality(psi, samples=5_000, seed=6)
    assert rep.passed


def test_zero_nonlinearity_is_allowed():
    psi = Nonlinearity.zero()
    assert psi.is_zero and psi.lipschitz_k == 0.0
    assert psi(123.0) == 0.0


def test_declared_constant_validation():
    with pytest.raises(ValidationError):
        Nonlinearity(kind="linear", k1=2.0, lipschitz_k=1.0)
    with pytest.raises(ValidationError):
        Nonlinearity(kind="atan_saturated", k2=1.0, lipschitz_k=1.0, coercivity_c=0.5)
    with pytest.raises(ValidationError):
        Nonlinearity.slope_clamped_power(m=0.5, s_max=1.0)
