import math

import numpy as np
import pytest

from rareflow import Field, NoiseCoefficient
from rareflow.diffusion import validate_hypotheses
from rareflow.errors import DomainError, ValidationError
from rareflow.triple import TripleContext


@pytest.fixture(scope="module")
def ctx4(gen4_unit):
    return TripleContext(gen4_unit)


def test_apply_zero_direction(ctx4):
    b = NoiseCoefficient(ctx=ctx4, horizon=1.0)
    grid = ctx4.grid
    u = Field(grid, np.ones(grid.n))
    out = b.apply(0.3, u, Field.zeros(grid))
    assert not np.any(out.values)


def test_constant_coefficient_is_identity(ctx4):
    b = NoiseCoefficient(ctx=ctx4, c0=1.0, c1=0.0, c2=0.0, beta=0.0, horizon=1.0)
    rng = np.random.default_rng(0)
    grid = ctx4.grid
    u = Field(grid, rng.standard_normal(grid.n))
    v = Field(grid, rng.standard_normal(grid.n))
    out = b.apply(0.5, u, v)
    assert np.allclose(out.values, v.values, atol=1e-12)


def test_multiplicative_gain_hand_value(ctx4):
    # state with dual norm exactly 2 riding on the lam = -4 mode
    gen = ctx4.generator
    k = int(np.argmin(np.abs(gen.eigenvalues + 4.0)))
    e = gen.eigenmode(k)
    u = Field(gen.grid, 2.0 * math.sqrt(5.0) * e.values)
    assert ctx4.norm_fstar(u) == pytest.approx(2.0, rel=1e-12)
    b = NoiseCoefficient(ctx=ctx4, c0=1.0, c1=0.5, c2=0.0, beta=1.0, horizon=1.0)
    out = b.apply(0.2, u, e)
    assert np.allclose(out.values, 0.4 * e.values, rtol=1e-12, atol=1e-13)


def test_time_domain_error(ctx4):
    b = NoiseCoefficient(ctx=ctx4, horizon=1.0)
    u = Field(ctx4.grid, np.ones(ctx4.grid.n))
    with pytest.raises(DomainError):
        b.apply(1.5, u, u)
    with pytest.raises(DomainError):
        b.apply(-0.1, u, u)


def test_hs_norm_values(ctx4):
    grid = ctx4.grid
    u = Field.zeros(grid)
    silent = NoiseCoefficient(ctx=ctx4, c0=0.0, c1=0.0, c2=0.0, horizon=1.0)
    assert silent.hs_norm(0.0, u) == 0.0
    plain = NoiseCoefficient(ctx=ctx4, c0=1.0, c1=0.0, c2=0.0, beta=0.0, horizon=1.0)
    assert plain.hs_norm(0.5, u) == pytest.approx(math.sqrt(28.0 / 15.0), rel=1e-12)


def test_hs_norm_scales_with_state(ctx4):
    gen = ctx4.generator
    b = NoiseCoefficient(ctx=ctx4, c0=0.0, c1=0.7, c2=0.0, horizon=1.0)
    u = Field(gen.grid, gen.eigenmode(1).values)
    u2 = Field(gen.grid, 2.0 * u.values)
    assert b.hs_norm(0.1, u2) == pytest.approx(2.0 * b.hs_norm(0.1, u), rel=1e-12)


def test_hs_norm_matches_assembled_matrix(ctx32, noise32):
    rng = np.random.default_rng(7)
    u = Field(ctx32.grid, rng.standard_normal(ctx32.grid.n))
    for t in (0.0, 0.4, 1.0):
        direct = noise32.hs_norm(t, u)
        assembled = ctx32.hs_norm_to_fstar(noise32.as_matrix(t, u), nu=1.0)
        assert direct == pytest.approx(assembled, rel=1e-10)


def test_state_independent_when_c1_zero(ctx32):
    b = NoiseCoefficient(ctx=ctx32, c0=1.0, c1=0.0, c2=0.5, horizon=1.0)
    rng = np.random.default_rng(8)
    v = Field(ctx32.grid, rng.standard_normal(ctx32.grid.n))
    u1 = Field(ctx32.grid, rng.standard_normal(ctx32.grid.n))
    u2 = Field(ctx32.grid, 100.0 * rng.standard_normal(ctx32.grid.n))
    out1 = b.apply(0.3, u1, v)
    out2 = b.apply(0.3, u2, v)
    assert np.array_equal(out1.values, out2.values)


def test_gain_is_lipschitz_in_dual_norm(ctx32, noise32):
    rng = np.random.default_rng(9)
    for _ in range(200):
        u = Field(ctx32.grid, rng.standard_normal(32))
        v = Field(ctx32.grid, rng.standard_normal(32))
        lhs = abs(noise32.gain(u.values) - noise32.gain(v.values))
        rhs = noise32.c1 * ctx32.norm_fstar(Field(ctx32.grid, u.values - v.values))
        assert lhs <= rhs * (1.0 + 1e-12) + 1e-15


def test_validate_hypotheses_default_family(ctx32, noise32):
    rep = validate_hypotheses(noise32, samples=10_000, seed=0)
    assert rep.passed
    assert min(rep.margins().values()) >= -1e-12


def test_trivial_margins(ctx32, noise32):
    # u = v and t1 = t2 give zero left-hand sides
    u = Field(ctx32.grid, np.ones(32))
    assert noise32.theta(0.3) == noise32.theta(0.3)
    assert noise32.gain(u.values) == noise32.gain(u.values)


def test_parameter_validation(ctx32):
    with pytest.raises(ValidationError):
        NoiseCoefficient(ctx=ctx32, c0=-1.0, horizon=1.0)
    with pytest.raises(ValidationError):
        NoiseCoefficient(ctx=ctx32, gamma=0.0, horizon=1.0)
    with pytest.raises(ValidationError):
        NoiseCoefficient(ctx=ctx32, gamma=1.2, horizon=1.0)
    with pytest.raises(ValidationError):
        NoiseCoefficient(ctx=ctx32, horizon=0.0)
