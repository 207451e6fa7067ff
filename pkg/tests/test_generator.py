import math

import numpy as np
import pytest
import scipy.linalg

from rareflow import Field, MeasureGrid, SpectralGenerator, norm_l2
from rareflow.errors import DomainError, ValidationError


def test_null_generator():
    grid = MeasureGrid.from_weights([1.0])
    g = SpectralGenerator.from_dense(grid, [[0.0]])
    assert g.eigenvalues.tolist() == [0.0]


def test_periodic_laplacian_closed_form_spectrum():
    # unit spacing, n = 4: eigenvalues -4 sin^2(pi k / n) = {0, -2, -4, -2}
    g = SpectralGenerator.periodic_laplacian(4, length=4.0)
    assert sorted(np.round(g.eigenvalues, 12).tolist()) == [-4.0, -2.0, -2.0, 0.0]
    n = 16
    g16 = SpectralGenerator.periodic_laplacian(n, length=float(n))
    expected = sorted(-4.0 * np.sin(np.pi * np.arange(n) / n) ** 2)
    assert np.allclose(sorted(g16.eigenvalues), expected, atol=1e-12)


def test_from_dense_matches_brute_force_eigensolve():
    # Schroedinger-type operator: weighted tridiagonal with a potential-like drift
    rng = np.random.default_rng(5)
    n = 12
    w = rng.uniform(0.5, 2.0, n)
    grid = MeasureGrid.from_weights(w)
    # build a generator from a symmetric weighted form: A = -D_mu^{-1} (G G^T)
    conduct = rng.uniform(0.2, 1.5, n)
    form = np.zeros((n, n))
    for i in range(n):
        j = (i + 1) % n
        form[i, i] += conduct[i]
        form[j, j] += conduct[i]
        form[i, j] -= conduct[i]
        form[j, i] -= conduct[i]
    a = -form / w[:, None]
    g = SpectralGenerator.from_dense(grid, a)
    # independent dense oracle on the symmetrized matrix
    root = np.sqrt(w)
    s = (root[:, None] * a) / root[None, :]
    oracle = np.sort(np.linalg.eigvalsh(0.5 * (s + s.T)))
    assert np.allclose(np.sort(g.eigenvalues), oracle, atol=1e-8)
    # reconstruction reproduces the matrix action
    v = rng.standard_normal(n)
    assert np.allclose(g.matrix @ v, a @ v, atol=1e-8 * max(1, np.abs(a @ v).max()))


def test_from_dense_rejects_asymmetry_and_positive_spectrum():
    grid = MeasureGrid.from_weights([1.0, 1.0])
    with pytest.raises(ValidationError, match="symmetric"):
        SpectralGenerator.from_dense(grid, [[0.0, 1.0], [0.0, 0.0]])
    with pytest.raises(ValidationError, match="negative semidefinite"):
        SpectralGenerator.from_dense(grid, [[1.0, 0.0], [0.0, -1.0]])


def test_tiny_positive_eigenvalues_are_clipped():
    grid = MeasureGrid.from_weights([1.0, 1.0])
    a = np.array([[5e-11, 0.0], [0.0, -1.0]])
    g = SpectralGenerator.from_dense(grid, a)
    assert g.eigenvalues.max() == 0.0


def test_semigroup_identity_and_constants(gen32):
    u = Field(gen32.grid, np.linspace(-1.0, 1.0, 32))
    out = gen32.semigroup_apply(0.0, u)
    assert np.allclose(out.values, u.values, atol=1e-14)
    const = Field(gen32.grid, np.ones(32))
    out = gen32.semigroup_apply(1.7, const)
    assert np.allclose(out.values, 1.0, atol=1e-12)


def test_semigroup_eigenmode_decay(gen4_unit):
    k = int(np.argmin(np.abs(gen4_unit.eigenvalues + 4.0)))
    e = gen4_unit.eigenmode(k)
    out = gen4_unit.semigroup_apply(0.25, e)
    assert np.allclose(out.values, math.exp(-1.0) * e.values, atol=1e-13)


def test_semigroup_contraction_and_property(gen32):
    rng = np.random.default_rng(0)
    u = Field(gen32.grid, rng.standard_normal(32))
    a = gen32.semigroup_apply(0.3, gen32.semigroup_apply(0.45, u))
    b = gen32.semigroup_apply(0.75, u)
    assert np.allclose(a.values, b.values, rtol=1e-10, atol=1e-12)
    assert norm_l2(gen32.semigroup_apply(0.75, u)) <= norm_l2(u) * (1 + 1e-12)
    with pytest.raises(DomainError):
        gen32.semigroup_apply(-0.1, u)


def test_fractional_powers(gen4_unit):
    same = gen4_unit.fractional(1.0)
    assert np.allclose(same.eigenvalues, gen4_unit.eigenvalues, atol=1e-12)
    half = gen4_unit.fractional(0.5)
    assert np.allclose(sorted(half.eigenvalues), sorted(-np.sqrt(-gen4_unit.eigenvalues)))
    for bad in (0.0, 1.5, -0.2):
        with pytest.raises(DomainError):
            gen4_unit.fractional(bad)


def test_fractional_subordination_per_mode(gen32):
    # semigroup of the fractional operator acts as exp(-t |lam|^a) per mode
    frac = gen32.fractional(0.5)
    k = 7
    e = gen32.eigenmode(k)
    out = frac.semigroup_apply(0.4, e)
    lam = gen32.eigenvalues[k]
    assert np.allclose(out.values, math.exp(-0.4 * abs(lam) ** 0.5) * e.values, atol=1e-12)


def test_resolvent(gen4_unit, gen32):
    k0 = int(np.argmin(np.abs(gen4_unit.eigenvalues)))
    e0 = gen4_unit.eigenmode(k0)
    out = gen4_unit.resolvent_apply(1.0, e0)
    assert np.allclose(out.values, e0.values, atol=1e-13)
    k4 = int(np.argmin(np.abs(gen4_unit.eigenvalues + 4.0)))
    e4 = gen4_unit.eigenmode(k4)
    out = gen4_unit.resolvent_apply(1.0, e4)
    assert np.allclose(out.values, 0.2 * e4.values, atol=1e-13)
    rng = np.random.default_rng(1)
    u = Field(gen32.grid, rng.standard_normal(32))
    r = gen32.resolvent_apply(0.7, u)
    roundtrip = 0.7 * r.values - gen32.matrix @ r.values
    assert np.allclose(roundtrip, u.values, atol=1e-10)
    with pytest.raises(DomainError):
        gen32.resolvent_apply(0.0, u)


def test_one_minus_l_power(gen4_unit, gen32):
    k0 = int(np.argmin(np.abs(gen4_unit.eigenvalues)))
    e0 = gen4_unit.eigenmode(k0)
    for p in (-1.0, -0.5, 0.5, 1.0):
        out = gen4_unit.one_minus_l_power(p, e0)
        assert np.allclose(out.values, e0.values, atol=1e-13)
    k4 = int(np.argmin(np.abs(gen4_unit.eigenvalues + 4.0)))
    e4 = gen4_unit.eigenmode(k4)
    out = gen4_unit.one_minus_l_power(-0.5, e4)
    assert np.allclose(out.values, 5.0**-0.5 * e4.values, atol=1e-13)
    rng = np.random.default_rng(2)
    u = Field(gen32.grid, rng.standard_normal(32))
    back = gen32.one_minus_l_power(-0.5, gen32.one_minus_l_power(0.5, u))
    assert np.allclose(back.values, u.values, atol=1e-10)
    # p = 1 agrees with identity minus the dense action
    out = gen32.one_minus_l_power(1.0, u)
    assert np.allclose(out.values, u.values - gen32.matrix @ u.values, atol=1e-10)
    with pytest.raises(DomainError):
        gen32.one_minus_l_power(0.25, u)


def test_gamma_transform_spectral_identities(gen4_unit, gen32):
    k4 = int(np.argmin(np.abs(gen4_unit.eigenvalues + 4.0)))
    e4 = gen4_unit.eigenmode(k4)
    out = gen4_unit.gamma_transform(2.0, e4)
    assert np.allclose(out.values, 0.2 * e4.values, rtol=1e-7)
    rng = np.random.default_rng(3)
    u = Field(gen32.grid, rng.standard_normal(32))
    v1 = gen32.gamma_transform(1.0, u)
    v2 = gen32.one_minus_l_power(-0.5, u)
    assert np.allclose(v1.values, v2.values, rtol=1e-6, atol=1e-9)
    z = gen32.gamma_transform(1.5, Field.zeros(gen32.grid))
    assert not np.any(z.values)
    with pytest.raises(DomainError):
        gen32.gamma_transform(0.0, u)


def test_gamma_transform_composition(gen32):
    rng = np.random.default_rng(4)
    u = Field(gen32.grid, rng.standard_normal(32))
    a = gen32.gamma_transform(1.0, gen32.gamma_transform(1.0, u))
    b = gen32.gamma_transform(2.0, u)
    scale = max(1.0, float(np.abs(b.values).max()))
    assert np.abs(a.values - b.values).max() <= 2e-6 * scale


def test_gamma_transform_refinement_budget(gen32):
    from rareflow.errors import IntegrationError

    u = Field(gen32.grid, np.ones(32))
    with pytest.raises(IntegrationError, match="did not converge"):
        gen32.gamma_transform(1.0, u, max_levels=1)


def test_validate_submarkov_passes_for_markov_generators(gen32):
    rep = gen32.validate_submarkov([0.01, 0.1, 1.0], seed=11)
    assert rep.passed and rep.worst_violation <= 1e-10
    rep_half = gen32.fractional(0.5).validate_submarkov([0.01, 0.1, 1.0], seed=11)
    assert rep_half.passed


def test_validate_submarkov_catches_positivity_violation():
    # symmetric, conservative, negative semidefinite, but with a negative
    # off-diagonal rate: the matrix exponential develops negative entries
    grid = MeasureGrid.from_weights([1.0, 1.0, 1.0])
    a = np.array([[-2.0, -1.0, 3.0], [-1.0, -2.0, 3.0], [3.0, 3.0, -6.0]])
    g = SpectralGenerator.from_dense(grid, a)
    rep = g.validate_submarkov([0.05], seed=0)
    assert not rep.passed
    assert rep.worst["positivity_violation"] > 1e-6
    # independent confirmation by direct matrix exponential
    assert scipy.linalg.expm(0.05 * a).min() < -1e-6


def test_structural_invariants(gen32):
    assert gen32.orthonormality_defect() <= 1e-10
    assert gen32.symmetry_defect() <= 1e-10
