import numpy as np
import pytest

from rareflow import (
    Field,
    NoiseCoefficient,
    Nonlinearity,
    SpectralGenerator,
)
from rareflow.triple import TripleContext


@pytest.fixture(scope="session")
def gen32():
    return SpectralGenerator.periodic_laplacian(32)


@pytest.fixture(scope="session")
def ctx32(gen32):
    return TripleContext(gen32)


@pytest.fixture(scope="session")
def gen4_unit():
    # unit spacing: eigenvalues {0, -2, -2, -4}
    return SpectralGenerator.periodic_laplacian(4, length=4.0)


@pytest.fixture(scope="session")
def bump32(gen32):
    x = gen32.grid.labels
    return Field(gen32.grid, np.exp(-0.5 * ((x - np.pi) / 0.5) ** 2))


@pytest.fixture(scope="session")
def noise32(ctx32):
    return NoiseCoefficient(
        ctx=ctx32, c0=1.0, c1=0.5, c2=0.5, gamma=0.5, beta=1.0, horizon=1.0
    )


@pytest.fixture(scope="session")
def psi_default():
    return Nonlinearity.linear_plus_atan(0.5, 0.5)


def builtin_family():
    return [
        Nonlinearity.linear(1.0),
        Nonlinearity.atan_saturated(1.0),
        Nonlinearity.linear_plus_atan(0.5, 0.5),
        Nonlinearity.slope_clamped_power(2.0, 1.0),
    ]
