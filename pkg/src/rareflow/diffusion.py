"""Noise coefficients: Hilbert-Schmidt maps from L2 into the dual scale.

The builtin family factors as B(t, u) = theta(t) * g(u) * K, where K is a
fixed spectral smoother with mode gains (1 - lambda_k)^{-beta}, the scalar
gain g(u) = c0 + c1 * |u|_{F*} is affine in the dual norm of the state, and
theta(t) = 1 + c2 * (t/T)^gamma is exactly gamma-Hoelder on [0, T].  The
Lipschitz, growth, and time-regularity constants of this family are available
in closed form, which makes the sampled validators sharp.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import cached_property

import numpy as np

from .errors import DimensionError, DomainError, ValidationError
from .measure import DualField, Field
from .nonlinearity import MARGIN_TOL
from .triple import TripleContext


@dataclass(frozen=True)
class NoiseCoefficient:
    """Multiplicative noise coefficient theta(t) * (c0 + c1 |u|_{F*}) * K."""

    ctx: TripleContext
    c0: float = 1.0
    c1: float = 0.5
    c2: float = 0.5
    gamma: float = 0.5
    beta: float = 1.0
    horizon: float = 1.0

    def __post_init__(self):
        for name in ("c0", "c1", "c2", "beta"):
            if getattr(self, name) < 0.0:
                raise ValidationError(f"{name} must be >= 0")
        if not (0.0 < self.gamma <= 1.0):
            raise ValidationError("gamma must lie in (0, 1]")
        if self.horizon <= 0.0:
            raise ValidationError("horizon must be > 0")

    # -- structure ----------------------------------------------------------

    @cached_property
    def mode_gains(self) -> np.ndarray:
        lam = self.ctx.generator.eigenvalues
        return (1.0 - lam) ** (-self.beta)

    @cached_property
    def smoother_hs_norm(self) -> float:
        """Hilbert-Schmidt norm of K alone as a map into the dual at shift 1."""
        lam = self.ctx.generator.eigenvalues
        return math.sqrt(float(np.sum(self.mode_gains**2 / (1.0 - lam))))

    @property
    def theta_sup(self) -> float:
        return 1.0 + self.c2

    @property
    def lipschitz_constant(self) -> float:
        return self.theta_sup * self.c1 * self.smoother_hs_norm

    @property
    def growth_constant(self) -> float:
        return self.theta_sup * max(self.c0, self.c1) * self.smoother_hs_norm

    @property
    def holder_constant(self) -> float:
        return (
            self.c2
            * self.horizon ** (-self.gamma)
            * max(self.c0, self.c1)
            * self.smoother_hs_norm
        )

    @property
    def state_independent(self) -> bool:
        return self.c1 == 0.0

    # -- evaluation ----------------------------------------------------------

    def theta(self, t: float) -> float:
        if not (0.0 <= t <= self.horizon * (1.0 + 1e-12)):
            raise DomainError(f"time {t} outside [0, {self.horizon}]")
        return 1.0 + self.c2 * (t / self.horizon) ** self.gamma

    def gain(self, u_values: np.ndarray) -> float:
        if self.c1 == 0.0:
            return self.c0
        g = self.ctx.generator
        c = g.to_coeffs(u_values)
        fstar = math.sqrt(float(np.dot(c * c, 1.0 / (1.0 - g.eigenvalues))))
        return self.c0 + self.c1 * fstar

    def apply_values(self, t: float, u_values: np.ndarray, v_values: np.ndarray) -> np.ndarray:
        g = self.ctx.generator
        scale = self.theta(t) * self.gain(u_values)
        return g.from_coeffs(scale * self.mode_gains * g.to_coeffs(v_values))

    def apply(self, t: float, u: Field, v: Field) -> DualField:
        """Evaluate B(t, u) on the direction v."""
        if u.grid.n != v.grid.n:
            raise DimensionError("state and direction live on different grids")
        return Field(u.grid, self.apply_values(t, u.values, v.values))

    def hs_norm(self, t: float, u: Field) -> float:
        """Hilbert-Schmidt norm of B(t, u) as a map into the dual at shift 1."""
        return self.theta(t) * self.gain(u.values) * self.smoother_hs_norm

    def as_matrix(self, t: float, u: Field) -> np.ndarray:
        """Dense point-basis matrix of B(t, u), for cross-checks."""
        g = self.ctx.generator
        scale = self.theta(t) * self.gain(u.values)
        return (g.modes * (scale * self.mode_gains)[None, :]) @ g._projection


@dataclass(frozen=True)
class NoiseHypothesesReport:
    samples: int
    lipschitz_margin: float
    growth_margin: float
    holder_margin: float
    lipschitz_constant: float
    growth_constant: float
    holder_constant: float
    tolerance: float
    passed: bool

    def margins(self) -> dict:
        return {
            "lipschitz": self.lipschitz_margin,
            "growth": self.growth_margin,
            "holder": self.holder_margin,
        }


def validate_hypotheses(
    b: NoiseCoefficient, samples: int = 10_000, seed: int = 0
) -> NoiseHypothesesReport:
    """Sampled verification of the declared Lipschitz/growth/Hoelder constants.

    Random state pairs at mixed scales and random time pairs are drawn; each
    sampled ratio must stay below its declared constant.  Margins are
    normalized by the size of the declared bound (floored at 1).
    """
    if samples < 1:
        raise DomainError("samples must be >= 1")
    rng = np.random.default_rng(seed)
    ctx = b.ctx
    g = ctx.generator
    n = g.grid.n
    T = b.horizon
    kap = b.smoother_hs_norm

    def random_state():
        scale = 10.0 ** rng.uniform(-1.0, 1.0)
        return scale * rng.standard_normal(n)

    lip_margin = math.inf
    gro_margin = math.inf
    hol_margin = math.inf
    for _ in range(samples):
        t = rng.uniform(0.0, T)
        u = random_state()
        v = random_state() if rng.random() > 0.01 else u.copy()
        gu, gv = b.gain(u), b.gain(v)
        th = b.theta(t)
        # Lipschitz in the state, measured in the dual norm of the difference
        lhs = th * abs(gu - gv) * kap
        du = Field(g.grid, u - v)
        bound = b.lipschitz_constant * ctx.norm_fstar(du)
        lip_margin = min(lip_margin, (bound - lhs) / max(1.0, bound))
        # linear growth
        lhs = th * gu * kap
        bound = b.growth_constant * (ctx.norm_fstar(Field(g.grid, u)) + 1.0)
        gro_margin = min(gro_margin, (bound - lhs) / max(1.0, bound))
        # Hoelder continuity in time
        t2 = rng.uniform(0.0, T) if rng.random() > 0.01 else t
        lhs = abs(b.theta(t) - b.theta(t2)) * gu * kap
        bound = (
            b.holder_constant
            * (ctx.norm_fstar(Field(g.grid, u)) + 1.0)
            * abs(t - t2) ** b.gamma
        )
        hol_margin = min(hol_margin, (bound - lhs) / max(1.0, bound))

    passed = all(
        m >= -MARGIN_TOL for m in (lip_margin, gro_margin, hol_margin)
    )
    return NoiseHypothesesReport(
        samples=samples,
        lipschitz_margin=float(lip_margin),
        growth_margin=float(gro_margin),
        holder_margin=float(hol_margin),
        lipschitz_constant=b.lipschitz_constant,
        growth_constant=b.growth_constant,
        holder_constant=b.holder_constant,
        tolerance=MARGIN_TOL,
        passed=passed,
    )
