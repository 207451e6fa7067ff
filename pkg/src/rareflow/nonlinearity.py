"""Monotone Lipschitz nonlinearities applied pointwise to fields.

A builtin family covers the regimes the solvers care about: a pure slope, a
saturating arctangent (Lipschitz but not coercive), their sum (coercive), and
a power law with its slope clamped so it stays globally Lipschitz.  Every
member is odd, vanishes at zero, and is nondecreasing.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import DomainError, ValidationError
from .measure import Field

KINDS = ("linear", "atan_saturated", "linear_plus_atan", "slope_clamped_power")

#: sampled inequality checks tolerate this normalized slack
MARGIN_TOL = 1e-12


@dataclass(frozen=True)
class Nonlinearity:
    """One member of the builtin family, with its declared constants.

    ``lipschitz_k`` is the declared global Lipschitz constant and
    ``coercivity_c``, when present, declares psi(r) * r >= c * r^2.  Both are
    verified against sampled difference quotients at construction.
    """

    kind: str
    k1: float = 0.0
    k2: float = 0.0
    m: float = 2.0
    s_max: float = 1.0
    lipschitz_k: float = 0.0
    coercivity_c: float | None = None

    def __post_init__(self):
        if self.kind not in KINDS:
            raise DomainError(f"unknown nonlinearity kind {self.kind!r}")
        for name in ("k1", "k2", "s_max"):
            if getattr(self, name) < 0.0:
                raise ValidationError(f"{name} must be >= 0")
        if self.kind == "slope_clamped_power":
            if self.m <= 1.0:
                raise ValidationError("power exponent must be > 1")
            if self.s_max <= 0.0:
                raise ValidationError("clamp slope must be > 0")
        if self(0.0) != 0.0:
            raise ValidationError("nonlinearity must vanish at zero")
        self._validate_declared_constants()

    # -- constructors -------------------------------------------------------

    @classmethod
    def linear(cls, k1: float) -> "Nonlinearity":
        return cls(kind="linear", k1=k1, lipschitz_k=k1,
                   coercivity_c=k1 if k1 > 0.0 else None)

    @classmethod
    def atan_saturated(cls, k2: float) -> "Nonlinearity":
        return cls(kind="atan_saturated", k2=k2, lipschitz_k=k2)

    @classmethod
    def linear_plus_atan(cls, k1: float, k2: float) -> "Nonlinearity":
        return cls(kind="linear_plus_atan", k1=k1, k2=k2, lipschitz_k=k1 + k2,
                   coercivity_c=k1 if k1 > 0.0 else None)

    @classmethod
    def slope_clamped_power(cls, m: float, s_max: float) -> "Nonlinearity":
        return cls(kind="slope_clamped_power", m=m, s_max=s_max, lipschitz_k=s_max)

    @classmethod
    def zero(cls) -> "Nonlinearity":
        return cls.linear(0.0)

    # -- evaluation ----------------------------------------------------------

    @property
    def _clamp_radius(self) -> float:
        # where the power-law slope reaches s_max; may exceed float range for
        # exponents barely above 1, in which case the clamp never engages
        log_r = math.log(self.s_max / self.m) / (self.m - 1.0)
        return math.exp(log_r) if log_r < 700.0 else math.inf

    def __call__(self, r):
        r = np.asarray(r, dtype=float)
        if self.kind == "linear":
            out = self.k1 * r
        elif self.kind == "atan_saturated":
            out = self.k2 * np.arctan(r)
        elif self.kind == "linear_plus_atan":
            out = self.k1 * r + self.k2 * np.arctan(r)
        else:
            a = np.abs(r)
            inner = np.minimum(a, self._clamp_radius)
            out = np.sign(r) * (inner**self.m + self.s_max * (a - inner))
        return out if out.ndim else float(out)

    def derivative(self, r):
        r = np.asarray(r, dtype=float)
        if self.kind == "linear":
            out = np.full_like(r, self.k1)
        elif self.kind == "atan_saturated":
            out = self.k2 / (1.0 + r * r)
        elif self.kind == "linear_plus_atan":
            out = self.k1 + self.k2 / (1.0 + r * r)
        else:
            out = np.minimum(self.m * np.abs(r) ** (self.m - 1.0), self.s_max)
        return out if out.ndim else float(out)

    def apply(self, u: Field) -> Field:
        return Field(u.grid, self(u.values))

    def alpha_tilde(self) -> float:
        """The monotonicity constant (k + 1)^{-1} built from the Lipschitz bound."""
        if not math.isfinite(self.lipschitz_k):
            raise ValidationError("Lipschitz constant must be finite")
        return 1.0 / (self.lipschitz_k + 1.0)

    @property
    def is_linear(self) -> bool:
        return self.kind == "linear"

    @property
    def is_zero(self) -> bool:
        return self.kind == "linear" and self.k1 == 0.0

    # -- declared-constant verification ---------------------------------------

    def _validate_declared_constants(self):
        r = np.concatenate([-np.geomspace(1e-8, 1e8, 81)[::-1], [0.0],
                            np.geomspace(1e-8, 1e8, 81)])
        vals = self(r)
        dq = np.abs(np.diff(vals)) / np.diff(r)
        if dq.max() > self.lipschitz_k * (1.0 + 1e-9) + 1e-15:
            raise ValidationError(
                f"declared Lipschitz constant {self.lipschitz_k} is below the "
                f"sampled difference quotient {dq.max():.6g}"
            )
        if self.coercivity_c is not None:
            rr = np.concatenate([-np.geomspace(1e-8, 1e8, 81)[::-1],
                                 np.geomspace(1e-8, 1e8, 81)])
            lhs = self(rr) * rr
            rhs = self.coercivity_c * rr * rr
            margin = (lhs - rhs) / np.maximum(1.0, np.abs(rhs))
            if margin.min() < -MARGIN_TOL:
                raise ValidationError(
                    f"declared coercivity {self.coercivity_c} fails on the sample grid"
                )


def _sample_pairs(samples: int, rng: np.random.Generator) -> tuple[np.ndarray, np.ndarray]:
    # log-uniform magnitudes over [1e-6, 1e6] with random signs, plus ties and zeros
    def draw(k):
        mag = 10.0 ** rng.uniform(-6.0, 6.0, k)
        return mag * rng.choice([-1.0, 1.0], k)

    r = draw(samples)
    rp = draw(samples)
    tie = rng.random(samples) < 0.01
    rp[tie] = r[tie]
    r[:2] = 0.0
    return r, rp


@dataclass(frozen=True)
class MonotoneInequalityReport:
    samples: int
    worst_margin: float
    worst_pair: tuple[float, float]
    alpha_tilde: float
    tolerance: float
    passed: bool


def check_monotone_inequality(
    psi: Nonlinearity, samples: int = 10_000, seed: int = 0
) -> MonotoneInequalityReport:
    """Sample (psi(r) - psi(r'))(r - r') >= alpha_tilde |psi(r) - psi(r')|^2.

    Margins are normalized by the size of the dominating side (floored at 1)
    so the tolerance keeps its meaning across twelve orders of magnitude of
    inputs.
    """
    if samples < 1:
        raise DomainError("samples must be >= 1")
    rng = np.random.default_rng(seed)
    r, rp = _sample_pairs(samples, rng)
    a = psi.alpha_tilde()
    dpsi = psi(r) - psi(rp)
    lhs = dpsi * (r - rp)
    rhs = a * dpsi * dpsi
    margin = (lhs - rhs) / np.maximum(1.0, np.maximum(np.abs(lhs), np.abs(rhs)))
    i = int(np.argmin(margin))
    worst = float(margin[i])
    return MonotoneInequalityReport(
        samples=samples,
        worst_margin=worst,
        worst_pair=(float(r[i]), float(rp[i])),
        alpha_tilde=a,
        tolerance=MARGIN_TOL,
        passed=worst >= -MARGIN_TOL,
    )


@dataclass(frozen=True)
class DriftHypothesisReport:
    samples: int
    monotone_margin: float
    lipschitz_margin: float
    inequality: MonotoneInequalityReport
    tolerance: float
    passed: bool


def validate_drift_hypothesis(
    psi: Nonlinearity, samples: int = 10_000, seed: int = 0
) -> DriftHypothesisReport:
    """Sampled monotonicity, Lipschitz bound, and the quadratic inequality."""
    rng = np.random.default_rng(seed)
    r, rp = _sample_pairs(samples, rng)
    lo, hi = np.minimum(r, rp), np.maximum(r, rp)
    mono = psi(hi) - psi(lo)
    mono_margin = float(
        (mono / np.maximum(1.0, np.abs(psi(hi)) + np.abs(psi(lo)))).min()
    )
    dpsi = np.abs(psi(r) - psi(rp))
    bound = psi.lipschitz_k * np.abs(r - rp)
    lip_margin = float(((bound - dpsi) / np.maximum(1.0, bound)).min())
    ineq = check_monotone_inequality(psi, samples, seed)
    passed = (
        mono_margin >= -MARGIN_TOL and lip_margin >= -MARGIN_TOL and ineq.passed
    )
    return DriftHypothesisReport(
        samples=samples,
        monotone_margin=mono_margin,
        lipschitz_margin=lip_margin,
        inequality=ineq,
        tolerance=MARGIN_TOL,
        passed=passed,
    )
