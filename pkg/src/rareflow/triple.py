"""Norms and pairings of the Gelfand triple built on (1 - L).

The pivot space is the dual F*_{1,2} = D((1 - L)^{-1/2}) with the shifted
family of norms |eta|_{nu}^2 = <eta, (nu - L)^{-1} eta>_2; the form domain
F_{1,2} = D((1 - L)^{1/2}) carries the graph-type norm |(1 - L)^{1/2} f|_2.
At finite resolution all spaces coincide as sets, so only the norms differ.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import DimensionError, DomainError, ValidationError
from .generator import SpectralGenerator
from .measure import DualField, Field, inner_l2

__all__ = ["TripleContext", "DualField"]


@dataclass(frozen=True)
class TripleContext:
    """Bundles a generator with the default dual shift nu0 = 1."""

    generator: SpectralGenerator
    nu0: float = 1.0

    def __post_init__(self):
        if self.nu0 <= 0.0:
            raise ValidationError("default dual shift must be > 0")

    @property
    def grid(self):
        return self.generator.grid

    # -- norms ------------------------------------------------------------

    def _fstar_weights(self, nu: float) -> np.ndarray:
        if nu <= 0.0:
            raise DomainError("dual shift must be > 0")
        return 1.0 / (nu - self.generator.eigenvalues)

    def norm_fstar(self, eta: DualField, nu: float | None = None) -> float:
        """Dual norm <eta, (nu - L)^{-1} eta>^{1/2}."""
        nu = self.nu0 if nu is None else nu
        c = self.generator.to_coeffs(eta.values)
        return math.sqrt(float(np.dot(c * c, self._fstar_weights(nu))))

    def norm_f12(self, f: Field) -> float:
        """Form norm |(1 - L)^{1/2} f|_2."""
        c = self.generator.to_coeffs(f.values)
        return math.sqrt(float(np.dot(c * c, 1.0 - self.generator.eigenvalues)))

    def inner_fstar(self, eta: DualField, zeta: DualField, nu: float | None = None) -> float:
        nu = self.nu0 if nu is None else nu
        ce = self.generator.to_coeffs(eta.values)
        cz = self.generator.to_coeffs(zeta.values)
        return float(np.dot(ce * self._fstar_weights(nu), cz))

    # -- pairings ------------------------------------------------------------

    def pairing_check(self, u: Field, v: Field) -> tuple[float, float]:
        """Evaluate <(1 - L)u, v> through the dual pairing and directly in L2.

        The first entry applies (1 - L) densely in the point basis and pairs
        the result with v in the dual inner product at shift 1; the second is
        the plain weighted sum.  The two routes agree up to roundtrip
        roundoff, which realizes the isometry of (1 - L) from L2 into the
        dual scale as a computable identity.
        """
        if u.grid.n != v.grid.n:
            raise DimensionError("fields live on different grids")
        g = self.generator
        w = u.values - g.matrix @ u.values
        z = g.resolvent_apply(1.0, v)
        dual_route = inner_l2(Field(g.grid, w), z)
        return dual_route, inner_l2(u, v)

    def hs_norm_to_fstar(self, op, nu: float | None = None) -> float:
        """Hilbert-Schmidt norm of a point-basis matrix as a map L2 -> dual.

        Summing |op e_j|^2 in the dual norm over any weighted-orthonormal
        basis gives the same value; the eigenbasis makes the sum diagonal.
        """
        nu = self.nu0 if nu is None else nu
        g = self.generator
        a = np.asarray(op, dtype=float)
        n = g.grid.n
        if a.shape != (n, n):
            raise DimensionError(f"operator must be {n}x{n}")
        coeff_cols = g._projection @ (a @ g.modes)
        total = float(np.sum(coeff_cols**2 * self._fstar_weights(nu)[:, None]))
        return math.sqrt(total)
