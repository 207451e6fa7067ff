"""Finite weighted point sets and the weighted L2 geometry on them.

Every space in this package is built over a finite set of points carrying
strictly positive masses mu_i.  Integrals against mu reduce to weighted sums,
so the L2 inner product is exact at finite resolution.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import DimensionError, ValidationError


def _frozen(a: np.ndarray) -> np.ndarray:
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class MeasureGrid:
    """A finite measure space: points with strictly positive weights.

    ``labels`` optionally carries point coordinates for builtin geometries
    (the periodic interval stores its node positions there).
    """

    weights: np.ndarray
    labels: np.ndarray | None = None

    def __post_init__(self):
        w = np.asarray(self.weights, dtype=float)
        if w.ndim != 1 or w.size < 1:
            raise ValidationError("weights must be a non-empty 1-d array")
        if not np.all(np.isfinite(w)):
            raise ValidationError("weights must be finite")
        if np.any(w <= 0.0):
            raise ValidationError("weights must be strictly positive")
        object.__setattr__(self, "weights", _frozen(w))
        if self.labels is not None:
            lab = np.asarray(self.labels, dtype=float)
            if lab.shape[0] != w.size:
                raise DimensionError("labels must have one entry per point")
            object.__setattr__(self, "labels", _frozen(lab))

    @property
    def n(self) -> int:
        return int(self.weights.size)

    @property
    def total_mass(self) -> float:
        return float(self.weights.sum())

    @classmethod
    def periodic_1d(cls, n: int, length: float = 2.0 * math.pi) -> "MeasureGrid":
        """Uniform grid of ``n`` points on a circle of circumference ``length``."""
        if n < 1:
            raise ValidationError("n must be >= 1")
        if not (length > 0.0 and math.isfinite(length)):
            raise ValidationError("length must be positive and finite")
        dx = length / n
        x = dx * np.arange(n)
        return cls(weights=np.full(n, dx), labels=x)

    @classmethod
    def from_weights(cls, weights) -> "MeasureGrid":
        return cls(weights=np.asarray(weights, dtype=float))


@dataclass(frozen=True)
class Field:
    """A real-valued function on a :class:`MeasureGrid`, stored by point values."""

    grid: MeasureGrid
    values: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        if v.ndim != 1 or v.size != self.grid.n:
            raise DimensionError(
                f"field has {v.size} values but the grid has {self.grid.n} points"
            )
        if not np.all(np.isfinite(v)):
            raise ValidationError("field values must be finite")
        object.__setattr__(self, "values", _frozen(v))

    @classmethod
    def zeros(cls, grid: MeasureGrid) -> "Field":
        return cls(grid, np.zeros(grid.n))


# An element of the dual scale shares the coordinate representation of Field;
# the distinction is semantic (which norm applies), carried by API signatures.
DualField = Field


def _check_same_grid(u: Field, v: Field) -> None:
    if u.grid is v.grid:
        return
    if u.grid.n != v.grid.n or not np.array_equal(u.grid.weights, v.grid.weights):
        raise DimensionError("fields live on different grids")


def inner_l2(u: Field, v: Field) -> float:
    """Weighted inner product sum_i mu_i u_i v_i."""
    _check_same_grid(u, v)
    return float(np.dot(u.grid.weights * u.values, v.values))


def norm_l2(u: Field) -> float:
    """Weighted L2 norm, the square root of :func:`inner_l2` of u with itself."""
    return math.sqrt(max(inner_l2(u, u), 0.0))
