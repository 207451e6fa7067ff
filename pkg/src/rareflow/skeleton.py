"""Deterministic solver for the controlled skeleton equation and its
two-parameter regularizations.

The dynamics  dY = L psi(Y) dt + B(t, Y) h(t) dt  (and the shifted/relaxed
variant with drift (L - nu)(psi(Y) + lam Y)) are advanced by a backward Euler
step in the monotone drift and a forward step in the control term:

    Y_{m+1} = Y_m + dt (L - nu)(psi(Y_{m+1}) + lam Y_{m+1}) + B(t_m, Y_m) h_m dt.

The implicit system is solved by damped Newton on the point values, with a
relaxed fixed-point fallback; monotonicity of psi makes both globally
convergent for moderate dt * Lip(psi) * |L|.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from typing import Sequence

import numpy as np
import scipy.linalg

from .diffusion import NoiseCoefficient
from .errors import (
    DimensionError,
    DivergenceError,
    DomainError,
    StepFailureError,
)
from .generator import SpectralGenerator
from .measure import Field, MeasureGrid
from .nonlinearity import Nonlinearity

#: implicit-step residual target in the dual norm
STEP_TOL = 1e-10
MAX_STEP_ITER = 50


@dataclass(frozen=True)
class Control:
    """A piecewise-constant control: one field value per step of a uniform grid."""

    time_grid: np.ndarray
    values: np.ndarray  # (steps, n) point values
    grid: MeasureGrid

    def __post_init__(self):
        tg = np.asarray(self.time_grid, dtype=float)
        vals = np.asarray(self.values, dtype=float)
        if tg.ndim != 1 or tg.size < 2:
            raise DimensionError("time grid needs at least two instants")
        if vals.shape != (tg.size - 1, self.grid.n):
            raise DimensionError("control needs one field value per step")
        if not np.all(np.isfinite(vals)):
            raise DomainError("control values must be finite")
        tg = tg.copy()
        tg.setflags(write=False)
        vals = vals.copy()
        vals.setflags(write=False)
        object.__setattr__(self, "time_grid", tg)
        object.__setattr__(self, "values", vals)

    @property
    def steps(self) -> int:
        return self.values.shape[0]

    @property
    def horizon(self) -> float:
        return float(self.time_grid[-1])

    @property
    def dt(self) -> float:
        return self.horizon / self.steps

    @classmethod
    def zero(cls, grid: MeasureGrid, T: float, steps: int) -> "Control":
        return cls(np.linspace(0.0, T, steps + 1), np.zeros((steps, grid.n)), grid)

    @classmethod
    def from_fields(cls, fields: Sequence[Field], T: float) -> "Control":
        grid = fields[0].grid
        vals = np.stack([f.values for f in fields])
        return cls(np.linspace(0.0, T, len(fields) + 1), vals, grid)

    def field(self, m: int) -> Field:
        return Field(self.grid, self.values[m])

    def squared_l2(self) -> float:
        """Time integral of |h(t)|_2^2."""
        per_step = (self.values**2 * self.grid.weights[None, :]).sum(axis=1)
        return float(self.dt * per_step.sum())

    def energy(self) -> float:
        """Control energy (1/2) * integral of |h(t)|_2^2."""
        return 0.5 * self.squared_l2()

    def in_ball(self, bound: float) -> bool:
        return self.squared_l2() <= bound

    def refined(self, steps: int) -> "Control":
        """Inject onto a finer uniform grid by left-constant interpolation."""
        if steps % self.steps != 0:
            raise DimensionError(
                f"target step count {steps} is not a multiple of {self.steps}"
            )
        rep = steps // self.steps
        vals = np.repeat(self.values, rep, axis=0)
        return Control(np.linspace(0.0, self.horizon, steps + 1), vals, self.grid)

    def scaled(self, factor: float) -> "Control":
        return Control(self.time_grid, factor * self.values, self.grid)


@dataclass(frozen=True)
class PathSolution:
    """A discrete trajectory with per-step diagnostics.

    ``states`` stores point values, one row per time instant.  Diagnostics
    are recomputable from the states: the weighted L2 norm, the dual norm at
    shift 1, and the form norm of the running integral of psi(Y).  Rows of
    ``iterations``/``residuals`` describe the implicit solve that produced
    each state (zero for the initial one).
    """

    time_grid: np.ndarray
    states: np.ndarray
    grid: MeasureGrid
    l2_norms: np.ndarray
    fstar_norms: np.ndarray
    psi_integral_f12: np.ndarray
    iterations: np.ndarray
    residuals: np.ndarray
    control_energy: float
    nu: float
    lam: float

    @property
    def steps(self) -> int:
        return self.states.shape[0] - 1

    def field(self, m: int) -> Field:
        return Field(self.grid, self.states[m])

    def terminal(self) -> Field:
        return self.field(self.steps)

    def rows(self) -> list[dict]:
        out = []
        for m in range(self.states.shape[0]):
            out.append(
                {
                    "t": float(self.time_grid[m]),
                    "l2_norm": float(self.l2_norms[m]),
                    "fstar_norm": float(self.fstar_norms[m]),
                    "psi_integral_f12": float(self.psi_integral_f12[m]),
                    "step_iterations": int(self.iterations[m]),
                    "step_residual": float(self.residuals[m]),
                }
            )
        return out

    def to_json_dict(self) -> dict:
        return {
            "time_grid": self.time_grid.tolist(),
            "states": self.states.tolist(),
            "weights": self.grid.weights.tolist(),
            "control_energy": self.control_energy,
            "nu": self.nu,
            "lambda": self.lam,
        }


class _Stepper:
    """Shared implicit integrator for the deterministic and noisy dynamics."""

    def __init__(
        self,
        gen: SpectralGenerator,
        psi: Nonlinearity,
        b: NoiseCoefficient | None,
        T: float,
        n_steps: int,
        nu: float,
        lam: float,
    ):
        if n_steps < 1:
            raise DomainError("the time grid needs at least one step")
        if T <= 0.0:
            raise DomainError("horizon must be > 0")
        self.gen = gen
        self.psi = psi
        self.b = b
        self.T = T
        self.n_steps = n_steps
        self.dt = T / n_steps
        self.nu = nu
        self.lam = lam
        stiffness = self.dt * max(psi.lipschitz_k + lam, lam) * gen.operator_norm
        if stiffness > 10.0:
            raise DomainError(
                f"dt * Lip(psi) * |L| = {stiffness:.3g} exceeds 10; refine the time grid"
            )
        if stiffness > 1.0:
            warnings.warn(
                f"dt * Lip(psi) * |L| = {stiffness:.3g} > 1; the implicit solves "
                "may need many iterations",
                stacklevel=3,
            )
        n = gen.grid.n
        self.drift_matrix = gen.matrix - nu * np.eye(n)
        self.identity = np.eye(n)
        lam_spec = gen.eigenvalues
        self._fstar_w = 1.0 / (1.0 - lam_spec)
        self._proj = gen._projection
        if psi.is_linear:
            slope = psi.k1 + lam
            self._lu = scipy.linalg.lu_factor(
                self.identity - self.dt * slope * self.drift_matrix
            )
        else:
            self._lu = None
        self._picard_relax = psi.alpha_tilde() / (1.0 + self.dt * gen.operator_norm)

    def _residual_norm(self, g_vec: np.ndarray) -> float:
        c = self._proj @ g_vec
        return math.sqrt(float(np.dot(c * c, self._fstar_w)))

    def _implicit_map(self, y: np.ndarray, rhs: np.ndarray) -> np.ndarray:
        return y - self.dt * (self.drift_matrix @ (self.psi(y) + self.lam * y)) - rhs

    def step(self, y_prev: np.ndarray, rhs: np.ndarray, step_index: int):
        """Solve y - dt (L - nu)(psi(y) + lam y) = rhs; returns (y, iters, residual)."""
        if self._lu is not None:
            y = scipy.linalg.lu_solve(self._lu, rhs)
            return y, 1, self._residual_norm(self._implicit_map(y, rhs))
        y = y_prev.copy()
        res_vec = self._implicit_map(y, rhs)
        res = self._residual_norm(res_vec)
        iters = 0
        while res > STEP_TOL and iters < MAX_STEP_ITER:
            jac = self.identity - self.dt * (
                self.drift_matrix * (self.psi.derivative(y) + self.lam)[None, :]
            )
            try:
                delta = np.linalg.solve(jac, -res_vec)
            except np.linalg.LinAlgError:
                delta = None
            advanced = False
            if delta is not None:
                alpha = 1.0
                while alpha >= 1e-4:
                    cand = y + alpha * delta
                    cand_vec = self._implicit_map(cand, rhs)
                    cand_res = self._residual_norm(cand_vec)
                    if cand_res < res:
                        y, res_vec, res = cand, cand_vec, cand_res
                        advanced = True
                        break
                    alpha *= 0.5
            if not advanced:
                # Newton stalled: one relaxed fixed-point sweep
                y = y - self._picard_relax * res_vec
                res_vec = self._implicit_map(y, rhs)
                res = self._residual_norm(res_vec)
            iters += 1
        if res > STEP_TOL:
            raise StepFailureError(
                f"implicit solve stalled at step {step_index} "
                f"(residual {res:.3e} > {STEP_TOL:g})",
                step=step_index,
            )
        return y, max(iters, 1), res

    def run(
        self,
        x_values: np.ndarray,
        control_values: np.ndarray | None,
        noise_values: np.ndarray | None = None,
        sqrt_eps: float = 0.0,
    ):
        """Advance the full path; returns (states, iters, residuals, psi_rows)."""
        n = self.gen.grid.n
        nt = self.n_steps
        states = np.empty((nt + 1, n))
        states[0] = x_values
        iters = np.zeros(nt + 1, dtype=int)
        resid = np.zeros(nt + 1)
        psi_rows = np.zeros((nt + 1, n))
        y = np.array(x_values, dtype=float)
        for m in range(nt):
            t_m = m * self.dt
            rhs = y
            if self.b is not None:
                incr = None
                if control_values is not None:
                    incr = control_values[m] * self.dt
                if sqrt_eps > 0.0 and noise_values is not None:
                    dw = sqrt_eps * noise_values[m]
                    incr = dw if incr is None else incr + dw
                if incr is not None:
                    rhs = y + self.b.apply_values(t_m, y, incr)
            y, k, r = self.step(y, rhs, m)
            if not np.all(np.isfinite(y)):
                raise DivergenceError(
                    f"non-finite state detected at step {m}", step=m
                )
            states[m + 1] = y
            iters[m + 1] = k
            resid[m + 1] = r
            psi_rows[m + 1] = self.psi(y)
        return states, iters, resid, psi_rows

    def package(
        self,
        states: np.ndarray,
        iters: np.ndarray,
        resid: np.ndarray,
        psi_rows: np.ndarray,
        control_energy: float,
    ) -> PathSolution:
        gen = self.gen
        mu = gen.grid.weights
        l2 = np.sqrt((states**2 * mu[None, :]).sum(axis=1))
        coeffs = states @ self._proj.T
        fstar = np.sqrt((coeffs**2 * self._fstar_w[None, :]).sum(axis=1))
        psi_acc = self.dt * np.cumsum(psi_rows, axis=0)
        pc = psi_acc @ self._proj.T
        f12 = np.sqrt((pc**2 * (1.0 - gen.eigenvalues)[None, :]).sum(axis=1))
        return PathSolution(
            time_grid=np.linspace(0.0, self.T, self.n_steps + 1),
            states=states,
            grid=gen.grid,
            l2_norms=l2,
            fstar_norms=fstar,
            psi_integral_f12=f12,
            iterations=iters,
            residuals=resid,
            control_energy=control_energy,
            nu=self.nu,
            lam=self.lam,
        )


def _prepare_control(h: Control | None, grid: MeasureGrid, T: float, n_steps: int):
    if h is None:
        return None, 0.0
    if h.grid.n != grid.n:
        raise DimensionError("control lives on a different grid")
    if abs(h.horizon - T) > 1e-12 * max(1.0, T):
        raise DimensionError(
            f"control horizon {h.horizon} does not match the run horizon {T}"
        )
    if h.steps != n_steps:
        h = h.refined(n_steps)
    return h.values, h.energy()


def solve_regularized(
    gen: SpectralGenerator,
    psi: Nonlinearity,
    b: NoiseCoefficient | None,
    h: Control | None,
    x: Field,
    T: float,
    n_steps: int,
    nu: float,
    lam: float,
) -> PathSolution:
    """Solve the shifted/relaxed dynamics dY = (L - nu)(psi(Y) + lam Y)dt + B h dt.

    ``nu = lam = 0`` reproduces :func:`solve_skeleton` exactly (same code
    path, bitwise).
    """
    if not (0.0 <= nu < 1.0):
        raise DomainError("nu must lie in [0, 1)")
    if not (0.0 <= lam < 1.0):
        raise DomainError("lambda must lie in [0, 1)")
    control_values, energy = _prepare_control(h, gen.grid, T, n_steps)
    stepper = _Stepper(gen, psi, b, T, n_steps, nu, lam)
    # a zero state stays zero only when nothing forces it
    if (
        not np.any(x.values)
        and (control_values is None or not np.any(control_values))
        and (b is None or b.c0 == 0.0)
    ):
        n = gen.grid.n
        nt = n_steps
        return stepper.package(
            np.zeros((nt + 1, n)),
            np.zeros(nt + 1, dtype=int),
            np.zeros(nt + 1),
            np.zeros((nt + 1, n)),
            energy,
        )
    states, iters, resid, psi_rows = stepper.run(x.values, control_values)
    return stepper.package(states, iters, resid, psi_rows, energy)


def solve_skeleton(
    gen: SpectralGenerator,
    psi: Nonlinearity,
    b: NoiseCoefficient | None,
    h: Control | None,
    x: Field,
    T: float,
    n_steps: int,
) -> PathSolution:
    """Solve the controlled equation dY = L psi(Y) dt + B(t, Y) h(t) dt."""
    return solve_regularized(gen, psi, b, h, x, T, n_steps, nu=0.0, lam=0.0)


# -- convergence-rate studies ---------------------------------------------------


@dataclass(frozen=True)
class RateStudyReport:
    """Log-log fit of path discrepancies against a regularization scale."""

    parameter: str
    pairs: list[tuple[float, float]]
    scales: np.ndarray  # x-axis values, one per consecutive pair
    discrepancies: np.ndarray  # sup-in-time squared dual-norm gaps
    slope: float
    intercept: float
    fit_residual: float
    monotone: bool

    def rows(self) -> list[dict]:
        out = []
        for (a, b_), x_val, d in zip(self.pairs, self.scales, self.discrepancies):
            out.append(
                {
                    self.parameter: a,
                    f"{self.parameter}_next": b_,
                    "scale": float(x_val),
                    "discrepancy": float(d),
                }
            )
        return out


def _pairwise_discrepancies(paths: list[PathSolution], gen: SpectralGenerator):
    proj = gen._projection
    w = 1.0 / (1.0 - gen.eigenvalues)
    out = []
    for p, q in zip(paths[:-1], paths[1:]):
        diff = (p.states - q.states) @ proj.T
        sq = (diff**2 * w[None, :]).sum(axis=1)
        out.append(float(sq.max()))
    return np.asarray(out)


def _fit_loglog(scales: np.ndarray, values: np.ndarray):
    if np.any(values <= 0.0):
        # identical paths give zero discrepancy; the fit is then degenerate
        return math.nan, math.nan, math.nan
    lx, ly = np.log(scales), np.log(values)
    coef, res, *_ = np.polyfit(lx, ly, 1, full=True)
    residual = math.sqrt(float(res[0]) / lx.size) if res.size else 0.0
    return float(coef[0]), float(coef[1]), residual


def _check_decreasing(seq) -> None:
    arr = np.asarray(list(seq), dtype=float)
    if arr.size < 2 or np.any(arr <= 0.0) or np.any(np.diff(arr) > 0.0):
        raise DomainError("regularization scales must be positive and non-increasing")


def lambda_rate_study(
    gen: SpectralGenerator,
    psi: Nonlinearity,
    b: NoiseCoefficient | None,
    h: Control | None,
    x: Field,
    T: float,
    n_steps: int,
    nu: float,
    lambdas: Sequence[float],
) -> RateStudyReport:
    """Discrepancy decay of the relaxed paths along a decreasing lambda ladder.

    For consecutive pairs the sup-in-time squared dual-norm gap is fitted
    against lambda + lambda' on log-log axes.
    """
    _check_decreasing(lambdas)
    paths = [
        solve_regularized(gen, psi, b, h, x, T, n_steps, nu=nu, lam=float(l))
        for l in lambdas
    ]
    d = _pairwise_discrepancies(paths, gen)
    scales = np.asarray([a + b_ for a, b_ in zip(lambdas[:-1], lambdas[1:])])
    slope, intercept, resid = _fit_loglog(scales, d)
    return RateStudyReport(
        parameter="lambda",
        pairs=list(zip(map(float, lambdas[:-1]), map(float, lambdas[1:]))),
        scales=scales,
        discrepancies=d,
        slope=slope,
        intercept=intercept,
        fit_residual=resid,
        monotone=bool(np.all(np.diff(d) <= 0.0)),
    )


def nu_rate_study(
    gen: SpectralGenerator,
    psi: Nonlinearity,
    b: NoiseCoefficient | None,
    h: Control | None,
    x: Field,
    T: float,
    n_steps: int,
    nus: Sequence[float],
) -> RateStudyReport:
    """Discrepancy decay of the shifted paths along a decreasing nu ladder,
    fitted against nu^2 + nu'^2 on log-log axes."""
    _check_decreasing(nus)
    paths = [
        solve_regularized(gen, psi, b, h, x, T, n_steps, nu=float(v), lam=0.0)
        for v in nus
    ]
    d = _pairwise_discrepancies(paths, gen)
    scales = np.asarray([a * a + b_ * b_ for a, b_ in zip(nus[:-1], nus[1:])])
    slope, intercept, resid = _fit_loglog(scales, d)
    return RateStudyReport(
        parameter="nu",
        pairs=list(zip(map(float, nus[:-1]), map(float, nus[1:]))),
        scales=scales,
        discrepancies=d,
        slope=slope,
        intercept=intercept,
        fit_residual=resid,
        monotone=bool(np.all(np.diff(d) <= 0.0)),
    )
