"""Small-noise simulation of the controlled stochastic dynamics.

The cylindrical Wiener process is truncated to the leading eigenmodes; at
finite resolution it is a vector of independent Brownian motions in the
eigenbasis.  Time stepping is semi-implicit Euler-Maruyama: implicit in the
monotone drift, explicit in the noise coefficient evaluated at the left
endpoint.  All randomness flows through a counter-based generator keyed by
(seed, sample index), so Monte Carlo fan-out is reproducible regardless of
scheduling.
"""

from __future__ import annotations

import math
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .diffusion import NoiseCoefficient
from .errors import DomainError, SolverError, ValidationError
from .generator import SpectralGenerator
from .measure import Field
from .nonlinearity import Nonlinearity
from .skeleton import Control, PathSolution, _Stepper, _prepare_control, solve_skeleton


@dataclass(frozen=True)
class WienerConfig:
    """Truncation and seeding of the cylindrical noise expansion."""

    modes: int
    seed: int

    def __post_init__(self):
        if self.modes < 1:
            raise ValidationError("at least one noise mode is required")
        if not (0 <= self.seed < 2**64):
            raise ValidationError("seed must fit in 64 bits")

    def increments(
        self, gen: SpectralGenerator, n_steps: int, dt: float, sample_index: int = 0
    ) -> np.ndarray:
        """Point-value noise increments, one row per step.

        Each of the leading ``modes`` eigen-directions receives an independent
        Normal(0, dt) increment per step.  The stream is keyed by
        (seed, sample_index): the same key reproduces the same bytes.
        """
        if self.modes > gen.grid.n:
            raise ValidationError(
                f"requested {self.modes} noise modes on a grid of {gen.grid.n} points"
            )
        key = (int(self.seed) << 64) | int(sample_index)
        rng = np.random.Generator(np.random.Philox(key=key))
        beta = rng.normal(0.0, math.sqrt(dt), size=(n_steps, self.modes))
        return beta @ gen.modes[:, : self.modes].T


@dataclass(frozen=True)
class SdeRun:
    """One realization of the noisy dynamics."""

    path: PathSolution
    epsilon: float
    control: Control | None
    wiener: WienerConfig


def simulate(
    gen: SpectralGenerator,
    psi: Nonlinearity,
    b: NoiseCoefficient,
    h: Control | None,
    x: Field,
    T: float,
    n_steps: int,
    eps: float,
    wiener: WienerConfig,
    sample_index: int = 0,
) -> SdeRun:
    """Advance  dX = L psi(X) dt + B(t, X)(h dt + sqrt(eps) dW)  on a uniform grid.

    With ``eps = 0`` this delegates to the deterministic solver, so the
    noiseless run coincides with the skeleton path bit for bit.
    """
    if eps < 0.0:
        raise DomainError("noise scale must be >= 0")
    if eps == 0.0:
        path = solve_skeleton(gen, psi, b, h, x, T, n_steps)
        return SdeRun(path=path, epsilon=0.0, control=h, wiener=wiener)
    control_values, energy = _prepare_control(h, gen.grid, T, n_steps)
    stepper = _Stepper(gen, psi, b, T, n_steps, nu=0.0, lam=0.0)
    noise = wiener.increments(gen, n_steps, stepper.dt, sample_index)
    states, iters, resid, psi_rows = stepper.run(
        x.values, control_values, noise_values=noise, sqrt_eps=math.sqrt(eps)
    )
    path = stepper.package(states, iters, resid, psi_rows, energy)
    return SdeRun(path=path, epsilon=eps, control=h, wiener=wiener)


@dataclass(frozen=True)
class McConditionReport:
    """Monte Carlo decay of the controlled gap against the noise scale.

    ``rows`` carries one record per noise scale: the sample mean and standard
    error of sup-in-time squared dual-norm distance between the noisy and
    skeleton paths, plus the same statistics at the terminal time.  When the
    drift is trivial and the coefficient state-independent, the discrete
    terminal second moment has the closed form recorded in
    ``terminal_exact``.
    """

    eps_list: list[float]
    rows: list[dict]
    slope: float
    fit_residual: float
    monotone_within_2se: bool
    terminal_exact: list[float] | None
    failures: int

    def means(self) -> np.ndarray:
        return np.asarray([r["mean"] for r in self.rows])


def exact_terminal_second_moment(
    gen: SpectralGenerator,
    b: NoiseCoefficient,
    T: float,
    n_steps: int,
    eps: float,
    modes: int,
) -> float:
    """Discrete Ito isometry for the trivial-drift, state-independent case:
    E |X(T) - Y(T)|_{F*}^2 = eps * sum_m theta(t_m)^2 dt * c0^2 * |K|_HS(modes)^2."""
    lam = gen.eigenvalues[:modes]
    gains2 = (1.0 - lam) ** (-2.0 * b.beta) / (1.0 - lam)
    dt = T / n_steps
    theta2 = sum(b.theta(m * dt) ** 2 for m in range(n_steps))
    return eps * dt * theta2 * b.c0**2 * float(gains2.sum())


def mc_condition_a(
    gen: SpectralGenerator,
    psi: Nonlinearity,
    b: NoiseCoefficient,
    h: Control | None,
    x: Field,
    T: float,
    n_steps: int,
    eps_list: Sequence[float],
    n_samples: int,
    seed: int,
    modes: int | None = None,
    threads: int = 1,
) -> McConditionReport:
    """Estimate E[sup_t |X^eps(t) - Y(t)|_{F*}^2] on a ladder of noise scales.

    The skeleton path is solved once; every sample shares it.  Failed samples
    (solver breakdown) are excluded when they stay below 5 percent per scale,
    otherwise the run errors out.  The log-mean is fitted linearly against
    log(eps).
    """
    eps_arr = [float(e) for e in eps_list]
    if any(e <= 0.0 for e in eps_arr) or any(
        b_ >= a for a, b_ in zip(eps_arr[:-1], eps_arr[1:])
    ):
        raise DomainError("eps_list must be positive and decreasing")
    if n_samples < 2:
        raise DomainError("need at least two samples per scale")
    modes = gen.grid.n if modes is None else int(modes)

    skel = solve_skeleton(gen, psi, b, h, x, T, n_steps)
    proj = gen._projection
    w = 1.0 / (1.0 - gen.eigenvalues)
    skel_coeffs = skel.states @ proj.T

    def one_sample(eps_index: int, sample: int):
        wiener = WienerConfig(modes=modes, seed=seed)
        idx = eps_index * n_samples + sample
        try:
            run = simulate(
                gen, psi, b, h, x, T, n_steps, eps_arr[eps_index], wiener, sample_index=idx
            )
        except SolverError:
            return math.nan, math.nan
        diff = run.path.states @ proj.T - skel_coeffs
        sq = (diff**2 * w[None, :]).sum(axis=1)
        return float(sq.max()), float(sq[-1])

    rows = []
    total_failures = 0
    terminal_exact = None
    if psi.is_zero and b.state_independent:
        terminal_exact = [
            exact_terminal_second_moment(gen, b, T, n_steps, e, modes) for e in eps_arr
        ]
    for i, eps in enumerate(eps_arr):
        if threads > 1:
            with ThreadPoolExecutor(max_workers=threads) as pool:
                results = list(pool.map(lambda s: one_sample(i, s), range(n_samples)))
        else:
            results = [one_sample(i, s) for s in range(n_samples)]
        sup_vals = np.asarray([r[0] for r in results])
        term_vals = np.asarray([r[1] for r in results])
        ok = np.isfinite(sup_vals)
        failures = int(n_samples - ok.sum())
        total_failures += failures
        if failures > 0:
            if failures / n_samples >= 0.05:
                raise SolverError(
                    f"{failures}/{n_samples} samples failed at eps={eps}"
                )
            warnings.warn(
                f"excluded {failures} failed samples at eps={eps}", stacklevel=2
            )
        sup_ok = sup_vals[ok]
        term_ok = term_vals[ok]
        n_eff = sup_ok.size
        rows.append(
            {
                "eps": eps,
                "mean": float(sup_ok.mean()),
                "stderr": float(sup_ok.std(ddof=1) / math.sqrt(n_eff)),
                "n_effective": n_eff,
                "terminal_mean": float(term_ok.mean()),
                "terminal_stderr": float(term_ok.std(ddof=1) / math.sqrt(n_eff)),
            }
        )

    means = np.asarray([r["mean"] for r in rows])
    stderrs = np.asarray([r["stderr"] for r in rows])
    if len(eps_arr) >= 2:
        coef, res, *_ = np.polyfit(np.log(eps_arr), np.log(means), 1, full=True)
        fit_residual = math.sqrt(float(res[0]) / len(eps_arr)) if res.size else 0.0
    else:
        coef, fit_residual = (math.nan, math.nan), math.nan
    pooled = np.sqrt(stderrs[:-1] ** 2 + stderrs[1:] ** 2)
    monotone = bool(np.all(np.diff(means) <= 2.0 * pooled))
    return McConditionReport(
        eps_list=eps_arr,
        rows=rows,
        slope=float(coef[0]),
        fit_residual=fit_residual,
        monotone_within_2se=monotone,
        terminal_exact=terminal_exact,
        failures=total_failures,
    )
