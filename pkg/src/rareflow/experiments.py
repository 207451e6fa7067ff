"""Experiment orchestration: run a validated configuration and write artifacts.

Each experiment writes a manifest (config echo, package version, seed), a
delimited result table, a JSON summary, and a rendered figure.  Files are
written to a temporary name and renamed, so interrupted runs never leave
partial artifacts, and all serialization is canonical (sorted keys, shortest
round-trip floats) so a config plus seed determines every output byte.
"""

from __future__ import annotations

import csv
import json
from pathlib import Path

from . import __version__
from . import figures
from .config import ExperimentConfig, _take, build_control, build_field
from .diffusion import validate_hypotheses
from .errors import ConfigError
from .ldp import (
    RateProblem,
    minimize_action,
    weak_convergence_test,
)
from .nonlinearity import validate_drift_hypothesis
from .skeleton import lambda_rate_study, nu_rate_study, solve_regularized
from .spde import mc_condition_a


def _fmt(value) -> str:
    if isinstance(value, float):
        return repr(value)
    return str(value)


def write_json_atomic(path: Path, payload: dict) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    tmp = path.with_suffix(path.suffix + ".tmp")
    tmp.write_text(
        json.dumps(payload, indent=2, sort_keys=True, allow_nan=True) + "\n",
        encoding="utf-8",
    )
    tmp.replace(path)


def write_csv_atomic(path: Path, rows: list[dict], fieldnames: list[str]) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    tmp = path.with_suffix(path.suffix + ".tmp")
    with tmp.open("w", newline="", encoding="utf-8") as f:
        writer = csv.writer(f)
        writer.writerow(fieldnames)
        for row in rows:
            writer.writerow([_fmt(row[k]) for k in fieldnames])
    tmp.replace(path)


def _write_manifest(cfg: ExperimentConfig, out_dir: Path) -> None:
    write_json_atomic(
        out_dir / "manifest.json",
        {
            "tool": "rareflow",
            "version": __version__,
            "seed": cfg.seed,
            "experiment": cfg.experiment["type"],
            "config": cfg.raw,
        },
    )


def run_experiment(
    cfg: ExperimentConfig,
    out_dir: Path,
    render_figures: bool = True,
    threads: int = 1,
) -> dict:
    """Run the configured experiment, write its artifacts, return the summary."""
    out_dir.mkdir(parents=True, exist_ok=True)
    _write_manifest(cfg, out_dir)
    etype = cfg.experiment["type"]
    runner = _RUNNERS[etype]
    return runner(cfg, out_dir, render_figures, threads)


# -- individual experiments ------------------------------------------------------


def _run_validate(cfg: ExperimentConfig, out_dir: Path, render: bool, threads: int):
    spec = _take(
        cfg.experiment,
        "experiment",
        {"type": str},
        {
            "samples": (int, 10_000),
            "times": (list, [0.01, 0.1, 1.0]),
            "submarkov_samples": (int, 32),
        },
    )
    times = [float(t) for t in spec["times"]]
    sub = cfg.gen.validate_submarkov(
        times, n_samples=spec["submarkov_samples"], seed=cfg.seed
    )
    drift = validate_drift_hypothesis(cfg.psi, spec["samples"], cfg.seed)
    noise = validate_hypotheses(cfg.b, spec["samples"], cfg.seed)
    checks = [
        {
            "check": "semigroup_contraction",
            "worst": sub.worst["contraction_violation"],
            "threshold": sub.tolerance,
            "passed": sub.worst["contraction_violation"] <= sub.tolerance,
        },
        {
            "check": "semigroup_positivity",
            "worst": sub.worst["positivity_violation"],
            "threshold": sub.tolerance,
            "passed": sub.worst["positivity_violation"] <= sub.tolerance,
        },
        {
            "check": "semigroup_submarkov",
            "worst": sub.worst["submarkov_violation"],
            "threshold": sub.tolerance,
            "passed": sub.worst["submarkov_violation"] <= sub.tolerance,
        },
        {
            "check": "drift_monotone",
            "worst": -drift.monotone_margin,
            "threshold": drift.tolerance,
            "passed": drift.monotone_margin >= -drift.tolerance,
        },
        {
            "check": "drift_lipschitz",
            "worst": -drift.lipschitz_margin,
            "threshold": drift.tolerance,
            "passed": drift.lipschitz_margin >= -drift.tolerance,
        },
        {
            "check": "drift_quadratic_inequality",
            "worst": -drift.inequality.worst_margin,
            "threshold": drift.tolerance,
            "passed": drift.inequality.passed,
        },
        {
            "check": "noise_lipschitz",
            "worst": -noise.lipschitz_margin,
            "threshold": noise.tolerance,
            "passed": noise.lipschitz_margin >= -noise.tolerance,
        },
        {
            "check": "noise_growth",
            "worst": -noise.growth_margin,
            "threshold": noise.tolerance,
            "passed": noise.growth_margin >= -noise.tolerance,
        },
        {
            "check": "noise_time_holder",
            "worst": -noise.holder_margin,
            "threshold": noise.tolerance,
            "passed": noise.holder_margin >= -noise.tolerance,
        },
    ]
    write_csv_atomic(
        out_dir / "validate.csv", checks, ["check", "worst", "threshold", "passed"]
    )
    summary = {
        "all_passed": all(c["passed"] for c in checks),
        "checks": checks,
        "alpha_tilde": cfg.psi.alpha_tilde(),
        "noise_constants": {
            "lipschitz": noise.lipschitz_constant,
            "growth": noise.growth_constant,
            "holder": noise.holder_constant,
        },
    }
    write_json_atomic(out_dir / "summary.json", summary)
    if render:
        margins = {c["check"]: -c["worst"] for c in checks}
        figures.save_png(
            figures.validate_figure(margins, "hypothesis validation margins"),
            out_dir / "validate.png",
        )
    return summary


def _run_skeleton(cfg: ExperimentConfig, out_dir: Path, render: bool, threads: int):
    spec = _take(
        cfg.experiment,
        "experiment",
        {"type": str},
        {"control": (dict, None), "nu": (float, 0.0), "lambda": (float, 0.0)},
    )
    h = build_control(spec["control"], cfg.gen, cfg.T, cfg.n_steps, "experiment.control")
    if cfg.energy_cap is not None and h is not None and not h.in_ball(cfg.energy_cap):
        raise ConfigError(
            f"control energy {h.squared_l2():.6g} exceeds the cap {cfg.energy_cap}",
            field="run.energy_cap",
        )
    path = solve_regularized(
        cfg.gen, cfg.psi, cfg.b, h, cfg.x, cfg.T, cfg.n_steps,
        nu=spec["nu"], lam=spec["lambda"],
    )
    write_csv_atomic(
        out_dir / "path.csv",
        path.rows(),
        ["t", "l2_norm", "fstar_norm", "psi_integral_f12", "step_iterations", "step_residual"],
    )
    write_json_atomic(out_dir / "path.json", path.to_json_dict())
    summary = {
        "terminal_l2": float(path.l2_norms[-1]),
        "terminal_fstar": float(path.fstar_norms[-1]),
        "max_residual": float(path.residuals.max()),
        "control_energy": path.control_energy,
    }
    write_json_atomic(out_dir / "summary.json", summary)
    if render:
        figures.save_png(
            figures.path_figure(path, "controlled trajectory diagnostics"),
            out_dir / "path.png",
        )
    return summary


def _run_converge_lambda(cfg: ExperimentConfig, out_dir: Path, render: bool, threads: int):
    spec = _take(
        cfg.experiment,
        "experiment",
        {"type": str, "lambdas": list},
        {"nu": (float, 0.05), "control": (dict, None)},
    )
    h = build_control(spec["control"], cfg.gen, cfg.T, cfg.n_steps, "experiment.control")
    lambdas = [float(v) for v in spec["lambdas"]]
    report = lambda_rate_study(
        cfg.gen, cfg.psi, cfg.b, h, cfg.x, cfg.T, cfg.n_steps, spec["nu"], lambdas
    )
    return _finish_rate(report, out_dir, render, "lambda + lambda'", "relaxation-rate study")


def _run_converge_nu(cfg: ExperimentConfig, out_dir: Path, render: bool, threads: int):
    spec = _take(
        cfg.experiment,
        "experiment",
        {"type": str, "nus": list},
        {"control": (dict, None)},
    )
    h = build_control(spec["control"], cfg.gen, cfg.T, cfg.n_steps, "experiment.control")
    nus = [float(v) for v in spec["nus"]]
    report = nu_rate_study(
        cfg.gen, cfg.psi, cfg.b, h, cfg.x, cfg.T, cfg.n_steps, nus
    )
    return _finish_rate(report, out_dir, render, "nu^2 + nu'^2", "shift-rate study")


def _finish_rate(report, out_dir: Path, render: bool, xlabel: str, title: str):
    rows = report.rows()
    write_csv_atomic(out_dir / "rate.csv", rows, list(rows[0].keys()))
    summary = {
        "slope": report.slope,
        "intercept": report.intercept,
        "fit_residual": report.fit_residual,
        "monotone": report.monotone,
    }
    write_json_atomic(out_dir / "summary.json", summary)
    if render:
        figures.save_png(figures.rate_figure(report, xlabel, title), out_dir / "rate.png")
    return summary


def _run_mc_a(cfg: ExperimentConfig, out_dir: Path, render: bool, threads: int):
    spec = _take(
        cfg.experiment,
        "experiment",
        {"type": str, "eps_list": list, "n_samples": int},
        {"control": (dict, None), "modes": (int, None)},
    )
    h = build_control(spec["control"], cfg.gen, cfg.T, cfg.n_steps, "experiment.control")
    report = mc_condition_a(
        cfg.gen,
        cfg.psi,
        cfg.b,
        h,
        cfg.x,
        cfg.T,
        cfg.n_steps,
        [float(e) for e in spec["eps_list"]],
        spec["n_samples"],
        cfg.seed,
        modes=spec["modes"],
        threads=threads,
    )
    write_csv_atomic(
        out_dir / "mc.csv",
        report.rows,
        ["eps", "mean", "stderr", "n_effective", "terminal_mean", "terminal_stderr"],
    )
    summary = {
        "slope": report.slope,
        "fit_residual": report.fit_residual,
        "monotone_within_2se": report.monotone_within_2se,
        "failures": report.failures,
        "terminal_exact": report.terminal_exact,
    }
    write_json_atomic(out_dir / "summary.json", summary)
    if render:
        figures.save_png(
            figures.mc_figure(report, "small-noise gap decay"), out_dir / "mc.png"
        )
    return summary


def _run_weak_b(cfg: ExperimentConfig, out_dir: Path, render: bool, threads: int):
    spec = _take(
        cfg.experiment,
        "experiment",
        {"type": str, "amplitude": float, "n_list": list},
        {"control": (dict, None), "mode_index": (int, 1)},
    )
    h = build_control(spec["control"], cfg.gen, cfg.T, cfg.n_steps, "experiment.control")
    report = weak_convergence_test(
        cfg.gen,
        cfg.psi,
        cfg.b,
        cfg.x,
        cfg.T,
        cfg.n_steps,
        h,
        spec["amplitude"],
        [int(v) for v in spec["n_list"]],
        mode_index=spec["mode_index"],
    )
    write_csv_atomic(out_dir / "decay.csv", report.rows(), ["n", "d_n"])
    summary = {
        "strictly_decreasing": report.strictly_decreasing,
        "final_ratio": report.final_ratio,
        "passed": report.passed,
    }
    write_json_atomic(out_dir / "summary.json", summary)
    if render:
        figures.save_png(
            figures.decay_figure(report, "oscillatory-control gap decay"),
            out_dir / "decay.png",
        )
    return summary


def _run_rate(cfg: ExperimentConfig, out_dir: Path, render: bool, threads: int):
    spec = _take(
        cfg.experiment,
        "experiment",
        {"type": str, "target": dict},
        {
            "terminal_tol": (float, 1e-3),
            "modes": (int, 3),
            "cells": (int, 8),
            "penalties": (list, None),
            "maxiter": (int, 200),
        },
    )
    target = build_field(spec["target"], cfg.gen, "experiment.target")
    problem = RateProblem(
        gen=cfg.gen,
        psi=cfg.psi,
        b=cfg.b,
        x=cfg.x,
        T=cfg.T,
        n_steps=cfg.n_steps,
        target=target,
        terminal_tol=spec["terminal_tol"],
        control_modes=spec["modes"],
        control_cells=spec["cells"],
        energy_cap=cfg.energy_cap,
    )
    penalties = (
        [float(p) for p in spec["penalties"]] if spec["penalties"] is not None else None
    )
    kwargs = {"maxiter": spec["maxiter"]}
    if penalties is not None:
        kwargs["penalties"] = penalties
    result = minimize_action(problem, **kwargs)
    summary = {
        "energy": result.energy,
        "endpoint_gap": result.endpoint_gap,
        "converged": result.converged,
        "within_terminal_tol": result.endpoint_gap <= problem.terminal_tol,
        "stages": result.stages,
        "coefficients": result.coefficients.tolist(),
        "objective_evaluations": result.objective_evaluations,
    }
    write_json_atomic(out_dir / "control.json", summary)
    write_csv_atomic(
        out_dir / "stages.csv",
        result.stages,
        ["delta", "objective", "iterations", "status"],
    )
    if render:
        figures.save_png(
            figures.control_figure(result.coefficients, "minimizing control coefficients"),
            out_dir / "control.png",
        )
    return summary


_RUNNERS = {
    "validate": _run_validate,
    "skeleton": _run_skeleton,
    "converge-lambda": _run_converge_lambda,
    "converge-nu": _run_converge_nu,
    "mc-a": _run_mc_a,
    "weak-b": _run_weak_b,
    "rate": _run_rate,
}
