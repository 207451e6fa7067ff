"""Strict parsing of experiment configuration files.

Configurations are single JSON documents with one block per ingredient
(grid, generator, nonlinearity, diffusion, run) plus an experiment block and
a seed.  Unknown keys are rejected everywhere so a config is always a
complete, auditable record of what ran.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .diffusion import NoiseCoefficient
from .errors import ConfigError
from .generator import SpectralGenerator
from .measure import Field, MeasureGrid
from .nonlinearity import Nonlinearity
from .skeleton import Control
from .triple import TripleContext

EXPERIMENT_TYPES = (
    "validate",
    "skeleton",
    "converge-lambda",
    "converge-nu",
    "mc-a",
    "weak-b",
    "rate",
)


def _expect_mapping(obj, where: str) -> dict:
    if not isinstance(obj, dict):
        raise ConfigError(f"{where} must be an object", field=where)
    return obj


def _take(d: dict, where: str, required: dict, optional: dict | None = None) -> dict:
    """Pull typed values out of a block, rejecting unknown keys."""
    optional = optional or {}
    out = {}
    for key in d:
        if key not in required and key not in optional:
            raise ConfigError(f"unknown key {key!r} in {where}", field=f"{where}.{key}")
    for key, conv in required.items():
        if key not in d:
            raise ConfigError(f"missing key {key!r} in {where}", field=f"{where}.{key}")
        out[key] = _convert(d[key], conv, f"{where}.{key}")
    for key, (conv, default) in optional.items():
        out[key] = _convert(d[key], conv, f"{where}.{key}") if key in d else default
    return out


def _convert(value, conv, where: str):
    try:
        if conv is float:
            if isinstance(value, bool) or not isinstance(value, (int, float)):
                raise TypeError
            value = float(value)
            if not math.isfinite(value):
                raise TypeError
            return value
        if conv is int:
            if isinstance(value, bool) or not isinstance(value, int):
                raise TypeError
            return int(value)
        if conv is str:
            if not isinstance(value, str):
                raise TypeError
            return value
        if conv is bool:
            if not isinstance(value, bool):
                raise TypeError
            return value
        if conv is list:
            if not isinstance(value, list):
                raise TypeError
            return value
        if conv is dict:
            if not isinstance(value, dict):
                raise TypeError
            return value
    except TypeError:
        pass
    raise ConfigError(f"{where} has the wrong type", field=where)


def _positive(value: float, where: str) -> float:
    if value <= 0.0:
        raise ConfigError(f"{where} must be > 0", field=where)
    return value


# -- block builders --------------------------------------------------------


def build_grid(block: dict) -> MeasureGrid:
    block = _expect_mapping(block, "grid")
    kind = block.get("type")
    if kind == "periodic1d":
        vals = _take(block, "grid", {"type": str, "n": int},
                     {"length": (float, 2.0 * math.pi)})
        if vals["n"] < 1:
            raise ConfigError("grid.n must be >= 1", field="grid.n")
        _positive(vals["length"], "grid.length")
        return MeasureGrid.periodic_1d(vals["n"], vals["length"])
    if kind == "weights":
        vals = _take(block, "grid", {"type": str, "weights": list})
        return MeasureGrid.from_weights(vals["weights"])
    raise ConfigError(f"unknown grid type {kind!r}", field="grid.type")


def build_generator(block: dict, grid: MeasureGrid, base_dir: Path) -> SpectralGenerator:
    block = _expect_mapping(block, "generator")
    vals = _take(
        block,
        "generator",
        {"type": str},
        {"alpha": (float, None), "matrix_path": (str, None)},
    )
    kind = vals["type"]
    if kind == "laplacian_periodic1d":
        if grid.labels is None:
            raise ConfigError(
                "laplacian_periodic1d requires a periodic1d grid", field="generator.type"
            )
        length = float(grid.weights[0] * grid.n)
        gen = SpectralGenerator.periodic_laplacian(grid.n, length)
    elif kind == "dense":
        if vals["matrix_path"] is None:
            raise ConfigError(
                "dense generator requires matrix_path", field="generator.matrix_path"
            )
        path = Path(vals["matrix_path"])
        if not path.is_absolute():
            path = base_dir / path
        try:
            matrix = np.loadtxt(path)
        except OSError as exc:
            raise ConfigError(
                f"cannot read matrix file: {exc}", field="generator.matrix_path"
            ) from exc
        gen = SpectralGenerator.from_dense(grid, np.atleast_2d(matrix))
    else:
        raise ConfigError(f"unknown generator type {kind!r}", field="generator.type")
    alpha = vals["alpha"]
    if alpha is not None:
        if not (0.0 < alpha <= 1.0):
            raise ConfigError(
                f"generator.alpha must lie in (0, 1], got {alpha}",
                field="generator.alpha",
            )
        gen = gen.fractional(alpha)
    return gen


def build_nonlinearity(block: dict) -> Nonlinearity:
    block = _expect_mapping(block, "nonlinearity")
    vals = _take(
        block,
        "nonlinearity",
        {"kind": str},
        {
            "k1": (float, 0.0),
            "k2": (float, 0.0),
            "m": (float, 2.0),
            "s_max": (float, 1.0),
        },
    )
    kind = vals["kind"]
    try:
        if kind == "linear":
            return Nonlinearity.linear(vals["k1"])
        if kind == "atan_saturated":
            return Nonlinearity.atan_saturated(vals["k2"])
        if kind == "linear_plus_atan":
            return Nonlinearity.linear_plus_atan(vals["k1"], vals["k2"])
        if kind == "slope_clamped_power":
            return Nonlinearity.slope_clamped_power(vals["m"], vals["s_max"])
    except Exception as exc:
        raise ConfigError(str(exc), field="nonlinearity") from exc
    raise ConfigError(f"unknown nonlinearity kind {kind!r}", field="nonlinearity.kind")


def build_diffusion(block: dict, ctx: TripleContext, horizon: float) -> NoiseCoefficient:
    block = _expect_mapping(block, "diffusion")
    vals = _take(
        block,
        "diffusion",
        {},
        {
            "c0": (float, 1.0),
            "c1": (float, 0.5),
            "c2": (float, 0.5),
            "gamma": (float, 0.5),
            "beta": (float, 1.0),
        },
    )
    try:
        return NoiseCoefficient(ctx=ctx, horizon=horizon, **vals)
    except Exception as exc:
        raise ConfigError(str(exc), field="diffusion") from exc


def build_field(block: dict, gen: SpectralGenerator, where: str) -> Field:
    block = _expect_mapping(block, where)
    kind = block.get("type")
    grid = gen.grid
    if kind == "zero":
        _take(block, where, {"type": str})
        return Field.zeros(grid)
    if kind == "constant":
        vals = _take(block, where, {"type": str, "value": float})
        return Field(grid, np.full(grid.n, vals["value"]))
    if kind == "eigenmode":
        vals = _take(block, where, {"type": str, "index": int},
                     {"amplitude": (float, 1.0)})
        if not (0 <= vals["index"] < grid.n):
            raise ConfigError(f"{where}.index out of range", field=f"{where}.index")
        return Field(grid, vals["amplitude"] * gen.modes[:, vals["index"]])
    if kind == "bump":
        vals = _take(
            block,
            where,
            {"type": str},
            {"center": (float, None), "width": (float, None), "amplitude": (float, 1.0)},
        )
        if grid.labels is None:
            raise ConfigError(f"{where}: bump needs point coordinates", field=where)
        length = float(grid.weights[0] * grid.n)
        center = vals["center"] if vals["center"] is not None else 0.5 * length
        width = vals["width"] if vals["width"] is not None else 0.1 * length
        _positive(width, f"{where}.width")
        x = grid.labels
        d = np.abs(x - center)
        d = np.minimum(d, length - d)  # periodic distance
        return Field(grid, vals["amplitude"] * np.exp(-0.5 * (d / width) ** 2))
    if kind == "values":
        vals = _take(block, where, {"type": str, "values": list})
        return Field(grid, np.asarray(vals["values"], dtype=float))
    if kind == "spectral_decay":
        # rough datum: eigencoefficient k^(-exponent) on every nonconstant mode
        vals = _take(
            block, where, {"type": str, "exponent": float},
            {"amplitude": (float, 1.0)},
        )
        idx = np.arange(grid.n, dtype=float)
        idx[0] = 1.0
        coeffs = vals["amplitude"] * idx ** (-vals["exponent"])
        coeffs[0] = 0.0
        return Field(grid, gen.from_coeffs(coeffs))
    raise ConfigError(f"unknown field type {kind!r}", field=f"{where}.type")


def build_control(
    block: dict | None, gen: SpectralGenerator, T: float, n_steps: int, where: str
) -> Control | None:
    if block is None:
        return None
    block = _expect_mapping(block, where)
    kind = block.get("type")
    grid = gen.grid
    if kind == "zero":
        _take(block, where, {"type": str})
        return None
    if kind == "constant_mode":
        vals = _take(block, where, {"type": str, "mode": int, "amplitude": float})
        if not (0 <= vals["mode"] < grid.n):
            raise ConfigError(f"{where}.mode out of range", field=f"{where}.mode")
        row = vals["amplitude"] * gen.modes[:, vals["mode"]]
        values = np.tile(row, (n_steps, 1))
        return Control(np.linspace(0.0, T, n_steps + 1), values, grid)
    if kind == "sine_mode":
        vals = _take(
            block,
            where,
            {"type": str, "mode": int, "amplitude": float},
            {"frequency": (int, 1)},
        )
        if not (0 <= vals["mode"] < grid.n):
            raise ConfigError(f"{where}.mode out of range", field=f"{where}.mode")
        if vals["frequency"] < 1:
            raise ConfigError(f"{where}.frequency must be >= 1", field=f"{where}.frequency")
        t_mid = (np.arange(n_steps) + 0.5) * (T / n_steps)
        osc = vals["amplitude"] * np.sin(2.0 * math.pi * vals["frequency"] * t_mid / T)
        values = osc[:, None] * gen.modes[:, vals["mode"]][None, :]
        return Control(np.linspace(0.0, T, n_steps + 1), values, grid)
    raise ConfigError(f"unknown control type {kind!r}", field=f"{where}.type")


# -- whole-document assembly -------------------------------------------------


@dataclass(frozen=True)
class ExperimentConfig:
    """A fully validated configuration with its constructed ingredients."""

    raw: dict
    grid: MeasureGrid
    gen: SpectralGenerator
    psi: Nonlinearity
    b: NoiseCoefficient
    x: Field
    T: float
    n_steps: int
    energy_cap: float | None
    experiment: dict
    seed: int
    out_dir: str | None


def load_raw_config(path: Path) -> dict:
    try:
        text = path.read_text(encoding="utf-8")
    except FileNotFoundError:
        raise
    except OSError as exc:
        raise ConfigError(f"cannot read config: {exc}") from exc
    try:
        raw = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config is not valid JSON: {exc}") from exc
    return _expect_mapping(raw, "config")


def parse_config(raw: dict, base_dir: Path) -> ExperimentConfig:
    top = _take(
        raw,
        "config",
        {
            "grid": dict,
            "generator": dict,
            "nonlinearity": dict,
            "diffusion": dict,
            "run": dict,
            "experiment": dict,
            "seed": int,
        },
        {"out": (str, None)},
    )
    if not (0 <= top["seed"] < 2**64):
        raise ConfigError("seed must fit in 64 bits", field="seed")
    grid = build_grid(top["grid"])
    gen = build_generator(top["generator"], grid, base_dir)
    psi = build_nonlinearity(top["nonlinearity"])
    run = _take(
        top["run"],
        "run",
        {"T": float, "N_t": int, "x": dict},
        {"energy_cap": (float, None)},
    )
    _positive(run["T"], "run.T")
    if run["N_t"] < 1:
        raise ConfigError("run.N_t must be >= 1", field="run.N_t")
    if run["energy_cap"] is not None:
        _positive(run["energy_cap"], "run.energy_cap")
    ctx = TripleContext(gen)
    b = build_diffusion(top["diffusion"], ctx, run["T"])
    x = build_field(run["x"], gen, "run.x")
    experiment = _expect_mapping(top["experiment"], "experiment")
    etype = experiment.get("type")
    if etype not in EXPERIMENT_TYPES:
        raise ConfigError(
            f"experiment.type must be one of {EXPERIMENT_TYPES}, got {etype!r}",
            field="experiment.type",
        )
    return ExperimentConfig(
        raw=raw,
        grid=grid,
        gen=gen,
        psi=psi,
        b=b,
        x=x,
        T=run["T"],
        n_steps=run["N_t"],
        energy_cap=run["energy_cap"],
        experiment=experiment,
        seed=top["seed"],
        out_dir=top["out"],
    )


def load_config(path: Path) -> ExperimentConfig:
    return parse_config(load_raw_config(path), path.resolve().parent)
