"""Named initial data and sources used by the experiments and the command line."""
from __future__ import annotations

import numpy as np

from .grid import GridSpec, StateVector

SINGLE = ("constant", "step", "boundary_jump", "random")
PAIRED = ("identical", "uniform_shift", "random_ordered", "crossing")


def constant(grid: GridSpec, value: float = 0.0) -> StateVector:
    return StateVector.constant(grid, value)


def step_profile(grid: GridSpec, amplitude: float = 1.0) -> StateVector:
    """Trace-constrained state equal to ``amplitude`` on the left half of the strip."""
    X, _ = grid.mesh()
    return StateVector.from_bulk(grid, amplitude * (X < 0.5 * grid.lx))


def boundary_jump(grid: GridSpec, amplitude: float = 1.0) -> StateVector:
    """Zero bulk, bottom boundary field ``amplitude``, top field zero."""
    return StateVector(grid, np.zeros(grid.bulk_shape), np.full(grid.nx, amplitude),
                       np.zeros(grid.nx))


def smooth_random(grid: GridSpec, rng: np.random.Generator, amplitude: float = 1.0,
                  modes: int = 3) -> StateVector:
    """Low-mode trigonometric bulk with independent low-mode boundary fields."""
    X, Y = grid.mesh()

    def field(shape_x, shape_y=None):
        out = np.zeros_like(shape_x if shape_y is None else shape_x * 1.0)
        for k in range(1, modes + 1):
            a, b = rng.standard_normal(2) / k
            phase = 2 * np.pi * k * shape_x / grid.lx
            term = a * np.cos(phase) + b * np.sin(phase)
            if shape_y is not None:
                term = term * np.cos(np.pi * rng.integers(0, modes) * shape_y / grid.ly)
            out = out + term
        return amplitude * out

    bulk = field(X, Y)
    return StateVector(grid, bulk, field(grid.x), field(grid.x))


def single(name: str, grid: GridSpec, rng: np.random.Generator, amplitude: float = 1.0):
    if name == "constant":
        return constant(grid, amplitude)
    if name == "step":
        return step_profile(grid, amplitude)
    if name == "boundary_jump":
        return boundary_jump(grid, amplitude)
    if name == "random":
        return smooth_random(grid, rng, amplitude)
    raise ValueError(f"unknown single scenario {name!r}; expected one of {SINGLE}")


def paired(name: str, grid: GridSpec, rng: np.random.Generator, amplitude: float = 1.0,
           shift: float = 0.5):
    """``(u0_1, theta_1, u0_2, theta_2)`` with time-independent sources (``None`` means zero)."""
    if name == "identical":
        u = step_profile(grid, amplitude)
        return u, None, u, None
    if name == "uniform_shift":
        u = step_profile(grid, amplitude)
        return u - shift, None, u, None
    if name == "random_ordered":
        u1 = smooth_random(grid, rng, amplitude)
        gap = smooth_random(grid, rng, amplitude).map(np.abs)
        th2 = smooth_random(grid, rng, amplitude)
        th_gap = smooth_random(grid, rng, amplitude).map(np.abs)
        return u1, th2 - th_gap, u1 + gap, th2
    if name == "crossing":
        u1 = smooth_random(grid, rng, amplitude)
        gap = smooth_random(grid, rng, amplitude).map(np.abs)
        th = smooth_random(grid, rng, amplitude)
        return u1, th, u1 + gap, th * (-1.0)
    raise ValueError(f"unknown paired scenario {name!r}; expected one of {PAIRED}")


def constant_source(theta: StateVector | None):
    if theta is None:
        return None
    return lambda t: theta
