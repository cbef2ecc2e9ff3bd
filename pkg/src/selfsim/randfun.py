"""Seeded random test functions on K and on the cograph union."""

from __future__ import annotations

import numpy as np

from .bimodule import CographFunction, SampledFunction
from .cograph import CographSample
from .ifs import SampleGrid


def _scale(system):
    return 3.0 / max(system.hull_radius, 1e-12)


def random_function(grid: SampleGrid, rng, terms: int = 3) -> SampledFunction:
    """Trigonometric polynomial ``sum_k c_k exp(i a_k . x)`` with Gaussian data."""
    d = grid.system.dimension
    s = _scale(grid.system)
    c = (rng.normal(size=terms) + 1j * rng.normal(size=terms)) / np.sqrt(2 * terms)
    a = rng.normal(size=(terms, d)) * s
    return SampledFunction(grid, lambda x: np.exp(1j * (x @ a.T)) @ c)


def random_cograph_function(sample: CographSample, rng, terms: int = 3) -> CographFunction:
    """``f(x, y) = sum_k c_k exp(i (a_k . x + b_k . y))`` with Gaussian data."""
    d = sample.system.dimension
    s = _scale(sample.system)
    c = (rng.normal(size=terms) + 1j * rng.normal(size=terms)) / np.sqrt(2 * terms)
    a = rng.normal(size=(terms, d)) * s
    b = rng.normal(size=(terms, d)) * s
    return CographFunction.from_callable(
        sample, lambda x, y: np.exp(1j * (x @ a.T + y @ b.T)) @ c
    )


def random_positive_function(grid: SampleGrid, rng, bumps: int = 3) -> SampledFunction:
    """``0.5 + 0.5 sum_j w_j exp(-|x - p_j|^2 / (2 s^2))`` with centers on the grid."""
    system = grid.system
    centers = grid.points[rng.integers(0, len(grid), size=bumps)]
    weights = rng.uniform(0.2, 1.0, size=bumps)
    width = system.hull_radius * rng.uniform(0.1, 0.4)

    def fn(x):
        sq = ((x[:, None, :] - centers[None]) ** 2).sum(axis=2)
        return 0.5 + 0.5 * np.exp(-sq / (2 * width**2)) @ weights

    return SampledFunction(grid, lambda x: fn(x).astype(complex))


def random_real_function(grid: SampleGrid, rng) -> SampledFunction:
    """Real-valued variant, handy for positivity and adjoint checks."""
    f = random_function(grid, rng)
    return SampledFunction(grid, lambda x: f.evaluate(x).real.astype(complex))
