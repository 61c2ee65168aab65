"""Iterated maps, attractor classification and empirical basins of attraction."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .regression import SpectrumReport
from .seeding import derive_rng

DEFAULT_TOL = 1e-2
DEFAULT_MAX_ITER = 50
DEFAULT_SAMPLES = 100


class IterationDiverged(FloatingPointError):
    def __init__(self, iteration: int):
        super().__init__(f"iterated map produced a non-finite state at iteration {iteration}")
        self.iteration = iteration


def mse(x, target) -> float:
    """Mean squared error over coordinates."""
    d = np.asarray(x, dtype=np.float64) - np.asarray(target, dtype=np.float64)
    with np.errstate(over="ignore"):
        return float(np.mean(d * d))


@dataclass
class IterationTrace:
    states: list
    converged: bool
    iterations_used: int
    final_mse: float


def iterate(fmap, x0, target, max_iter: int = DEFAULT_MAX_ITER, tol: float = DEFAULT_TOL) -> IterationTrace:
    """Apply ``fmap`` until the MSE to ``target`` drops below ``tol`` (checked after each step)."""
    if max_iter < 1:
        raise ValueError(f"max_iter must be >= 1, got {max_iter}")
    x = np.asarray(x0, dtype=np.float64)
    states = [x]
    err = np.inf
    for k in range(1, max_iter + 1):
        with np.errstate(over="ignore", invalid="ignore"):
            x = np.asarray(fmap(x), dtype=np.float64)
        if not np.all(np.isfinite(x)):
            raise IterationDiverged(k)
        states.append(x)
        err = mse(x, target)
        if err < tol:
            return IterationTrace(states, True, k, err)
    return IterationTrace(states, False, max_iter, err)


def is_attractor(rep: SpectrumReport, margin: float = 0.0) -> bool:
    """Sufficient condition for a fixed point to attract: all |eigenvalues| < 1 - margin."""
    if margin < 0:
        raise ValueError("margin must be non-negative")
    return rep.largest_norm < 1.0 - margin


@dataclass(frozen=True)
class BasinReport:
    noise_radius: float
    samples: int
    successes: int
    per_point_rates: np.ndarray

    @property
    def success_rate(self) -> float:
        return self.successes / self.samples

    @property
    def standard_error(self) -> float:
        p = self.success_rate
        return float(np.sqrt(p * (1.0 - p) / self.samples))


def point_rng(seed: int, point: int) -> np.random.Generator:
    """Independent stream for one training point, derived from the master seed."""
    return derive_rng(seed, "basin", point)


def basin_probe(fmap, fixed_points, sigma: float, samples: int = DEFAULT_SAMPLES, seed: int = 0,
                max_iter: int = DEFAULT_MAX_ITER, tol: float = DEFAULT_TOL) -> BasinReport:
    """Fraction of noisy copies x_i + sigma g that iterate back to their own x_i.

    ``fixed_points`` holds one point per column.  A sample whose iterates blow
    up counts as a failure.
    """
    if samples < 1:
        raise ValueError("samples must be >= 1")
    if sigma < 0:
        raise ValueError("noise radius must be non-negative")
    P = np.asarray(fixed_points, dtype=np.float64)
    if P.ndim == 1:
        P = P[None, :]
    n0, n = P.shape
    hits = np.zeros(n, dtype=int)
    for i in range(n):
        noise = point_rng(seed, i).standard_normal((samples, n0))
        for g in noise:
            try:
                tr = iterate(fmap, P[:, i] + sigma * g, P[:, i], max_iter, tol)
            except IterationDiverged:
                continue
            hits[i] += tr.converged
    return BasinReport(float(sigma), n * samples, int(hits.sum()), hits / samples)
