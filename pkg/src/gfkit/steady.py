"""Steady states of the growth-fragmentation equation.

For uniform fragmentation the steady state is ``4 B^2 x exp(-2 B x)``.
For every other kernel it is obtained as the principal eigenvector of
the discrete evolution operator: the density is advanced from a positive
seed and renormalised to unit integral after every step until two
snapshots ``1/B`` apart agree.  Because the number of fragments is
conserved, renormalisation only compensates truncation losses.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass

import numpy as np

from .errors import ConvergenceError, ParameterError
from .evolve import SimConfig, Velocity, cfl_dt, rhs_n, step_n
from .grid import Grid
from .kernel import Kernel, Variant

logger = logging.getLogger(__name__)

POSITIVE_FRACTION = 0.9


@dataclass(frozen=True)
class SteadyState:
    """Unit-integral steady profile sampled on a grid."""

    grid: Grid
    values: np.ndarray
    kernel: Kernel
    B: float
    method: str
    residual_l1: float
    iterations: int = 0

    @property
    def positive(self) -> bool:
        """``N > 0`` on interior nodes short of the truncated tail."""
        x = self.grid.nodes
        inner = (x > 0) & (x < POSITIVE_FRACTION * self.grid.x_max)
        return bool(np.all(self.values[inner] > 0))

    def sidecar(self):
        return {
            "residual_l1": self.residual_l1,
            "iterations": self.iterations,
            "method": self.method,
        }


def uniform_profile(x, B):
    x = np.asarray(x, dtype=float)
    return 4.0 * B * B * x * np.exp(-2.0 * B * x)


def steady_residual(kernel: Kernel, B: float, grid: Grid, N) -> float:
    """L1 norm of the discrete stationary residual.

    This is ``dN/dx + k B N - B int kappa N`` evaluated with the scheme's
    own operator (backward difference, :func:`~gfkit.kernel.apply_gain`,
    inflow node excluded), so that one explicit step from ``N`` moves it
    by exactly ``dt`` times this value in L1.
    """
    config = SimConfig(kernel=kernel, B=B, grid=grid, t_end=0.0, clip=False)
    return grid.integrate(np.abs(rhs_n(N, config)))


def steady_explicit_uniform(B: float, grid: Grid) -> SteadyState:
    if not B > 0:
        raise ParameterError(f"B must be positive, got {B}")
    vals = uniform_profile(grid.nodes, B)
    vals = vals / grid.integrate(vals)
    kernel = Kernel.uniform()
    return SteadyState(
        grid, vals, kernel, B, "explicit", steady_residual(kernel, B, grid, vals), 0
    )


def steady_numeric(
    kernel: Kernel,
    B: float,
    grid: Grid,
    dt=None,
    tol: float = 1e-10,
    max_steps: int = 500_000,
) -> SteadyState:
    """Renormalised long-time iteration of the discrete evolution.

    Converged when the L1 difference between snapshots ``1/B`` apart,
    divided by ``1/B``, falls below ``tol``.

    Raises
    ------
    ConvergenceError
        If ``max_steps`` steps are taken without meeting ``tol``.
    """
    if not tol > 0:
        raise ParameterError("tol must be positive")
    config = SimConfig(kernel=kernel, B=B, grid=grid, t_end=0.0, tau=Velocity(), clip=False)
    bound = cfl_dt(grid, 1.0, kernel, B)
    dt = bound if dt is None else float(dt)
    period = 1.0 / B
    per = max(1, math.ceil(period / dt - 1e-9))
    dt = period / per

    n = uniform_profile(grid.nodes, B)
    n /= grid.integrate(n)
    steps = 0
    diff = float("nan")
    while True:
        prev = n
        for _ in range(per):
            if steps >= max_steps:
                raise ConvergenceError(
                    f"steady state not converged after {steps} steps (last change {diff:.3g})",
                    residual=diff,
                    iterations=steps,
                )
            n = step_n(n, config, dt, clip=False)
            n /= grid.integrate(n)
            steps += 1
        diff = grid.integrate(np.abs(n - prev)) / period
        if diff < tol:
            break
    residual = steady_residual(kernel, B, grid, n)
    logger.info("steady state for %s: %d steps, residual %.3g", kernel, steps, residual)
    return SteadyState(grid, n, kernel, B, "long_time_iteration", residual, steps)


def steady_state(kernel: Kernel, B: float, grid: Grid, method="numeric", **kwargs) -> SteadyState:
    """Dispatch on ``method``: ``"explicit"`` (uniform kernel only) or
    ``"numeric"``; ``"auto"`` picks explicit when available."""
    if method == "auto":
        method = "explicit" if kernel.variant is Variant.UNIFORM else "numeric"
    if method == "explicit":
        if kernel.variant is not Variant.UNIFORM:
            raise ParameterError("the explicit steady state exists only for uniform fragmentation")
        return steady_explicit_uniform(B, grid)
    if method == "numeric":
        return steady_numeric(kernel, B, grid, **kwargs)
    raise ParameterError(f"unknown steady-state method {method!r}")


def fixed_point_drift(state: SteadyState, dt=None) -> float:
    """L1 change of ``state`` after evolving it for a time ``1/B``."""
    grid, B = state.grid, state.B
    config = SimConfig(kernel=state.kernel, B=B, grid=grid, t_end=0.0, clip=False)
    dt = cfl_dt(grid, 1.0, state.kernel, B) if dt is None else dt
    per = max(1, math.ceil(1.0 / (B * dt) - 1e-9))
    dt = 1.0 / (B * per)
    n = state.values.copy()
    for _ in range(per):
        n = step_n(n, config, dt, clip=False)
    return grid.integrate(np.abs(n - state.values))


__all__ = [
    "SteadyState",
    "steady_explicit_uniform",
    "steady_numeric",
    "steady_residual",
    "steady_state",
    "fixed_point_drift",
    "uniform_profile",
]
