"""Explicit time stepping of the density and anti-derivative equations.

Both equations are advanced with forward Euler in time and first-order
upwind differences in size.  Growth moves mass to the right, so the
upwind stencil is the backward difference and node 0 carries the inflow
condition ``n(0, t) = 0`` (resp. ``M(0, t) = 0``).  The fragmentation
gain is applied explicitly through :func:`gfkit.kernel.apply_gain`; the
anti-derivative uses :func:`gfkit.kernel.apply_beta` instead.

With a size-dependent velocity ``tau(x)`` the density is transported in
conservation form ``d/dx (tau n)`` while the anti-derivative follows
``tau dM/dx``, which is the equation it actually satisfies.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .errors import BlowUpError, MissingDataError, ParameterError, StabilityError
from .grid import Grid
from .kernel import Kernel, apply_beta, apply_gain

logger = logging.getLogger(__name__)

CFL_SAFETY = 0.9
BLOW_UP_FACTOR = 1e6


@dataclass(frozen=True)
class Velocity:
    """Growth velocity ``tau(x) = tau0 + s (1 - exp(-x))``.

    ``s = 0`` is the constant-velocity case.  ``tau0`` is the lower bound
    of ``tau`` and ``s`` the supremum of ``tau'`` (attained at ``x = 0``).
    """

    tau0: float = 1.0
    s: float = 0.0

    def __post_init__(self):
        if not self.tau0 > 0:
            raise ParameterError(f"tau0 must be positive, got {self.tau0}")
        if self.s < 0:
            raise ParameterError(f"s must be >= 0, got {self.s}")

    @classmethod
    def from_config(cls, spec):
        if spec is None:
            return cls()
        kind = spec.get("type", "constant")
        if kind == "constant":
            return cls(float(spec.get("value", 1.0)), 0.0)
        if kind == "saturating":
            return cls(float(spec["tau0"]), float(spec["s"]))
        raise ParameterError(f"unknown velocity family {kind!r}")

    def to_config(self):
        if self.s == 0.0:
            return {"type": "constant", "value": self.tau0}
        return {"type": "saturating", "tau0": self.tau0, "s": self.s}

    @property
    def constant(self) -> bool:
        return self.s == 0.0

    @property
    def minimum(self) -> float:
        return self.tau0

    @property
    def sup_derivative(self) -> float:
        return self.s

    def __call__(self, x):
        return self.tau0 + self.s * (1.0 - np.exp(-np.asarray(x, dtype=float)))

    def maximum(self, grid: Grid) -> float:
        return float(self(grid.x_max))

    def theta(self, kernel: Kernel, B: float) -> float:
        """Decay rate ``(k-1) B - sup tau'`` of the anti-derivative."""
        return (kernel.k - 1.0) * B - self.s


@dataclass(frozen=True)
class SimConfig:
    """Everything needed to reproduce one run.

    ``dt=None`` selects :func:`cfl_dt`.  ``initial`` is a scenario spec
    understood by :func:`gfkit.scenarios.build_initial`; ``steady``
    holds options for the reference steady state (``method``, ``tol``,
    ``max_steps``).
    """

    kernel: Kernel
    B: float
    grid: Grid
    t_end: float
    snapshot_every: float = 0.1
    tau: Velocity = field(default_factory=Velocity)
    dt: Optional[float] = None
    initial: dict = field(default_factory=lambda: {"scenario": "steady"})
    track_M: bool = False
    clip: bool = True
    force_dt: bool = False
    steady: dict = field(default_factory=dict)

    def __post_init__(self):
        if not self.B > 0:
            raise ParameterError(f"B must be positive, got {self.B}")
        if self.t_end < 0:
            raise ParameterError("t_end must be >= 0")
        if not self.snapshot_every > 0:
            raise ParameterError("snapshot_every must be positive")
        if self.tau.s > 0 and not self.tau.theta(self.kernel, self.B) > 0:
            raise ParameterError(
                f"(k-1)B - sup tau' must be positive, got {self.tau.theta(self.kernel, self.B)}"
            )
        if self.dt is not None and not self.dt > 0:
            raise ParameterError("dt must be positive")

    @property
    def time_step(self) -> float:
        if self.dt is not None:
            return float(self.dt)
        return cfl_dt(self.grid, self.tau.maximum(self.grid), self.kernel, self.B)

    @property
    def decay_rate(self) -> float:
        """Rate of the exponential bounds: ``(k-1)B``, or ``theta`` with a
        non-constant velocity."""
        return self.tau.theta(self.kernel, self.B)


def cfl_dt(grid: Grid, tau_max: float, kernel: Kernel, B: float) -> float:
    """``0.9 * min(h / tau_max, 1 / (k B))``."""
    if not tau_max > 0:
        raise ParameterError("tau_max must be positive")
    return CFL_SAFETY * min(grid.h / tau_max, 1.0 / (kernel.k * B))


@dataclass
class ClipStats:
    """Running total of mass removed by clipping negative node values."""

    mass: float = 0.0
    events: int = 0


def _upwind(grid, f):
    d = np.empty_like(f)
    d[0] = 0.0
    d[1:] = (f[1:] - f[:-1]) / grid.h
    return d


def _check_dt(config, dt):
    if config.force_dt:
        return
    bound = cfl_dt(config.grid, config.tau.maximum(config.grid), config.kernel, config.B)
    if dt > bound * (1.0 + 1e-12):
        raise StabilityError(f"dt={dt:g} exceeds the stability bound {bound:g}")


def rhs_n(n, config: SimConfig) -> np.ndarray:
    """Right-hand side of the density equation at the nodes (zero at node 0)."""
    grid, kernel, B = config.grid, config.kernel, config.B
    n = grid.check(n)
    flux = n if config.tau.constant and config.tau.tau0 == 1.0 else config.tau(grid.nodes) * n
    gain = apply_gain(kernel, grid, n, B)
    out = -_upwind(grid, flux) - kernel.k * B * n + gain
    # fragments born in the boundary half-cell [0, h/2] are credited to
    # node 1; pinning n(0) = 0 would otherwise destroy them
    out[1] += 0.5 * gain[0]
    out[0] = 0.0
    return out


def rhs_m(m, config: SimConfig) -> np.ndarray:
    """Right-hand side of the anti-derivative equation (zero at node 0)."""
    grid, kernel, B = config.grid, config.kernel, config.B
    m = grid.check(m)
    transport = _upwind(grid, m)
    if not (config.tau.constant and config.tau.tau0 == 1.0):
        transport = config.tau(grid.nodes) * transport
    out = -transport - kernel.k * B * m + apply_beta(kernel, grid, m, B)
    out[0] = 0.0
    return out


def step_n(n, config: SimConfig, dt: float, stats: Optional[ClipStats] = None, clip=None):
    """One forward-Euler step of the density equation.

    Negative values created by the discretisation are set to zero when
    clipping is on (``config.clip`` unless overridden); the removed mass
    is added to ``stats``.
    """
    _check_dt(config, dt)
    new = n + dt * rhs_n(n, config)
    new[0] = 0.0
    if config.clip if clip is None else clip:
        neg = new < 0.0
        if neg.any():
            removed = -config.grid.integrate(np.where(neg, new, 0.0))
            new[neg] = 0.0
            if stats is not None:
                stats.mass += removed
                stats.events += 1
    return new


def step_m(m, config: SimConfig, dt: float) -> np.ndarray:
    """One forward-Euler step of the anti-derivative equation (signed, no clipping)."""
    _check_dt(config, dt)
    new = m + dt * rhs_m(m, config)
    new[0] = 0.0
    return new


@dataclass
class Trajectory:
    """Snapshots of a run together with per-snapshot diagnostics rows."""

    config: SimConfig
    times: list
    n: list
    m: Optional[list]
    rows: list
    steady: object
    rho: float
    seminorm0: object
    dt: float
    steps: int = 0
    clipped_mass: float = 0.0
    info: dict = field(default_factory=dict)

    @property
    def grid(self) -> Grid:
        return self.config.grid

    def series(self, column):
        """``(t, value)`` arrays for one diagnostics column."""
        t = np.array([r["t"] for r in self.rows])
        return t, np.array([r[column] for r in self.rows], dtype=float)


def snapshot_times(t_end, every):
    count = int(math.floor(t_end / every + 1e-9))
    times = [round(i * every, 12) for i in range(count + 1)]
    if t_end - times[-1] > 1e-9 * max(1.0, t_end):
        times.append(float(t_end))
    return times


def run(config: SimConfig, n0=None, steady=None, m0=None) -> Trajectory:
    """Advance the density (and optionally the anti-derivative) to ``t_end``.

    ``n0`` and ``steady`` default to what ``config.initial`` and
    ``config.steady`` describe.  Each snapshot interval is split into
    equal steps no larger than the configured time step, so snapshots
    land exactly on their nominal times.

    Raises
    ------
    BlowUpError
        If the L1 norm exceeds ``1e6`` times its initial value.
    """
    from . import diagnostics, scenarios

    grid = config.grid
    if n0 is None or steady is None:
        built = scenarios.build_initial(config, steady=steady)
        n0 = built.initial if n0 is None else n0
        steady = built.steady
        info = dict(built.info)
    else:
        info = {}
    n = grid.check(n0).copy()
    N = steady.values
    rho = grid.integrate(n)
    seminorm0 = diagnostics.seminorm(n, steady, config.kernel, config.B)
    m = None
    if config.track_M:
        m = grid.check(m0).copy() if m0 is not None else grid.antiderivative(n - rho * N)

    dt_max = config.time_step
    stats = ClipStats()
    l1_0 = max(grid.integrate(np.abs(n)), np.finfo(float).tiny)
    times = snapshot_times(config.t_end, config.snapshot_every)

    traj = Trajectory(
        config=config, times=[], n=[], m=[] if m is not None else None, rows=[],
        steady=steady, rho=rho, seminorm0=seminorm0, dt=dt_max, info=info,
    )

    def record(t):
        traj.times.append(t)
        traj.n.append(n.copy())
        if m is not None:
            traj.m.append(m.copy())
        traj.rows.append(
            diagnostics.snapshot_row(config, steady, rho, n, m, t, stats.mass, seminorm0.seminorm)
        )

    record(times[0])
    steps = 0
    for t0, t1 in zip(times[:-1], times[1:]):
        k = max(1, math.ceil((t1 - t0) / dt_max - 1e-9))
        dt = (t1 - t0) / k
        for _ in range(k):
            n = step_n(n, config, dt, stats)
            if m is not None:
                m = step_m(m, config, dt)
            steps += 1
            l1 = np.abs(n).sum() * grid.h
            if not np.isfinite(l1) or l1 > BLOW_UP_FACTOR * l1_0:
                raise BlowUpError(f"L1 norm reached {l1:.3g} at t={t0:g}; reduce dt")
        record(t1)
    traj.steps = steps
    traj.clipped_mass = stats.mass
    logger.info("run finished: %d steps, clipped mass %.3g", steps, stats.mass)
    return traj


def m_equation_residual(traj: Trajectory) -> np.ndarray:
    """Residual of the closed anti-derivative equation along a run.

    For every snapshot, ``M = antiderivative(n - rho N)`` is formed, the
    density is advanced by one step, and the L1 norm of
    ``(M+ - M)/dt + dM/dx + k B M - B beta[M]`` is returned (one value
    per snapshot).  The discrete operators are those of the scheme.
    """
    if traj.m is None:
        raise MissingDataError("the trajectory did not track M")
    config, grid = traj.config, traj.grid
    N = traj.steady.values
    dt = traj.dt
    out = []
    for n in traj.n:
        m = grid.antiderivative(n - traj.rho * N)
        n_next = step_n(n, config, dt, clip=False)
        m_next = grid.antiderivative(n_next - traj.rho * N)
        res = (m_next - m) / dt - rhs_m(m, config)
        res[0] = 0.0
        out.append(grid.integrate(np.abs(res)))
    return np.array(out)


def commutation_error(traj: Trajectory) -> np.ndarray:
    """``|| step_m(M) - antiderivative(step_n(n) - rho N) ||_1 / dt`` per snapshot."""
    config, grid = traj.config, traj.grid
    N = traj.steady.values
    dt = traj.dt
    out = []
    for n in traj.n:
        m = grid.antiderivative(n - traj.rho * N)
        lhs = step_m(m, config, dt)
        rhs = grid.antiderivative(step_n(n, config, dt, clip=False) - traj.rho * N)
        out.append(grid.integrate(np.abs(lhs - rhs)) / dt)
    return np.array(out)
