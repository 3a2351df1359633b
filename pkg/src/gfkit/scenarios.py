"""Named initial conditions and exact-solution oracles.

``eta_mode``
    Uniform fragmentation: ``rho N + exp(-B t) eta`` with
    ``eta(x) = x (B x - 2) exp(-B x)`` is an exact solution.
``xi_mode``
    Equal mitosis: ``rho N + exp(-B t) xi`` with ``xi(x) = N'(x/2) / 2``,
    built from the numerical steady state.
``perturbed_steady``
    ``rho N`` plus a mean-zero raised-cosine bump, for any kernel.
``tau``
    Perturbed steady data transported with a saturating velocity.
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .errors import ConfigError, ScenarioError
from .evolve import SimConfig, Velocity
from .grid import Grid, read_csv
from .kernel import Kernel, Variant
from .steady import SteadyState, steady_explicit_uniform, steady_state, uniform_profile

ORACLE_RESIDUAL = 1e-6
ZERO_MEAN_TOL = 1e-3


@dataclass
class Scenario:
    name: str
    kernel: Kernel
    B: float
    rho: float
    initial: np.ndarray
    steady: SteadyState
    exact_solution: Optional[Callable] = None
    expected_rate: Optional[float] = None
    velocity: Velocity = field(default_factory=Velocity)
    info: dict = field(default_factory=dict)

    @property
    def grid(self) -> Grid:
        return self.steady.grid

    def exact(self, t):
        if self.exact_solution is None:
            raise ScenarioError(f"scenario {self.name!r} has no exact solution")
        return self.exact_solution(t)


def eta_profile(x, B):
    x = np.asarray(x, dtype=float)
    return x * (B * x - 2.0) * np.exp(-B * x)


def eta_antiderivative(x, B):
    """``int_0^x eta = -B x^2 exp(-B x)``."""
    x = np.asarray(x, dtype=float)
    return -B * x * x * np.exp(-B * x)


def eta_mode(B: float, rho: float, grid: Grid) -> Scenario:
    """Uniform kernel, initial data ``rho N + eta`` with the explicit ``N``."""
    if not (B > 0 and rho > 0):
        raise ScenarioError("B and rho must be positive")
    N = steady_explicit_uniform(B, grid)
    eta = eta_profile(grid.nodes, B)
    initial = rho * N.values + eta
    info = {"perturbation_integral": grid.integrate(eta), "perturbation_l1": grid.integrate(np.abs(eta))}
    negative = -grid.integrate(np.minimum(initial, 0.0))
    if negative > 0:
        warnings.warn(
            f"rho={rho} leaves negative mass {negative:.3g} in the initial data; "
            "clipping will remove it",
            stacklevel=2,
        )
    info["negative_mass"] = negative
    Nv = N.values

    def exact(t):
        return rho * Nv + np.exp(-B * t) * eta

    return Scenario("eta_mode", Kernel.uniform(), B, rho, initial, N, exact, B, info=info)


def xi_profile(N: SteadyState) -> np.ndarray:
    """``xi(x) = N'(x/2) / 2`` from central differences and interpolation."""
    grid = N.grid
    dN = grid.differentiate(N.values)
    return 0.5 * grid.interpolate(dN, 0.5 * grid.nodes)


def xi_mode(B: float, rho: float, grid: Grid, N_mitosis: Optional[SteadyState] = None) -> Scenario:
    """Equal mitosis, initial data ``rho N + xi``.

    ``rho N + xi`` changes sign in the tail for every ``rho``; run it
    with clipping disabled.

    Raises
    ------
    ScenarioError
        If the steady state is not an equal-mitosis state of residual
        below ``1e-6``.
    """
    kernel = Kernel.equal_mitosis()
    if N_mitosis is None:
        N_mitosis = steady_state(kernel, B, grid, "numeric")
    if N_mitosis.kernel != kernel or N_mitosis.B != B:
        raise ScenarioError("xi_mode needs the equal-mitosis steady state for the same B")
    if not N_mitosis.residual_l1 < ORACLE_RESIDUAL:
        raise ScenarioError(
            f"steady state residual {N_mitosis.residual_l1:.3g} too large for the xi oracle"
        )
    grid = N_mitosis.grid
    xi = xi_profile(N_mitosis)
    integral = grid.integrate(xi)
    if abs(integral) > ZERO_MEAN_TOL * grid.integrate(np.abs(xi)):
        raise ScenarioError(f"xi does not have zero mean (integral {integral:.3g})")
    initial = rho * N_mitosis.values + xi
    info = {
        "perturbation_integral": integral,
        "perturbation_l1": grid.integrate(np.abs(xi)),
        "xi0": float(xi[0]),
        "negative_mass": -grid.integrate(np.minimum(initial, 0.0)),
    }
    Nv = N_mitosis.values

    def exact(t):
        return rho * Nv + np.exp(-B * t) * xi

    return Scenario("xi_mode", kernel, B, rho, initial, N_mitosis, exact, B, info=info)


def raised_cosine(x, center, width, amplitude):
    x = np.asarray(x, dtype=float)
    z = (x - center) / width
    return np.where(np.abs(z) < 1.0, amplitude * 0.5 * (1.0 + np.cos(np.pi * z)), 0.0)


def default_bump(B):
    return {"center": 1.5 / B, "width": 0.75 / B, "amplitude": 0.3 * B}


def perturbed_steady(kernel, B, rho, bump, grid, N: SteadyState) -> Scenario:
    """``rho N + b - (int b) N`` with ``b`` a raised-cosine bump.

    Raises
    ------
    ScenarioError
        If the resulting initial data is negative somewhere.
    """
    bump = dict(bump)
    b = raised_cosine(grid.nodes, bump["center"], bump["width"], bump["amplitude"])
    pert = b - grid.integrate(b) * N.values
    initial = rho * N.values + pert
    scale = np.abs(initial).max() if initial.size else 1.0
    if initial.min() < -1e-14 * scale:
        raise ScenarioError(
            f"bump amplitude {bump['amplitude']} makes the initial data negative"
        )
    initial = np.maximum(initial, 0.0)
    info = {
        "perturbation_integral": grid.integrate(pert),
        "perturbation_l1": grid.integrate(np.abs(pert)),
        "bump": bump,
    }
    return Scenario(
        "perturbed_steady", kernel, B, rho, initial, N, None, (kernel.k - 1.0) * B, info=info
    )


def tau_scenario(tau0, s, kernel, B, grid, N: SteadyState, rho=1.0, bump=None) -> Scenario:
    """Perturbed steady data with velocity ``tau0 + s (1 - exp(-x))``.

    Only the decay of ``int |M|`` at rate ``theta = (k-1) B - s`` is
    certified: ``N`` is the constant-velocity steady state, which is not
    stationary for this velocity.

    Raises
    ------
    ScenarioError
        If ``theta <= 0``.
    """
    velocity = Velocity(tau0, s)
    theta = velocity.theta(kernel, B)
    if not theta > 0:
        raise ScenarioError(f"(k-1)B - sup tau' = {theta:g} must be positive")
    base = perturbed_steady(kernel, B, rho, bump or default_bump(B), grid, N)
    base.name = "tau"
    base.velocity = velocity
    base.expected_rate = theta
    base.info.update({"theta": theta, "sup_tau_prime": s, "tau_min": tau0})
    return base


@dataclass
class BuiltInitial:
    initial: np.ndarray
    steady: SteadyState
    scenario: Optional[Scenario]
    info: dict


def reference_steady(config: SimConfig) -> SteadyState:
    opts = dict(config.steady)
    method = opts.pop("method", "numeric")
    if method == "explicit" and config.kernel.variant is not Variant.UNIFORM:
        raise ConfigError("steady.method 'explicit' requires the uniform kernel")
    return steady_state(config.kernel, config.B, config.grid, method, **opts)


def build_initial(config: SimConfig, steady: Optional[SteadyState] = None) -> BuiltInitial:
    """Resolve ``config.initial`` into node values and a reference steady state."""
    spec = dict(config.initial or {"scenario": "steady"})
    name = spec.pop("scenario", "steady")
    grid, kernel, B = config.grid, config.kernel, config.B
    rho = float(spec.get("rho", 1.0))
    if name in ("eta_mode", "xi_mode"):
        expected = Variant.UNIFORM if name == "eta_mode" else Variant.EQUAL_MITOSIS
        if kernel.variant is not expected:
            raise ConfigError(f"{name} requires the {expected.value} kernel")
    if steady is None:
        steady = reference_steady(config)
    if name == "steady":
        initial = rho * steady.values
        scen = None
    elif name == "eta_mode":
        scen = eta_mode(B, rho, grid)
        initial = scen.initial
    elif name == "xi_mode":
        scen = xi_mode(B, rho, grid, steady)
        initial = scen.initial
    elif name in ("perturbed_steady", "tau"):
        bump = {key: float(spec[key]) for key in ("center", "width", "amplitude") if key in spec}
        bump = {**default_bump(B), **bump}
        scen = perturbed_steady(kernel, B, rho, bump, grid, steady)
        initial = scen.initial
    elif name == "csv":
        if "path" not in spec:
            raise ConfigError("csv initial condition needs a 'path'")
        _, initial = read_csv(spec["path"], grid)
        scen = None
    else:
        raise ConfigError(f"unknown scenario {name!r}")
    if config.clip and initial.min() < 0:
        warnings.warn(
            f"initial data of {name!r} is negative somewhere; clipping is enabled", stacklevel=2
        )
    info = {"scenario": name}
    if scen is not None:
        info.update(scen.info)
    return BuiltInitial(np.array(initial, dtype=float), steady, scen, info)


__all__ = [
    "Scenario",
    "eta_mode",
    "xi_mode",
    "perturbed_steady",
    "tau_scenario",
    "build_initial",
    "eta_profile",
    "eta_antiderivative",
    "xi_profile",
    "raised_cosine",
    "uniform_profile",
]
