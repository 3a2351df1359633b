"""Fragment distributions and the operators they induce.

Four families are supported:

``uniform``          kappa(x, y) = 2/y on x <= y, k = 2
``equal_mitosis``    kappa(x, y) = 2 delta(x - y/2), k = 2
``general_mitosis``  kappa(x, y) = delta(x - s y) + delta(x - (1-s) y), k = 2
``homogeneous``      kappa(x, y) = (2+a) x^a / y^(1+a) on x <= y, k = (2+a)/(1+a)

The derived kernel ``beta(x, y) = -d/dy int_0^x kappa(z, y) dz`` drives the
equation satisfied by the anti-derivative of a solution.  Dirac kernels
are never smoothed: their gain and beta operators are applied through
the exact compositions (``n(2x)``, ``n(x/s)`` ...) evaluated by linear
interpolation on the grid.  Density kernels use the trapezoid rule of
the grid on the integration range ``[x, x_max]``.
"""
from __future__ import annotations

import enum
import warnings
from dataclasses import dataclass
from functools import lru_cache
from typing import NamedTuple, Optional

import numpy as np
from scipy.integrate import quad

from .errors import DomainError, ParameterError
from .grid import Grid

SMALL_SIGMA = 0.05


class Variant(str, enum.Enum):
    UNIFORM = "uniform"
    EQUAL_MITOSIS = "equal_mitosis"
    GENERAL_MITOSIS = "general_mitosis"
    HOMOGENEOUS = "homogeneous"


@dataclass(frozen=True)
class Kernel:
    """A fragment distribution ``kappa(x, y)``.

    Use the named constructors (:meth:`uniform`, :meth:`equal_mitosis`,
    :meth:`general_mitosis`, :meth:`homogeneous`) or :meth:`from_config`.
    """

    variant: Variant
    sigma: Optional[float] = None
    alpha: Optional[float] = None

    def __post_init__(self):
        object.__setattr__(self, "variant", Variant(self.variant))
        if self.variant is Variant.GENERAL_MITOSIS:
            if self.sigma is None or not 0.0 < self.sigma <= 0.5:
                raise ParameterError(f"sigma must lie in (0, 1/2], got {self.sigma}")
            object.__setattr__(self, "sigma", float(self.sigma))
            if self.sigma < SMALL_SIGMA:
                warnings.warn(
                    f"sigma={self.sigma} is close to the age-structured limit; "
                    "fragments of size x/sigma leave the grid quickly",
                    stacklevel=3,
                )
        elif self.sigma is not None:
            raise ParameterError("sigma only applies to general_mitosis")
        if self.variant is Variant.HOMOGENEOUS:
            if self.alpha is None or not self.alpha > -1.0:
                raise ParameterError(f"alpha must be > -1, got {self.alpha}")
            object.__setattr__(self, "alpha", float(self.alpha))
        elif self.alpha is not None:
            raise ParameterError("alpha only applies to homogeneous")

    @classmethod
    def uniform(cls):
        return cls(Variant.UNIFORM)

    @classmethod
    def equal_mitosis(cls):
        return cls(Variant.EQUAL_MITOSIS)

    @classmethod
    def general_mitosis(cls, sigma):
        return cls(Variant.GENERAL_MITOSIS, sigma=sigma)

    @classmethod
    def homogeneous(cls, alpha):
        return cls(Variant.HOMOGENEOUS, alpha=alpha)

    @classmethod
    def from_config(cls, spec):
        """Build from ``{"type": ..., "sigma": ..., "alpha": ...}``."""
        if isinstance(spec, str):
            spec = {"type": spec}
        try:
            variant = Variant(spec["type"])
        except (KeyError, ValueError, TypeError) as exc:
            raise ParameterError(f"unknown kernel spec {spec!r}") from exc
        return cls(variant, sigma=spec.get("sigma"), alpha=spec.get("alpha"))

    def to_config(self):
        out = {"type": self.variant.value}
        if self.sigma is not None:
            out["sigma"] = self.sigma
        if self.alpha is not None:
            out["alpha"] = self.alpha
        return out

    @property
    def k(self) -> float:
        """Mean number of fragments per division event."""
        if self.variant is Variant.HOMOGENEOUS:
            return (2.0 + self.alpha) / (1.0 + self.alpha)
        return 2.0

    @property
    def atomic(self) -> bool:
        return self.variant in (Variant.EQUAL_MITOSIS, Variant.GENERAL_MITOSIS)

    @property
    def density_exponent(self) -> float:
        """``alpha`` of the density form; uniform is the ``alpha = 0`` member."""
        if self.variant is Variant.UNIFORM:
            return 0.0
        if self.variant is Variant.HOMOGENEOUS:
            return self.alpha
        raise ParameterError(f"{self.variant.value} has no density form")

    def __str__(self):
        if self.sigma is not None:
            return f"{self.variant.value}(sigma={self.sigma:g})"
        if self.alpha is not None:
            return f"{self.variant.value}(alpha={self.alpha:g})"
        return self.variant.value


def kernel_k(kernel: Kernel) -> float:
    return kernel.k


class Atom(NamedTuple):
    position: float
    weight: float


def kappa_atoms(kernel, y):
    """Dirac atoms of ``kappa(., y)`` for the mitosis families."""
    if kernel.variant is Variant.EQUAL_MITOSIS:
        return [Atom(0.5 * y, 2.0)]
    if kernel.variant is Variant.GENERAL_MITOSIS:
        s = kernel.sigma
        return [Atom(s * y, 1.0), Atom((1.0 - s) * y, 1.0)]
    raise ParameterError(f"{kernel} is a density kernel")


def beta_atoms(kernel, y):
    """Dirac atoms of ``beta(., y)``: ``delta(x - y/2)`` for equal mitosis,
    ``s delta(x - s y) + (1-s) delta(x - (1-s) y)`` for general mitosis."""
    if kernel.variant is Variant.EQUAL_MITOSIS:
        return [Atom(0.5 * y, 1.0)]
    if kernel.variant is Variant.GENERAL_MITOSIS:
        s = kernel.sigma
        return [Atom(s * y, s), Atom((1.0 - s) * y, 1.0 - s)]
    raise ParameterError(f"{kernel} is a density kernel")


def kappa_density(kernel, x, y):
    a = kernel.density_exponent
    x, y = np.asarray(x, float), np.asarray(y, float)
    with np.errstate(divide="ignore", invalid="ignore"):
        val = (2.0 + a) * np.power(x, a) / np.power(y, 1.0 + a)
    return np.where((x <= y) & (y > 0), val, 0.0)


def beta_density(kernel, x, y):
    a = kernel.density_exponent
    x, y = np.asarray(x, float), np.asarray(y, float)
    with np.errstate(divide="ignore", invalid="ignore"):
        val = (2.0 + a) * np.power(x, 1.0 + a) / np.power(y, 2.0 + a)
    return np.where((y > x) & (y > 0), val, 0.0)


def cumulative(kernel: Kernel, x: float, y: float) -> float:
    """``K(x, y) = int_0^x kappa(z, y) dz``."""
    if y <= 0:
        raise DomainError(f"parent size must be positive, got y={y}")
    if x < 0:
        raise DomainError(f"fragment size must be >= 0, got x={x}")
    v = kernel.variant
    if v is Variant.EQUAL_MITOSIS:
        return 2.0 if y <= 2.0 * x else 0.0
    if v is Variant.GENERAL_MITOSIS:
        s = kernel.sigma
        return float(x >= s * y) + float(x >= (1.0 - s) * y)
    a = kernel.density_exponent
    return kernel.k * (min(x, y) / y) ** (1.0 + a)


@lru_cache(maxsize=64)
def _density_weights(a: float, grid: Grid):
    # node 0 is the inflow boundary; the singular factors there are set to 0
    x = grid.nodes
    with np.errstate(divide="ignore"):
        inv = np.zeros_like(x)
        inv[1:] = x[1:] ** -(1.0 + a)
        inv2 = np.zeros_like(x)
        inv2[1:] = x[1:] ** -(2.0 + a)
        pre = np.zeros_like(x)
        pre[1:] = x[1:] ** a
        if a == 0.0:
            pre[0] = 1.0
        pre_beta = x ** (1.0 + a)
    for arr in (inv, inv2, pre, pre_beta):
        arr.setflags(write=False)
    return inv, inv2, pre, pre_beta


@lru_cache(maxsize=64)
def _atomic_points(kernel: Kernel, grid: Grid):
    x = grid.nodes
    if kernel.variant is Variant.EQUAL_MITOSIS:
        return (2.0 * x,)
    s = kernel.sigma
    return (x / s, x / (1.0 - s))


def apply_gain(kernel: Kernel, grid: Grid, n, B: float) -> np.ndarray:
    """``x -> B int kappa(x, y) n(y) dy`` at the grid nodes."""
    n = grid.check(n)
    v = kernel.variant
    if v is Variant.EQUAL_MITOSIS:
        (p,) = _atomic_points(kernel, grid)
        return 4.0 * B * grid.interpolate(n, p)
    if v is Variant.GENERAL_MITOSIS:
        s = kernel.sigma
        p1, p2 = _atomic_points(kernel, grid)
        return B * (grid.interpolate(n, p1) / s + grid.interpolate(n, p2) / (1.0 - s))
    a = kernel.density_exponent
    inv, _, pre, _ = _density_weights(a, grid)
    return B * (2.0 + a) * pre * grid.tail_integral(n * inv)


def apply_beta(kernel: Kernel, grid: Grid, m, B: float) -> np.ndarray:
    """``x -> B int beta(x, y) m(y) dy`` at the grid nodes."""
    m = grid.check(m)
    v = kernel.variant
    if v is Variant.EQUAL_MITOSIS:
        (p,) = _atomic_points(kernel, grid)
        return 2.0 * B * grid.interpolate(m, p)
    if v is Variant.GENERAL_MITOSIS:
        p1, p2 = _atomic_points(kernel, grid)
        return B * (grid.interpolate(m, p1) + grid.interpolate(m, p2))
    a = kernel.density_exponent
    _, inv2, _, pre_beta = _density_weights(a, grid)
    return B * (2.0 + a) * pre_beta * grid.tail_integral(m * inv2)


@dataclass(frozen=True)
class MomentReport:
    zeroth: float
    first: float
    passed: bool


@dataclass(frozen=True)
class BetaMassReport:
    mass: float
    passed: bool


def _quad(f, y):
    val, _ = quad(f, 0.0, y, epsabs=1e-13, epsrel=1e-12, limit=200)
    return val


def verify_moments(kernel: Kernel, y: float, tol: float = 1e-6) -> MomentReport:
    """Check ``int kappa(x, y) dx = k`` and ``int x kappa(x, y) dx = y``.

    Atomic kernels are summed over their atoms; density kernels are
    integrated with adaptive quadrature (independent of the grid rule).
    """
    if y <= 0:
        raise DomainError(f"parent size must be positive, got y={y}")
    if kernel.atomic:
        atoms = kappa_atoms(kernel, y)
        zeroth = sum(a.weight for a in atoms)
        first = sum(a.weight * a.position for a in atoms)
    else:
        zeroth = _quad(lambda x: float(kappa_density(kernel, x, y)), y)
        first = _quad(lambda x: x * float(kappa_density(kernel, x, y)), y)
    ok = abs(zeroth - kernel.k) <= tol and abs(first - y) <= tol * max(1.0, y)
    return MomentReport(zeroth, first, bool(ok))


def verify_beta_mass(kernel: Kernel, y: float, tol: float = 1e-6) -> BetaMassReport:
    """Check ``int_0^inf beta(x, y) dx = 1``."""
    if y <= 0:
        raise DomainError(f"parent size must be positive, got y={y}")
    if kernel.atomic:
        mass = sum(a.weight for a in beta_atoms(kernel, y))
    else:
        mass = _quad(lambda x: float(beta_density(kernel, x, y)), y)
    return BetaMassReport(mass, bool(abs(mass - 1.0) <= tol))
