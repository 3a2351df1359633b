"""Quantitative checks along trajectories.

Conservation laws, the L1 distance to equilibrium, the semi-norm of the
initial data with its W^{1,1} upper bound, the exponential decay
certificate, quadratic relative entropy and its dissipation, the
scale-periodic counterexample to a Poincare inequality for equal
mitosis, and log-linear rate fits.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .errors import CertificateUnavailable, FitError, MissingDataError, ParameterError
from .kernel import Kernel, Variant, apply_beta

LOG_FLOOR = 1e-13
ENTROPY_FLOOR = 1e-12
DEFAULT_SLACK = 1.05


@dataclass(frozen=True)
class RateFit:
    """Least-squares fit of ``log(value) = intercept - lam * t``."""

    lam: float
    intercept: float
    r_squared: float
    window: tuple
    points: int
    rejected: bool = False

    def to_dict(self):
        return {
            "lambda": self.lam,
            "intercept": self.intercept,
            "r_squared": self.r_squared,
            "window": list(self.window),
            "points": self.points,
            "rejected": self.rejected,
        }


@dataclass(frozen=True)
class SemiNormReport:
    seminorm: float
    term_derivative_part: float
    term_m_l1_part: float
    w11_bound: float


@dataclass(frozen=True)
class CertificateReport:
    passed: bool
    worst_ratio: float
    rate: float
    slack: float


@dataclass(frozen=True)
class MDecayReport:
    passed: bool
    worst_ratio: float
    rate: float
    slack: float
    fit: Optional[RateFit]


@dataclass(frozen=True)
class EntropyReport:
    value: float
    excluded_nodes: int
    tail_share: float

    @property
    def heavy_tail(self) -> bool:
        """More than 1% of the entropy sits in the last 10% of the grid."""
        return self.tail_share > 0.01


@dataclass(frozen=True)
class PoincareReport:
    d2: float
    variance: float
    ratio: float
    degenerate: bool


# -- elementary quantities -------------------------------------------------

def l1_distance(n, N, rho: float) -> float:
    """``int |n - rho N| dx``."""
    grid = N.grid
    return grid.integrate(np.abs(grid.check(n) - rho * N.values))


def seminorm(n0, N, kernel: Kernel, B: float) -> SemiNormReport:
    """Semi-norm of initial data controlling the decay constant.

    With ``M = antiderivative(n0 - rho N)`` this is
    ``int |M' + k B M - B beta[M]| + (k+1) B int |M|``, where ``M'`` is
    taken as ``n0 - rho N`` directly.  The bound
    ``int |M'| + 2 (k+1) B int |M|`` is returned alongside.
    """
    grid = N.grid
    n0 = grid.check(n0)
    rho = grid.integrate(n0)
    dm = n0 - rho * N.values
    m = grid.antiderivative(dm)
    k = kernel.k
    op = dm + k * B * m - apply_beta(kernel, grid, m, B)
    first = grid.integrate(np.abs(op))
    m_l1 = grid.integrate(np.abs(m))
    second = (k + 1.0) * B * m_l1
    bound = grid.integrate(np.abs(dm)) + 2.0 * (k + 1.0) * B * m_l1
    return SemiNormReport(first + second, first, second, bound)


def _entropy_mask(N):
    return N.values >= ENTROPY_FLOOR


def relative_entropy_report(n, N, rho: float) -> EntropyReport:
    """``int N (n/N - rho)^2 dx`` over nodes where ``N >= 1e-12``."""
    grid = N.grid
    n = grid.check(n)
    mask = _entropy_mask(N)
    dens = np.zeros_like(n)
    dens[mask] = (n[mask] - rho * N.values[mask]) ** 2 / N.values[mask]
    value = grid.integrate(dens)
    tail = grid.tail_mass(dens)
    share = tail / value if value > 0 else 0.0
    return EntropyReport(value, int((~mask).sum()), share)


def relative_entropy_quadratic(n, N, rho: float) -> float:
    return relative_entropy_report(n, N, rho).value


def _density_dissipation(kernel, grid, Nv, u, valid, B):
    a = kernel.density_exponent
    x = grid.nodes
    g = np.zeros_like(x)
    pos = valid & (x > 0)
    g[pos] = Nv[pos] * x[pos] ** -(1.0 + a)
    # (u(x) - u(y))^2 is shift invariant; centring limits cancellation
    uc = np.where(valid, u, 0.0)
    uc = uc - (np.average(uc[valid]) if valid.any() else 0.0)
    t0 = grid.tail_integral(g)
    t1 = grid.tail_integral(g * uc)
    t2 = grid.tail_integral(g * uc * uc)
    pre = np.zeros_like(x)
    pre[1:] = x[1:] ** a
    if a == 0.0:
        pre[0] = 1.0
    inner = uc * uc * t0 - 2.0 * uc * t1 + t2
    inner = np.where(valid, inner, 0.0)
    return B * (2.0 + a) * grid.integrate(pre * inner)


def _interp_valid(grid, valid, p):
    return np.interp(p, grid.nodes, valid.astype(float), right=0.0) > 1.0 - 1e-12


def dissipation_quadratic(kernel: Kernel, N, u, B: float, valid=None) -> float:
    """``D2[u] = B int int kappa(x, y) N(y) (u(x) - u(y))^2 dx dy``.

    Density kernels are integrated with the grid's trapezoid rule in both
    variables; equal mitosis uses ``4 B int N(2x) (u(x) - u(2x))^2 dx``
    and general mitosis the analogous two-atom form.  ``valid`` masks the
    nodes where ``u`` is defined; masked nodes contribute nothing.
    """
    grid = N.grid
    u = grid.check(u)
    Nv = N.values
    valid = np.ones(grid.n_nodes, bool) if valid is None else np.asarray(valid, bool)
    x = grid.nodes
    v = kernel.variant
    if v is Variant.EQUAL_MITOSIS:
        p = 2.0 * x
        ok = valid & _interp_valid(grid, valid, p)
        integrand = grid.interpolate(Nv, p) * (u - grid.interpolate(u, p)) ** 2
        value = 4.0 * B * grid.integrate(np.where(ok, integrand, 0.0))
    elif v is Variant.GENERAL_MITOSIS:
        s = kernel.sigma
        integrand = np.zeros_like(x)
        for frac in (s, 1.0 - s):
            p = frac * x
            ok = valid & _interp_valid(grid, valid, p)
            integrand += np.where(ok, (grid.interpolate(u, p) - u) ** 2, 0.0)
        value = B * grid.integrate(Nv * integrand)
    else:
        value = _density_dissipation(kernel, grid, Nv, u, valid, B)
    return max(value, 0.0)


def ratio_dissipation(kernel, N, n, rho, B):
    """``D2[n/N]`` on the nodes where ``N >= 1e-12``."""
    mask = _entropy_mask(N)
    u = np.zeros(N.grid.n_nodes)
    u[mask] = N.grid.check(n)[mask] / N.values[mask]
    return dissipation_quadratic(kernel, N, u, B, valid=mask)


# -- per-snapshot row -------------------------------------------------------

DIAGNOSTIC_COLUMNS = (
    "t",
    "number",
    "mass",
    "l1_dist",
    "log_l1_dist",
    "m_l1",
    "entropy_quadratic",
    "dissipation_quadratic",
    "bound_value",
    "tail_mass",
    "clipped_mass",
)


def snapshot_row(config, N, rho, n, m, t, clipped, seminorm0):
    grid = N.grid
    x = grid.nodes
    l1 = l1_distance(n, N, rho)
    if m is None:
        m = grid.antiderivative(n - rho * N.values)
    return {
        "t": float(t),
        "number": grid.integrate(n),
        "mass": grid.integrate(x * n),
        "l1_dist": l1,
        "log_l1_dist": math.log(max(l1, LOG_FLOOR)),
        "m_l1": grid.integrate(np.abs(m)),
        "entropy_quadratic": relative_entropy_quadratic(n, N, rho),
        "dissipation_quadratic": ratio_dissipation(config.kernel, N, n, rho, config.B),
        "bound_value": seminorm0 * math.exp(-config.decay_rate * t),
        "tail_mass": grid.tail_mass(n),
        "clipped_mass": float(clipped),
    }


# -- trajectory-level reports -----------------------------------------------

def conservation_report(traj):
    """Number, mass, number drift and mass-balance residual per snapshot.

    The mass balance ``d/dt int x n + (k-1) B int x n = int tau n`` is
    integrated exactly over each snapshot interval (variation of
    constants, source averaged over the interval); the residual is the
    mismatch divided by the interval length.  The first row has no
    residual (``nan``).
    """
    config, grid = traj.config, traj.grid
    x = grid.nodes
    c = (config.kernel.k - 1.0) * config.B
    tau = config.tau(x)
    rows = []
    prev = None
    for t, n in zip(traj.times, traj.n):
        number = grid.integrate(n)
        mass = grid.integrate(x * n)
        source = grid.integrate(tau * n)
        res = float("nan")
        if prev is not None:
            t0, mass0, source0 = prev
            dt = t - t0
            decay = math.exp(-c * dt)
            predicted = decay * mass0 + 0.5 * (source0 + source) * (1.0 - decay) / c
            res = abs(mass - predicted) / dt
        rows.append(
            {
                "t": t,
                "number": number,
                "mass": mass,
                "drift": abs(number - traj.rho),
                "mass_balance_residual": res,
            }
        )
        prev = (t, mass, source)
    return rows


def decay_certificate(traj, seminorm0: float, k: float, B: float, slack: float = DEFAULT_SLACK):
    """Check ``l1_dist(t) <= slack * seminorm0 * exp(-(k-1) B t)`` at every snapshot.

    Raises
    ------
    CertificateUnavailable
        If ``seminorm0`` is not finite.
    """
    if not np.isfinite(seminorm0):
        raise CertificateUnavailable("the semi-norm of the initial data is not finite")
    rate = (k - 1.0) * B
    t, l1 = traj.series("l1_dist")
    bound = seminorm0 * np.exp(-rate * t)
    if seminorm0 == 0.0:
        ratios = np.where(l1 < LOG_FLOOR, 0.0, np.inf)
    else:
        ratios = l1 / bound
    worst = float(ratios.max())
    return CertificateReport(bool(worst <= slack), worst, rate, slack)


def fit_rate(t, values, window=None) -> RateFit:
    """Fit ``values ~ exp(intercept - lam t)`` on ``window = (t_lo, t_hi)``.

    Raises
    ------
    FitError
        Fewer than 5 points in the window, or a non-positive value.
    """
    t = np.asarray(t, dtype=float)
    values = np.asarray(values, dtype=float)
    if window is None:
        window = (float(t.min()), float(t.max()))
    lo, hi = window
    sel = (t >= lo - 1e-12) & (t <= hi + 1e-12)
    if sel.sum() < 5:
        raise FitError(f"need at least 5 points in window {window}, got {int(sel.sum())}")
    ts, vs = t[sel], values[sel]
    if np.any(~(vs > 0)):
        raise FitError("values must be positive inside the fit window")
    y = np.log(vs)
    slope, intercept = np.polyfit(ts, y, 1)
    resid = y - (slope * ts + intercept)
    ss_tot = float(np.sum((y - y.mean()) ** 2))
    ss_res = float(np.sum(resid**2))
    r2 = 1.0 if ss_tot <= 1e-30 else max(0.0, 1.0 - ss_res / ss_tot)
    return RateFit(
        lam=float(-slope),
        intercept=float(intercept),
        r_squared=r2,
        window=(float(lo), float(hi)),
        points=int(sel.sum()),
        rejected=bool(np.any(vs <= LOG_FLOOR)),
    )


def default_window(traj, rate=None):
    """From ``1 / ((k-1) B)`` (past the initial layer) to the last snapshot."""
    config = traj.config
    rate = (config.kernel.k - 1.0) * config.B if rate is None else rate
    return (1.0 / rate, float(traj.times[-1]))


def m_decay_report(traj, k: float, B: float, theta=None, slack=None) -> MDecayReport:
    """Check the tracked ``int |M|`` against ``exp(-rate t) int |M(0)|``.

    ``rate`` is ``theta`` when given, ``(k-1) B`` otherwise.  The default
    slack is ``1 + 10 (h + dt)``.
    """
    if traj.m is None:
        raise MissingDataError("the trajectory did not track M")
    grid = traj.grid
    rate = (k - 1.0) * B if theta is None else theta
    if slack is None:
        slack = 1.0 + 10.0 * (grid.h + traj.dt)
    t = np.asarray(traj.times)
    series = np.array([grid.integrate(np.abs(m)) for m in traj.m])
    bound = series[0] * np.exp(-rate * t)
    if series[0] == 0.0:
        ratios = np.where(series <= 10 * np.finfo(float).eps, 0.0, np.inf)
    else:
        ratios = series / bound
    worst = float(ratios.max())
    try:
        fit = fit_rate(t, series, default_window(traj, rate))
    except FitError:
        fit = None
    return MDecayReport(bool(worst <= slack), worst, rate, slack, fit)


def poincare_counterexample(phi, grid, B: float = 1.0, N=None) -> PoincareReport:
    """Scale-periodic test function for the equal-mitosis dissipation.

    ``u(x) = phi(x / 2^j)`` on ``[2^j, 2^(j+1))`` satisfies ``u(2x) = u(x)``,
    so ``D2[u]`` vanishes while the weighted variance does not.  ``N``
    defaults to the numerical equal-mitosis steady state on ``grid``.

    Raises
    ------
    ParameterError
        If ``phi(1) != phi(2)``.
    """
    from .steady import steady_numeric

    p1, p2 = float(phi(1.0)), float(phi(2.0))
    if abs(p1 - p2) > 1e-9 * max(1.0, abs(p1), abs(p2)):
        raise ParameterError(f"phi(1) = {p1} differs from phi(2) = {p2}")
    kernel = Kernel.equal_mitosis()
    if N is None:
        N = steady_numeric(kernel, B, grid)
    x = grid.nodes
    u = np.full_like(x, p1)
    pos = x > 0
    j = np.floor(np.log2(x[pos]))
    u[pos] = np.asarray(phi(x[pos] / 2.0**j), dtype=float)
    mean = grid.integrate(u * N.values) / grid.integrate(N.values)
    u = u - mean
    variance = grid.integrate(N.values * u * u)
    d2 = dissipation_quadratic(kernel, N, u, B)
    degenerate = variance <= 1e-14
    ratio = float("nan") if degenerate else d2 / variance
    return PoincareReport(d2, variance, ratio, bool(degenerate))
