"""The certificate suite behind ``gfkit verify``.

Every check builds its own runs at desk scale (``[0, 20/B]`` with 4000
nodes, CFL time step, ``t_end = 6 / ((k-1) B)``) and returns a
:class:`CheckResult`.  Steady states and trajectories are memoised on the
:class:`Suite` so that checks sharing a run do not repeat it.
"""
from __future__ import annotations

import logging
import math
import time
import warnings
from dataclasses import dataclass, field

import numpy as np

from . import diagnostics as diag
from .errors import ConfigError
from .evolve import SimConfig, Velocity, commutation_error, m_equation_residual, run
from .grid import Grid
from .kernel import Kernel, apply_beta, apply_gain, verify_beta_mass, verify_moments
from .scenarios import eta_mode, eta_profile, perturbed_steady, default_bump, xi_mode
from .steady import steady_explicit_uniform, steady_numeric

logger = logging.getLogger(__name__)

KERNELS = (
    Kernel.uniform(),
    Kernel.equal_mitosis(),
    Kernel.general_mitosis(0.3),
    Kernel.homogeneous(1.0),
)
PARENT_SIZES = (0.5, 1.0, 3.0)
ATOMIC_TOL = 1e-14


@dataclass(frozen=True)
class CheckResult:
    name: str
    passed: bool
    summary: str
    details: dict = field(default_factory=dict)
    seconds: float = 0.0

    def to_dict(self):
        return {
            "name": self.name,
            "passed": self.passed,
            "summary": self.summary,
            "details": self.details,
            "seconds": self.seconds,
        }


@dataclass(frozen=True)
class SuiteSettings:
    B: float = 1.0
    n_nodes: int = 4000
    slack: float = diag.DEFAULT_SLACK
    snapshot_every: float = 0.1

    @classmethod
    def from_config(cls, doc):
        doc = dict(doc or {})
        try:
            out = cls(
                B=float(doc.get("B", 1.0)),
                n_nodes=int(doc.get("n_nodes", 4000)),
                slack=float(doc.get("slack", diag.DEFAULT_SLACK)),
                snapshot_every=float(doc.get("snapshot_every", 0.1)),
            )
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"invalid verify settings: {exc}") from exc
        if not (out.B > 0 and out.n_nodes >= 16 and out.slack > 0 and out.snapshot_every > 0):
            raise ConfigError("verify settings must be positive (n_nodes >= 16)")
        return out


class Suite:
    """Memoised steady states and runs shared between checks."""

    def __init__(self, settings: SuiteSettings | None = None):
        self.settings = settings or SuiteSettings()
        self._memo = {}

    @property
    def B(self):
        return self.settings.B

    @property
    def grid(self) -> Grid:
        return Grid.default(self.B, self.settings.n_nodes)

    @property
    def fine_grid(self) -> Grid:
        return self.grid.refined(2)

    def _cached(self, key, build):
        if key not in self._memo:
            self._memo[key] = build()
        return self._memo[key]

    def t_end(self, kernel):
        return 6.0 / ((kernel.k - 1.0) * self.B)

    def steady(self, kernel, grid=None):
        grid = grid or self.grid
        return self._cached(("steady", kernel, grid), lambda: steady_numeric(kernel, self.B, grid))

    def simulate(self, kernel, scenario, grid=None, tau=None, clip=True, track_M=True):
        grid = grid or self.grid
        tau = tau or Velocity()
        key = ("run", kernel, scenario, grid, tau, clip, track_M)

        def build():
            config = SimConfig(
                kernel=kernel,
                B=self.B,
                grid=grid,
                t_end=self.t_end(kernel),
                snapshot_every=self.settings.snapshot_every,
                tau=tau,
                initial={"scenario": scenario},
                track_M=track_M,
                clip=clip,
            )
            with warnings.catch_warnings():
                warnings.simplefilter("ignore")
                return run(config, steady=self.steady(kernel, grid))

        return self._cached(key, build)

    def eta_run(self, grid=None):
        return self.simulate(Kernel.uniform(), "eta_mode", grid)


def _fmt(x):
    return f"{x:.4g}"


def check_kernel_identities(suite: Suite) -> CheckResult:
    worst = 0.0
    failures = []
    for kernel in KERNELS:
        for y in PARENT_SIZES:
            mom = verify_moments(kernel, y)
            beta = verify_beta_mass(kernel, y)
            errs = (abs(mom.zeroth - kernel.k), abs(mom.first - y) / y, abs(beta.mass - 1.0))
            worst = max(worst, *errs)
            ok = mom.passed and beta.passed
            if kernel.atomic:
                ok = ok and max(errs) <= ATOMIC_TOL
            if not ok:
                failures.append(f"{kernel} y={y}")
    passed = not failures
    summary = f"worst error {_fmt(worst)}" + ("" if passed else f"; failed: {', '.join(failures)}")
    return CheckResult("kernel_identities", passed, summary, {"worst_error": worst, "failures": failures})


def check_explicit_steady(suite: Suite) -> CheckResult:
    coarse = steady_explicit_uniform(suite.B, suite.grid).residual_l1
    fine = steady_explicit_uniform(suite.B, suite.fine_grid).residual_l1
    ratio = coarse / fine
    small = coarse < 5e-3
    halves = 1.6 <= ratio <= 2.4
    details = {"residual": coarse, "residual_refined": fine, "ratio": ratio, "below_5e-3": small, "halves": halves}
    return CheckResult(
        "explicit_steady",
        small and halves,
        f"residual {_fmt(coarse)} (limit 5e-3), refined {_fmt(fine)}, ratio {ratio:.3f} (2 +/- 20%)",
        details,
    )


def check_eta_mode_decay(suite: Suite) -> CheckResult:
    traj = suite.eta_run()
    t, l1 = traj.series("l1_dist")
    fit = diag.fit_rate(t, l1, (1.0, 5.0))
    scen = eta_mode(suite.B, 1.0, suite.grid)
    t3 = 3.0 / suite.B
    idx = int(np.argmin(np.abs(np.asarray(traj.times) - t3)))
    err = suite.grid.integrate(np.abs(traj.n[idx] - scen.exact(traj.times[idx])))
    limit = 0.02 * scen.info["perturbation_l1"]
    rate_ok = abs(fit.lam - suite.B) <= 0.03 * suite.B
    err_ok = err < limit
    return CheckResult(
        "eta_mode_decay",
        rate_ok and err_ok,
        f"rate {fit.lam:.4f} (B within 3%), L1 error at t=3 {_fmt(err)} (limit {_fmt(limit)})",
        {"fit": fit.to_dict(), "error_t3": err, "limit": limit},
    )


def check_xi_mode_decay(suite: Suite) -> CheckResult:
    kernel = Kernel.equal_mitosis()
    N = suite.steady(kernel)
    scen = xi_mode(suite.B, 1.0, suite.grid, N)
    traj = suite.simulate(kernel, "xi_mode", clip=False, track_M=False)
    t, l1 = traj.series("l1_dist")
    fit = diag.fit_rate(t, l1, (1.0 / suite.B, 5.0 / suite.B))
    ok = abs(fit.lam - suite.B) <= 0.05 * suite.B
    return CheckResult(
        "xi_mode_decay",
        ok,
        f"rate {fit.lam:.4f} (B within 5%), steady residual {_fmt(N.residual_l1)}",
        {"fit": fit.to_dict(), "steady_residual": N.residual_l1, **scen.info},
    )


def check_decay_certificate(suite: Suite) -> CheckResult:
    parts = {}
    passed = True
    for kernel in KERNELS:
        traj = suite.simulate(kernel, "perturbed_steady")
        rep = diag.decay_certificate(traj, traj.seminorm0.seminorm, kernel.k, suite.B, suite.settings.slack)
        parts[str(kernel)] = {"worst_ratio": rep.worst_ratio, "rate": rep.rate, "passed": rep.passed}
        passed = passed and rep.passed
    worst = max(p["worst_ratio"] for p in parts.values())
    return CheckResult(
        "decay_certificate",
        passed,
        f"worst ratio {worst:.4f} over 4 kernels (slack {suite.settings.slack})",
        parts,
    )


def _conservation(traj):
    rows = diag.conservation_report(traj)
    drift = max(r["drift"] for r in rows)
    mbr = float(np.nanmax([r["mass_balance_residual"] for r in rows])) if len(rows) > 1 else 0.0
    return drift, mbr


def _in_band(ratio, center=2.0, tol=0.3):
    return center * (1 - tol) <= ratio <= center * (1 + tol)


def check_conservation(suite: Suite) -> CheckResult:
    details = {}
    absolute = True
    for label, traj in [("eta_mode", suite.eta_run())] + [
        (str(k), suite.simulate(k, "perturbed_steady")) for k in KERNELS
    ]:
        drift, mbr = _conservation(traj)
        ok = drift < 1e-3 * traj.rho and mbr < 5e-3 * traj.rho
        details[label] = {"drift": drift, "mass_balance_residual": mbr, "passed": ok}
        absolute = absolute and ok
    drift_c, mbr_c = _conservation(suite.eta_run())
    drift_f, mbr_f = _conservation(suite.eta_run(suite.fine_grid))
    drift_ratio = drift_c / drift_f if drift_f > 0 else math.inf
    mbr_ratio = mbr_c / mbr_f if mbr_f > 0 else math.inf
    details["refinement"] = {
        "drift": [drift_c, drift_f],
        "drift_ratio": drift_ratio,
        "mass_balance_residual": [mbr_c, mbr_f],
        "mass_balance_ratio": mbr_ratio,
    }
    drift_halves = _in_band(drift_ratio)
    mbr_halves = _in_band(mbr_ratio)
    passed = absolute and drift_halves and mbr_halves
    summary = (
        f"max drift {_fmt(max(d['drift'] for k, d in details.items() if k != 'refinement'))}, "
        f"max mass-balance residual "
        f"{_fmt(max(d['mass_balance_residual'] for k, d in details.items() if k != 'refinement'))}; "
        f"refinement ratios drift {drift_ratio:.3f}, mass balance {mbr_ratio:.3f} (2 +/- 30%)"
    )
    return CheckResult("conservation", passed, summary, details)


FIRST_ORDER_ALLOWANCE = 1.2


def check_m_equation(suite: Suite) -> CheckResult:
    details = {}
    passed = True
    uniform = Kernel.uniform()
    for scenario in ("eta_mode", "perturbed_steady"):
        for label, fn in (("residual", m_equation_residual), ("commutation", commutation_error)):
            levels = []
            for grid in (suite.grid, suite.fine_grid):
                traj = suite.simulate(uniform, scenario, grid)
                levels.append((float(fn(traj).max()), grid.h + traj.dt))
            (rc, sc), (rf, sf) = levels
            C = rc / sc
            ok = bool(np.isfinite(rf) and rf <= FIRST_ORDER_ALLOWANCE * C * sf)
            details[f"{scenario}/{label}"] = {
                "coarse": rc, "fine": rf, "h_plus_dt": [sc, sf], "C": C, "passed": ok,
            }
            passed = passed and ok
    worst = max(d["fine"] / (d["C"] * d["h_plus_dt"][1]) for d in details.values())
    return CheckResult(
        "m_equation",
        passed,
        f"fine-level residual at most {worst:.3f} x C(h+dt) (allowance {FIRST_ORDER_ALLOWANCE})",
        details,
    )


def check_m_decay(suite: Suite) -> CheckResult:
    parts = {}
    passed = True
    for kernel in KERNELS:
        traj = suite.simulate(kernel, "perturbed_steady")
        rep = diag.m_decay_report(traj, kernel.k, suite.B)
        parts[str(kernel)] = {
            "worst_ratio": rep.worst_ratio,
            "slack": rep.slack,
            "rate": rep.rate,
            "fitted_rate": None if rep.fit is None else rep.fit.lam,
            "passed": rep.passed,
        }
        passed = passed and rep.passed
    worst = max(p["worst_ratio"] for p in parts.values())
    return CheckResult(
        "m_decay",
        passed,
        f"worst ratio {worst:.4f} against slack 1 + 10(h + dt)",
        parts,
    )


def _sin_log2(x):
    return np.sin(2 * np.pi * np.log2(x))


def _cos_log2(x):
    return np.cos(2 * np.pi * np.log2(x))


def check_poincare_counterexample(suite: Suite) -> CheckResult:
    N = suite.steady(Kernel.equal_mitosis())
    reports = {}
    passed = True
    for name, phi in (("sin_log2", _sin_log2), ("cos_log2", _cos_log2)):
        rep = diag.poincare_counterexample(phi, suite.grid, suite.B, N)
        ok = (not rep.degenerate) and rep.d2 < 1e-8 and rep.variance > 0.01 and rep.ratio < 1e-6
        reports[name] = {"d2": rep.d2, "variance": rep.variance, "ratio": rep.ratio, "passed": ok}
        passed = passed and ok
    main = reports["sin_log2"]
    return CheckResult(
        "poincare_counterexample",
        passed,
        f"D2 {_fmt(main['d2'])}, variance {_fmt(main['variance'])}, ratio {_fmt(main['ratio'])}",
        reports,
    )


def check_velocity_extension(suite: Suite) -> CheckResult:
    kernel = Kernel.uniform()
    varying = Velocity(1.0, 0.3)
    traj = suite.simulate(kernel, "tau", tau=varying)
    theta = varying.theta(kernel, suite.B)
    rep = diag.m_decay_report(traj, kernel.k, suite.B, theta=theta, slack=suite.settings.slack)
    flat = suite.simulate(kernel, "tau", tau=Velocity(1.0, 0.0))
    rep0 = diag.m_decay_report(flat, kernel.k, suite.B)
    _, m_flat = flat.series("m_l1")
    _, m_ref = suite.simulate(kernel, "perturbed_steady").series("m_l1")
    same = m_flat.shape == m_ref.shape and bool(np.allclose(m_flat, m_ref, rtol=1e-12, atol=0.0))
    passed = rep.passed and rep0.passed and same
    return CheckResult(
        "velocity_extension",
        passed,
        f"s=0.3: worst ratio {rep.worst_ratio:.4f} at theta={theta:g} (slack {rep.slack}); "
        f"s=0: worst ratio {rep0.worst_ratio:.4f}, matches constant velocity: {same}",
        {
            "theta": theta,
            "worst_ratio": rep.worst_ratio,
            "fitted_rate": None if rep.fit is None else rep.fit.lam,
            "s0_worst_ratio": rep0.worst_ratio,
            "s0_matches_constant": same,
        },
    )


def check_seminorm_structure(suite: Suite) -> CheckResult:
    grid = suite.grid
    scen = eta_mode(suite.B, 1.0, grid)
    rep = diag.seminorm(scen.initial, scen.steady, scen.kernel, suite.B)
    expected = 8.0 / suite.B
    value_ok = abs(rep.seminorm - expected) <= 0.02 * expected
    bounds = {"eta_mode (explicit N)": (rep.seminorm, rep.w11_bound)}
    runs = [("eta_mode", suite.eta_run()),
            ("xi_mode", suite.simulate(Kernel.equal_mitosis(), "xi_mode", clip=False, track_M=False)),
            ("tau", suite.simulate(Kernel.uniform(), "tau", tau=Velocity(1.0, 0.3)))]
    runs += [(f"perturbed {k}", suite.simulate(k, "perturbed_steady")) for k in KERNELS]
    for label, traj in runs:
        bounds[label] = (traj.seminorm0.seminorm, traj.seminorm0.w11_bound)
    bound_ok = all(s <= w for s, w in bounds.values())
    return CheckResult(
        "seminorm_structure",
        value_ok and bound_ok,
        f"eta seminorm {rep.seminorm:.5f} (8 +/- 2%), bound holds on {len(bounds)} scenarios: {bound_ok}",
        {"eta_seminorm": rep.seminorm, "bounds": {k: list(v) for k, v in bounds.items()}},
    )


def _linearity_error(kernel, B):
    grid = Grid(20.0 / B, 400)
    N = steady_explicit_uniform(B, grid) if kernel == Kernel.uniform() else steady_numeric(kernel, B, grid)
    raised = perturbed_steady(kernel, B, 1.0, default_bump(B), grid, N).initial
    signed = eta_profile(grid.nodes, B)
    a, b = 2.5, -0.7
    config = SimConfig(kernel=kernel, B=B, grid=grid, t_end=2.0 / B, snapshot_every=0.25 / B, clip=False)
    r1 = run(config, n0=raised, steady=N)
    r2 = run(config, n0=signed, steady=N)
    rc = run(config, n0=a * raised + b * signed, steady=N)
    worst = 0.0
    for x, y, z in zip(r1.n, r2.n, rc.n):
        ref = a * x + b * y
        worst = max(worst, grid.integrate(np.abs(z - ref)) / grid.integrate(np.abs(ref)))
    return worst


def _fit_errors():
    t = np.linspace(0.0, 10.0, 101)
    errs = []
    for lam, amp in ((0.5, 3.0), (0.1, 1.0), (1.3, 0.2), (2.7, 5.0)):
        fit = diag.fit_rate(t, amp * np.exp(-lam * t))
        errs.append(max(abs(fit.lam - lam), abs(fit.intercept - math.log(amp)), 1.0 - fit.r_squared))
    errs.append(abs(diag.fit_rate(t, np.full_like(t, 2.0)).lam))
    return max(errs)


def _reduction_errors(B):
    out = {}
    pairs = (
        ("general_mitosis(0.5) vs equal_mitosis", Kernel.general_mitosis(0.5), Kernel.equal_mitosis()),
        ("homogeneous(0) vs uniform", Kernel.homogeneous(0.0), Kernel.uniform()),
    )
    for label, k1, k2 in pairs:
        levels = []
        for nodes in (1000, 1999):
            grid = Grid(20.0 / B, nodes)
            f = grid.nodes * np.exp(-B * grid.nodes)
            scale = max(np.abs(apply_gain(k2, grid, f, B)).max(), np.abs(apply_beta(k2, grid, f, B)).max())
            err = max(
                np.abs(apply_gain(k1, grid, f, B) - apply_gain(k2, grid, f, B)).max(),
                np.abs(apply_beta(k1, grid, f, B) - apply_beta(k2, grid, f, B)).max(),
            ) / scale
            levels.append(float(err))
        out[label] = levels
    return out


def check_property_suites(suite: Suite) -> CheckResult:
    B = suite.B
    lin = {str(k): _linearity_error(k, B) for k in (Kernel.uniform(), Kernel.equal_mitosis())}
    lin_ok = all(v < 1e-10 for v in lin.values())
    fit_err = _fit_errors()
    fit_ok = fit_err < 1e-10
    red = _reduction_errors(B)
    red_ok = all(fine <= max(coarse, 1e-13) and fine < 1e-10 for coarse, fine in red.values())
    return CheckResult(
        "property_suites",
        lin_ok and fit_ok and red_ok,
        f"linearity {_fmt(max(lin.values()))} (limit 1e-10), fit_rate {_fmt(fit_err)}, "
        f"reductions {_fmt(max(max(v) for v in red.values()))}",
        {"linearity": lin, "fit_rate_error": fit_err, "reductions": red},
    )


CHECKS = {
    "kernel_identities": check_kernel_identities,
    "explicit_steady": check_explicit_steady,
    "eta_mode_decay": check_eta_mode_decay,
    "xi_mode_decay": check_xi_mode_decay,
    "decay_certificate": check_decay_certificate,
    "conservation": check_conservation,
    "m_equation": check_m_equation,
    "m_decay": check_m_decay,
    "poincare_counterexample": check_poincare_counterexample,
    "velocity_extension": check_velocity_extension,
    "seminorm_structure": check_seminorm_structure,
    "property_suites": check_property_suites,
}


def run_checks(names=None, settings: SuiteSettings | None = None, suite: Suite | None = None):
    """Run the named checks (all by default) and return their results in order.

    Raises
    ------
    ConfigError
        If a check name is unknown.
    """
    names = list(CHECKS) if names is None else list(names)
    unknown = [n for n in names if n not in CHECKS]
    if unknown:
        raise ConfigError(f"unknown check(s): {', '.join(unknown)}; known: {', '.join(CHECKS)}")
    suite = suite or Suite(settings)
    results = []
    for name in names:
        start = time.perf_counter()
        res = CHECKS[name](suite)
        res = CheckResult(res.name, res.passed, res.summary, res.details, time.perf_counter() - start)
        logger.info("%s: %s", name, "PASS" if res.passed else "FAIL")
        results.append(res)
    return results


def format_table(results) -> str:
    width = max(len(r.name) for r in results) if results else 10
    lines = [f"{'check':<{width}}  result  summary"]
    for r in results:
        lines.append(f"{r.name:<{width}}  {'PASS' if r.passed else 'FAIL':<6}  {r.summary}")
    return "\n".join(lines)
