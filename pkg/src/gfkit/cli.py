"""``gfkit`` command-line interface.

Exit codes: 0 success, 1 failed check, 2 bad configuration or input,
3 convergence failure, 4 numerical instability.
"""
from __future__ import annotations

import csv
import functools
import json
import logging
import math
import sys
import warnings
from datetime import datetime, timezone
from pathlib import Path

import click
import numpy as np

from . import __version__
from . import diagnostics as diag
from .config import config_hash, load_document, parse_B, parse_grid, parse_kernel, sim_config
from .errors import (
    ConfigError,
    ConvergenceError,
    FitError,
    GfkitError,
    ParameterError,
    StabilityError,
)
from .evolve import run
from .grid import write_csv
from .steady import steady_state

EXIT_OK, EXIT_CHECK, EXIT_CONFIG, EXIT_CONVERGENCE, EXIT_INSTABILITY = 0, 1, 2, 3, 4


def _fail(message, code):
    click.echo(f"error: {message}", err=True)
    sys.exit(code)


def handle_errors(func):
    """Map library exceptions onto the documented exit codes."""

    @functools.wraps(func)
    def wrapper(*args, **kwargs):
        try:
            return func(*args, **kwargs)
        except ConvergenceError as exc:
            _fail(exc, EXIT_CONVERGENCE)
        except StabilityError as exc:
            _fail(exc, EXIT_INSTABILITY)
        except (GfkitError, ValueError, OSError) as exc:
            _fail(exc, EXIT_CONFIG)

    return wrapper


def _fmt(value):
    return format(float(value), ".17g")


def _time_label(t):
    return format(float(t), ".6g")


@click.group()
@click.version_option(__version__, prog_name="gfkit")
@click.option("-v", "--verbose", is_flag=True, help="Log progress to stderr.")
def main(verbose):
    """Growth-fragmentation simulations, steady states and decay certificates."""
    logging.basicConfig(level=logging.INFO if verbose else logging.WARNING, format="%(message)s")
    if not verbose:
        warnings.simplefilter("ignore")


@main.command()
@click.option("--config", "config_path", required=True, type=click.Path(dir_okay=False))
@click.option("--out", "out_path", required=True, type=click.Path(dir_okay=False))
@handle_errors
def steady(config_path, out_path):
    """Compute the steady state; write a CSV and a JSON sidecar next to it."""
    doc = load_document(config_path)
    kernel = parse_kernel(doc)
    B = parse_B(doc)
    grid = parse_grid(doc, B)
    opts = dict(doc.get("steady", {}))
    method = opts.pop("method", "auto")
    try:
        state = steady_state(kernel, B, grid, method, **opts)
    except (ParameterError, TypeError) as exc:
        raise ConfigError(f"invalid steady options: {exc}") from exc
    out = Path(out_path)
    out.parent.mkdir(parents=True, exist_ok=True)
    write_csv(out, grid, state.values)
    sidecar = out.with_suffix(".json")
    sidecar.write_text(json.dumps(state.sidecar(), indent=2) + "\n")
    click.echo(f"wrote {out} and {sidecar} (residual {state.residual_l1:.3g})")


def _write_diagnostics(path, rows):
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(diag.DIAGNOSTIC_COLUMNS)
        for row in rows:
            writer.writerow([_fmt(row[c]) for c in diag.DIAGNOSTIC_COLUMNS])


def _run_summary(traj):
    """Informational checks recorded in the manifest."""
    config = traj.config
    k, B = config.kernel.k, config.B
    checks = {}
    cons = diag.conservation_report(traj)
    drift = max(r["drift"] for r in cons)
    checks["number_conservation"] = {"passed": bool(drift < 1e-3 * abs(traj.rho)), "max_drift": drift}
    if config.tau.constant:
        try:
            cert = diag.decay_certificate(traj, traj.seminorm0.seminorm, k, B)
            checks["decay_certificate"] = {
                "passed": cert.passed, "worst_ratio": cert.worst_ratio, "rate": cert.rate,
            }
        except GfkitError as exc:
            checks["decay_certificate"] = {"passed": False, "error": str(exc)}
    if traj.m is not None:
        theta = None if config.tau.constant else config.decay_rate
        rep = diag.m_decay_report(traj, k, B, theta=theta)
        checks["m_decay"] = {"passed": rep.passed, "worst_ratio": rep.worst_ratio, "rate": rep.rate}
    for value in checks.values():
        for key, v in list(value.items()):
            if isinstance(v, float) and not math.isfinite(v):
                value[key] = str(v)
    return checks


@main.command()
@click.option("--config", "config_path", required=True, type=click.Path(dir_okay=False))
@click.option("--out-dir", "out_dir", required=True, type=click.Path(file_okay=False))
@handle_errors
def evolve(config_path, out_dir):
    """Run a simulation; write diagnostics.csv, snapshots and manifest.json."""
    started = datetime.now(timezone.utc).isoformat()
    doc = load_document(config_path)
    config = sim_config(doc)
    traj = run(config)
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    files = ["diagnostics.csv"]
    _write_diagnostics(out / "diagnostics.csv", traj.rows)
    for i, t in enumerate(traj.times):
        name = f"n_{_time_label(t)}.csv"
        write_csv(out / name, traj.grid, traj.n[i], "n")
        files.append(name)
        if traj.m is not None:
            name = f"m_{_time_label(t)}.csv"
            write_csv(out / name, traj.grid, traj.m[i], "M")
            files.append(name)
    manifest = {
        "config_hash": config_hash(doc),
        "tool_version": __version__,
        "started": started,
        "finished": datetime.now(timezone.utc).isoformat(),
        "files": files,
        "summary": _run_summary(traj),
        "run": {"steps": traj.steps, "dt": traj.dt, "clipped_mass": traj.clipped_mass},
    }
    (out / "manifest.json").write_text(json.dumps(manifest, indent=2) + "\n")
    click.echo(f"wrote {len(files)} files to {out}")


def _parse_window(text):
    if text is None:
        return None
    try:
        lo, hi = (float(p) for p in text.split(":"))
    except ValueError as exc:
        raise ConfigError(f"--window must look like 1:5, got {text!r}") from exc
    if not hi > lo:
        raise ConfigError("--window upper end must exceed the lower end")
    return lo, hi


def _read_column(path, column):
    try:
        with open(path, newline="") as fh:
            reader = csv.DictReader(fh)
            if reader.fieldnames is None or "t" not in reader.fieldnames:
                raise ConfigError(f"{path}: expected a diagnostics CSV with a 't' column")
            if column not in reader.fieldnames:
                raise ConfigError(f"{path}: no column {column!r}")
            rows = [(float(r["t"]), float(r[column])) for r in reader]
    except OSError as exc:
        raise ConfigError(f"cannot read {path}: {exc}") from exc
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"{path}: non-numeric entry ({exc})") from exc
    arr = np.array(rows, dtype=float).reshape(-1, 2)
    return arr[:, 0], arr[:, 1]


@main.command()
@click.option("--in", "in_path", required=True, type=click.Path(dir_okay=False))
@click.option("--column", default="l1_dist", show_default=True)
@click.option("--window", default=None, help="Fit window t_lo:t_hi (default: whole series).")
@handle_errors
def rate(in_path, column, window):
    """Fit an exponential rate to one diagnostics column and print it as JSON."""
    t, values = _read_column(in_path, column)
    try:
        fit = diag.fit_rate(t, values, _parse_window(window))
    except FitError as exc:
        raise ConfigError(str(exc)) from exc
    click.echo(json.dumps(fit.to_dict(), indent=2))


@main.command()
@click.option("--config", "config_path", default=None, type=click.Path(dir_okay=False))
@click.option("--slack", type=float, default=None, help="Override the certificate slack.")
@click.option("--check", "checks", multiple=True, help="Run only this check (repeatable).")
@click.option("--json", "as_json", is_flag=True, help="Print the results as JSON instead of a table.")
@handle_errors
def verify(config_path, slack, checks, as_json):
    """Run the certificate suite and exit non-zero if any check fails."""
    from .verify import SuiteSettings, format_table, run_checks

    doc = load_document(config_path) if config_path else {}
    if slack is not None:
        doc["slack"] = slack
    names = list(checks) or doc.get("checks")
    if names is not None and not isinstance(names, list):
        raise ConfigError("'checks' must be a list of check names")
    settings = SuiteSettings.from_config({k: v for k, v in doc.items() if k != "checks"})
    results = run_checks(names, settings)
    if as_json:
        click.echo(json.dumps([r.to_dict() for r in results], indent=2, default=float))
    else:
        click.echo(format_table(results))
    sys.exit(EXIT_OK if all(r.passed for r in results) else EXIT_CHECK)


PHI_CHOICES = {
    "sin_log2": lambda x: np.sin(2 * np.pi * np.log2(x)),
    "cos_log2": lambda x: np.cos(2 * np.pi * np.log2(x)),
    "sin2_log2": lambda x: np.sin(4 * np.pi * np.log2(x)),
    "constant": lambda x: np.ones_like(np.asarray(x, dtype=float)),
}


@main.command()
@click.option("--config", "config_path", default=None, type=click.Path(dir_okay=False))
@click.option("--phi", type=click.Choice(sorted(PHI_CHOICES)), default=None)
@handle_errors
def counterexample(config_path, phi):
    """Scale-periodic test function against a Poincare inequality for equal mitosis."""
    doc = load_document(config_path) if config_path else {}
    B = parse_B({"B": doc.get("B", 1.0)})
    grid = parse_grid(doc, B)
    name = phi or doc.get("phi", "sin_log2")
    if name not in PHI_CHOICES:
        raise ConfigError(f"unknown phi {name!r}; choose from {', '.join(sorted(PHI_CHOICES))}")
    rep = diag.poincare_counterexample(PHI_CHOICES[name], grid, B)
    ratio = None if rep.degenerate else rep.ratio
    click.echo(json.dumps(
        {"phi": name, "d2": rep.d2, "variance": rep.variance, "ratio": ratio, "degenerate": rep.degenerate},
        indent=2,
    ))


if __name__ == "__main__":  # pragma: no cover
    main()
