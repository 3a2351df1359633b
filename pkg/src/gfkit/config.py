"""JSON configuration documents.

A run is described by a single JSON object::

    {
      "kernel": {"type": "homogeneous", "alpha": 1.0},
      "B": 1.0,
      "grid": {"x_max": 20.0, "n_nodes": 4000},
      "tau": {"type": "saturating", "tau0": 1.0, "s": 0.3},
      "dt": "auto",
      "t_end": 12.0,
      "snapshot_every": 0.1,
      "initial": {"scenario": "perturbed_steady", "rho": 1.0},
      "track_M": true,
      "clip": true,
      "steady": {"method": "numeric", "tol": 1e-10}
    }

``kernel``, ``B`` and (for runs) ``t_end`` are required.  ``grid`` may be
omitted or ``"auto"`` for ``[0, 20/B]`` with 4000 nodes; ``dt`` may be
omitted or ``"auto"`` for the CFL step.
"""
from __future__ import annotations

import hashlib
import json
from pathlib import Path

from .errors import ConfigError, GfkitError
from .evolve import SimConfig, Velocity
from .grid import Grid
from .kernel import Kernel

DEFAULT_NODES = 4000


def load_document(path) -> dict:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: malformed JSON ({exc})") from exc
    if not isinstance(doc, dict):
        raise ConfigError(f"{path}: top level must be a JSON object")
    return doc


def config_hash(doc: dict) -> str:
    canonical = json.dumps(doc, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canonical.encode()).hexdigest()


def _require(doc, key):
    if key not in doc:
        raise ConfigError(f"config is missing required key {key!r}")
    return doc[key]


def parse_kernel(doc) -> Kernel:
    try:
        return Kernel.from_config(_require(doc, "kernel"))
    except GfkitError as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError(str(exc)) from exc


def parse_B(doc) -> float:
    try:
        B = float(_require(doc, "B"))
    except (TypeError, ValueError) as exc:
        raise ConfigError("B must be a number") from exc
    if not B > 0:
        raise ConfigError(f"B must be positive, got {B}")
    return B


def parse_grid(doc, B) -> Grid:
    spec = doc.get("grid", "auto")
    try:
        if spec in (None, "auto"):
            return Grid.default(B, DEFAULT_NODES)
        return Grid.from_config(spec)
    except (GfkitError, TypeError) as exc:
        raise ConfigError(f"invalid grid: {exc}") from exc


def sim_config(doc: dict) -> SimConfig:
    """Build a :class:`SimConfig` from a parsed JSON document."""
    kernel = parse_kernel(doc)
    B = parse_B(doc)
    grid = parse_grid(doc, B)
    dt = doc.get("dt", "auto")
    if dt == "auto":
        dt = None
    try:
        return SimConfig(
            kernel=kernel,
            B=B,
            grid=grid,
            t_end=float(_require(doc, "t_end")),
            snapshot_every=float(doc.get("snapshot_every", 0.1)),
            tau=Velocity.from_config(doc.get("tau")),
            dt=None if dt is None else float(dt),
            initial=dict(doc.get("initial", {"scenario": "steady"})),
            track_M=bool(doc.get("track_M", False)),
            clip=bool(doc.get("clip", True)),
            force_dt=bool(doc.get("force_dt", False)),
            steady=dict(doc.get("steady", {})),
        )
    except ConfigError:
        raise
    except (GfkitError, KeyError, TypeError, ValueError) as exc:
        raise ConfigError(f"invalid run configuration: {exc}") from exc


def to_document(config: SimConfig) -> dict:
    """Inverse of :func:`sim_config` (explicit values, no autos)."""
    return {
        "kernel": config.kernel.to_config(),
        "B": config.B,
        "grid": {"x_max": config.grid.x_max, "n_nodes": config.grid.n_nodes},
        "tau": config.tau.to_config(),
        "dt": "auto" if config.dt is None else config.dt,
        "t_end": config.t_end,
        "snapshot_every": config.snapshot_every,
        "initial": dict(config.initial),
        "track_M": config.track_M,
        "clip": config.clip,
        "force_dt": config.force_dt,
        "steady": dict(config.steady),
    }
