"""Uniform 1-D grids on [0, x_max].

Node values are plain ``numpy`` arrays; a :class:`Grid` supplies the
quadrature (composite trapezoid), piecewise-linear interpolation with
zero extension beyond ``x_max``, finite differences and cumulative
integrals that every other module is built on.
"""
from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy.integrate import cumulative_trapezoid

from .errors import DomainError, InputError, ParameterError, ShapeError

MIN_NODES = 16


@dataclass(frozen=True)
class Grid:
    """Uniform mesh ``x_i = i * h`` for ``i = 0 .. n_nodes - 1``."""

    x_max: float
    n_nodes: int
    nodes: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        if not self.x_max > 0:
            raise ParameterError(f"x_max must be positive, got {self.x_max}")
        if int(self.n_nodes) != self.n_nodes or self.n_nodes < MIN_NODES:
            raise ParameterError(f"n_nodes must be an integer >= {MIN_NODES}, got {self.n_nodes}")
        object.__setattr__(self, "x_max", float(self.x_max))
        object.__setattr__(self, "n_nodes", int(self.n_nodes))
        nodes = np.arange(self.n_nodes) * self.h
        nodes[-1] = self.x_max
        nodes.setflags(write=False)
        object.__setattr__(self, "nodes", nodes)

    @classmethod
    def default(cls, B=1.0, n_nodes=4000):
        """Grid on ``[0, 20/B]``; the explicit uniform steady state has
        negligible mass beyond that point."""
        return cls(20.0 / B, n_nodes)

    @classmethod
    def from_config(cls, spec):
        try:
            return cls(float(spec["x_max"]), int(spec["n_nodes"]))
        except (KeyError, TypeError) as exc:
            raise ParameterError(f"grid spec needs x_max and n_nodes: {spec!r}") from exc

    @property
    def h(self) -> float:
        return self.x_max / (self.n_nodes - 1)

    def refined(self, factor=2):
        """Grid with the same extent and ``factor`` times smaller spacing."""
        return Grid(self.x_max, factor * (self.n_nodes - 1) + 1)

    def check(self, values) -> np.ndarray:
        values = np.asarray(values, dtype=float)
        if values.shape != (self.n_nodes,):
            raise ShapeError(
                f"expected {self.n_nodes} node values, got array of shape {values.shape}"
            )
        return values

    def sample(self, func) -> np.ndarray:
        """Evaluate a vectorised callable at the nodes."""
        return np.asarray(func(self.nodes), dtype=float) * np.ones(self.n_nodes)

    def integrate(self, values) -> float:
        """Composite trapezoid integral over ``[0, x_max]``.

        Defined through :meth:`antiderivative` so that
        ``antiderivative(f)[-1] == integrate(f)`` holds bit for bit.
        """
        return float(self.antiderivative(values)[-1])

    def antiderivative(self, values) -> np.ndarray:
        """Cumulative trapezoid integral, zero at ``x = 0``."""
        values = self.check(values)
        return cumulative_trapezoid(values, dx=self.h, initial=0.0)

    def tail_integral(self, values) -> np.ndarray:
        """``x_i -> int_{x_i}^{x_max} f dx`` with the same trapezoid rule.

        Accumulated from the right end, so a large integrand near ``x = 0``
        does not cancel against small tails.
        """
        values = self.check(values)
        rev = cumulative_trapezoid(values[::-1], dx=self.h, initial=0.0)
        return rev[::-1].copy()

    def interpolate(self, values, x):
        """Piecewise-linear interpolation; zero beyond ``x_max``.

        Raises
        ------
        DomainError
            If any query point is negative.
        """
        values = self.check(values)
        x = np.asarray(x, dtype=float)
        if np.any(x < 0):
            raise DomainError("interpolation point must be >= 0")
        out = np.interp(x, self.nodes, values, right=0.0)
        return float(out) if out.ndim == 0 else out

    def differentiate(self, values) -> np.ndarray:
        """Central differences inside, one-sided differences at both ends."""
        values = self.check(values)
        return np.gradient(values, self.h, edge_order=1)

    def tail_mass(self, values, fraction=0.1) -> float:
        """Integral of ``|f|`` over the last ``fraction`` of the domain."""
        values = np.abs(self.check(values))
        start = int(np.floor((1.0 - fraction) * (self.n_nodes - 1)))
        seg = values[start:]
        if seg.size < 2:
            return 0.0
        return float(self.h * (seg.sum() - 0.5 * (seg[0] + seg[-1])))


def write_csv(path, grid, values, header="value"):
    """Write a two-column ``x,<header>`` CSV with 17 significant digits."""
    values = grid.check(values)
    path = Path(path)
    with path.open("w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["x", header])
        for x, v in zip(grid.nodes, values):
            writer.writerow([format(x, ".17g"), format(v, ".17g")])
    return path


def read_csv(path, grid=None):
    """Read a two-column CSV written by :func:`write_csv`.

    Returns ``(x, values)``; when ``grid`` is given the values are
    resampled onto its nodes by linear interpolation (zero beyond the
    last abscissa of the file).
    """
    try:
        data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    except (OSError, ValueError) as exc:
        raise InputError(f"cannot read grid function from {path}: {exc}") from exc
    if data.shape[1] != 2 or data.shape[0] < 2:
        raise InputError(f"{path}: expected two columns x,value")
    x, v = data[:, 0], data[:, 1]
    if grid is None:
        return x, v
    if x.shape == grid.nodes.shape and np.allclose(x, grid.nodes, rtol=0, atol=1e-12 * grid.x_max):
        return grid.nodes, v
    return grid.nodes, np.interp(grid.nodes, x, v, left=v[0], right=0.0)
