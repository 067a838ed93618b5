"""Grids, quadrature and polar fields for functions on the plane.

A planar function is sampled on a tensor grid of radii and equispaced
angles ``theta_k = 2 pi k / M``.  Every function splits into angular
modes ``f(r e^{i theta}) = sum_n f_n(r) e^{i n theta}``; the mode
coefficients are what the propagators and norms operate on.

Normalisations
--------------
* Radial quadrature integrates ``int_0^rmax h(R) R dR``.
* Angular averages use ``d theta / 2 pi``.  Consequently
  ``||f||_{L^2(R^2)}^2 = 2 pi sum_n ||f_n||_{L^2(R dR)}^2``.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np
from scipy.interpolate import BarycentricInterpolator, CubicSpline
from scipy.special import roots_legendre


class AliasingError(ValueError):
    """Raised when an angular grid is too coarse for the requested modes."""


class GridMismatchError(ValueError):
    """Raised when objects that must share a grid do not."""


@dataclass(frozen=True, eq=False)
class RadialGrid:
    """Quadrature nodes and weights for ``int_0^rmax h(R) R dR``."""

    nodes: np.ndarray
    weights: np.ndarray
    rmax: float
    kind: str = "custom"

    def __post_init__(self):
        nodes = np.asarray(self.nodes, dtype=float)
        weights = np.asarray(self.weights, dtype=float)
        if nodes.ndim != 1 or nodes.shape != weights.shape:
            raise ValueError("nodes and weights must be 1-d arrays of equal length")
        if nodes.size == 0 or nodes[0] <= 0 or np.any(np.diff(nodes) <= 0):
            raise ValueError("radial nodes must be positive and strictly increasing")
        if np.any(weights <= 0):
            raise ValueError("radial weights must be positive")
        if nodes[-1] > self.rmax:
            raise ValueError("last radial node exceeds rmax")
        nodes.setflags(write=False)
        weights.setflags(write=False)
        object.__setattr__(self, "nodes", nodes)
        object.__setattr__(self, "weights", weights)

    def __len__(self):
        return self.nodes.size

    def same_as(self, other: "RadialGrid") -> bool:
        return self is other or (
            len(self) == len(other)
            and self.rmax == other.rmax
            and np.array_equal(self.nodes, other.nodes)
            and np.array_equal(self.weights, other.weights)
        )

    def integrate(self, values) -> complex | float:
        """Integrate samples against ``R dR``."""
        return np.dot(np.asarray(values), self.weights)

    def max_spacing(self) -> float:
        return float(np.max(np.diff(np.concatenate(([0.0], self.nodes, [self.rmax])))))


def make_radial_grid(kind: str, rmax: float, count: int) -> RadialGrid:
    """Build a radial grid on ``(0, rmax]``.

    ``uniform`` is the midpoint rule in ``R`` with weights ``R_i h``; it is
    second order.  ``graded`` uses Gauss-Legendre nodes in ``R`` (clustered
    towards both ends) with weights ``R_i w_i`` and converges spectrally for
    smooth radial data.  Both integrate the constant 1 to ``rmax**2 / 2``
    exactly.
    """
    if not rmax > 0:
        raise ValueError(f"rmax must be positive, got {rmax}")
    if int(count) != count or count < 8:
        raise ValueError(f"count must be an integer >= 8, got {count}")
    count = int(count)
    if kind == "uniform":
        h = rmax / count
        nodes = (np.arange(count) + 0.5) * h
        weights = nodes * h
    elif kind == "graded":
        x, w = roots_legendre(count)
        nodes = 0.5 * rmax * (x + 1.0)
        weights = 0.5 * rmax * w * nodes
    else:
        raise ValueError(f"unknown radial grid kind {kind!r}")
    return RadialGrid(nodes, weights, float(rmax), kind)


def radial_grid_from_nodes(nodes, rmax: float | None = None) -> RadialGrid:
    """Trapezoid-type weights for an arbitrary increasing node set."""
    nodes = np.asarray(nodes, dtype=float)
    rmax = float(nodes[-1] if rmax is None else rmax)
    edges = np.concatenate(([0.0], 0.5 * (nodes[1:] + nodes[:-1]), [rmax]))
    weights = 0.5 * (edges[1:] ** 2 - edges[:-1] ** 2)
    return RadialGrid(nodes, weights, rmax, "custom")


@dataclass(frozen=True)
class AngularGrid:
    """``M`` equispaced angles ``2 pi k / M``."""

    count: int

    def __post_init__(self):
        if int(self.count) != self.count or self.count < 1:
            raise ValueError("angular count must be a positive integer")

    @property
    def angles(self) -> np.ndarray:
        return 2 * np.pi * np.arange(self.count) / self.count

    @classmethod
    def for_modes(cls, nmax: int) -> "AngularGrid":
        return cls(2 * abs(nmax) + 2)


@dataclass(frozen=True, eq=False)
class TimeGrid:
    """Quadrature nodes and weights for ``int dt``; 0 is never a node."""

    nodes: np.ndarray
    weights: np.ndarray
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        nodes = np.asarray(self.nodes, dtype=float)
        weights = np.asarray(self.weights, dtype=float)
        if nodes.ndim != 1 or nodes.shape != weights.shape or nodes.size == 0:
            raise ValueError("time nodes and weights must be non-empty 1-d arrays of equal length")
        if np.any(np.diff(nodes) <= 0):
            raise ValueError("time nodes must be strictly increasing")
        if np.any(nodes == 0):
            raise ValueError("t = 0 is not allowed as a time node")
        if np.any(weights <= 0):
            raise ValueError("time weights must be positive")
        nodes.setflags(write=False)
        weights.setflags(write=False)
        object.__setattr__(self, "nodes", nodes)
        object.__setattr__(self, "weights", weights)

    def __len__(self):
        return self.nodes.size


def make_time_grid(kind: str, T: float, hole: float, count: int) -> TimeGrid:
    """Symmetric time grid on ``[-T, -hole] U [hole, T]``.

    ``count`` nodes are placed on each half.  ``gauss`` is Gauss-Legendre in
    ``t``; ``uniform`` is the midpoint rule in ``t``; ``reciprocal`` is the
    midpoint rule in ``s = 1/(4t)``, which resolves the chirp ``e^{i R^2/4t}``
    at a fixed number of samples per oscillation; ``log`` is the midpoint
    rule in ``log t``, the natural choice for scale-invariant integrands.
    """
    if not 0 < hole < T:
        raise ValueError("need 0 < hole < T")
    if count < 1:
        raise ValueError("count must be positive")
    if kind == "gauss":
        x, w = roots_legendre(count)
        t = hole + 0.5 * (T - hole) * (x + 1)
        wt = 0.5 * (T - hole) * w
    elif kind == "uniform":
        h = (T - hole) / count
        t = hole + (np.arange(count) + 0.5) * h
        wt = np.full(count, h)
    elif kind == "reciprocal":
        s_lo, s_hi = 1 / (4 * T), 1 / (4 * hole)
        ds = (s_hi - s_lo) / count
        s = s_lo + (np.arange(count) + 0.5) * ds
        t = (1 / (4 * s))[::-1]
        wt = (ds / (4 * s**2))[::-1]
    elif kind == "log":
        du = np.log(T / hole) / count
        t = hole * np.exp((np.arange(count) + 0.5) * du)
        wt = t * du
    else:
        raise ValueError(f"unknown time grid kind {kind!r}")
    nodes = np.concatenate((-t[::-1], t))
    weights = np.concatenate((wt[::-1], wt))
    return TimeGrid(nodes, weights, {"kind": kind, "T": T, "hole": hole, "count": count})


@dataclass(frozen=True, eq=False)
class RadialProfile:
    """Samples of one angular mode ``f_n(R)`` on a radial grid."""

    mode: int
    values: np.ndarray
    grid: RadialGrid

    def __post_init__(self):
        values = np.asarray(self.values, dtype=complex)
        if values.shape != (len(self.grid),):
            raise ValueError("profile length does not match its radial grid")
        values.setflags(write=False)
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "mode", int(self.mode))

    @classmethod
    def from_function(cls, mode: int, grid: RadialGrid, func) -> "RadialProfile":
        return cls(mode, func(grid.nodes), grid)

    def norm(self) -> float:
        """``(int |f_n|^2 R dR)^{1/2}``."""
        return float(np.sqrt(np.dot(np.abs(self.values) ** 2, self.grid.weights)))

    def __call__(self, r) -> np.ndarray:
        """Interpolate the profile at arbitrary radii in ``[0, rmax]``.

        Graded grids use barycentric polynomial interpolation through the
        Gauss-Legendre nodes; other grids use a cubic spline on the
        parity-extended data (``f_n(-r) = (-1)^n f_n(r)``).
        """
        r = np.asarray(r, dtype=float)
        nodes, vals = self.grid.nodes, self.values
        if self.grid.kind == "graded":
            return BarycentricInterpolator(nodes, vals)(r)
        sign = -1.0 if self.mode % 2 else 1.0
        x = np.concatenate((-nodes[::-1], nodes))
        y = np.concatenate((sign * vals[::-1], vals))
        return CubicSpline(x, y)(r)


@dataclass(frozen=True, eq=False)
class PolarField:
    """Samples ``f(r_i e^{i theta_k})`` on a radial x angular tensor grid."""

    values: np.ndarray
    radial: RadialGrid
    angular: AngularGrid

    def __post_init__(self):
        values = np.asarray(self.values, dtype=complex)
        if values.shape != (len(self.radial), self.angular.count):
            raise ValueError("field shape does not match radial x angular grid")
        values.setflags(write=False)
        object.__setattr__(self, "values", values)

    @classmethod
    def from_function(cls, radial: RadialGrid, angular: AngularGrid, func) -> "PolarField":
        r, th = np.meshgrid(radial.nodes, angular.angles, indexing="ij")
        return cls(func(r, th), radial, angular)

    def norm(self) -> float:
        """L^2 norm over the disc by direct tensor quadrature."""
        dth = 2 * np.pi / self.angular.count
        return float(np.sqrt(np.sum(np.abs(self.values) ** 2 * self.radial.weights[:, None]) * dth))


def mode_decompose(field: PolarField, nmax: int) -> list[RadialProfile]:
    """Angular Fourier coefficients ``f_n``, ``n = -nmax .. nmax``.

    ``f_n(r_i) = (1/M) sum_k f(r_i, theta_k) e^{-i n theta_k}``.
    """
    M = field.angular.count
    if nmax < 0:
        raise ValueError("nmax must be nonnegative")
    if M <= 2 * nmax + 1:
        raise AliasingError(f"angular count {M} cannot resolve modes |n| <= {nmax} (need > {2 * nmax + 1})")
    coeffs = np.fft.fft(field.values, axis=1) / M
    return [RadialProfile(n, coeffs[:, n % M], field.radial) for n in range(-nmax, nmax + 1)]


def mode_recompose(profiles: Sequence[RadialProfile], angular: AngularGrid | None = None) -> PolarField:
    """Sum ``f_n(r) e^{i n theta}`` on an angular grid.

    If ``angular`` is omitted the smallest alias-free grid is used.
    """
    if not profiles:
        raise ValueError("need at least one profile")
    grid = profiles[0].grid
    for p in profiles[1:]:
        if not p.grid.same_as(grid):
            raise GridMismatchError("all profiles must share one radial grid")
    nmax = max(abs(p.mode) for p in profiles)
    if angular is None:
        angular = AngularGrid.for_modes(nmax)
    if angular.count <= 2 * nmax:
        raise AliasingError(f"angular count {angular.count} too small for mode {nmax}")
    th = angular.angles
    values = np.zeros((len(grid), angular.count), dtype=complex)
    for p in profiles:
        values += p.values[:, None] * np.exp(1j * p.mode * th)[None, :]
    return PolarField(values, grid, angular)


def mode_stack_norm(profiles: Sequence[RadialProfile]) -> float:
    """``||f||_{L^2(R^2)}`` computed from the mode coefficients."""
    return float(np.sqrt(2 * np.pi * sum(p.norm() ** 2 for p in profiles)))


# ---------------------------------------------------------------- serialisation

FIELD_COLUMNS = ("r_index", "theta_index", "re", "im")
GRID_COLUMNS = ("r_index", "r", "weight")


def write_radial_grid(path, grid: RadialGrid) -> None:
    with open(path, "w", newline="") as fh:
        fh.write(f"# rmax={grid.rmax!r} kind={grid.kind}\n")
        w = csv.writer(fh)
        w.writerow(GRID_COLUMNS)
        for i, (r, wt) in enumerate(zip(grid.nodes, grid.weights)):
            w.writerow((i, repr(float(r)), repr(float(wt))))


def read_radial_grid(path) -> RadialGrid:
    with open(path, newline="") as fh:
        header = fh.readline()
        if not header.startswith("# rmax="):
            raise ValueError(f"{path}: missing '# rmax=' header line")
        meta = dict(item.split("=", 1) for item in header[1:].split())
        rows = list(csv.DictReader(fh))
    if not rows or tuple(rows[0].keys()) != GRID_COLUMNS:
        raise ValueError(f"{path}: expected columns {GRID_COLUMNS}")
    nodes = np.array([float(r["r"]) for r in rows])
    weights = np.array([float(r["weight"]) for r in rows])
    return RadialGrid(nodes, weights, float(meta["rmax"]), meta.get("kind", "custom"))


def write_polar_field(path, field: PolarField) -> None:
    """Write values as ``r_index,theta_index,re,im`` plus a ``.grid.csv`` sidecar."""
    path = Path(path)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(FIELD_COLUMNS)
        for i in range(len(field.radial)):
            for k in range(field.angular.count):
                z = field.values[i, k]
                w.writerow((i, k, repr(float(z.real)), repr(float(z.imag))))
    write_radial_grid(path.with_suffix(".grid.csv"), field.radial)


def read_polar_field(path) -> PolarField:
    path = Path(path)
    radial = read_radial_grid(path.with_suffix(".grid.csv"))
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        if tuple(reader.fieldnames or ()) != FIELD_COLUMNS:
            raise ValueError(f"{path}: expected columns {FIELD_COLUMNS}")
        rows = list(reader)
    M = 1 + max(int(r["theta_index"]) for r in rows)
    values = np.zeros((len(radial), M), dtype=complex)
    for r in rows:
        values[int(r["r_index"]), int(r["theta_index"])] = float(r["re"]) + 1j * float(r["im"])
    return PolarField(values, radial, AngularGrid(M))
