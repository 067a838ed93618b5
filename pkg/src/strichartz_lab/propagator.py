"""Free Schroedinger evolution ``e^{it Delta}`` on the plane.

Conventions: ``f^(xi) = int f(x) e^{-2 pi i x.xi} dx``, so ``e^{it Delta}``
is the Fourier multiplier ``exp(-4 pi^2 i t |xi|^2)`` and has kernel

    e^{it Delta} f(x) = (1 / (4 pi i t)) int exp(i |x - y|^2 / 4t) f(y) dy.

Three realisations are provided: FFT multiplier on a periodic square
(:func:`propagate_cartesian`), direct kernel quadrature
(:func:`propagate_kernel`) and the single-mode Bessel formula
(:func:`propagate_mode`).  :class:`SpectralModePropagator` evolves one mode
through its Hankel transform; it has no ``1/t`` chirp and is the engine
behind the space-time norms.  :func:`gaussian_solution` is the closed form for
Gaussian data.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .bessel import bessel_b
from scipy.special import jv

from .discretization import RadialGrid, RadialProfile, make_radial_grid

KERNEL_CONSTANT = "1/(4 pi i t)"


class ResolutionError(ValueError):
    """A grid does not resolve the oscillation it is asked to integrate."""


@dataclass(frozen=True, eq=False)
class CartesianField:
    """Samples on the ``N x N`` grid ``x_i = -L/2 + i L/N`` (indexing ``ij``)."""

    values: np.ndarray
    L: float

    def __post_init__(self):
        v = np.asarray(self.values, dtype=complex)
        if v.ndim != 2 or v.shape[0] != v.shape[1]:
            raise ValueError("Cartesian field must be a square array")
        object.__setattr__(self, "values", v)

    @property
    def N(self) -> int:
        return self.values.shape[0]

    @property
    def spacing(self) -> float:
        return self.L / self.N

    @property
    def axis(self) -> np.ndarray:
        return -self.L / 2 + self.spacing * np.arange(self.N)

    def mesh(self):
        return np.meshgrid(self.axis, self.axis, indexing="ij")

    @classmethod
    def from_function(cls, func, L: float, N: int) -> "CartesianField":
        x = -L / 2 + (L / N) * np.arange(N)
        X, Y = np.meshgrid(x, x, indexing="ij")
        return cls(func(X, Y), L)

    def norm(self) -> float:
        return float(np.sqrt(np.sum(np.abs(self.values) ** 2)) * self.spacing)

    def outer_mass_fraction(self) -> float:
        """Share of ``|f|^2`` outside the central ``[-L/4, L/4)^2`` square."""
        X, Y = self.mesh()
        inner = (np.abs(X) < self.L / 4) & (np.abs(Y) < self.L / 4)
        total = np.sum(np.abs(self.values) ** 2)
        return float(np.sum(np.abs(self.values[~inner]) ** 2) / total) if total else 0.0


def relative_l2(a, b) -> float:
    a, b = np.asarray(a), np.asarray(b)
    return float(np.linalg.norm(a - b) / np.linalg.norm(b))


def gaussian_solution(X, Y, t: float, images: int = 0, L: float | None = None):
    """``e^{it Delta}`` of ``exp(-pi |x|^2)``: ``a^{-1} exp(-pi |x|^2 / a)``, ``a = 1 + 4 pi i t``.

    ``images > 0`` adds the periodic images ``x + L k`` for ``|k_i| <= images``
    (the exact solution of the problem on the torus of side ``L``).
    """
    a = 1 + 4j * np.pi * t
    out = np.zeros(np.broadcast(X, Y).shape, dtype=complex)
    for kx in range(-images, images + 1):
        for ky in range(-images, images + 1):
            sx = X + kx * L if images else X
            sy = Y + ky * L if images else Y
            out += np.exp(-np.pi * (sx**2 + sy**2) / a) / a
    return out


def propagate_cartesian(f: CartesianField, t: float) -> CartesianField:
    """FFT multiplier ``exp(-4 pi^2 i t |xi|^2)``; unitary on the grid."""
    xi = np.fft.fftfreq(f.N, d=f.spacing)
    q = xi[:, None] ** 2 + xi[None, :] ** 2
    mult = np.exp(-4j * np.pi**2 * t * q)
    return CartesianField(np.fft.ifft2(mult * np.fft.fft2(f.values)), f.L)


def _support_radius(f: CartesianField, rtol: float = 1e-14) -> float:
    a = np.abs(f.values)
    mask = a > rtol * a.max()
    X, Y = f.mesh()
    return float(max(np.max(np.abs(X[mask])), np.max(np.abs(Y[mask]))))


def kernel_min_time(f: CartesianField, samples_per_period: float = 2.5) -> float:
    """Smallest ``|t|`` for which the chirp ``e^{i(x-y)^2/4t}`` is resolved.

    The local frequency ``|x - y| / 2|t|`` over output ``x`` in the window and
    input ``y`` in the support of ``f`` must leave ``samples_per_period``
    samples per oscillation.
    """
    reach = f.L / 2 + _support_radius(f)
    return reach * f.spacing * samples_per_period / (4 * np.pi)


def propagate_kernel(f: CartesianField, t: float, min_abs_t: float | None = None) -> CartesianField:
    """Riemann-sum quadrature of the fundamental-solution integral.

    The kernel factorises over the two axes, so the 4-d sum is applied as
    ``K F K^T``.  Output points are the input grid; no periodisation.
    """
    tmin = kernel_min_time(f) if min_abs_t is None else min_abs_t
    if t == 0 or abs(t) < tmin:
        raise ResolutionError(f"|t|={abs(t):.4g} below kernel threshold {tmin:.4g} for this grid")
    x = f.axis
    K = np.exp(1j * (x[:, None] - x[None, :]) ** 2 / (4 * t))
    h = f.spacing
    vals = (h * h / (4j * np.pi * t)) * (K @ f.values @ K.T)
    return CartesianField(vals, f.L)


def kernel_value_at(f: CartesianField, t: float, point=(0.0, 0.0)) -> complex:
    """Kernel quadrature of ``e^{it Delta} f`` at one point."""
    X, Y = f.mesh()
    d2 = (X - point[0]) ** 2 + (Y - point[1]) ** 2
    return complex(np.sum(np.exp(1j * d2 / (4 * t)) * f.values) * f.spacing**2 / (4j * np.pi * t))


# --------------------------------------------------------------- single mode


def _check_mode_resolution(fn: RadialProfile, t: float, r_out: np.ndarray, ppp: float, rtol: float = 1e-12):
    a = np.abs(fn.values)
    if not a.any():
        return
    live = a > rtol * a.max()
    R_f = float(fn.grid.nodes[np.flatnonzero(live)[-1]])
    omega = (float(np.max(r_out)) + R_f) / (2 * abs(t))
    nodes = fn.grid.nodes[fn.grid.nodes <= R_f]
    edges = np.concatenate(([0.0], nodes, [min(R_f + 1e-300, fn.grid.rmax)]))
    spacing = float(np.max(np.diff(edges)))
    if spacing * omega > 2 * np.pi / ppp:
        raise ResolutionError(
            f"radial grid spacing {spacing:.3g} gives {2 * np.pi / (spacing * omega):.2f} samples per period "
            f"of the phase rR/2|t| at t={t:.4g}; need {ppp}")


def mode_kernel(n: int, t: float, r_out, grid: RadialGrid) -> np.ndarray:
    """Matrix ``A`` with ``u_n(r_out) = A @ f_n(grid)`` for ``u = e^{it Delta} f``."""
    r = np.asarray(r_out, dtype=float)
    R = grid.nodes
    inner = bessel_b(n, -np.outer(r, R) / (2 * t)) * (np.exp(1j * R**2 / (4 * t)) * grid.weights)[None, :]
    return (np.exp(1j * r**2 / (4 * t)) / (2j * t))[:, None] * inner


def propagate_mode(fn: RadialProfile, t: float, out=None, samples_per_period: float = 6.0):
    """Propagate one angular mode with the Bessel form of the kernel.

    ``u_n(r) = (1/(2it)) e^{i r^2/4t} int B_n(-rR/2t) e^{i R^2/4t} f_n(R) R dR``.

    ``out`` may be ``None`` (evaluate on the input grid), a
    :class:`RadialGrid` (returns a :class:`RadialProfile` on it) or an array
    of radii (returns an array).  The input grid must leave at least
    ``samples_per_period`` nodes per period of the integrand phase over the
    live support of ``f_n``.
    """
    if t == 0:
        raise ValueError("propagate_mode needs t != 0")
    if out is None:
        out = fn.grid
    r_out = out.nodes if isinstance(out, RadialGrid) else np.asarray(out, dtype=float)
    _check_mode_resolution(fn, t, r_out, samples_per_period)
    vals = mode_kernel(fn.mode, t, r_out.ravel(), fn.grid) @ fn.values
    if isinstance(out, RadialGrid):
        return RadialProfile(fn.mode, vals, out)
    return vals.reshape(r_out.shape)


class SpectralModePropagator:
    """Evolution of mode ``n`` through the order-``n`` Hankel transform.

    ``F(rho) = 2 pi int f_n(R) J_n(2 pi rho R) R dR`` is involutive, and
    ``e^{it Delta}`` acts on it as ``exp(-4 pi^2 i t rho^2)``.  The frequency
    axis is a Gauss-Legendre grid on ``[0, freq_max]``; content of ``f_n``
    above ``freq_max`` is discarded.
    """

    def __init__(self, n: int, grid: RadialGrid, freq_max: float | None = None,
                 freq_count: int | None = None):
        self.n = int(n)
        self.grid = grid
        if freq_max is None:
            freq_max = len(grid) / (2 * grid.rmax)
        self.freq = make_radial_grid("graded", freq_max, freq_count or len(grid))
        rho, R = self.freq.nodes, grid.nodes
        self.forward = 2 * np.pi * jv(self.n, 2 * np.pi * np.outer(rho, R)) * grid.weights[None, :]

    def transform(self, values) -> np.ndarray:
        return self.forward @ np.asarray(values, dtype=complex)

    def synthesis(self, r_out) -> np.ndarray:
        """Matrix taking ``F`` on the frequency grid to ``f_n(r_out)``."""
        r = np.asarray(r_out, dtype=float)
        return 2 * np.pi * jv(self.n, 2 * np.pi * np.outer(r, self.freq.nodes)) * self.freq.weights[None, :]

    def phases(self, times) -> np.ndarray:
        """``exp(-4 pi^2 i t rho^2)`` with one row per time."""
        return np.exp(-4j * np.pi**2 * np.outer(np.asarray(times, dtype=float), self.freq.nodes**2))

    def chirp_samples_per_period(self, tmax: float) -> float:
        """Worst sampling of the phase ``4 pi^2 t rho^2`` on the frequency grid."""
        edges = np.concatenate(([0.0], self.freq.nodes, [self.freq.rmax]))
        gaps = np.diff(edges)
        mid = np.minimum(edges[1:], self.freq.rmax)
        freq = 8 * np.pi**2 * abs(tmax) * mid
        worst = np.max(gaps * freq)
        return float(np.inf if worst == 0 else 2 * np.pi / worst)

    def evolve(self, values, times, r_out) -> np.ndarray:
        """``u_n(t_k, r_m)`` as an array of shape ``(len(times), len(r_out))``."""
        F = self.transform(values)
        return (self.phases(times) * F[None, :]) @ self.synthesis(r_out).T


# ------------------------------------------------------------ cross checks


def mode_test_profile(n: int):
    """``R^{|n|} exp(-pi R^2)``, the standard Gaussian-type test profile."""
    return lambda R: np.asarray(R, dtype=float) ** abs(n) * np.exp(-np.pi * np.asarray(R, dtype=float) ** 2)


@dataclass(frozen=True)
class AgreementReport:
    n: int
    t: float
    N: int
    L: float
    cartesian_vs_kernel: float
    cartesian_vs_mode: float
    kernel_vs_mode: float

    @property
    def worst(self) -> float:
        return max(self.cartesian_vs_kernel, self.cartesian_vs_mode, self.kernel_vs_mode)


def three_way_agreement(n: int, t: float, N: int, L: float, radial_count: int = 400,
                        rmax: float = 4.5) -> AgreementReport:
    """Evolve ``R^{|n|} e^{-pi R^2} e^{i n theta}`` three ways and compare on the window."""
    from .discretization import make_radial_grid

    prof = mode_test_profile(n)
    f = CartesianField.from_function(lambda X, Y: prof(np.hypot(X, Y)) * np.exp(1j * n * np.arctan2(Y, X)), L, N)
    uc = propagate_cartesian(f, t).values
    uk = propagate_kernel(f, t).values
    grid = make_radial_grid("graded", rmax, radial_count)
    fn = RadialProfile.from_function(n, grid, prof)
    X, Y = f.mesh()
    radii, inverse = np.unique(np.hypot(X, Y), return_inverse=True)
    um = propagate_mode(fn, t, radii)[inverse].reshape(X.shape) * np.exp(1j * n * np.arctan2(Y, X))
    return AgreementReport(n, t, N, L, relative_l2(uc, uk), relative_l2(uc, um), relative_l2(uk, um))
