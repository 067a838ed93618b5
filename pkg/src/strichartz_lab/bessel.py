r"""Bessel functions in the angular-average normalisation and their dyadic split.

Throughout, ``B_n`` denotes

.. math::
    B_n(x) = \frac{1}{2\pi}\int_0^{2\pi} e^{ix\cos\theta} e^{in\theta}\,d\theta
           = i^n J_n(x),

the Bessel function that appears when a single angular mode is propagated.
Moduli agree with the standard :math:`J_n`.

The partition of ``B_n`` into smooth pieces is

.. math::
    B_n = m_0 + m_1 + \sum_{j \ge j_{min}} m_j

with ``m_0`` on ``r <= n/4`` (phase non-stationary), ``m_1`` on
``n/8 <= r <= 8n`` (turning point), and ``m_j`` on
``max(4n, 2^{j-1}) <= r <= 2^{j+1}`` (oscillatory regime).  All cutoffs are
built from the ``exp(-1/x)`` smooth step :func:`smooth_step`.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from typing import Callable

import numpy as np
from scipy.integrate import trapezoid
from scipy.special import hankel1, jv, jvp


class AccuracyWarning(RuntimeWarning):
    """Quadrature did not reach the requested tolerance."""


_QUAD_RTOL = 1e-13
_SERIES_CUTOFF = 1e-8


def _ipow(m: int) -> complex:
    return (1, 1j, -1, -1j)[int(m) % 4]
_QUAD_MAX_NODES = 1 << 18


def _contour_trapezoid(n: int, x: np.ndarray, nodes: int) -> np.ndarray:
    """Trapezoid rule for ``J_n(x)`` on the circle ``|z| = rho(x)``.

    ``J_n(x) = (1/2pi) int exp((x/2)(z - 1/z)) z^{-n} dtheta`` with
    ``z = rho e^{i theta}``.  This is the defining angular integral with the
    angle continued into the complex plane (``z = i e^{i theta}`` recovers
    ``e^{ix cos theta}``).  For ``x < n`` the radius sits at the real saddle
    point, so the integrand never exceeds ``|J_n|`` by more than a modest
    factor and tiny values keep full relative precision.
    """
    rho = np.ones_like(x)
    sub = (x > 0) & (x < n)
    rho[sub] = (n + np.sqrt(n * n - x[sub] ** 2)) / x[sub]
    th = 2 * np.pi * np.arange(nodes) / nodes
    out = np.empty(x.shape, dtype=float)
    peak = np.empty(x.shape, dtype=float)
    # chunk to bound memory at roughly 4M complex entries
    step = max(1, (1 << 22) // nodes)
    for lo in range(0, x.size, step):
        xs, rs = x[lo:lo + step, None], rho[lo:lo + step, None]
        z_re = rs * np.cos(th)
        z_im = rs * np.sin(th)
        inv = 1.0 / rs
        expo = 0.5 * xs * (z_re - inv * np.cos(th)) - n * np.log(rs)
        phase = 0.5 * xs * (z_im + inv * np.sin(th)) - n * th
        out[lo:lo + step] = np.mean(np.exp(expo) * np.cos(phase), axis=1)
        peak[lo:lo + step] = np.exp(np.max(expo, axis=1))
    return out, peak


def _required_nodes(n: int, x: float) -> int:
    need = x + n + 10 * x ** (1 / 3) + 40
    return 1 << max(5, math.ceil(math.log2(need)))


def bessel_eval(n: int, x) -> np.ndarray | complex:
    """``B_n(x)`` by adaptive quadrature of the defining angular integral.

    Valid for integer ``n`` and real ``x`` (``B_n(-x) = (-1)^n B_n(x)``,
    ``B_{-n} = B_n``).  The node count is doubled until two successive
    values agree to ``1e-13`` relative (or to the rounding floor of the
    sum near zeros of ``J_n``); otherwise an
    :class:`AccuracyWarning` is issued.
    """
    n = int(n)
    scalar = np.ndim(x) == 0
    x = np.atleast_1d(np.asarray(x, dtype=float))
    m = abs(n)
    ax = np.abs(x).ravel()
    vals = np.zeros(ax.shape)
    vals[ax == 0] = 1.0 if m == 0 else 0.0
    # two series terms are exact in double precision here; the saddle radius would overflow
    tiny = (ax > 0) & (ax < _SERIES_CUTOFF)
    h = ax[tiny] / 2
    with np.errstate(divide="ignore"):
        vals[tiny] = np.exp(m * np.log(h) - math.lgamma(m + 1)) * (1 - h * h / (m + 1))
    todo = np.flatnonzero(ax >= _SERIES_CUTOFF)
    if todo.size:
        need = np.array([_required_nodes(m, v) for v in ax[todo]])
        for nodes in np.unique(need):
            idx = todo[need == nodes]
            cur, peak = _contour_trapezoid(m, ax[idx], nodes)
            pending = np.arange(idx.size)
            k = nodes
            while pending.size:
                k *= 2
                nxt, _ = _contour_trapezoid(m, ax[idx[pending]], k)
                # rounding floor: the mean of unimodular-scaled terms carries ~eps * peak noise
                tol = np.maximum(_QUAD_RTOL * np.abs(nxt), 64 * np.finfo(float).eps * peak[pending])
                ok = np.abs(nxt - cur[pending]) <= tol
                cur[pending] = nxt
                pending = pending[~ok]
                if k >= _QUAD_MAX_NODES and pending.size:
                    warnings.warn(f"B_{n}: quadrature not converged for {pending.size} points", AccuracyWarning)
                    break
            vals[idx] = cur
    sign = np.where((x.ravel() < 0) & (m % 2 == 1), -1.0, 1.0)
    out = _ipow(m) * sign * vals
    out = out.reshape(x.shape)
    return complex(out[0]) if scalar else out


def bessel_b(n: int, x) -> np.ndarray:
    """Vectorised ``B_n(x) = i^n J_n(x)`` through the Cephes/AMOS ``jv``."""
    m = abs(int(n))
    x = np.asarray(x, dtype=float)
    sign = np.where((x < 0) & (m % 2 == 1), -1.0, 1.0)
    return _ipow(m) * sign * jv(m, np.abs(x))


def bessel_b_deriv(n: int, x) -> np.ndarray:
    """``d/dx B_n(x)``."""
    m = abs(int(n))
    x = np.asarray(x, dtype=float)
    sign = np.where((x < 0) & (m % 2 == 0), -1.0, 1.0)
    return _ipow(m) * sign * jvp(m, np.abs(x))


# ----------------------------------------------------------------- cutoffs


def _glue(u):
    u = np.asarray(u, dtype=float)
    out = np.zeros_like(u)
    # exp(-1/u) is exactly 0.0 in double precision for u < 1/745
    pos = u > 1e-3
    out[pos] = np.exp(-1.0 / u[pos])
    return out


def _glue_deriv(u):
    u = np.asarray(u, dtype=float)
    out = np.zeros_like(u)
    pos = u > 1e-3
    out[pos] = np.exp(-1.0 / u[pos]) / u[pos] ** 2
    return out


def smooth_step(u):
    """C-infinity step: 0 for ``u <= 0``, 1 for ``u >= 1``."""
    a, b = _glue(u), _glue(1.0 - np.asarray(u, dtype=float))
    return a / (a + b)


def smooth_step_deriv(u):
    u = np.asarray(u, dtype=float)
    a, b = _glue(u), _glue(1.0 - u)
    da, db = _glue_deriv(u), _glue_deriv(1.0 - u)
    return (da * b + a * db) / (a + b) ** 2


@dataclass(frozen=True)
class MultiplierPiece:
    """One smooth piece ``cutoff(r) * B_n(r)`` of the Bessel partition.

    ``kind`` is ``"m0"``, ``"m1"``, ``"mj"`` (with ``scale_j``) or ``"full"``.
    """

    kind: str
    mode: int
    scale_j: int | None
    support: tuple[float, float]
    cutoff: Callable[[np.ndarray], np.ndarray]
    cutoff_deriv: Callable[[np.ndarray], np.ndarray]

    def __call__(self, r) -> np.ndarray:
        r = np.asarray(r, dtype=float)
        return self.cutoff(r) * bessel_b(self.mode, r)

    def derivative(self, r) -> np.ndarray:
        r = np.asarray(r, dtype=float)
        return (self.cutoff_deriv(r) * bessel_b(self.mode, r)
                + self.cutoff(r) * bessel_b_deriv(self.mode, r))

    @property
    def label(self) -> str:
        return f"m{self.scale_j}" if self.kind == "mj" else self.kind

    def is_zero(self) -> bool:
        lo, hi = self.support
        return hi <= lo


def full_symbol(n: int) -> MultiplierPiece:
    """The unsplit symbol ``B_n`` as a degenerate piece."""
    one = lambda r: np.ones_like(np.asarray(r, dtype=float))
    zero = lambda r: np.zeros_like(np.asarray(r, dtype=float))
    return MultiplierPiece("full", int(n), None, (0.0, math.inf), one, zero)


class BesselPartition:
    """Smooth partition ``B_n = m0 + m1 + sum_{j=jmin}^{jmax} m_j``.

    The sum reproduces ``B_n`` exactly on ``0 <= r <= 2**jmax``.  For
    ``n = 0`` there is no ``m0`` region and the ``m1``/``m_j`` boundaries use
    the unit scale in place of ``n``.
    """

    def __init__(self, n: int, jmax: int):
        self.n = abs(int(n))
        self.nu = max(self.n, 1)
        self.jmin = self._jmin(self.nu)
        if jmax < self.jmin:
            raise ValueError(f"jmax={jmax} below the first dyadic scale {self.jmin} for n={n}")
        self.jmax = int(jmax)

    @staticmethod
    def _jmin(nu: int) -> int:
        # smallest j with 2^{j+1} > 4 nu; then 2^j <= 4 nu so the dyadic sum covers r >= 4 nu
        j = 0
        while 2 ** (j + 1) <= 4 * nu:
            j += 1
        return j

    # individual cutoffs -------------------------------------------------
    def chi0(self, r):
        r = np.asarray(r, dtype=float)
        if self.n == 0:
            return np.zeros_like(r)
        w = self.n / 8
        return 1.0 - smooth_step((r - w) / w)

    def chi0_deriv(self, r):
        r = np.asarray(r, dtype=float)
        if self.n == 0:
            return np.zeros_like(r)
        w = self.n / 8
        return -smooth_step_deriv((r - w) / w) / w

    def high(self, r):
        w = 4 * self.nu
        return smooth_step((np.asarray(r, dtype=float) - w) / w)

    def high_deriv(self, r):
        w = 4 * self.nu
        return smooth_step_deriv((np.asarray(r, dtype=float) - w) / w) / w

    def chi1(self, r):
        return 1.0 - self.chi0(r) - self.high(r)

    def chi1_deriv(self, r):
        return -self.chi0_deriv(r) - self.high_deriv(r)

    @staticmethod
    def _log2(r):
        r = np.asarray(r, dtype=float)
        with np.errstate(divide="ignore"):
            return np.where(r > 0, np.log2(np.where(r > 0, r, 1.0)), -np.inf)

    def dyadic(self, j: int, r):
        """``S(log2 r - j + 1) - S(log2 r - j)``: supported on ``[2^{j-1}, 2^{j+1}]``."""
        L = self._log2(r)
        return smooth_step(L - j + 1) - smooth_step(L - j)

    def dyadic_deriv(self, j: int, r):
        r = np.asarray(r, dtype=float)
        L = self._log2(r)
        with np.errstate(divide="ignore", invalid="ignore"):
            fac = np.where(r > 0, 1.0 / (np.where(r > 0, r, 1.0) * math.log(2)), 0.0)
        return (smooth_step_deriv(L - j + 1) - smooth_step_deriv(L - j)) * fac

    def chij(self, j: int, r):
        return self.high(r) * self.dyadic(j, r)

    def chij_deriv(self, j: int, r):
        return self.high_deriv(r) * self.dyadic(j, r) + self.high(r) * self.dyadic_deriv(j, r)

    # pieces ----------------------------------------------------------------
    def m0(self) -> MultiplierPiece:
        hi = self.n / 4 if self.n else 0.0
        return MultiplierPiece("m0", self.n, None, (0.0, hi), self.chi0, self.chi0_deriv)

    def m1(self) -> MultiplierPiece:
        return MultiplierPiece("m1", self.n, None, (self.n / 8, 8.0 * self.nu), self.chi1, self.chi1_deriv)

    def mj(self, j: int) -> MultiplierPiece:
        if not self.jmin <= j <= self.jmax:
            raise ValueError(f"scale j={j} outside [{self.jmin}, {self.jmax}]")
        support = (max(4.0 * self.nu, 2.0 ** (j - 1)), 2.0 ** (j + 1))
        return MultiplierPiece("mj", self.n, j, support,
                               lambda r, j=j: self.chij(j, r),
                               lambda r, j=j: self.chij_deriv(j, r))

    def pieces(self) -> list[MultiplierPiece]:
        return [self.m0(), self.m1()] + [self.mj(j) for j in range(self.jmin, self.jmax + 1)]

    def check_range(self, r) -> None:
        rmax = float(np.max(np.abs(r)))
        if rmax > 2.0 ** self.jmax:
            raise ValueError(f"jmax={self.jmax} too small: partition exact only up to "
                             f"r = {2.0 ** self.jmax}, requested {rmax}")

    def partition_sum(self, r) -> np.ndarray:
        self.check_range(r)
        return sum(p(r) for p in self.pieces())


def build_partition(n: int, jmax: int) -> list[MultiplierPiece]:
    """Pieces ``[m0, m1, m_jmin, ..., m_jmax]`` of ``B_n``."""
    return BesselPartition(n, jmax).pieces()


# ------------------------------------------------------------ measured bounds


def _central_difference(f: Callable, r: np.ndarray, k: int, h: float) -> np.ndarray:
    if k == 0:
        return f(r)
    if k == 1:
        return (f(r + h) - f(r - h)) / (2 * h)
    if k == 2:
        return (f(r + h) - 2 * f(r) + f(r - h)) / h**2
    if k == 3:
        return (f(r + 2 * h) - 2 * f(r + h) + 2 * f(r - h) - f(r - 2 * h)) / (2 * h**3)
    raise ValueError(f"finite differences above order 3 are unstable (k={k})")


def m0_decay_check(n: int, k: int, N: float, samples: int = 2001) -> float:
    """``n^N * sup |m0^{(k)}(r)|`` over the ``m0`` support.

    ``m0`` is evaluated with the quadrature :func:`bessel_eval`, which keeps
    relative precision for the exponentially small values in this region.
    """
    if n < 4:
        raise ValueError("m0 decay check needs n >= 4")
    if k > 3:
        raise ValueError(f"finite differences above order 3 are unstable (k={k})")
    part = BesselPartition(n, BesselPartition._jmin(n))
    f = lambda r: part.chi0(r) * bessel_eval(n, r)
    r = np.linspace(0.0, n / 4, samples)
    h = 1e-3 * max(1.0, n / 16)
    d = _central_difference(f, r, k, h)
    return float(np.max(np.abs(d)) * float(n) ** N)


@dataclass(frozen=True)
class M1Envelope:
    n: int
    c_value: float
    c_deriv: float
    integral: float


def m1_envelope(n: int, lam) -> np.ndarray:
    """``n^{-1/3} (1 + n^{-1/3}|lam - n|)^{-1/4}``."""
    lam = np.asarray(lam, dtype=float)
    c = n ** (-1 / 3)
    return c * (1 + c * np.abs(lam - n)) ** -0.25


def m1_envelope_check(n: int, points_per_unit: int = 16) -> M1Envelope:
    """Smallest constants in the two pointwise ``m1`` envelopes, and
    ``int |m1|^2 + |m1'|^2 dlam`` over the ``m1`` support."""
    if n < 4:
        raise ValueError("m1 envelope check needs n >= 4")
    part = BesselPartition(n, BesselPartition._jmin(n))
    piece = part.m1()
    lo, hi = piece.support
    lam = np.linspace(lo, hi, int((hi - lo) * points_per_unit) + 1)
    val = np.abs(piece(lam))
    der = np.abs(piece.derivative(lam))
    c_value = float(np.max(val / m1_envelope(n, lam)))
    c_deriv = float(np.max(der) * math.sqrt(n))
    integral = float(trapezoid(val**2 + der**2, lam))
    return M1Envelope(n, c_value, c_deriv, integral)


# ----------------------------------------------------------- asymptotic split


@dataclass(frozen=True)
class AsymptoticAmplitude:
    """Amplitude ``psi_j^{sign}`` in ``m_j(xi) = 2^{-j/2} sum_pm e^{pm i xi} psi_j^pm(2^{-j} xi)``."""

    sign: int
    scale_j: int
    u: np.ndarray
    profile: np.ndarray

    def sup(self) -> float:
        return float(np.max(np.abs(self.profile)))

    def sup_deriv(self) -> float:
        return float(np.max(np.abs(np.gradient(self.profile, self.u))))


def extract_amplitudes(piece: MultiplierPiece, degree: int = 16, samples: int = 4000):
    """Separate ``m_j`` into its two unimodular carriers by least squares.

    Fits ``2^{j/2} m_j(xi) = cutoff(xi) [e^{i xi} A_+(u) + e^{-i xi} A_-(u)]``
    with ``u = 2^{-j} xi`` and ``A_pm`` Chebyshev polynomials of the given
    degree.  Returns ``(psi_plus, psi_minus, max_residual)`` where the
    residual is measured on ``m_j`` itself.
    """
    if piece.kind != "mj":
        raise ValueError("amplitude extraction applies to m_j pieces only")
    j = piece.scale_j
    lo, hi = piece.support
    xi = np.linspace(lo, hi, samples)
    u = xi / 2.0**j
    cut = piece.cutoff(xi)
    data = 2.0 ** (j / 2) * piece(xi)
    ulo, uhi = lo / 2.0**j, hi / 2.0**j
    basis = np.polynomial.chebyshev.chebvander((2 * u - ulo - uhi) / (uhi - ulo), degree)
    keep = cut > 1e-8
    A = np.hstack([(cut * np.exp(1j * xi))[:, None] * basis, (cut * np.exp(-1j * xi))[:, None] * basis])
    coef, *_ = np.linalg.lstsq(A[keep], data[keep], rcond=None)
    cp, cm = coef[: degree + 1], coef[degree + 1:]
    psi_p = cut * (basis @ cp)
    psi_m = cut * (basis @ cm)
    fit = np.exp(1j * xi) * psi_p + np.exp(-1j * xi) * psi_m
    resid = float(np.max(np.abs(fit - data)) * 2.0 ** (-j / 2))
    return AsymptoticAmplitude(+1, j, u, psi_p), AsymptoticAmplitude(-1, j, u, psi_m), resid


def hankel_amplitude(piece: MultiplierPiece, sign: int, u) -> np.ndarray:
    """Exact carrier amplitude from ``J_n = (H^1_n + H^2_n)/2`` (test oracle)."""
    j, n = piece.scale_j, piece.mode
    xi = np.asarray(u, dtype=float) * 2.0**j
    h = hankel1(n, xi) if sign > 0 else np.conj(hankel1(n, xi))
    return 2.0 ** (j / 2) * piece.cutoff(xi) * _ipow(n) * 0.5 * h * np.exp(-1j * sign * xi)
