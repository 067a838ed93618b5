"""Failure of the retarded estimate at the double endpoint.

Forcing concentrated on the time axis, ``F(x, s) = g(s) delta(x)``, gives the
solution trace at the origin

    u(0, t) = int_{s<t} g(s) / (4 pi i (t - s)) ds = (i / 4 pi) H g(t),

with the one-sided Hilbert-type operator ``H g(t) = int_{s<t} g(s)/(s - t) ds``.
``H`` is unbounded on ``L^2``; truncating to ``s < t - eps`` makes the growth
of ``||H_eps chi_[0,1]||_2`` in ``log(1/eps)`` measurable.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy.integrate import quad, trapezoid
from scipy.special import roots_legendre

from .norms import INF, exponent, is_admissible, reciprocal, scaling_consistent
from .propagator import CartesianField, kernel_value_at

ORIGIN_CONSTANT = 1j / (4 * np.pi)


@dataclass(frozen=True, eq=False)
class TimeSignal:
    """Piecewise-constant ``g`` with ``values[k]`` on ``[edges[k], edges[k+1])``."""

    edges: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        e = np.asarray(self.edges, dtype=float)
        v = np.asarray(self.values, dtype=complex)
        if e.ndim != 1 or v.shape != (e.size - 1,) or np.any(np.diff(e) <= 0):
            raise ValueError("need increasing edges and one value per cell")
        object.__setattr__(self, "edges", e)
        object.__setattr__(self, "values", v)

    @classmethod
    def indicator(cls, a: float = 0.0, b: float = 1.0, height: float = 1.0) -> "TimeSignal":
        return cls([a, b], [height])

    def scaled(self, c: complex) -> "TimeSignal":
        return TimeSignal(self.edges, c * self.values)

    def norm(self) -> float:
        return float(np.sqrt(np.sum(np.abs(self.values) ** 2 * np.diff(self.edges))))

    def __call__(self, t) -> np.ndarray:
        t = np.asarray(t, dtype=float)
        k = np.searchsorted(self.edges, t, side="right") - 1
        inside = (k >= 0) & (k < self.values.size)
        return np.where(inside, self.values[np.clip(k, 0, self.values.size - 1)], 0.0)


@dataclass(frozen=True)
class OneSidedHilbertOp:
    """``H_eps g(t) = int_{s < t - eps} g(s) / (s - t) ds`` on ``window``."""

    epsilon: float
    window: tuple = (0.0, 1000.0)

    def __post_init__(self):
        if not self.epsilon > 0:
            raise ValueError("epsilon must be positive")
        if not self.window[0] < self.window[1]:
            raise ValueError("window must be an interval")

    def __call__(self, g: TimeSignal, t) -> np.ndarray:
        return delta_forcing_reduce(g, t, self.epsilon)


def delta_forcing_reduce(g: TimeSignal, t, epsilon: float) -> np.ndarray:
    """``int_{s < t - eps} g(s)/(s - t) ds``, exact for piecewise-constant ``g``.

    On a cell ``[a, b)`` the integral up to ``c = min(b, t - eps)`` is
    ``ln(t - c) - ln(t - a)``.  Multiply by :data:`ORIGIN_CONSTANT` for the
    solution trace ``u(0, t)``.
    """
    if not epsilon > 0:
        raise ValueError("epsilon must be positive")
    t = np.atleast_1d(np.asarray(t, dtype=float))
    a, b = g.edges[:-1][None, :], g.edges[1:][None, :]
    tt = t[:, None]
    c = np.minimum(b, tt - epsilon)
    active = c > a
    with np.errstate(invalid="ignore", divide="ignore"):
        piece = np.where(active, np.log(np.where(active, tt - c, 1.0)) - np.log(np.where(active, tt - a, 1.0)), 0.0)
    return piece @ g.values


def origin_trace(g: TimeSignal, t, epsilon: float) -> np.ndarray:
    """``u(0, t)`` for the forcing ``g(s) delta(x)`` truncated to ``s < t - eps``."""
    return ORIGIN_CONSTANT * delta_forcing_reduce(g, t, epsilon)


def analytic_lower_bound(epsilon) -> np.ndarray:
    """``((ln(1/eps) - 1)^2 + 1)^{1/2}``."""
    L = np.log(1 / np.asarray(epsilon, dtype=float))
    return np.sqrt((L - 1) ** 2 + 1)


def rho(epsilon: float, window: tuple = (0.0, 1000.0), g: TimeSignal | None = None) -> float:
    """``||H_eps g||_{L^2(window)} / ||g||_2`` with ``g = chi_[0,1]`` by default."""
    g = g or TimeSignal.indicator()
    lo, hi = window
    if lo > g.edges[0] or hi < g.edges[-1] + 1:
        raise ValueError("window must contain the support of g plus a unit tail")
    gn = g.norm()
    if gn == 0:
        raise ValueError("rho is undefined for g = 0")
    f = lambda t: abs(delta_forcing_reduce(g, t, epsilon)[0]) ** 2
    brk = sorted({p for e in g.edges for p in (e, e + epsilon) if lo < p < hi})
    pts = [lo] + brk + [hi]
    total = 0.0
    for a, b in zip(pts, pts[1:]):
        # geometric split keeps the long tail well sampled
        cuts = list(np.geomspace(a, b, 12)) if a > 0 and b > 10 * a else [a, b]
        for c0, c1 in zip(cuts, cuts[1:]):
            total += quad(f, c0, c1, limit=400, epsabs=0, epsrel=1e-12)[0]
    return math.sqrt(total) / gn


@dataclass
class DivergenceScan:
    rows: list
    slope: float
    intercept: float


def divergence_scan(epsilons: Sequence[float], window: tuple = (0.0, 1000.0),
                    g: TimeSignal | None = None) -> DivergenceScan:
    """``rho(eps)`` against ``ln(1/eps)``: rows ``(epsilon, rho, analytic_lower_bound)`` and a linear fit."""
    eps = np.asarray(sorted(epsilons, reverse=True), dtype=float)
    if eps.size < 2 or math.log10(eps.max() / eps.min()) < 4 - 1e-9:
        raise ValueError("epsilon values must span at least four decades")
    rows = [{"epsilon": float(e), "rho": rho(float(e), window, g),
             "analytic_lower_bound": float(analytic_lower_bound(e))} for e in eps]
    L = np.log(1 / eps)
    slope, intercept = np.polyfit(L, [r["rho"] for r in rows], 1)
    return DivergenceScan(rows, float(slope), float(intercept))


def band_limited_indicator(cutoff: float, span: tuple = (-4.0, 5.0), cells: int = 4096) -> TimeSignal:
    """``chi_[0,1]`` with frequencies above ``cutoff`` removed, on a fine cell grid."""
    edges = np.linspace(span[0], span[1], cells + 1)
    mid = 0.5 * (edges[1:] + edges[:-1])
    vals = ((mid >= 0) & (mid < 1)).astype(float)
    freqs = np.fft.fftfreq(cells, d=edges[1] - edges[0])
    vals = np.fft.ifft(np.fft.fft(vals) * (np.abs(freqs) <= cutoff)).real
    return TimeSignal(edges, vals)


def rho_sampled(g: TimeSignal, epsilon: float, t_grid) -> float:
    """``rho`` by the trapezoid rule on ``t_grid`` (for many-cell signals)."""
    t = np.asarray(t_grid, dtype=float)
    h = np.concatenate([np.abs(delta_forcing_reduce(g, t[s:s + 256], epsilon)) ** 2
                        for s in range(0, t.size, 256)])
    return math.sqrt(float(trapezoid(h, t))) / g.norm()


def narrow_bump_trace(g: TimeSignal, t: float, epsilon: float, width: float,
                      N: int = 64, nodes_per_cell: int = 64) -> complex:
    """``u(0, t)`` for ``g(s) phi_w(x)`` with a unit-mass Gaussian bump of width ``w``,
    ``phi_w(x) = w^{-2} exp(-pi |x|^2 / w^2)``, using kernel quadrature at the origin."""
    L = 12 * width
    bump = CartesianField.from_function(lambda X, Y: np.exp(-np.pi * (X**2 + Y**2) / width**2) / width**2, L, N)
    x, w = roots_legendre(nodes_per_cell)
    total = 0.0j
    for a, b, v in zip(g.edges[:-1], g.edges[1:], g.values):
        c = min(b, t - epsilon)
        if c <= a or v == 0:
            continue
        # tau = t - s spans decades near the cut; integrate in log(tau)
        tau_lo, tau_hi = t - c, t - a
        u = np.log(tau_lo) + 0.5 * (np.log(tau_hi) - np.log(tau_lo)) * (x + 1)
        tau = np.exp(u)
        wt = 0.5 * (np.log(tau_hi) - np.log(tau_lo)) * w * tau
        vals = np.array([kernel_value_at(bump, float(tt), (0.0, 0.0)) for tt in tau])
        total += v * np.sum(vals * wt)
    return complex(total)


@dataclass(frozen=True)
class GateRecord:
    qt: object
    rt: object
    outcome: str
    arithmetic: str


def endpoint_gate(qt, rt) -> GateRecord:
    """Route a retarded configuration with output ``(2, inf)`` in the plane.

    Outcomes: ``scaling-inconsistent``, ``admissible`` (the Christ-Kiselev
    pipeline applies) or ``double-endpoint`` (the divergence scan applies).
    """
    qt, rt = exponent(qt), exponent(rt)
    lhs = 2 * reciprocal(2) + 2 * reciprocal(INF) + 2
    rhs = 2 * (1 - reciprocal(qt)) + 2 * (1 - reciprocal(rt))
    arithmetic = f"2/q + 2/r + 2 = {lhs}; 2/qt' + 2/rt' = {rhs}"
    if not scaling_consistent(2, INF, qt, rt):
        return GateRecord(qt, rt, "scaling-inconsistent", arithmetic + " (unequal)")
    if (qt, rt) == (2, INF):
        return GateRecord(qt, rt, "double-endpoint", arithmetic + "; (2, inf) is the forbidden pair")
    if is_admissible(qt, rt, 2):
        return GateRecord(qt, rt, "admissible", arithmetic + "; 1/qt + 1/rt = 1/2 with qt, rt >= 2")
    raise AssertionError("scaling-consistent pairs are admissible or the double endpoint")
