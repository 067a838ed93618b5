"""The maximal Bessel-multiplier problem on the line.

After the substitutions ``xi = R^2``, ``g(xi) = f_n(R)``, ``x = 1/(8 pi t)``
and ``lambda = r/(2|t|)``, a single propagated mode satisfies

    |u_n(r, t)| = (1/(4|t|)) |int J_n(lambda sqrt(xi)) g(xi) e^{2 pi i x xi} d xi|,

so the endpoint estimate for that mode becomes the bound
``||sup_lambda |T_lambda G|||_2 <~ ||G||_2`` for the Fourier multiplier
``T_lambda``: ``(T_lambda G)^(xi) = B_n(lambda |xi|^{1/2}) G^(xi)``.

Fourier transforms use ``G^(xi) = int G(x) e^{-2 pi i x xi} dx``; on a
:class:`LineSignal` this is the DFT with frequencies ``numpy.fft.fftfreq``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
from scipy.integrate import quad
from scipy.special import roots_legendre

from .bessel import BesselPartition, MultiplierPiece, bessel_b, full_symbol, smooth_step
from .discretization import RadialProfile
from .propagator import ResolutionError, propagate_mode


class DivergenceError(ValueError):
    """The right-hand side of a Sobolev-type bound is infinite."""


# ------------------------------------------------------------------ signals


@dataclass(frozen=True, eq=False)
class LineSignal:
    """Samples of ``G`` at ``x_k = (k - N/2) h``, ``k = 0..N-1``."""

    values: np.ndarray
    spacing: float

    def __post_init__(self):
        v = np.asarray(self.values, dtype=complex)
        if v.ndim != 1 or v.size < 2:
            raise ValueError("line signal must be a 1-d array with at least two samples")
        if not self.spacing > 0:
            raise ValueError("spacing must be positive")
        object.__setattr__(self, "values", v)

    @property
    def N(self) -> int:
        return self.values.size

    @property
    def x(self) -> np.ndarray:
        return (np.arange(self.N) - self.N // 2) * self.spacing

    @property
    def xi(self) -> np.ndarray:
        return np.fft.fftfreq(self.N, d=self.spacing)

    @classmethod
    def from_function(cls, func, N: int, spacing: float) -> "LineSignal":
        return cls(func((np.arange(N) - N // 2) * spacing), spacing)

    def norm(self) -> float:
        return float(np.linalg.norm(self.values) * math.sqrt(self.spacing))

    def central_mass_fraction(self) -> float:
        x = self.x
        half = self.N * self.spacing / 4
        a = np.abs(self.values) ** 2
        total = a.sum()
        return float(a[np.abs(x) < half].sum() / total) if total else 1.0

    def shifted(self, k: int) -> "LineSignal":
        """Periodic translation by ``k`` samples."""
        return LineSignal(np.roll(self.values, k), self.spacing)


def random_signal(N: int, spacing: float, seed: int) -> LineSignal:
    """Complex white noise under a smooth window on the central half."""
    rng = np.random.default_rng(seed)
    noise = rng.standard_normal(N) + 1j * rng.standard_normal(N)
    # 1 on the central quarter, 0 outside the central half, smooth between
    u = (np.arange(N) - N // 2) / (N / 4)
    return LineSignal(noise * (1.0 - smooth_step(2 * np.abs(u) - 1)), spacing)


# ---------------------------------------------------------------- operators


def resolve_piece(piece, n: int) -> MultiplierPiece:
    """``"full"``, ``"m0"``, ``"m1"``, ``("mj", j)`` / ``"mj:j"`` or a piece itself."""
    if isinstance(piece, MultiplierPiece):
        return piece
    if piece == "full":
        return full_symbol(n)
    if isinstance(piece, str) and piece.startswith("mj:"):
        piece = ("mj", int(piece[3:]))
    part_j = piece[1] if isinstance(piece, tuple) else None
    part = BesselPartition(n, max(part_j or 0, BesselPartition._jmin(max(abs(n), 1))))
    if piece == "m0":
        return part.m0()
    if piece == "m1":
        return part.m1()
    if isinstance(piece, tuple) and piece[0] == "mj":
        return part.mj(int(piece[1]))
    raise ValueError(f"unknown multiplier piece {piece!r}")


@dataclass(frozen=True)
class MultiplierOperator:
    piece: object
    mode: int
    lam: float

    def __post_init__(self):
        if not self.lam > 0:
            raise ValueError("lambda must be positive")

    @property
    def symbol(self) -> MultiplierPiece:
        return resolve_piece(self.piece, self.mode)

    def multiplier(self, xi) -> np.ndarray:
        return self.symbol(self.lam * np.sqrt(np.abs(xi)))


def apply_symbol(G: LineSignal, mult: np.ndarray) -> LineSignal:
    return LineSignal(np.fft.ifft(mult * np.fft.fft(G.values)), G.spacing)


def apply_T(op: MultiplierOperator, G: LineSignal) -> LineSignal:
    """``T_lambda G`` through the FFT."""
    return apply_symbol(G, op.multiplier(G.xi))


def apply_T_variable(piece, n: int, G: LineSignal, lam_of_x) -> LineSignal:
    """``T_{lambda(x)} G (x)`` for a positive function ``lambda(x)`` given on the grid."""
    lam_of_x = np.asarray(lam_of_x, dtype=float)
    if lam_of_x.shape != G.values.shape or np.any(lam_of_x <= 0):
        raise ValueError("lambda(x) must be positive and sampled on the signal grid")
    sym = resolve_piece(piece, n)
    Ghat = np.fft.fft(G.values)
    root = np.sqrt(np.abs(G.xi))
    out = np.empty(G.N, dtype=complex)
    for lam in np.unique(lam_of_x):
        mask = lam_of_x == lam
        out[mask] = np.fft.ifft(sym(lam * root) * Ghat)[mask]
    return LineSignal(out, G.spacing)


# ---------------------------------------------------------- maximal operator


@dataclass(frozen=True)
class LambdaGrid:
    """Geometric grid ``lo * 2^{k/per_octave}`` covering ``[lo, hi]``."""

    lo: float
    hi: float
    per_octave: int = 16

    def __post_init__(self):
        if not 0 < self.lo < self.hi:
            raise ValueError("need 0 < lo < hi")
        if self.per_octave < 1:
            raise ValueError("per_octave must be positive")

    @property
    def nodes(self) -> np.ndarray:
        count = int(math.ceil(self.per_octave * math.log2(self.hi / self.lo)))
        return self.lo * 2.0 ** (np.arange(count + 1) / self.per_octave)

    def refined(self) -> "LambdaGrid":
        """Twice the density; contains every node of ``self``."""
        return LambdaGrid(self.lo, self.hi, 2 * self.per_octave)


def default_lambda_grid(piece, n: int, G: LineSignal, per_octave: int = 16) -> LambdaGrid:
    """Range of ``lambda`` where ``piece(lambda sqrt|xi|)`` meets the grid frequencies."""
    sym = resolve_piece(piece, n)
    xi = np.abs(G.xi)
    xi_min, xi_max = xi[xi > 0].min(), xi.max()
    lo, hi = sym.support
    if not math.isfinite(hi):
        hi = 16.0 * max(abs(n), 4)
    lo = lo if lo > 0 else 1e-3
    return LambdaGrid(lo / math.sqrt(xi_max), hi / math.sqrt(xi_min), per_octave)


@dataclass
class MaximalResult:
    sup: np.ndarray
    ratio: float
    history: list = field(default_factory=list)


def symbol_table(sym: MultiplierPiece, G: LineSignal, lams: np.ndarray) -> np.ndarray:
    """``sym(lam_i sqrt|xi_k|)`` for every grid ``lam_i`` and DFT frequency ``xi_k``."""
    return sym(np.outer(lams, np.sqrt(np.abs(G.xi))))


def _sup_over(table: np.ndarray, G: LineSignal, chunk: int = 64) -> np.ndarray:
    Ghat = np.fft.fft(G.values)
    best = np.zeros(G.N)
    for s in range(0, table.shape[0], chunk):
        block = table[s:s + chunk] * Ghat[None, :]
        best = np.maximum(best, np.abs(np.fft.ifft(block, axis=1)).max(axis=0))
    return best


def maximal_T(piece, n: int, G: LineSignal, lambda_grid: LambdaGrid | None = None,
              levels: int = 2) -> MaximalResult:
    """Pointwise ``max_lambda |T_lambda G|`` and ``||max||_2 / ||G||_2``.

    ``levels`` grids are evaluated, each twice as dense as the previous;
    the history holds ``(per_octave, ratio)`` and ``sup`` is from the finest.
    """
    grid = lambda_grid or default_lambda_grid(piece, n, G)
    if grid.per_octave < 16:
        raise ValueError("the lambda grid needs at least 16 points per octave")
    sym = resolve_piece(piece, n)
    g2 = G.norm()
    history, sup = [], None
    for _ in range(levels):
        sup = _sup_over(symbol_table(sym, G, grid.nodes), G)
        ratio = float(np.linalg.norm(sup) * math.sqrt(G.spacing) / g2) if g2 else 0.0
        history.append((grid.per_octave, ratio))
        grid = grid.refined()
    return MaximalResult(sup, history[-1][1], history)


@dataclass
class DecayScan:
    n: int
    rows: list
    per_j: dict
    slope: float


def piece_decay_scan(n: int, j_range: Sequence[int], trials: int = 32, N: int = 4096,
                     spacing: float = 1.0, per_octave: int = 16, seed: int = 0) -> DecayScan:
    """Worst ratio ``||sup_lambda |T^j_lambda G|||_2 / ||G||_2`` over random ``G``
    for each ``j``, and the least-squares slope of ``log2(ratio)`` against ``j``.

    Trial ``k`` uses seed ``seed + k`` for every ``j``.
    """
    js = sorted(int(j) for j in j_range)
    if js[-1] - js[0] < 4:
        raise ValueError("piece decay scan needs at least four octaves of j")
    bad = [j for j in js if 2**j < 8 * abs(n)]
    if bad:
        raise ValueError(f"scales {bad} violate 2^j >= 8n for n={n}")
    rows, per_j = [], {}
    signals = [random_signal(N, spacing, seed + k) for k in range(trials)]
    for j in js:
        piece = ("mj", j)
        grid = default_lambda_grid(piece, n, signals[0], per_octave)
        table = symbol_table(resolve_piece(piece, n), signals[0], grid.nodes)
        for k, G in enumerate(signals):
            sup = _sup_over(table, G)
            ratio = float(np.linalg.norm(sup) * math.sqrt(spacing) / G.norm())
            rows.append({"n": n, "j": j, "trial_seed": seed + k, "ratio": ratio})
        per_j[j] = max(r["ratio"] for r in rows if r["j"] == j)
    slope = float(np.polyfit(js, np.log2([per_j[j] for j in js]), 1)[0])
    return DecayScan(n, rows, per_j, slope)


# ------------------------------------------------------------------ kernels


_PANEL = 32


def _gauss(lo: float, hi: float, count: int):
    """Composite Gauss-Legendre with at least ``count`` nodes in equal panels of 32."""
    x, w = roots_legendre(_PANEL)
    panels = max(1, -(-int(count) // _PANEL))
    edges = np.linspace(lo, hi, panels + 1)
    half = 0.5 * np.diff(edges)[:, None]
    nodes = edges[:-1, None] + half * (x[None, :] + 1)
    return nodes.ravel(), (half * w[None, :]).ravel()


def kernel_K(piece: MultiplierPiece, lam: float, x_grid, samples_per_period: float = 4.0) -> np.ndarray:
    """``K(x) = int e^{2 pi i x xi} m(lam |xi|^{1/2}) d xi`` by Gauss-Legendre quadrature.

    With ``xi = (r/lam)^2`` the integral is ``(4/lam^2) int cos(2 pi x r^2/lam^2) m(r) r dr``
    over the support of ``m``.  ``x_grid`` must sample the kernel's oscillation
    (frequency up to ``(r_max/lam)^2``) at ``samples_per_period``.
    """
    x = np.asarray(x_grid, dtype=float)
    lo, hi = piece.support
    if not math.isfinite(hi):
        raise ValueError("kernel_K needs a compactly supported piece")
    if x.size > 1:
        step = float(np.max(np.abs(np.diff(np.sort(x)))))
        if step * (hi / lam) ** 2 > 1 / samples_per_period:
            raise ResolutionError(
                f"x spacing {step:.3g} under-samples the kernel oscillation (hi/lam)^2 = {(hi / lam) ** 2:.3g}")
    xmax = float(np.max(np.abs(x))) if x.size else 0.0
    periods = (hi - lo) / (2 * np.pi) + xmax * (hi**2 - lo**2) / lam**2
    r, w = _gauss(lo, hi, int(8 * periods) + 200)
    vals = piece(r) * r * w
    out = np.empty(x.shape, dtype=complex)
    for s in range(0, x.size, 256):
        xs = x.ravel()[s:s + 256]
        out.ravel()[s:s + 256] = np.cos(2 * np.pi * np.outer(xs, r**2) / lam**2) @ vals
    return out * 4 / lam**2


def convolve_kernel(piece: MultiplierPiece, lam: float, G: LineSignal) -> LineSignal:
    """``int K(x - y) G(y) dy`` on the grid of ``G`` (non-periodic)."""
    offsets = (np.arange(-(G.N - 1), G.N)) * G.spacing
    K = kernel_K(piece, lam, offsets)
    full = np.convolve(G.values, K) * G.spacing
    return LineSignal(full[G.N - 1:2 * G.N - 1], G.spacing)


# -------------------------------------------------------------- TT* harness


@dataclass(frozen=True)
class EnvelopePhi:
    """``C min(r^{-1/2}, c, c (c r)^{-10})`` with ``c = 2^j / a``."""

    scale_j: int
    a: float
    C: float = 1.0

    @property
    def c(self) -> float:
        return 2.0**self.scale_j / self.a

    def __call__(self, r) -> np.ndarray:
        r = np.abs(np.asarray(r, dtype=float))
        c = self.c
        with np.errstate(divide="ignore", over="ignore"):
            first = np.where(r > 0, r ** -0.5, np.inf)
            third = np.where(r > 0, c * (c * r) ** -10.0, np.inf)
        return self.C * np.minimum(np.minimum(first, c), third)

    def l1_norm(self) -> float:
        """``int_R Phi(|r|) dr``."""
        c = self.c
        brk = sorted({1 / c**2, 1 / c, c ** (-18 / 19)})
        f = lambda r: float(self(r))
        total, edges = 0.0, [0.0] + brk
        for lo, hi in zip(edges, edges[1:]):
            total += quad(f, lo, hi, limit=200)[0]
        total += quad(f, edges[-1], np.inf, limit=200)[0]
        return 2 * total


def ttstar_lhs(piece: MultiplierPiece, a: float, b: float, d: float) -> float:
    """``|int m(a |xi|^{1/2}) conj(m(b |xi|^{1/2})) e^{2 pi i d xi} d xi|``.

    This is ``|int K_a(x - y) conj(K_b(x' - y)) dy|`` with ``d = x - x'``.
    Substituting ``xi = s^2`` gives ``4 int cos(2 pi d s^2) m(a s) conj(m(b s)) s ds``.
    """
    lo, hi = piece.support
    s_lo, s_hi = max(lo / a, lo / b), min(hi / a, hi / b)
    if s_hi <= s_lo:
        return 0.0
    periods = (a + b) * (s_hi - s_lo) / (2 * np.pi) + abs(d) * (s_hi**2 - s_lo**2)
    s, w = _gauss(s_lo, s_hi, int(8 * periods) + 200)
    val = 4 * np.sum(np.cos(2 * np.pi * d * s**2) * piece(a * s) * np.conj(piece(b * s)) * s * w)
    return float(abs(val))


@dataclass
class TTStarScan:
    rows: list
    max_ratio: float
    regime: dict


def ttstar_domination_scan(j: int, samples: Sequence[tuple], n: int = 2) -> TTStarScan:
    """LHS and ``Phi_{j,a}(|x - x'|)`` (``C = 1``) for samples ``(a, b, x, x')``.

    ``regime`` maps ``(a / 2^j, b / a)`` to the largest ratio observed there.
    """
    piece = resolve_piece(("mj", j), n)
    rows, regime = [], {}
    for a, b, x, xp in samples:
        d = x - xp
        lhs = ttstar_lhs(piece, a, b, d)
        phi = float(EnvelopePhi(j, a)(d if d != 0 else 0.0))
        ratio = lhs / phi if phi > 0 else (0.0 if lhs == 0 else math.inf)
        rows.append({"j": j, "a": a, "b": b, "x_minus_xprime": d, "lhs": lhs, "phi": phi, "ratio": ratio})
        key = (a / 2**j, b / a)
        regime[key] = max(regime.get(key, 0.0), ratio)
    return TTStarScan(rows, max(r["ratio"] for r in rows) if rows else 0.0, regime)


def phi_l1_scan(j_range: Sequence[int], a_factors: Sequence[float]) -> list[dict]:
    """``||Phi_{j,a}||_1`` against ``2^{-j/2}`` for ``a = 2^j * factor``."""
    rows = []
    for j in j_range:
        for fac in a_factors:
            a = 2.0**j * fac
            l1 = EnvelopePhi(j, a).l1_norm()
            rows.append({"j": j, "a": a, "a_over_2j": fac, "l1": l1, "target": 2.0 ** (-j / 2),
                         "normalised": l1 * 2.0 ** (j / 2)})
    return rows


# --------------------------------------------------------- reduction check


@dataclass
class ReductionReport:
    max_discrepancy: float
    per_time: dict


def multiplier_side(fn: RadialProfile, t: float, r) -> np.ndarray:
    """``(1/(4|t|)) |int B_n(lam sqrt(xi)) g(xi) e^{2 pi i x xi} d xi|`` at ``x = 1/(8 pi t)``,
    ``lam = r/(2|t|)``, with ``g(xi) = f_n(sqrt(xi))`` interpolated from the profile."""
    r = np.atleast_1d(np.asarray(r, dtype=float))
    x = 1 / (8 * np.pi * t)
    lam = r / (2 * abs(t))
    xi_max = fn.grid.rmax**2
    periods = abs(x) * xi_max + float(lam.max()) * fn.grid.rmax / (2 * np.pi)
    xi, w = _gauss(0.0, xi_max, int(6 * periods) + 400)
    g = fn(np.sqrt(xi))
    core = g * np.exp(2j * np.pi * x * xi) * w
    return np.abs(bessel_b(fn.mode, np.outer(lam, np.sqrt(xi))) @ core) / (4 * abs(t))


def reduction_check(fn: RadialProfile, t_set: Sequence[float], r=None) -> ReductionReport:
    """Compare ``|e^{it Delta} f|`` from :func:`propagate_mode` with the multiplier side.

    The discrepancy at each ``t`` is ``max|A - B| / max|B|`` over the sampled radii.
    """
    if r is None:
        r = np.linspace(0.0, fn.grid.rmax, 65)[1:]
    per = {}
    for t in t_set:
        if t == 0:
            raise ValueError("t = 0 is excluded")
        A = np.abs(propagate_mode(fn, t, r))
        B = multiplier_side(fn, t, r)
        scale = np.max(B)
        per[t] = float(np.max(np.abs(A - B)) / scale) if scale > 0 else float(np.max(A))
    return ReductionReport(max(per.values()), per)


# --------------------------------------------------------- Sobolev in lambda


@dataclass
class SobolevReport:
    n: int
    ratios: list
    max_ratio: float


def bump(y):
    """``exp(-1/(1 - y^2))`` on ``|y| < 1``."""
    y = np.asarray(y, dtype=float)
    out = np.zeros_like(y)
    inside = np.abs(y) < 1
    out[inside] = np.exp(-1 / (1 - y[inside] ** 2))
    return out


def bump_family(n: int, shifts: Sequence[float] = (0.0, 0.5, -1.0)) -> list[Callable]:
    """``g(lam) = phi(n log lam - s)`` for a fixed bump ``phi``."""
    return [lambda lam, s=s: bump(n * np.log(lam) - s) for s in shifts]


def lambda_sobolev_check(n: int, test_family: Sequence[Callable] | None = None,
                         y_range: float = 8.0, tail_tol: float = 1e-12) -> SobolevReport:
    """``sup|g| / (int (n|g|^2 + |lam g'|^2 / n) dlam/lam)^{1/2}`` per family member.

    Integrals are taken in ``y = log lam`` on ``[-y_range, y_range]``; a member
    whose integrand has not decayed at the ends raises :class:`DivergenceError`.
    """
    family = bump_family(n) if test_family is None else test_family
    step = min(1e-3, 1 / (64 * max(n, 1)))
    y = np.arange(-y_range, y_range + step / 2, step)
    lam = np.exp(y)
    ratios = []
    for g in family:
        vals = np.asarray(g(lam), dtype=complex) * np.ones_like(lam)
        dvals = np.gradient(vals, y)
        dens = n * np.abs(vals) ** 2 + np.abs(dvals) ** 2 / n
        peak = dens.max()
        if peak > 0 and max(dens[0], dens[-1]) > tail_tol * peak:
            raise DivergenceError("test function does not decay in log(lambda); right-hand side is infinite")
        rhs = math.sqrt(float(np.sum(dens) * step))
        lhs = float(np.max(np.abs(vals)))
        ratios.append(0.0 if lhs == 0 and rhs == 0 else lhs / rhs)
    return SobolevReport(n, ratios, max(ratios) if ratios else 0.0)
