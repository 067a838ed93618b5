"""Mixed space-time norms, exponent arithmetic and operator-norm estimates.

Exponents are exact: integers, :class:`fractions.Fraction`, decimal strings
such as ``"4/3"`` or ``math.inf``.  Reciprocals are computed with
``1/inf = 0`` so every predicate is decided in rational arithmetic.

Spatial norms act on single time slices of a :class:`SpacetimeTrace`:

* ``lebesgue(r)``: ``(int |u|^r dx)^{1/r}``, grid maximum for ``r = inf``;
* ``angular_avg(sup_r)``: ``sup_r ((1/2pi) int |u(r, theta)|^2 d theta)^{1/2}``;
* ``angular_avg(L1_r)``: ``int ((1/2pi) int |u|^2 d theta)^{1/2} 2 pi r dr``,
  the dual of the previous one.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Sequence

import numpy as np

from .discretization import (AngularGrid, PolarField, RadialGrid, RadialProfile, TimeGrid,
                             make_radial_grid, make_time_grid, mode_decompose)
from .propagator import ResolutionError, SpectralModePropagator, propagate_mode

INF = math.inf
SAMPLES_PER_PERIOD = 3.0


class ConvergenceError(RuntimeError):
    """Power iteration hit its iteration cap."""


# ----------------------------------------------------------------- exponents


def exponent(p):
    """Normalise an exponent to ``Fraction`` or ``math.inf``; must lie in ``[1, inf]``."""
    if isinstance(p, str):
        s = p.strip().lower()
        value = INF if s in ("inf", "infinity", "∞") else Fraction(s)
    elif isinstance(p, float) and math.isinf(p):
        value = INF
    elif isinstance(p, float):
        value = Fraction(p).limit_denominator(10**6)
    else:
        value = Fraction(p)
    if value != INF and value < 1:
        raise ValueError(f"exponent {p!r} is below 1")
    if value != INF and value < 0:
        raise ValueError(f"exponent {p!r} is negative")
    return value


def reciprocal(p) -> Fraction:
    p = exponent(p)
    return Fraction(0) if p == INF else 1 / p


def dual_exponent(p):
    inv = 1 - reciprocal(p)
    return INF if inv == 0 else 1 / inv


def is_admissible(q, r, n: int) -> bool:
    """``q, r >= 2``, not the forbidden ``(2, inf, 2)``, and ``1/q + n/(2r) = n/4``."""
    q, r = exponent(q), exponent(r)
    if q < 2 or r < 2:
        return False
    if (q, r, n) == (2, INF, 2):
        return False
    return reciprocal(q) + Fraction(n, 2) * reciprocal(r) == Fraction(n, 4)


def scaling_consistent(q, r, qt, rt) -> bool:
    """Dimensional balance of the planar retarded estimate.

    ``2/q + 2/r + 2 == 2/qt' + 2/rt'`` with primes denoting dual exponents.
    """
    lhs = 2 * reciprocal(q) + 2 * reciprocal(r) + 2
    rhs = 2 * (1 - reciprocal(qt)) + 2 * (1 - reciprocal(rt))
    return lhs == rhs


# ------------------------------------------------------------- norm objects


@dataclass(frozen=True)
class MixedNormSpec:
    time_exponent: object
    spatial: str = "angular_avg"
    r: object = None
    outer: str = "sup_r"

    def __post_init__(self):
        object.__setattr__(self, "time_exponent", exponent(self.time_exponent))
        if self.spatial == "lebesgue":
            if self.r is None:
                raise ValueError("lebesgue spatial norm needs r")
            object.__setattr__(self, "r", exponent(self.r))
        elif self.spatial == "angular_avg":
            if self.outer not in ("sup_r", "L1_r"):
                raise ValueError("angular_avg outer must be 'sup_r' or 'L1_r'")
        else:
            raise ValueError(f"unknown spatial norm {self.spatial!r}")

    @classmethod
    def lebesgue(cls, q, r) -> "MixedNormSpec":
        return cls(q, "lebesgue", r)

    @classmethod
    def angular(cls, q, outer: str = "sup_r") -> "MixedNormSpec":
        return cls(q, "angular_avg", None, outer)

    @property
    def is_sup(self) -> bool:
        return (self.spatial == "lebesgue" and self.r == INF) or (
            self.spatial == "angular_avg" and self.outer == "sup_r")

    def label(self) -> str:
        q = "inf" if self.time_exponent == INF else str(self.time_exponent)
        if self.spatial == "lebesgue":
            r = "inf" if self.r == INF else str(self.r)
            return f"L{q}_t L{r}_x"
        return f"L{q}_t {'Linf' if self.outer == 'sup_r' else 'L1'}_r L2_theta"


@dataclass(frozen=True, eq=False)
class SpacetimeTrace:
    """Samples ``u(t_k, r_i, theta_l)`` of shape ``(times, radii, angles)``."""

    values: np.ndarray
    tgrid: TimeGrid
    radial: RadialGrid
    angular: AngularGrid

    def __post_init__(self):
        v = np.asarray(self.values, dtype=complex)
        if v.shape != (len(self.tgrid), len(self.radial), self.angular.count):
            raise ValueError("trace shape does not match time x radial x angular grids")
        object.__setattr__(self, "values", v)

    @classmethod
    def from_modes(cls, modes: dict, tgrid: TimeGrid, radial: RadialGrid,
                   angular: AngularGrid | None = None) -> "SpacetimeTrace":
        """``modes[n]`` holds ``u_n(t_k, r_i)``; sums ``u_n e^{i n theta}``."""
        nmax = max(abs(n) for n in modes)
        angular = angular or AngularGrid.for_modes(nmax)
        th = angular.angles
        vals = np.zeros((len(tgrid), len(radial), angular.count), dtype=complex)
        for n, u in modes.items():
            vals += np.asarray(u)[:, :, None] * np.exp(1j * n * th)[None, None, :]
        return cls(vals, tgrid, radial, angular)

    @classmethod
    def separable(cls, a, field_: PolarField, tgrid: TimeGrid) -> "SpacetimeTrace":
        a = np.asarray(a, dtype=complex)
        return cls(a[:, None, None] * field_.values[None], tgrid, field_.radial, field_.angular)


def _lp(values, weights, p) -> float:
    if p == INF:
        return float(np.max(values)) if values.size else 0.0
    p = float(p)
    return float(np.sum(weights * values**p) ** (1 / p))


def spatial_norms(trace: SpacetimeTrace, spec: MixedNormSpec) -> np.ndarray:
    """Spatial norm of every time slice."""
    a = np.abs(trace.values)
    w = trace.radial.weights
    if spec.spatial == "angular_avg":
        avg = np.sqrt(np.mean(a**2, axis=2))
        if spec.outer == "sup_r":
            return avg.max(axis=1)
        return 2 * np.pi * avg @ w
    if spec.r == INF:
        return a.reshape(a.shape[0], -1).max(axis=1)
    r = float(spec.r)
    dth = 2 * np.pi / trace.angular.count
    return (np.sum(a**r * w[None, :, None], axis=(1, 2)) * dth) ** (1 / r)


def mixed_norm(trace: SpacetimeTrace, spec: MixedNormSpec) -> float:
    """``|| ||u(t)||_spatial ||_{L^q_t}`` with time quadrature from the trace's grid."""
    return _lp(spatial_norms(trace, spec), trace.tgrid.weights, spec.time_exponent)


@dataclass
class QuotientReport:
    value: float
    input_descriptor: str
    grid: dict
    refinement_history: list = field(default_factory=list)
    iterations: int = 0
    residual: float = 0.0

    def successive_changes(self) -> list[float]:
        v = [val for _, val in self.refinement_history]
        return [abs(b - a) / abs(b) for a, b in zip(v, v[1:])]


# ------------------------------------------------------ Strichartz quotient


def _band_limit(prop: SpectralModePropagator, values, rtol: float = 1e-13) -> float:
    F = np.abs(prop.transform(values))
    if not F.any():
        return 0.0
    live = np.flatnonzero(F > rtol * F.max())
    return float(prop.freq.nodes[live[-1]])


def _refined_time_grid(tgrid: TimeGrid, factor: int) -> TimeGrid:
    meta = tgrid.meta
    if factor == 1 or not {"kind", "T", "hole", "count"} <= set(meta):
        return tgrid
    return make_time_grid(meta["kind"], meta["T"], meta["hole"], meta["count"] * factor)


def _modes_of(f) -> list[RadialProfile]:
    if isinstance(f, RadialProfile):
        return [f]
    if isinstance(f, PolarField):
        nmax = (f.angular.count - 2) // 2
        return [p for p in mode_decompose(f, nmax) if np.any(p.values)]
    raise TypeError("input must be a RadialProfile or PolarField")


def evolve_trace(profiles: Sequence[RadialProfile], tgrid: TimeGrid, out: RadialGrid,
                 freq_max: float | None = None, freq_count: int | None = None,
                 angular: AngularGrid | None = None) -> SpacetimeTrace:
    """Space-time samples of ``e^{it Delta} sum f_n e^{i n theta}`` on ``tgrid x out``.

    Each time slice uses the Hankel-domain propagator when its frequency
    grid keeps three samples per period of ``4 pi^2 t rho^2`` over the live
    band, and the Bessel-kernel formula otherwise (large ``|t|``, where its
    chirp ``e^{i R^2/4t}`` is gentle).  A slice resolved by neither raises
    :class:`ResolutionError`.
    """
    modes = {}
    for p in profiles:
        prop = SpectralModePropagator(p.mode, p.grid, freq_max, freq_count)
        band = _band_limit(prop, p.values)
        nodes = prop.freq.nodes[prop.freq.nodes <= band]
        gap = float(np.max(np.diff(np.concatenate(([0.0], nodes, [band]))))) if band > 0 else 0.0
        spectral = gap * 8 * np.pi**2 * np.abs(tgrid.nodes) * band <= 2 * np.pi / SAMPLES_PER_PERIOD
        u = np.empty((len(tgrid), len(out)), dtype=complex)
        if spectral.any():
            u[spectral] = prop.evolve(p.values, tgrid.nodes[spectral], out.nodes)
        for k in np.flatnonzero(~spectral):
            u[k] = propagate_mode(p, float(tgrid.nodes[k]), out.nodes)
        modes[p.mode] = modes.get(p.mode, 0) + u
    return SpacetimeTrace.from_modes(modes, tgrid, out, angular)


def strichartz_quotient(f, spec: MixedNormSpec, tgrid: TimeGrid, levels: int = 3,
                        out_rmax: float | None = None, out_count: int | None = None,
                        freq_max: float | None = None, freq_count: int | None = None) -> QuotientReport:
    """``||e^{it Delta} f||_spec / ||f||_{L^2}`` with a refinement history.

    Outputs are sampled on ``[0, out_rmax]`` (default: the data radius), which
    suffices for sup-type norms of data that focus near the origin; finite
    spatial exponents need ``out_rmax`` covering the dispersed solution.
    Level ``k`` multiplies the input radial count, frequency count, time count
    and output count by ``2^k``; the input is re-sampled by interpolation.
    ``value`` is the finest level.
    """
    if levels < 3:
        raise ValueError("at least three refinement levels are required")
    profiles = _modes_of(f)
    if not profiles or all(p.norm() == 0 for p in profiles):
        raise ValueError("Strichartz quotient of the zero function is undefined")
    base = profiles[0].grid
    l2 = math.sqrt(2 * math.pi * sum(p.norm() ** 2 for p in profiles))
    if freq_max is None:
        freq_max = 1.25 * max(_band_limit(SpectralModePropagator(p.mode, base), p.values) for p in profiles)
    freq_count = freq_count or 4 * len(base)
    if out_rmax is None:
        out_rmax = base.rmax
    if out_count is None:
        out_count = int(math.ceil(out_rmax * 4 * freq_max))
    angular = f.angular if isinstance(f, PolarField) else None
    history = []
    for k in range(levels):
        m = 2**k
        if m == 1:
            prof = profiles
        else:
            g = make_radial_grid(base.kind, base.rmax, len(base) * m)
            prof = [RadialProfile(p.mode, p(g.nodes), g) for p in profiles]
        tg = _refined_time_grid(tgrid, m)
        out = make_radial_grid("uniform", out_rmax, out_count * m)
        trace = evolve_trace(prof, tg, out, freq_max, freq_count * m, angular)
        res = {"radial": len(prof[0].grid), "freq": freq_count * m, "time": len(tg), "out": len(out)}
        history.append((res, mixed_norm(trace, spec) / l2))
    desc = ",".join(f"n={p.mode}" for p in profiles) + f" rmax={base.rmax:g} |f|={l2:.6g}"
    grid = {"out_rmax": out_rmax, "freq_max": freq_max, **{k: v for k, v in tgrid.meta.items()}}
    return QuotientReport(history[-1][1], desc, grid, history)


# ---------------------------------------------------------- operator norms


@dataclass(frozen=True)
class OperatorGrids:
    """Discretisation of ``f_n -> e^{it Delta} f_n`` for operator-norm estimates."""

    rmax: float = 16.0
    radial_count: int = 192
    freq_max: float = 2.0
    freq_count: int = 256
    T: float = 1.0
    hole: float = 1e-3
    time_count: int = 120
    time_kind: str = "uniform"
    out_rmax: float = 16.0
    out_count: int = 160

    def time_grid(self) -> TimeGrid:
        return make_time_grid(self.time_kind, self.T, self.hole, self.time_count)

    def check(self, n: int) -> None:
        """Resolution preconditions for mode ``n``."""
        ppp = SAMPLES_PER_PERIOD
        if abs(n) > math.pi * self.freq_max * self.rmax:
            raise ResolutionError(f"mode {n} exceeds pi * freq_max * rmax = {math.pi * self.freq_max * self.rmax:.1f}")
        rg = make_radial_grid("graded", self.rmax, self.radial_count)
        fg = make_radial_grid("graded", self.freq_max, self.freq_count)
        gap_r = np.max(np.diff(np.concatenate(([0.0], rg.nodes, [self.rmax]))))
        if gap_r * 2 * np.pi * self.freq_max > 2 * np.pi / ppp:
            raise ResolutionError("radial grid does not resolve J_n(2 pi rho R) at freq_max")
        gap_f = np.max(np.diff(np.concatenate(([0.0], fg.nodes, [self.freq_max]))))
        if gap_f * 8 * np.pi**2 * self.T * self.freq_max > 2 * np.pi / ppp:
            raise ResolutionError("frequency grid does not resolve exp(-4 pi^2 i T rho^2)")
        if (self.out_rmax / self.out_count) * self.freq_max > 1 / ppp:
            raise ResolutionError("output radial grid too coarse for freq_max")
        # |u(t, r)| oscillates in t at up to 4 pi^2 freq_max^2; the per-time
        # sup lets coarse time sampling pick aliased peaks
        gap_t = np.max(np.diff(np.concatenate(([0.0], self.time_grid().nodes[self.time_count:]))))
        if gap_t * 4 * np.pi**2 * self.freq_max**2 > 2 * np.pi / ppp:
            raise ResolutionError("time grid does not resolve the frequency band")

    def resolution(self) -> dict:
        return {"radial_points": self.radial_count, "time_points": 2 * self.time_count,
                "freq_points": self.freq_count, "out_points": self.out_count}


class DiscreteEvolution:
    """The matrix of ``f_n -> u_n(t_k, r_m)`` in orthonormal coordinates.

    Input coordinates are ``x_j = sqrt(2 pi w_j) f_n(R_j)`` so the Euclidean
    norm of ``x`` is ``||f_n e^{i n theta}||_{L^2}``.  Outputs are raw samples
    ``u[k, m]``; :meth:`inner_out` is the discrete ``L^2_t L^2_x`` product.
    """

    def __init__(self, n: int, grids: OperatorGrids):
        self.n = int(n)
        self.grids = grids
        self.tgrid = grids.time_grid()
        self.radial = make_radial_grid("graded", grids.rmax, grids.radial_count)
        self.out = make_radial_grid("uniform", grids.out_rmax, grids.out_count)
        self.prop = SpectralModePropagator(n, self.radial, grids.freq_max, grids.freq_count)
        self.scale = np.sqrt(2 * np.pi * self.radial.weights)
        self.forward = self.prop.forward / self.scale[None, :]
        self.phases = self.prop.phases(self.tgrid.nodes)
        self.synth = self.prop.synthesis(self.out.nodes)
        self.out_weights = 2 * np.pi * np.outer(self.tgrid.weights, self.out.weights)

    def apply(self, x) -> np.ndarray:
        F = self.forward @ x
        return (self.phases * F[None, :]) @ self.synth.T

    def adjoint(self, U) -> np.ndarray:
        G = np.sum(np.conj(self.phases) * ((self.out_weights * U) @ np.conj(self.synth)), axis=0)
        return np.conj(self.forward).T @ G

    def inner_out(self, U, V) -> complex:
        return complex(np.sum(self.out_weights * U * np.conj(V)))

    def selected_matrix(self, sel) -> np.ndarray:
        """Rows ``sqrt(w_k) u[k, sel_k]`` as a dense matrix in ``x``."""
        rows = self.synth[sel] * self.phases
        return np.sqrt(self.tgrid.weights)[:, None] * (rows @ self.forward)

    def dense(self) -> np.ndarray:
        """Full matrix into the weighted ``L^2_t L^2_x`` output space."""
        blocks = (self.synth[None, :, :] * self.phases[:, None, :]) @ self.forward
        return (np.sqrt(self.out_weights)[:, :, None] * blocks).reshape(-1, blocks.shape[-1])


def _seed_vector(n: int, grids: OperatorGrids, seed: int) -> np.ndarray:
    rng = np.random.default_rng([seed, abs(n), grids.radial_count, grids.time_count])
    return rng.standard_normal(grids.radial_count) + 1j * rng.standard_normal(grids.radial_count)


def estimate_operator_norm(n: int, spec: MixedNormSpec, grids: OperatorGrids, seed: int = 0,
                           tol: float = 1e-6, max_iter: int = 2000, check: bool = True) -> QuotientReport:
    """Power iteration for ``sup ||e^{it Delta} f_n||_spec / ||f_n||``.

    Supported specs have ``q = 2`` and spatial part ``L^2``, ``L^inf`` or
    ``sup_r L^2_theta`` (the last two coincide on one mode).  For the sup
    norms each step freezes the maximising radius at every time, applies
    ``A^* A`` for that linear map, and re-selects; the Rayleigh quotient is
    non-decreasing.  Converged when successive quotients differ by less than
    ``tol`` (relative) and the geometric tail of the remaining steps is below
    ``tol`` as well.
    """
    if spec.time_exponent != 2:
        raise ValueError("operator-norm estimation supports q = 2 only")
    if not (spec.is_sup or (spec.spatial == "lebesgue" and spec.r == 2)):
        raise ValueError("operator-norm estimation supports spatial L^2, L^inf or sup_r L^2_theta")
    if check:
        grids.check(n)
    op = DiscreteEvolution(n, grids)
    x = _seed_vector(n, grids, seed)
    x /= np.linalg.norm(x)
    sw = np.sqrt(op.tgrid.weights)
    prev, step, rq, sel = None, None, 0.0, None
    for it in range(1, max_iter + 1):
        U = op.apply(x)
        if spec.is_sup:
            sel = np.argmax(np.abs(U), axis=1)
            y = sw * U[np.arange(U.shape[0]), sel]
            rq = float(np.vdot(y, y).real)
            # adjoint of the selected map: sum_k sqrt(w_k) y_k conj(row_k)
            g = np.conj(op.forward).T @ np.sum(
                np.conj(op.phases) * np.conj(op.synth[sel]) * (sw * y)[:, None], axis=0)
        else:
            rq = op.inner_out(U, U).real
            g = op.adjoint(U)
        norm_g = np.linalg.norm(g)
        if norm_g == 0:
            break
        x = g / norm_g
        if prev is not None:
            delta = abs(rq - prev)
            # geometric tail estimate guards against slow contraction
            ratio = min(delta / step, 0.999) if step else 0.0
            if delta <= tol * rq and delta * ratio / (1 - ratio) <= tol * rq:
                break
            step = delta
        prev = rq
    else:
        raise ConvergenceError(f"power iteration for mode {n} did not converge in {max_iter} steps")
    value = math.sqrt(rq)
    residual = abs(rq - prev) / rq if prev else 0.0
    grid = {**grids.resolution(), "seed": seed, "spec": spec.label()}
    if sel is not None:
        grid["selection"] = sel
    report = QuotientReport(value, f"mode n={n}", grid, [(grids.resolution(), value)], it, residual)
    report.grid["vector"] = x
    return report


def dense_operator_norm(n: int, spec: MixedNormSpec, grids: OperatorGrids, selection=None) -> float:
    """Largest singular value from a dense SVD.

    For ``L^2`` outputs this is the operator norm itself; for sup outputs it
    is the norm of the linear map with the radius at each time fixed by
    ``selection``.
    """
    op = DiscreteEvolution(n, grids)
    if spec.is_sup:
        if selection is None:
            raise ValueError("sup specs need the radius selection")
        A = op.selected_matrix(np.asarray(selection))
    else:
        A = op.dense()
    return float(np.linalg.svd(A, compute_uv=False)[0])


def mode_scan(modes: Sequence[int], spec: MixedNormSpec, grids: OperatorGrids, seed: int = 0) -> list[dict]:
    """Rows ``(n, radial_points, time_points, estimate, iterations, residual)``."""
    rows = []
    for n in modes:
        rep = estimate_operator_norm(n, spec, grids, seed)
        rows.append({"n": n, "radial_points": grids.radial_count, "time_points": 2 * grids.time_count,
                     "estimate": rep.value, "iterations": rep.iterations, "residual": rep.residual})
    return rows


def loglog_slope(modes: Sequence[int], values: Sequence[float]) -> float:
    """Least-squares slope of ``log(value)`` against ``log(1 + n)``."""
    return float(np.polyfit(np.log1p(np.asarray(modes, dtype=float)), np.log(values), 1)[0])
