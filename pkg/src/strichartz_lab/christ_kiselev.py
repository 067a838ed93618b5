"""Restricting an integral operator to ``s < t`` through a dyadic split of the
cumulative input mass.

Functions of time are piecewise constant on the cells of a grid with
midpoints ``t_i`` and widths ``w_i``; an operator is its kernel matrix
``K[i, k] = K(t_i, s_k)`` and acts by ``(Tf)_i = sum_k K[i, k] f_k w_k``.
The retarded operator keeps ``k < i`` (the diagonal cell is excluded).

With ``F`` the normalised cumulative ``p``-mass of ``f``, cell ``i`` sits at
``u_i = F(t_i)``.  At level ``j`` the pairs are the left and right children
``(I, J)`` of each dyadic parent of length ``2^{1-j}``; for ``u_k < u_i``
exactly one pair has ``u_k in I`` and ``u_i in J``, unless both lie in the
same finest cell, which is reported as the unresolved diagonal.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .discretization import TimeGrid, make_radial_grid
from .norms import QuotientReport, dual_exponent, exponent, is_admissible
from .propagator import ResolutionError, SpectralModePropagator


class TreeMismatchError(ValueError):
    """A pair tree is used with a function other than the one it was built from."""


# ----------------------------------------------------------------- operators


@dataclass(frozen=True, eq=False)
class KernelOperator:
    """Kernel samples ``K(t_i, s_k)`` on a cell grid with widths ``w``."""

    kernel: np.ndarray
    nodes: np.ndarray
    weights: np.ndarray
    p: float = 2.0
    q: float = 4.0

    def __post_init__(self):
        K = np.asarray(self.kernel, dtype=complex)
        nodes = np.asarray(self.nodes, dtype=float)
        weights = np.asarray(self.weights, dtype=float)
        if K.shape != (nodes.size, nodes.size) or weights.shape != nodes.shape:
            raise ValueError("kernel must be square and match the cell grid")
        if np.any(np.diff(nodes) <= 0) or np.any(weights <= 0):
            raise ValueError("cells must be increasing with positive widths")
        object.__setattr__(self, "kernel", K)
        object.__setattr__(self, "nodes", nodes)
        object.__setattr__(self, "weights", weights)

    @classmethod
    def from_function(cls, func: Callable, nodes, weights, p=2.0, q=4.0) -> "KernelOperator":
        t = np.asarray(nodes, dtype=float)
        return cls(func(t[:, None], t[None, :]), t, weights, p, q)

    def apply(self, f) -> np.ndarray:
        return self.kernel @ (np.asarray(f) * self.weights)

    def lp_norm(self, f, p) -> float:
        return _lp(f, self.weights, p)

    def norm_2_2(self) -> float:
        s = np.sqrt(self.weights)
        return float(np.linalg.svd(s[:, None] * self.kernel * s[None, :], compute_uv=False)[0])

    def norm_2_inf(self) -> float:
        return float(np.sqrt(np.max(np.abs(self.kernel) ** 2 @ self.weights)))

    def certified_norm_2_4(self) -> float:
        """Riesz-Thorin upper bound ``sqrt(||T||_{2->2} ||T||_{2->inf})`` for ``||T||_{2->4}``."""
        return math.sqrt(self.norm_2_2() * self.norm_2_inf())

    def boyd_norm(self, p: float, q: float, iterations: int = 500, seed: int = 0) -> float:
        """Lower estimate of ``||T||_{p->q}`` by the nonlinear power method."""
        rng = np.random.default_rng(seed)
        f = rng.standard_normal(self.nodes.size)
        pd = p / (p - 1)
        best = 0.0
        for _ in range(iterations):
            f = f / _lp(f, self.weights, p)
            g = self.apply(f)
            best = max(best, _lp(g, self.weights, q))
            h = np.conj(self.kernel.T) @ (np.abs(g) ** (q - 2) * g * self.weights)
            f_new = np.abs(h) ** (pd - 1) * np.exp(1j * np.angle(h))
            if not np.any(f_new):
                break
            f = f_new
        return best


def _lp(f, w, p) -> float:
    a = np.abs(np.asarray(f))
    if p == math.inf:
        return float(a.max())
    return float(np.sum(a**p * w) ** (1 / p))


def apply_retarded_direct(op: KernelOperator, f) -> np.ndarray:
    """``sum_{k < i} K[i, k] f_k w_k``."""
    return np.tril(op.kernel, -1) @ (np.asarray(f) * op.weights)


# ----------------------------------------------------------------- the tree


@dataclass(frozen=True, eq=False)
class CumulativeMap:
    """``F`` at cell edges, normalised to ``[0, 1]``; linear inside cells."""

    edges: np.ndarray
    values: np.ndarray

    def __call__(self, t) -> np.ndarray:
        return np.interp(t, self.edges, self.values)

    def inverse(self, u, side: str = "left") -> np.ndarray:
        """``F^{-1}(u)``; on a flat stretch ``side`` picks its left or right end."""
        u = np.atleast_1d(np.asarray(u, dtype=float))
        if side == "left":
            idx = np.clip(np.searchsorted(self.values, u, side="left"), 1, self.values.size - 1)
        elif side == "right":
            idx = np.clip(np.searchsorted(self.values, u, side="right"), 1, self.values.size - 1)
        else:
            raise ValueError("side must be 'left' or 'right'")
        v0, v1 = self.values[idx - 1], self.values[idx]
        e0, e1 = self.edges[idx - 1], self.edges[idx]
        with np.errstate(invalid="ignore", divide="ignore"):
            frac = np.where(v1 > v0, (u - v0) / (v1 - v0), 1.0 if side == "right" else 0.0)
        return np.clip(e0 + frac * (e1 - e0), self.edges[0], self.edges[-1])

    def preimage(self, interval) -> tuple:
        """Time interval mapped onto ``[a, b]``, flat stretches at either end excluded."""
        lo = float(self.inverse(interval[0], "right")[0])
        hi = float(self.inverse(interval[1], "left")[0])
        return lo, hi


def cell_edges(nodes, weights) -> np.ndarray:
    nodes, weights = np.asarray(nodes), np.asarray(weights)
    return np.concatenate(([nodes[0] - weights[0] / 2], nodes + weights / 2))


def cumulative_map(f, nodes, weights, p) -> CumulativeMap:
    mass = np.abs(np.asarray(f)) ** p * np.asarray(weights)
    total = mass.sum()
    if total == 0:
        raise ValueError("cumulative map of the zero function is undefined")
    return CumulativeMap(cell_edges(nodes, weights), np.concatenate(([0.0], np.cumsum(mass) / total)))


@dataclass(frozen=True)
class DyadicPair:
    level: int
    I: tuple
    J: tuple
    preimage_I: tuple
    preimage_J: tuple
    cells_I: np.ndarray = field(compare=False)
    cells_J: np.ndarray = field(compare=False)


@dataclass(frozen=True, eq=False)
class DyadicPairTree:
    jmax: int
    p: float
    cmap: CumulativeMap
    positions: np.ndarray
    levels: dict
    signature: bytes

    def pairs(self, j: int) -> list[DyadicPair]:
        return self.levels[j]

    def index(self, j: int) -> np.ndarray:
        """Level-``j`` dyadic index of every cell (half-open, top interval closed)."""
        return np.minimum(np.floor(self.positions * 2**j).astype(int), 2**j - 1)

    def covering_pair(self, x: float, y: float):
        """The unique ``(level, pair)`` with ``x in I``, ``y in J`` for ``x < y``; ``None`` if unresolved."""
        for j in range(1, self.jmax + 1):
            a = min(int(math.floor(x * 2**j)), 2**j - 1)
            b = min(int(math.floor(y * 2**j)), 2**j - 1)
            if a != b:
                return (j, a // 2) if (a % 2 == 0 and b == a + 1) else None
        return None


def _signature(f, p) -> bytes:
    return np.asarray(f, dtype=complex).tobytes() + repr(float(p)).encode()


def build_pair_tree(f, nodes, weights, p: float, jmax: int) -> DyadicPairTree:
    """Sibling pairs of dyadic subintervals of ``[0, 1]`` for levels ``1..jmax``."""
    f = np.asarray(f)
    p = float(p)
    if not 1 < p < math.inf:
        raise ValueError("p must lie in (1, inf)")
    if not np.any(f):
        raise ValueError("pair tree of the zero function is undefined")
    if jmax < 1 or 2**jmax > f.size:
        raise ValueError(f"jmax={jmax} exceeds log2 of the grid size {f.size}")
    cmap = cumulative_map(f, nodes, weights, p)
    pos = cmap(np.asarray(nodes, dtype=float))
    levels = {}
    for j in range(1, jmax + 1):
        idx = np.minimum(np.floor(pos * 2**j).astype(int), 2**j - 1)
        pairs = []
        h = 2.0**-j
        for m in range(2 ** (j - 1)):
            I = (2 * m * h, (2 * m + 1) * h)
            J = ((2 * m + 1) * h, (2 * m + 2) * h)
            pairs.append(DyadicPair(j, I, J, cmap.preimage(I), cmap.preimage(J),
                                    np.flatnonzero(idx == 2 * m), np.flatnonzero(idx == 2 * m + 1)))
        levels[j] = pairs
    return DyadicPairTree(jmax, p, cmap, pos, levels, _signature(f, p))


def preimage_mass(tree: DyadicPairTree, f, nodes, weights, interval) -> float:
    """``||chi_{F^{-1}(I)} f||_p^p`` with partial cells at the ends."""
    edges = cell_edges(nodes, weights)
    lo, hi = tree.cmap.preimage(interval)
    overlap = np.clip(np.minimum(edges[1:], hi) - np.maximum(edges[:-1], lo), 0.0, None)
    mass = np.abs(np.asarray(f)) ** tree.p
    total = float(np.sum(mass * np.asarray(weights)))
    return float(np.sum(mass * overlap)) / total


# ------------------------------------------------------------ CK assembly


def _check_tree(tree: DyadicPairTree, f):
    if tree.signature != _signature(f, tree.p):
        raise TreeMismatchError("pair tree was built from a different function")


def level_mask(tree: DyadicPairTree, j: int) -> np.ndarray:
    """``M[i, k] = 1`` when input cell ``k`` is in some ``I`` and output cell ``i`` in its ``J``."""
    idx = tree.index(j)
    return (idx[:, None] == idx[None, :] + 1) & (idx[None, :] % 2 == 0)


def diagonal_mask(tree: DyadicPairTree) -> np.ndarray:
    """``k < i`` with both cells in the same finest dyadic interval."""
    idx = tree.index(tree.jmax)
    n = idx.size
    return (idx[:, None] == idx[None, :]) & np.tri(n, n, -1, dtype=bool)


def level_block(op: KernelOperator, f, tree: DyadicPairTree, j: int) -> np.ndarray:
    """``sum_{l(I) = 2^{-j}} chi_{F^{-1}(J)} T(chi_{F^{-1}(I)} f)``."""
    _check_tree(tree, f)
    return (op.kernel * level_mask(tree, j)) @ (np.asarray(f) * op.weights)


@dataclass
class CKResult:
    values: np.ndarray
    residual: np.ndarray
    per_level: dict


def apply_retarded_ck(op: KernelOperator, f, tree: DyadicPairTree) -> CKResult:
    """Sum of the level blocks ``j = 1..jmax``; ``residual`` is the unresolved diagonal part."""
    _check_tree(tree, f)
    fw = np.asarray(f) * op.weights
    per_level, total = {}, np.zeros(op.nodes.size, dtype=complex)
    for j in range(1, tree.jmax + 1):
        block = (op.kernel * level_mask(tree, j)) @ fw
        per_level[j] = block
        total = total + block
    residual = (op.kernel * diagonal_mask(tree)) @ fw
    return CKResult(total, residual, per_level)


@dataclass(frozen=True)
class LevelCheck:
    j: int
    pairs: int
    level_norm: float
    certified_bound: float

    @property
    def ok(self) -> bool:
        return self.level_norm <= self.certified_bound


def per_scale_norm_check(op: KernelOperator, f, tree: DyadicPairTree, j: int,
                         operator_norm: float | None = None, tolerance: float = 0.05) -> LevelCheck:
    """``||level_j f||_q`` against ``||T||_{p->q} 2^{-j(1/p - 1/q)} (1 + tolerance)``.

    ``operator_norm`` defaults to the certified Riesz-Thorin bound, which
    needs ``(p, q) = (2, 4)``.
    """
    p, q = float(op.p), float(op.q)
    if p >= q:
        raise ValueError("certification needs p < q")
    norm_f = op.lp_norm(f, p)
    if abs(norm_f - 1) > 1e-9:
        raise ValueError(f"normalise f so that ||f||_p = 1 (got {norm_f:.6g})")
    if operator_norm is None:
        if (p, q) != (2.0, 4.0):
            raise ValueError("supply operator_norm for (p, q) other than (2, 4)")
        operator_norm = op.certified_norm_2_4()
    measured = op.lp_norm(level_block(op, f, tree, j), q)
    bound = operator_norm * 2.0 ** (-j * (1 / p - 1 / q)) * (1 + tolerance)
    return LevelCheck(j, len(tree.pairs(j)), measured, bound)


def level_norms(op: KernelOperator, f, tree: DyadicPairTree, q: float) -> dict:
    return {j: op.lp_norm(level_block(op, f, tree, j), q) for j in range(1, tree.jmax + 1)}


def hilbert_kernel(t, s):
    """``1/(t - s)`` off the diagonal, 0 on it."""
    d = np.asarray(t, dtype=float) - np.asarray(s, dtype=float)
    with np.errstate(divide="ignore"):
        return np.where(d != 0, 1.0 / np.where(d != 0, d, 1.0), 0.0)


def uniform_cells(a: float, b: float, count: int):
    h = (b - a) / count
    return a + (np.arange(count) + 0.5) * h, np.full(count, h)


# ------------------------------------------------------- retarded pipeline


@dataclass(frozen=True)
class Forcing:
    """Single-mode forcing ``F(s, R) e^{i n theta}`` given by ``func(s, R)``."""

    mode: int
    func: Callable
    rmax: float
    radial_count: int = 96


def retarded_evolution(forcing: Forcing, tgrid: TimeGrid, radial_count: int, out_r,
                       freq_max: float, freq_count: int):
    """``u(t_i) = sum_{s_k < t_i} w_k e^{i(t_i - s_k) Delta} F(s_k)`` sampled at ``out_r``."""
    grid = make_radial_grid("graded", forcing.rmax, radial_count)
    prop = SpectralModePropagator(forcing.mode, grid, freq_max, freq_count)
    s = tgrid.nodes
    Fs = np.asarray(forcing.func(s[:, None], grid.nodes[None, :]), dtype=complex)
    spec = Fs @ prop.forward.T
    if np.any(spec):
        live = np.flatnonzero(np.abs(spec).max(axis=0) > 1e-13 * np.abs(spec).max())
        band = prop.freq.nodes[live[-1]]
        nodes = prop.freq.nodes[prop.freq.nodes <= band]
        gap = np.max(np.diff(np.concatenate(([0.0], nodes, [band]))))
        span = s[-1] - s[0]
        if gap * 8 * np.pi**2 * span * band > 2 * np.pi / 3:
            raise ResolutionError("frequency grid does not resolve the propagator over the time span")
    # e^{-4 pi^2 i (t - s) rho^2} = e^{-4 pi^2 i t rho^2} e^{4 pi^2 i s rho^2}
    pulled = np.conj(prop.phases(s)) * spec * tgrid.weights[:, None]
    acc = np.cumsum(pulled, axis=0) - pulled
    U = (prop.phases(s) * acc) @ prop.synthesis(out_r).T
    return U, Fs, grid


def _spatial_lr(Fs, grid, r) -> np.ndarray:
    a = np.abs(Fs)
    if r == math.inf:
        return a.max(axis=1)
    r = float(r)
    return (2 * np.pi * (a**r) @ grid.weights) ** (1 / r)


def retarded_strichartz_pipeline(forcing: Forcing, qt, rt, T: float = 0.5, time_count: int = 64,
                                 levels: int = 3, out_rmax: float | None = None, out_count: int = 64,
                                 freq_max: float = 4.0, freq_count: int | None = None) -> QuotientReport:
    """``||int_{s<t} e^{i(t-s)Delta} F(s) ds||_{L^2_t sup_r L^2_theta} / ||F||_{L^{qt'}_t L^{rt'}_x}``.

    Time cells are ``2 * time_count`` uniform cells on ``[-T, T]``, so 0 is
    never a node; each refinement level doubles the time, radial,
    frequency and output counts.  The default frequency count resolves the
    phase ``4 pi^2 (t - s) rho^2`` for ``|t - s| <= 2T`` up to ``freq_max``.
    """
    if not is_admissible(qt, rt, 2):
        raise ValueError(f"(qt, rt) = ({qt}, {rt}) is not admissible; "
                         "see counterexamples.endpoint_gate for the remaining cases")
    qd, rd = dual_exponent(qt), dual_exponent(rt)
    qd = math.inf if qd == math.inf else float(qd)
    rd = math.inf if rd == math.inf else float(rd)
    out_rmax = forcing.rmax if out_rmax is None else out_rmax
    if freq_count is None:
        freq_count = int(math.ceil(6.5 * math.pi**2 * freq_max**2 * 2 * T)) + 64
    history = []
    num = den = 0.0
    for k in range(levels):
        m = 2**k
        tg = TimeGrid(*uniform_cells(-T, T, 2 * time_count * m))
        out = make_radial_grid("uniform", out_rmax, out_count * m)
        U, Fs, grid = retarded_evolution(forcing, tg, forcing.radial_count * m, out.nodes,
                                         freq_max, freq_count * m)
        den = _lp(_spatial_lr(Fs, grid, rd), tg.weights, qd)
        if den == 0:
            raise ValueError("retarded quotient of the zero forcing is undefined")
        num = math.sqrt(float(np.sum(tg.weights * np.max(np.abs(U), axis=1) ** 2)))
        res = {"time": len(tg), "radial": forcing.radial_count * m, "freq": freq_count * m, "out": len(out)}
        history.append((res, num / den))
    grid = {"qt": str(exponent(qt)), "rt": str(exponent(rt)), "T": T, "numerator": num, "denominator": den}
    return QuotientReport(history[-1][1], f"forcing mode n={forcing.mode}", grid, history)
