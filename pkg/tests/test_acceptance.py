"""Acceptance criteria, each at its stated tolerance.

Every test records one ``[PASS]``/``[FAIL]`` line, printed in the terminal
summary and to stdout.  Experiments run once with the CLI defaults.
"""

import time
from fractions import Fraction

import mpmath
import numpy as np

from strichartz_lab import cli
from strichartz_lab.bessel import bessel_b
from strichartz_lab.norms import INF, is_admissible, reciprocal, scaling_consistent
from strichartz_lab.propagator import CartesianField, propagate_cartesian, propagate_kernel, relative_l2

from conftest import ACCEPTANCE_LINES
from oracles import ENDPOINT_GAUSSIAN_T8_H1E4, divergence_lower_bound, gaussian_evolution

_cache: dict = {}


def summary(command):
    if command not in _cache:
        cfg = cli.load_config(command)
        start = time.perf_counter()
        out = cli.EXPERIMENTS[command](cfg.values, cfg.seed)
        _cache[command] = (out.summary, {t.name: t.rows for t in out.tables}, time.perf_counter() - start)
    return _cache[command]


def record(number, name, ok, detail, threshold):
    line = f"[{'PASS' if ok else 'FAIL'}] {number} {name}: {detail} (threshold: {threshold})"
    ACCEPTANCE_LINES.append(line)
    print(line)
    assert ok, line


def test_criterion_01_propagator_oracle():
    gauss = lambda X, Y: np.exp(-np.pi * (X**2 + Y**2))
    start = time.perf_counter()
    fm = CartesianField.from_function(gauss, 32.0, 256)
    fk = CartesianField.from_function(gauss, 16.0, 256)
    times = [-0.5, -0.25, 0.15, 0.25, 0.5]
    em = max(relative_l2(propagate_cartesian(fm, t).values, gaussian_evolution(*fm.mesh(), t)) for t in times)
    ek = max(relative_l2(propagate_kernel(fk, t).values, gaussian_evolution(*fk.mesh(), t)) for t in times)
    wall = time.perf_counter() - start
    record(1, "propagator oracle", em < 1e-6 and ek < 1e-4,
           f"multiplier {em:.3g}, kernel {ek:.3g}, {wall:.1f} s", "multiplier < 1e-6, kernel < 1e-4")


def test_criterion_02_three_way_agreement():
    s, tables, _ = summary("propagate-validate")
    ok = s["threeway_refined_max"] < 1e-3 and s["threeway_decreasing"]
    record(2, "three-way agreement", ok,
           f"coarse {s['threeway_coarse_max']:.3g}, refined {s['threeway_refined_max']:.3g}, "
           f"decreasing {s['threeway_decreasing']}", "< 1e-3, decreasing under refinement")


def test_criterion_03_unitarity_and_parseval():
    s, _, _ = summary("propagate-validate")
    ok = s["unitarity_max"] < 1e-6 and s["parseval"] < 1e-10
    record(3, "unitarity and Parseval", ok, f"drift {s['unitarity_max']:.3g}, Parseval {s['parseval']:.3g}",
           "drift < 1e-6, Parseval < 1e-10")


def test_criterion_04_endpoint_uniformity():
    s, tables, wall = summary("mode-scan")
    est = {r["n"]: r["estimate"] for r in tables["mode_scan"]}
    ok = -0.1 <= s["slope"] <= 0.1 and s["max_over_min"] < 4
    record(4, "endpoint uniformity in n", ok,
           f"slope {s['slope']:.3f}, max/min {s['max_over_min']:.2f}, "
           f"n=0 {est[0]:.3f}, n=64 {est[64]:.3f}, {wall:.1f} s", "slope in [-0.1, 0.1], max/min < 4")


def test_criterion_05_radial_endpoint():
    s, _, _ = summary("mode-scan")
    changes = s["radial_quotient_changes"]
    ok = len(changes) >= 2 and max(changes) < 0.05
    gap = abs(s["radial_quotient"] - ENDPOINT_GAUSSIAN_T8_H1E4) / ENDPOINT_GAUSSIAN_T8_H1E4
    record(5, "radial endpoint refinement", ok,
           f"changes {[f'{c:.2e}' for c in changes]}, value {s['radial_quotient']:.6f} "
           f"(closed form {ENDPOINT_GAUSSIAN_T8_H1E4:.6f}, rel gap {gap:.1e})", "successive changes < 5%")


def test_criterion_06_piece_decay():
    s, _, wall = summary("piece-decay")
    record(6, "piece decay", s["slope"] <= -0.15,
           f"slopes {{{', '.join(f'{n}: {v:.3f}' for n, v in s['slopes'].items())}}}, {wall:.1f} s",
           "slope <= -0.15 over j = 6..12")


def test_criterion_07_bessel_machinery():
    s, _, _ = summary("bessel-check")
    mpmath.mp.dps = 30
    x = np.linspace(-100.0, 100.0, 81)
    rel = 0.0
    for n in (0, 1, 2, 3, 7, 16, 64):
        ref = np.array([complex(1j**n * mpmath.besselj(n, v)) for v in x])
        rel = max(rel, float(np.max(np.abs(bessel_b(n, x) - ref))))
    ok = s["partition_residual"] < 1e-9 and rel < 1e-9 and s["m1_integral_max_over_min"] < 4
    record(7, "Bessel machinery", ok,
           f"partition {s['partition_residual']:.2e}, relation vs mpmath {rel:.2e}, "
           f"m1 max/min {s['m1_integral_max_over_min']:.3f}", "< 1e-9, < 1e-9, max/min < 4")


def test_criterion_08_christ_kiselev():
    s, tables, _ = summary("ck-certify")
    ok = s["levels_ok"] and s["covering_residual"] < 1e-12 and s["hilbert_min_ratio"] >= 0.9
    record(8, "Christ-Kiselev certification", ok,
           f"worst level/bound {s['worst_level_over_bound']:.3f}, covering {s['covering_residual']:.2e}, "
           f"Hilbert min ratio {s['hilbert_min_ratio']:.3f}", "levels <= bound (5%), covering < 1e-12, ratio >= 0.9")


def test_criterion_09_double_endpoint_failure():
    s, tables, wall = summary("counterexample")
    rows = tables["divergence"]
    above = all(r["rho"] >= divergence_lower_bound(r["epsilon"]) for r in rows)
    slope = s["slope_1e-6_1e-2"]
    record(9, "double-endpoint divergence", above and abs(slope - 1) <= 0.2,
           f"slope {slope:.3f}, rho above bound at all {len(rows)} eps: {above}, {wall:.1f} s",
           "rho >= bound, slope 1.0 +- 0.2")


def test_criterion_10_scaling_gate():
    values = [Fraction(1), Fraction(4, 3), Fraction(3, 2), Fraction(2), Fraction(5, 2), Fraction(3), Fraction(4),
              Fraction(6), Fraction(8), Fraction(12), INF]
    bad = 0
    for q in values:
        for r in values:
            iq = Fraction(0) if q == INF else 1 / q
            ir = Fraction(0) if r == INF else 1 / r
            admissible = q >= 2 and r >= 2 and iq + ir == Fraction(1, 2) and (iq, ir) != (Fraction(1, 2), 0)
            consistent = 1 + 2 == 2 * (1 - iq) + 2 * (1 - ir)
            bad += is_admissible(q, r, 2) != admissible
            bad += scaling_consistent(2, INF, q, r) != consistent
            bad += reciprocal(q) != iq
    _, gate = cli._gate_table()
    record(10, "scaling gate", bad == 0 and gate == 0, f"mismatches {bad} + gate {gate} over {len(values)**2} pairs",
           "exact")
