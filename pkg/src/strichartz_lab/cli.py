"""Experiment runner.

Every scan is a subcommand that reads an optional INI file (one section per
subcommand, plus ``[run]`` for the output directory and seed), writes its
CSV tables and a JSON metadata sidecar, and exits with

    0  success
    2  configuration or input error
    3  precondition / resolution failure
    4  acceptance failure (``report`` only)

``STRICHARTZ_LAB_OUTPUT`` overrides the configured output directory;
``--output-dir`` overrides both.
"""

from __future__ import annotations

import argparse
import configparser
import csv
import json
import math
import os
import platform
import sys
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable

import numpy as np
import scipy

from . import __version__

OUTPUT_ENV = "STRICHARTZ_LAB_OUTPUT"

EXIT_OK, EXIT_CONFIG, EXIT_PRECONDITION, EXIT_ACCEPTANCE = 0, 2, 3, 4


class ConfigError(ValueError):
    pass


# ------------------------------------------------------------------ config


def _parse_ints(text: str) -> list[int]:
    text = text.strip()
    if ".." in text:
        a, b = text.split("..", 1)
        a, b = int(a), int(b)
        return list(range(a, b + 1))
    return [int(v) for v in text.replace(",", " ").split()]


def _parse_floats(text: str) -> list[float]:
    return [float(v) for v in text.replace(",", " ").split()]


def _parse_bool(text: str) -> bool:
    t = text.strip().lower()
    if t in ("1", "true", "yes", "on"):
        return True
    if t in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {text!r}")


def _parse_strs(text: str) -> list[str]:
    return [v for v in text.replace(",", " ").split()]


PARSERS = {"int": int, "float": float, "ints": _parse_ints, "floats": _parse_floats,
           "bool": _parse_bool, "str": str, "strs": _parse_strs}

LIST_TYPES = ("ints", "floats", "strs")

RUN_SCHEMA = {"output_dir": ("str", "artifacts"), "seed": ("int", 0)}

SCHEMAS: dict[str, dict[str, tuple]] = {
    "propagate-validate": {
        "modes": ("ints", "0, 1, 4, 9"),
        "times": ("floats", "0.25, -0.25"),
        "N": ("int", 256),
        "L": ("float", 16.0),
        "refine": ("float", 1.5),
        "radial_count": ("int", 400),
        "gaussian_times": ("floats", "0.15, 0.25, 0.5, -0.5"),
        "gaussian_N": ("int", 256),
        "multiplier_L": ("float", 32.0),
        "kernel_L": ("float", 16.0),
        "unitarity_times": ("floats", "0.15, 0.25, -0.25, 0.5"),
    },
    "mode-scan": {
        "modes": ("ints", "0, 1, 2, 4, 8, 16, 32, 64"),
        "rmax": ("float", 16.0),
        "radial_count": ("int", 192),
        "freq_max": ("float", 2.0),
        "freq_count": ("int", 256),
        "T": ("float", 1.0),
        "time_count": ("int", 120),
        "out_count": ("int", 160),
        "radial_quotient": ("bool", True),
        "quotient_T": ("float", 8.0),
        "quotient_hole": ("float", 1e-4),
        "quotient_time_count": ("int", 48),
        "quotient_radial_count": ("int", 120),
    },
    "maximal-scan": {
        "n": ("int", 8),
        "pieces": ("strs", "full, m1, mj:6, mj:9"),
        "N": ("int", 4096),
        "spacing": ("float", 1.0),
        "per_octave": ("int", 16),
        "levels": ("int", 2),
    },
    "piece-decay": {
        "modes": ("ints", "2, 4"),
        "j": ("ints", "6..12"),
        "trials": ("int", 32),
        "N": ("int", 4096),
        "spacing": ("float", 1.0),
        "per_octave": ("int", 16),
    },
    "ttstar-scan": {
        "j": ("int", 6),
        "n": ("int", 2),
        "a_factors": ("floats", "0.25, 1, 4"),
        "b_factors": ("floats", "1, 2"),
        "separations": ("floats", "0, 1, 8, 64, 512"),
        "phi_j": ("ints", "6..10"),
        "phi_a_factors": ("floats", "0.0625, 1, 8"),
    },
    "ck-certify": {
        "N": ("int", 512),
        "jmax": ("int", 8),
        "hilbert_N": ("int", 1024),
        "hilbert_jmax": ("int", 7),
        "tolerance": ("float", 0.05),
    },
    "counterexample": {
        "epsilons": ("floats", "1e-2, 1e-3, 1e-4, 1e-5, 1e-6"),
        "window_end": ("float", 1000.0),
        "band_cutoffs": ("floats", "8"),
        "band_epsilons": ("floats", "1e-1, 1e-2, 1e-3, 1e-4"),
        "bump_widths": ("floats", "0.1, 0.05, 0.025"),
        "bump_time": ("float", 0.7),
        "bump_epsilon": ("float", 0.05),
    },
    "bessel-check": {
        "partition_modes": ("ints", "0, 1, 4, 16, 64"),
        "jmax": ("int", 12),
        "relation_modes": ("ints", "0, 1, 2, 3, 7, 16"),
        "m1_modes": ("ints", "16, 32, 64, 128, 256"),
        "m0_modes": ("ints", "8, 16, 32, 64, 128"),
    },
}


def _locate(text: str | None, section: str, key: str | None) -> str:
    """``line N`` of ``key`` (or of the section header) in the raw config text."""
    if text is None:
        return "command line"
    current = None
    for i, raw in enumerate(text.splitlines(), 1):
        line = raw.strip()
        if line.startswith("[") and line.endswith("]"):
            current = line[1:-1].strip()
            if key is None and current == section:
                return f"line {i}"
        elif current == section and key is not None:
            name = line.split("=", 1)[0].split(":", 1)[0].strip()
            if name.lower() == key.lower():
                return f"line {i}"
    return "line ?"


@dataclass
class ExperimentConfig:
    command: str
    values: dict
    output_dir: Path
    seed: int
    source: str | None = None
    overridden: dict = field(default_factory=dict)

    def echo(self) -> dict:
        return {"command": self.command, "seed": self.seed, "output_dir": str(self.output_dir),
                "parameters": self.values, "source": self.source, "overridden": self.overridden}


def _typed(section: str, key: str, kind: str, raw, text: str | None):
    if not isinstance(raw, str):
        return raw
    try:
        val = PARSERS[kind](raw)
    except ValueError as exc:
        raise ConfigError(f"{_locate(text, section, key)}: [{section}] {key}: expected {kind} ({exc})") from None
    if kind in LIST_TYPES and not val:
        raise ConfigError(f"{_locate(text, section, key)}: [{section}] {key}: empty range")
    return val


def load_config(command: str, path: str | None = None, output_dir: str | None = None) -> ExperimentConfig:
    """Defaults for ``command`` overlaid with ``[run]`` and ``[command]`` of the INI file."""
    schema = SCHEMAS[command]
    text = None
    parser = configparser.ConfigParser(interpolation=None)
    parser.optionxform = str
    if path is not None:
        try:
            text = Path(path).read_text()
        except OSError as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from None
        try:
            parser.read_string(text, source=str(path))
        except configparser.Error as exc:
            raise ConfigError(f"{path}: {exc}") from None
        known = {"run", *SCHEMAS}
        for sec in parser.sections():
            if sec not in known:
                raise ConfigError(f"{_locate(text, sec, None)}: unknown section [{sec}]")
    overridden = {}
    run = {}
    for key, (kind, default) in RUN_SCHEMA.items():
        raw = parser.get("run", key, fallback=default) if parser.has_section("run") else default
        run[key] = _typed("run", key, kind, raw, text)
    if parser.has_section("run"):
        for key in parser["run"]:
            if key not in RUN_SCHEMA:
                raise ConfigError(f"{_locate(text, 'run', key)}: [run] unknown key {key!r}")
    values = {}
    section = parser[command] if parser.has_section(command) else {}
    for key in section:
        if key not in schema:
            raise ConfigError(f"{_locate(text, command, key)}: [{command}] unknown key {key!r}")
    for key, (kind, default) in schema.items():
        raw = section[key] if key in section else default
        if key in section:
            overridden[key] = section[key]
        values[key] = _typed(command, key, kind, raw if isinstance(raw, str) else raw, text)
    out = run["output_dir"]
    if os.environ.get(OUTPUT_ENV):
        out = os.environ[OUTPUT_ENV]
        overridden["output_dir"] = f"${OUTPUT_ENV}"
    if output_dir is not None:
        out = output_dir
        overridden["output_dir"] = "--output-dir"
    return ExperimentConfig(command, values, Path(out), run["seed"], path, overridden)


# ------------------------------------------------------------------ output


def _cell(v) -> str:
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    return str(v)


def write_csv(path: Path, columns: list[str], rows: list[dict]) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(columns)
        for row in rows:
            w.writerow([_cell(row[c]) for c in columns])


def _jsonable(v):
    if isinstance(v, dict):
        return {str(k): _jsonable(x) for k, x in v.items()}
    if isinstance(v, (list, tuple)):
        return [_jsonable(x) for x in v]
    if isinstance(v, (np.floating, float)):
        f = float(v)
        return f if math.isfinite(f) else repr(f)
    if isinstance(v, (np.integer,)):
        return int(v)
    if isinstance(v, (np.bool_,)):
        return bool(v)
    if isinstance(v, Path):
        return str(v)
    return v


@dataclass
class Table:
    name: str
    columns: list[str]
    rows: list[dict]
    key: tuple = ()

    def sorted_rows(self) -> list[dict]:
        if not self.key:
            return self.rows
        return sorted(self.rows, key=lambda r: tuple(r[k] for k in self.key))


@dataclass
class Outcome:
    tables: list[Table]
    summary: dict


def _versions() -> dict:
    return {"python": platform.python_version(), "numpy": np.__version__, "scipy": scipy.__version__,
            "strichartz_lab": __version__}


def write_artifacts(cfg: ExperimentConfig, outcome: Outcome, wall: float) -> Path:
    cfg.output_dir.mkdir(parents=True, exist_ok=True)
    files = {}
    for t in outcome.tables:
        write_csv(cfg.output_dir / f"{t.name}.csv", t.columns, t.sorted_rows())
        files[f"{t.name}.csv"] = t.columns
    meta = {"config": cfg.echo(), "versions": _versions(), "seed": cfg.seed, "wall_time_s": wall,
            "files": files, "summary": outcome.summary}
    stem = cfg.command.replace("-", "_")
    path = cfg.output_dir / f"{stem}.json"
    path.write_text(json.dumps(_jsonable(meta), indent=2, sort_keys=True) + "\n")
    return path


# ------------------------------------------------------------- experiments


def run_propagate_validate(p: dict, seed: int) -> Outcome:
    from .discretization import AngularGrid, PolarField, RadialProfile, make_radial_grid, mode_decompose, mode_stack_norm
    from .propagator import (CartesianField, SpectralModePropagator, gaussian_solution, mode_test_profile,
                             propagate_cartesian, propagate_kernel, relative_l2, three_way_agreement)

    rows = []
    for n in p["modes"]:
        for t in p["times"]:
            for level, (N, L) in enumerate([(p["N"], p["L"]),
                                            (int(round(p["N"] * p["refine"])), p["L"] * p["refine"])]):
                rep = three_way_agreement(n, t, N, L, p["radial_count"])
                rows.append({"n": n, "t": t, "level": level, "N": N, "L": L,
                             "cartesian_vs_kernel": rep.cartesian_vs_kernel,
                             "cartesian_vs_mode": rep.cartesian_vs_mode,
                             "kernel_vs_mode": rep.kernel_vs_mode, "worst": rep.worst})
    coarse = {(r["n"], r["t"]): r["worst"] for r in rows if r["level"] == 0}
    fine = {(r["n"], r["t"]): r["worst"] for r in rows if r["level"] == 1}

    gauss = lambda X, Y: np.exp(-np.pi * (X**2 + Y**2))
    grows = []
    for path, L in (("multiplier", p["multiplier_L"]), ("kernel", p["kernel_L"])):
        f = CartesianField.from_function(gauss, L, p["gaussian_N"])
        X, Y = f.mesh()
        for t in p["gaussian_times"]:
            u = propagate_cartesian(f, t) if path == "multiplier" else propagate_kernel(f, t)
            grows.append({"path": path, "t": t, "N": p["gaussian_N"], "L": L,
                          "relative_l2": relative_l2(u.values, gaussian_solution(X, Y, t))})

    urows = []
    f = CartesianField.from_function(gauss, p["multiplier_L"], p["gaussian_N"])
    fk = CartesianField.from_function(gauss, p["kernel_L"], p["gaussian_N"])
    for t in p["unitarity_times"]:
        urows.append({"path": "multiplier", "n": 0, "t": t,
                      "norm_drift": abs(propagate_cartesian(f, t).norm() / f.norm() - 1)})
        if abs(t) <= 0.25:
            # the window must hold the solution's mass for the kernel path to conserve it
            urows.append({"path": "kernel", "n": 0, "t": t,
                          "norm_drift": abs(propagate_kernel(fk, t).norm() / fk.norm() - 1)})
    rg = make_radial_grid("graded", 6.0, 300)
    out = make_radial_grid("graded", 30.0, 1500)
    for n in p["modes"]:
        fn = RadialProfile.from_function(n, rg, mode_test_profile(n))
        sp = SpectralModePropagator(n, rg, freq_max=4.0, freq_count=600)
        u = sp.evolve(fn.values, p["unitarity_times"], out.nodes)
        for t, ut in zip(p["unitarity_times"], u):
            urows.append({"path": "mode", "n": n, "t": t,
                          "norm_drift": abs(math.sqrt(out.integrate(np.abs(ut) ** 2)) / fn.norm() - 1)})
    nmax = max(abs(n) for n in p["modes"])
    ang = AngularGrid.for_modes(nmax)
    field_ = PolarField.from_function(make_radial_grid("graded", 6.0, 200), ang, lambda R, T: sum(
        mode_test_profile(n)(R) * np.exp(1j * n * T) for n in p["modes"]))
    parseval = abs(mode_stack_norm(mode_decompose(field_, nmax)) / field_.norm() - 1)

    summary = {
        "threeway_coarse_max": max(coarse.values()),
        "threeway_refined_max": max(fine.values()),
        "threeway_decreasing": all(fine[k] < coarse[k] for k in coarse),
        "gaussian_multiplier_max": max(r["relative_l2"] for r in grows if r["path"] == "multiplier"),
        "gaussian_kernel_max": max(r["relative_l2"] for r in grows if r["path"] == "kernel"),
        "unitarity_max": max(r["norm_drift"] for r in urows),
        "parseval": parseval,
    }
    return Outcome([
        Table("propagate_validate", ["n", "t", "level", "N", "L", "cartesian_vs_kernel", "cartesian_vs_mode",
                                     "kernel_vs_mode", "worst"], rows, ("n", "t", "level")),
        Table("gaussian_oracle", ["path", "t", "N", "L", "relative_l2"], grows, ("path", "t")),
        Table("unitarity", ["path", "n", "t", "norm_drift"], urows, ("path", "n", "t")),
    ], summary)


def run_mode_scan(p: dict, seed: int) -> Outcome:
    from .discretization import RadialProfile, make_radial_grid, make_time_grid
    from .norms import MixedNormSpec, OperatorGrids, loglog_slope, mode_scan, strichartz_quotient

    grids = OperatorGrids(rmax=p["rmax"], radial_count=p["radial_count"], freq_max=p["freq_max"],
                          freq_count=p["freq_count"], T=p["T"], time_count=p["time_count"],
                          out_rmax=p["rmax"], out_count=p["out_count"])
    modes = sorted(set(p["modes"]))
    rows = mode_scan(modes, MixedNormSpec.angular(2), grids, seed)
    est = [r["estimate"] for r in rows]
    summary = {"slope": loglog_slope(modes, est), "max_over_min": max(est) / min(est),
               "norm": "L2_t Linf_r L2_theta"}
    tables = [Table("mode_scan", ["n", "radial_points", "time_points", "estimate", "iterations", "residual"],
                    rows, ("n",))]
    if p["radial_quotient"]:
        tg = make_time_grid("log", p["quotient_T"], p["quotient_hole"], p["quotient_time_count"])
        g = make_radial_grid("graded", 4.5, p["quotient_radial_count"])
        f = RadialProfile.from_function(0, g, lambda R: np.exp(-np.pi * R**2))
        rep = strichartz_quotient(f, MixedNormSpec.angular(2), tg)
        T, h = p["quotient_T"], p["quotient_hole"]
        exact = math.sqrt((math.atan(4 * math.pi * T) - math.atan(4 * math.pi * h)) / math.pi)
        qrows = [{"level": k, "radial": res["radial"], "time": res["time"], "quotient": v, "closed_form": exact}
                 for k, (res, v) in enumerate(rep.refinement_history)]
        tables.append(Table("radial_quotient", ["level", "radial", "time", "quotient", "closed_form"], qrows,
                            ("level",)))
        summary["radial_quotient"] = rep.value
        summary["radial_quotient_changes"] = rep.successive_changes()
        summary["radial_quotient_closed_form"] = exact
    return Outcome(tables, summary)


def _piece_key(text: str):
    if text.startswith("mj:"):
        return ("mj", int(text[3:]))
    return text


def run_maximal_scan(p: dict, seed: int) -> Outcome:
    from .multiplier_lab import default_lambda_grid, maximal_T, random_signal

    G = random_signal(p["N"], p["spacing"], seed)
    rows = []
    for name in p["pieces"]:
        piece = _piece_key(name)
        grid = default_lambda_grid(piece, p["n"], G, p["per_octave"])
        res = maximal_T(piece, p["n"], G, grid, p["levels"])
        for per_octave, ratio in res.history:
            rows.append({"n": p["n"], "piece": name, "per_octave": per_octave, "ratio": ratio})
    final = {}
    for r in rows:
        final[r["piece"]] = r["ratio"]
    return Outcome([Table("maximal_scan", ["n", "piece", "per_octave", "ratio"], rows, ("piece", "per_octave"))],
                   {"final_ratio": final})


def run_piece_decay(p: dict, seed: int) -> Outcome:
    from .multiplier_lab import piece_decay_scan

    rows, slopes, worst = [], {}, []
    for n in p["modes"]:
        scan = piece_decay_scan(n, p["j"], p["trials"], p["N"], p["spacing"], p["per_octave"], seed)
        rows += scan.rows
        slopes[n] = scan.slope
        worst += [{"n": n, "j": j, "worst_ratio": v} for j, v in scan.per_j.items()]
    return Outcome([
        Table("decay_scan", ["n", "j", "trial_seed", "ratio"], rows, ("n", "j", "trial_seed")),
        Table("decay_scan_worst", ["n", "j", "worst_ratio"], worst, ("n", "j")),
    ], {"slopes": slopes, "slope": max(slopes.values())})


def run_ttstar_scan(p: dict, seed: int) -> Outcome:
    from .multiplier_lab import phi_l1_scan, ttstar_domination_scan

    j = p["j"]
    samples = [(2.0**j * fa, 2.0**j * fa * fb, d, 0.0)
               for fa in p["a_factors"] for fb in p["b_factors"] for d in p["separations"]]
    scan = ttstar_domination_scan(j, samples, p["n"])
    phi = phi_l1_scan(p["phi_j"], p["phi_a_factors"])
    return Outcome([
        Table("ttstar_scan", ["j", "a", "b", "x_minus_xprime", "lhs", "phi", "ratio"], scan.rows,
              ("a", "b", "x_minus_xprime")),
        Table("phi_l1", ["j", "a", "a_over_2j", "l1", "target", "normalised"], phi, ("j", "a")),
    ], {"max_ratio": scan.max_ratio, "phi_normalised_min": min(r["normalised"] for r in phi),
        "phi_normalised_max": max(r["normalised"] for r in phi)})


def run_ck_certify(p: dict, seed: int) -> Outcome:
    from .christ_kiselev import (KernelOperator, apply_retarded_ck, apply_retarded_direct, build_pair_tree,
                                 hilbert_kernel, level_norms, per_scale_norm_check, uniform_cells)

    nodes, weights = uniform_cells(0.0, 1.0, p["N"])
    op = KernelOperator.from_function(lambda t, s: np.exp(-(t - s) ** 2) * np.cos(3 * (t + s)), nodes, weights)
    f = 1 + 0.5 * np.sin(7 * nodes)
    f = f / op.lp_norm(f, 2)
    tree = build_pair_tree(f, nodes, weights, 2, p["jmax"])
    norm = op.certified_norm_2_4()
    rows = []
    for j in range(1, p["jmax"] + 1):
        chk = per_scale_norm_check(op, f, tree, j, norm, p["tolerance"])
        rows.append({"j": j, "pairs": chk.pairs, "level_norm": chk.level_norm,
                     "certified_bound": chk.certified_bound, "ok": chk.ok})
    ck = apply_retarded_ck(op, f, tree)
    direct = apply_retarded_direct(op, f)
    covering = float(np.max(np.abs(ck.values + ck.residual - direct)) / np.max(np.abs(direct)))

    hn, hw = uniform_cells(0.0, 1.0, p["hilbert_N"])
    hop = KernelOperator.from_function(hilbert_kernel, hn, hw, p=2, q=2)
    hf = np.ones(p["hilbert_N"]) / hop.lp_norm(np.ones(p["hilbert_N"]), 2)
    htree = build_pair_tree(hf, hn, hw, 2, p["hilbert_jmax"])
    hl = level_norms(hop, hf, htree, 2)
    hrows = [{"j": j, "pairs": len(htree.pairs(j)), "level_norm": v} for j, v in hl.items()]
    js = sorted(hl)
    ratios = [hl[b] / hl[a] for a, b in zip(js, js[1:])]
    summary = {"certified_norm": norm, "boyd_lower_bound": op.boyd_norm(2, 4, seed=seed),
               "levels_ok": all(r["ok"] for r in rows),
               "worst_level_over_bound": max(r["level_norm"] / r["certified_bound"] for r in rows),
               "covering_residual": covering, "hilbert_min_ratio": min(ratios)}
    return Outcome([
        Table("ck_levels", ["j", "pairs", "level_norm", "certified_bound", "ok"], rows, ("j",)),
        Table("hilbert_levels", ["j", "pairs", "level_norm"], hrows, ("j",)),
    ], summary)


def _gate_table() -> tuple[list[dict], int]:
    from fractions import Fraction

    from .counterexamples import endpoint_gate
    from .norms import INF, is_admissible, reciprocal, scaling_consistent

    values = [Fraction(1), Fraction(4, 3), Fraction(3, 2), Fraction(2), Fraction(3), Fraction(4),
              Fraction(6), Fraction(8), INF]
    rows, mismatches = [], 0
    for qt in values:
        for rt in values:
            rec = endpoint_gate(qt, rt)
            iq, ir = reciprocal(qt), reciprocal(rt)
            consistent = iq + ir == Fraction(1, 2)
            expected = ("scaling-inconsistent" if not consistent else
                        "double-endpoint" if (iq, ir) == (Fraction(1, 2), 0) else "admissible")
            admissible = consistent and iq <= Fraction(1, 2) and ir <= Fraction(1, 2) and (iq, ir) != (Fraction(1, 2), 0)
            ok = (rec.outcome == expected and scaling_consistent(2, INF, qt, rt) == consistent
                  and is_admissible(qt, rt, 2) == admissible)
            mismatches += not ok
            rows.append({"qt": str(qt) if qt != INF else "inf", "rt": str(rt) if rt != INF else "inf",
                         "one_over_qt": str(iq), "one_over_rt": str(ir), "outcome": rec.outcome,
                         "expected": expected, "ok": ok})
    return rows, mismatches


def run_counterexample(p: dict, seed: int) -> Outcome:
    from .counterexamples import (TimeSignal, band_limited_indicator, divergence_scan, narrow_bump_trace,
                                  origin_trace, rho_sampled)

    scan = divergence_scan(p["epsilons"], (0.0, p["window_end"]))
    rows = scan.rows
    fit = [r for r in rows if 1e-6 * (1 - 1e-12) <= r["epsilon"] <= 1e-2 * (1 + 1e-12)]
    slope_acc = (float(np.polyfit(np.log(1 / np.array([r["epsilon"] for r in fit])),
                                  [r["rho"] for r in fit], 1)[0]) if len(fit) >= 2 else float("nan"))
    brows = []
    tg = np.linspace(-4.0, 12.0, 3001)
    for cutoff in p["band_cutoffs"]:
        g = band_limited_indicator(cutoff)
        for e in p["band_epsilons"]:
            brows.append({"cutoff": cutoff, "epsilon": e, "rho": rho_sampled(g, e, tg)})
    g = TimeSignal.indicator()
    exact = complex(origin_trace(g, p["bump_time"], p["bump_epsilon"])[0])
    bump_rows = []
    for w in p["bump_widths"]:
        v = narrow_bump_trace(g, p["bump_time"], p["bump_epsilon"], w)
        bump_rows.append({"width": w, "re": v.real, "im": v.imag, "relative_error": abs(v - exact) / abs(exact)})
    gate_rows, mismatches = _gate_table()
    by_w = sorted(bump_rows, key=lambda r: -r["width"])
    summary = {"slope": scan.slope, "intercept": scan.intercept, "slope_1e-6_1e-2": slope_acc,
               "above_lower_bound": all(r["rho"] >= r["analytic_lower_bound"] for r in rows),
               "monotone": all(b["rho"] > a["rho"] for a, b in zip(rows, rows[1:])),
               "bump_error_decreasing": all(b["relative_error"] < a["relative_error"] for a, b in zip(by_w, by_w[1:])),
               "gate_mismatches": mismatches}
    return Outcome([
        Table("divergence", ["epsilon", "rho", "analytic_lower_bound"], rows, ()),
        Table("divergence_band_limited", ["cutoff", "epsilon", "rho"], brows, ("cutoff", "epsilon")),
        Table("narrow_bump", ["width", "re", "im", "relative_error"], bump_rows, ("width",)),
        Table("endpoint_gate", ["qt", "rt", "one_over_qt", "one_over_rt", "outcome", "expected", "ok"], gate_rows, ()),
    ], summary)


def run_bessel_check(p: dict, seed: int) -> Outcome:
    from .bessel import BesselPartition, bessel_b, bessel_eval, m0_decay_check, m1_envelope_check

    rows = []
    r = np.linspace(0.0, 2.0 ** p["jmax"], 20001)
    for n in p["partition_modes"]:
        part = BesselPartition(n, p["jmax"])
        unity = sum(piece.cutoff(r) for piece in part.pieces())
        recon = part.partition_sum(r) - bessel_b(n, r)
        rows.append({"n": n, "j": p["jmax"], "constant_name": "partition_residual",
                     "value": float(np.max(np.abs(unity - 1)))})
        rows.append({"n": n, "j": p["jmax"], "constant_name": "reconstruction_residual",
                     "value": float(np.max(np.abs(recon)))})
    x = np.linspace(-60.0, 60.0, 241)
    for n in p["relation_modes"]:
        # angular-integral quadrature against i^n J_n
        rows.append({"n": n, "j": "", "constant_name": "relation_error",
                     "value": float(np.max(np.abs(bessel_eval(n, x) - bessel_b(n, x))))})
    ints = []
    for n in p["m1_modes"]:
        env = m1_envelope_check(n)
        ints.append(env.integral)
        for name in ("integral", "c_value", "c_deriv"):
            rows.append({"n": n, "j": "", "constant_name": f"m1_{name}", "value": getattr(env, name)})
    for n in p["m0_modes"]:
        rows.append({"n": n, "j": "", "constant_name": "m0_decay_k0_N2", "value": m0_decay_check(n, 0, 2)})
    pick = lambda name: [r_["value"] for r_ in rows if r_["constant_name"] == name]
    summary = {"partition_residual": max(pick("partition_residual")),
               "reconstruction_residual": max(pick("reconstruction_residual")),
               "relation_error": max(pick("relation_error")),
               "m1_integral_max_over_min": max(ints) / min(ints),
               "m0_decay_max": max(pick("m0_decay_k0_N2"))}
    return Outcome([Table("bessel_scan", ["n", "j", "constant_name", "value"], rows, ("constant_name", "n"))],
                   summary)


EXPERIMENTS: dict[str, Callable[[dict, int], Outcome]] = {
    "propagate-validate": run_propagate_validate,
    "mode-scan": run_mode_scan,
    "maximal-scan": run_maximal_scan,
    "piece-decay": run_piece_decay,
    "ttstar-scan": run_ttstar_scan,
    "ck-certify": run_ck_certify,
    "counterexample": run_counterexample,
    "bessel-check": run_bessel_check,
}


# ------------------------------------------------------------------ report


@dataclass(frozen=True)
class Criterion:
    number: int
    name: str
    source: str
    threshold: str
    judge: Callable[[dict], tuple[bool, str]]


def _fmt(v) -> str:
    return f"{v:.3g}" if isinstance(v, float) else str(v)


CRITERIA = [
    Criterion(1, "propagator oracle", "propagate-validate", "multiplier < 1e-6, kernel < 1e-4",
              lambda s: (s["gaussian_multiplier_max"] < 1e-6 and s["gaussian_kernel_max"] < 1e-4,
                         f"{_fmt(s['gaussian_multiplier_max'])}, {_fmt(s['gaussian_kernel_max'])}")),
    Criterion(2, "three-way agreement", "propagate-validate", "refined < 1e-3 and decreasing",
              lambda s: (s["threeway_refined_max"] < 1e-3 and bool(s["threeway_decreasing"]),
                         f"{_fmt(s['threeway_refined_max'])}, decreasing={s['threeway_decreasing']}")),
    Criterion(3, "unitarity and Parseval", "propagate-validate", "drift < 1e-6, Parseval < 1e-10",
              lambda s: (s["unitarity_max"] < 1e-6 and s["parseval"] < 1e-10,
                         f"{_fmt(s['unitarity_max'])}, {_fmt(s['parseval'])}")),
    Criterion(4, "mode uniformity", "mode-scan", "slope in [-0.1, 0.1], max/min < 4",
              lambda s: (-0.1 <= s["slope"] <= 0.1 and s["max_over_min"] < 4,
                         f"slope {_fmt(s['slope'])}, max/min {_fmt(s['max_over_min'])}")),
    Criterion(5, "radial endpoint refinement", "mode-scan", "successive changes < 5%",
              lambda s: (bool(s.get("radial_quotient_changes")) and max(s["radial_quotient_changes"]) < 0.05,
                         f"changes {[_fmt(c) for c in s.get('radial_quotient_changes', [])]}")),
    Criterion(6, "piece decay", "piece-decay", "slope <= -0.15",
              lambda s: (s["slope"] <= -0.15, f"slope {_fmt(s['slope'])}")),
    Criterion(7, "Bessel machinery", "bessel-check", "residual < 1e-9, relation < 1e-9, m1 max/min < 4",
              lambda s: (s["partition_residual"] < 1e-9 and s["relation_error"] < 1e-9
                         and s["m1_integral_max_over_min"] < 4,
                         f"{_fmt(s['partition_residual'])}, {_fmt(s['relation_error'])}, "
                         f"{_fmt(s['m1_integral_max_over_min'])}")),
    Criterion(8, "Christ-Kiselev certification", "ck-certify",
              "levels <= bound, covering < 1e-12, Hilbert ratio >= 0.9",
              lambda s: (bool(s["levels_ok"]) and s["covering_residual"] < 1e-12 and s["hilbert_min_ratio"] >= 0.9,
                         f"worst {_fmt(s['worst_level_over_bound'])}, covering {_fmt(s['covering_residual'])}, "
                         f"Hilbert {_fmt(s['hilbert_min_ratio'])}")),
    Criterion(9, "double-endpoint divergence", "counterexample", "rho >= bound, slope 1.0 +- 0.2",
              lambda s: (bool(s["above_lower_bound"]) and abs(s["slope_1e-6_1e-2"] - 1) <= 0.2,
                         f"slope {_fmt(s['slope_1e-6_1e-2'])}, above bound {s['above_lower_bound']}")),
    Criterion(10, "scaling gate", "counterexample", "no mismatches",
              lambda s: (s["gate_mismatches"] == 0, f"mismatches {s['gate_mismatches']}")),
]


def report(directory: Path) -> tuple[list[dict], bool]:
    """Rows ``(criterion, name, status, value, threshold, source)``; ``True`` if nothing failed."""
    if not directory.is_dir():
        raise ConfigError(f"artifact directory {directory} does not exist")
    metas = {}
    for cmd in SCHEMAS:
        path = directory / f"{cmd.replace('-', '_')}.json"
        if path.exists():
            try:
                metas[cmd] = json.loads(path.read_text())["summary"]
            except (json.JSONDecodeError, KeyError) as exc:
                raise ConfigError(f"{path}: corrupt metadata ({exc})") from None
    if not metas:
        raise ConfigError(f"no metadata records in {directory}")
    rows, ok = [], True
    for c in CRITERIA:
        if c.source not in metas:
            status, value = "SKIPPED", ""
        else:
            try:
                passed, value = c.judge(metas[c.source])
            except (KeyError, TypeError) as exc:
                raise ConfigError(f"{c.source}: corrupt metadata (missing {exc})") from None
            status = "PASS" if passed else "FAIL"
            ok &= passed
        rows.append({"criterion": c.number, "name": c.name, "status": status, "value": value,
                     "threshold": c.threshold, "source": c.source})
    return rows, ok


# --------------------------------------------------------------------- main


def _precondition_errors() -> tuple:
    from .christ_kiselev import TreeMismatchError
    from .discretization import AliasingError, GridMismatchError
    from .multiplier_lab import DivergenceError
    from .norms import ConvergenceError
    from .propagator import ResolutionError

    return (ResolutionError, AliasingError, GridMismatchError, ConvergenceError, DivergenceError,
            TreeMismatchError, ValueError)


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="strichartz-lab", description="Run scans and write CSV artifacts.")
    sub = ap.add_subparsers(dest="command", required=True)
    for name in EXPERIMENTS:
        sp = sub.add_parser(name)
        sp.add_argument("--config", help="INI file with [run] and [%s] sections" % name)
        sp.add_argument("--output-dir", help=f"overrides [run] output_dir and ${OUTPUT_ENV}")
    rp = sub.add_parser("report")
    rp.add_argument("directory", nargs="?", help=f"artifact directory (default ${OUTPUT_ENV} or ./artifacts)")
    return ap


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    if args.command == "report":
        directory = Path(args.directory or os.environ.get(OUTPUT_ENV) or "artifacts")
        try:
            rows, ok = report(directory)
        except ConfigError as exc:
            print(f"error: {exc}", file=sys.stderr)
            return EXIT_CONFIG
        for r in rows:
            print(f"[{r['status']:7}] {r['criterion']:2d} {r['name']}: {r['value']} ({r['threshold']})")
        write_csv(directory / "report.csv", ["criterion", "name", "status", "value", "threshold", "source"], rows)
        skipped = sum(r["status"] == "SKIPPED" for r in rows)
        print(f"overall: {'PASS' if ok else 'FAIL'}" + (f" ({skipped} skipped)" if skipped else ""))
        return EXIT_OK if ok else EXIT_ACCEPTANCE
    try:
        cfg = load_config(args.command, args.config, args.output_dir)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    start = time.perf_counter()
    try:
        outcome = EXPERIMENTS[args.command](cfg.values, cfg.seed)
    except _precondition_errors() as exc:
        print(f"precondition failed ({type(exc).__name__}): {exc}", file=sys.stderr)
        return EXIT_PRECONDITION
    path = write_artifacts(cfg, outcome, time.perf_counter() - start)
    print(f"{args.command}: wrote {', '.join(t.name + '.csv' for t in outcome.tables)} and {path.name}")
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
