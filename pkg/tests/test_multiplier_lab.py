import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from strichartz_lab.discretization import RadialProfile, make_radial_grid
from strichartz_lab.multiplier_lab import (DivergenceError, EnvelopePhi, LambdaGrid, LineSignal, MultiplierOperator,
                                           apply_T, apply_T_variable, convolve_kernel, default_lambda_grid,
                                           kernel_K, lambda_sobolev_check, maximal_T, phi_l1_scan,
                                           piece_decay_scan, random_signal, reduction_check, resolve_piece,
                                           ttstar_domination_scan, ttstar_lhs)
from strichartz_lab.propagator import ResolutionError


def phi_l1_closed_form(c):
    # c > 1: plateau c on [0, c^-2], r^{-1/2} up to c^{-18/19}, then c^{-9} r^{-10}; two-sided
    return 2 * ((19 / 9) * c ** (-9 / 19) - 1 / c)


@settings(max_examples=20, deadline=None)
@given(st.integers(0, 2**31 - 1), st.integers(0, 8), st.floats(0.5, 64, allow_nan=False))
def test_multiplier_is_l2_contraction(seed, n, lam):
    G = random_signal(256, 1.0, seed)
    assert apply_T(MultiplierOperator("full", n, lam), G).norm() <= G.norm() * (1 + 1e-12)


@settings(max_examples=10, deadline=None)
@given(st.integers(0, 2**31 - 1), st.integers(-40, 40))
def test_maximal_commutes_with_translation(seed, k):
    G = random_signal(256, 1.0, seed)
    grid = LambdaGrid(0.5, 64.0, 16)
    a = maximal_T("full", 2, G, grid, levels=1).sup
    b = maximal_T("full", 2, G.shifted(k), grid, levels=1).sup
    np.testing.assert_allclose(np.roll(a, k), b, atol=1e-12)


@settings(max_examples=10, deadline=None)
@given(st.integers(0, 2**31 - 1))
def test_maximal_dominates_single_lambda_and_grows_with_refinement(seed):
    G = random_signal(256, 1.0, seed)
    grid = LambdaGrid(1.0, 32.0, 16)
    res = maximal_T("m1", 4, G, grid, levels=2)
    ratios = [r for _, r in res.history]
    assert ratios[1] >= ratios[0] - 1e-12
    single = apply_T(MultiplierOperator("m1", 4, float(grid.nodes[7])), G)
    assert np.all(res.sup >= np.abs(single.values) - 1e-12)


def test_lambda_grid_refinement_nests():
    g = LambdaGrid(0.3, 40.0, 16)
    fine = g.refined().nodes
    assert np.all(np.isin(g.nodes, fine))
    with pytest.raises(ValueError):
        maximal_T("full", 0, random_signal(64, 1.0, 0), LambdaGrid(1.0, 2.0, 8))


def test_variable_lambda_matches_fixed():
    G = random_signal(128, 1.0, 3)
    fixed = apply_T(MultiplierOperator("full", 1, 5.0), G)
    var = apply_T_variable("full", 1, G, np.full(G.N, 5.0))
    np.testing.assert_allclose(var.values, fixed.values, atol=1e-14)
    with pytest.raises(ValueError):
        apply_T_variable("full", 1, G, np.zeros(G.N))


def test_random_signal_is_deterministic_and_windowed():
    a, b = random_signal(512, 0.5, 7), random_signal(512, 0.5, 7)
    np.testing.assert_array_equal(a.values, b.values)
    assert a.central_mass_fraction() == 1.0


def test_kernel_convolution_matches_fft():
    piece = resolve_piece(("mj", 6), 2)
    G = LineSignal.from_function(lambda x: np.exp(-(x / 40) ** 2) * np.cos(x / 3), 2048, 0.5)
    a = apply_T(MultiplierOperator(piece, 2, 256.0), G).values
    b = convolve_kernel(piece, 256.0, G).values
    assert np.max(np.abs(a - b)) < 1e-8 * np.max(np.abs(a))


def test_kernel_resolution_guard():
    piece = resolve_piece(("mj", 6), 2)
    with pytest.raises(ResolutionError):
        kernel_K(piece, 4.0, np.linspace(-10, 10, 11))
    with pytest.raises(ValueError):
        kernel_K(resolve_piece("full", 2), 4.0, np.zeros(1))


@settings(max_examples=20, deadline=None)
@given(st.floats(64, 1024), st.floats(64, 1024), st.floats(-20, 20, allow_nan=False))
def test_ttstar_lhs_symmetric(a, b, d):
    p = resolve_piece(("mj", 8), 4)
    assert ttstar_lhs(p, a, b, d) == pytest.approx(ttstar_lhs(p, b, a, -d), rel=1e-9, abs=1e-14)


def test_ttstar_scan_rows():
    scan = ttstar_domination_scan(6, [(64.0, 64.0, 0.0, 0.0), (64.0, 128.0, 8.0, 0.0)], n=2)
    assert len(scan.rows) == 2
    assert scan.max_ratio == max(r["ratio"] for r in scan.rows)


@pytest.mark.parametrize("c", [2.0, 16.0, 1024.0])
def test_phi_l1_matches_closed_form(c):
    assert EnvelopePhi(8, 2.0**8 / c).l1_norm() == pytest.approx(phi_l1_closed_form(c), rel=1e-8)


def test_phi_l1_scan_columns():
    rows = phi_l1_scan([6, 7], [1.0])
    assert [r["j"] for r in rows] == [6, 7]
    for r in rows:
        assert r["normalised"] == pytest.approx(r["l1"] * 2 ** (r["j"] / 2))


@pytest.mark.parametrize("n", [0, 2, 5])
def test_reduction_to_multiplier_problem(n):
    g = make_radial_grid("graded", 4.5, 300)
    fn = RadialProfile.from_function(n, g, lambda R: R**n * np.exp(-np.pi * R**2))
    assert reduction_check(fn, [0.25, 0.3, -0.2]).max_discrepancy < 1e-10


def test_small_lambda_is_identity():
    G = random_signal(256, 1.0, 1)
    out = apply_T(MultiplierOperator("full", 0, 1e-6), G)
    assert np.max(np.abs(out.values - G.values)) < 1e-6


def test_lambda_sobolev_ratio_uniform_in_n():
    ratios = [lambda_sobolev_check(n).max_ratio for n in (1, 4, 16, 64)]
    assert max(ratios) < 1.0
    assert max(ratios) / min(ratios) < 1.01


def test_lambda_sobolev_rejects_non_decaying():
    with pytest.raises(DivergenceError):
        lambda_sobolev_check(4, [lambda lam: np.ones_like(lam)])


def test_piece_decay_guards():
    with pytest.raises(ValueError):
        piece_decay_scan(2, [6, 7, 8], trials=1, N=256)
    with pytest.raises(ValueError):
        piece_decay_scan(64, [6, 7, 8, 9, 10], trials=1, N=256)


def test_piece_decay_small():
    scan = piece_decay_scan(2, range(6, 11), trials=2, N=1024)
    assert len(scan.rows) == 10
    assert set(scan.per_j) == set(range(6, 11))
    assert scan.slope < 0


def test_resolve_piece_names():
    assert resolve_piece("mj:7", 3).scale_j == 7
    assert resolve_piece(("mj", 7), 3).support == resolve_piece("mj:7", 3).support
    assert resolve_piece("m0", 8).kind == "m0"
    with pytest.raises(ValueError):
        resolve_piece("m9", 3)


def test_default_lambda_grid_covers_support():
    G = random_signal(256, 1.0, 0)
    p = resolve_piece(("mj", 6), 2)
    grid = default_lambda_grid(p, 2, G)
    xi = np.abs(G.xi)
    assert grid.lo * np.sqrt(xi.max()) <= p.support[0] * (1 + 1e-12)
    assert grid.hi * np.sqrt(xi[xi > 0].min()) >= p.support[1] * (1 - 1e-12)
