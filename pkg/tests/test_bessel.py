
import mpmath
import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from strichartz_lab.bessel import (BesselPartition, bessel_b, bessel_b_deriv, bessel_eval, extract_amplitudes,
                                   hankel_amplitude, m0_decay_check, m1_envelope_check, smooth_step,
                                   smooth_step_deriv)

from oracles import J1_AT_1


def mp_bessel(n, x):
    return complex((1j) ** n * mpmath.besselj(n, x))


def test_frozen_value():
    assert bessel_eval(1, 1.0) == pytest.approx(1j * J1_AT_1, abs=1e-15)


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 64), st.floats(-100, 100, allow_nan=False))
def test_quadrature_matches_mpmath(n, x):
    assert abs(bessel_eval(n, x) - mp_bessel(n, x)) < 1e-9


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 64), st.floats(0, 100, allow_nan=False))
def test_fast_path_matches_mpmath(n, x):
    assert abs(complex(bessel_b(n, x)) - mp_bessel(n, x)) < 1e-9


def test_tiny_values_keep_relative_precision():
    # J_40(2) ~ 1e-48; the saddle-point contour must not lose it to cancellation
    ref = mp_bessel(40, 2.0)
    assert abs(bessel_eval(40, 2.0) - ref) <= 1e-10 * abs(ref)


@settings(max_examples=40, deadline=None)
@given(st.integers(-20, 20), st.floats(-50, 50, allow_nan=False))
def test_symmetries(n, x):
    b = bessel_eval(n, x)
    assert bessel_eval(-n, x) == pytest.approx(b, abs=1e-14)
    assert bessel_eval(n, -x) == pytest.approx((-1) ** n * b, abs=1e-14)


def test_derivative_against_mpmath():
    x = np.array([0.5, 3.0, 17.0])
    for n in (0, 3, 10):
        ref = [complex(1j ** n * mpmath.besselj(n, v, derivative=1)) for v in x]
        np.testing.assert_allclose(bessel_b_deriv(n, x), ref, atol=1e-12)


@settings(max_examples=40, deadline=None)
@given(st.floats(-2, 3, allow_nan=False))
def test_smooth_step_bounds(u):
    s = float(smooth_step(u))
    assert 0.0 <= s <= 1.0
    assert s == pytest.approx(1 - float(smooth_step(1 - u)), abs=1e-15)
    assert 0.0 <= float(smooth_step_deriv(u)) < 10


@pytest.mark.parametrize("n", [0, 1, 4, 16, 64])
def test_partition_of_unity_and_reconstruction(n):
    part = BesselPartition(n, 12)
    r = np.linspace(0, 2.0**12, 20001)
    unity = sum(p.cutoff(r) for p in part.pieces())
    assert np.max(np.abs(unity - 1)) < 1e-12
    assert np.max(np.abs(part.partition_sum(r) - bessel_b(n, r))) < 1e-12


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 64), st.floats(0, 4096, allow_nan=False))
def test_pieces_vanish_off_support(n, r):
    for p in BesselPartition(n, 12).pieces():
        lo, hi = p.support
        if r < lo or r > hi:
            assert abs(float(p.cutoff(r))) < 1e-300


def test_partition_range_guard():
    with pytest.raises(ValueError):
        BesselPartition(4, 6).partition_sum(np.array([100.0]))
    with pytest.raises(ValueError):
        BesselPartition(64, 3)


def test_m0_superpolynomial_decay():
    vals = [m0_decay_check(n, 0, 2) for n in (8, 16, 32, 64, 128)]
    assert all(b < a for a, b in zip(vals, vals[1:]))
    assert vals[-1] < 1e-20


def test_m1_integral_uniform():
    ints = [m1_envelope_check(n).integral for n in (16, 32, 64, 128, 256)]
    assert max(ints) / min(ints) < 4


@pytest.mark.parametrize("j", [11, 12, 13])
def test_amplitudes_match_hankel_split(j):
    piece = BesselPartition(16, 14).mj(j)
    plus, minus, resid = extract_amplitudes(piece)
    assert resid < 1e-8
    for amp, sign in ((plus, 1), (minus, -1)):
        ref = hankel_amplitude(piece, sign, amp.u)
        assert np.max(np.abs(amp.profile - ref)) < 1e-6 * max(1.0, np.max(np.abs(ref)))
        # psi stays O(1) uniformly in j
        assert 0.1 < amp.sup() < 1.0


@pytest.mark.parametrize("n, x", [(0, 1e-9), (1, 2.2e-309), (3, 5e-9), (5, 2e-8), (2, 1e-300)])
def test_tiny_arguments(n, x):
    ref = mp_bessel(n, x)
    assert abs(bessel_eval(n, x) - ref) <= 1e-13 * abs(ref) + 1e-320


def test_m0_dominates_deep_in_its_region():
    part = BesselPartition(16, 8)
    r = np.array([2.0])
    m0, m1, *mj = part.pieces()
    assert abs(m0(r)[0] - bessel_b(16, r)[0]) < 1e-9
    assert m1(r)[0] == 0 and all(p(r)[0] == 0 for p in mj)


def test_mode_zero_has_no_m0():
    part = BesselPartition(0, 6)
    assert part.m0().is_zero()
    assert np.all(part.m0()(np.linspace(0, 64, 101)) == 0)


def test_m1_derivative_constant_uniform():
    a, b = m1_envelope_check(16), m1_envelope_check(256)
    assert 0.25 < a.c_deriv / b.c_deriv < 4
