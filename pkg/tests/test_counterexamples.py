import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from strichartz_lab.counterexamples import (ORIGIN_CONSTANT, OneSidedHilbertOp, TimeSignal, analytic_lower_bound,
                                            band_limited_indicator, delta_forcing_reduce, divergence_scan,
                                            endpoint_gate, narrow_bump_trace, origin_trace, rho, rho_sampled)
from strichartz_lab.norms import INF

from oracles import (RHO_WINDOW_1000, divergence_lower_bound, hilbert_indicator_after,
                     hilbert_indicator_inside)


def test_reduce_matches_closed_forms():
    g = TimeSignal.indicator()
    eps = 1e-3
    t_in = np.array([0.01, 0.5, 1.0005])
    t_out = np.array([1.01, 2.0, 50.0])
    np.testing.assert_allclose(delta_forcing_reduce(g, t_in, eps), hilbert_indicator_inside(t_in, eps), rtol=1e-13)
    np.testing.assert_allclose(delta_forcing_reduce(g, t_out, eps), hilbert_indicator_after(t_out), rtol=1e-13)
    assert np.all(delta_forcing_reduce(g, np.array([-1.0, 0.0, 5e-4]), eps) == 0)


def test_reduce_matches_quadrature_for_steps():
    from scipy.integrate import quad

    g = TimeSignal([0.0, 0.3, 0.7, 1.5], [1.0, -2.0, 0.5])
    t, eps = 1.2, 0.05
    ref = sum(v * quad(lambda s: 1 / (s - t), a, min(b, t - eps))[0]
              for a, b, v in zip(g.edges[:-1], g.edges[1:], g.values) if a < t - eps)
    assert delta_forcing_reduce(g, t, eps)[0] == pytest.approx(ref, rel=1e-12)


@settings(max_examples=40, deadline=None)
@given(st.complex_numbers(max_magnitude=10, allow_nan=False, allow_infinity=False),
       st.floats(0.01, 3), st.floats(1e-4, 0.1))
def test_operator_linear(c, t, eps):
    g = TimeSignal([0.0, 0.4, 1.0], [1.0, 0.3])
    op = OneSidedHilbertOp(eps)
    assert op(g.scaled(c), t)[0] == pytest.approx(c * op(g, t)[0], abs=1e-12)


def test_origin_constant():
    assert ORIGIN_CONSTANT == pytest.approx(1j / (4 * math.pi))
    g = TimeSignal.indicator()
    assert origin_trace(g, 2.0, 0.1)[0] == pytest.approx(ORIGIN_CONSTANT * math.log(0.5))


@pytest.mark.parametrize("eps", sorted(RHO_WINDOW_1000))
def test_rho_against_frozen_values(eps):
    assert rho(eps) == pytest.approx(RHO_WINDOW_1000[eps], rel=1e-9)


@settings(max_examples=15, deadline=None)
@given(st.floats(-6, -1))
def test_rho_above_lower_bound(log_eps):
    eps = 10.0**log_eps
    assert float(analytic_lower_bound(eps)) == pytest.approx(divergence_lower_bound(eps), rel=1e-12)
    assert rho(eps) >= float(analytic_lower_bound(eps))


def test_rho_guards():
    with pytest.raises(ValueError):
        rho(1e-3, window=(0.0, 1.5))
    with pytest.raises(ValueError):
        rho(1e-3, g=TimeSignal.indicator(height=0.0))
    with pytest.raises(ValueError):
        OneSidedHilbertOp(0.0)


def test_divergence_scan_slope_and_order():
    scan = divergence_scan([1e-2, 1e-3, 1e-4, 1e-5, 1e-6])
    eps = [r["epsilon"] for r in scan.rows]
    assert eps == sorted(eps, reverse=True)
    vals = [r["rho"] for r in scan.rows]
    assert all(b > a for a, b in zip(vals, vals[1:]))
    assert abs(scan.slope - 1) <= 0.2
    with pytest.raises(ValueError):
        divergence_scan([1e-2, 1e-3, 1e-4])


def test_band_limited_signal_diverges_too():
    g = band_limited_indicator(8.0)
    tg = np.linspace(-4.0, 12.0, 3001)
    vals = [rho_sampled(g, e, tg) for e in (1e-1, 1e-2, 1e-3, 1e-4)]
    slope = np.polyfit(np.log(1 / np.array([1e-1, 1e-2, 1e-3, 1e-4])), vals, 1)[0]
    assert abs(slope - 1) <= 0.2


def test_narrow_bump_converges_to_delta_trace():
    g = TimeSignal.indicator()
    exact = origin_trace(g, 0.7, 0.05)[0]
    errs = [abs(narrow_bump_trace(g, 0.7, 0.05, w) - exact) / abs(exact) for w in (0.1, 0.05, 0.025)]
    assert errs[-1] < 1e-3
    # error ~ w^2
    assert 3 < errs[0] / errs[1] < 5 and 3 < errs[1] / errs[2] < 5


@pytest.mark.parametrize("qt, rt, outcome", [
    (2, INF, "double-endpoint"), (4, 4, "admissible"), (INF, 2, "admissible"), (3, 6, "admissible"),
    (2, 2, "scaling-inconsistent"), (Fraction(4, 3), 4, "scaling-inconsistent"),
])
def test_endpoint_gate(qt, rt, outcome):
    rec = endpoint_gate(qt, rt)
    assert rec.outcome == outcome
    assert "2/q + 2/r + 2 = 3" in rec.arithmetic


def test_time_signal_validation():
    with pytest.raises(ValueError):
        TimeSignal([0.0, 0.0], [1.0])
    g = TimeSignal([0.0, 1.0, 3.0], [2.0, 1.0])
    assert g.norm() == pytest.approx(math.sqrt(6.0))
    np.testing.assert_array_equal(g(np.array([-1.0, 0.5, 2.0, 3.0])), [0, 2, 1, 0])
