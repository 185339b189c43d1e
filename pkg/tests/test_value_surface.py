import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import c0_exact, ode_frame_at_zero
from jumpliq import DomainError, ModelParams
from jumpliq import coefficients as co
from jumpliq import value_surface as vs
from jumpliq.value_surface import Region

FIG2 = ModelParams(2.5, 6.0, 3.0, 4.0)


def grid_scan_index(p, T, x, n=1_000_001):
    """Brute-force inverse of x_bar(T, .) on a dense grid."""
    S = np.linspace(0.0, T, n)
    xb = co.x_bar(p, T, S)
    return S[np.argmin(np.abs(xb - abs(x)))], T / (n - 1)


# ---------------------------------------------------------------- boundary

def test_boundary_riskneutral(rn):
    assert vs.boundary(rn, 1.0) == pytest.approx(0.4, rel=1e-15)


def test_boundary_fig2(fig2):
    b = vs.boundary(fig2, 1.0)
    assert b == pytest.approx(6 / (2 * 3 * c0_exact(fig2, 1.0)), rel=1e-14)
    assert b == pytest.approx(0.2695, abs=1e-4)


def test_boundary_small_and_monotone(fig2):
    assert vs.boundary(fig2, 1e-12) < 1e-11
    T = np.linspace(0.01, 5, 100)
    assert np.all(np.diff(vs.boundary(fig2, T)) > 0)
    with pytest.raises(DomainError):
        vs.boundary(fig2, 0.0)


# ---------------------------------------------------------------- g_index

def test_g_index_zero_state(fig2):
    assert vs.g_index(fig2, 1.3, 0.0) == 1.3


def test_g_index_crossing_time(fig2):
    # boundary reached with about 0.1 left on the clock
    assert 1.0 - vs.g_index(fig2, 1.0, 0.3) == pytest.approx(0.1, abs=0.02)


def test_g_index_round_trip(fig2):
    x = co.x_bar(fig2, 1.0, 0.6)
    assert vs.g_index(fig2, 1.0, x) == pytest.approx(0.6, abs=1e-10)
    S_ref, res = grid_scan_index(fig2, 1.0, x)
    assert abs(vs.g_index(fig2, 1.0, x) - S_ref) <= res


def test_g_index_grid_scan_oracle(fig2):
    S_ref, res = grid_scan_index(fig2, 1.0, 0.3)
    assert abs(vs.g_index(fig2, 1.0, 0.3) - S_ref) <= res


def test_g_index_regions(fig2):
    b = vs.boundary(fig2, 1.0)
    xb0 = vs.outer_threshold(fig2, 1.0)
    assert vs.g_index(fig2, 1.0, b) == 1.0
    assert vs.g_index(fig2, 1.0, -b) == 1.0
    assert vs.g_index(fig2, 1.0, xb0) == 0.0
    assert vs.g_index(fig2, 1.0, 5.0) == 0.0


def test_g_index_requires_state_cost(rn):
    with pytest.raises(DomainError):
        vs.g_index(rn, 1.0, 0.2)


@settings(max_examples=50, deadline=None)
@given(T=st.floats(0.05, 4.0), u=st.floats(0.001, 0.999))
def test_g_round_trip_property(T, u):
    b = vs.boundary(FIG2, T)
    xb0 = vs.outer_threshold(FIG2, T)
    x = b + u * (xb0 - b)
    S = vs.g_index(FIG2, T, x)
    assert co.x_bar(FIG2, T, S) == pytest.approx(x, rel=1e-10)


def test_vectorised_inversion_independent_of_neighbours(fig2):
    T = np.array([1.0, 2.0, 0.5])
    x = np.array([0.3, 0.5, 0.2])
    together = vs.invert_x_bar(fig2, T, x)
    alone = [vs.invert_x_bar(fig2, t, v) for t, v in zip(T, x)]
    np.testing.assert_array_equal(together, alone)
    newton = vs.invert_x_bar_newton(fig2, T, x)
    np.testing.assert_allclose(co.x_bar(fig2, T, newton), x, rtol=1e-12)
    np.testing.assert_array_equal(newton, np.concatenate([vs.invert_x_bar_newton(fig2, t, v) for t, v in zip(T, x)]))


# ---------------------------------------------------------------- value

def test_value_at_zero(fig2):
    vp = vs.value(fig2, 1.0, 0.0)
    assert vp.w == 0.0 and vp.dw_dx == 0.0 and vp.region is Region.STOPPING


def test_value_stopping(fig2):
    vp = vs.value(fig2, 1.0, 0.2)
    assert vp.region is Region.STOPPING
    assert vp.w == pytest.approx(c0_exact(fig2, 1.0) * 0.04, rel=1e-14)


def test_value_outer_oracle(fig2):
    vp = vs.value(fig2, 1.0, 1.2)
    S_ref, _ = grid_scan_index(fig2, 1.0, 1.2)
    assert S_ref == 0.0 and vp.region is Region.OUTER
    c1, c2, c3 = ode_frame_at_zero(fig2, 1.0)
    assert vp.w == pytest.approx(c1 * 1.44 + c2 * 1.2 + c3, rel=1e-8)
    assert vp.w == pytest.approx(3.554981191594126, rel=1e-10)


def test_value_interpolation_oracle(fig2):
    vp = vs.value(fig2, 1.0, 0.3)
    S_ref, res = grid_scan_index(fig2, 1.0, 0.3)
    f = co.coeff_frame(fig2, 1.0, S_ref)
    assert vp.region is Region.INTERPOLATION
    assert vp.w == pytest.approx(f.c1 * 0.09 + f.c2 * 0.3 + f.c3, abs=1e-6)


def test_value_singularity_guard(fig2):
    with pytest.raises(DomainError):
        vs.value(fig2, 1e-10, 0.5)
    with pytest.raises(DomainError):
        vs.value(fig2, 0.0, 0.5)
    assert math.isfinite(vs.value(fig2, 1e-9, 0.5).w)


def test_region_definition(fig2):
    T = 1.5
    b, xb0 = vs.boundary(fig2, T), vs.outer_threshold(fig2, T)
    for x in np.linspace(-2, 2, 81):
        vp = vs.value(fig2, T, x)
        expect = Region.STOPPING if abs(x) <= b else Region.OUTER if abs(x) >= xb0 else Region.INTERPOLATION
        assert vp.region is expect
        assert vp.s_index == (T if expect is Region.STOPPING else 0.0 if expect is Region.OUTER else vp.s_index)


@settings(max_examples=60, deadline=None)
@given(T=st.floats(0.05, 3.0), x=st.floats(-3.0, 3.0))
def test_symmetry_bounds_convexity(T, x):
    p = FIG2
    a, b = vs.value(p, T, x), vs.value(p, T, -x)
    assert a.w == b.w and a.dw_dx == -b.dw_dx
    assert a.d2w_dx2 > 0
    assert a.d2w_dx2 == pytest.approx(2 * co.c1(p, T, a.s_index), rel=1e-12)
    if abs(x) > 1e-100:  # strict lower bound is meaningless once x**2 underflows
        c0 = co.c0(p, T)
        assert co.c1_at_zero(p, T) * x * x < a.w <= c0 * x * x * (1 + 1e-14)
        assert c0 <= p.lam / T + math.sqrt(p.alpha * p.lam)


@settings(max_examples=40, deadline=None)
@given(T=st.floats(0.1, 3.0), x=st.floats(-2, 2), y=st.floats(-2, 2))
def test_midpoint_convexity(T, x, y):
    m = vs.value(FIG2, T, 0.5 * (x + y)).w
    assert m <= 0.5 * (vs.value(FIG2, T, x).w + vs.value(FIG2, T, y).w) + 1e-12


def test_derivatives_match_finite_differences(fig2):
    h = 1e-6
    for T in (0.3, 1.0, 2.0):
        b, xb0 = vs.boundary(fig2, T), vs.outer_threshold(fig2, T)
        for x in np.linspace(0.01, 2 * xb0, 25):
            if min(abs(x - b), abs(x - xb0)) < 1e-3:
                continue
            vp = vs.value(fig2, T, x)
            fx = (vs.value(fig2, T, x + h).w - vs.value(fig2, T, x - h).w) / (2 * h)
            ft = (vs.value(fig2, T + h, x).w - vs.value(fig2, T - h, x).w) / (2 * h)
            assert fx == pytest.approx(vp.dw_dx, rel=1e-5, abs=1e-7)
            assert ft == pytest.approx(vp.dw_dT, rel=1e-5, abs=1e-7)


def test_smooth_fit(fig2):
    h = 1e-6
    for T in np.linspace(0.2, 3.0, 10):
        for edge in (vs.boundary(fig2, T), vs.outer_threshold(fig2, T)):
            w0 = vs.value(fig2, T, edge).w
            left = (w0 - vs.value(fig2, T, edge - h).w) / h
            right = (vs.value(fig2, T, edge + h).w - w0) / h
            assert abs(left - right) <= 1e-4
            assert abs(vs.value(fig2, T, edge - h).w - vs.value(fig2, T, edge + h).w) <= 1e-4


def test_time_derivative_on_boundary(fig2):
    # the stopping formula and the interpolation formula agree at |x| = beta
    T = 1.0
    b = vs.boundary(fig2, T)
    on = vs.value(fig2, T, b)
    assert on.region is Region.STOPPING
    frame = co.coeff_frame(fig2, T, T * (1 - 1e-9))
    d1, d2, d3, _ = co.coefficient_rates(fig2, frame)
    assert on.dw_dT == pytest.approx(d1 * b * b + d2 * b + d3, rel=1e-6)


def test_lemma_identities(fig2):
    h = 1e-5
    for T, S in ((1.0, 0.3), (2.0, 1.0), (0.5, 0.2)):
        lo, hi = co.coeff_frame(fig2, T, S - h), co.coeff_frame(fig2, T, S + h)
        d1, d2, d3 = ((getattr(hi, k) - getattr(lo, k)) / (2 * h) for k in ("c1", "c2", "c3"))
        xb = co.x_bar(fig2, T, S)
        assert abs(d1 * xb * xb + d2 * xb + d3) <= 1e-5
        assert abs(2 * d1 * xb + d2) <= 1e-5


def test_value_gamma_monotone():
    T, x = 1.0, 0.5
    base = ModelParams(2.5, 1.0, 3.0, 4.0)
    thr = 2 * abs(x) * co.c0(base, T)
    below = np.linspace(0.05, thr * 0.99, 12)
    ws = [vs.value(base.replace(gamma=3.0 * G), T, x).w for G in below]
    assert all(b - a > 1e-10 for a, b in zip(ws, ws[1:]))
    above = [vs.value(base.replace(gamma=3.0 * G), T, x).w for G in (thr * 1.01, thr * 2, thr * 5)]
    assert above[0] == above[1] == above[2]


def test_value_many_matches_value(fig2, rn):
    for p in (fig2, rn):
        xs = np.linspace(-1.5, 1.5, 41)
        w, d, _ = vs.value_many(p, 1.0, xs)
        np.testing.assert_array_equal(w, [vs.value(p, 1.0, x).w for x in xs])
        np.testing.assert_array_equal(d, [vs.value(p, 1.0, x).dw_dx for x in xs])


# ---------------------------------------------------------------- risk-neutral

def test_riskneutral_boundary_continuity(rn):
    a = vs.value_riskneutral(rn, 1.0, 0.4)
    f = co.coeff_frame_riskneutral(rn, 1.0, 0.0)
    outer = f.c1 * 0.16 + f.c2 * 0.4 + f.c3
    assert a.w == pytest.approx(outer, rel=1e-12)
    assert a.dw_dx == pytest.approx(2 * f.c1 * 0.4 + f.c2, rel=1e-12)


def test_riskneutral_zero(rn):
    assert vs.value_riskneutral(rn, 1.0, 0.0).w == 0.0


def test_riskneutral_outer_ode(rn):
    c1, c2, c3 = ode_frame_at_zero(rn, 1.0)
    assert vs.value_riskneutral(rn, 1.0, 1.0).w == pytest.approx(c1 + c2 + c3, rel=1e-8)


def test_riskneutral_second_derivative_jump(rn):
    b = vs.boundary(rn, 1.0)
    inner = vs.value(rn, 1.0, b * (1 - 1e-9))
    outer = vs.value(rn, 1.0, b * (1 + 1e-9))
    assert inner.d2w_dx2 == pytest.approx(2 * rn.lam, rel=1e-15)
    assert outer.d2w_dx2 == pytest.approx(2 * co.c1_at_zero(rn, 1.0), rel=1e-12)


def test_riskneutral_domain(fig2):
    with pytest.raises(DomainError):
        vs.value_riskneutral(fig2, 1.0, 0.2)
