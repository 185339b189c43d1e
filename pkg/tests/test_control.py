import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import c0_exact, ode_frame_at_zero
from jumpliq import DomainError, ModelParams
from jumpliq import coefficients as co
from jumpliq import control as ctl
from jumpliq import value_surface as vs

FIG2 = ModelParams(2.5, 6.0, 3.0, 4.0)


def riemann_bound(p, T, x, t, n=1_000_000):
    s = (np.arange(n) + 0.5) * (t / n)
    return abs(x) * math.exp(-np.sum(co.c1_at_zero(p, T - s)) * (t / n) / p.lam)


# ---------------------------------------------------------------- optimal control

def test_zero_state(fig2, rn):
    for p in (fig2, rn):
        a = ctl.optimal_control(p, 1.0, 0.0)
        assert (a.xi, a.eta) == (0.0, 0.0)


def test_stopping_region_control(fig2):
    a = ctl.optimal_control(fig2, 1.0, 0.2)
    assert a.eta == 0.0
    assert a.xi == pytest.approx(c0_exact(fig2, 1.0) * 0.2 / 2.5, rel=1e-14)


def test_outer_region_order(fig2):
    a = ctl.optimal_control(fig2, 1.0, 1.2)
    beta = 6 / (2 * 3 * c0_exact(fig2, 1.0))
    assert a.eta == pytest.approx(1.2 - beta, rel=1e-13)
    assert a.eta == pytest.approx(0.9305, abs=1e-4)


def test_post_fill_lands_on_boundary(fig2):
    for tau in (0.1, 0.5, 1.0, 2.5):
        b = vs.boundary(fig2, tau)
        for x in (b * 1.0001, 0.4, 1.2, 3.0, -0.7):
            a = ctl.optimal_control(fig2, tau, x)
            if abs(x) > b:
                assert x - a.eta == math.copysign(b, x) or abs(x - a.eta - math.copysign(b, x)) <= 2 * math.ulp(abs(x))
                assert abs(a.eta) < abs(x)


def test_domain(fig2):
    with pytest.raises(DomainError):
        ctl.optimal_control(fig2, 0.0, 1.0)
    with pytest.raises(DomainError):
        ctl.nodp_control(fig2, -1.0, 1.0)
    with pytest.raises(DomainError):
        ctl.linear_control(1.0, 0.0)


@settings(max_examples=80, deadline=None)
@given(tau=st.floats(0.02, 3.0), x=st.floats(-3, 3).filter(lambda v: abs(v) > 1e-6))
def test_rate_bounds_and_symmetry(tau, x):
    p = FIG2
    a, b = ctl.optimal_control(p, tau, x), ctl.optimal_control(p, tau, -x)
    assert a.xi == -b.xi and a.eta == -b.eta
    assert np.sign(a.xi) == np.sign(x)
    if a.eta != 0:
        assert np.sign(a.eta) == np.sign(x)
    lo = co.c1_at_zero(p, tau) * abs(x) / p.lam
    hi = co.c0(p, tau) * abs(x) / p.lam
    assert lo < abs(a.xi) <= hi * (1 + 1e-14)
    assert hi <= (1 / tau + math.sqrt(p.alpha / p.lam)) * abs(x) * (1 + 1e-14)


def test_region_rule(fig2):
    for tau in (0.3, 1.0):
        b = vs.boundary(fig2, tau)
        for x in np.linspace(-1, 1, 41):
            a = ctl.optimal_control(fig2, tau, x)
            assert (a.eta == 0.0) == (abs(x) <= b)


def test_slow_down_against_benchmark(fig2):
    # outside the stopping region the optimal rate exceeds the benchmark rate C(T) x / lam
    for x in (0.3, 0.5, 1.2):
        assert ctl.optimal_control(fig2, 1.0, x).xi > co.c_nodp(fig2, 1.0) * x / fig2.lam


def test_gamma_monotone_controls():
    base = ModelParams(2.5, 1.0, 3.0, 4.0)
    T, x = 1.0, 0.5
    thr = 2 * x * co.c0(base, T)
    G = np.linspace(0.05, 0.99 * thr, 15)
    acts = [ctl.optimal_control(base.replace(gamma=3 * g), T, x) for g in G]
    assert all(abs(b.xi) - abs(a.xi) > 1e-10 for a, b in zip(acts, acts[1:]))
    assert all(abs(a.eta) - abs(b.eta) > 1e-10 for a, b in zip(acts, acts[1:]))
    beyond = [ctl.optimal_control(base.replace(gamma=3 * g), T, x) for g in (1.01 * thr, 3 * thr)]
    assert beyond[0] == beyond[1] and beyond[0].eta == 0.0


def test_riskneutral_kink(rn):
    tau = 1.0
    b = vs.boundary(rn, tau)
    h = 1e-7
    left = (ctl.optimal_control(rn, tau, b).xi - ctl.optimal_control(rn, tau, b - h).xi) / h
    right = (ctl.optimal_control(rn, tau, b + h).xi - ctl.optimal_control(rn, tau, b).xi) / h
    assert ctl.optimal_control(rn, tau, b - 1e-12).xi == pytest.approx(ctl.optimal_control(rn, tau, b + 1e-12).xi, abs=1e-9)
    jump = 2 * (rn.lam / tau - co.c1_at_zero(rn, tau)) / (2 * rn.lam)
    assert left - right == pytest.approx(jump, rel=1e-4)
    assert jump > 1e-8


def test_riskneutral_formulas(rn):
    a = ctl.optimal_control(rn, 2.0, 0.3)  # boundary 0.8
    assert a.eta == 0.0 and a.xi == pytest.approx(0.3 / 2.0, rel=1e-15)
    c1, c2, _ = ode_frame_at_zero(rn, 2.0)
    a = ctl.optimal_control(rn, 2.0, 1.5)
    assert a.xi == pytest.approx((2 * c1 * 1.5 + c2) / (2 * rn.lam), rel=1e-8)
    assert a.eta == pytest.approx(1.5 - 0.8, rel=1e-14)


# ---------------------------------------------------------------- benchmarks

def test_nodp_control(fig2):
    assert ctl.nodp_control(fig2, 1.0, 0.0) == ctl.ControlAction(0.0, 0.0)
    a = ctl.nodp_control(fig2, 0.6, 0.5)
    assert a.eta == 0.5
    c = ode_frame_at_zero(fig2, 0.6)[0]
    assert a.xi == pytest.approx(c * 0.5 / fig2.lam, rel=1e-8)


def test_nodp_vanishes_for_frequent_fills():
    p = ModelParams(2.5, 6.0, 500.0, 0.0)
    assert ctl.nodp_control(p, 1.0, 1.0).xi < 1e-100


def test_linear_rule():
    assert ctl.linear_control(1.0, 1.0).rate == 1.0
    assert ctl.linear_control(0.0, 1.0).rate == 0.0
    r = ctl.linear_control(0.3, 1.0)
    assert r.rate == 0.3 and r(0.5, 0.15) == ctl.ControlAction(0.3, 0.0)


def test_vectorised_strategy_matches_pointwise(fig2, rn):
    for p in (fig2, rn):
        strat = ctl.optimal_strategy(p)
        xs = np.linspace(-1.5, 1.5, 61)
        for tau in (0.2, 1.0):
            xi, eta = strat(tau, xs)
            ref = [ctl.optimal_control(p, tau, x) for x in xs]
            np.testing.assert_allclose(xi, [a.xi for a in ref], rtol=1e-10, atol=1e-14)
            np.testing.assert_allclose(eta, [a.eta for a in ref], rtol=1e-12, atol=0)
        taus = np.linspace(0.1, 2, xs.size)
        xi, _ = strat(taus, xs)
        np.testing.assert_allclose(xi, [ctl.optimal_control(p, t, x).xi for t, x in zip(taus, xs)], rtol=1e-10, atol=1e-14)


# ---------------------------------------------------------------- trajectory bound

def test_bound_start(fig2):
    assert ctl.trajectory_bound(fig2, 1.0, -0.7, 0.0) == 0.7


def test_bound_vanishes_at_horizon(fig2):
    assert ctl.trajectory_bound(fig2, 1.0, 1.0, 1.0 - 1e-9) < 1e-7


def test_bound_riemann_oracle(fig2):
    got = ctl.trajectory_bound(fig2, 1.0, 1.0, 0.5)
    assert got == pytest.approx(riemann_bound(fig2, 1.0, 1.0, 0.5), rel=1e-6)


def test_bound_closed_form(fig2, rn):
    # the integral form equals |x| exp(theta t/2) sinh(a(T-t))/sinh(aT)
    for p in (fig2, rn):
        for t in (0.1, 0.5, 0.9):
            assert ctl.trajectory_bound(p, 1.0, 1.0, t) == pytest.approx(ctl.trajectory_bound_closed_form(p, 1.0, 1.0, t), rel=1e-10)
    # the variant with exp(lam theta t/2) is a different function
    a = 0.5 * fig2.theta_tilde
    alt = math.exp(fig2.lam * fig2.theta * 0.5 / 2) * math.sinh(a * 0.5) / math.sinh(a)
    assert abs(alt - ctl.trajectory_bound(fig2, 1.0, 1.0, 0.5)) > 0.1


def test_bound_domain(fig2):
    with pytest.raises(DomainError):
        ctl.trajectory_bound(fig2, 1.0, 1.0, 1.0)
    with pytest.raises(DomainError):
        ctl.trajectory_bound(fig2, 1.0, 1.0, -0.1)


# ---------------------------------------------------------------- deterministic path

def test_path_from_boundary_stays_in_stopping_region(fig2):
    b = vs.boundary(fig2, 1.0)
    rec = ctl.deterministic_trajectory(fig2, 1.0, b, 1e-3)
    beta = vs.boundary(fig2, 1.0 - rec.times)
    assert np.all(rec.states[1:] < beta[1:])
    # closed form under C0 feedback: x(t) = x sinh(k(T-t))/sinh(kT)
    k = math.sqrt(fig2.alpha / fig2.lam)
    ref = b * np.sinh(k * (1 - rec.times)) / math.sinh(k)
    np.testing.assert_allclose(rec.states, ref, rtol=1e-9, atol=1e-10)


def test_crossing_time(fig2):
    rec = ctl.deterministic_trajectory(fig2, 1.0, 0.3, 1e-4)
    assert ctl.crossing_time(fig2, rec, 1.0) == pytest.approx(0.1, abs=0.02)
    assert ctl.crossing_time(fig2, rec, 1.0) == pytest.approx(1.0 - vs.g_index(fig2, 1.0, 0.3), abs=2e-4)


def test_path_follows_no_fill_trajectory(fig2):
    x = co.x_bar(fig2, 1.0, 0.5)
    rec = ctl.deterministic_trajectory(fig2, 1.0, x, 1e-4)
    m = rec.times <= 0.5
    assert np.max(np.abs(rec.states[m] - co.x_bar(fig2, 1.0 - rec.times[m], 0.5))) <= 1e-5
    after = rec.times > 0.5 + 1e-3
    assert np.all(np.abs(rec.states[after]) < vs.boundary(fig2, 1.0 - rec.times[after]))


def test_forced_fill(fig2):
    rec = ctl.deterministic_trajectory(fig2, 1.0, 1.2, 1e-3, force_jump=0.4)
    i = np.nonzero(rec.times == 0.4)[0]
    assert i.size == 2
    assert rec.states[i[0]] > vs.boundary(fig2, 0.6)
    assert rec.states[i[1]] == pytest.approx(vs.boundary(fig2, 0.6), rel=1e-14)
    after = rec.times > 0.4
    assert np.all(rec.states[after] < vs.boundary(fig2, 1.0 - rec.times[after]))
    assert rec.jump_times == [0.4] and rec.eta_applied[0] > 0


def test_riskneutral_path_is_concave_and_below_linear_boundary(rn):
    rec = ctl.deterministic_trajectory(rn, 1.0, 0.6, 1e-3)
    b = vs.boundary(rn, 1.0 - rec.times)
    outside = rec.states > b
    assert outside[0]
    assert np.all(np.diff(outside.astype(int)) <= 0)  # never re-enters the outer region
    d2 = np.diff(rec.states[outside], 2)
    assert np.all(d2 <= 1e-12)


def test_step_size_error(fig2):
    with pytest.raises(DomainError):
        ctl.deterministic_trajectory(fig2, 1.0, 0.5, 1.0)
