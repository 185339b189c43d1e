import numpy as np
import pytest
from scipy.integrate import solve_ivp

from jumpliq import ModelParams


@pytest.fixture
def fig2():
    """lambda=2.5, alpha=4 (alpha_tilde=4, sigma=1), theta=3, gamma=6 (Gamma=2)."""
    return ModelParams(lam=2.5, gamma=6.0, theta=3.0, alpha=4.0)


@pytest.fixture
def rn():
    """Same parameters without state cost."""
    return ModelParams(lam=2.5, gamma=6.0, theta=3.0, alpha=0.0)


def c0_exact(p, T):
    if p.alpha == 0.0:
        return p.lam / T
    k = np.sqrt(p.alpha / p.lam)
    return np.sqrt(p.alpha * p.lam) / np.tanh(k * T)


def _rhs(p):
    lam, th, al, ga = p.lam, p.theta, p.alpha, p.gamma

    def f(t, y):
        c1, c2, c3, xb = y
        return [
            al - c1 * c1 / lam - th * c1,
            ga - c2 * (c1 / lam + th),
            -th * c3 - ga * ga / (4 * th * c0_exact(p, t)) - c2 * c2 / (4 * lam),
            c1 * xb / lam + c2 / (2 * lam),
        ]

    return f


def ode_frame(p, T, S):
    """Integrate the coefficient initial value problems from S (> 0) to T."""
    c0s = c0_exact(p, S)
    y0 = [c0s, 0.0, 0.0, p.gamma / (2 * p.theta * c0s)]
    if T == S:
        return np.array(y0)
    sol = solve_ivp(_rhs(p), (S, T), y0, method="DOP853", rtol=1e-13, atol=1e-14)
    return sol.y[:, -1]


def ode_frame_at_zero(p, T, t0=1e-7):
    """Integrate the S = 0 solution, started from its small-time expansion.

    Uses D = 1/C1, which solves D' = 1/lam + theta D - alpha D**2 with D(0) = 0.
    """
    lam, th, al, ga = p.lam, p.theta, p.alpha, p.gamma

    def f(t, y):
        d, c2, c3 = y
        c1 = 1.0 / d
        return [
            1.0 / lam + th * d - al * d * d,
            ga - c2 * (c1 / lam + th),
            -th * c3 - ga * ga / (4 * th * c0_exact(p, t)) - c2 * c2 / (4 * lam),
        ]

    y0 = [t0 / lam + th * t0 * t0 / (2 * lam), ga * t0 / 2, 0.0]
    sol = solve_ivp(f, (t0, T), y0, method="DOP853", rtol=1e-13, atol=1e-15)
    d, c2, c3 = sol.y[:, -1]
    return np.array([1.0 / d, c2, c3])
