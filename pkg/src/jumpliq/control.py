"""Optimal feedback control, benchmark controls and the a-priori trajectory bound.

Pointwise functions return a :class:`ControlAction`. The ``*_strategy``
factories return vectorised callables ``(tau, x) -> (xi, eta)`` used by the
Monte Carlo engine, where ``tau`` is a scalar or an array matching ``x``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy import integrate

from . import coefficients as co
from . import value_surface as vs
from .params import DomainError, ModelParams
from .records import PathRecord
from .value_surface import Region

__all__ = [
    "ControlAction",
    "LinearRule",
    "optimal_control",
    "nodp_control",
    "linear_control",
    "optimal_strategy",
    "nodp_strategy",
    "linear_strategy",
    "pointwise_strategy",
    "trajectory_bound",
    "trajectory_bound_closed_form",
    "deterministic_trajectory",
    "crossing_time",
]


@dataclass(frozen=True)
class ControlAction:
    """Continuous rate ``xi`` (state/time) and jump size ``eta`` (state)."""

    xi: float
    eta: float
    region: Region | None = None


def _check_tau(tau):
    if not tau > 0:
        raise DomainError(f"time-to-go must be positive, got {tau!r}")


def _sign(x: float) -> float:
    return math.copysign(1.0, x) if x != 0 else 0.0


def optimal_control(params: ModelParams, time_to_go: float, state: float) -> ControlAction:
    """Optimal rate and dark-pool order at ``(time_to_go, state)``.

    ``xi = dw/dx / (2 lam)`` and ``eta`` brings ``|state|`` down to the free
    boundary ``beta(time_to_go)`` when it lies above it.
    """
    _check_tau(time_to_go)
    tau, x = float(time_to_go), float(state)
    region, _, k1, k2 = vs.local_coefficients(params, tau, x)
    s = _sign(x)
    xi = (2.0 * k1 * x + s * k2) / (2.0 * params.lam)
    if region is Region.STOPPING:
        return ControlAction(xi, 0.0, region)
    beta = vs.boundary(params, tau)
    return ControlAction(xi, s * (abs(x) - beta), region)


def nodp_control(params: ModelParams, time_to_go: float, state: float) -> ControlAction:
    """Optimal control when adverse selection is ignored: rate ``C(tau) x / lam``, full fill."""
    _check_tau(time_to_go)
    return ControlAction(co.c_nodp(params, time_to_go) * state / params.lam, float(state), None)


@dataclass(frozen=True)
class LinearRule:
    """Constant-rate liquidation ``xi = initial_state / horizon`` with no dark-pool orders."""

    initial_state: float
    horizon: float

    @property
    def rate(self) -> float:
        return self.initial_state / self.horizon

    def __call__(self, time_to_go: float, state: float) -> ControlAction:
        return ControlAction(self.rate, 0.0, None)


def linear_control(initial_state: float, horizon: float) -> LinearRule:
    if not horizon > 0:
        raise DomainError(f"horizon must be positive, got {horizon!r}")
    return LinearRule(float(initial_state), float(horizon))


# ----------------------------------------------------------------------------
# vectorised strategies for the simulator

class _OptimalStrategy:
    """Vectorised ``(tau, x) -> (xi, eta)`` for the optimal feedback."""

    def __init__(self, params: ModelParams):
        self.params = params
        self._scalars = lru_cache(maxsize=4)(self._tau_scalars)

    def _tau_scalars(self, tau):
        p = self.params
        beta = p.gamma * co.inv_c0(p, tau) / (2.0 * p.theta)
        outer = beta if p.alpha == 0.0 else co.x_bar_at_zero(p, tau)
        return beta, outer, co.c0(p, tau), co.c1_at_zero(p, tau), co.c2_at_zero(p, tau)

    def __call__(self, tau, x):
        p = self.params
        x = np.asarray(x, dtype=float)
        if np.ndim(tau) == 0:
            beta, outer, c0v, c10, c20 = self._scalars(float(tau))
        else:
            tau = np.asarray(tau, dtype=float)
            beta = p.gamma * np.asarray(co.inv_c0(p, tau)) / (2.0 * p.theta)
            outer = beta if p.alpha == 0.0 else np.asarray(co.x_bar_at_zero(p, tau))
            c0v = np.asarray(co.c0(p, tau))
            c10 = np.asarray(co.c1_at_zero(p, tau))
            c20 = np.asarray(co.c2_at_zero(p, tau))
        ax = np.abs(x)
        sgn = np.sign(x)
        stop = ax <= beta
        k1 = np.where(stop, c0v, c10)
        k2 = np.where(stop, 0.0, c20)
        if p.alpha > 0.0:
            mid = ~stop & (ax < outer)
            if mid.any():
                tm = np.broadcast_to(tau, x.shape)[mid]
                S = vs.invert_x_bar_newton(p, tm, ax[mid])
                k1[mid] = co._c1_general(p, tm, S)
                k2[mid] = co._c2_general(p, tm, S)
        xi = (2.0 * k1 * x + sgn * k2) / (2.0 * p.lam)
        eta = np.where(stop, 0.0, sgn * (ax - beta))
        return xi, eta


class _NoDarkPoolStrategy:
    def __init__(self, params: ModelParams):
        self.params = params

    def __call__(self, tau, x):
        x = np.asarray(x, dtype=float)
        return np.asarray(co.c_nodp(self.params, tau)) * x / self.params.lam, x.copy()


class _LinearStrategy:
    def __init__(self, rule: LinearRule):
        self.rule = rule

    def __call__(self, tau, x):
        x = np.asarray(x, dtype=float)
        return np.full(x.shape, self.rule.rate), np.zeros(x.shape)


def optimal_strategy(params: ModelParams):
    return _OptimalStrategy(params)


def nodp_strategy(params: ModelParams):
    return _NoDarkPoolStrategy(params)


def linear_strategy(initial_state: float, horizon: float):
    return _LinearStrategy(linear_control(initial_state, horizon))


def pointwise_strategy(rule):
    """Lift a scalar rule ``(tau, x) -> ControlAction`` to the vectorised interface."""

    def strategy(tau, x):
        x = np.asarray(x, dtype=float)
        taus = np.broadcast_to(np.asarray(tau, dtype=float), x.shape)
        acts = [rule(float(t), float(v)) for t, v in zip(taus, x)]
        return np.array([a.xi for a in acts], dtype=float), np.array([a.eta for a in acts], dtype=float)

    return strategy


# ----------------------------------------------------------------------------
# trajectory bound

def trajectory_bound(params: ModelParams, T: float, x: float, t: float) -> float:
    """Gronwall bound ``|x| exp(-int_0^t C1(T-s, 0)/lam ds)`` on the optimal position."""
    if not T > 0:
        raise DomainError(f"horizon must be positive, got {T!r}")
    if not 0.0 <= t < T:
        raise DomainError(f"t must lie in [0, T), got t={t!r}, T={T!r}")
    if t == 0.0:
        return abs(float(x))
    lam = params.lam
    val, _ = integrate.quad(lambda s: co.c1_at_zero(params, T - s) / lam, 0.0, t, epsabs=1e-13, epsrel=1e-12, limit=200)
    return abs(float(x)) * math.exp(-val)


def trajectory_bound_closed_form(params: ModelParams, T: float, x: float, t: float) -> float:
    """Closed form of :func:`trajectory_bound`: ``|x| exp(theta t/2) sinh(a(T-t))/sinh(a T)``, ``a = tt/2``."""
    if not 0.0 <= t < T:
        raise DomainError(f"t must lie in [0, T), got t={t!r}, T={T!r}")
    a = 0.5 * params.theta_tilde
    # sinh ratio written with decaying exponentials only
    ratio = math.exp(-a * t) * (-math.expm1(-2.0 * a * (T - t))) / (-math.expm1(-2.0 * a * T))
    return abs(float(x)) * math.exp(0.5 * params.theta * t) * ratio


# ----------------------------------------------------------------------------
# deterministic (no-fill) optimal path

def deterministic_trajectory(params: ModelParams, T: float, x: float, dt: float, force_jump: float | None = None) -> PathRecord:
    """No-fill optimal path by classical RK4 on ``state' = -xi*(T - t, state)``.

    The grid is ``0, dt, 2 dt, ...`` up to ``T - dt``. If ``force_jump`` is a
    time in ``(0, T - dt)``, a fill is placed there: the path is integrated
    exactly to that time, the optimal order ``eta*`` is executed and an extra
    node holding the post-fill state is inserted at the fill time.
    """
    if not T > 0:
        raise DomainError(f"horizon must be positive, got {T!r}")
    if not 0 < dt < T:
        raise DomainError(f"step size must satisfy 0 < dt < T, got dt={dt!r}, T={T!r}")
    n = int(math.floor((T - dt) / dt + 1e-9))
    grid = [k * dt for k in range(n + 1)]
    if force_jump is not None and not 0 < force_jump < grid[-1]:
        raise DomainError(f"forced fill time must lie in (0, {grid[-1]}), got {force_jump!r}")
    strat = optimal_strategy(params)

    def rate(t, y):
        return float(strat(T - t, np.array([y]))[0][0])

    def rk4(t, y, h):
        k1 = rate(t, y)
        k2 = rate(t + h / 2, y - h / 2 * k1)
        k3 = rate(t + h / 2, y - h / 2 * k2)
        k4 = rate(t + h, y - h * k3)
        return y - h / 6 * (k1 + 2 * k2 + 2 * k3 + k4)

    times, states = [0.0], [float(x)]
    jump_times, etas = [], []
    y = float(x)
    for k in range(n):
        t0, t1 = grid[k], grid[k + 1]
        if force_jump is not None and not jump_times and t0 <= force_jump < t1:
            if force_jump > t0:
                y = rk4(t0, y, force_jump - t0)
                times.append(float(force_jump))
                states.append(y)
            eta = float(strat(T - force_jump, np.array([y]))[1][0])
            jump_times.append(float(force_jump))
            etas.append(eta)
            y -= eta
            times.append(float(force_jump))
            states.append(y)
            y = rk4(force_jump, y, t1 - force_jump)
        else:
            y = rk4(t0, y, t1 - t0)
        times.append(t1)
        states.append(y)
    t_a = np.array(times)
    x_a = np.array(states)
    xi_a = np.array([rate(t, v) for t, v in zip(times, states)])
    h = np.diff(t_a)
    lam, al = params.lam, params.alpha
    inc = (lam * xi_a[:-1] ** 2 + al * x_a[:-1] ** 2) * h
    cum = np.concatenate([[0.0], np.cumsum(inc)])
    per_fill = params.gamma / params.theta
    for tj, e in zip(jump_times, etas):
        # charge from the post-fill node on
        cum[np.nonzero(t_a == tj)[0][-1]:] += per_fill * abs(e)
    return PathRecord(
        times=t_a, states=x_a, xi_applied=xi_a,
        jump_times=jump_times, eta_applied=etas, cumulative_cost=cum,
        running_cost=float(cum[-1]), terminal_state=float(x_a[-1]),
        impact_cost=float(np.sum(lam * xi_a[:-1] ** 2 * h)),
        risk_cost=float(np.sum(al * x_a[:-1] ** 2 * h)),
        jump_cost=per_fill * sum(abs(e) for e in etas),
    )


def crossing_time(params: ModelParams, record: PathRecord, T: float) -> float | None:
    """First grid time at which ``|state| <= beta(T - t)``, or ``None``."""
    tau = T - record.times
    beta = np.asarray(vs.boundary(params, tau))
    hit = np.nonzero(np.abs(record.states) <= beta)[0]
    return float(record.times[hit[0]]) if hit.size else None
