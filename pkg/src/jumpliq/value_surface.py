"""Free boundary, interpolation index and the candidate value function."""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np

from . import coefficients as co
from .params import DomainError, ModelParams

__all__ = [
    "Region",
    "ValuePoint",
    "MIN_TIME_TO_GO",
    "boundary",
    "outer_threshold",
    "g_index",
    "invert_x_bar",
    "invert_x_bar_newton",
    "local_coefficients",
    "value",
    "value_riskneutral",
    "value_many",
]

MIN_TIME_TO_GO = 1e-9
BISECTION_MAX_ITER = 200
BISECTION_RTOL = 1e-12


class Region(str, enum.Enum):
    STOPPING = "stopping"
    INTERPOLATION = "interpolation"
    OUTER = "outer"


@dataclass(frozen=True)
class ValuePoint:
    T: float
    x: float
    s_index: float
    region: Region
    w: float
    dw_dx: float
    d2w_dx2: float
    dw_dT: float

    def as_dict(self) -> dict:
        return {
            "T": self.T, "x": self.x, "s_index": self.s_index, "region": self.region.value,
            "w": self.w, "dw_dx": self.dw_dx, "d2w_dx2": self.d2w_dx2, "dw_dT": self.dw_dT,
        }


def boundary(params: ModelParams, T):
    """Free boundary ``beta(T) = gamma / (2 theta C0(T))``; no dark-pool order at or below it."""
    co._check_T(T)
    return co._scalar(params.gamma * np.asarray(co.inv_c0(params, T)) / (2.0 * params.theta))


def outer_threshold(params: ModelParams, T):
    """``x_bar(T, 0)``; at or above it the value function is the ``S = 0`` polynomial."""
    return co.x_bar_at_zero(params, T)


def invert_x_bar(params: ModelParams, T, target):
    """Solve ``x_bar(T, S) = target`` for ``S`` in ``[0, T]`` by bisection.

    Vectorised over ``T`` and ``target``; each element is bisected on its own
    bracket and frozen once converged, so an element's result never depends
    on its neighbours. Targets are assumed to lie in
    ``[x_bar(T, T), x_bar(T, 0)]``.
    """
    T, target = np.broadcast_arrays(np.asarray(T, dtype=float), np.asarray(target, dtype=float))
    lo = np.zeros(T.shape)
    hi = T.copy()
    mid = 0.5 * (lo + hi)
    tol = BISECTION_RTOL * np.maximum(1.0, np.abs(target))
    active = np.ones(T.shape, dtype=bool)
    for _ in range(BISECTION_MAX_ITER):
        if not active.any():
            break
        idx = np.nonzero(active)[0] if T.ndim else None
        if T.ndim == 0:
            m = 0.5 * (lo + hi)
            f = co._x_bar_general(params, T, m) - target
            mid = m
            if abs(f) <= tol or hi - lo <= 4 * np.spacing(T):
                active = np.zeros((), dtype=bool)
            elif f > 0:  # x_bar decreases in S: too large means S too small
                lo = m
            else:
                hi = m
            continue
        m = 0.5 * (lo[idx] + hi[idx])
        f = co._x_bar_general(params, T[idx], m) - target[idx]
        mid[idx] = m
        done = (np.abs(f) <= tol[idx]) | (hi[idx] - lo[idx] <= 4 * np.spacing(T[idx]))
        up = ~done & (f > 0)
        dn = ~done & (f <= 0)
        lo[idx[up]] = m[up]
        hi[idx[dn]] = m[dn]
        active[idx[done]] = False
    return co._scalar(mid)



def invert_x_bar_newton(params: ModelParams, T, target, max_iter: int = 60):
    """Same root as :func:`invert_x_bar`, by bracketed Newton iteration.

    Uses the analytic ``S``-derivative of ``x_bar`` and falls back to bisection
    whenever a Newton step leaves the bracket. Converges in a handful of
    iterations, which matters inside the Monte Carlo loop. Elements freeze
    independently once converged.
    """
    T, target = np.broadcast_arrays(np.atleast_1d(np.asarray(T, dtype=float)),
                                    np.atleast_1d(np.asarray(target, dtype=float)))
    lo = np.zeros(T.shape)
    hi = T.copy()
    S = 0.5 * hi
    tol = BISECTION_RTOL * np.maximum(1.0, np.abs(target))
    idx = np.arange(T.size)
    for _ in range(max_iter):
        if idx.size == 0:
            break
        s = S[idx]
        f, d = co._x_bar_general_dS(params, T[idx], s)
        f = f - target[idx]
        done = np.abs(f) <= tol[idx]
        # x_bar decreases in S
        pos = f > 0
        l = np.where(pos, s, lo[idx])
        h = np.where(pos, hi[idx], s)
        with np.errstate(divide="ignore", invalid="ignore"):
            step = s - f / d
        ok = (step > l) & (step < h) & np.isfinite(step)
        new = np.where(ok, step, 0.5 * (l + h))
        done |= (h - l) <= 4 * np.spacing(T[idx])
        lo[idx], hi[idx] = l, h
        S[idx] = np.where(done, s, new)
        idx = idx[~done]
    return S

def g_index(params: ModelParams, T: float, x: float) -> float:
    """Interpolation index ``S = g(T, x)`` in ``[0, T]``.

    ``T`` in the stopping region ``|x| <= beta(T)``, ``0`` in the outer region
    ``|x| >= x_bar(T, 0)`` and the unique root of ``x_bar(T, S) = |x|`` in
    between. Requires ``alpha > 0``.
    """
    if params.alpha == 0.0:
        raise DomainError("g_index requires alpha > 0; alpha == 0 has only two regions")
    co._check_T(T)
    ax = abs(float(x))
    if ax <= boundary(params, T):
        return float(T)
    if ax >= outer_threshold(params, T):
        return 0.0
    return float(invert_x_bar(params, float(T), ax))


def local_coefficients(params: ModelParams, T: float, x: float):
    """Region, index and ``(C1, C2)`` governing ``(T, x)``; skips the C3 quadrature."""
    ax = abs(x)
    beta = boundary(params, T)
    if ax <= beta:
        return Region.STOPPING, T, co.c0(params, T), 0.0
    if params.alpha == 0.0:
        return Region.OUTER, 0.0, co.c1_at_zero(params, T), co.c2_at_zero(params, T)
    if ax >= outer_threshold(params, T):
        return Region.OUTER, 0.0, co.c1_at_zero(params, T), co.c2_at_zero(params, T)
    S = float(invert_x_bar(params, T, ax))
    return Region.INTERPOLATION, S, float(co._c1_general(params, T, S)), float(co._c2_general(params, T, S))


def _check_value_T(T):
    if not T > 0:
        raise DomainError(f"time-to-go must be positive, got {T!r}")
    if T < MIN_TIME_TO_GO:
        raise DomainError(f"time-to-go {T!r} is below {MIN_TIME_TO_GO}: the value function is singular at 0")


def value(params: ModelParams, T: float, x: float) -> ValuePoint:
    """Value function with its first and second derivatives at ``(T, x)``.

    Dispatches to :func:`value_riskneutral` when ``alpha == 0``.
    """
    if params.alpha == 0.0:
        return value_riskneutral(params, T, x)
    _check_value_T(T)
    T, x = float(T), float(x)
    region, S, k1, k2 = local_coefficients(params, T, x)
    sgn = math.copysign(1.0, x) if x != 0 else 0.0
    if region is Region.STOPPING:
        return ValuePoint(T, x, T, region, k1 * x * x, 2.0 * k1 * x, 2.0 * k1, co.c0_rate(params, T) * x * x)
    frame = co.CoefficientFrame(T, S, k1, k2, co.c3(params, T, S), 0.0)
    d1, d2, d3, _ = co.coefficient_rates(params, frame)
    ax = abs(x)
    return ValuePoint(
        T, x, S, region,
        k1 * x * x + k2 * ax + frame.c3,
        2.0 * k1 * x + sgn * k2,
        2.0 * k1,
        d1 * x * x + d2 * ax + d3,
    )


def value_riskneutral(params: ModelParams, T: float, x: float) -> ValuePoint:
    """Two-region value function for ``alpha == 0``.

    ``(lam/T) x**2`` up to the linear boundary ``gamma T/(2 theta lam)`` and the
    ``S = 0`` polynomial beyond; ``w`` and ``dw/dx`` are continuous there while
    the second derivative jumps from ``2 lam/T`` to ``2 C1(T, 0)``.
    """
    if params.alpha != 0.0:
        raise DomainError("value_riskneutral requires alpha == 0")
    _check_value_T(T)
    T, x = float(T), float(x)
    lam = params.lam
    ax = abs(x)
    if ax <= boundary(params, T):
        return ValuePoint(T, x, T, Region.STOPPING, lam / T * x * x, 2.0 * lam / T * x, 2.0 * lam / T, -lam / (T * T) * x * x)
    frame = co.coeff_frame_riskneutral(params, T, 0.0)
    d1, d2, d3, _ = co.coefficient_rates(params, frame)
    sgn = math.copysign(1.0, x)
    return ValuePoint(
        T, x, 0.0, Region.OUTER,
        frame.c1 * x * x + frame.c2 * ax + frame.c3,
        2.0 * frame.c1 * x + sgn * frame.c2,
        2.0 * frame.c1,
        d1 * x * x + d2 * ax + d3,
    )


def value_many(params: ModelParams, T: float, x):
    """``(w, dw/dx, region codes)`` for an array of positions at one ``T``.

    Region codes are 0 (stopping), 1 (interpolation) and 2 (outer). Uses the
    same bisection as :func:`g_index` and one vector quadrature for ``C3``.
    """
    _check_value_T(T)
    T = float(T)
    x = np.atleast_1d(np.asarray(x, dtype=float))
    ax = np.abs(x)
    sgn = np.sign(x)
    beta = boundary(params, T)
    outer_x = beta if params.alpha == 0.0 else outer_threshold(params, T)
    code = np.where(ax <= beta, 0, np.where(ax >= outer_x, 2, 1))
    S = np.where(code == 0, T, 0.0)
    mid = code == 1
    if mid.any():
        S[mid] = invert_x_bar(params, np.full(int(mid.sum()), T), ax[mid])
    k1 = np.empty_like(x)
    k2 = np.zeros_like(x)
    k3 = np.zeros_like(x)
    k1[code == 0] = co.c0(params, T)
    out = code == 2
    if out.any():
        f = co.coeff_frame(params, T, 0.0)
        k1[out], k2[out], k3[out] = f.c1, f.c2, f.c3
    if mid.any():
        k1[mid] = co._c1_general(params, T, S[mid])
        k2[mid] = co._c2_general(params, T, S[mid])
        k3[mid] = co.c3_many(params, T, S[mid])
    w = k1 * x * x + k2 * ax + k3
    return w, 2.0 * k1 * x + sgn * k2, code
