"""Closed-form coefficients of the quasi-polynomial value function.

For time-to-go ``T`` and interpolation index ``S`` in ``[0, T]`` the value
function is ``C1(T,S) x**2 + C2(T,S) |x| + C3(T,S)``; ``x_bar(T,S)`` is the
no-jump optimal position that reaches the free boundary when ``S`` units of
time are left. Every function here is vectorised over ``T`` and ``S``
(except :func:`c3`, which is an adaptive quadrature) and pure.

All hyperbolic expressions are rearranged so that they never form
``sinh``/``cosh`` of large arguments or subtract nearly equal large numbers:
``coth(z) - 1`` goes through ``expm1``, ``cosh(z) - exp(-h t)`` through
``sinh(z/2)**2`` and ``expm1``, and ratios are divided through by ``cosh``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import integrate

from .params import DomainError, ModelParams

__all__ = [
    "CoefficientFrame",
    "c0",
    "c0_rate",
    "inv_c0",
    "c_nodp",
    "mu_kappa",
    "c1",
    "c2",
    "c3",
    "c3_many",
    "x_bar",
    "c1_at_zero",
    "c2_at_zero",
    "c3_at_zero",
    "x_bar_at_zero",
    "coeff_frame",
    "coeff_frame_riskneutral",
    "coefficient_rates",
]

C3_EPSABS = 1e-12
C3_EPSREL = 1e-12


@dataclass(frozen=True)
class CoefficientFrame:
    """Coefficients ``(C1, C2, C3)`` and trajectory ``x_bar`` at ``(T, S)``."""

    T: float
    S: float
    c1: float
    c2: float
    c3: float
    x_bar: float


def _check_T(T):
    if np.any(~(np.asarray(T) > 0)):
        raise DomainError(f"time-to-go must be positive, got {T!r}")


def _coth_m1(z):
    """``coth(z) - 1 = 2 exp(-2z) / (1 - exp(-2z))`` for ``z > 0``, overflow-free."""
    e = np.exp(-2.0 * z)
    return 2.0 * e / -np.expm1(-2.0 * z)


def _scalar(v):
    return float(v) if np.ndim(v) == 0 else v


# ----------------------------------------------------------------------------
# building blocks

def _cosh_gap_ratio(a, h, tau):
    """``(cosh(a tau) - exp(-h tau)) / cosh(a tau)`` without cancellation."""
    z = a * tau
    zs = np.minimum(z, 20.0)
    small = (2.0 * np.sinh(0.5 * zs) ** 2 - np.expm1(-h * tau)) / np.cosh(zs)
    large = 1.0 - 2.0 * np.exp(-(a + h) * tau) / (1.0 + np.exp(-2.0 * z))
    return np.where(z < 20.0, small, large)


def c0(params: ModelParams, T):
    """Value coefficient without dark pool, ``sqrt(lam alpha) coth(sqrt(alpha/lam) T)``.

    For ``alpha == 0`` this is ``lam / T``.
    """
    _check_T(T)
    T = np.asarray(T, dtype=float)
    if params.alpha == 0.0:
        return _scalar(params.lam / T)
    k = math.sqrt(params.alpha / params.lam)
    s = math.sqrt(params.alpha * params.lam)
    return _scalar(s * (1.0 + _coth_m1(k * T)))


def inv_c0(params: ModelParams, S):
    """``1 / C0(S)``, extended by continuity with value 0 at ``S = 0``."""
    S = np.asarray(S, dtype=float)
    if params.alpha == 0.0:
        return _scalar(S / params.lam)
    k = math.sqrt(params.alpha / params.lam)
    return _scalar(np.tanh(k * S) / math.sqrt(params.alpha * params.lam))


def c0_rate(params: ModelParams, T):
    """Derivative of ``C0`` in ``T`` (Riccati right-hand side ``alpha - C0**2/lam``)."""
    v = np.asarray(c0(params, T))
    return _scalar(params.alpha - v * v / params.lam)


def c_nodp(params: ModelParams, T):
    """Value coefficient of the problem without adverse selection (``gamma = 0``).

    ``C(T) = lam*tt/2 * coth(tt*T/2) - lam*theta/2`` with ``tt = theta_tilde``.
    """
    _check_T(T)
    return c1_at_zero(params, T)


def _recip_mu(params, inv):
    """``1/mu`` and ``1 - 1/mu`` as functions of ``1/C0(S)``.

    ``mu = (2 C0 + theta lam)/(tt lam)``. ``1 - 1/mu`` uses
    ``lam (tt - theta) = 4 alpha / (tt + theta)`` to avoid cancellation.
    """
    lam, th, tt = params.lam, params.theta, params.theta_tilde
    denom = 2.0 + th * lam * inv
    recip = tt * lam * inv / denom
    one_minus = (2.0 - 4.0 * params.alpha * inv / (tt + th)) / denom
    return recip, one_minus


def _kappa_from_inv(params, inv):
    recip, one_minus = _recip_mu(params, inv)
    # arcoth(mu) = artanh(1/mu) = 0.5*log1p(2 (1/mu) / (1 - 1/mu))
    return 0.5 * np.log1p(2.0 * recip / one_minus)


def mu_kappa(params: ModelParams, S):
    """Return ``(mu(S), kappa(S))`` with ``kappa = arcoth(mu)``.

    Requires ``S > 0`` and ``alpha > 0``.
    """
    if params.alpha == 0.0:
        raise DomainError("mu_kappa is defined for alpha > 0 only")
    if np.any(~(np.asarray(S) > 0)):
        raise DomainError(f"S must be positive, got {S!r}")
    inv = np.asarray(inv_c0(params, S))
    recip, one_minus = _recip_mu(params, inv)
    mu = 1.0 / recip
    kappa = 0.5 * np.log1p(2.0 * recip / one_minus)
    return _scalar(mu), _scalar(kappa)


# ----------------------------------------------------------------------------
# alpha > 0 closed forms, valid on 0 <= S <= T (S = 0 through 1/C0(0) = 0)

def _c1_general(params, T, S):
    lam, th, tt = params.lam, params.theta, params.theta_tilde
    a = 0.5 * tt
    tau = T - S
    kappa = _kappa_from_inv(params, inv_c0(params, S))
    # lam*a*coth(z) - lam*th/2 = lam*a*(coth(z) - 1) + 2 alpha/(tt + th)
    return lam * a * _coth_m1(a * tau + kappa) + 2.0 * params.alpha / (tt + th)


def _c2_general(params, T, S):
    lam, th, tt, al, ga = params.lam, params.theta, params.theta_tilde, params.alpha, params.gamma
    a, h = 0.5 * tt, 0.5 * th
    tau = T - S
    inv = np.asarray(inv_c0(params, S))
    t = np.tanh(a * tau)
    q = _cosh_gap_ratio(a, h, tau)
    num = (4.0 * al * inv - 2.0 * th) * t / tt + 2.0 * q
    den = (2.0 + th * lam * inv) * t / (tt * lam) + inv
    return ga / (2.0 * al) * num / den


def _x_bar_general(params, T, S):
    lam, th, tt, al, ga = params.lam, params.theta, params.theta_tilde, params.alpha, params.gamma
    a, h = 0.5 * tt, 0.5 * th
    tau = T - S
    inv = np.asarray(inv_c0(params, S))
    A = ga / (th * tt * lam) + ga * inv / (2.0 * tt) + th * ga / (2.0 * tt * al)
    B = ga * inv / (2.0 * th) + ga / (2.0 * al)
    grow = np.exp((a - h) * tau)
    decay = np.exp(-(a + h) * tau)
    return 0.5 * ((A + B) * grow + (B - A) * decay) - ga / (2.0 * al)



def _x_bar_general_dS(params, T, S):
    """``x_bar(T, S)`` and its derivative in ``S`` (used by Newton inversion)."""
    lam, th, tt, al, ga = params.lam, params.theta, params.theta_tilde, params.alpha, params.gamma
    a, h = 0.5 * tt, 0.5 * th
    tau = T - S
    t = np.tanh(math.sqrt(al / lam) * np.asarray(S, dtype=float))
    inv = t / math.sqrt(al * lam)
    dinv = (1.0 - t * t) / lam
    A = ga / (th * tt * lam) + ga * inv / (2.0 * tt) + th * ga / (2.0 * tt * al)
    B = ga * inv / (2.0 * th) + ga / (2.0 * al)
    dA = ga * dinv / (2.0 * tt)
    dB = ga * dinv / (2.0 * th)
    grow = np.exp((a - h) * tau)
    decay = np.exp(-(a + h) * tau)
    xb = 0.5 * ((A + B) * grow + (B - A) * decay) - ga / (2.0 * al)
    d = 0.5 * ((dA + dB) * grow + (dB - dA) * decay) - 0.5 * ((a - h) * (A + B) * grow - (a + h) * (B - A) * decay)
    return xb, d

# ----------------------------------------------------------------------------
# alpha == 0 closed forms

def _c1_rn(params, T, S):
    lam, th = params.lam, params.theta
    tau = T - S
    return lam * th * np.exp(-th * tau) / (th * S - np.expm1(-th * tau))


def _c2_rn(params, T, S):
    th, ga = params.theta, params.gamma
    tau = T - S
    num = -(1.0 + th * S) * np.expm1(-th * tau) / th - tau * np.exp(-th * tau)
    return ga * num / (th * S - np.expm1(-th * tau))


def _x_bar_rn(params, T, S):
    return params.gamma * (np.asarray(T) + 0.0 * np.asarray(S)) / (2.0 * params.theta * params.lam)


def _check_TS(T, S):
    _check_T(T)
    T_, S_ = np.broadcast_arrays(np.asarray(T, dtype=float), np.asarray(S, dtype=float))
    if np.any((S_ < 0) | (S_ > T_)):
        raise DomainError(f"interpolation index must satisfy 0 <= S <= T, got T={T!r}, S={S!r}")
    return T_, S_


def c1(params: ModelParams, T, S):
    """Quadratic coefficient ``C1(T, S)``; strictly increasing in ``S``."""
    T, S = _check_TS(T, S)
    f = _c1_rn if params.alpha == 0.0 else _c1_general
    return _scalar(f(params, T, S))


def c2(params: ModelParams, T, S):
    """Linear coefficient ``C2(T, S)`` (multiplies ``|x|``)."""
    T, S = _check_TS(T, S)
    f = _c2_rn if params.alpha == 0.0 else _c2_general
    return _scalar(f(params, T, S))


def x_bar(params: ModelParams, T, S):
    """No-jump optimal position with ``S`` time units left at the boundary crossing."""
    T, S = _check_TS(T, S)
    f = _x_bar_rn if params.alpha == 0.0 else _x_bar_general
    return _scalar(f(params, T, S))


def c3(params: ModelParams, T: float, S: float) -> float:
    """Constant coefficient ``C3(T, S)`` by adaptive Gauss-Kronrod quadrature.

    ``C3(T,S) = -int_S^T exp(-theta (T-u)) (gamma**2/(4 theta C0(u)) + C2(u,S)**2/(4 lam)) du``
    """
    _check_TS(T, S)
    T, S = float(T), float(S)
    if T == S:
        return 0.0
    lam, th, ga = params.lam, params.theta, params.gamma
    c2f = _c2_rn if params.alpha == 0.0 else _c2_general

    def integrand(u):
        forcing = ga * ga * inv_c0(params, u) / (4.0 * th) + c2f(params, u, S) ** 2 / (4.0 * lam)
        return math.exp(-th * (T - u)) * forcing

    val, _ = integrate.quad(integrand, S, T, epsabs=C3_EPSABS, epsrel=C3_EPSREL, limit=200)
    return -val


def c3_many(params: ModelParams, T: float, S) -> np.ndarray:
    """:func:`c3` for many ``S`` at one ``T`` in a single vector quadrature.

    Each interval ``[S, T]`` is mapped onto ``[0, 1]`` and all integrands are
    integrated together by adaptive Gauss-Kronrod under the max norm.
    """
    S = np.atleast_1d(np.asarray(S, dtype=float))
    _check_TS(T, S)
    T = float(T)
    out = np.zeros(S.shape)
    live = S < T
    if not live.any():
        return out
    Sl = S[live]
    L = T - Sl
    lam, th, ga = params.lam, params.theta, params.gamma
    c2f = _c2_rn if params.alpha == 0.0 else _c2_general

    def integrand(v):
        u = Sl + v * L
        forcing = ga * ga * np.asarray(inv_c0(params, u)) / (4.0 * th) + c2f(params, u, Sl) ** 2 / (4.0 * lam)
        return L * np.exp(-th * (T - u)) * forcing

    val, _ = integrate.quad_vec(integrand, 0.0, 1.0, epsabs=C3_EPSABS, epsrel=C3_EPSREL, norm="max", limit=400)
    out[live] = -val
    return out

# ----------------------------------------------------------------------------
# dedicated S = 0 limits

def c1_at_zero(params: ModelParams, T):
    """``C1(T, 0) = lam*tt/2 * coth(tt*T/2) - lam*theta/2``."""
    _check_T(T)
    T = np.asarray(T, dtype=float)
    lam, th, tt = params.lam, params.theta, params.theta_tilde
    a = 0.5 * tt
    return _scalar(lam * a * _coth_m1(a * T) + 2.0 * params.alpha / (tt + th))


def c2_at_zero(params: ModelParams, T):
    """``C2(T, 0) = gamma lam/(2 alpha) (tt coth(tt T/2) - tt exp(-theta T/2)/sinh(tt T/2) - theta)``.

    For ``alpha == 0`` this is ``gamma/theta - gamma T/(exp(theta T) - 1)``.
    """
    _check_T(T)
    T = np.asarray(T, dtype=float)
    lam, th, tt, al, ga = params.lam, params.theta, params.theta_tilde, params.alpha, params.gamma
    if al == 0.0:
        return _scalar(_c2_rn(params, T, 0.0))
    a, h = 0.5 * tt, 0.5 * th
    # (cosh - exp(-hT))/sinh = q / tanh
    ratio = _cosh_gap_ratio(a, h, T) / np.tanh(a * T)
    return _scalar(ga * lam / (2.0 * al) * (tt * ratio - th))


def c3_at_zero(params: ModelParams, T: float) -> float:
    """``C3(T, 0)`` by quadrature of its integral representation."""
    return c3(params, T, 0.0)


def x_bar_at_zero(params: ModelParams, T):
    """``x_bar(T, 0)``: positions at or above it never reach the boundary without a fill."""
    _check_T(T)
    T = np.asarray(T, dtype=float)
    lam, th, tt, al, ga = params.lam, params.theta, params.theta_tilde, params.alpha, params.gamma
    if al == 0.0:
        return _scalar(_x_bar_rn(params, T, 0.0))
    a, h = 0.5 * tt, 0.5 * th
    A = ga / (tt * th * lam) + th * ga / (2.0 * tt * al)
    B = ga / (2.0 * al)
    grow = np.exp((a - h) * T)
    decay = np.exp(-(a + h) * T)
    return _scalar(0.5 * ((A + B) * grow + (B - A) * decay) - B)


# ----------------------------------------------------------------------------
# frames

def coeff_frame(params: ModelParams, T: float, S: float) -> CoefficientFrame:
    """All four coefficients at a single ``(T, S)``.

    ``S == 0`` uses the limit formulas and ``S == T`` returns the initial
    conditions exactly. ``alpha == 0`` is delegated to
    :func:`coeff_frame_riskneutral`.
    """
    if params.alpha == 0.0:
        return coeff_frame_riskneutral(params, T, S)
    _check_TS(T, S)
    T, S = float(T), float(S)
    if S == T:
        c0T = c0(params, T)
        return CoefficientFrame(T, S, c0T, 0.0, 0.0, params.gamma / (2.0 * params.theta * c0T))
    if S == 0.0:
        return CoefficientFrame(
            T, S, c1_at_zero(params, T), c2_at_zero(params, T), c3_at_zero(params, T), x_bar_at_zero(params, T)
        )
    return CoefficientFrame(
        T, S,
        float(_c1_general(params, T, S)),
        float(_c2_general(params, T, S)),
        c3(params, T, S),
        float(_x_bar_general(params, T, S)),
    )


def coeff_frame_riskneutral(params: ModelParams, T: float, S: float) -> CoefficientFrame:
    """Coefficients for ``alpha == 0``, where ``x_bar(T, S) = gamma T/(2 theta lam)``."""
    if params.alpha != 0.0:
        raise DomainError("coeff_frame_riskneutral requires alpha == 0")
    _check_TS(T, S)
    T, S = float(T), float(S)
    xb = params.gamma * T / (2.0 * params.theta * params.lam)
    if S == T:
        return CoefficientFrame(T, S, params.lam / T, 0.0, 0.0, xb)
    return CoefficientFrame(
        T, S, float(_c1_rn(params, T, S)), float(_c2_rn(params, T, S)), c3(params, T, S), xb
    )


def coefficient_rates(params: ModelParams, frame: CoefficientFrame):
    """Right-hand sides of the coefficient ODEs in ``T`` at a frame.

    Returns ``(dC1/dT, dC2/dT, dC3/dT, dx_bar/dT)``.
    """
    lam, th, al, ga = params.lam, params.theta, params.alpha, params.gamma
    k1, k2, k3 = frame.c1, frame.c2, frame.c3
    d1 = al - k1 * k1 / lam - th * k1
    d2 = ga - k2 * (k1 / lam + th)
    d3 = -th * k3 - ga * ga * float(inv_c0(params, frame.T)) / (4.0 * th) - k2 * k2 / (4.0 * lam)
    dx = k1 * frame.x_bar / lam + k2 / (2.0 * lam)
    return d1, d2, d3, dx
