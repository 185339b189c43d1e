"""Numerical certificate that the candidate value function solves the HJB equation.

At each ``(T, x)`` the time derivative of ``w`` must equal the Hamiltonian

    h(xi, eta) = theta (w(T, x - eta) - w(T, x)) - w_x(T, x) xi + lam xi**2 + gamma |eta| + alpha x**2

evaluated at the optimal control, and that control must minimise ``h``.
"""

from __future__ import annotations

import json
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field

import numpy as np

from . import control
from . import value_surface as vs
from .params import DomainError, ModelParams

__all__ = [
    "HjbReport",
    "RESIDUAL_RTOL",
    "FD_RTOL",
    "FD_STEP",
    "hamiltonian",
    "hamiltonian_section",
    "default_x_grid",
    "residual_scan",
    "minimizer_scan",
]

RESIDUAL_RTOL = 1e-6
FD_RTOL = 1e-4
FD_STEP = 1e-6
MIN_TOL = 1e-10
STRICT_TOL = 1e-8


def _check_T(T):
    if not T > 0:
        raise DomainError(f"time-to-go must be positive, got {T!r}")


def hamiltonian(params: ModelParams, T: float, x: float, xi: float, eta: float) -> float:
    """``h(T, x, xi, eta)`` built from the candidate value function."""
    _check_T(T)
    here = vs.value(params, T, x)
    there = vs.value(params, T, x - eta).w
    return (params.theta * (there - here.w) - here.dw_dx * xi + params.lam * xi * xi
            + params.gamma * abs(eta) + params.alpha * x * x)


def hamiltonian_section(params: ModelParams, T: float, x: float, xi, eta):
    """``h`` on the outer product of ``xi`` and ``eta`` arrays, shape ``(len(xi), len(eta))``."""
    _check_T(T)
    xi = np.atleast_1d(np.asarray(xi, dtype=float))
    eta = np.atleast_1d(np.asarray(eta, dtype=float))
    w_here, wx_here, _ = vs.value_many(params, T, [x])
    w_there, _, _ = vs.value_many(params, T, x - eta)
    jump_part = params.theta * (w_there - w_here[0]) + params.gamma * np.abs(eta)
    flow_part = -wx_here[0] * xi + params.lam * xi * xi + params.alpha * x * x
    return flow_part[:, None] + jump_part[None, :]


def default_x_grid(params: ModelParams, T: float, n: int = 31) -> np.ndarray:
    """``n`` points on ``[0, 2 x_bar(T, 0)]`` and their mirror images (0 once)."""
    top = 2.0 * (vs.boundary(params, T) if params.alpha == 0.0 else vs.outer_threshold(params, T))
    pos = np.linspace(0.0, top, n)
    return np.concatenate([-pos[:0:-1], pos])


def _default_grids(params, T, x, ctrl):
    beta = vs.boundary(params, T)
    xs = max(abs(ctrl.xi), 1.0)
    xi_grid = ctrl.xi + xs * np.linspace(-1.0, 1.0, 41)
    span = max(abs(x), beta, 1e-3)
    eta_grid = np.linspace(min(0.0, x) - span, max(0.0, x) + span, 81)
    return xi_grid, eta_grid


def minimizer_scan(params: ModelParams, T: float, x: float, xi_grid=None, eta_grid=None) -> int:
    """Count grid controls that beat, or fail to be strictly worse than, ``(xi*, eta*)``.

    A violation is a grid point with ``h < h* - 1e-10``, or a point farther than
    one grid step from the optimum in either coordinate with ``h <= h* + 1e-8``.
    """
    _check_T(T)
    ctrl = control.optimal_control(params, T, x)
    dxi, deta = _default_grids(params, T, x, ctrl)
    xi_grid = dxi if xi_grid is None else np.asarray(xi_grid, dtype=float)
    eta_grid = deta if eta_grid is None else np.asarray(eta_grid, dtype=float)
    h_star = hamiltonian(params, T, x, ctrl.xi, ctrl.eta)
    H = hamiltonian_section(params, T, x, xi_grid, eta_grid)
    res_xi = np.max(np.diff(np.sort(xi_grid))) if xi_grid.size > 1 else 0.0
    res_eta = np.max(np.diff(np.sort(eta_grid))) if eta_grid.size > 1 else 0.0
    far = (np.abs(xi_grid - ctrl.xi)[:, None] > res_xi) | (np.abs(eta_grid - ctrl.eta)[None, :] > res_eta)
    beaten = H < h_star - MIN_TOL
    flat = far & (H <= h_star + STRICT_TOL)
    return int(np.sum(beaten | flat))


@dataclass
class HjbReport:
    """Outcome of a residual scan."""

    params: dict
    grid: list
    residuals: list
    tolerances: list
    fd_residuals: list
    minimizer_violations: int
    max_residual: float
    max_scaled_residual: float
    max_fd_relative: float
    passed: bool
    failures: list = field(default_factory=list)

    def to_json(self) -> str:
        return json.dumps(asdict(self), indent=2)


def _point(params, T, x, check_minimizer):
    vp = vs.value(params, T, x)
    ctrl = control.optimal_control(params, T, x)
    h = hamiltonian(params, T, x, ctrl.xi, ctrl.eta)
    res = abs(vp.dw_dT - h)
    fd = (vs.value(params, T + FD_STEP, x).w - vs.value(params, T - FD_STEP, x).w) / (2.0 * FD_STEP)
    fd_rel = abs(fd - vp.dw_dT) / max(1.0, abs(vp.dw_dT))
    viol = minimizer_scan(params, T, x) if check_minimizer else 0
    return res, RESIDUAL_RTOL * (1.0 + abs(vp.dw_dT)), fd_rel, viol


def residual_scan(params: ModelParams, T_grid, x_grid=None, check_minimizer: bool = True, threads: int = 1) -> HjbReport:
    """Scan ``|dw/dT - h(T, x, xi*, eta*)|`` over a grid.

    ``x_grid`` is an array shared by all ``T``, a callable ``T -> array``, or
    ``None`` for :func:`default_x_grid`. The closed-form time derivative is
    also compared with a centred difference of ``w`` at step ``1e-6``.
    """
    pts = []
    for T in T_grid:
        _check_T(T)
        xs = default_x_grid(params, T) if x_grid is None else (x_grid(T) if callable(x_grid) else x_grid)
        pts.extend((float(T), float(x)) for x in xs)

    def run(pt):
        return _point(params, pt[0], pt[1], check_minimizer)

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            out = list(pool.map(run, pts))
    else:
        out = [run(p) for p in pts]
    residuals = [o[0] for o in out]
    tols = [o[1] for o in out]
    fds = [o[2] for o in out]
    viol = sum(o[3] for o in out)
    failures = [
        {"T": p[0], "x": p[1], "residual": r, "tolerance": t, "fd_relative": f}
        for p, r, t, f in zip(pts, residuals, tols, fds)
        if r > t or f > FD_RTOL
    ]
    scaled = [r / t * RESIDUAL_RTOL for r, t in zip(residuals, tols)]
    return HjbReport(
        params=params.as_dict(),
        grid=[list(p) for p in pts],
        residuals=residuals,
        tolerances=tols,
        fd_residuals=fds,
        minimizer_violations=int(viol),
        max_residual=max(residuals, default=0.0),
        max_scaled_residual=max(scaled, default=0.0),
        max_fd_relative=max(fds, default=0.0),
        passed=not failures and viol == 0,
        failures=failures,
    )
