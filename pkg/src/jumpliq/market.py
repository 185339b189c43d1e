"""Dark-pool liquidation layer: prices, realised proceeds and the cost identity.

The fundamental price ``P_bar`` is an arithmetic Brownian motion started at
``p0`` with variance ``sigma**2 t``. The quoted price adds the cumulative
adverse-selection term ``Gamma (N_sell(t) - N_buy(t))``. Fills of a seller
coincide with sell-side arrivals, which push the price up by ``Gamma`` right
after the fill. The seller's order therefore misses that move, which is the
source of the adverse-selection cost ``Gamma |eta|``.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass

import numpy as np

from . import control
from .params import DomainError, ModelParams
from .records import PathRecord
from .simulator import PRICE_STREAM, Observer, SimConfig, path_rng, simulate_batch

__all__ = [
    "MarketParams",
    "PricePath",
    "ProceedsRecord",
    "GridMismatchError",
    "MarketBatch",
    "to_model_params",
    "simulate_price",
    "realized_proceeds",
    "simulate_market",
    "identity_report",
    "report_json",
]


_PROCEEDS_HEADER = "proceeds,impact_cost,adverse_selection_cost,risk_penalty"


class GridMismatchError(ValueError):
    """Path and price series do not share a time grid or fill times."""


@dataclass(frozen=True)
class MarketParams:
    """Market description.

    Attributes:
        Gamma: adverse-selection price jump per fill.
        sigma: volatility of the fundamental price (price/sqrt(time)).
        alpha_tilde: risk aversion.
        lam: temporary impact.
        theta: dark-pool fill intensity.
        p0: initial fundamental price.
    """

    Gamma: float
    sigma: float
    alpha_tilde: float
    lam: float
    theta: float
    p0: float = 100.0

    def __post_init__(self):
        for name in ("Gamma", "lam", "theta", "p0"):
            v = getattr(self, name)
            if not (math.isfinite(v) and v > 0):
                raise DomainError(f"{name} must be a positive finite number, got {v!r}")
        for name in ("sigma", "alpha_tilde"):
            v = getattr(self, name)
            if not (math.isfinite(v) and v >= 0):
                raise DomainError(f"{name} must be nonnegative and finite, got {v!r}")


def to_model_params(m: MarketParams) -> ModelParams:
    """``(lam, gamma = theta Gamma, theta, alpha = alpha_tilde sigma**2)``."""
    return ModelParams(lam=m.lam, gamma=m.theta * m.Gamma, theta=m.theta, alpha=m.alpha_tilde * m.sigma**2)


@dataclass
class PricePath:
    """Fundamental and quoted price at the nodes ``times``."""

    times: np.ndarray
    p_bar: np.ndarray
    p_tilde: np.ndarray
    sell_times: np.ndarray
    buy_times: np.ndarray
    Gamma: float

    def jump_level(self, t, strict=False):
        """``Gamma (N_sell - N_buy)`` counting arrivals ``<= t`` (``< t`` if strict)."""
        side = "left" if strict else "right"
        return self.Gamma * (np.searchsorted(self.sell_times, t, side) - np.searchsorted(self.buy_times, t, side))

    def to_csv(self, path) -> None:
        rows = np.column_stack([self.times, self.p_bar, self.p_tilde])
        np.savetxt(path, rows, delimiter=",", header="t,p_bar,p_tilde", comments="", fmt="%.17g")


@dataclass(frozen=True)
class ProceedsRecord:
    proceeds: float
    impact_cost: float
    adverse_selection_cost: float
    risk_penalty: float

    def to_csv(self, path) -> None:
        row = np.array([[self.proceeds, self.impact_cost, self.adverse_selection_cost, self.risk_penalty]])
        np.savetxt(path, row, delimiter=",", header=_PROCEEDS_HEADER, comments="", fmt="%.17g")


def simulate_price(m: MarketParams, jump_times_sell, jump_times_buy, times, rng: np.random.Generator) -> PricePath:
    """Price path on the nodes ``times`` (starting at 0) given both arrival streams."""
    times = np.asarray(times, dtype=float)
    if times.ndim != 1 or times.size == 0 or times[0] != 0.0 or np.any(np.diff(times) < 0):
        raise GridMismatchError("times must be a nondecreasing grid starting at 0")
    dts = np.diff(times)
    z = rng.standard_normal(dts.size)
    p_bar = m.p0 + np.concatenate([[0.0], np.cumsum(m.sigma * np.sqrt(dts) * z)])
    sell = np.sort(np.asarray(jump_times_sell, dtype=float))
    buy = np.sort(np.asarray(jump_times_buy, dtype=float))
    pp = PricePath(times, p_bar, p_bar, sell, buy, m.Gamma)
    pp.p_tilde = p_bar + pp.jump_level(times)
    return pp


def realized_proceeds(m: MarketParams, path: PathRecord, price: PricePath) -> ProceedsRecord:
    """Proceeds and cost decomposition of a recorded path under a price path.

    The position moves at rate ``xi_applied[k]`` on ``[times[k], times[k+1])``
    and fills execute at ``P_tilde`` just before the arrival. The fundamental
    price is frozen on each segment and the adverse-selection term is
    integrated exactly.
    """
    t = np.asarray(path.times, dtype=float)
    if t.shape != price.times.shape or not np.array_equal(t, price.times):
        raise GridMismatchError("path and price series are on different grids")
    x0 = path.states[0] if len(path.states) else 0.0
    fills = price.sell_times if x0 >= 0 else price.buy_times
    if not np.all(np.isin(np.asarray(path.jump_times, dtype=float), fills)):
        raise GridMismatchError("path fill times are not arrivals of the matching price stream")
    lam, G = m.lam, m.Gamma
    alpha = m.alpha_tilde * m.sigma**2
    proceeds = impact = risk = 0.0
    if t.size > 1:
        a, b = t[:-1], t[1:]
        xi = np.asarray(path.xi_applied[:-1], dtype=float)
        h = b - a
        level = price.p_bar[:-1] * h + price.jump_level(a) * h
        # arrivals strictly inside a segment change the level for the rest of it
        for times_, sgn in ((price.sell_times, 1.0), (price.buy_times, -1.0)):
            for s in times_:
                k = np.searchsorted(a, s, "left") - 1
                if 0 <= k < a.size and a[k] < s < b[k]:
                    level[k] += sgn * G * (b[k] - s)
        proceeds = math.fsum((xi * (level - lam * xi * h)).tolist())
        impact = math.fsum((lam * xi * xi * h).tolist())
        xa = np.asarray(path.states[:-1], dtype=float)
        xb = xa - xi * h
        risk = alpha * math.fsum((h * (xa * xa + xa * xb + xb * xb) / 3.0).tolist())
    for tj, eta in zip(path.jump_times, path.eta_applied):
        k = min(int(np.searchsorted(t, tj, "right")) - 1, t.size - 1)
        proceeds += float(eta * (price.p_bar[k] + price.jump_level(tj, strict=True)))
    adverse = G * math.fsum(abs(e) for e in path.eta_applied)
    return ProceedsRecord(proceeds, impact, adverse, risk)


class _MarketObserver(Observer):
    def __init__(self, m: MarketParams, config: SimConfig, first: int, n: int, block: int = 256):
        self.m = m
        self.side = 1.0 if config.initial_state >= 0 else -1.0
        self.grid = config.grid()
        self.gens = [path_rng(config.seed, i, PRICE_STREAM) for i in range(first, first + n)]
        self.block = block
        self.buf = None
        self.p_bar = np.full(n, float(m.p0))
        self.jump = np.zeros(n)
        self.proceeds = np.zeros(n)
        self.adverse = np.zeros(n)
        self.min_price = np.full(n, float(m.p0))

    def on_flow(self, rows, h, xi):
        lam = self.m.lam
        if rows is None:
            self.proceeds += xi * (self.p_bar + self.jump - lam * xi) * h
        else:
            self.proceeds[rows] += xi * (self.p_bar[rows] + self.jump[rows] - lam * xi) * h

    def on_event(self, rows, is_fill, eta):
        G = self.m.Gamma
        if is_fill:
            self.proceeds[rows] += eta * (self.p_bar[rows] + self.jump[rows])
            # covariation of the fill with the price move it triggers
            self.adverse[rows] += eta * (self.side * G)
            self.jump[rows] += self.side * G
        else:
            self.jump[rows] -= self.side * G
        self.min_price[rows] = np.minimum(self.min_price[rows], self.p_bar[rows] + self.jump[rows])

    def on_step(self, k, t_next):
        if self.m.sigma == 0.0:
            return
        j = k % self.block
        if j == 0:
            self.buf = np.stack([g.standard_normal(self.block) for g in self.gens]) if self.gens else None
        if self.buf is None:
            return
        h = self.grid[k + 1] - self.grid[k]
        self.p_bar += self.m.sigma * math.sqrt(h) * self.buf[:, j]
        np.minimum(self.min_price, self.p_bar + self.jump, out=self.min_price)


@dataclass
class MarketBatch:
    """Per-path results of a market simulation, in path order."""

    initial_state: float
    p0: float
    Gamma: float
    proceeds: np.ndarray
    impact_cost: np.ndarray
    adverse_selection_cost: np.ndarray
    risk_penalty: np.ndarray
    fill_abs_sum: np.ndarray
    min_price: np.ndarray
    seed: int
    dt: float

    def shortfall(self) -> np.ndarray:
        """``x p0 - proceeds``: implementation shortfall against the initial price."""
        return self.initial_state * self.p0 - self.proceeds

    def to_csv(self, path) -> None:
        """One row per path: index and the proceeds decomposition."""
        rows = np.column_stack([np.arange(self.proceeds.size), self.proceeds, self.impact_cost,
                                self.adverse_selection_cost, self.risk_penalty])
        np.savetxt(path, rows, delimiter=",", header="path," + _PROCEEDS_HEADER, comments="",
                   fmt=["%d"] + ["%.17g"] * 4)


def simulate_market(m: MarketParams, config: SimConfig, strategy=None, two_streams: bool = True) -> MarketBatch:
    """Simulate the liquidation with prices; defaults to the optimal strategy."""
    params = to_model_params(m)
    if strategy is None:
        strategy = control.optimal_strategy(params)
    chunks = simulate_batch(
        params, config, strategy,
        observer_factory=lambda first, n: _MarketObserver(m, config, first, n),
        with_other_stream=two_streams,
    )
    cat = lambda f: np.concatenate([f(c) for c in chunks])  # noqa: E731
    return MarketBatch(
        initial_state=float(config.initial_state), p0=m.p0, Gamma=m.Gamma,
        proceeds=cat(lambda c: c.observer.proceeds),
        impact_cost=cat(lambda c: c.impact_cost),
        adverse_selection_cost=cat(lambda c: c.observer.adverse),
        risk_penalty=cat(lambda c: c.risk_cost),
        fill_abs_sum=cat(lambda c: c.fill_abs_sum),
        min_price=cat(lambda c: c.observer.min_price),
        seed=config.seed, dt=config.dt,
    )


def _mean_se(v):
    n = v.size
    mean = math.fsum(v.tolist()) / n
    se = math.sqrt(math.fsum(((v - mean) ** 2).tolist()) / (n - 1) / n) if n > 1 else 0.0
    return mean, se


def identity_report(batch: MarketBatch, value: float | None = None) -> dict:
    """Check ``E[x p0 - proceeds] = E[impact + adverse selection]`` and, optionally, the value.

    Both comparisons use the per-path difference and its standard error.
    """
    short = batch.shortfall()
    costs = batch.impact_cost + batch.adverse_selection_cost
    ms, ss = _mean_se(short)
    mc, sc = _mean_se(costs)
    md, sd = _mean_se(short - costs)
    exact = bool(np.array_equal(batch.adverse_selection_cost, batch.Gamma * batch.fill_abs_sum))
    rep = {
        "n_paths": int(short.size),
        "seed": batch.seed,
        "dt": batch.dt,
        "mean_shortfall": ms,
        "se_shortfall": ss,
        "mean_impact_plus_adverse": mc,
        "se_impact_plus_adverse": sc,
        "mean_difference": md,
        "se_difference": sd,
        "identity_holds": bool(abs(md) <= 3.0 * sd) if sd > 0 else bool(md == 0.0),
        "adverse_selection_exact": exact,
        "negative_price_paths": int(np.sum(batch.min_price < 0)),
    }
    if value is not None:
        total = short + batch.risk_penalty
        mt, st = _mean_se(total)
        rep.update({"value": value, "mean_shortfall_plus_risk": mt, "se_shortfall_plus_risk": st,
                    "value_within_3se": bool(abs(mt - value) <= 3.0 * st)})
    return rep


def report_json(rep: dict) -> str:
    return json.dumps(rep, indent=2, sort_keys=True)
