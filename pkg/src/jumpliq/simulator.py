"""Monte Carlo engine for the controlled process with Poisson-timed fills.

Paths are simulated in fixed-size chunks, each chunk vectorised across its
paths. Fills are applied at their exact exponential arrival times by
splitting the grid step; between events the position moves at the rate the
strategy chose at the left end of the segment (explicit Euler). Every path
draws its randomness from its own generator derived from ``(seed,
path_index, stream)``, so the result for a path depends on nothing else and
the estimate is bit-identical for any number of worker threads.
"""

from __future__ import annotations

import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass

import numpy as np

from .params import DomainError, ModelParams
from .records import PathRecord

__all__ = [
    "SimConfig",
    "CostEstimate",
    "PathRecord",
    "SimulationError",
    "FILL_STREAM",
    "OTHER_STREAM",
    "PRICE_STREAM",
    "path_rng",
    "sample_jump_times",
    "simulate_path",
    "simulate_batch",
    "estimate_cost",
    "terminal_diagnostics",
]

FILL_STREAM = 0
OTHER_STREAM = 1
PRICE_STREAM = 2


class SimulationError(RuntimeError):
    """A strategy produced an invalid control; carries the global path index."""

    def __init__(self, path_index: int, message: str):
        super().__init__(f"path {path_index}: {message}")
        self.path_index = path_index


@dataclass(frozen=True)
class SimConfig:
    """Monte Carlo settings.

    Attributes:
        horizon: liquidation horizon ``T``.
        initial_state: starting position ``x``.
        dt: grid step.
        n_paths: number of independent paths.
        seed: root seed; path ``i`` uses streams spawned from ``(seed, i)``.
        closeout_epsilon: length of the final window traded linearly to zero
            (defaults to ``1e-4 * horizon``).
        cost_mode: ``"jump"`` charges ``gamma/theta * |eta|`` at each realised
            fill; ``"rate"`` charges ``gamma * |eta*(t, X(t))| dt`` along the path.
        chunk_size: paths per vectorised work unit.
        threads: worker threads (does not affect results).
    """

    horizon: float
    initial_state: float
    dt: float
    n_paths: int
    seed: int = 0
    closeout_epsilon: float | None = None
    cost_mode: str = "jump"
    chunk_size: int = 8192
    threads: int = 1

    def __post_init__(self):
        if not self.horizon > 0:
            raise DomainError(f"horizon must be positive, got {self.horizon!r}")
        if not 0 < self.dt < self.horizon:
            raise DomainError(f"dt must satisfy 0 < dt < horizon, got {self.dt!r}")
        if self.n_paths < 1:
            raise DomainError(f"n_paths must be positive, got {self.n_paths!r}")
        if not 0 <= self.seed < 2**64:
            raise DomainError("seed must be a 64-bit unsigned integer")
        if not 0 < self.epsilon < self.horizon / 10:
            raise DomainError(f"closeout_epsilon must lie in (0, horizon/10), got {self.epsilon!r}")
        if self.cost_mode not in ("jump", "rate"):
            raise DomainError(f"cost_mode must be 'jump' or 'rate', got {self.cost_mode!r}")
        if self.chunk_size < 1 or self.threads < 1:
            raise DomainError("chunk_size and threads must be positive")

    @property
    def epsilon(self) -> float:
        return 1e-4 * self.horizon if self.closeout_epsilon is None else self.closeout_epsilon

    def grid(self) -> np.ndarray:
        """``k dt`` while below ``T - eps``, then ``T - eps`` and ``T``."""
        T, eps = self.horizon, self.epsilon
        n = int(math.ceil((T - eps) / self.dt))
        ks = np.arange(n) * self.dt
        ks = ks[ks < T - eps]
        return np.concatenate([ks, [T - eps, T]])


@dataclass(frozen=True)
class CostEstimate:
    mean: float
    std_error: float
    n_paths: int
    seed: int | None = None
    dt: float | None = None

    def to_json(self) -> str:
        return json.dumps(asdict(self), indent=2)


def path_rng(seed: int, path_index: int, stream: int) -> np.random.Generator:
    """Independent generator for one path and one random stream."""
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(seed, spawn_key=(path_index, stream))))


def sample_jump_times(theta: float, horizon: float, rng: np.random.Generator) -> np.ndarray:
    """Arrival times in ``(0, horizon)`` of a Poisson process with intensity ``theta``."""
    if not theta > 0:
        raise DomainError(f"theta must be positive, got {theta!r}")
    block = max(8, int(2 * theta * horizon) + 8)
    gaps = rng.exponential(1.0 / theta, size=block)
    times = np.cumsum(gaps)
    while times[-1] < horizon:
        more = np.cumsum(rng.exponential(1.0 / theta, size=block)) + times[-1]
        times = np.concatenate([times, more])
    return times[(times > 0) & (times < horizon)]


class Observer:
    """Hooks called by the engine; the market layer uses them to track prices."""

    def on_flow(self, rows, h, xi):  # rows is None for "all rows"
        pass

    def on_event(self, rows, is_fill, eta):
        pass

    def on_step(self, k, t_next):
        pass


@dataclass
class _ChunkResult:
    running_cost: np.ndarray
    impact_cost: np.ndarray
    risk_cost: np.ndarray
    jump_cost: np.ndarray
    terminal_state: np.ndarray
    pre_closeout_state: np.ndarray
    max_abs_xi: np.ndarray
    fill_abs_sum: np.ndarray
    monotone: np.ndarray
    records: list | None
    observer: Observer | None


def _event_table(params, config, first, m, with_other):
    """Padded per-path event arrays ``(times, is_fill)`` sorted in time."""
    lists = []
    for i in range(first, first + m):
        fills = sample_jump_times(params.theta, config.horizon, path_rng(config.seed, i, FILL_STREAM))
        if with_other:
            other = sample_jump_times(params.theta, config.horizon, path_rng(config.seed, i, OTHER_STREAM))
            t = np.concatenate([fills, other])
            f = np.concatenate([np.ones(fills.size, bool), np.zeros(other.size, bool)])
            o = np.argsort(t, kind="stable")
            lists.append((t[o], f[o]))
        else:
            lists.append((fills, np.ones(fills.size, bool)))
    K = max((len(t) for t, _ in lists), default=0) + 1
    times = np.full((m, K), np.inf)
    is_fill = np.zeros((m, K), bool)
    for r, (t, f) in enumerate(lists):
        times[r, : t.size] = t
        is_fill[r, : t.size] = f
    return times, is_fill


def _checked(strategy, tau, x, rows, first):
    try:
        xi, eta = strategy(tau, x)
    except Exception as exc:  # strategy failure aborts with the first affected path
        idx = first + (int(rows[0]) if rows is not None and len(rows) else 0)
        raise SimulationError(idx, f"strategy evaluation failed: {exc!r}") from exc
    xi = np.asarray(xi, dtype=float)
    eta = np.asarray(eta, dtype=float)
    bad = ~(np.isfinite(xi) & np.isfinite(eta))
    if bad.any():
        r = int(np.nonzero(bad)[0][0])
        idx = first + (int(rows[r]) if rows is not None else r)
        raise SimulationError(idx, f"strategy returned a non-finite control at tau={tau!r}")
    return xi, eta


def _run_chunk(params, config, strategy, first, m, observer=None, record=False, with_other=False):
    T, eps = config.horizon, config.epsilon
    lam, al, ga, th = params.lam, params.alpha, params.gamma, params.theta
    per_fill = ga / th
    rate_mode = config.cost_mode == "rate"
    grid = config.grid()
    ev_t, ev_fill = _event_table(params, config, first, m, with_other)
    ptr = np.zeros(m, dtype=np.intp)
    ar = np.arange(m)

    x = np.full(m, float(config.initial_state))
    imp = np.zeros(m)
    risk = np.zeros(m)
    jc = np.zeros(m)
    fill_sum = np.zeros(m)
    max_xi = np.zeros(m)
    # position never moves away from zero or crosses it
    mono = np.ones(m, dtype=bool)
    x_sign = np.sign(x)
    recs = [dict(t=[], x=[], xi=[], cum=[], jt=[], eta=[]) for _ in range(m)] if record else None

    def rec_nodes(rows, t, xi):
        idx = range(m) if rows is None else rows
        ts = np.broadcast_to(t, (m,) if rows is None else (len(rows),))
        for j, r in enumerate(idx):
            d = recs[r]
            d["t"].append(float(ts[j]))
            d["x"].append(float(x[r]))
            d["xi"].append(float(xi[j]))
            d["cum"].append(float(imp[r] + risk[r] + jc[r]))

    def flow(rows, tau, h, xi, eta, track=True):
        if rows is None:
            x0 = x
            if observer is not None:
                observer.on_flow(None, h, xi)
            x1 = x0 - xi * h
            imp[:] += lam * xi * xi * h
            risk[:] += al * h * (x0 * x0 + x0 * x1 + x1 * x1) / 3.0
            if rate_mode:
                jc[:] += ga * np.abs(eta) * h
            np.maximum(max_xi, np.abs(xi), out=max_xi)
            if track:
                mono[:] &= (np.abs(x1) <= np.abs(x0)) & (x1 * x_sign >= 0)
            x[:] = x1
        else:
            x0 = x[rows]
            if observer is not None:
                observer.on_flow(rows, h, xi)
            x1 = x0 - xi * h
            imp[rows] += lam * xi * xi * h
            risk[rows] += al * h * (x0 * x0 + x0 * x1 + x1 * x1) / 3.0
            if rate_mode:
                jc[rows] += ga * np.abs(eta) * h
            max_xi[rows] = np.maximum(max_xi[rows], np.abs(xi))
            mono[rows] &= (np.abs(x1) <= np.abs(x0)) & (x1 * x_sign[rows] >= 0)
            x[rows] = x1

    for k in range(len(grid) - 2):
        t, t1 = float(grid[k]), float(grid[k + 1])
        xi, eta = _checked(strategy, T - t, x, None, first)
        nxt = ev_t[ar, ptr]
        hit = nxt < t1
        h = np.where(hit, nxt - t, t1 - t)
        if record:
            rec_nodes(None, t, xi)
        flow(None, T - t, h, xi, eta)
        rows = np.nonzero(hit)[0]
        while rows.size:
            te = ev_t[rows, ptr[rows]]
            fill = ev_fill[rows, ptr[rows]]
            fr = rows[fill]
            if fr.size:
                _, eta_f = _checked(strategy, T - te[fill], x[fr], fr, first)
                if not rate_mode:
                    jc[fr] += per_fill * np.abs(eta_f)
                fill_sum[fr] += np.abs(eta_f)
                if record:
                    for j, r in enumerate(fr):
                        recs[r]["jt"].append(float(te[fill][j]))
                        recs[r]["eta"].append(float(eta_f[j]))
                if observer is not None:
                    observer.on_event(fr, True, eta_f)
                x_new = x[fr] - eta_f
                mono[fr] &= (np.abs(x_new) <= np.abs(x[fr])) & (x_new * x_sign[fr] >= 0)
                x[fr] = x_new
            if observer is not None and (~fill).any():
                observer.on_event(rows[~fill], False, np.zeros(int((~fill).sum())))
            ptr[rows] += 1
            nt = ev_t[rows, ptr[rows]]
            hh = np.minimum(nt, t1) - te
            xi_r, eta_r = _checked(strategy, T - te, x[rows], rows, first)
            if record:
                rec_nodes(rows, te, xi_r)
            flow(rows, T - te, hh, xi_r, eta_r)
            rows = rows[nt < t1]
        if observer is not None:
            observer.on_step(k, t1)

    # linear close-out on [T - eps, T]; fills in this window are ignored
    pre = x.copy()
    xi = x / eps
    if record:
        rec_nodes(None, T - eps, xi)
    # x - (x/eps)*eps may round to a tiny opposite-sign value; the state is set to 0 below
    flow(None, eps, eps, xi, np.zeros(m), track=False)
    x[:] = 0.0
    if record:
        rec_nodes(None, T, xi)
    if observer is not None:
        observer.on_step(len(grid) - 2, T)

    records = None
    if record:
        records = []
        for r in range(m):
            d = recs[r]
            records.append(PathRecord(
                times=np.array(d["t"]), states=np.array(d["x"]), xi_applied=np.array(d["xi"]),
                jump_times=d["jt"], eta_applied=d["eta"], cumulative_cost=np.array(d["cum"]),
                running_cost=float(imp[r] + risk[r] + jc[r]), terminal_state=float(x[r]),
                impact_cost=float(imp[r]), risk_cost=float(risk[r]), jump_cost=float(jc[r]),
            ))
    return _ChunkResult(imp + risk + jc, imp, risk, jc, x.copy(), pre, max_xi, fill_sum, mono, records, observer)


def simulate_batch(params: ModelParams, config: SimConfig, strategy, *, record=False,
                   observer_factory=None, with_other_stream=False):
    """Run all paths and return the chunk results in path order.

    ``observer_factory(first_path_index, m)`` builds a per-chunk observer.
    """
    starts = list(range(0, config.n_paths, config.chunk_size))

    def work(first):
        m = min(config.chunk_size, config.n_paths - first)
        obs = observer_factory(first, m) if observer_factory is not None else None
        return _run_chunk(params, config, strategy, first, m, obs, record, with_other_stream)

    if config.threads == 1 or len(starts) == 1:
        return [work(s) for s in starts]
    with ThreadPoolExecutor(max_workers=config.threads) as pool:
        return list(pool.map(work, starts))


def simulate_path(params: ModelParams, config: SimConfig, strategy, path_index: int = 0) -> PathRecord:
    """Simulate and record the single path ``path_index`` of ``config``."""
    res = _run_chunk(params, config, strategy, path_index, 1, None, True, False)
    return res.records[0]


def _mean_se(values: np.ndarray):
    n = values.size
    mean = math.fsum(values.tolist()) / n
    if n < 2:
        return mean, 0.0
    var = math.fsum(((values - mean) ** 2).tolist()) / (n - 1)
    return mean, math.sqrt(var / n)


def per_path_costs(params: ModelParams, config: SimConfig, strategy) -> np.ndarray:
    """Running cost of every path, in path order."""
    return np.concatenate([r.running_cost for r in simulate_batch(params, config, strategy)])


def estimate_cost(params: ModelParams, config: SimConfig, strategy) -> CostEstimate:
    """Sample mean and standard error of the running cost over ``config.n_paths`` paths."""
    if config.n_paths < 2:
        raise DomainError("estimate_cost needs at least two paths")
    mean, se = _mean_se(per_path_costs(params, config, strategy))
    return CostEstimate(mean, se, config.n_paths, config.seed, config.dt)


def terminal_diagnostics(params: ModelParams, config: SimConfig, records, bound=None) -> dict:
    """Largest position at ``T - eps`` across records, against the trajectory bound.

    ``records`` may be :class:`PathRecord` objects or chunk results from
    :func:`simulate_batch`. ``bound`` defaults to the Gronwall bound at
    ``T - eps``; slack allows ``10 dt max|xi|`` for discretisation. Paths
    whose position moves away from zero or crosses it are counted as
    non-monotone; this is reported, not enforced.
    """
    from .control import trajectory_bound

    pre, xmax, non_mono = [], 0.0, 0
    for r in records:
        if isinstance(r, PathRecord):
            i = int(np.searchsorted(r.times, config.horizon - config.epsilon))
            pre.append(abs(r.states[min(i, len(r.states) - 1)]))
            xmax = max(xmax, float(np.max(np.abs(r.xi_applied))) if len(r.xi_applied) else 0.0)
            s0 = np.sign(r.states[0])
            non_mono += int(np.any(np.diff(np.abs(r.states)) > 0) or np.any(r.states * s0 < 0))
        else:
            pre.extend(np.abs(r.pre_closeout_state).tolist())
            xmax = max(xmax, float(np.max(r.max_abs_xi)) if r.max_abs_xi.size else 0.0)
            non_mono += int(np.count_nonzero(~r.monotone))
    if not pre:
        return {}
    t = config.horizon - config.epsilon
    if bound is None:
        bound = trajectory_bound(params, config.horizon, config.initial_state, t)
    slack = 10.0 * config.dt * xmax
    worst = float(max(pre))
    return {
        "n_paths": len(pre),
        "t": t,
        "max_pre_closeout_state": worst,
        "trajectory_bound": bound,
        "slack": slack,
        "within_bound": bool(worst <= bound + slack),
        "non_monotone_paths": non_mono,
    }
