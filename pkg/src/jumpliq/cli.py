"""Command-line front end: every analysis writes CSV/JSON plus a run manifest.

Exit codes: 0 success, 1 usage error, 2 property-check failure.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import json
import os
import sys
import tempfile
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from . import __version__
from . import coefficients as co
from . import control, hjb_check, market, simulator
from . import value_surface as vs
from .params import DomainError, ModelParams

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_CHECK = 2

FIG2 = dict(lam=2.5, gamma=6.0, theta=3.0, alpha=4.0)


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


@dataclass
class RunManifest:
    command: str
    params: dict
    seed: int | None
    outputs: list
    tool_version: str
    argv: list
    output_sha256: dict = field(default_factory=dict)

    def write(self, path) -> None:
        Path(path).write_text(json.dumps(asdict(self), indent=2, sort_keys=True) + "\n", encoding="utf-8")


def _sha256(path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


def _fmt(v) -> str:
    return f"{v:.15g}" if isinstance(v, float) else str(v)


def _floats(text: str):
    """Comma list ``a,b,c`` or range ``lo:hi:n``."""
    try:
        if ":" in text:
            lo, hi, n = text.split(":")
            return [float(v) for v in np.linspace(float(lo), float(hi), int(n))]
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"cannot parse number list {text!r}") from exc


def _add_model(p):
    p.add_argument("--lambda", dest="lam", type=float, default=FIG2["lam"], help="quadratic cost weight")
    p.add_argument("--gamma", type=float, default=FIG2["gamma"], help="absolute-value cost weight")
    p.add_argument("--theta", type=float, default=FIG2["theta"], help="Poisson intensity")
    p.add_argument("--alpha", type=float, default=FIG2["alpha"], help="state cost weight (0 allowed)")
    p.add_argument("--T", type=float, default=1.0, help="horizon / time-to-go")


def _params(a) -> ModelParams:
    if not a.T > 0:
        raise DomainError(f"T must be positive, got {a.T!r}")
    return ModelParams(lam=a.lam, gamma=a.gamma, theta=a.theta, alpha=a.alpha)


def build_parser() -> argparse.ArgumentParser:
    ap = _Parser(prog="jumpliq", description="Optimal liquidation with Poisson-timed dark-pool fills.")
    ap.add_argument("--version", action="version", version=__version__)
    sub = ap.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("value", help="value function and derivatives at (T, x)")
    _add_model(p)
    p.add_argument("--x", type=float, required=True)
    p.add_argument("--json", action="store_true", help="print a JSON object")
    p.add_argument("--out", help="also write the JSON object to this file")

    p = sub.add_parser("trajectory", help="no-fill optimal path with boundary series")
    _add_model(p)
    p.add_argument("--x", type=float, required=True)
    p.add_argument("--dt", type=float, default=1e-3)
    p.add_argument("--force-jump", type=float, default=None, help="place one fill at this time")
    p.add_argument("--out", required=True)

    p = sub.add_parser("montecarlo", help="Monte Carlo cost estimate")
    _add_model(p)
    p.add_argument("--x", type=float, required=True)
    p.add_argument("--n", type=int, default=10_000)
    p.add_argument("--dt", type=float, default=1e-3)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--strategy", choices=("optimal", "linear", "nodp"), default="optimal")
    p.add_argument("--cost-mode", choices=("jump", "rate"), default="jump")
    p.add_argument("--threads", type=int, default=1)
    p.add_argument("--chunk-size", type=int, default=8192)
    p.add_argument("--out", required=True)

    p = sub.add_parser("market", help="market simulation and proceeds identity check")
    p.add_argument("--Gamma", type=float, default=2.0)
    p.add_argument("--sigma", type=float, default=1.0)
    p.add_argument("--alpha-tilde", type=float, default=4.0)
    p.add_argument("--lambda", dest="lam", type=float, default=2.5)
    p.add_argument("--theta", type=float, default=3.0)
    p.add_argument("--p0", type=float, default=100.0)
    p.add_argument("--T", type=float, default=1.0)
    p.add_argument("--x", type=float, required=True)
    p.add_argument("--n", type=int, default=10_000)
    p.add_argument("--dt", type=float, default=1e-3)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--threads", type=int, default=1)
    p.add_argument("--out", required=True)

    p = sub.add_parser("hjb-check", help="HJB residual and minimiser scan")
    _add_model(p)
    p.add_argument("--Tgrid", type=_floats, default=[0.25, 0.5, 1.0, 2.0])
    p.add_argument("--xgrid", type=_floats, default=None, help="default: 31 points on [0, 2 x_bar(T,0)] mirrored")
    p.add_argument("--threads", type=int, default=1)
    p.add_argument("--out", required=True)

    p = sub.add_parser("sweep-gamma", help="value and controls across adverse-selection sizes")
    _add_model(p)
    p.add_argument("--x", type=float, required=True)
    p.add_argument("--gamma-grid", type=_floats, required=True, help="Gamma values (gamma = theta Gamma)")
    p.add_argument("--out", required=True)

    p = sub.add_parser("replay", help="re-run a manifest and compare output hashes")
    p.add_argument("manifest")
    return ap


# ----------------------------------------------------------------------------
# commands

def _manifest(args, argv, params, outputs, seed=None):
    m = RunManifest(
        command=args.command, params=params, seed=seed, outputs=[str(o) for o in outputs],
        tool_version=__version__, argv=list(argv),
        output_sha256={str(o): _sha256(o) for o in outputs},
    )
    m.write(f"{outputs[0]}.manifest.json")
    return m


def _write(path, text):
    try:
        Path(path).write_text(text, encoding="utf-8")
    except OSError as exc:
        raise OSError(f"cannot write {path}: {exc.strerror or exc}") from exc


def cmd_value(args, argv):
    params = _params(args)
    vp = vs.value(params, args.T, args.x)
    d = vp.as_dict()
    if args.json:
        print(json.dumps(d, indent=2))
    else:
        for k in ("w", "dw_dx", "d2w_dx2", "dw_dT", "region", "s_index"):
            print(f"{k:8s} {_fmt(d[k])}")
    if args.out:
        _write(args.out, json.dumps(d, indent=2) + "\n")
        _manifest(args, argv, params.as_dict(), [args.out])
    return EXIT_OK


def cmd_trajectory(args, argv):
    params = _params(args)
    rec = control.deterministic_trajectory(params, args.T, args.x, args.dt, force_jump=args.force_jump)
    tau = args.T - rec.times
    beta = np.asarray(vs.boundary(params, tau))
    env = beta if params.alpha == 0.0 else np.asarray(co.x_bar_at_zero(params, tau))
    try:
        with open(args.out, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["t", "x_star", "beta", "xbar_envelope"])
            for row in zip(rec.times, rec.states, beta, env):
                w.writerow([repr(float(v)) for v in row])
    except OSError as exc:
        raise OSError(f"cannot write {args.out}: {exc.strerror or exc}") from exc
    _manifest(args, argv, params.as_dict(), [args.out])
    return EXIT_OK


def _strategy(name, params, x, T):
    if name == "optimal":
        return control.optimal_strategy(params)
    if name == "nodp":
        return control.nodp_strategy(params)
    return control.linear_strategy(x, T)


def cmd_montecarlo(args, argv):
    params = _params(args)
    if args.n < 2:
        raise UsageError("--n must be at least 2")
    cfg = simulator.SimConfig(
        horizon=args.T, initial_state=args.x, dt=args.dt, n_paths=args.n, seed=args.seed,
        cost_mode=args.cost_mode, chunk_size=args.chunk_size, threads=args.threads,
    )
    est = simulator.estimate_cost(params, cfg, _strategy(args.strategy, params, args.x, args.T))
    out = asdict(est)
    out["strategy"] = args.strategy
    text = json.dumps(out, indent=2, sort_keys=True) + "\n"
    _write(args.out, text)
    _manifest(args, argv, params.as_dict(), [args.out], seed=args.seed)
    print(text, end="")
    return EXIT_OK


def cmd_market(args, argv):
    m = market.MarketParams(args.Gamma, args.sigma, args.alpha_tilde, args.lam, args.theta, args.p0)
    if args.n < 2:
        raise UsageError("--n must be at least 2")
    cfg = simulator.SimConfig(horizon=args.T, initial_state=args.x, dt=args.dt, n_paths=args.n,
                              seed=args.seed, threads=args.threads)
    params = market.to_model_params(m)
    batch = market.simulate_market(m, cfg)
    rep = market.identity_report(batch, vs.value(params, args.T, args.x).w)
    text = market.report_json(rep) + "\n"
    _write(args.out, text)
    _manifest(args, argv, {**asdict(m), **params.as_dict()}, [args.out], seed=args.seed)
    print(text, end="")
    ok = rep["identity_holds"] and rep["adverse_selection_exact"]
    return EXIT_OK if ok else EXIT_CHECK


def cmd_hjb_check(args, argv):
    params = _params(args)
    xg = None if args.xgrid is None else np.asarray(args.xgrid)
    rep = hjb_check.residual_scan(params, args.Tgrid, xg, threads=args.threads)
    _write(args.out, rep.to_json() + "\n")
    _manifest(args, argv, params.as_dict(), [args.out])
    print(f"points {len(rep.grid)}  max_residual {_fmt(rep.max_residual)}  "
          f"max_fd_relative {_fmt(rep.max_fd_relative)}  minimizer_violations {rep.minimizer_violations}  "
          f"passed {rep.passed}")
    return EXIT_OK if rep.passed else EXIT_CHECK


def gamma_sweep_rows(params: ModelParams, T: float, x: float, Gammas):
    """Rows ``(Gamma, w, xi, eta, beta, xbar0)`` with ``gamma = theta Gamma``."""
    rows = []
    for G in Gammas:
        p = params.replace(gamma=params.theta * G)
        vp = vs.value(p, T, x)
        act = control.optimal_control(p, T, x)
        xb0 = vs.boundary(p, T) if p.alpha == 0.0 else vs.outer_threshold(p, T)
        rows.append((float(G), vp.w, act.xi, act.eta, vs.boundary(p, T), float(xb0)))
    return rows


def gamma_monotonicity(params: ModelParams, T: float, x: float, rows, margin: float = 1e-10):
    """Check the ordering of ``w``, ``|xi|`` and ``|eta|`` across the sweep.

    Below the threshold ``2|x| C0(T)`` consecutive ``w`` and ``|xi|`` must rise and
    ``|eta|`` fall by more than ``margin``. Beyond it all three are constant.
    """
    thr = 2.0 * abs(x) * co.c0(params, T)
    below = [r for r in rows if r[0] < thr]
    above = [r for r in rows if r[0] > thr]
    inc = lambda a, b: b - a > margin  # noqa: E731
    ok_w = all(inc(a[1], b[1]) for a, b in zip(below, below[1:]))
    ok_xi = all(inc(abs(a[2]), abs(b[2])) for a, b in zip(below, below[1:]))
    ok_eta = all(inc(abs(b[3]), abs(a[3])) for a, b in zip(below, below[1:]))
    const = all(r[1] == above[0][1] and r[2] == above[0][2] and r[3] == 0.0 for r in above) if above else True
    return {"threshold": thr, "w_increasing": ok_w, "xi_increasing": ok_xi,
            "eta_decreasing": ok_eta, "constant_beyond": const}


def cmd_sweep_gamma(args, argv):
    params = _params(args)
    grid = list(args.gamma_grid)
    if not grid or any(g <= 0 for g in grid) or any(b <= a for a, b in zip(grid, grid[1:])):
        raise UsageError("--gamma-grid must be positive and strictly increasing")
    rows = gamma_sweep_rows(params, args.T, args.x, grid)
    flags = gamma_monotonicity(params, args.T, args.x, rows)
    thr = flags["threshold"]
    try:
        with open(args.out, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["Gamma", "w", "xi", "eta", "beta", "xbar0", "below_threshold"])
            for r in rows:
                w.writerow([repr(float(v)) for v in r] + [int(r[0] < thr)])
    except OSError as exc:
        raise OSError(f"cannot write {args.out}: {exc.strerror or exc}") from exc
    _manifest(args, argv, params.as_dict(), [args.out])
    print(" ".join(f"{k} {_fmt(v)}" for k, v in flags.items()))
    ok = all(v for k, v in flags.items() if k != "threshold")
    return EXIT_OK if ok else EXIT_CHECK


def cmd_replay(args, argv):
    try:
        man = json.loads(Path(args.manifest).read_text(encoding="utf-8"))
    except (OSError, ValueError) as exc:
        raise UsageError(f"cannot read manifest {args.manifest}: {exc}") from exc
    old_argv = list(man["argv"])
    outs = list(man["outputs"])
    with tempfile.TemporaryDirectory() as tmp:
        remap = {o: os.path.join(tmp, f"out{i}{Path(o).suffix}") for i, o in enumerate(outs)}
        new_argv = [remap.get(a, a) for a in old_argv]
        code = main(new_argv, _quiet=True)
        if code != EXIT_OK:
            print(f"replay exited with {code}")
            return code
        same = all(_sha256(remap[o]) == man["output_sha256"][o] for o in outs)
    print("identical" if same else "outputs differ")
    return EXIT_OK if same else EXIT_CHECK


COMMANDS = {
    "value": cmd_value,
    "trajectory": cmd_trajectory,
    "montecarlo": cmd_montecarlo,
    "market": cmd_market,
    "hjb-check": cmd_hjb_check,
    "sweep-gamma": cmd_sweep_gamma,
    "replay": cmd_replay,
}


def main(argv=None, _quiet=False) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        if _quiet:
            import contextlib
            import io

            with contextlib.redirect_stdout(io.StringIO()):
                return COMMANDS[args.command](args, argv)
        return COMMANDS[args.command](args, argv)
    except (DomainError, UsageError) as exc:
        print(f"jumpliq {args.command}: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except OSError as exc:
        print(f"jumpliq {args.command}: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except simulator.SimulationError as exc:
        print(f"jumpliq {args.command}: simulation failed: {exc}", file=sys.stderr)
        return EXIT_CHECK


if __name__ == "__main__":
    sys.exit(main())
