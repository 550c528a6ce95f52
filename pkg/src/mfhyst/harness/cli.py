"""Command-line interface.

Exit codes: 0 success, 2 configuration or argument error, 3 resource budget
exceeded, 4 numerical failure.
"""
from __future__ import annotations

import argparse
import csv
import io as _io
import json
import math
import os
import sys
from pathlib import Path

import numpy as np

from .. import chain as C
from .. import gaussian as G
from .. import ode as O
from ..errors import ConfigError, DomainError, MfhystError, NumericalError, RangeError, ResourceError
from ..model import branch_values, branches, make_params
from ..sde import SdeConfig, estimate_p, integrate
from . import experiments as E
from . import figures
from .config import ExperimentConfig, load
from .io import dumps_json, write_columns, write_journal

EXIT_OK, EXIT_CONFIG, EXIT_RESOURCE, EXIT_NUMERICAL = 0, 2, 3, 4


def _common() -> argparse.ArgumentParser:
    # SUPPRESS keeps a subcommand from resetting a flag given before it
    p = argparse.ArgumentParser(add_help=False, argument_default=argparse.SUPPRESS)
    p.add_argument("--config", help="TOML experiment file")
    p.add_argument("--seed", type=int, help="master seed (u64)")
    p.add_argument("--replicas", type=int)
    p.add_argument("--out", help="output directory")
    p.add_argument("--format", choices=("csv", "json"))
    p.add_argument("--threads", type=int)
    return p


def _opt(args, name, default=None):
    return getattr(args, name, default)


def build_parser() -> argparse.ArgumentParser:
    common = _common()
    ap = argparse.ArgumentParser(prog="mfhyst", parents=[common],
                                 description="Random hysteresis of mean-field Glauber dynamics")
    sub = ap.add_subparsers(dest="command", required=True)

    sp = sub.add_parser("params", parents=[common], help="critical constants at beta")
    sp.add_argument("--beta", type=float)

    sp = sub.add_parser("branches", parents=[common], help="equilibrium roots at field h")
    sp.add_argument("--beta", type=float)
    sp.add_argument("--h", type=float, required=True)

    sp = sub.add_parser("simulate-chain", parents=[common], help="one chain trajectory")
    sp.add_argument("--N", type=int)
    sp.add_argument("--t-start", type=float)
    sp.add_argument("--t-end", type=float)
    sp.add_argument("--m0", type=float, help="lattice magnetization (default: upper branch)")
    sp.add_argument("--h-const", type=float)
    sp.add_argument("--stride", type=int, default=1)
    sp.add_argument("--journal", action="store_true", help="also write the binary event log")

    sp = sub.add_parser("simulate-sde", parents=[common], help="one limit-equation path")
    sp.add_argument("--t-start", type=float)
    sp.add_argument("--t-end", type=float)
    sp.add_argument("--y0", type=float)

    sub.add_parser("estimate-p", parents=[common], help="Monte Carlo p-/p+ for the limit equation")
    sub.add_parser("sweep-kappa", parents=[common], help="jump fraction across frequency exponents")
    sp = sub.add_parser("main-theorem", parents=[common], help="branch tracking and two-level p-")
    sp.add_argument("--no-window", action="store_true")
    sp = sub.add_parser("full-loop", parents=[common], help="repeated criticalities")
    sp.add_argument("--periods", type=int)
    sub.add_parser("stable-region", parents=[common], help="tracking, handoff and escape")
    sub.add_parser("gauss-check", parents=[common], help="Gaussian toolkit checks")
    sp = sub.add_parser("ode", parents=[common], help="deterministic flows")
    sp.add_argument("what", choices=("critical", "tracking", "riccati", "escape"))
    sp.add_argument("--t0", type=float, default=0.0)
    sp.add_argument("--y0", type=float, default=0.0)
    sp.add_argument("--t-end", type=float, default=10.0)
    sp.add_argument("--N", type=int)
    sub.add_parser("figures", parents=[common], help="plot data for the standard figures")
    return ap


def _config(args) -> ExperimentConfig:
    cfg = load(args.config) if _opt(args, "config") else ExperimentConfig()
    threads = _opt(args, "threads")
    if threads is None and os.environ.get("MFHYST_THREADS"):
        try:
            threads = int(os.environ["MFHYST_THREADS"])
        except ValueError as exc:
            raise ConfigError("MFHYST_THREADS must be an integer") from exc
    return cfg.with_(seed=_opt(args, "seed"), replicas=_opt(args, "replicas"),
                     output_dir=_opt(args, "out"), threads=threads)


def _emit(args, cfg: ExperimentConfig, name: str, obj: dict, rows=None) -> None:
    out = Path(cfg.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    obj = {"config_hash": cfg.hash, "seed": cfg.seed, **obj}
    if _opt(args, "format", "json") == "csv" and rows:
        buf = _io.StringIO()
        w = csv.DictWriter(buf, fieldnames=list(rows[0]), lineterminator="\n")
        w.writeheader()
        w.writerows(rows)
        text = f"# config_hash: {cfg.hash}\n# seed: {cfg.seed}\n" + buf.getvalue()
        (out / f"{name}.csv").write_text(text)
    else:
        text = dumps_json(obj, name)
        (out / f"{name}.json").write_text(text)
    sys.stdout.write(text)


def _flat(d: dict, prefix: str = "") -> dict:
    out = {}
    for k, v in d.items():
        if isinstance(v, dict):
            out.update(_flat(v, f"{prefix}{k}."))
        elif not isinstance(v, list):
            out[f"{prefix}{k}"] = v
    return out


def _sde_cfg(cfg, params):
    return SdeConfig.from_params(params, T=cfg.T, epsilon_start=cfg.epsilon_start,
                                 epsilon_boundary=cfg.epsilon_boundary, dt_max=cfg.dt_max)


def run(args) -> int:
    cfg = _config(args)
    beta = getattr(args, "beta", None) or cfg.beta
    params = make_params(beta)
    cmd = args.command
    if cmd == "params":
        _emit(args, cfg, "params", {"params": params.to_dict(), "noise_amplitude": params.noise_amplitude},
              [params.to_dict()])
    elif cmd == "branches":
        b = branches(params, args.h)
        d = {"h": args.h, "m_minus": b.m_minus, "m_zero": b.m_zero, "m_plus": b.m_plus,
             "degenerate": b.degenerate}
        _emit(args, cfg, "branches", d, [d])
    elif cmd == "simulate-chain":
        N = args.N or cfg.N[0]
        tau = params.mu * cfg.T * N ** (1.0 / 3.0)
        t0 = -tau if args.t_start is None else args.t_start
        t1 = tau if args.t_end is None else args.t_end
        field = C.FieldSpec.constant(args.h_const) if args.h_const is not None else \
            C.FieldSpec.oscillating(params, N, cfg.kappa)
        m0 = args.m0
        if m0 is None:
            k = C.snap(N, float(branch_values(params, field(t0), "plus")[0]))
            m0 = (2.0 * k - N) / N
        traj = C.simulate(params, N, t0, t1, m0, cfg.seed, field=field, stride=args.stride,
                          budget=cfg.budget, key=(N,))
        out = Path(cfg.output_dir)
        header = {"config_hash": cfg.hash, "seed": cfg.seed, "N": N, "t_start": t0, "t_end": t1,
                  "m0": traj.m0, "stride": args.stride}
        write_columns(out / "chain_trajectory.dat", {"t": np.concatenate(([t0], traj.times)),
                                                      "m": np.concatenate(([traj.m0], traj.m))}, header)
        if args.journal:
            write_journal(out / "chain_trajectory.mfhj", traj.times, traj.k, header)
        _emit(args, cfg, "simulate_chain", {"N": N, "jumps": traj.n_jumps, "proposals": traj.n_proposals,
                                            "m_final": float(traj.m[-1]) if len(traj.m) else traj.m0})
    elif cmd == "simulate-sde":
        sc = _sde_cfg(cfg, params)
        t0 = -cfg.T if args.t_start is None else args.t_start
        t1 = cfg.T if args.t_end is None else args.t_end
        y0 = cfg.T if args.y0 is None else args.y0
        path = integrate(sc, t0, y0, t1, cfg.seed)
        write_columns(Path(cfg.output_dir) / "sde_path.dat", {"t": path.t, "y": path.y},
                      {"config_hash": cfg.hash, "seed": cfg.seed})
        _emit(args, cfg, "simulate_sde", {"exploded": path.exploded, "Pi": path.Pi,
                                          "y_final": float(path.y[-1])})
    elif cmd == "estimate-p":
        est = estimate_p(_sde_cfg(cfg, params), cfg.replicas, cfg.seed, threads=cfg.threads)
        d = est.to_dict()
        _emit(args, cfg, "estimate_p", d, [_flat(d)])
    elif cmd == "sweep-kappa":
        r = E.run_kappa_sweep(cfg)
        _emit(args, cfg, "sweep_kappa", r, r["rows"])
    elif cmd == "main-theorem":
        r = E.run_main_theorem(cfg, with_window=not args.no_window)
        _emit(args, cfg, "main_theorem", r, [_flat(row) for row in r["per_N"]])
    elif cmd == "full-loop":
        r = E.run_full_loop(cfg, periods=args.periods)
        _emit(args, cfg, "full_loop", r, [_flat(r)])
    elif cmd == "stable-region":
        r = E.run_stable_region(cfg)
        _emit(args, cfg, "stable_region", r, [_flat(r)])
    elif cmd == "gauss-check":
        n = cfg.replicas
        ms = [G.gaussian_sup_tail(s, lam, d, n, cfg.seed, **opt).__dict__ for s, lam, d, opt in G.ms_fixtures()]
        one = lambda t: np.ones_like(np.asarray(t, dtype=float))
        sd = G.small_deviation_rate(one, 0.0, 1.0, [0.5, 0.4, 0.3, 0.25, 0.2], max(n, 2000), cfg.seed)
        comp = []
        for name, spec, c, X0, x0, hz in G.comparison_fixtures():
            rep = G.compare_paths(spec, c, cfg.seed, X0, x0, hz, name=name)
            comp.append({"name": name, "agree": rep.agree, "agree_printed": rep.agree_printed})
        _emit(args, cfg, "gauss_check", {"sup_tail": ms, "small_deviation": {
            "epsilons": sd.epsilons, "scaled": sd.scaled, "fitted": sd.fitted_constant,
            "printed_constant": sd.printed_constant, "covariance_constant": sd.covariance_constant},
            "comparison": comp}, ms)
    elif cmd == "ode":
        out = Path(cfg.output_dir)
        if args.what == "critical":
            cc = O.critical_curve(args.t_end)
            write_columns(out / "critical_curve.dat", {"t": cc.t, "y": cc.y}, {"bracket": list(cc.bracket)})
            d = {"y_star_0": cc.y0, "bracket": list(cc.bracket), "tol": cc.tol}
        elif args.what == "tracking":
            sol = O.tracking_solution(t_end=args.t_end)
            write_columns(out / "tracking.dat", {"t": sol.t, "y": sol.y})
            d = {"y_plus_0": float(sol(0.0)), "y_plus_end_minus_t": float(sol(args.t_end) - args.t_end)}
        elif args.what == "riccati":
            sol = O.solve_riccati(args.t0, args.y0, args.t_end)
            write_columns(out / "riccati.dat", {"t": sol.t, "y": sol.y})
            d = {"blowup_time": sol.blowup_time, "y_end": float(sol.y[-1])}
        else:
            fit = O.fit_escape_scaling(params, cfg.N if len(cfg.N) > 1 else [1000, 10000, 100000], cfg.T)
            d = {k: v for k, v in fit.items() if k != "schedules"}
        _emit(args, cfg, f"ode_{args.what}", d, [_flat(d)])
    elif cmd == "figures":
        paths = figures.emit_all(params, cfg.output_dir, cfg.seed, header={"config_hash": cfg.hash,
                                                                             "seed": cfg.seed})
        _emit(args, cfg, "figures", {"files": [str(p) for p in paths]})
    return EXIT_OK


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_CONFIG if exc.code else EXIT_OK
    try:
        return run(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except ResourceError as exc:
        print(f"resource budget exceeded: {exc}", file=sys.stderr)
        return EXIT_RESOURCE
    except NumericalError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except (DomainError, RangeError) as exc:
        print(f"invalid argument: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
