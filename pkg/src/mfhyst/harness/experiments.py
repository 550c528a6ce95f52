"""Experiment pipelines: stable region, critical window, escape and the full loop.

Every replica draws from its own stream keyed by (master seed, experiment
label, N, replica), so each reported number is a function of the
configuration and the master seed only.
"""
from __future__ import annotations

import math
import time
from concurrent.futures import ThreadPoolExecutor
from typing import Callable, Optional

import numpy as np

from .. import chain as C
from ..model import ModelParams, branch_values, make_params
from ..outcome import Outcome, Tag
from ..rng import stream, tag
from ..sde import SdeConfig, estimate_p
from .config import ExperimentConfig
from .records import RunRecord, Summary


def pmap(fn: Callable[[int], object], n: int, threads: int = 1) -> list:
    """fn(0..n-1) in order; threads only change scheduling, never results."""
    if threads <= 1:
        return [fn(i) for i in range(n)]
    with ThreadPoolExecutor(max_workers=threads) as ex:
        return list(ex.map(fn, range(n)))


def binom(k: int, n: int) -> dict:
    p = k / n if n else math.nan
    return {"count": int(k), "n": int(n), "p": p, "se": math.sqrt(p * (1 - p) / n) if n else math.nan}


def branch_table(params: ModelParams, field: C.FieldSpec, t0: float, t1: float,
                 which=("plus",), n: int = 20001) -> C.ReferenceTable:
    def fn(tt):
        h = field(tt)
        return np.vstack([branch_values(params, h, w) for w in which])
    return C.ReferenceTable.from_function(fn, t0, t1, n)


def initial_k_near_plus(params: ModelParams, N: int, gamma: float, rng) -> int:
    """Uniform draw among lattice points within N^(gamma - 1/2) of m_+(0)."""
    mp = float(branch_values(params, 0.0, "plus")[0])
    r = N ** (gamma - 0.5)
    lo = math.ceil(N * (1.0 + mp - r) / 2.0)
    hi = math.floor(N * (1.0 + mp + r) / 2.0)
    return int(rng.integers(lo, hi + 1))


# ------------------------------------------------------ critical window

def window_classify(params: ModelParams, N: int, T: float, eps_b: float, res: C.AdvanceResult) -> Outcome:
    scale_t = params.mu * N ** (1.0 / 3.0)
    scale_y = params.nu * N ** (1.0 / 3.0)
    y = scale_y * ((2.0 * res.k - N) / N - params.m_c)
    s = res.t / scale_t
    if res.code == 1:
        return Outcome(Tag.EMINUS, s, y)
    if res.code == 2:
        return Outcome(Tag.UNDECIDED, s, y)
    if abs(y - T) <= eps_b:
        return Outcome(Tag.EPLUS, float(T), y)
    return Outcome(Tag.UNDECIDED, float(T), y)


def window_replica(params: ModelParams, N: int, T: float, eps_s: float, eps_b: float, seed: int,
                   i: int, kappa: float = 2.0 / 3.0, label: str = "window", budget: int = 2_000_000_000):
    """One chain run through the critical window from Y_N(-T) uniform in [T - eps, T + eps].

    Returns (outcome, AdvanceResult, generator) so the caller can continue
    the same realization past the exit.
    """
    g = stream(seed, tag(label), N, i)
    field = C.FieldSpec.oscillating(params, N, kappa)
    rect = C.Rectangle.critical(params, N, T)
    y0 = T + eps_s * (2.0 * g.random() - 1.0)
    k0 = C.snap(N, params.m_c + y0 / (params.nu * N ** (1.0 / 3.0)))
    res = C.advance(params, N, k0, rect.t_a, rect.t_b, g, field, rect=rect, budget=budget)
    return window_classify(params, N, T, eps_b, res), res, g


def chain_window_estimate(params: ModelParams, N: int, T: float, eps_s: float, eps_b: float,
                          replicas: int, seed: int, threads: int = 1, config_hash: str = "") -> dict:
    def one(i):
        t0 = time.perf_counter()
        out, res, _ = window_replica(params, N, T, eps_s, eps_b, seed, i)
        return RunRecord(config_hash, i, seed, "chain", out, wall=time.perf_counter() - t0,
                         extra={"proposals": res.n_proposals, "jumps": res.n_jumps})

    recs = pmap(one, replicas, threads)
    summ = Summary.of(recs)
    pm, sm = summ.frequency("chain", Tag.EMINUS)
    pp, sp = summ.frequency("chain", Tag.EPLUS)
    pu, su = summ.frequency("chain", Tag.UNDECIDED)
    return {"level": "chain", "N": N, "T": T, "replicas": replicas, "p_minus": pm, "se_minus": sm,
            "p_plus": pp, "se_plus": sp, "undecided": pu, "se_undecided": su,
            "proposals": int(sum(r.extra["proposals"] for r in recs)), "seed": seed,
            "summary": summ.to_dict(), "records": recs}


# ----------------------------------------------------------- kappa sweep

def kappa_window(params: ModelParams, N: int, kappa: float, T: float) -> float:
    """Half-width mu T N^(kappa/2) of the window where drift and noise compete."""
    return params.mu * T * N ** (kappa / 2.0)


def sweep_replica(params: ModelParams, N: int, kappa: float, T: float, seed: int, i: int,
                  budget: int = 2_000_000_000):
    g = stream(seed, tag("sweep"), N, int(round(kappa * 1e6)), i)
    field = C.FieldSpec.oscillating(params, N, kappa)
    tau = kappa_window(params, N, kappa, T)
    m_start = float(branch_values(params, field(-tau), "plus")[0])
    res = C.advance(params, N, C.snap(N, m_start), -tau, tau, g, field, budget=budget)
    m_end = (2.0 * res.k - N) / N
    m0_end = float(branch_values(params, field(tau), "zero")[0])
    return m_end < m0_end, res


def run_kappa_sweep(cfg: ExperimentConfig) -> dict:
    params = make_params(cfg.beta)
    rows = []
    for N in cfg.N:
        for kappa in cfg.kappas:
            outs = pmap(lambda i: sweep_replica(params, N, kappa, cfg.T, cfg.seed, i, cfg.budget),
                        cfg.replicas, cfg.threads)
            jumps = sum(1 for j, _ in outs if j)
            props = [r.n_proposals for _, r in outs]
            rows.append({"N": N, "kappa": kappa, **binom(jumps, cfg.replicas),
                         "mean_proposals": float(np.mean(props))})
    return {"experiment": "kappa_sweep", "config_hash": cfg.hash, "seed": cfg.seed, "rows": rows}


# ------------------------------------------------------ stable pipeline

def pipeline_replica(params: ModelParams, N: int, cfg: ExperimentConfig, i: int, label: str,
                     stop_after_before: Optional[float] = None, after: bool = True):
    """Chain path from -pi/2 N^(2/3) through the criticality.

    Returns a dict with the sup distances to m_+ before -eta N^(2/3), and
    (if ``after``) to m_+ and m_- on [eta, pi/2] N^(2/3).  With
    ``stop_after_before`` the run is continued to that microscopic time
    instead and its final state returned.
    """
    kappa = 2.0 / 3.0
    g = stream(cfg.seed, tag(label), N, i)
    field = C.FieldSpec.oscillating(params, N, kappa)
    w = N**kappa
    t_a, t_b = -0.5 * math.pi * w, -cfg.eta * w
    if stop_after_before is not None:
        # a wide window can begin before -eta N^(2/3); track only up to its start
        t_b = min(t_b, stop_after_before)
    k0 = initial_k_near_plus(params, N, cfg.gamma, g)
    refs = branch_table(params, field, t_a, t_b, ("plus",))
    r1 = C.advance(params, N, k0, t_a, t_b, g, field, refs, budget=cfg.budget)
    out = {"k0": k0, "sup_before": float(r1.sup_dev[0]), "proposals": r1.n_proposals}
    if stop_after_before is not None:
        r2 = C.advance(params, N, r1.k, t_b, stop_after_before, g, field, budget=cfg.budget)
        out["k_stop"] = r2.k
        out["proposals"] += r2.n_proposals
        return out
    if after:
        r2 = C.advance(params, N, r1.k, t_b, cfg.eta * w, g, field, budget=cfg.budget)
        refs2 = branch_table(params, field, cfg.eta * w, 0.5 * math.pi * w, ("plus", "minus"))
        r3 = C.advance(params, N, r2.k, cfg.eta * w, 0.5 * math.pi * w, g, field, refs2,
                       budget=cfg.budget)
        out.update(sup_after_plus=float(r3.sup_dev[0]), sup_after_minus=float(r3.sup_dev[1]),
                   proposals=out["proposals"] + r2.n_proposals + r3.n_proposals)
    return out


def run_main_theorem(cfg: ExperimentConfig, with_window: bool = True) -> dict:
    params = make_params(cfg.beta)
    report = {"experiment": "main_theorem", "config_hash": cfg.hash, "seed": cfg.seed,
              "gamma": cfg.gamma, "gamma_prime": cfg.gamma_prime, "eta": cfg.eta, "per_N": []}
    sde_cfg = SdeConfig.from_params(params, T=cfg.T, epsilon_start=cfg.epsilon_start,
                                    epsilon_boundary=cfg.epsilon_boundary, dt_max=cfg.dt_max)
    sde_est = estimate_p(sde_cfg, cfg.sde_replicas, cfg.seed, threads=cfg.threads) if with_window else None
    for N in cfg.N:
        outs = pmap(lambda i: pipeline_replica(params, N, cfg, i, "pipeline"), cfg.replicas, cfg.threads)
        tol_g, tol_gp = N ** (cfg.gamma - 0.5), N ** (cfg.gamma_prime - 0.5)
        before = sum(o["sup_before"] <= tol_gp for o in outs)
        ap = sum(o["sup_after_plus"] <= tol_g for o in outs)
        am = sum(o["sup_after_minus"] <= tol_g for o in outs)
        ap2 = sum(o["sup_after_plus"] <= tol_gp for o in outs)
        am2 = sum(o["sup_after_minus"] <= tol_gp for o in outs)
        row = {"N": N, "tracking_before": binom(before, cfg.replicas),
               "after_plus": binom(ap, cfg.replicas), "after_minus": binom(am, cfg.replicas),
               "after_sum": (ap + am) / cfg.replicas,
               "after_plus_gamma_prime": binom(ap2, cfg.replicas),
               "after_minus_gamma_prime": binom(am2, cfg.replicas),
               "after_sum_gamma_prime": (ap2 + am2) / cfg.replicas}
        if with_window:
            cw = chain_window_estimate(params, N, cfg.T, cfg.epsilon_start, cfg.epsilon_boundary,
                                       cfg.window_replicas, cfg.seed, cfg.threads, cfg.hash)
            pooled = math.sqrt(cw["se_minus"] ** 2 + sde_est.se_minus**2)
            row["chain_window"] = {k: v for k, v in cw.items() if k != "records"}
            row["agreement_z"] = abs(cw["p_minus"] - sde_est.p_minus) / pooled if pooled > 0 else math.inf
        report["per_N"].append(row)
    if sde_est is not None:
        report["sde"] = sde_est.to_dict()
    return report


# -------------------------------------------------------------- full loop

def run_full_loop(cfg: ExperimentConfig, periods: Optional[int] = None, N: Optional[int] = None,
                  kappa: Optional[float] = None) -> dict:
    """Repeated criticalities in global time.

    Semi-period j is centred on the criticality at t = j pi / omega and ends
    where h = 0; the branch there is read off the sign of m.  A semi-period
    is a trial when the path enters it on the branch that disappears at its
    criticality (+ for even j, - for odd j).
    """
    params = make_params(cfg.beta)
    periods = cfg.periods if periods is None else periods
    N = cfg.N[0] if N is None else N
    kappa = cfg.kappa if kappa is None else kappa
    field = C.FieldSpec.oscillating(params, N, kappa)
    half = math.pi / field.omega
    n_semi = 2 * periods

    def one(i):
        g = stream(cfg.seed, tag("loop"), N, int(round(kappa * 1e6)), i)
        k = C.snap(N, float(branch_values(params, 0.0, "plus")[0]))
        t = -0.5 * half
        branch = [1]
        props = 0
        for j in range(n_semi):
            r = C.advance(params, N, k, t, t + half, g, field, budget=cfg.budget)
            k, t = r.k, t + half
            props += r.n_proposals
            branch.append(1 if 2 * k > N else -1)
        return branch, props

    outs = pmap(one, cfg.replicas, cfg.threads)
    branches = np.array([b for b, _ in outs])
    trials_even, trials_odd, seqs = [], [], []
    for b in branches:
        seq = []
        for j in range(n_semi):
            exposed = 1 if j % 2 == 0 else -1
            if b[j] == exposed:
                jumped = int(b[j + 1] != b[j])
                (trials_even if j % 2 == 0 else trials_odd).append(jumped)
                seq.append(jumped)
        seqs.append(seq)
    pairs = [(s[i], s[i + 1]) for s in seqs for i in range(len(s) - 1)]
    if len(pairs) > 2:
        a = np.array(pairs, dtype=float)
        corr = float(np.corrcoef(a[:, 0], a[:, 1])[0, 1]) if a.std(axis=0).min() > 0 else 0.0
    else:
        corr = math.nan
    down = binom(sum(trials_even), len(trials_even))
    up = binom(sum(trials_odd), len(trials_odd))
    pooled = math.sqrt((down["se"] or 0) ** 2 + (up["se"] or 0) ** 2)
    return {"experiment": "full_loop", "config_hash": cfg.hash, "seed": cfg.seed, "N": N,
            "kappa": kappa, "periods": periods, "branches": branches.tolist(),
            "down_jumps": down, "up_jumps": up,
            "symmetry_z": abs(down["p"] - up["p"]) / pooled if pooled > 0 else 0.0,
            "lag1_correlation": corr, "n_pairs": len(pairs),
            "corr_se": 1.0 / math.sqrt(len(pairs)) if pairs else math.nan,
            "both_outcomes": bool(0 < down["count"] + up["count"] < down["n"] + up["n"]),
            "constant_branch": bool(np.all(branches == branches[:, :1])),
            "mean_proposals": float(np.mean([p for _, p in outs]))}


# --------------------------------------------------------- stable region

def handoff_deviation(params: ModelParams, N: int, cfg: ExperimentConfig, T: float, i: int,
                      gamma_track: Optional[float] = None):
    """(|Y_N(-T) - T|, tracked) for a pipeline run stopped at rescaled time -T."""
    t_stop = -params.mu * T * N ** (1.0 / 3.0)
    o = pipeline_replica(params, N, cfg, i, f"handoff{T:g}", stop_after_before=t_stop)
    y = params.nu * N ** (1.0 / 3.0) * ((2.0 * o["k_stop"] - N) / N - params.m_c)
    gt = cfg.gamma_prime if gamma_track is None else gamma_track
    return abs(y - T), o["sup_before"] <= N ** (gt - 0.5)


def escape_replica(params: ModelParams, N: int, cfg: ExperimentConfig, i: int):
    """Critical-window run; if it exits through the bottom, continue to mu' T N^(1/3).

    Returns (outcome, |m - m_-(h)| at the check time or None).
    """
    out, res, g = window_replica(params, N, cfg.T, cfg.epsilon_start, cfg.epsilon_boundary,
                                 cfg.seed, i, label="escape", budget=cfg.budget)
    if out.tag is not Tag.EMINUS:
        return out, None
    field = C.FieldSpec.oscillating(params, N)
    t_check = cfg.mu_prime_factor * params.mu * cfg.T * N ** (1.0 / 3.0)
    r = C.advance(params, N, res.k, res.t, t_check, g, field, budget=cfg.budget)
    m = (2.0 * r.k - N) / N
    mm = float(branch_values(params, field(t_check), "minus")[0])
    return out, abs(m - mm)


def fit_envelope(T_values, exceed) -> float:
    """c in exceed ~ exp(-c eps^2 T) from a log-linear fit (eps folded into c)."""
    T_values = np.asarray(T_values, dtype=float)
    ex = np.asarray(exceed, dtype=float)
    ok = ex > 0
    if ok.sum() < 2:
        return math.nan
    return float(-np.polyfit(T_values[ok], np.log(ex[ok]), 1)[0])


def run_stable_region(cfg: ExperimentConfig, N: Optional[int] = None, escape_replicas: Optional[int] = None) -> dict:
    params = make_params(cfg.beta)
    N = cfg.N[0] if N is None else N
    outs = pmap(lambda i: pipeline_replica(params, N, cfg, i, "stable", after=False),
                cfg.replicas, cfg.threads)
    sups = np.array([o["sup_before"] for o in outs])
    track_gp = binom(int(np.sum(sups <= N ** (cfg.gamma_prime - 0.5))), cfg.replicas)
    track_g = binom(int(np.sum(sups <= N ** (cfg.gamma - 0.5))), cfg.replicas)
    hand = []
    for T in cfg.handoff_T:
        devs = pmap(lambda i: handoff_deviation(params, N, cfg, T, i), cfg.replicas, cfg.threads)
        kept = [d for d, tr in devs if tr]
        ex = binom(int(sum(d > cfg.handoff_epsilon for d in kept)), len(kept))
        hand.append({"T": T, "exceedance": ex, "kept": len(kept),
                     "mean_deviation": float(np.mean(kept)) if kept else math.nan})
    exc = [h["exceedance"]["p"] for h in hand]
    n_esc = cfg.replicas if escape_replicas is None else escape_replicas
    esc = pmap(lambda i: escape_replica(params, N, cfg, i), n_esc, cfg.threads)
    dists = [d for o, d in esc if d is not None]
    return {"experiment": "stable_region", "config_hash": cfg.hash, "seed": cfg.seed, "N": N,
            "tracking_gamma_prime": track_gp, "tracking_gamma": track_g,
            "sup_before_quantiles": np.quantile(sups, [0.5, 0.95, 0.99]).tolist(),
            "handoff": hand,
            "handoff_ratio": exc[0] / exc[-1] if len(exc) > 1 and exc[-1] > 0 else math.inf,
            "envelope_c": fit_envelope(cfg.handoff_T, exc),
            "escape": {"conditioned": len(dists), "attempted": n_esc,
                       **binom(int(sum(d <= N ** -0.5 for d in dists)), len(dists)),
                       "max_distance": float(max(dists)) if dists else math.nan}}
