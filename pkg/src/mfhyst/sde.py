"""Limit equation dY = (t^2 - Y^2) dt + a dw on R with an absorbing point at -inf.

One Brownian increment is drawn per base step of length ``dt_max``; inside a
base step the drift is sub-stepped with h <= 0.1/(1 + Y^2 + t^2) and the
increment is spread over the sub-steps in proportion to their length.  Two
paths driven by the same generator state therefore see the same noise
whatever their sub-step sequences are.
"""
from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, replace
from typing import Optional

import numpy as np
from numba import njit

from .errors import DomainError, NumericalError
from .model import ModelParams
from .outcome import Outcome, Tag
from .rng import stream, tag

STEP_CONST = 0.1
_OK, _EXPLODED, _COLLAPSE = 0, 1, 2
_TAGS = (Tag.EPLUS, Tag.EMINUS, Tag.UNDECIDED)


@dataclass(frozen=True)
class SdeConfig:
    """Integration and classification settings.

    ``xi`` is the Brownian amplitude multiplying dw.  For the chain limit at
    inverse temperature beta use :meth:`from_params`, which takes the square
    root of the quadratic-variation rate.
    """

    xi: float
    T: float = 5.0
    epsilon_start: float = 0.2
    epsilon_boundary: float = 0.2
    dt_max: float = 1e-3
    barrier: Optional[float] = None
    epsilon_class: float = 1e-12
    dt_min: float = 1e-10

    def __post_init__(self):
        if self.barrier is None:
            object.__setattr__(self, "barrier", 3.0 * self.T)
        if not self.dt_max > 0 or not self.T > 0:
            raise DomainError("dt_max and T must be positive")
        if self.xi < 0:
            raise DomainError("noise amplitude must be non-negative")
        if self.barrier < 3.0 * self.T - 1e-12:
            raise DomainError("explosion barrier must be at least 3T")
        if not (self.epsilon_start > 0 and self.epsilon_boundary > 0 and self.epsilon_class > 0):
            raise DomainError("tolerances must be positive")

    @classmethod
    def from_params(cls, params: ModelParams, **kw):
        return cls(xi=params.noise_amplitude, **kw)

    def with_(self, **kw) -> "SdeConfig":
        if "T" in kw and "barrier" not in kw:
            kw["barrier"] = 3.0 * kw["T"]
        return replace(self, **kw)

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass
class SdePath:
    t: np.ndarray
    y: np.ndarray
    exploded: bool
    Pi: Optional[float]
    seed: Optional[int] = None

    def check_invariants(self):
        bad = np.isneginf(self.y)
        if bad.any():
            first = int(np.argmax(bad))
            if not bad[first:].all():
                raise AssertionError("value follows the -inf sentinel")
        if not np.all(np.isfinite(self.y[~bad])):
            raise AssertionError("non-finite value before explosion")


# ------------------------------------------------------------- kernels

@njit(inline="always")
def _cap(y, t):
    return STEP_CONST / (1.0 + y * y + t * t)


@njit(inline="always")
def _certified(y, t, B):
    return y <= -max(B, abs(t) + 3.0)


@njit(nogil=True, cache=True)
def _base_step(y, t, dt, noise, B, dt_min):
    """Advance y over [t, t + dt] receiving total noise ``noise``.

    Returns (y, status, t_status): status 1 means blowup was certified at
    t_status and y is -inf.
    """
    rem = dt
    s = t
    while rem > 0.0:
        h = _cap(y, s)
        if h >= rem:
            h = rem
        elif h < dt_min:
            return y, _COLLAPSE, s
        y = y + (s * s - y * y) * h + noise * (h / dt)
        rem -= h
        s = t + (dt - rem)
        if _certified(y, s, B):
            return -np.inf, _EXPLODED, s
    return y, _OK, t + dt


@njit(nogil=True, cache=True)
def _integrate_store(rng, amp, t0, y0, n, dt, B, dt_min, out):
    out[0] = y0
    y = y0
    if _certified(y, t0, B):
        for i in range(n + 1):
            out[i] = -np.inf
        return _EXPLODED, t0
    sq = math.sqrt(dt)
    for i in range(n):
        t = t0 + i * dt
        y, st, ts = _base_step(y, t, dt, amp * sq * rng.standard_normal(), B, dt_min)
        if st == _COLLAPSE:
            return _COLLAPSE, ts
        if st == _EXPLODED:
            for j in range(i + 1, n + 1):
                out[j] = -np.inf
            return _EXPLODED, ts
        out[i + 1] = y
    return _OK, t0 + n * dt


@njit(nogil=True, cache=True)
def _classify_run(rng, amp, T, eps_start, eps_b, dt, B, dt_min):
    """Draw the start uniformly in [T - eps, T + eps] at -T and classify.

    Returns (code, exit_time, exit_value, y_start, status) with code 0, 1, 2
    for E+, E-, Undecided.
    """
    y = T + eps_start * (2.0 * rng.random() - 1.0)
    y_start = y
    n = int(round(2.0 * T / dt))
    sq = math.sqrt(dt)
    for i in range(n):
        t = -T + i * dt
        y, st, ts = _base_step(y, t, dt, amp * sq * rng.standard_normal(), B, dt_min)
        if st == _COLLAPSE:
            return 2, ts, y, y_start, _COLLAPSE
        t1 = -T + (i + 1) * dt
        if st == _EXPLODED or y <= -2.0 * T:
            return 1, t1, y, y_start, _OK
        if y > 2.0 * T:
            return 2, t1, y, y_start, _OK
    if abs(y - T) <= eps_b:
        return 0, T, y, y_start, _OK
    return 2, T, y, y_start, _OK


@njit(nogil=True, cache=True)
def _couple_store(rng, amp, t0, y0, x0, n, dt, B, dt_min, out_y, out_yb, out_x):
    """Shared-noise pair Y <= Ybar = Y + x with common drift sub-steps."""
    y = y0
    x = x0
    yb = y0 + x0
    out_y[0] = y
    out_yb[0] = yb
    out_x[0] = x
    lower_alive = not _certified(y, t0, B)
    upper_alive = not _certified(yb, t0, B)
    if not lower_alive:
        y = -np.inf
        x = np.inf
    sq = math.sqrt(dt)
    pi_low = t0 if not lower_alive else np.nan
    pi_up = t0 if not upper_alive else np.nan
    for i in range(n):
        t = t0 + i * dt
        noise = amp * sq * rng.standard_normal()
        if lower_alive:
            rem = dt
            s = t
            while rem > 0.0:
                h = min(_cap(y, s), _cap(yb, s))
                if h >= rem:
                    h = rem
                elif h < dt_min:
                    return _COLLAPSE, pi_low, pi_up
                x = x * (1.0 - h * (yb + y))
                y = y + (s * s - y * y) * h + noise * (h / dt)
                yb = y + x
                rem -= h
                s = t + (dt - rem)
                if _certified(y, s, B):
                    lower_alive = False
                    pi_low = s
                    y = -np.inf
                    x = np.inf
                    if _certified(yb, s, B):
                        upper_alive = False
                        pi_up = s
                    elif rem > 0.0:
                        yb, st, ts = _base_step(yb, s, rem, noise * (rem / dt), B, dt_min)
                        if st == _COLLAPSE:
                            return _COLLAPSE, pi_low, pi_up
                        if st == _EXPLODED:
                            upper_alive = False
                            pi_up = ts
                    break
        elif upper_alive:
            yb, st, ts = _base_step(yb, t, dt, noise, B, dt_min)
            if st == _COLLAPSE:
                return _COLLAPSE, pi_low, pi_up
            if st == _EXPLODED:
                upper_alive = False
                pi_up = ts
        if not upper_alive:
            yb = -np.inf
        out_y[i + 1] = y
        out_yb[i + 1] = yb
        out_x[i + 1] = x
    return _OK, pi_low, pi_up


# ---------------------------------------------------------- public API

def _n_steps(t_start, t_end, dt):
    n = int(round((t_end - t_start) / dt))
    if abs(n * dt - (t_end - t_start)) > 1e-9 * max(1.0, abs(t_end - t_start)):
        n = int(math.ceil((t_end - t_start) / dt))
    return max(n, 1)


def integrate(config: SdeConfig, t_start: float, y_start: float, t_end: float,
              seed: Optional[int] = None, *, rng=None, key=()) -> SdePath:
    """Euler path on the base grid t_start + i dt_max (the last step may be shorter)."""
    if not t_end > t_start:
        raise DomainError("need t_end > t_start")
    if not np.isfinite(y_start):
        raise DomainError("y_start must be finite")
    gen = rng if rng is not None else stream(0 if seed is None else seed, tag("sde"), *key)
    n = _n_steps(t_start, t_end, config.dt_max)
    dt = (t_end - t_start) / n
    out = np.empty(n + 1)
    st, ts = _integrate_store(gen, config.xi, float(t_start), float(y_start), n, dt,
                              float(config.barrier), config.dt_min, out)
    if st == _COLLAPSE:
        raise NumericalError(f"step size collapsed below dt_min at t={ts}")
    grid = t_start + dt * np.arange(n + 1)
    return SdePath(grid, out, st == _EXPLODED, float(ts) if st == _EXPLODED else None, seed)


def classify(path: SdePath, config: SdeConfig) -> Outcome:
    T = config.T
    sel = (path.t >= -T - 1e-12) & (path.t <= T + 1e-12)
    t, y = path.t[sel], path.y[sel]
    if not len(t) or t[0] > -T + 1e-9 or (t[-1] < T - 1e-9 and not path.exploded):
        raise DomainError("path does not cover [-T, T]")
    hit = np.nonzero((y <= -2.0 * T) | (y > 2.0 * T))[0]
    if len(hit):
        i = hit[0]
        yy = float(y[i])
        return Outcome(Tag.EMINUS if yy <= -2.0 * T else Tag.UNDECIDED, float(t[i]), yy)
    if path.exploded:
        return Outcome(Tag.EMINUS, path.Pi, -math.inf)
    yT = float(y[-1])
    if abs(yT - T) <= config.epsilon_boundary:
        return Outcome(Tag.EPLUS, float(T), yT)
    return Outcome(Tag.UNDECIDED, float(T), yT)


def replica_stream(seed: int, i: int, label: str = "estimate"):
    return stream(seed, tag(label), i)


def run_replica(config: SdeConfig, seed: int, i: int, label: str = "estimate"):
    """Classification of replica i: (Outcome, starting value)."""
    g = replica_stream(seed, i, label)
    code, te, ye, y0, st = _classify_run(g, config.xi, config.T, config.epsilon_start,
                                         config.epsilon_boundary, config.dt_max,
                                         float(config.barrier), config.dt_min)
    if st == _COLLAPSE:
        raise NumericalError(f"step size collapsed in replica {i}")
    return Outcome(_TAGS[code], float(te), float(ye)), float(y0)


@dataclass
class PEstimate:
    replicas: int
    n_plus: int
    n_minus: int
    n_undecided: int
    seed: int
    config: dict
    outcomes: Optional[list] = None

    @property
    def p_minus(self) -> float:
        return self.n_minus / self.replicas

    @property
    def p_plus(self) -> float:
        return self.n_plus / self.replicas

    @property
    def undecided(self) -> float:
        return self.n_undecided / self.replicas

    def _se(self, p):
        return math.sqrt(p * (1.0 - p) / self.replicas)

    @property
    def se_minus(self) -> float:
        return self._se(self.p_minus)

    @property
    def se_plus(self) -> float:
        return self._se(self.p_plus)

    @property
    def se_undecided(self) -> float:
        return self._se(self.undecided)

    def to_dict(self) -> dict:
        return {"level": "sde", "replicas": self.replicas, "counts": {"EPlus": self.n_plus,
                "EMinus": self.n_minus, "Undecided": self.n_undecided},
                "p_minus": self.p_minus, "p_plus": self.p_plus, "undecided": self.undecided,
                "se_minus": self.se_minus, "se_plus": self.se_plus,
                "se_undecided": self.se_undecided, "seed": self.seed, "config": self.config}


def _run_block(config, seed, idx, label):
    return [run_replica(config, seed, int(i), label)[0] for i in idx]


def estimate_p(config: SdeConfig, replicas: int, seed: int, *, threads: int = 1,
               keep_outcomes: bool = False, label: str = "estimate") -> PEstimate:
    """Monte Carlo frequencies of E+, E- and Undecided; every replica has its own stream."""
    if replicas < 1:
        raise DomainError("replicas must be positive")
    idx = np.arange(replicas)
    if threads > 1:
        blocks = np.array_split(idx, threads * 4)
        with ThreadPoolExecutor(max_workers=threads) as ex:
            parts = list(ex.map(lambda b: _run_block(config, seed, b, label), blocks))
        outs = [o for p in parts for o in p]
    else:
        outs = _run_block(config, seed, idx, label)
    counts = {t: 0 for t in Tag}
    for o in outs:
        counts[o.tag] += 1
    return PEstimate(replicas, counts[Tag.EPLUS], counts[Tag.EMINUS], counts[Tag.UNDECIDED], seed,
                     config.to_dict(), outs if keep_outcomes else None)


@dataclass
class CoupledPaths:
    lower: SdePath
    upper: SdePath
    x: np.ndarray


def couple(config: SdeConfig, t_start: float, y: float, y_bar: float, t_end: float,
           seed: Optional[int] = None, *, rng=None, key=()) -> CoupledPaths:
    """Two paths from y <= y_bar driven by one noise sequence, with x = Ybar - Y."""
    if y_bar < y:
        raise DomainError("need y_bar >= y")
    gen = rng if rng is not None else stream(0 if seed is None else seed, tag("couple"), *key)
    n = _n_steps(t_start, t_end, config.dt_max)
    dt = (t_end - t_start) / n
    oy, ob, ox = np.empty(n + 1), np.empty(n + 1), np.empty(n + 1)
    st, pl, pu = _couple_store(gen, config.xi, float(t_start), float(y), float(y_bar - y), n, dt,
                               float(config.barrier), config.dt_min, oy, ob, ox)
    if st == _COLLAPSE:
        raise NumericalError("step size collapsed in coupled integration")
    grid = t_start + dt * np.arange(n + 1)
    low = SdePath(grid, oy, bool(np.isneginf(oy[-1])), None if np.isnan(pl) else float(pl), seed)
    up = SdePath(grid, ob, bool(np.isneginf(ob[-1])), None if np.isnan(pu) else float(pu), seed)
    return CoupledPaths(low, up, ox)


def start_consistency(config: SdeConfig, path) -> float:
    """|Y(-T) - T| for an SdePath or any callable Y(s) (e.g. a rescaled chain view)."""
    T = config.T
    if isinstance(path, SdePath):
        val = float(np.interp(-T, path.t, path.y))
    else:
        val = float(path(-T))
    return abs(val - T)


def explosion_speed(config: SdeConfig, exits, seed: int, deep_barrier: float = 1e4,
                    label: str = "explosion") -> np.ndarray:
    """Continue paths from lower-exit points (tau, y) until blowup at a deep barrier.

    Returns Pi - tau for each start; the remaining deterministic time below
    the barrier is at most 1/deep_barrier.
    """
    cfg = config.with_(barrier=max(deep_barrier, 3.0 * config.T), dt_min=1e-14)
    gaps = np.empty(len(exits))
    for i, (tau, y) in enumerate(exits):
        g = stream(seed, tag(label), i)
        horizon = 10.0 / max(config.T, 1.0)
        p = integrate(cfg, tau, y, tau + horizon, rng=g)
        gaps[i] = (p.Pi - tau) if p.exploded else np.inf
    return gaps
