"""Lumped Glauber dynamics of the magnetization under a time-dependent field.

The state is the number k of up spins; the magnetization ``m = (2k - N)/N``
is always derived from it.  Paths are produced by exact thinning (see
:mod:`mfhyst._chain_kernels`) and stored as jump times plus the value of k
after each jump.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from . import _chain_kernels as K
from .errors import DomainError, RangeError, ResourceError
from .model import ModelParams, branch_values, drift_F
from .outcome import Outcome, Tag
from .rng import stream, tag

DEFAULT_PROPOSAL_BUDGET = 2_000_000_000
DEFAULT_MAX_STORED = 50_000_000
LATTICE_TOL = 1e-9


# ---------------------------------------------------------------- lattice

def lattice_index(N: int, m: float) -> int:
    """Return k with m = (2k - N)/N, or raise DomainError off the lattice."""
    if N < 1:
        raise DomainError("N must be positive")
    x = (float(m) + 1.0) * N / 2.0
    k = int(round(x))
    if abs(x - k) > LATTICE_TOL * max(1.0, N) or not 0 <= k <= N:
        raise DomainError(f"m={m} is not on the lattice M_{N}")
    return k


def snap(N: int, m: float) -> int:
    """Nearest lattice index to an arbitrary magnetization in [-1, 1]."""
    return int(min(N, max(0, round((float(m) + 1.0) * N / 2.0))))


def k_to_m(N: int, k):
    return (2.0 * np.asarray(k, dtype=float) - N) / N


@dataclass(frozen=True)
class ChainState:
    N: int
    k: int
    t: float = 0.0

    def __post_init__(self):
        if self.N < 2 or not 0 <= self.k <= self.N:
            raise DomainError("need N >= 2 and 0 <= k <= N")

    @property
    def m(self) -> float:
        return (2.0 * self.k - self.N) / self.N


# ------------------------------------------------------------------ field

@dataclass(frozen=True)
class FieldSpec:
    """h(t) = h_off + h_amp cos(omega t)."""

    h_off: float
    h_amp: float
    omega: float

    @classmethod
    def oscillating(cls, params: ModelParams, N: int, kappa: float = 2.0 / 3.0):
        return cls(0.0, -params.h_c, float(N) ** (-kappa))

    @classmethod
    def constant(cls, h: float):
        return cls(float(h), 0.0, 0.0)

    def __call__(self, t):
        return self.h_off + self.h_amp * np.cos(self.omega * np.asarray(t, dtype=float))

    def range(self, t0: float, t1: float) -> tuple[float, float]:
        """Exact min and max of h over [t0, t1]."""
        if self.h_amp == 0.0 or self.omega == 0.0:
            v = float(self(t0))
            return v, v
        vals = [float(self(t0)), float(self(t1))]
        a, b = sorted((self.omega * t0, self.omega * t1))
        j0, j1 = math.ceil(a / math.pi), math.floor(b / math.pi)
        if j1 >= j0:
            vals.append(self.h_off + self.h_amp)
            if j1 > j0:
                vals.append(self.h_off - self.h_amp)
            else:
                vals.append(self.h_off + self.h_amp * (-1.0) ** j0)
        return min(vals), max(vals)


# ------------------------------------------------------------------ rates

def rates(params: ModelParams, N: int, m: float, h: float) -> tuple[float, float]:
    """Birth and death rates (c+, c-) of the lumped chain at (m, h)."""
    k = lattice_index(N, m)
    cp, cm = K.rates_k(params.beta, N, k, float(h))
    return float(cp), float(cm)


def drift_FN(params: ModelParams, N: int, m: float, h: float) -> float:
    cp, cm = rates(params, N, m, h)
    return 2.0 / N * (cp - cm)


def var_GN(params: ModelParams, N: int, m: float, h: float) -> float:
    cp, cm = rates(params, N, m, h)
    return 4.0 / N**2 * (cp + cm)


def rates_array(params: ModelParams, N: int, k, h):
    """Vectorized (c+, c-) for integer states k; no lattice check."""
    k = np.asarray(k, dtype=float)
    h = np.asarray(h, dtype=float)
    u = h + (2.0 * k - N) / N
    cp = (N - k) / (1.0 + np.exp(-2.0 * params.beta * (u + 1.0 / N)))
    cm = k / (1.0 + np.exp(2.0 * params.beta * (u - 1.0 / N)))
    return cp, cm


# ------------------------------------------------------------- trajectory

@dataclass
class ChainTrajectory:
    """Jump record of one run.

    ``times[i]`` is the i-th stored jump time and ``k[i]`` the state right
    after it.  With ``stride > 1`` only every stride-th jump is kept, so
    consecutive stored states may differ by more than one step.
    """

    params: ModelParams
    N: int
    t_start: float
    t_end: float
    k0: int
    times: np.ndarray
    k: np.ndarray
    field: FieldSpec
    seed: Optional[int] = None
    stride: int = 1
    n_proposals: int = 0
    n_jumps: int = 0

    @property
    def m0(self) -> float:
        return (2.0 * self.k0 - self.N) / self.N

    @property
    def m(self) -> np.ndarray:
        return k_to_m(self.N, self.k)

    @property
    def events(self):
        return self.times, self.m

    @property
    def k_final(self) -> int:
        return int(self.k[-1]) if len(self.k) else self.k0

    def k_at(self, t):
        """Right-continuous state at microscopic time(s) t."""
        t = np.asarray(t, dtype=float)
        if np.any(t < self.t_start) or np.any(t > self.t_end):
            raise RangeError("time outside the simulated interval")
        idx = np.searchsorted(self.times, t, side="right")
        full = np.concatenate(([self.k0], self.k))
        return full[idx]

    def m_at(self, t):
        return k_to_m(self.N, self.k_at(t))

    def check_invariants(self):
        if np.any(self.k < 0) or np.any(self.k > self.N):
            raise AssertionError("state left the lattice")
        if len(self.times) and (np.any(np.diff(self.times) <= 0) or self.times[0] <= self.t_start):
            raise AssertionError("jump times not strictly increasing")
        if self.stride == 1:
            steps = np.diff(np.concatenate(([self.k0], self.k)))
            if np.any(np.abs(steps) != 1):
                raise AssertionError("jump of size other than one spin")


def _resolve_rng(seed, rng, key):
    if rng is not None:
        return rng
    if seed is None:
        raise ValueError("either seed or rng is required")
    return stream(seed, *key)


def simulate(params: ModelParams, N: int, t_start: float, t_end: float, m0: float,
             seed: Optional[int] = None, *, kappa: float = 2.0 / 3.0,
             h_const: Optional[float] = None, field: Optional[FieldSpec] = None,
             stride: int = 1, budget: int = DEFAULT_PROPOSAL_BUDGET,
             max_stored: int = DEFAULT_MAX_STORED, rng=None,
             key: Sequence[int] = ()) -> ChainTrajectory:
    """Simulate the chain on [t_start, t_end] from lattice magnetization m0.

    The field defaults to the oscillating one with frequency N^-kappa;
    ``h_const`` freezes it.  Raises ResourceError when the proposal count
    N (t_end - t_start) or the stored-event count would exceed the budgets.
    """
    if N < 2:
        raise DomainError("N must be at least 2")
    if t_end < t_start:
        raise DomainError("t_end must not precede t_start")
    if stride < 1:
        raise DomainError("stride must be positive")
    k0 = lattice_index(N, m0)
    if field is None:
        field = FieldSpec.constant(h_const) if h_const is not None else FieldSpec.oscillating(params, N, kappa)
    duration = t_end - t_start
    projected = N * duration
    if projected > budget:
        raise ResourceError(f"projected {projected:.3g} proposals exceed budget {budget:.3g}")
    cap = int(projected / stride * 1.05 + 10.0 * math.sqrt(projected / stride + 1.0) + 16)
    if cap > max_stored:
        raise ResourceError(f"about {cap} stored events exceed max_stored={max_stored}; raise stride")
    gen = _resolve_rng(seed, rng, key)
    times = np.empty(cap)
    ks = np.empty(cap, dtype=np.int32)
    h_lo, h_hi = field.range(t_start, t_end)
    n, k_end, t_fin, code, n_prop, n_jump = K.record(
        gen, N, params.beta, field.h_off, field.h_amp, field.omega, k0, float(t_start),
        float(t_end), h_lo, h_hi, times, ks, stride, int(budget))
    if code == K.CODE_BUDGET:
        raise ResourceError("proposal budget or storage exhausted during the run")
    return ChainTrajectory(params=params, N=N, t_start=float(t_start), t_end=float(t_end), k0=k0,
                           times=times[:n].copy(), k=ks[:n].copy(), field=field, seed=seed,
                           stride=stride, n_proposals=int(n_prop), n_jumps=int(n_jump))


# ------------------------------------------------------ observed advance

@dataclass(frozen=True)
class ReferenceTable:
    """Deterministic reference curves on a uniform grid (rows = curves)."""

    t0: float
    dt: float
    values: np.ndarray

    @classmethod
    def empty(cls):
        return cls(0.0, 1.0, np.zeros((0, 2)))

    @classmethod
    def from_function(cls, fn, t0: float, t1: float, n: int = 4001):
        tt = np.linspace(t0, t1, n)
        vals = np.atleast_2d(np.asarray(fn(tt), dtype=float))
        return cls(float(t0), float(tt[1] - tt[0]) if n > 1 else 1.0, vals)


@dataclass(frozen=True)
class Rectangle:
    """Exit thresholds in k, active for microscopic times in [t_a, t_b]."""

    k_low: int
    k_high: int
    t_a: float
    t_b: float

    @classmethod
    def critical(cls, params: ModelParams, N: int, T: float):
        """The window |Y_N| <= 2T for rescaled times in [-T, T]."""
        scale = params.nu * N ** (1.0 / 3.0)
        m_lo = params.m_c - 2.0 * T / scale
        m_hi = params.m_c + 2.0 * T / scale
        k_low = math.floor(N * (1.0 + m_lo) / 2.0)
        k_high = math.floor(N * (1.0 + m_hi) / 2.0) + 1
        tau = params.mu * N ** (1.0 / 3.0) * T
        return cls(k_low, k_high, -tau, tau)

    @classmethod
    def none(cls):
        return cls(-1, 1 << 62, 1.0, 0.0)


@dataclass
class AdvanceResult:
    k: int
    t: float
    sup_dev: np.ndarray
    code: int
    n_proposals: int
    n_jumps: int

    @property
    def exited(self) -> bool:
        return self.code in (K.CODE_LOW, K.CODE_HIGH)


def advance(params: ModelParams, N: int, k: int, t: float, t_end: float, rng, field: FieldSpec,
            refs: Optional[ReferenceTable] = None, ref_window: Optional[tuple] = None,
            rect: Optional[Rectangle] = None, budget: int = DEFAULT_PROPOSAL_BUDGET) -> AdvanceResult:
    """Run from (t, k) without storing the path.

    Tracks sup |m - ref| for each reference row over ``ref_window`` and stops
    early when the rectangle is left.  Because the proposal clock is
    memoryless, consecutive calls on adjacent intervals chained through the
    same generator give one continuous realization.
    """
    refs = refs if refs is not None else ReferenceTable.empty()
    ra, rb = ref_window if ref_window is not None else (t, t_end)
    rect = rect if rect is not None else Rectangle.none()
    h_lo, h_hi = field.range(t, t_end)
    out = K.advance(rng, N, params.beta, field.h_off, field.h_amp, field.omega, int(k), float(t),
                    float(t_end), h_lo, h_hi, refs.t0, refs.dt, refs.values, float(ra), float(rb),
                    int(rect.k_low), int(rect.k_high), float(rect.t_a), float(rect.t_b), int(budget))
    k1, t1, sup_dev, code, n_prop, n_jump = out
    if code == K.CODE_BUDGET:
        raise ResourceError("proposal budget exhausted")
    return AdvanceResult(int(k1), float(t1), sup_dev, int(code), int(n_prop), int(n_jump))


# ----------------------------------------------------------------- checks

@dataclass
class LlnResult:
    N: int
    horizon: float
    sup_dev: np.ndarray
    seed: int

    def quantile(self, q: float) -> float:
        return float(np.quantile(self.sup_dev, q))

    def fraction_above(self, delta: float) -> float:
        return float(np.mean(self.sup_dev > delta))


def lln_check(params: ModelParams, N: int, horizon: float, m0: float, replicas: int, seed: int,
              *, h_const: Optional[float] = 0.1, kappa: float = 2.0 / 3.0, t0: float = 0.0,
              n_ref: int = 20001) -> LlnResult:
    """Sup distance between chain paths and the macroscopic flow on [t0, t0 + horizon]."""
    from .ode import macroscopic_flow

    field = FieldSpec.constant(h_const) if h_const is not None else FieldSpec.oscillating(params, N, kappa)
    k0 = snap(N, m0)
    m_start = (2.0 * k0 - N) / N
    sol = macroscopic_flow(params, t0, m_start, t0 + horizon, field=field)
    refs = ReferenceTable.from_function(sol, t0, t0 + horizon, n_ref)
    devs = np.empty(replicas)
    for i in range(replicas):
        g = stream(seed, tag("lln"), N, i)
        res = advance(params, N, k0, t0, t0 + horizon, g, field, refs)
        devs[i] = res.sup_dev[0]
    return LlnResult(N=N, horizon=horizon, sup_dev=devs, seed=seed)


# ------------------------------------------------------------ rescaling

@dataclass
class RescaledView:
    """Y_N(s) = nu N^(1/3) (m_N(mu N^(1/3) s) - m_c) over a trajectory."""

    traj: ChainTrajectory
    params: ModelParams
    window: tuple

    @property
    def time_scale(self) -> float:
        return self.params.mu * self.traj.N ** (1.0 / 3.0)

    @property
    def space_scale(self) -> float:
        return self.params.nu * self.traj.N ** (1.0 / 3.0)

    def y_of_k(self, k):
        return self.space_scale * (k_to_m(self.traj.N, k) - self.params.m_c)

    def __call__(self, s):
        return self.y_of_k(self.traj.k_at(np.asarray(s, dtype=float) * self.time_scale))

    def jumps(self):
        """Rescaled jump times and values inside the window."""
        s = self.traj.times / self.time_scale
        sel = (s > self.window[0]) & (s <= self.window[1])
        return s[sel], self.y_of_k(self.traj.k[sel])


def rescaled_path(traj: ChainTrajectory, window: tuple = (-5.0, 5.0)) -> RescaledView:
    params = traj.params
    scale = params.mu * traj.N ** (1.0 / 3.0)
    a, b = float(window[0]), float(window[1])
    tol = 1e-9 * max(1.0, abs(a), abs(b)) * scale
    if a * scale < traj.t_start - tol or b * scale > traj.t_end + tol or a >= b:
        raise RangeError("trajectory does not cover the requested rescaled window")
    return RescaledView(traj, params, (a, b))


def classify_exit(view: RescaledView, T: float, epsilon: float) -> Outcome:
    """First exit of Y_N from [-T, T] x [-2T, 2T] and its class."""
    if view.window[0] > -T + 1e-12 or view.window[1] < T - 1e-12:
        raise RangeError("view does not cover [-T, T]")
    y_start = float(view(-T))
    if y_start <= -2.0 * T:
        return Outcome(Tag.EMINUS, -T, y_start)
    if y_start > 2.0 * T:
        return Outcome(Tag.UNDECIDED, -T, y_start)
    s, y = view.jumps()
    sel = (s > -T) & (s <= T)
    s, y = s[sel], y[sel]
    out = np.nonzero((y <= -2.0 * T) | (y > 2.0 * T))[0]
    if len(out):
        i = out[0]
        t_ex, y_ex = float(s[i]), float(y[i])
        return Outcome(Tag.EMINUS if y_ex <= -2.0 * T else Tag.UNDECIDED, t_ex, y_ex)
    y_T = float(view(T))
    if abs(y_T - T) <= epsilon:
        return Outcome(Tag.EPLUS, float(T), y_T)
    return Outcome(Tag.UNDECIDED, float(T), y_T)


def branch_tracking(traj: ChainTrajectory, sign: int, interval: tuple, gamma: float,
                    kappa: float = 2.0 / 3.0) -> bool:
    """Whether sup over N^kappa * interval of |m_N - m_sign(h_N)| <= N^(gamma - 1/2)."""
    N = traj.N
    a, b = (float(x) * N**kappa for x in interval)
    if a < traj.t_start - 1e-9 * max(1.0, abs(a)) or b > traj.t_end + 1e-9 * max(1.0, abs(b)):
        raise RangeError("trajectory does not cover the interval")
    which = "plus" if sign > 0 else "minus"
    sel = (traj.times > a) & (traj.times <= b)
    t_ev = traj.times[sel]
    k_after = traj.k[sel]
    k_before = np.concatenate(([traj.k_at(a)], k_after[:-1])) if len(k_after) else np.array([], int)
    tt = np.concatenate(([a], t_ev, t_ev, [b]))
    kk = np.concatenate(([traj.k_at(a)], k_before, k_after, [traj.k_at(b)]))
    ref = branch_values(traj.params, traj.field(tt), which)
    if np.any(np.isnan(ref)):
        return False
    return bool(np.max(np.abs(k_to_m(N, kk) - ref)) <= N ** (gamma - 0.5))


def empirical_generator(params: ModelParams, N: int, m: float, h: float, dt: float,
                        replicas: int, seed: int):
    """Mean increments of m and m^2 over a short frozen-field run, divided by dt.

    Returns ((mean_dm, se_dm), (mean_dm2, se_dm2)) for comparison with the
    generator applied to f(m) = m and f(m) = m^2.
    """
    k0 = lattice_index(N, m)
    field = FieldSpec.constant(h)
    d1 = np.empty(replicas)
    d2 = np.empty(replicas)
    for i in range(replicas):
        g = stream(seed, tag("generator"), N, i)
        res = advance(params, N, k0, 0.0, dt, g, field)
        m1 = (2.0 * res.k - N) / N
        d1[i] = (m1 - m) / dt
        d2[i] = (m1**2 - m**2) / dt
    se = lambda x: float(np.std(x, ddof=1) / np.sqrt(len(x)))
    return (float(d1.mean()), se(d1)), (float(d2.mean()), se(d2))


def generator_exact(params: ModelParams, N: int, m: float, h: float, f):
    cp, cm = rates(params, N, m, h)
    return cp * (f(m + 2.0 / N) - f(m)) + cm * (f(m - 2.0 / N) - f(m))


def drift_error_scaled(params: ModelParams, N: int, m_grid, h_grid):
    """max N |F_N - F| and max N |N G_N - 2 Lambda| over paired grids (m snapped to M_N)."""
    from .model import lam

    k = np.array([snap(N, m) for m in m_grid])
    m = k_to_m(N, k)
    h = np.asarray(h_grid, dtype=float)
    cp, cm = rates_array(params, N, k, h)
    FN = 2.0 / N * (cp - cm)
    GN = 4.0 / N**2 * (cp + cm)
    e1 = N * np.max(np.abs(FN - drift_F(params, m, h)))
    e2 = N * np.max(np.abs(N * GN - 2.0 * lam(params, m, h)))
    return float(e1), float(e2)
