"""Gaussian toolkit: sup-tail bounds, small-ball rates and the linear comparison.

Linear equations dX = (a(t) X + b(t)) dt + xi dw are simulated with their
exact Gaussian transition on a uniform grid; the per-step mean map and
variance are integrated by nested Gauss-Legendre quadrature.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np
from scipy.special import ndtr

from .errors import DomainError, StatisticalError
from .rng import stream, tag

_GL_X, _GL_W = np.polynomial.legendre.leggauss(8)


def _const(c):
    return lambda t: np.full_like(np.asarray(t, dtype=float), float(c))


@dataclass
class LinearSdeSpec:
    a: Callable
    b: Callable
    xi: float
    t0: float
    t1: float
    name: str = ""

    def __post_init__(self):
        if not self.t1 > self.t0:
            raise DomainError("need t1 > t0")
        grid = np.linspace(self.t0, self.t1, 2001)
        for f in (self.a, self.b):
            v = np.asarray(f(grid), dtype=float)
            if not np.all(np.isfinite(v)):
                raise DomainError("a and b must be bounded on [t0, t1]")

    @classmethod
    def constant(cls, a: float, b: float = 0.0, xi: float = 1.0, t0: float = 0.0,
                 t1: float = 1.0, name: str = ""):
        return cls(_const(a), _const(b), xi, t0, t1, name)


def _int_a(a, lo, hi):
    """Gauss-Legendre integral of a over [lo, hi] (arrays, elementwise)."""
    lo = np.asarray(lo, dtype=float)
    hi = np.asarray(hi, dtype=float)
    mid, half = 0.5 * (lo + hi), 0.5 * (hi - lo)
    nodes = mid[..., None] + half[..., None] * _GL_X
    return half * np.sum(_GL_W * a(nodes), axis=-1)


def transition(spec: LinearSdeSpec, n_steps: int):
    """Grid and per-step (phi, mean shift, sd) of the exact linear transition.

    Over [t, t + h]:  X' = phi X + shift + sd Z.
    """
    t = np.linspace(spec.t0, spec.t1, n_steps + 1)
    lo, hi = t[:-1], t[1:]
    phi = np.exp(_int_a(spec.a, lo, hi))
    mid, half = 0.5 * (lo + hi), 0.5 * (hi - lo)
    u = mid[:, None] + half[:, None] * _GL_X  # quadrature nodes per step
    decay = np.exp(_int_a(spec.a, u, np.broadcast_to(hi[:, None], u.shape)))
    shift = half * np.sum(_GL_W * spec.b(u) * decay, axis=1)
    var = spec.xi**2 * half * np.sum(_GL_W * decay**2, axis=1)
    return t, phi, shift, np.sqrt(var)


def variance_at(spec: LinearSdeSpec, t_end: Optional[float] = None, n: int = 400) -> float:
    """xi^2 times the integral over [t0, t_end] of exp(2 int_u^t_end a)."""
    t_end = spec.t1 if t_end is None else t_end
    edges = np.linspace(spec.t0, t_end, n + 1)
    lo, hi = edges[:-1], edges[1:]
    mid, half = 0.5 * (lo + hi), 0.5 * (hi - lo)
    u = mid[:, None] + half[:, None] * _GL_X
    dec = np.exp(2.0 * _int_a(spec.a, u, np.full(u.shape, t_end)))
    return float(spec.xi**2 * np.sum(half * np.sum(_GL_W * dec, axis=1)))


def simulate_linear(spec: LinearSdeSpec, n_steps: int, replicas: int, seed: int, x0: float = 0.0,
                    key: Sequence[int] = ()):
    """Full paths, shape (replicas, n_steps + 1)."""
    t, phi, shift, sd = transition(spec, n_steps)
    g = stream(seed, tag("linear"), *key)
    X = np.empty((replicas, n_steps + 1))
    X[:, 0] = x0
    for i in range(n_steps):
        X[:, i + 1] = phi[i] * X[:, i] + shift[i] + sd[i] * g.standard_normal(replicas)
    return t, X


# ------------------------------------------------------- sup-tail bound

@dataclass
class SupTailResult:
    name: str
    lam: float
    delta: float
    empirical: float
    std_error: float
    bound: float
    passed: bool
    replicas: int


def ms_bound(lam: float, delta: float) -> float:
    return 2.0 * math.exp(-(lam**2) / 2.0 * (1.0 - delta))


def gaussian_sup_tail(spec: LinearSdeSpec, lam: float, delta: float, replicas: int, seed: int,
                      n_steps: int = 1000, normalization: str = "sup", x0: float = 0.0,
                      stationary_start: bool = False, chunk: int = 20000) -> SupTailResult:
    """Frequency of sup |X| / sigma >= lam against 2 exp(-lam^2 (1 - delta) / 2).

    ``normalization='sup'`` divides by the largest standard deviation on the
    interval; ``'pointwise'`` divides by sigma(t) and is only meaningful when
    sigma(t) is bounded away from zero (e.g. a stationary start).
    """
    if spec.b(np.array([spec.t0]))[0] != 0.0 or (x0 != 0.0 and not stationary_start):
        raise DomainError("the bound concerns centered processes")
    t, phi, shift, sd = transition(spec, n_steps)
    var = np.empty(n_steps + 1)
    var0 = 0.0
    if stationary_start:
        a0 = float(spec.a(np.array([spec.t0]))[0])
        if a0 >= 0:
            raise DomainError("stationary start needs a < 0")
        var0 = spec.xi**2 / (-2.0 * a0)
    var[0] = var0
    for i in range(n_steps):
        var[i + 1] = phi[i] ** 2 * var[i] + sd[i] ** 2
    if normalization == "sup":
        scale = np.full(n_steps + 1, math.sqrt(var.max()))
    elif normalization == "pointwise":
        if var[0] <= 0:
            raise DomainError("pointwise normalization needs positive variance at t0")
        scale = np.sqrt(var)
    else:
        raise ValueError(normalization)
    g = stream(seed, tag("suptail"), int(round(lam * 1000)), int(round(delta * 1000)))
    hits = 0
    done = 0
    while done < replicas:
        m = min(chunk, replicas - done)
        x = math.sqrt(var0) * g.standard_normal(m)
        exceeded = np.abs(x) / scale[0] >= lam
        for i in range(n_steps):
            x = phi[i] * x + sd[i] * g.standard_normal(m)
            exceeded |= np.abs(x) / scale[i + 1] >= lam
        hits += int(exceeded.sum())
        done += m
    p = hits / replicas
    se = math.sqrt(max(p * (1 - p), 1.0 / replicas) / replicas)
    bound = ms_bound(lam, delta)
    return SupTailResult(spec.name, lam, delta, p, se, bound, p <= bound + 3 * se, replicas)


def ms_fixtures() -> list[tuple[LinearSdeSpec, float, float, dict]]:
    """Ten (process, lambda, delta, options) cases with lambda >= 3, delta <= 0.1."""
    bm = LinearSdeSpec.constant(0.0, name="brownian[0,1]")
    ou5 = LinearSdeSpec.constant(-1.0, t1=5.0, name="ou[0,5]")
    ou1 = LinearSdeSpec.constant(-1.0, t1=1.0, name="ou[0,1]")
    ou2 = LinearSdeSpec.constant(-2.0, xi=0.5, t1=1.0, name="ou(a=-2,xi=.5)[0,1]")
    lin = LinearSdeSpec(lambda t: 0.5 * t, _const(0.0), 1.0, -2.0, 0.0, name="a=t/2[-2,0]")
    osc = LinearSdeSpec(lambda t: -1.0 + 0.5 * np.sin(3.0 * t), _const(0.0), 1.3, 0.0, 4.0,
                        name="a=-1+sin(3t)/2[0,4]")
    return [
        (bm, 3.0, 0.1, {}),
        (bm, 3.5, 0.05, {}),
        (ou5, 3.5, 0.1, {}),
        (ou1, 3.0, 0.1, {}),
        (ou2, 3.5, 0.1, {}),
        (ou1, 3.5, 0.1, {"stationary_start": True, "normalization": "pointwise"}),
        (lin, 3.0, 0.1, {}),
        (lin, 4.0, 0.05, {}),
        (osc, 3.0, 0.1, {}),
        (osc, 3.5, 0.05, {}),
    ]


def brownian_sup_tail_exact(lam: float) -> float:
    """P(sup_[0,1] W >= lam) = 2 (1 - Phi(lam)) by reflection."""
    return float(2.0 * (1.0 - ndtr(lam)))


# ------------------------------------------------------ small deviations

@dataclass
class SmallDeviationResult:
    epsilons: np.ndarray
    log_p: np.ndarray
    scaled: np.ndarray
    fitted_constant: float
    printed_constant: float
    covariance_constant: float
    seed: int

    @property
    def relative_error_printed(self) -> float:
        return abs(self.fitted_constant - self.printed_constant) / abs(self.printed_constant)

    @property
    def relative_error_covariance(self) -> float:
        return abs(self.fitted_constant - self.covariance_constant) / abs(self.covariance_constant)


def printed_small_ball_constant(a: Callable, t0: float, t1: float) -> float:
    return -(math.pi**2) / 8.0 * (1.0 - math.exp(-float(_int_a(a, np.array(t0), np.array(t1)))))


def covariance_small_ball_constant(t0: float, t1: float) -> float:
    """-(pi^2/8) times the integral of G'H - H'G, which is identically 1 here."""
    return -(math.pi**2) / 8.0 * (t1 - t0)


def tube_log_survival(a: Callable, t0: float, t1: float, eps: float, particles: int, seed: int,
                      steps_per_eps2: float = 40.0, min_steps: int = 200) -> float:
    """ln P(sup |X| < eps) for X = int e^{-int_u^t a} dw by sequential Monte Carlo.

    Particles move with the exact transition; each step multiplies the
    weight by the crossing-free probability of the connecting Brownian
    bridge, and the population is resampled in proportion to the weights.
    """
    n = max(min_steps, int(math.ceil(steps_per_eps2 * (t1 - t0) / eps**2)))
    spec = LinearSdeSpec(lambda t: -np.asarray(a(t), dtype=float), _const(0.0), 1.0, t0, t1)
    _, phi, _, sd = transition(spec, n)
    h = (t1 - t0) / n
    g = stream(seed, tag("smallball"), int(round(eps * 1e6)))
    x = np.zeros(particles)
    log_p = 0.0
    for i in range(n):
        y = phi[i] * x + sd[i] * g.standard_normal(particles)
        inside = np.abs(y) < eps
        # two-sided bridge crossing, first-order reflection terms
        p_cross = np.exp(-2.0 * (eps - x) * (eps - y) / h) + np.exp(-2.0 * (eps + x) * (eps + y) / h)
        w = np.where(inside, np.clip(1.0 - p_cross, 0.0, 1.0), 0.0)
        mean_w = w.mean()
        if mean_w <= 0.0:
            raise StatisticalError(f"no surviving particles at eps={eps}; grid too aggressive")
        log_p += math.log(mean_w)
        cdf = np.cumsum(w)
        cdf /= cdf[-1]
        pos = (g.random() + np.arange(particles)) / particles
        x = y[np.minimum(np.searchsorted(cdf, pos), particles - 1)]
    return log_p


def small_deviation_rate(a: Callable, t0: float, t1: float, epsilons: Sequence[float],
                         replicas: int, seed: int, **kw) -> SmallDeviationResult:
    """eps^2 ln P(sup |X| < eps) on an eps grid, extrapolated to eps = 0.

    The extrapolation is a straight-line fit in eps over the three smallest
    values.
    """
    eps = np.sort(np.asarray(epsilons, dtype=float))[::-1]
    if len(eps) < 3:
        raise DomainError("need at least three epsilons")
    lp = np.array([tube_log_survival(a, t0, t1, e, replicas, seed, **kw) for e in eps])
    scaled = eps**2 * lp
    sm = np.argsort(eps)[:3]
    slope, intercept = np.polyfit(eps[sm], scaled[sm], 1)
    return SmallDeviationResult(eps, lp, scaled, float(intercept),
                                printed_small_ball_constant(a, t0, t1),
                                covariance_small_ball_constant(t0, t1), seed)


# ----------------------------------------------------------- comparison

@dataclass
class ComparisonReport:
    t: np.ndarray
    Delta: np.ndarray
    delta: np.ndarray
    window_end: int
    agree: bool
    agree_printed: bool
    name: str = ""


def compare_paths(linear: LinearSdeSpec, c: Callable, seed: int, X0: float, x0: float,
                  horizon: Optional[float] = None, dt: float = 1e-3, name: str = "") -> ComparisonReport:
    """Linear X and nonlinear x driven by one Euler noise sequence.

    Checks sign(Delta) = -sign(delta) on (tau, first zero of delta), with
    tau = t0; ``agree_printed`` records the opposite sign convention.
    """
    t_end = linear.t1 if horizon is None else linear.t0 + horizon
    n = int(round((t_end - linear.t0) / dt))
    t = linear.t0 + dt * np.arange(n + 1)
    g = stream(seed, tag("compare"))
    dw = math.sqrt(dt) * linear.xi * g.standard_normal(n)
    X = np.empty(n + 1)
    x = np.empty(n + 1)
    X[0], x[0] = X0, x0
    av = np.asarray(linear.a(t), dtype=float)
    bv = np.asarray(linear.b(t), dtype=float)
    for i in range(n):
        X[i + 1] = X[i] + (av[i] * X[i] + bv[i]) * dt + dw[i]
        x[i + 1] = x[i] + c(x[i], t[i]) * dt + dw[i]
    Delta = X - x
    dlt = np.array([c(X[i], t[i]) for i in range(n + 1)]) - (av * X + bv)
    s0 = np.sign(dlt[0])
    if not (Delta[0] == 0 or np.sign(Delta[0]) == -s0):
        raise DomainError("initial condition violates the comparison hypothesis")
    zero = np.nonzero(np.sign(dlt[1:]) != s0)[0]
    end = int(zero[0]) + 1 if len(zero) else n + 1
    seg_D, seg_d = Delta[1:end], dlt[1:end]
    if s0 == 0:
        agree = bool(np.all(Delta == 0))
        agree_p = agree
    else:
        agree = bool(np.all(np.sign(seg_D) == -np.sign(seg_d)))
        agree_p = bool(np.all(np.sign(seg_D) == np.sign(seg_d)))
    return ComparisonReport(t, Delta, dlt, end, agree, agree_p, name)


def comparison_fixtures():
    """(name, linear spec, c, X0, x0, horizon) cases."""
    return [
        ("identical", LinearSdeSpec.constant(-1.0, 0.3, 0.5, 0.0, 2.0), lambda x, t: -x + 0.3, 0.4, 0.4, None),
        ("cubic", LinearSdeSpec.constant(0.0, 0.0, 0.5, 0.0, 2.0), lambda x, t: -x**3, 1.0, 1.0, None),
        ("offset", LinearSdeSpec.constant(-1.0, 0.0, 1.0, 0.0, 3.0), lambda x, t: -x + 0.5, 0.0, 0.0, None),
        ("sine", LinearSdeSpec.constant(-1.0, 0.0, 0.3, 0.0, 3.0), lambda x, t: -x - 0.5 * math.sin(x), 1.0, 1.0, None),
        ("timevar", LinearSdeSpec(lambda t: 0.5 * t, _const(0.0), 1.0, -3.0, 0.0),
         lambda x, t: 0.5 * t * x - 0.2 * x**2 - 0.1, 0.5, 0.5, None),
    ]
