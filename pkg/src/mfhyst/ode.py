"""Deterministic flows: the Riccati equation y' = t^2 - y^2 and the mean-field ODE.

Blowup of the Riccati flow is certified once y <= -(|t| + 3): below -|t| the
drift is negative and dominated by -y^2/2, so the solution must reach -inf.
The blowup time itself is then located by integrating u = 1/y, which obeys
u' = 1 - t^2 u^2 and simply crosses zero.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np
from scipy.integrate import quad, solve_ivp

from .errors import DomainError, NumericalError
from .model import ModelParams, branch_values, drift_F, drift_F_dm

CERT_MARGIN = 3.0


@dataclass
class OdeSolution:
    t: np.ndarray
    y: np.ndarray
    blowup_time: Optional[float] = None
    dense: Optional[Callable] = None
    meta: dict = field(default_factory=dict)

    @property
    def certified_blowup(self) -> bool:
        return self.blowup_time is not None

    def __call__(self, t):
        t = np.asarray(t, dtype=float)
        if self.dense is not None:
            out = self.dense(t)
            out = out[0] if np.ndim(out) > np.ndim(t) else out
        else:
            out = np.interp(t, self.t, self.y)
        return out if np.ndim(out) else float(out)

    def export(self, path, header: str = "") -> None:
        from .harness.io import write_columns

        write_columns(path, {"t": self.t, "y": self.y}, header=header or None)


def _riccati(t, y):
    return t * t - y * y


def _reciprocal_zero(t_c, y_c, tol):
    """Time at which u = 1/y, started at (t_c, 1/y_c), first reaches 0."""
    u0 = 1.0 / y_c

    def ev(t, u):
        return u[0]

    ev.terminal = True
    ev.direction = 1
    # |u| < 1/|t| holds at certification, so u' > 0 and the zero is close
    horizon = t_c + 4.0 * abs(u0) + 1.0
    sol = solve_ivp(lambda t, u: 1.0 - t * t * u * u, (t_c, horizon), [u0], method="DOP853",
                    rtol=tol, atol=tol * 1e-3, events=ev)
    if not sol.t_events[0].size:
        raise NumericalError("reciprocal integration failed to locate the blowup time")
    return float(sol.t_events[0][0])


def solve_riccati(t0: float, y0: float, t_end: float, tol: float = 1e-10,
                  n_out: Optional[int] = None) -> OdeSolution:
    """Adaptive DOP853 solution of y' = t^2 - y^2 with certified blowup detection."""
    if not t_end > t0:
        raise DomainError("need t_end > t0")
    if not np.isfinite(y0):
        raise DomainError("y0 must be finite")

    def cert(t, y):
        return y[0] + abs(t) + CERT_MARGIN

    cert.terminal = True
    cert.direction = -1
    if cert(t0, [y0]) <= 0:
        return OdeSolution(np.array([t0]), np.array([y0]), _reciprocal_zero(t0, y0, tol),
                           meta={"t0": t0, "y0": y0, "tol": tol, "certified_at": t0})
    sol = solve_ivp(_riccati, (t0, t_end), [y0], method="DOP853", rtol=tol, atol=tol,
                    events=cert, dense_output=True)
    if sol.status == -1:
        raise NumericalError(f"Riccati integration failed: {sol.message}")
    blow = None
    meta = {"t0": t0, "y0": y0, "tol": tol}
    if sol.t_events[0].size:
        t_c = float(sol.t_events[0][0])
        blow = _reciprocal_zero(t_c, float(sol.y_events[0][0][0]), tol)
        meta["certified_at"] = t_c
    t = sol.t
    if n_out:
        t = np.linspace(t0, sol.t[-1], n_out)
    y = sol.sol(t)[0]
    return OdeSolution(t, y, blow, sol.sol, meta)


def asymptotic_critical(t):
    """Large-t expansion of the separatrix: -t - 1/(2t) + 3/(8 t^3)."""
    t = np.asarray(t, dtype=float)
    return -t - 0.5 / t + 0.375 / t**3


@dataclass
class CriticalCurve:
    t: np.ndarray
    y: np.ndarray
    bracket: tuple
    tol: float
    dense: Optional[Callable] = None

    @property
    def y0(self) -> float:
        return float(self.y[0])

    def __call__(self, t):
        out = self.dense(np.asarray(t, dtype=float))[0] if self.dense else np.interp(t, self.t, self.y)
        return out if np.ndim(out) else float(out)

    def to_dict(self) -> dict:
        return {"t": self.t.tolist(), "y": self.y.tolist(), "bracket": list(self.bracket), "tol": self.tol}

    @classmethod
    def from_dict(cls, d: dict):
        return cls(np.asarray(d["t"]), np.asarray(d["y"]), tuple(d["bracket"]), float(d["tol"]))


def regime(y0: float, t0: float = 0.0, t_max: float = 10.0, tol: float = 1e-12) -> int:
    """+1 if the solution crosses above -t, -1 if blowup is certified, 0 if neither by t_max."""

    def above(t, y):
        return y[0] + t

    above.terminal = True
    above.direction = 1

    def cert(t, y):
        return y[0] + abs(t) + CERT_MARGIN

    cert.terminal = True
    cert.direction = -1
    if y0 + t0 > 0:
        return 1
    sol = solve_ivp(_riccati, (t0, t_max), [y0], method="DOP853", rtol=tol, atol=tol,
                    events=[above, cert])
    if sol.t_events[0].size:
        return 1
    if sol.t_events[1].size:
        return -1
    return 0


def critical_curve(t_max: float = 10.0, tol: float = 1e-10, n_grid: int = 1001,
                   t_start: Optional[float] = None) -> CriticalCurve:
    """Separatrix y* on [0, t_max].

    The curve is obtained by integrating backward from its large-t expansion
    (the backward direction is contracting), and independently y*(0) is
    bracketed by bisection on the track/blowup dichotomy.
    """
    if not t_max > 0:
        raise DomainError("t_max must be positive")
    lo, hi = -1.0, 0.0
    r_lo, r_hi = regime(lo, t_max=max(t_max, 6.0)), regime(hi, t_max=max(t_max, 6.0))
    if r_lo != -1 or r_hi != 1:
        raise NumericalError("initial bracket [-1, 0] does not straddle the separatrix")
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        r = regime(mid, t_max=max(t_max, 6.0))
        if r == 0:
            raise NumericalError("bisection midpoint undecided; integrator fault")
        if r > 0:
            hi = mid
        else:
            lo = mid
    t_far = t_start if t_start is not None else max(2.0 * t_max, t_max + 20.0)
    back = solve_ivp(_riccati, (t_far, 0.0), [float(asymptotic_critical(t_far))], method="DOP853",
                     rtol=1e-13, atol=1e-13, dense_output=True)
    if back.status != 0:
        raise NumericalError(f"backward separatrix integration failed: {back.message}")
    grid = np.linspace(0.0, t_max, n_grid)
    return CriticalCurve(grid, back.sol(grid)[0], (lo, hi), tol, back.sol)


def tracking_solution(T_big: float = 20.0, t_end: float = 20.0, tol: float = 1e-10,
                      n_out: int = 4001) -> OdeSolution:
    """The solution asymptotic to -t as t -> -inf, started at y(-T_big) = T_big + 1/(2 T_big)."""
    if T_big < 10.0:
        raise DomainError("T_big must be at least 10")
    y_init = T_big + 0.5 / T_big
    sol = solve_riccati(-T_big, y_init, t_end, tol=tol, n_out=n_out)
    if sol.certified_blowup:
        raise NumericalError("tracking solution blew up")
    neg = sol.t < 0
    if np.any(sol.y[neg] < -sol.t[neg] - 10 * tol) or np.min(sol.y) <= 0:
        raise NumericalError("tracking solution violates y >= -t for t < 0 or positivity")
    sol.meta["T_big"] = T_big
    return sol


# ----------------------------------------------------------- mean field

def macroscopic_flow(params: ModelParams, t0: float, m0: float, t_end: float, *, field=None,
                     N: Optional[int] = None, kappa: float = 2.0 / 3.0,
                     h_const: Optional[float] = None, h_func: Optional[Callable] = None,
                     tol: float = 1e-10, events=None) -> OdeSolution:
    """Solve m' = F(m, h(t)).

    The field is taken from ``h_func``, a :class:`~mfhyst.chain.FieldSpec`,
    a constant, or the oscillating field at size N (in that order).
    """
    from .chain import FieldSpec

    if not -1.0 < m0 < 1.0:
        raise DomainError("m0 must lie in (-1, 1)")
    if h_func is None:
        if field is None:
            if h_const is not None:
                field = FieldSpec.constant(h_const)
            elif N is not None:
                field = FieldSpec.oscillating(params, N, kappa)
            else:
                raise DomainError("no field specified")
        h_func = field
    beta = params.beta

    def rhs(t, m):
        return [-m[0] + math.tanh(beta * (m[0] + float(h_func(t))))]

    if t_end == t0:
        return OdeSolution(np.array([t0]), np.array([m0]), meta={"m0": m0})
    sol = solve_ivp(rhs, (t0, t_end), [m0], method="DOP853", rtol=tol, atol=tol, dense_output=True,
                    events=events)
    if sol.status == -1:
        raise NumericalError(f"mean-field integration failed: {sol.message}")
    out = OdeSolution(sol.t, sol.y[0], None, sol.sol, {"m0": m0, "t0": t0, "tol": tol})
    out.meta["t_events"] = sol.t_events
    return out


@dataclass
class EscapeSchedule:
    N: int
    T: float
    delta: float
    t_exit: float
    t_prime: float
    t_doubleprime: float
    t_tripleprime: float
    max_excess_after: float

    @property
    def gaps(self):
        return (self.t_prime - self.t_exit, self.t_doubleprime - self.t_prime,
                self.t_tripleprime - self.t_doubleprime)


def escape_schedule(params: ModelParams, N: int, T: float, delta: float = 0.05,
                    exit_time: float = 0.0, kappa: float = 2.0 / 3.0,
                    tol: float = 1e-10) -> EscapeSchedule:
    """Times at which the flow from the lower exit point reaches m_c - delta,
    m_-(h) + delta and m_-(h) + N^-1/2.

    ``exit_time`` is in rescaled units; the flow starts at microscopic time
    mu N^(1/3) exit_time from m_c - 2T/(nu N^(1/3)).
    """
    from .chain import FieldSpec

    field = FieldSpec.oscillating(params, N, kappa)
    t_exit = params.mu * N ** (1.0 / 3.0) * exit_time
    m_start = params.m_c - 2.0 * T / (params.nu * N ** (1.0 / 3.0))
    # the lower branch exists while h < h_c, i.e. for omega t < pi
    t_stop = t_exit + 0.45 * math.pi * N**kappa
    # the explicit integrator needs O(1) steps per unit time, so grow the
    # horizon until the last threshold is crossed instead of integrating to t_stop
    span = min(t_stop - t_exit, 4.0 * params.mu * T * N ** (1.0 / 3.0) + 50.0)
    while True:
        t_end = t_exit + span
        sol = macroscopic_flow(params, t_exit, m_start, t_end, field=field, tol=tol)
        tt = np.linspace(t_exit, t_end, 200001)
        mm = sol(tt)
        excess = mm - branch_values(params, field(tt), "minus")
        if np.any(excess <= N ** -0.5) or t_end >= t_stop:
            break
        span = min(2.0 * span, t_stop - t_exit)

    def first(cond, name):
        idx = np.nonzero(cond)[0]
        if not idx.size:
            raise NumericalError(f"flow never reached the {name} threshold")
        i = idx[0]
        if i == 0:
            return tt[0]
        return _refine(sol, field, params, tt[i - 1], tt[i], name, delta, N)

    t1 = first(mm <= params.m_c - delta, "m_c - delta")
    t2 = first(excess <= delta, "m_- + delta")
    t3 = first(excess <= N ** -0.5, "m_- + N^-1/2")
    after = tt >= t2
    return EscapeSchedule(N, T, delta, t_exit, float(t1), float(t2), float(t3),
                          float(np.max(excess[after])))


def _refine(sol, field, params, a, b, name, delta, N):
    from scipy.optimize import brentq

    if name == "m_c - delta":
        g = lambda t: sol(t) - (params.m_c - delta)
    else:
        thr = delta if name == "m_- + delta" else N ** -0.5
        g = lambda t: sol(t) - float(branch_values(params, field(t), "minus")[0]) - thr
    return brentq(g, a, b, xtol=1e-10 * max(1.0, abs(b)))


def fit_escape_scaling(params: ModelParams, Ns, T: float = 5.0, delta: float = 0.05,
                       exit_time: float = 0.0) -> dict:
    """Log-log slope of t'-exit in N, spread of t''-t' and slope of t'''-t'' in ln N."""
    Ns = np.asarray(Ns, dtype=float)
    sched = [escape_schedule(params, int(n), T, delta, exit_time) for n in Ns]
    g1 = np.array([s.gaps[0] for s in sched])
    g2 = np.array([s.gaps[1] for s in sched])
    g3 = np.array([s.gaps[2] for s in sched])
    lnN = np.log(Ns)
    if np.all(g1 > 0):
        slope1 = float(np.polyfit(lnN, np.log(g1), 1)[0])
    else:
        slope1 = float("nan")
    spread2 = float((g2.max() - g2.min()) / g2.mean()) if g2.mean() > 0 else float("nan")
    slope3 = float(np.polyfit(lnN, g3, 1)[0])
    return {"N": Ns.tolist(), "gap1": g1.tolist(), "gap2": g2.tolist(), "gap3": g3.tolist(),
            "slope_gap1": slope1, "spread_gap2": spread2, "slope_gap3_lnN": slope3,
            "schedules": sched}


def flow_stability_after(params: ModelParams, sched: EscapeSchedule, kappa: float = 2.0 / 3.0,
                         n: int = 2001) -> float:
    """Max of dF/dm along the escape flow on [t'', t''' + (t''' - t'')]."""
    from .chain import FieldSpec

    field = FieldSpec.oscillating(params, sched.N, kappa)
    m_start = params.m_c - 2.0 * sched.T / (params.nu * sched.N ** (1.0 / 3.0))
    t_b = sched.t_tripleprime + (sched.t_tripleprime - sched.t_doubleprime)
    sol = macroscopic_flow(params, sched.t_exit, m_start, t_b, field=field)
    tt = np.linspace(sched.t_doubleprime, t_b, n)
    return float(np.max(drift_F_dm(params, sol(tt), field(tt))))


# ------------------------------------------------------- integral bounds

def gauss_integral(gamma: float, s: float, t: float, sign: int = 1) -> float:
    """Quadrature of the integral of exp(sign gamma u^2) over [s, t]."""
    if sign > 0:
        # scale out exp(gamma t^2) to keep the integrand O(1)
        val, _ = quad(lambda u: math.exp(gamma * (u * u - t * t)), s, t, epsabs=0, epsrel=1e-13,
                      limit=200)
        return val * math.exp(gamma * t * t)
    val, _ = quad(lambda u: math.exp(-gamma * (u * u - s * s)), s, t, epsabs=0, epsrel=1e-13,
                  limit=200)
    return val * math.exp(-gamma * s * s)


def exp_plus_bounds(gamma: float, s: float, t: float) -> tuple[float, float]:
    if not s > 1.0 / math.sqrt(2.0 * gamma):
        raise DomainError("upper bound needs s > 1/sqrt(2 gamma)")
    pref = math.exp(gamma * t * t) / (2.0 * gamma * t)
    lo = pref * (1.0 - math.exp(-gamma * (t * t - s * s) / 2.0))
    hi = pref * (2.0 * gamma * s * s / (2.0 * gamma * s * s - 1.0))
    return lo, hi


def exp_minus_bounds(gamma: float, s: float, t: float) -> tuple[float, float]:
    pref = math.exp(-gamma * s * s) / (2.0 * gamma * s)
    lo = pref * (1.0 - math.exp(-gamma * (t * t - s * s) / 2.0) / t) * (2.0 * gamma * s * s / (2.0 * gamma * s * s + 1.0))
    return lo, pref
