"""Static mean-field theory of the Curie-Weiss magnet.

Free energy, equilibrium branches of ``m = tanh(beta (m + h))``, the
macroscopic drift and the constants that fix the critical window around
``(m_c, -h_c)``.
"""
from __future__ import annotations

from dataclasses import asdict, dataclass
from typing import Optional

import numpy as np

from .errors import DomainError

ROOT_TOL = 1e-13
TANGENCY_TOL = 1e-12
_EDGE = 1.0 - 1e-15


@dataclass(frozen=True)
class ModelParams:
    """Inverse temperature and the derived critical constants.

    ``mu`` and ``nu`` rescale time and magnetization near the critical point;
    ``xi = (2/beta) mu nu^2`` is the quadratic-variation rate of the rescaled
    fluctuations, so the Brownian amplitude of the limit equation is
    ``sqrt(xi)`` (see :attr:`noise_amplitude`).
    """

    beta: float
    m_c: float
    h_c: float
    mu: float
    nu: float
    xi: float

    @property
    def noise_amplitude(self) -> float:
        return float(np.sqrt(self.xi))

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass(frozen=True)
class BranchSet:
    """Roots of the mean field equation at one value of h, in increasing order.

    ``degenerate`` is set at |h| = h_c, where two roots merge into the tangent
    double root; the merged root is reported once (as ``m_plus`` at -h_c and
    as ``m_minus`` at +h_c) and ``m_zero`` is None.
    """

    m_minus: Optional[float]
    m_zero: Optional[float]
    m_plus: Optional[float]
    degenerate: bool = False

    def roots(self) -> list[float]:
        return [v for v in (self.m_minus, self.m_zero, self.m_plus) if v is not None]

    def __len__(self) -> int:
        return len(self.roots())


def make_params(beta: float) -> ModelParams:
    beta = float(beta)
    if not beta > 1.0:
        raise DomainError(f"beta must exceed 1 for a phase transition, got {beta}")
    # inflection: beta (1 - m^2) = 1; stationarity then fixes h_c
    m_c = float(np.sqrt(1.0 - 1.0 / beta))
    h_c = float(m_c - np.arctanh(m_c) / beta)
    mu = (2.0 / (beta * h_c * m_c)) ** 0.25
    nu = (beta * m_c) ** 0.75 * (2.0 / h_c) ** 0.25
    xi = 2.0 / beta * mu * nu**2
    return ModelParams(beta=beta, m_c=m_c, h_c=h_c, mu=float(mu), nu=float(nu), xi=float(xi))


def entropy(m):
    """Binary entropy of a magnetization density, natural log."""
    m = np.asarray(m, dtype=float)
    if np.any(np.abs(m) > 1.0):
        raise DomainError("entropy requires |m| <= 1")
    p = np.clip((1.0 + m) / 2.0, 0.0, 1.0)
    q = 1.0 - p
    with np.errstate(divide="ignore", invalid="ignore"):
        s = -np.where(q > 0, q * np.log(q), 0.0) - np.where(p > 0, p * np.log(p), 0.0)
    return s if s.ndim else float(s)


def free_energy(params: ModelParams, h: float, m):
    m = np.asarray(m, dtype=float)
    if np.any(np.abs(m) >= 1.0):
        raise DomainError("free energy is defined for |m| < 1")
    mm = np.clip(m, -_EDGE, _EDGE)
    out = -(mm**2) / 2.0 - h * mm - entropy(mm) / params.beta
    return out if np.ndim(out) else float(out)


def free_energy_slope(params: ModelParams, h: float, m):
    """d(phi)/dm = -m - h + artanh(m)/beta."""
    m = np.asarray(m, dtype=float)
    if np.any(np.abs(m) >= 1.0):
        raise DomainError("free energy is defined for |m| < 1")
    out = -m - h + np.arctanh(m) / params.beta
    return out if np.ndim(out) else float(out)


def drift_F(params: ModelParams, m, h):
    out = -np.asarray(m, dtype=float) + np.tanh(params.beta * (np.asarray(m) + h))
    return out if np.ndim(out) else float(out)


def drift_F_dm(params: ModelParams, m, h):
    """Partial derivative of the drift with respect to m."""
    th = np.tanh(params.beta * (np.asarray(m, dtype=float) + h))
    out = -1.0 + params.beta * (1.0 - th**2)
    return out if np.ndim(out) else float(out)


def lam(params: ModelParams, m, h):
    """Diffusion coefficient 1 - m tanh(beta (m + h)) of the lumped chain."""
    m = np.asarray(m, dtype=float)
    out = 1.0 - m * np.tanh(params.beta * (m + h))
    return out if np.ndim(out) else float(out)


def oscillating_field(params: ModelParams, N: int, t, kappa: float = 2.0 / 3.0):
    """Field -h_c cos(omega t) with omega = N^-kappa; the critical time is t = 0."""
    if N < 1:
        raise DomainError("N must be positive")
    omega = float(N) ** (-kappa)
    out = -params.h_c * np.cos(omega * np.asarray(t, dtype=float))
    return out if np.ndim(out) else float(out)


def _g(beta, m, h):
    return m - np.tanh(beta * (m + h))


def _solve_interval(beta, h, lo, hi):
    """Bisection on a monotone bracket, then Newton polish."""
    glo = _g(beta, lo, h)
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        gm = _g(beta, mid, h)
        if gm == 0.0 or hi - lo < 1e-15:
            break
        if (gm > 0) == (glo > 0):
            lo, glo = mid, gm
        else:
            hi = mid
    x = 0.5 * (lo + hi)
    for _ in range(5):
        th = np.tanh(beta * (x + h))
        d = 1.0 - beta * (1.0 - th * th)
        if d == 0.0:
            break
        step = (x - th) / d
        xn = x - step
        if not (min(lo, hi) - 1e-12 <= xn <= max(lo, hi) + 1e-12):
            break
        x = xn
        if abs(step) < 1e-17:
            break
    return float(x)


def _breakpoints(params: ModelParams, h: float):
    a = np.arctanh(params.m_c) / params.beta
    return float(np.clip(-h - a, -1.0, 1.0)), float(np.clip(-h + a, -1.0, 1.0))


def branches(params: ModelParams, h: float) -> BranchSet:
    beta = params.beta
    h = float(h)
    b1, b2 = _breakpoints(params, h)
    g_max = _g(beta, b1, h)
    g_min = _g(beta, b2, h)
    if abs(g_max) <= TANGENCY_TOL and b1 > -1.0:
        # tangency of the lower pair (h = +h_c)
        m_plus = _solve_interval(beta, h, b2, 1.0)
        return BranchSet(m_minus=float(b1), m_zero=None, m_plus=m_plus, degenerate=True)
    if abs(g_min) <= TANGENCY_TOL and b2 < 1.0:
        m_minus = _solve_interval(beta, h, -1.0, b1)
        return BranchSet(m_minus=m_minus, m_zero=None, m_plus=float(b2), degenerate=True)
    if g_max > 0 and g_min < 0:
        return BranchSet(
            m_minus=_solve_interval(beta, h, -1.0, b1),
            m_zero=_solve_interval(beta, h, b1, b2),
            m_plus=_solve_interval(beta, h, b2, 1.0),
        )
    if g_max <= 0:
        # only the right-hand increasing piece crosses zero
        return BranchSet(m_minus=None, m_zero=None, m_plus=_solve_interval(beta, h, b2, 1.0))
    return BranchSet(m_minus=_solve_interval(beta, h, -1.0, b1), m_zero=None, m_plus=None)


def branch_values(params: ModelParams, h, which: str):
    """Vectorized branch evaluation (``which`` in {'plus', 'zero', 'minus'}).

    Returns NaN where the requested branch does not exist.
    """
    h = np.atleast_1d(np.asarray(h, dtype=float))
    beta = params.beta
    a = np.arctanh(params.m_c) / beta
    b1 = np.clip(-h - a, -1.0, 1.0)
    b2 = np.clip(-h + a, -1.0, 1.0)
    if which == "plus":
        lo, hi = b2.copy(), np.ones_like(h)
        exists = _g(beta, b2, h) <= TANGENCY_TOL
    elif which == "minus":
        lo, hi = -np.ones_like(h), b1.copy()
        exists = _g(beta, b1, h) >= -TANGENCY_TOL
    elif which == "zero":
        lo, hi = b1.copy(), b2.copy()
        exists = (_g(beta, b1, h) > 0) & (_g(beta, b2, h) < 0)
    else:
        raise ValueError(f"unknown branch {which!r}")
    glo = _g(beta, lo, h)
    for _ in range(64):
        mid = 0.5 * (lo + hi)
        gm = _g(beta, mid, h)
        same = np.sign(gm) == np.sign(glo)
        lo = np.where(same, mid, lo)
        glo = np.where(same, gm, glo)
        hi = np.where(same, hi, mid)
    x = 0.5 * (lo + hi)
    for _ in range(3):
        th = np.tanh(beta * (x + h))
        d = 1.0 - beta * (1.0 - th * th)
        safe = np.abs(d) > 1e-8
        x = np.where(safe, x - (x - th) / np.where(safe, d, 1.0), x)
    return np.where(exists, x, np.nan)
