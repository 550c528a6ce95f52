"""Numba kernels for the lumped Glauber chain.

The chain is simulated by thinning: while in state k the proposal clock runs
at a constant rate that dominates c+(k, h) + c-(k, h) for every field value
the run can visit, and a proposal at time t is accepted as an up- or
down-jump with probability c+-(k, h(t)) / bound.  Both kernels below consume
the random stream in the same order, so they produce identical jump
sequences from identical generator states.
"""
import math

import numpy as np
from numba import njit

CODE_END = 0
CODE_LOW = 1
CODE_HIGH = 2
CODE_BUDGET = 3


@njit(inline="always")
def _chat_plus(beta, N, k, h):
    u = h + (2.0 * k - N) / N + 1.0 / N
    return 1.0 / (1.0 + math.exp(-2.0 * beta * u))


@njit(inline="always")
def _chat_minus(beta, N, k, h):
    v = h + (2.0 * k - N) / N - 1.0 / N
    return 1.0 / (1.0 + math.exp(2.0 * beta * v))


@njit(inline="always")
def _bound(beta, N, k, h_lo, h_hi):
    return (N - k) * _chat_plus(beta, N, k, h_hi) + k * _chat_minus(beta, N, k, h_lo)


@njit(cache=True)
def rates_k(beta, N, k, h):
    return (N - k) * _chat_plus(beta, N, k, h), k * _chat_minus(beta, N, k, h)


@njit(inline="always")
def _ref_value(ref_m, r, ref_t0, ref_dt, t):
    x = (t - ref_t0) / ref_dt
    n = ref_m.shape[1]
    if x <= 0.0:
        return ref_m[r, 0]
    if x >= n - 1:
        return ref_m[r, n - 1]
    i = int(x)
    f = x - i
    return ref_m[r, i] * (1.0 - f) + ref_m[r, i + 1] * f


@njit(inline="always")
def _update_dev(sup_dev, ref_m, ref_t0, ref_dt, t, m):
    for r in range(ref_m.shape[0]):
        d = abs(m - _ref_value(ref_m, r, ref_t0, ref_dt, t))
        if d > sup_dev[r]:
            sup_dev[r] = d


@njit(nogil=True, cache=True)
def advance(rng, N, beta, h_off, h_amp, omega, k, t, t_end, h_lo, h_hi,
            ref_t0, ref_dt, ref_m, ref_a, ref_b,
            k_low, k_high, rect_a, rect_b, budget):
    """Run the chain from (t, k) to t_end, or until it leaves the rectangle.

    Returns (k, t, sup_dev, code, n_proposals, n_jumps).  ``sup_dev[r]`` is
    the largest |m - ref_m[r](t)| seen at jump times inside [ref_a, ref_b].
    The rectangle is active on [rect_a, rect_b] and is left once k <= k_low
    or k >= k_high.
    """
    nref = ref_m.shape[0]
    sup_dev = np.zeros(nref)
    n_prop = 0
    n_jump = 0
    m = (2.0 * k - N) / N
    if nref > 0 and ref_a <= t <= ref_b:
        _update_dev(sup_dev, ref_m, ref_t0, ref_dt, t, m)
    if rect_a <= t <= rect_b:
        if k <= k_low:
            return k, t, sup_dev, CODE_LOW, n_prop, n_jump
        if k >= k_high:
            return k, t, sup_dev, CODE_HIGH, n_prop, n_jump
    bound = _bound(beta, N, k, h_lo, h_hi)
    while True:
        t_new = t + rng.standard_exponential() / bound
        if t_new >= t_end:
            t = t_end
            break
        t = t_new
        n_prop += 1
        if n_prop > budget:
            return k, t, sup_dev, CODE_BUDGET, n_prop, n_jump
        h = h_off + h_amp * math.cos(omega * t)
        u = rng.random() * bound
        cp = (N - k) * _chat_plus(beta, N, k, h)
        if u < cp:
            k_new = k + 1
        elif u < cp + k * _chat_minus(beta, N, k, h):
            k_new = k - 1
        else:
            continue
        n_jump += 1
        if nref > 0 and ref_a <= t <= ref_b:
            _update_dev(sup_dev, ref_m, ref_t0, ref_dt, t, m)
            m = (2.0 * k_new - N) / N
            _update_dev(sup_dev, ref_m, ref_t0, ref_dt, t, m)
        else:
            m = (2.0 * k_new - N) / N
        k = k_new
        bound = _bound(beta, N, k, h_lo, h_hi)
        if rect_a <= t <= rect_b:
            if k <= k_low:
                return k, t, sup_dev, CODE_LOW, n_prop, n_jump
            if k >= k_high:
                return k, t, sup_dev, CODE_HIGH, n_prop, n_jump
    if nref > 0 and ref_a <= t <= ref_b:
        _update_dev(sup_dev, ref_m, ref_t0, ref_dt, t, m)
    return k, t, sup_dev, CODE_END, n_prop, n_jump


@njit(nogil=True, cache=True)
def record(rng, N, beta, h_off, h_amp, omega, k, t, t_end, h_lo, h_hi,
           times_out, k_out, stride, budget):
    """Store every ``stride``-th jump as (time, k after the jump).

    Returns (n_stored, k, t, code, n_proposals, n_jumps).  Stops with
    CODE_BUDGET when the proposal budget or the output capacity runs out.
    """
    cap = times_out.shape[0]
    n_store = 0
    n_prop = 0
    n_jump = 0
    bound = _bound(beta, N, k, h_lo, h_hi)
    while True:
        t_new = t + rng.standard_exponential() / bound
        if t_new >= t_end:
            t = t_end
            break
        t = t_new
        n_prop += 1
        if n_prop > budget:
            return n_store, k, t, CODE_BUDGET, n_prop, n_jump
        h = h_off + h_amp * math.cos(omega * t)
        u = rng.random() * bound
        cp = (N - k) * _chat_plus(beta, N, k, h)
        if u < cp:
            k += 1
        elif u < cp + k * _chat_minus(beta, N, k, h):
            k -= 1
        else:
            continue
        n_jump += 1
        bound = _bound(beta, N, k, h_lo, h_hi)
        if n_jump % stride == 0:
            if n_store >= cap:
                return n_store, k, t, CODE_BUDGET, n_prop, n_jump
            times_out[n_store] = t
            k_out[n_store] = k
            n_store += 1
    return n_store, k, t, CODE_END, n_prop, n_jump
