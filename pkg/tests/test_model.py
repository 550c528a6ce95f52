import math

import numpy as np
import pytest
from hypothesis import example, given, settings, strategies as st

from mfhyst import DomainError, branches, drift_F, free_energy, lam, make_params, oscillating_field
from mfhyst.model import branch_values, drift_F_dm, free_energy_slope

from oracles import critical_constants, mean_field_roots

P = make_params(2.0)


def test_rejects_subcritical_beta():
    for b in (1.0, 0.5, -2.0):
        with pytest.raises(DomainError):
            make_params(b)


def test_constants_beta2_against_root_find():
    m_c, h_c = critical_constants(2.0)
    assert P.m_c == pytest.approx(0.70710678118654752, abs=1e-14)
    assert P.m_c == pytest.approx(m_c, abs=1e-12)
    assert P.h_c == pytest.approx(h_c, abs=1e-12)
    assert P.h_c == pytest.approx(0.2664, abs=5e-5)


@given(st.floats(1.05, 20.0))
def test_stationarity_inflection_and_closed_forms(beta):
    p = make_params(beta)
    assert abs(p.m_c - math.tanh(beta * (p.m_c - p.h_c))) <= 1e-12
    assert abs(beta * (1 - p.m_c**2) - 1) <= 1e-12
    assert p.mu == pytest.approx((2 / (beta * p.h_c * p.m_c)) ** 0.25, rel=1e-12)
    assert p.nu == pytest.approx((beta * p.m_c) ** 0.75 * (2 / p.h_c) ** 0.25, rel=1e-12)
    assert p.xi == pytest.approx(2 / beta * p.mu * p.nu**2, rel=1e-12)
    # coefficient matching of the rescaled drift
    assert p.h_c * p.nu * p.mu**3 / 2 == pytest.approx(1.0, abs=1e-12)
    assert beta * p.m_c * p.mu / p.nu == pytest.approx(1.0, abs=1e-12)


def test_beta_to_one_limit():
    p = make_params(1.0 + 1e-8)
    assert p.m_c < 1e-3 and p.h_c < 1e-8


def test_free_energy_values():
    assert free_energy(P, 0.0, 0.0) == pytest.approx(-math.log(2) / 2, abs=1e-15)
    with pytest.raises(DomainError):
        free_energy(P, 0.0, 1.0)
    m = np.linspace(-0.9, 0.9, 19)
    assert np.allclose(free_energy(P, 0.0, m), free_energy(P, 0.0, -m), atol=1e-15)


def test_free_energy_slope_matches_finite_difference():
    m, h, d = 0.5, 0.1, 1e-6
    fd = (free_energy(P, h, m + d) - free_energy(P, h, m - d)) / (2 * d)
    assert fd == pytest.approx(free_energy_slope(P, h, m), abs=1e-8)
    assert free_energy_slope(P, h, m) == pytest.approx(-m - h + math.atanh(m) / 2, abs=1e-15)


def test_drift_and_lambda_examples():
    assert drift_F(P, 0.0, 0.0) == 0.0
    assert drift_F(P, 0.5, 0.0) == pytest.approx(math.tanh(1) - 0.5, abs=1e-15)
    assert drift_F(P, 0.5, 0.0) == pytest.approx(0.26159, abs=1e-5)
    mp = branches(P, 0.1).m_plus
    assert abs(drift_F(P, mp, 0.1)) <= 1e-10
    assert lam(P, 0.0, 0.3) == 1.0
    assert lam(P, P.m_c, -P.h_c) == pytest.approx(0.5, abs=1e-10)
    assert lam(P, 1.0, 10.0) == pytest.approx(1 - math.tanh(22), rel=1e-6)


def test_branches_examples():
    b = branches(P, 0.0)
    assert (b.m_minus, b.m_zero, b.m_plus) == pytest.approx((-0.95750, 0.0, 0.95750), abs=1e-5)
    assert b.m_zero == 0.0 or abs(b.m_zero) < 1e-15
    bc = branches(P, -P.h_c)
    assert bc.degenerate and bc.m_plus == pytest.approx(P.m_c, abs=1e-8) and len(bc) == 2
    b2 = branches(P, -2 * P.h_c)
    assert len(b2) == 1 and b2.roots()[0] < 0


@settings(max_examples=60, deadline=None)
@given(st.floats(-0.6, 0.6).filter(lambda h: abs(abs(h) - P.h_c) > 1e-3))
@example(-5e-324)
def test_branches_against_scan(h):
    b = branches(P, h)
    ref = mean_field_roots(2.0, h)
    assert len(b) == len(ref)
    assert np.allclose(b.roots(), ref, atol=1e-10)
    for v in b.roots():
        assert abs(v - math.tanh(2 * (v + h))) <= 1e-12
    if len(b) == 3:
        assert b.m_minus < b.m_zero < b.m_plus
    if abs(h) > P.h_c:
        assert len(b) == 1


def test_branch_values_vectorized_matches_scalar():
    hs = np.linspace(-0.25, 0.25, 41)
    for which in ("plus", "zero", "minus"):
        vec = branch_values(P, hs, which)
        sc = [getattr(branches(P, h), f"m_{which}") for h in hs]
        assert np.allclose(vec, np.array(sc, dtype=float), atol=1e-12)
    assert np.isnan(branch_values(P, 0.5, "minus")[0])


def test_branch_continuity_and_stability_signs():
    delta = 0.01
    hs = np.linspace(-P.h_c + delta, P.h_c - delta, 200)
    mp = branch_values(P, hs, "plus")
    assert np.all(np.diff(mp) > 0)
    assert np.max(np.abs(drift_F(P, mp, hs))) <= 1e-10
    d = 1e-6
    for which, sign in (("plus", -1), ("minus", -1), ("zero", 1)):
        m = branch_values(P, hs, which)
        fd = (drift_F(P, m + d, hs) - drift_F(P, m - d, hs)) / (2 * d)
        assert np.all(np.sign(fd) == sign)


def test_criticality_degeneracy():
    d = 1e-4
    assert abs(drift_F_dm(P, P.m_c, -P.h_c)) <= 1e-8
    f = lambda m: drift_F(P, m, -P.h_c)
    second = (f(P.m_c + d) - 2 * f(P.m_c) + f(P.m_c - d)) / d**2
    assert second == pytest.approx(-2 * 2.0 * P.m_c, abs=1e-6 * 50)


def test_oscillating_field():
    N = 1000
    assert oscillating_field(P, N, 0.0) == -P.h_c
    assert abs(oscillating_field(P, N, math.pi / 2 * N ** (2 / 3))) <= 1e-12
    assert oscillating_field(P, N, 100.0) == pytest.approx(-P.h_c * math.cos(1.0), abs=1e-15)
    assert oscillating_field(P, N, 100.0) == pytest.approx(-0.1439, abs=1e-4)
    with pytest.raises(DomainError):
        oscillating_field(P, 0, 1.0)
