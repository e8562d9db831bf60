import math
from fractions import Fraction as Fr

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from ergolock import dynamics as dyn
from ergolock.errors import InvalidInput
from ergolock.locking import (PerturbationBudget, budget, c1_bound, certificate,
                              certificate_exact, competitor_margin, defect_check,
                              defect_check_input, empirical_lock_test, locking_scan,
                              summation_bound)
from ergolock.orbits import enumerate_periodic, make_orbit
from ergolock.potentials import Cosine, Linear, constant, distance_potential
from ergolock.subaction import compute_subaction

EXAMPLE = dict(K=1, delta=0.1, lam=2, L=3, lip_f=2, gap=0.5, p0=1, alpha=1)


def test_certificate_example():
    c = certificate(**EXAMPLE)
    assert (c.r, c.L1, c.L2, c.L3, c.C) == (0.03125, 11.0, 8.0, 16.0, 363264.0)


def test_certificate_exact_rationals():
    args = {k: v for k, v in EXAMPLE.items() if k != "alpha"}
    e = certificate_exact(**args)
    assert e == {"r": Fr(1, 32), "L1": 11, "L2": 8, "L3": 16, "C": 363264}


def test_certificate_zero_L():
    c = certificate(**{**EXAMPLE, "L": 0})
    assert c.L1 == 5 and c.L3 == 1


def test_certificate_rejects_non_expanding():
    with pytest.raises(InvalidInput):
        certificate(**{**EXAMPLE, "lam": 1.0})


@given(K=st.fractions(Fr(1, 10), 10), delta=st.fractions(Fr(1, 100), 1),
       lam=st.fractions(Fr(11, 10), 8), L=st.fractions(0, 20), lip=st.fractions(Fr(1, 2), 10),
       gap=st.fractions(Fr(1, 100), 1), p0=st.integers(1, 20))
def test_float_certificate_matches_rationals(K, delta, lam, L, lip, gap, p0):
    vals = [float(v) for v in (K, delta, lam, L, lip, gap)]
    c = certificate(*vals, p0, 1.0)
    e = certificate_exact(*(Fr(v) for v in vals), p0)
    for name in ("r", "L1", "L2", "L3", "C"):
        exact = e[name]
        got = getattr(c, name)
        assert abs(Fr(got) - exact) <= 8 * abs(exact) * Fr(2) ** -52


def test_budget_examples():
    c = certificate(**EXAMPLE)
    b = budget(c, 2 * math.pi, 1e-12)
    assert b.xi_seminorm_max == pytest.approx(11.41, abs=5e-3)
    assert b.xi_sup_max == pytest.approx(2 * math.pi * 1e-12)
    assert b.penalty_scale == pytest.approx(0.4 * b.xi_seminorm_max)
    assert b.d_g_max == 0.125
    z = budget(c, 2 * math.pi, 0.0)
    assert (z.xi_seminorm_max, z.xi_sup_max, z.penalty_scale) == (0.0, 0.0, 0.0)
    z = budget(c, 0.0, 1e-6)
    assert (z.xi_seminorm_max, z.xi_sup_max, z.penalty_scale) == (0.0, 0.0, 0.0)
    with pytest.raises(InvalidInput):
        budget(c, 1.0, -1.0)


def test_budget_theta_lock_cap():
    c = certificate(**EXAMPLE)
    b = budget(c, 1.0, 1e-14, diam=1.0, theta_lock=0.5)
    assert b.d_g_max == pytest.approx((9 * c.C * 2 / 0.5) ** -2)


# products in the subnormal range round, so d stays zero or comfortably normal
@given(s=st.floats(1e-3, 1e3), d=st.just(0.0) | st.floats(1e-300, 1e-3))
def test_budget_linear_in_seminorm(s, d):
    c = certificate(**EXAMPLE)
    b1, b2 = budget(c, s, d), budget(c, 2 * s, d)
    assert b2.xi_seminorm_max == 2 * b1.xi_seminorm_max
    assert b2.xi_sup_max == 2 * b1.xi_sup_max
    assert b2.penalty_scale == 2 * b1.penalty_scale
    assert min(b1.xi_seminorm_max, b1.xi_sup_max, b1.penalty_scale) >= 0


def test_bound_helpers():
    c = certificate(**EXAMPLE)
    assert c1_bound(c, 1e-12) == pytest.approx(3 * 363264 * 1e-6)
    assert summation_bound(1.0, 0.5, 2.0, 1.0) == 4.0


@pytest.fixture(scope="module")
def doubling_setup():
    m, p = dyn.doubling(), Cosine(0.0, 1.0)
    sub = compute_subaction(m, p, n=4096)
    orb = make_orbit(m, 0.0, 1)
    cert = certificate(1.0, 0.5, 2.0, max(sub.seminorm_ratio, 1.0), 2.0, 1.0, 1, 1.0)
    return m, p, sub, orb, cert


def test_defect_check_on_orbit(doubling_setup):
    m, p, sub, orb, cert = doubling_setup
    inp = defect_check_input(cert, p, sub, m, orb, 0.0)
    assert inp.eta == 0.0 and inp.rho is None
    avg, ok = defect_check(m, sub, orb, inp, 0.0, 100)
    assert avg == inp.eta and ok


def test_defect_check_far_point(doubling_setup):
    m, p, sub, orb, cert = doubling_setup
    inp = defect_check_input(cert, p, sub, m, orb, 1e-12)
    assert inp.eta < inp.tau_pert and inp.rho > 0
    assert float(inp.Psi_g(0.5)) < inp.eta


def test_defect_check_random_start(doubling_setup):
    m, p, sub, orb, cert = doubling_setup
    inp = defect_check_input(cert, p, sub, m, orb, 0.0)
    avg, ok = defect_check(m, sub, orb, inp, Fr(123457, 1000003), 10 ** 5)
    assert ok


def test_lock_test_zero_budget():
    m = dyn.doubling()
    orb = make_orbit(m, 0.0, 1)
    r = empirical_lock_test(m, Cosine(0.0, 1.0), orb, 8, 25, PerturbationBudget(0, 0, 0, 1))
    assert r.lock_rate == 1.0 and r.failures == []


def test_lock_test_logistic_two_cycle():
    g = dyn.logistic(3.2)
    orbits = enumerate_periodic(g, 8)
    two = [o for o in orbits if o.period == 2][0]
    p = distance_potential(two, 1.0, 1.0)
    _, best_other, margin = competitor_margin(orbits, p, two)
    assert best_other < 0 and margin > 0
    bud = PerturbationBudget(math.inf, 0.49 * margin, 0.0, math.inf)
    r = empirical_lock_test(g, p, two, 8, 50, bud, seed=3, orbits=orbits)
    assert r.lock_rate == 1.0


def test_lock_test_certified_doubling(doubling_setup):
    m, p, sub, orb, cert = doubling_setup
    bud = budget(cert, p.seminorm().holder_seminorm, 1e-12)
    r = empirical_lock_test(m, p, orb, 8, 30, bud, seed=11)
    assert r.lock_rate == 1.0


def test_lock_test_large_budget_can_fail():
    m = dyn.doubling()
    orb = make_orbit(m, 0.0, 1)
    bud = PerturbationBudget(1e3, 50.0, 0.0, 1.0)
    r = empirical_lock_test(m, Cosine(0.0, 1.0), orb, 6, 40, bud, seed=1)
    assert r.lock_rate < 1.0 and len(r.failures) == 40 - round(40 * r.lock_rate)


def test_scan_doubling_theta_zero():
    m = dyn.doubling()
    T = np.linspace(0, 1, 101, endpoint=False)
    tab = locking_scan(lambda a: m, lambda t: Cosine(t, 1.0), [0.0], T, max_period=10)
    assert tab.period[0, 0] == 1 and tab.itinerary[0, 0] == "0"
    assert tab.status[0, 0] == "ok"
    runs = tab.intervals()
    assert any(r[1] <= 0.0 <= r[2] and r[3] == 1 for r in runs)


def test_scan_logistic_linear_brute_force():
    A = np.linspace(3.1, 3.5, 9)
    tab = locking_scan(dyn.logistic, lambda t: Linear(1.0, 0.0), A, [0.0], max_period=8,
                       theta_periodic=False)
    a = 3.2
    i = int(np.argmin(np.abs(A - a)))
    fixed = 1 - 1 / a
    disc = math.sqrt((a + 1) * (a - 3))
    two_avg = (a + 1) / (2 * a)  # mean of the 2-cycle roots
    assert disc > 0
    expect = fixed if fixed >= two_avg else two_avg
    assert tab.average[i, 0] == pytest.approx(expect, abs=1e-12)


def test_scan_degenerate_column():
    tab = locking_scan(dyn.logistic, lambda t: constant(t), [3.2, 3.3], [0.0, 1.0], max_period=4,
                       theta_periodic=False)
    assert np.all(tab.status == "degenerate") and not tab.locked.any()


@given(c=st.floats(-3, 3), col=st.integers(0, 19))
def test_scan_shift_invariance(c, col):
    T = np.linspace(0, 1, 20, endpoint=False)
    A = [3.3, 3.5, 3.9]
    t1 = locking_scan(dyn.logistic, lambda t: Cosine(t, 1.0), A, T[col:col + 1], max_period=6)
    t2 = locking_scan(dyn.logistic, lambda t: Cosine(t, 1.0) + constant(c), A, T[col:col + 1],
                      max_period=6)
    assert t1.itinerary.tolist() == t2.itinerary.tolist()


def test_scan_threads_deterministic():
    T = np.linspace(0, 1, 16, endpoint=False)
    A = np.linspace(3.0, 3.9, 6)
    t1 = locking_scan(dyn.logistic, lambda t: Cosine(t, 1.0), A, T, 6, threads=1)
    t2 = locking_scan(dyn.logistic, lambda t: Cosine(t, 1.0), A, T, 6, threads=3)
    assert list(t1.rows()) == list(t2.rows())


def test_scan_empty_grid():
    with pytest.raises(InvalidInput):
        locking_scan(dyn.logistic, lambda t: Cosine(t, 1.0), [], [0.0])
