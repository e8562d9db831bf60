import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from ergolock import dynamics as dyn
from ergolock.errors import NewtonDiverged, PeriodChanged
from ergolock.orbits import (birkhoff_average, continue_along_path, continue_orbit,
                             enumerate_periodic, least_rotation, lyndon_words, make_orbit,
                             maximizing_orbit, orbit_averages, residual_bound, same_orbit)
from ergolock.potentials import Cosine, Linear


def _necklaces(k, n, circle=False):
    # number of period-n orbits of a full k-branch map (Moebius inversion over
    # fixed-point counts k^n, or k^n - 1 on the circle where 0 and 1 coincide)
    def mu(m):
        res, q = 1, 2
        while q * q <= m:
            if m % q == 0:
                m //= q
                if m % q == 0:
                    return 0
                res = -res
            q += 1
        return -res if m > 1 else res
    return sum(mu(d) * (k ** (n // d) - circle) for d in range(1, n + 1) if n % d == 0) // n


def test_doubling_period_two():
    orbits = enumerate_periodic(dyn.doubling(), 2)
    sets = sorted(tuple(sorted(o.points)) for o in orbits)
    assert len(sets) == 2
    assert sets[0] == (0.0,)
    assert sets[1] == pytest.approx((1 / 3, 2 / 3), abs=1e-15)


def test_logistic_period_two():
    orbits = enumerate_periodic(dyn.logistic(3.2), 2)
    pts = [tuple(sorted(o.points)) for o in orbits]
    assert any(p == pytest.approx((0.0,), abs=1e-14) for p in pts)
    assert any(p == pytest.approx((0.6875,), abs=1e-14) for p in pts)
    # the 2-cycle solves a^2 x^2 - a(a+1) x + (a+1) = 0
    a = 3.2
    disc = math.sqrt((a + 1) * (a - 3))
    two = tuple(sorted(((a + 1 - disc) / (2 * a), (a + 1 + disc) / (2 * a))))
    assert any(len(p) == 2 and p == pytest.approx(two, abs=1e-12) for p in pts)


def test_tent_fixed_points():
    pts = sorted(o.points[0] for o in enumerate_periodic(dyn.tent(2.0), 1))
    assert pts == pytest.approx([0.0, 2 / 3], abs=1e-15)


def test_doubling_counts_match_necklaces():
    orbits = enumerate_periodic(dyn.doubling(), 12)
    counts = np.bincount([o.period for o in orbits], minlength=13)
    for p in range(1, 13):
        assert counts[p] == _necklaces(2, p, circle=True)


def test_markov_three_branch_counts():
    from fractions import Fraction as Fr
    m = dyn.markov([0, Fr(1, 3), Fr(2, 3), 1], [0, 1, 0], [3, -3, 3])
    counts = np.bincount([o.period for o in enumerate_periodic(m, 6)], minlength=7)
    for p in range(1, 7):
        assert counts[p] == _necklaces(3, p)


@pytest.mark.parametrize("m,maxp", [(dyn.doubling(), 12), (dyn.logistic(4.0), 8),
                                    (dyn.logistic(3.83), 8), (dyn.tent(1.8), 8)],
                         ids=["doubling", "logistic4", "logistic383", "tent18"])
def test_residual_and_minimal_period(m, maxp):
    for o in enumerate_periodic(m, maxp):
        x = np.asarray(o.base_point)
        y = x
        for _ in range(o.period):
            y = dyn.evaluate(m, y)
        r = abs(float(y) - float(x))
        if m.circle:
            r = min(r, 1 - r)
        assert r <= 1e-10
        for q in range(1, o.period):
            if o.period % q == 0:
                z = x
                for _ in range(q):
                    z = dyn.evaluate(m, z)
                d = abs(float(z) - float(x))
                assert min(d, 1 - d) if m.circle else d > 1e-8


def test_residual_scaling_for_large_multipliers():
    assert residual_bound(0.5) == 1e-10
    assert residual_bound(2.0) == 2e-10
    assert residual_bound(4096.0) == pytest.approx(4096e-10)


def test_gap_definition():
    for o in enumerate_periodic(dyn.doubling(), 5):
        if o.period == 1:
            assert o.gap == math.inf
        else:
            pts = o.as_array()
            d = np.abs(pts[:, None] - pts[None, :])
            d = np.minimum(d, 1 - d)
            assert o.gap == pytest.approx(d[~np.eye(o.period, dtype=bool)].min(), abs=1e-15)


def test_birkhoff_examples():
    m = dyn.doubling()
    assert birkhoff_average(make_orbit(m, 0.0, 1), Cosine(0.0, 1.0)) == 1.0
    o2 = [o for o in enumerate_periodic(m, 2) if o.period == 2][0]
    assert birkhoff_average(o2, Cosine(0.0, 1.0)) == pytest.approx(-0.5, abs=1e-15)
    lf = dyn.logistic(4.0)
    assert birkhoff_average(make_orbit(lf, 0.75, 1), Linear(1.0, 0.0)) == 0.75


def test_maximizing_examples():
    o, q = maximizing_orbit(dyn.doubling(), Cosine(0.0, 1.0), 10)
    assert o.points == (0.0,) and q == 1.0
    o, q = maximizing_orbit(dyn.logistic(4.0), Linear(1.0, 0.0), 12)
    assert o.period == 1 and q == pytest.approx(0.75, abs=1e-14)
    o, q = maximizing_orbit(dyn.doubling(), Cosine(0.45, 1.0), 12)
    assert o.period > 1


@given(th=st.floats(0.0, 1.0))
def test_q_est_monotone_in_max_period(th):
    m = dyn.doubling()
    orbits = enumerate_periodic(m, 10)
    p = Cosine(th, 1.0)
    qs = [maximizing_orbit(m, p, k, orbits)[1] for k in range(1, 11)]
    assert all(b >= a for a, b in zip(qs, qs[1:]))


@given(th=st.floats(0.0, 1.0))
def test_maximizer_dominates_all_orbits(th):
    m = dyn.doubling()
    orbits = enumerate_periodic(m, 8)
    p = Cosine(th, 1.0)
    o, q = maximizing_orbit(m, p, 8, orbits)
    assert np.all(orbit_averages(orbits, p) <= q + 1e-12)


def test_booth_and_lyndon():
    assert least_rotation("10100") == 3
    assert len(lyndon_words(2, 4)) == 8  # 0,1,01,001,011,0001,0011,0111


def test_continuation_examples():
    lf = dyn.logistic(3.2)
    two = [o for o in enumerate_periodic(lf, 2) if o.period == 2][0]
    same = continue_orbit(two, lf, lf)
    assert same.d_g <= 1e-12
    c = continue_orbit(two, lf, dyn.logistic(3.21))
    assert c.success and c.d_g < 0.01 and c.target.period == 2
    assert c.target.itinerary == two.itinerary
    g = dyn.logistic(3.21)
    pts = np.asarray(c.target.points)
    assert np.max(np.abs(g(pts) - np.roll(pts, -1))) <= 1e-9
    back = continue_orbit(c.target, g, lf)
    assert np.max(np.abs(np.asarray(back.target.points) - np.asarray(two.points))) <= 1e-8
    z = continue_orbit(make_orbit(dyn.doubling(), 0.0, 1), dyn.doubling(), dyn.tent(2.0))
    assert z.target.points == (0.0,) and z.d_g == 0.0


def test_continuation_gap_half():
    lf = dyn.logistic(3.3)
    two = [o for o in enumerate_periodic(lf, 2) if o.period == 2][0]
    c = continue_orbit(two, lf, dyn.logistic(3.31))
    if c.d_g < two.gap / 4:
        assert c.target.gap >= two.gap / 2


def test_continuation_detects_period_drop():
    lf = dyn.logistic(3.2)
    two = [o for o in enumerate_periodic(lf, 2) if o.period == 2][0]
    with pytest.raises((PeriodChanged, NewtonDiverged)):
        continue_orbit(two, lf, dyn.logistic(2.9))


def test_continue_along_path():
    fam = dyn.logistic
    two = [o for o in enumerate_periodic(fam(3.2), 2) if o.period == 2][0]
    path = continue_along_path(two, fam, [3.2, 3.3, 3.4])
    assert len(path) == 2 and all(o.period == 2 for o in path)


def test_same_orbit_is_order_free():
    m = dyn.doubling()
    o = [o for o in enumerate_periodic(m, 3) if o.period == 3][0]
    rolled = o.__class__(tuple(np.roll(o.points, 1)), 3, o.multiplier, o.itinerary, o.gap)
    assert same_orbit(o, rolled)


@given(th=st.floats(0.0, 1.0), c=st.floats(-10, 10), a=st.floats(3.0, 4.0))
def test_selection_invariant_under_scaling_and_shift(th, c, a):
    from ergolock.orbits import select_maximizing
    m = dyn.logistic(a)
    orbits = enumerate_periodic(m, 6)
    av = orbit_averages(orbits, Cosine(th, 1.0))
    k = select_maximizing(orbits, av)
    assert select_maximizing(orbits, 2.0 * av) == k
    assert select_maximizing(orbits, av + c) == k
