import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from ergolock import dynamics as dyn
from ergolock.errors import DomainError, NonDifferentiable, NotExpanding, OrderTooHigh


def test_eval_examples():
    assert dyn.logistic(4.0)(0.5) == 1.0
    assert dyn.doubling()(0.75) == 0.5
    assert dyn.tent(2.0)(0.25) == 0.5


def test_logistic_endpoints_exact():
    m = dyn.logistic(3.7)
    assert m(0.0) == 0.0 and m(1.0) == 0.0


def test_circle_reduction_uses_floor():
    m = dyn.doubling()
    assert m(-0.25) == 0.5
    assert dyn.wrap(m, -1e-18) < 1.0


def test_domain_error_off_interval():
    with pytest.raises(DomainError):
        dyn.logistic(3.0)(1.5)


def test_derivative_examples():
    assert dyn.derivative(dyn.logistic(3.2), 0.0) == pytest.approx(3.2, abs=0)
    assert dyn.derivative(dyn.doubling(), 0.3) == 2.0
    assert dyn.derivative(dyn.logistic(3.0), 0.1, order=2) == -6.0


def test_derivative_errors():
    with pytest.raises(NonDifferentiable):
        dyn.derivative(dyn.tent(2.0), 0.5)
    with pytest.raises(OrderTooHigh):
        dyn.derivative(dyn.logistic(3.0), 0.2, order=3)


def test_markov_breakpoint_owned_by_piece_starting_there():
    m = dyn.markov([0, Fraction(1, 2), 1], [0, 1], [2, -2])
    assert m(0.5) == 1.0
    assert int(dyn.branch_of(m, 0.5)) == 1


def test_markov_condition_exact():
    with pytest.raises(ValueError):
        dyn.markov([0, Fraction(1, 3), 1], [0, Fraction(1, 2)], [Fraction(3, 2), Fraction(3, 4)])


def test_inverse_branch_examples():
    got = dyn.inverse_branches(dyn.doubling(), 0.5)
    assert [i for i, _ in got] == [0, 1]
    assert [x for _, x in got] == pytest.approx([0.25, 0.75], abs=1e-15)
    crit = dyn.inverse_branches(dyn.logistic(4.0), 1.0)
    assert len(crit) == 1 and crit[0][1] == pytest.approx(0.5, abs=1e-8)
    assert dyn.inverse_branches(dyn.logistic(2.0), 0.9) == []


def test_hyperbolic_examples():
    h = dyn.estimate_hyperbolic(dyn.doubling())
    assert (h.K, h.lam, h.lip) == (1.0, 2.0, 2.0)
    assert dyn.estimate_hyperbolic(dyn.tent(1.9)).lam == pytest.approx(1.9, abs=1e-15)
    assert dyn.estimate_hyperbolic(dyn.logistic(4.0), (0.0, 0.2)).lam == pytest.approx(2.4, abs=1e-12)
    with pytest.raises(NotExpanding):
        dyn.estimate_hyperbolic(dyn.logistic(3.2))


@pytest.mark.parametrize("grid_n", [2, 17, 1001])
def test_doubling_estimate_independent_of_grid(grid_n):
    h = dyn.estimate_hyperbolic(dyn.doubling(), grid_n=grid_n)
    assert (h.K, h.lam, h.lip) == (1.0, 2.0, 2.0)


SMOOTH = [dyn.logistic(3.9), dyn.quadratic(-1.5), dyn.sine(0.5, 0.25),
          dyn.polynomial([0.1, 0.5, 0.3], 0.0, 1.0), dyn.doubling(), dyn.tent(1.7)]


@pytest.mark.parametrize("m", SMOOTH, ids=lambda m: m.family)
@given(t=st.floats(0.01, 0.99))
def test_finite_difference_matches_derivative(m, t):
    x = m.lo + t * m.length
    if m.family == "tent" and abs(x - 0.5) < 1e-5:
        return
    if m.family == "doubling" and abs(x - 0.5) < 1e-5:
        return
    h = 1e-6
    d = dyn.derivative(m, x)
    lo, hi = dyn._raw(m, np.array([x - h, x + h]))
    fd = (hi - lo) / (2 * h)
    assert abs(fd - d) <= 1e-6 * max(1.0, abs(d))


@pytest.mark.parametrize("m", [dyn.doubling(), dyn.logistic(3.8), dyn.tent(1.5), dyn.sine(0.5, 0.4),
                               dyn.markov([0, 0.5, 1], [0, 1], [2, -2])], ids=lambda m: m.family)
@given(y=st.floats(0.0, 1.0))
def test_inverse_branches_reproduce_y(m, y):
    for _, x in dyn.inverse_branches(m, y):
        assert abs(m(x) - y) <= 1e-12 or (m.circle and abs(abs(m(x) - y) - 1.0) <= 1e-12)


def test_lip_bounds_derivative():
    for m in SMOOTH:
        xs = np.linspace(m.lo, m.hi, 2001)
        assert dyn.lipschitz(m) >= np.max(np.abs(dyn._raw_deriv(m, xs, 1))) - 1e-12


@given(a=st.floats(2.0, 4.0), lo=st.floats(0.0, 0.2))
def test_lambda_below_inf_abs_derivative(a, lo):
    m = dyn.logistic(a)
    region = (lo, lo + 0.05)
    try:
        h = dyn.estimate_hyperbolic(m, region)
    except NotExpanding:
        return
    xs = np.linspace(*region, 501)
    assert h.lam <= np.min(np.abs(dyn._raw_deriv(m, xs, 1))) + 1e-12
