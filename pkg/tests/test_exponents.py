from fractions import Fraction as F

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ighartree.errors import DegenerateDenominator, RangeViolation
from ighartree.exponents import (INF, RationalPair, as_rational, build_report, check_Hminus_s_admissible,
                                 check_Hs_admissible, check_L2_admissible, holder_dual)


def test_float_through_decimal_repr():
    assert as_rational(0.1) == F(1, 10)


@pytest.mark.parametrize("q,r", [(INF, 2), (2, 6), (4, 3), ("inf", 2)])
def test_L2_admissible(q, r):
    assert check_L2_admissible(RationalPair(q, r))


def test_L2_rejects_out_of_range():
    assert not check_L2_admissible(RationalPair(1, 7))
    assert not check_L2_admissible(RationalPair(3, 3))


def test_Hs_examples():
    s = F(1, 2)
    assert check_Hs_admissible(RationalPair(8, 4), s)
    assert check_Hs_admissible(RationalPair(INF, 3), s)
    assert not check_Hs_admissible(RationalPair(2, 6), s)


def test_reference_report():
    rep = build_report(F(5, 2), F(1, 2), 2)
    assert rep.r_bar == F(18, 5)
    assert rep.feasible
    assert rep.s_c == F(1, 2)
    assert all(c.holds for c in rep.witness)


def test_theta_example():
    rep = build_report(F(5, 2), F(1, 2), 2, theta=F(1, 10))
    assert rep.a == F(48, 5)
    assert rep.a_tilde_prime == F(48, 19)
    assert (2 * rep.p - 1 - 2 * rep.theta) * rep.a_tilde_prime == rep.a


def test_boundary_infeasible():
    # p = 5/2 - 2b + gamma exactly: r_bar = 6
    rep = build_report(F(7, 2), F(1, 2), 2)
    assert rep.r_bar == 6 and not rep.feasible


def test_degenerate_denominator():
    # theta close to p - 1 drives the r_bar denominator below zero
    with pytest.raises(DegenerateDenominator):
        build_report(F(5, 2), F(1, 2), 2, theta=F(7, 5))


def test_rejects_outside_window():
    with pytest.raises(RangeViolation):
        build_report(F(5, 2), F(2), 2)
    with pytest.raises(RangeViolation):
        build_report(F(9), F(1, 2), 2)


def test_epsilon_makes_r_bar_inconsistent():
    rep = build_report(F(5, 2), F(1, 2), 2, epsilon=F(1, 20))
    assert rep.r_bar != rep.r_bar_admissible
    rep0 = build_report(F(5, 2), F(1, 2), 2)
    assert rep0.r_bar == rep0.r_bar_admissible


def test_holder_dual():
    assert holder_dual(F(5, 3)) == F(5, 2)


def test_report_serialises():
    d = build_report(F(5, 2), F(1, 2), 2).to_dict()
    assert d["r_bar"] == "18/5" and isinstance(d["witness"], list)


fractions = st.fractions(min_value=F(1, 50), max_value=F(49, 50), max_denominator=60)


@settings(max_examples=200, deadline=None)
@given(fractions, fractions, fractions, st.fractions(min_value=0, max_value=F(1, 5), max_denominator=20))
def test_dual_identity_exact(tg, tb, tp, theta):
    gamma = 3 * tg
    b = tb * (1 + gamma) / 2
    lo, hi = (5 - 2 * b + gamma) / 3, 3 - 2 * b + gamma
    p = lo + tp * (hi - lo)
    if theta >= p - 1:
        return
    try:
        rep = build_report(p, b, gamma, theta=theta)
    except DegenerateDenominator:
        return
    assert (2 * p - 1 - 2 * theta) * rep.a_tilde_prime == rep.a
    assert rep.a > 2 / (1 - rep.s_c)
    if rep.r > 0:
        assert rep.r < 6
