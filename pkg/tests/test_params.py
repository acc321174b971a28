import math

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ighartree.errors import RangeViolation
from ighartree.params import critical_regularity, derive, riesz_constant


def test_reference_triple():
    pr = derive(2, 0.5, 2.5)
    assert pr.s_c == pytest.approx(0.5, abs=1e-15)
    assert pr.sigma_c == pytest.approx(1.0, abs=1e-15)
    assert pr.A == pytest.approx(1.5, abs=1e-15)
    assert pr.B == pytest.approx(3.5, abs=1e-15)
    assert pr.A + pr.B == pytest.approx(5.0, abs=1e-15)


def test_coulomb_constant():
    assert riesz_constant(2.0) == pytest.approx(1 / (4 * math.pi), rel=1e-15)
    assert riesz_constant(2.0) == pytest.approx(0.0795775, abs=1e-7)


def test_mass_critical_endpoint_rejected():
    with pytest.raises(RangeViolation):
        derive(2, 0, 7 / 3)


def test_all_violations_reported_together():
    with pytest.raises(RangeViolation) as exc:
        derive(3.5, 5.0, 2.0)
    assert len(exc.value.violations) >= 2


@pytest.mark.parametrize("gamma,b", [(2.0, 0.5), (1.0, 0.3), (0.5, 0.1)])
def test_endpoints_rejected_interior_accepted(gamma, b):
    lo = (5 - 2 * b + gamma) / 3
    hi = (5 - 4 * b + 2 * gamma) / 2
    assert critical_regularity(gamma, b, lo) == pytest.approx(0.0, abs=1e-14)
    assert critical_regularity(gamma, b, 3 - 2 * b + gamma) == pytest.approx(1.0, abs=1e-14)
    for p in (lo, hi):
        with pytest.raises(RangeViolation):
            derive(gamma, b, p)
    for t in (0.1, 0.5, 0.9):
        pr = derive(gamma, b, lo + t * (hi - lo))
        assert 0 < pr.s_c < 1 and pr.sigma_c > 0


def test_nonfinite_rejected():
    with pytest.raises(RangeViolation):
        derive(float("nan"), 0.5, 2.5)


@st.composite
def valid_triples(draw):
    gamma = draw(st.floats(0.05, 2.95))
    b = draw(st.floats(0.01, 0.99)) * (1 + gamma) / 2
    lo, hi = (5 - 2 * b + gamma) / 3, (5 - 4 * b + 2 * gamma) / 2
    p = lo + draw(st.floats(0.01, 0.99)) * (hi - lo)
    return gamma, b, p


@settings(max_examples=1000, deadline=None)
@given(valid_triples())
def test_A_plus_B(tr):
    pr = derive(*tr)
    assert pr.A + pr.B == pytest.approx(2 * pr.p, rel=1e-14)
    assert pr.B == pytest.approx(2 * (pr.p - 1) * pr.s_c + 2, rel=1e-14)
    assert pr.B == pytest.approx(3 * pr.p - 3 + 2 * pr.b - pr.gamma, rel=1e-12)
    assert pr.K_gamma > 0
