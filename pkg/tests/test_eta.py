import math

import numpy as np
import pytest
from _reference import eta_pair
from hypothesis import given, settings
from hypothesis import strategies as st

from gravchannel.eta import eta_closed, eta_cross, eta_quadrature, eta_self


def test_self_coefficient_value():
    assert eta_self(1.0) == pytest.approx(1 / (6 * math.sqrt(math.pi)), rel=1e-15)
    assert eta_self(2.0) == pytest.approx(eta_self(1.0) / 8, rel=1e-15)


@pytest.mark.parametrize("bad", [0.0, -1.0])
def test_rejects_nonpositive_radius(bad):
    with pytest.raises(ValueError):
        eta_self(bad)
    with pytest.raises(ValueError):
        eta_cross(bad, 1.0)


def test_rejects_nonpositive_separation():
    with pytest.raises(ValueError):
        eta_cross(1.0, 0.0)


@given(R0=st.floats(0.2, 3.0), ratio=st.floats(0.1, 30.0))
def test_closed_form_matches_reference_expression(R0, ratio):
    d = ratio * R0
    eta, eta12 = eta_pair(R0, d)
    got = eta_closed(R0, d)
    assert got.eta == pytest.approx(eta, rel=1e-14)
    assert got.eta12 == pytest.approx(eta12, rel=1e-9, abs=1e-14 * eta)
    assert got.eta_plus == got.eta + got.eta12
    assert got.eta_minus == got.eta - got.eta12


@given(s=st.floats(1e-6, 0.0999))
def test_series_branch_below_self_and_near_reference(s):
    R0 = 1.0
    if s > 0.05:
        eta, eta12 = eta_pair(R0, s)
        assert eta_cross(R0, s) == pytest.approx(eta12, rel=1e-8)
    assert eta_cross(R0, s) < eta_self(R0)


def test_series_branch_meets_closed_form_at_switch():
    below, above = eta_cross(1.0, 0.1 - 1e-12), eta_cross(1.0, 0.1 + 1e-12)
    assert abs(below - above) / above < 1e-10


def test_cross_coefficient_sign_change_and_far_field():
    R0 = 1.0
    assert eta_cross(R0, 0.5) > 0
    assert eta_cross(R0, 10.0) < 0
    for d in (12.0, 20.0, 40.0):
        assert eta_cross(R0, d) * d**3 / -2 == pytest.approx(1.0, rel=1e-6)


@settings(max_examples=15)
@given(R0=st.floats(0.3, 2.0), ratio=st.floats(0.05, 15.0))
def test_quadrature_agrees_with_closed_form(R0, ratio):
    c, q = eta_closed(R0, ratio * R0), eta_quadrature(R0, ratio * R0)
    assert q.eta == pytest.approx(c.eta, rel=1e-8)
    assert abs(q.eta12 - c.eta12) <= 1e-7 * c.eta


@pytest.mark.parametrize("hbar", [0.1, 1.0, 7.0])
def test_quadrature_independent_of_hbar(hbar):
    q = eta_quadrature(1.0, 2.0, hbar=hbar)
    assert q.eta12 == pytest.approx(eta_closed(1.0, 2.0).eta12, rel=1e-8)


def test_quadrature_rejects_unreachable_tolerance():
    with pytest.raises(ValueError):
        eta_quadrature(1.0, 1.0, tol=1e-16)


def test_coincident_limit():
    e = eta_closed(1.0, 1e-6)
    assert np.isclose(e.eta12, e.eta, rtol=1e-11)
