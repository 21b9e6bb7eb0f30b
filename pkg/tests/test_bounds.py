import json
from fractions import Fraction

import pytest
from hypothesis import given, strategies as st

from cplus import bounds
from cplus.bounds import LowerBound, VacuousBound

A_RH = Fraction(36, 11)


def test_rh_constant_below_headline():
    c = bounds.interval_constant(LowerBound(A_RH, Fraction("1.1965")), 0)
    assert c.context == bounds.RH_PRIMES
    assert c.c_exact < Fraction("0.8358")
    assert Fraction(c.c_upper) < Fraction("0.8358")


def test_grh_constant_from_derived_target():
    c = bounds.interval_constant(LowerBound(Fraction(4), 3 / Fraction("2.5591")), 1)
    assert c.context == bounds.GRH_PROGRESSIONS
    assert c.c_exact == Fraction("2.5591")
    assert Fraction(c.c_upper) >= c.c_exact
    assert Fraction(c.c_upper) <= Fraction("2.5591")


def test_unit_lower_bound_gives_one():
    c = bounds.interval_constant(LowerBound(Fraction(2), Fraction(1)), 0)
    assert c.c_exact == 1 and c.context == bounds.GENERIC
    assert Fraction(c.c_upper) == 1


def test_gap_constant():
    assert bounds.gap_constant(LowerBound(A_RH, Fraction("1.1965"))) < Fraction("0.8358")
    assert bounds.gap_constant(LowerBound(A_RH, Fraction(1))) == 1


def test_displayed_constant_rounds_up():
    c = bounds.interval_constant(LowerBound(A_RH, Fraction(3)), 0, digits=4)
    assert c.c_upper == "0.3334"


@pytest.mark.parametrize("value", [0, -1, Fraction(-1, 3)])
def test_vacuous(value):
    lb = LowerBound(A_RH, Fraction(value))
    with pytest.raises(VacuousBound):
        bounds.interval_constant(lb, 0)
    with pytest.raises(VacuousBound):
        bounds.gap_constant(lb)


def test_negative_alpha_rejected():
    with pytest.raises(ValueError):
        bounds.interval_constant(LowerBound(A_RH, Fraction(1)), -1)


def test_from_certificate_prefers_exact_field():
    cert = {"A": "36/11", "certified_lower": "1.19", "certified_lower_exact": "119/100"}
    lb = LowerBound.from_certificate(cert)
    assert lb == LowerBound(A_RH, Fraction(119, 100))


lowers = st.fractions(min_value=Fraction(1, 100), max_value=10, max_denominator=10**6)
alphas = st.fractions(min_value=0, max_value=5, max_denominator=1000)


@given(lowers, lowers, alphas)
def test_monotone(a, b, alpha):
    if a == b:
        return
    lo, hi = sorted((a, b))
    c_lo = bounds.interval_constant(LowerBound(A_RH, lo), alpha).c_exact
    c_hi = bounds.interval_constant(LowerBound(A_RH, hi), alpha).c_exact
    assert c_hi < c_lo


@given(lowers, alphas, alphas)
def test_affine_in_alpha(L, a1, a2):
    lb = LowerBound(A_RH, L)
    c0 = bounds.interval_constant(lb, 0).c_exact
    c1 = bounds.interval_constant(lb, a1).c_exact
    c2 = bounds.interval_constant(lb, a2).c_exact
    assert c1 - c0 == 2 * a1 / L
    if a1 != a2:
        assert (c2 - c1) / (a2 - a1) == 2 / L


def test_report_json_and_render():
    lb = LowerBound(A_RH, Fraction("1.1965"))
    rep = json.loads(bounds.dumps(lb))
    assert rep["A"] == "36/11"
    assert [c["alpha"] for c in rep["constants"]] == ["0", "1"]
    assert Fraction(rep["constants"][0]["c_exact"]) == 1 / Fraction("1.1965")
    assert Fraction(rep["gap_constant_upper"]) >= Fraction(rep["gap_constant_exact"])
    text = bounds.render(lb)
    assert "Riemann hypothesis" in text and "limsup gap constant" in text
    grh = bounds.render(LowerBound(Fraction(4), Fraction(6, 5)))
    assert "phi(q)" in grh
