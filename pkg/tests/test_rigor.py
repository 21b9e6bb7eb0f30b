from fractions import Fraction

import mpmath
import pytest
from flint import arb, ctx
from hypothesis import given, strategies as st

from cplus import rigor
from cplus.rigor import (
    contains,
    decimal_string,
    enclosure,
    erfc_enclosure,
    sup_clip_positive,
    upper_incomplete_gamma,
)

# mpmath.quad at 60 digits, frozen
GAMMA_32_PI = "0.087396791422683093494385265843479626804375391046907873336454"
ERFC_SQRT_PI = "0.0121888821848028868923882966670255173185694390685675113817716"


def close(x: arb, ref: str, tol=Fraction(1, 10**30)) -> bool:
    r = Fraction(ref)
    return rigor.upper(abs(x - arb(ref))) < tol and rigor.upper(x.rad()) < tol and abs(
        rigor.exact_to_fraction(x.mid()) - r
    ) < tol


def test_gamma_trivial_cases():
    assert contains(upper_incomplete_gamma(1, 0), 1)
    g = upper_incomplete_gamma(1, 1)
    assert g.overlaps(arb(-1).exp())
    assert g.rad() < arb("1e-70")


def test_gamma_three_halves_at_pi_matches_quadrature():
    g = upper_incomplete_gamma(arb(3) / 2, arb.pi())
    assert close(g, GAMMA_32_PI)


def test_gamma_rejects_bad_domain():
    with pytest.raises(ValueError):
        upper_incomplete_gamma(0, 1)
    with pytest.raises(ValueError):
        upper_incomplete_gamma(1, -1)


def test_erfc_cases():
    assert contains(erfc_enclosure(0), 1)
    e = erfc_enclosure(arb.pi().sqrt())
    assert close(e, ERFC_SQRT_PI)
    with rigor.working_precision(4096):
        big = erfc_enclosure(100)
        assert rigor.upper(big) < Fraction(1, 10**1000)
        assert rigor.lower(big) > 0


def test_sup_clip_positive_examples():
    assert sup_clip_positive(enclosure(-2, 1)) == 0
    assert sup_clip_positive(enclosure(0, 0)) == 0
    # radii are stored with a 30-bit mantissa, rounded up
    top = rigor.exact_to_fraction(sup_clip_positive(enclosure(1, Fraction(1, 2))))
    assert Fraction(3, 2) <= top < Fraction(3, 2) + Fraction(1, 10**8)


def test_precision_floor():
    with pytest.raises(ValueError):
        with rigor.working_precision(32):
            pass


def test_escalation_retries_on_indeterminate():
    seen = []

    def fn():
        seen.append(ctx.prec)
        if ctx.prec < 1024:
            raise rigor.Indeterminate("not yet")
        return "ok"

    result, bits = rigor.with_escalation(fn, 256, 4096)
    assert result == "ok" and bits == 1024
    assert seen == [256, 512, 1024]


def test_escalation_gives_up():
    def fn():
        raise rigor.Indeterminate("never")

    with pytest.raises(rigor.Indeterminate):
        rigor.with_escalation(fn, 256, 512)


def test_decimal_string_rounds_to_the_safe_side():
    x = Fraction(1, 3)
    assert decimal_string(x, 5, "down") == "0.33333"
    assert decimal_string(x, 5, "up") == "0.33334"
    assert decimal_string(Fraction(-1, 3), 5, "down") == "-0.33334"
    assert Fraction(decimal_string(x, 12, "down")) <= x <= Fraction(decimal_string(x, 12, "up"))


rationals = st.fractions(min_value=Fraction(1, 50), max_value=Fraction(20), max_denominator=1000)


@given(s=rationals, x=rationals)
def test_gamma_inclusion_against_mpmath(s, x):
    g = upper_incomplete_gamma(enclosure(s), enclosure(x))
    with mpmath.workdps(80):
        ref = mpmath.gammainc(mpmath.mpf(s.numerator) / s.denominator, mpmath.mpf(x.numerator) / x.denominator)
        ref_s = mpmath.nstr(ref, 70)
    # the oracle value carries ~1e-70 relative error; allow that much
    slack = abs(Fraction(ref_s)) * Fraction(1, 10**60) + Fraction(1, 10**70)
    assert rigor.lower(g) - slack <= Fraction(ref_s) <= rigor.upper(g) + slack


@given(x=st.fractions(min_value=-5, max_value=5, max_denominator=1000))
def test_erfc_escalation_narrows(x):
    lo = erfc_enclosure(enclosure(x))
    with rigor.working_precision(512):
        hi = erfc_enclosure(enclosure(x))
    assert lo.overlaps(hi)
    assert hi.rad() <= lo.rad()
