import random
from fractions import Fraction

import mpmath
import pytest
from flint import arb, fmpq
from hypothesis import given, settings, strategies as st

from cplus import laguerre
from cplus.laguerre import Basis, EvenGaussianPoly
from cplus.rigor import enclosure, erfc_enclosure, exact_to_fraction, upper

def pi() -> arb:
    return arb.pi()

# mpmath.quad at 60 digits, frozen: int_R x^m e^{-pi x^2} dx and int_1^oo of the same
FULL_MOMENTS = {
    0: "1.0",
    2: "0.159154943091895335768883763372514362034459645740456448747667",
    4: "0.0759908877317533285829095974072957291782690810041849116342068",
    10: "0.0965011450839202897385529966689569225032165226284052453799895",
    20: "6.82751941483863973401301124783874347556119880499357150974782",
}
TAIL_MOMENTS = {
    0: "0.00609444109240144344619414833351275865928471953428375569088581",
    2: "0.00784766912728654908187433382690363761737140374400640685688766",
    6: "0.0153325721054721857018984912891108783632241110332599842042387",
    12: "0.0790017425749991879316994940373434666993151641265018906233322",
}
ERFC_SQRT_PI = "0.0121888821848028868923882966670255173185694390685675113817716"
TOL = Fraction(1, 10**30)


def within(x: arb, ref: str, tol=TOL) -> bool:
    return abs(exact_to_fraction(x.mid()) - Fraction(ref)) < tol and upper(x.rad()) < tol


def all_overlap(p: EvenGaussianPoly, q: EvenGaussianPoly) -> bool:
    n = max(len(p.coeffs), len(q.coeffs))
    return all(a.overlaps(b) for a, b in zip(p.padded(n).coeffs, q.padded(n).coeffs))


def rand_poly(rng: random.Random, degree: int, basis=Basis.MONOMIAL) -> EvenGaussianPoly:
    coeffs = [fmpq(rng.randint(-999, 999), rng.randint(1, 99)) for _ in range(degree + 1)]
    return EvenGaussianPoly(basis, coeffs)


def test_laguerre_coeffs_small_cases():
    assert laguerre.laguerre_coeffs(0) == (1,)
    assert laguerre.laguerre_coeffs(1) == (fmpq(1, 2), -1)


@pytest.mark.parametrize("k", [2, 3, 7, 15])
def test_laguerre_coeffs_against_mpmath(k):
    coeffs = laguerre.laguerre_coeffs(k)
    for w in (Fraction(1, 3), Fraction(5, 2), Fraction(17, 7)):
        ours = sum(Fraction(int(c.p), int(c.q)) * w**j for j, c in enumerate(coeffs))
        with mpmath.workdps(60):
            ref = mpmath.laguerre(k, -0.5, mpmath.mpf(w.numerator) / w.denominator)
            assert abs(mpmath.mpf(ours.numerator) / ours.denominator - ref) < mpmath.mpf(10) ** -50


def test_laguerre_at_zero():
    for k in range(12):
        with mpmath.workdps(40):
            ref = mpmath.gamma(k + 0.5) / (mpmath.factorial(k) * mpmath.gamma(0.5))
        assert abs(float(laguerre.laguerre_at_zero(k).p) / float(laguerre.laguerre_at_zero(k).q) - float(ref)) < 1e-15


def test_to_laguerre_examples():
    assert all_overlap(laguerre.to_laguerre(EvenGaussianPoly.monomial([1])), EvenGaussianPoly.laguerre([1]))
    got = laguerre.to_laguerre(EvenGaussianPoly.monomial([0, 1]))
    assert got.coeffs[0].overlaps(1 / (2 * pi()))
    assert got.coeffs[1].overlaps(-1 / pi())


def test_basis_round_trip_degree_30():
    rng = random.Random(30)
    for _ in range(5):
        p = rand_poly(rng, 30)
        back = laguerre.to_monomial(laguerre.to_laguerre(p))
        assert all(b.contains(a) for a, b in zip(p.coeffs, back.coeffs))


def test_triangularity():
    for k in range(10):
        coeffs = [0] * k + [1]
        got = laguerre.to_laguerre(EvenGaussianPoly.monomial(coeffs))
        assert len(got.coeffs) == k + 1
        assert not got.coeffs[k].contains(0)


def test_evaluation_is_basis_independent():
    rng = random.Random(7)
    p = rand_poly(rng, 12)
    q = laguerre.to_laguerre(p)
    for x in ("0", "0.3", "1", "2.5"):
        assert p(arb(x)).overlaps(q(arb(x)))


def test_fourier_examples():
    g = laguerre.fourier_transform(EvenGaussianPoly.monomial([1]))
    assert g.coeffs[0].contains(1)
    g = laguerre.fourier_transform(EvenGaussianPoly.monomial([0, 1]))
    assert g.coeffs[0].contains(0) and g.coeffs[1].overlaps(1 / pi())
    # (1/(2 pi) - t^2) e^{-pi t^2}
    t = arb("0.7")
    assert g(t).overlaps((1 / (2 * pi()) - t * t) * (-pi() * t * t).exp())


def test_fourier_against_numerical_integral():
    p = EvenGaussianPoly.monomial([fmpq(1, 3), -2, fmpq(5, 7)])
    g = laguerre.fourier_transform(p)
    t = mpmath.mpf("0.45")
    with mpmath.workdps(40):
        f = lambda x: (mpmath.mpf(1) / 3 - 2 * x**2 + mpmath.mpf(5) / 7 * x**4) * mpmath.exp(-mpmath.pi * x**2)
        ref = mpmath.quad(lambda x: f(x) * mpmath.cos(2 * mpmath.pi * x * t), [-mpmath.inf, 0, mpmath.inf])
    assert abs(float(g(arb("0.45")).mid()) - float(ref)) < 1e-14


@settings(max_examples=60)
@given(seed=st.integers(0, 10**9), degree=st.integers(0, 50))
def test_fourier_involution(seed, degree):
    p = rand_poly(random.Random(seed), degree)
    back = laguerre.fourier_transform(laguerre.fourier_transform(p), Basis.MONOMIAL)
    assert all(b.contains(a) for a, b in zip(p.coeffs, back.coeffs))


@settings(max_examples=30)
@given(seed=st.integers(0, 10**9), degree=st.integers(0, 20))
def test_transform_integral_equals_value_at_zero(seed, degree):
    p = rand_poly(random.Random(seed), degree)
    g = laguerre.fourier_transform(p)
    assert laguerre.integral_over_line(g).overlaps(laguerre.eval_at_zero(p))
    assert laguerre.integral_over_line(p).overlaps(laguerre.eval_at_zero(g))


def test_multiply_examples():
    one = EvenGaussianPoly.laguerre([1])
    l1 = EvenGaussianPoly.laguerre([0, 1])
    assert all_overlap(laguerre.multiply(one, l1), l1)
    sq = laguerre.to_monomial(laguerre.multiply(l1, l1))
    # (1/2 - pi u)^2 = 1/4 - pi u + pi^2 u^2
    assert sq.coeffs[0].contains(fmpq(1, 4))
    assert sq.coeffs[1].overlaps(-pi())
    assert sq.coeffs[2].overlaps(pi() * pi())


def test_multiply_pointwise():
    rng = random.Random(11)
    p = rand_poly(rng, 6, Basis.LAGUERRE)
    q = rand_poly(rng, 9, Basis.LAGUERRE)
    pq = laguerre.multiply(p, q)
    for _ in range(10):
        u = enclosure(Fraction(rng.randint(0, 300), 100))
        assert pq.polynomial_at(u).overlaps(p.polynomial_at(u) * q.polynomial_at(u))


def test_multiply_degree_cap():
    p = EvenGaussianPoly.laguerre([0, 0, 1])
    with pytest.raises(laguerre.DegreeOverflow):
        laguerre.multiply(p, p, max_degree=3)


def test_quadratic_form_examples():
    Q = [[1, 0], [0, 0]]
    p = laguerre.quadratic_form_expand(Q, [[0]], 1)
    assert p.coeffs[0].contains(1) and all(c.contains(0) for c in p.coeffs[1:])
    p = laguerre.quadratic_form_expand([[0, 0], [0, 0]], [[1]], 1)
    assert p.coeffs[0].overlaps(1 / (2 * pi())) and p.coeffs[1].overlaps(-1 / pi())


def test_quadratic_form_dimension_mismatch():
    with pytest.raises(laguerre.DimensionMismatch):
        laguerre.quadratic_form_expand([[1]], [[1]], 1)


def test_quadratic_form_nonnegative_for_psd():
    rng = random.Random(5)
    d = 5
    G = [[Fraction(rng.randint(-9, 9), 4) for _ in range(d + 1)] for _ in range(d + 1)]
    H = [[Fraction(rng.randint(-9, 9), 4) for _ in range(d)] for _ in range(d)]
    Q = [[sum(G[i][k] * G[j][k] for k in range(d + 1)) for j in range(d + 1)] for i in range(d + 1)]
    R = [[sum(H[i][k] * H[j][k] for k in range(d)) for j in range(d)] for i in range(d)]
    p = laguerre.quadratic_form_expand(Q, R, d)
    for _ in range(100):
        u = enclosure(Fraction(rng.randint(0, 4000), 1000))
        assert not p.polynomial_at(u) < 0


@pytest.mark.parametrize("m", sorted(FULL_MOMENTS))
def test_full_moments_match_quadrature(m):
    assert within(laguerre.full_moment(m), FULL_MOMENTS[m])


@pytest.mark.parametrize("m", sorted(TAIL_MOMENTS))
def test_tail_moments_match_quadrature(m):
    assert within(laguerre.tail_moment(m, 1), TAIL_MOMENTS[m])


def test_moment_examples():
    assert laguerre.full_moment(0).contains(1)
    assert laguerre.full_moment(2).overlaps(1 / (2 * pi()))
    assert laguerre.tail_moment(0, 1).overlaps(erfc_enclosure(pi().sqrt()) / 2)
    assert within(2 * laguerre.tail_moment(0, 1), ERFC_SQRT_PI)
    with pytest.raises(ValueError):
        laguerre.full_moment(3)


@pytest.mark.parametrize("m", [0, 2, 8])
def test_tail_at_zero_is_half_the_full_moment(m):
    T = arb("1e-30")
    gap = laguerre.full_moment(m) - 2 * laguerre.tail_moment(m, T)
    # the missing piece int_{-T}^{T} x^m e^{-pi x^2} lies in [0, 2 T^(m+1) / (m+1)]
    assert gap.overlaps(arb(0).union(2 * T ** (m + 1) / (m + 1)))


def test_point_value_and_integral_examples():
    l0 = EvenGaussianPoly.laguerre([1])
    assert laguerre.eval_at_zero(l0).contains(1) and laguerre.integral_over_line(l0).contains(1)
    l1 = EvenGaussianPoly.laguerre([0, 1])
    assert laguerre.eval_at_zero(l1).contains(fmpq(1, 2))
    assert laguerre.integral_over_line(l1).contains(0)
    x2 = EvenGaussianPoly.monomial([0, 1])
    assert laguerre.eval_at_zero(x2).contains(0)
    assert laguerre.integral_over_line(x2).overlaps(1 / (2 * pi()))


def test_tail_integral_of_laguerre_poly_matches_moments():
    rng = random.Random(3)
    p = rand_poly(rng, 8)
    by_moments = 2 * sum((c * laguerre.tail_moment(2 * k, 1) for k, c in enumerate(p.coeffs)), arb(0))
    assert laguerre.tail_integral(laguerre.to_laguerre(p), 1).overlaps(by_moments)
