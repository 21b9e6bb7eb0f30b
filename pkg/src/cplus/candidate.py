"""Certify explicit candidates F(x) = sum_j c_j x^(2 k_j) exp(-lambda_j x^2).

The quotient (F(0) - A int_{|t|>1} (FT F)^+) / ||F||_1 is enclosed directly.
Both integrals are computed by adaptive bisection: a piece on which the
integrand has a certified sign contributes its exact integral (incomplete
gamma closed forms); a piece that may contain a sign change contributes
[0, width * sup] for the positive part, or [0, width * sup |.|] for the
absolute value.  Pieces of the second kind are bisected until their total
width-times-sup is below the tolerance or the budget runs out.
"""

from __future__ import annotations

import heapq
import json
import os
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterable

from flint import arb, ctx, fmpq

from . import laguerre
from .certify import CertifiedBound
from .rigor import (
    Enclosure,
    Indeterminate,
    enclosure,
    exact_to_fraction,
    upper,
    upper_incomplete_gamma,
)

DEFAULT_TAIL_TOLERANCE = Fraction(1, 10**25)
DEFAULT_BUDGET = 10**6
DEFAULT_TOLERANCE = Fraction(1, 10**15)


class CandidateError(ValueError):
    pass


def _exact(value) -> tuple[arb, Fraction | None]:
    """Ball for ``value`` plus its exact rational when one is known."""
    if isinstance(value, arb):
        return value, None
    if isinstance(value, str):
        f = Fraction(value)
    elif isinstance(value, (int, Fraction)):
        f = Fraction(value)
    elif isinstance(value, float):
        f = Fraction(value)
    else:
        raise TypeError(f"unsupported coefficient type {type(value).__name__}")
    return arb(fmpq(f.numerator, f.denominator)), f


@dataclass(frozen=True)
class Term:
    c: arb
    k: int
    lam: arb

    def at(self, x: arb) -> arb:
        x2 = x * x
        return self.c * x2**self.k * (-self.lam * x2).exp()

    def derivative(self, x: arb) -> arb:
        k = self.k
        rising = 2 * k * x ** (2 * k - 1) if k else arb(0)
        return self.c * (rising - 2 * self.lam * x ** (2 * k + 1)) * (-self.lam * x * x).exp()

    def second_derivative(self, x: arb) -> arb:
        k, lam = self.k, self.lam
        x2 = x * x
        low = 2 * k * (2 * k - 1) * x ** (2 * k - 2) if k else arb(0)
        poly = low - 2 * lam * (4 * k + 1) * x ** (2 * k) + 4 * lam * lam * x ** (2 * k + 2)
        return self.c * poly * (-lam * x2).exp()

    def peak(self) -> arb:
        """Location of the maximum of x^(2k) e^(-lambda x^2) on [0, oo)."""
        return (self.k / self.lam).sqrt()

    def peak_value(self) -> arb:
        if self.k == 0:
            return arb(1)
        return (self.k / (self.lam * arb.const_e())) ** self.k

    def shape_range(self, a: arb, b: arb) -> arb:
        """Range of x^(2k) e^(-lambda x^2) over [a, b], 0 <= a <= b."""
        ga = (a * a) ** self.k * (-self.lam * a * a).exp()
        gb = (b * b) ** self.k * (-self.lam * b * b).exp()
        lo = ga.min(gb)
        if self.k == 0:
            return lo.union(ga.max(gb))
        p = self.peak()
        if p < a or p > b:
            hi = ga.max(gb)
        else:
            hi = self.peak_value()
        return lo.union(hi)

    def integral(self, a, b) -> arb:
        """int_a^b c x^(2k) e^(-lambda x^2) dx, 0 <= a <= b (b may be None for oo)."""
        s = arb(fmpq(2 * self.k + 1, 2))
        lam = self.lam
        ga = upper_incomplete_gamma(s, lam * a * a)
        gb = arb(0) if b is None else upper_incomplete_gamma(s, lam * b * b)
        return self.c * (ga - gb) / (2 * lam**s)


@dataclass(frozen=True)
class GaussianMixture:
    terms: tuple[Term, ...]
    exact: tuple | None = field(default=None, compare=False)  # (c, k, lambda) rationals when known

    def __post_init__(self):
        for t in self.terms:
            if t.k < 0:
                raise CandidateError("exponents k must be nonnegative")
            if not t.lam > 0:
                raise CandidateError("every lambda must be certified positive")

    @classmethod
    def from_terms(cls, items: Iterable) -> "GaussianMixture":
        terms, exact = [], []
        for c, k, lam in items:
            cb, cf = _exact(c)
            lb, lf = _exact(lam)
            terms.append(Term(cb, int(k), lb))
            exact.append((cf, int(k), lf))
        ex = tuple(exact) if all(e[0] is not None and e[2] is not None for e in exact) else None
        return cls(tuple(terms), ex)

    def scaled(self, factor) -> "GaussianMixture":
        fb, ff = _exact(factor)
        terms = tuple(Term(t.c * fb, t.k, t.lam) for t in self.terms)
        ex = None
        if self.exact is not None and ff is not None:
            ex = tuple((c * ff, k, lam) for c, k, lam in self.exact)
        return GaussianMixture(terms, ex)

    def at(self, x) -> arb:
        x = enclosure(x)
        total = arb(0)
        for t in self.terms:
            total += t.at(x)
        return total

    def to_json(self) -> list[dict]:
        if self.exact is None:
            return [{"c": t.c.str(40, radius=False), "k": t.k, "lambda": t.lam.str(40, radius=False)} for t in self.terms]
        return [{"c": _dec(c), "k": k, "lambda": _dec(lam)} for c, k, lam in self.exact]


def _dec(f: Fraction) -> str:
    if f.denominator == 1:
        return str(f.numerator)
    return str(f)


def load_mixture(path) -> GaussianMixture:
    """Read a JSON list of {"c", "k", "lambda"} with decimal-string values."""
    try:
        with open(path, encoding="utf-8") as fh:
            raw = json.load(fh)
    except OSError as exc:
        raise OSError(f"cannot read candidate file {os.fspath(path)}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise CandidateError(f"{os.fspath(path)}: invalid JSON: {exc}") from exc
    return parse_mixture(raw, source=os.fspath(path))


def parse_mixture(raw, source: str = "<candidate>") -> GaussianMixture:
    if isinstance(raw, dict) and "terms" in raw:
        raw = raw["terms"]
    if not isinstance(raw, list) or not raw:
        raise CandidateError(f"{source}: candidate must be a nonempty list of terms")
    items = []
    for n, term in enumerate(raw):
        try:
            c, k, lam = term["c"], term["k"], term["lambda"]
            k = int(k)
            c = Fraction(str(c))
            lam = Fraction(str(lam))
        except (KeyError, TypeError, ValueError) as exc:
            raise CandidateError(f"{source}: term {n} is malformed: {exc}") from exc
        if lam <= 0:
            raise CandidateError(f"{source}: term {n} has nonpositive lambda")
        if k < 0:
            raise CandidateError(f"{source}: term {n} has negative k")
        items.append((c, k, lam))
    return GaussianMixture.from_terms(items)


# ---------------------------------------------------------------------------
# Fourier transform


def mixture_fourier(F: GaussianMixture) -> GaussianMixture:
    """Term-wise transform, FT[g](t) = int g(x) e^{-2 pi i x t} dx.

    With s = sqrt(lambda/pi) and mu = pi^2/lambda,
    FT[x^(2k) e^(-lambda x^2)](t) = s^-(2k+1) (k!/pi^k) L_k(mu t^2) e^(-mu t^2),
    which expands into terms (., j, mu) for j <= k.
    """
    pi = arb.pi()
    # terms sharing lambda share mu, so their expansions are merged per (j, mu)
    merged: dict[tuple, list] = {}
    for t in F.terms:
        key = (exact_to_fraction(t.lam.mid()), exact_to_fraction(t.lam.rad()))
        s = (t.lam / pi).sqrt()
        mu = pi * pi / t.lam
        scale = t.c * s ** (-(2 * t.k + 1)) * arb(fmpq(_fac(t.k))) / pi**t.k
        for j, cj in enumerate(laguerre.laguerre_coeffs(t.k)):
            slot = merged.setdefault((key, j), [arb(0), mu])
            slot[0] += scale * cj * mu**j
    return GaussianMixture(tuple(Term(c, j, mu) for (_, j), (c, mu) in merged.items()))


def _fac(n: int) -> int:
    r = 1
    for i in range(2, n + 1):
        r *= i
    return r


# ---------------------------------------------------------------------------
# interval evaluation


def _hull(a: arb, b: arb) -> arb:
    return a.union(b)


def eval_enclosure(F: GaussianMixture, lo, hi=None) -> Enclosure:
    """Enclosure of {F(x) : x in [lo, hi]}.

    Intersects a term-wise range bound (each x^(2k) e^(-lambda x^2) is
    unimodal on [0, oo)) with the second-order Taylor form
    F(m) + F'(m) h + F''([lo, hi]) h^2 / 2, |h| <= r.
    """
    lo = enclosure(lo)
    hi = lo if hi is None else enclosure(hi)
    if lo.mid() < 0 or hi.mid() < 0:
        if hi.mid() <= 0:
            lo, hi = -hi, -lo
        else:
            m = (-lo).max(hi)
            lo, hi = arb(0), m
    if (hi - lo).is_zero() or lo is hi:
        return F.at(lo)
    x = _hull(lo, hi)
    direct = arb(0)
    for t in F.terms:
        direct += t.c * t.shape_range(lo, hi)
    m = ((lo + hi) / 2).mid()
    r = arb((hi - lo).abs_upper() / 2)
    h = arb(0, r.upper())
    value = d1 = d2 = arb(0)
    for t in F.terms:
        value += t.at(m)
        d1 += t.derivative(m)
        d2 += t.second_derivative(x)
    taylor = value + d1 * h + d2 * arb(0, (r * r).upper()) / 2
    return direct.intersection(taylor) if direct.overlaps(taylor) else taylor


# ---------------------------------------------------------------------------
# verified integrals


@dataclass
class QuadratureResult:
    value: Enclosure  # contains the exact integral
    subdivisions: int
    tail_cutoff: Enclosure
    converged: bool = True

    @property
    def upper(self) -> Fraction:
        return upper(self.value)


def _abs_tail(F: GaussianMixture, T: arb) -> arb:
    """Upper bound on int_T^oo |F|."""
    total = arb(0)
    for t in F.terms:
        total += Term(arb(t.c.abs_upper()), t.k, t.lam).integral(T, None)
    return arb(0, total.upper())


def choose_cutoff(F: GaussianMixture, start, tolerance=DEFAULT_TAIL_TOLERANCE) -> arb:
    """Smallest power-of-two step past ``start`` whose absolute tail is below ``tolerance``."""
    tol = arb(fmpq(Fraction(tolerance).numerator, Fraction(tolerance).denominator))
    T = enclosure(start) + 1
    step = arb(1)
    for _ in range(200):
        if _abs_tail(F, T).rad() < tol:
            return T
        T += step
        step *= 2
    raise Indeterminate("could not find a tail cutoff")


def _piece_integral(F: GaussianMixture, a: arb, b: arb, cache: dict) -> arb:
    total = arb(0)
    for n, t in enumerate(F.terms):
        total += _prim(t, n, a, cache) - _prim(t, n, b, cache)
    return total


def _prim(t: Term, n: int, x: arb, cache: dict) -> arb:
    """int_x^oo c x^(2k) e^(-lambda x^2) (cached per node)."""
    key = (n, x.mid().str(60, radius=False))
    v = cache.get(key)
    if v is None:
        v = t.integral(x, None)
        cache[key] = v
    return v


def _adaptive(F: GaussianMixture, a, b, mode: str, tolerance, budget: int):
    """Enclosure of int_a^b g(F(x)) dx with g = max(., 0) or |.|."""
    cache: dict = {}
    heap = []  # (-priority, counter, lo, hi)
    settled = arb(0)
    counter = 0

    def classify(lo: arb, hi: arb):
        nonlocal settled, counter
        e = eval_enclosure(F, lo, hi)
        width = hi - lo
        if e > 0:
            settled += _piece_integral(F, lo, hi, cache)
            return
        if e < 0:
            if mode == "abs":
                settled -= _piece_integral(F, lo, hi, cache)
            return
        if e.is_zero():
            return
        sup = e.upper() if mode == "positive" else arb(e.abs_upper())
        if sup <= 0:
            return
        bound = width * sup
        counter += 1
        heapq.heappush(heap, (-float(bound.upper()), counter, lo, hi, bound))

    a = enclosure(a)
    b = enclosure(b)
    pieces = 64
    nodes = [a + (b - a) * fmpq(i, pieces) for i in range(pieces + 1)]
    nodes = [x.mid() for x in nodes]
    nodes[0], nodes[-1] = a, b
    for lo, hi in zip(nodes, nodes[1:]):
        classify(lo, hi)
    tol = float(Fraction(tolerance))
    evaluations = pieces
    while heap and evaluations < budget:
        pending = sum(-h[0] for h in heap)
        if pending <= tol:
            break
        _, _, lo, hi, _ = heapq.heappop(heap)
        mid = ((lo + hi) / 2).mid()
        classify(lo, mid)
        classify(mid, hi)
        evaluations += 2
    uncertain = arb(0)
    for item in heap:
        uncertain += item[4]
    value = settled + arb(0).union(uncertain.upper()) if heap else settled
    pending = sum(-h[0] for h in heap)
    return value, evaluations, pending <= tol


def verified_integral_positive_part(
    G: GaussianMixture,
    cutoff_from=1,
    tolerance=DEFAULT_TOLERANCE,
    budget: int = DEFAULT_BUDGET,
    tail_tolerance=DEFAULT_TAIL_TOLERANCE,
) -> QuadratureResult:
    """Enclosure of int_{|t| > cutoff_from} G(t)^+ dt (doubled by evenness)."""
    start = enclosure(cutoff_from)
    T = choose_cutoff(G, start, tail_tolerance)
    body, n, ok = _adaptive(G, start, T, "positive", tolerance, budget)
    tail = _abs_tail(G, T)
    value = 2 * (body + arb(0).union(tail.upper()))
    return QuadratureResult(value, n, T, ok)


def verified_l1_norm(
    F: GaussianMixture,
    tolerance=DEFAULT_TOLERANCE,
    budget: int = DEFAULT_BUDGET,
    tail_tolerance=DEFAULT_TAIL_TOLERANCE,
) -> QuadratureResult:
    """Enclosure of int_R |F(x)| dx."""
    T = choose_cutoff(F, 0, tail_tolerance)
    body, n, ok = _adaptive(F, arb(0), T, "abs", tolerance, budget)
    tail = _abs_tail(F, T)
    value = 2 * (body + arb(0).union(tail.upper()))
    return QuadratureResult(value, n, T, ok)


def certify_candidate(
    F: GaussianMixture,
    A,
    tolerance=DEFAULT_TOLERANCE,
    budget: int = DEFAULT_BUDGET,
    tail_tolerance=DEFAULT_TAIL_TOLERANCE,
) -> CertifiedBound:
    """Certified lower bound on C+(A) from the candidate F."""
    if not F.terms:
        raise CandidateError("candidate has no terms")
    A = Fraction(A)
    a = arb(fmpq(A.numerator, A.denominator))
    at_zero = F.at(arb(0))
    G = mixture_fourier(F)
    pos = verified_integral_positive_part(G, 1, tolerance, budget, tail_tolerance)
    l1 = verified_l1_norm(F, tolerance, budget, tail_tolerance)
    if not l1.value > 0:
        raise CandidateError("candidate is zero (or ||F||_1 is not certified positive)")
    num = at_zero - a * pos.value
    value = num / l1.value
    checks = {}
    meta = {
        "F_at_zero": at_zero.mid().str(25, radius=False),
        "positive_part_upper": str(float(pos.upper)),
        "l1_norm_upper": str(float(l1.upper)),
        "subdivisions": pos.subdivisions + l1.subdivisions,
        "quadrature_converged": pos.converged and l1.converged,
        "tail_cutoff": [pos.tail_cutoff.mid().str(10, radius=False), l1.tail_cutoff.mid().str(10, radius=False)],
    }
    return CertifiedBound(A, 0, value, "explicit-candidate", ctx.prec, checks, meta)


def mixture_from_polynomial(p: laguerre.EvenGaussianPoly) -> GaussianMixture:
    """p(x^2) e^{-pi x^2} as a mixture with every lambda = pi."""
    mono = laguerre.to_monomial(p)
    pi = arb.pi()
    return GaussianMixture(tuple(Term(c, k, pi) for k, c in enumerate(mono.coeffs)))
