"""Constants for primes in short intervals implied by a lower bound on C+(A).

A certified C+(A) >= L gives the admissible constant c = (1 + 2 alpha) / L:
with A = 36/11 under RH for primes in [x, x + c sqrt(x) log x], and with A = 4
under GRH for primes in a residue class, where the interval length carries an
extra factor phi(q).  Every division here is exact and displayed values are
rounded up, so a printed constant is always a valid one.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from fractions import Fraction

from .rigor import decimal_string

RH_PRIMES = "RH-primes"
GRH_PROGRESSIONS = "GRH-progressions"
GENERIC = "generic"

DISPLAY_DIGITS = 8


class VacuousBound(ValueError):
    pass


@dataclass(frozen=True)
class LowerBound:
    """The two facts a constant needs: which A, and a proven C+(A) >= value."""

    A: Fraction
    certified_lower: Fraction

    @classmethod
    def from_certificate(cls, cert: dict) -> "LowerBound":
        value = cert.get("certified_lower_exact", cert["certified_lower"])
        return cls(Fraction(cert["A"]), Fraction(value))


def _lower_bound(b) -> LowerBound:
    if isinstance(b, LowerBound):
        return b
    if isinstance(b, dict):
        return LowerBound.from_certificate(b)
    return LowerBound(Fraction(b.A), Fraction(b.certified_lower))


def context_for(A) -> str:
    A = Fraction(A)
    if A == 4:
        return GRH_PROGRESSIONS
    if A == Fraction(36, 11):
        return RH_PRIMES
    return GENERIC


@dataclass(frozen=True)
class IntervalConstant:
    A: Fraction
    alpha: Fraction
    c_exact: Fraction
    context: str
    digits: int = DISPLAY_DIGITS

    @property
    def c_upper(self) -> str:
        """Decimal upper bound on the constant (rounded up)."""
        return decimal_string(self.c_exact, self.digits, "up")

    @property
    def statement(self) -> str:
        c = self.c_upper
        a = _show(self.alpha)
        if self.context == RH_PRIMES:
            return (
                "Assuming the Riemann hypothesis,\n"
                f"  inf{{ c > 0 : liminf_x (pi(x + c sqrt(x) log x) - pi(x)) / sqrt(x) > {a} }} <= {c}\n"
                f"(derived from C+({_show(self.A)}) lower bound; c = (1 + 2*alpha) / C+)"
            )
        if self.context == GRH_PROGRESSIONS:
            return (
                "Assuming the generalized Riemann hypothesis, for coprime q >= 3 and b,\n"
                f"  inf{{ c > 0 : liminf_x (pi(x + c phi(q) sqrt(x) log x; q, b) - pi(x; q, b)) / sqrt(x) > {a} }}"
                f" <= {c}\n"
                f"(derived from C+({_show(self.A)}) lower bound; c = (1 + 2*alpha) / C+)"
            )
        return f"c = (1 + 2*{a}) / C+({_show(self.A)}) <= {c}"

    def to_json(self) -> dict:
        return {
            "A": str(self.A),
            "alpha": str(self.alpha),
            "c_upper": self.c_upper,
            "c_exact": str(self.c_exact),
            "context": self.context,
            "statement": self.statement,
        }


def _show(x: Fraction) -> str:
    return str(x.numerator) if x.denominator == 1 else str(x)


def interval_constant(b, alpha=0, digits: int = DISPLAY_DIGITS) -> IntervalConstant:
    """(1 + 2 alpha) / certified_lower, exactly."""
    lb = _lower_bound(b)
    alpha = Fraction(alpha)
    if alpha < 0:
        raise ValueError("alpha must be nonnegative")
    if lb.certified_lower <= 0:
        raise VacuousBound(f"certified lower bound {lb.certified_lower} is not positive")
    c = (1 + 2 * alpha) / lb.certified_lower
    return IntervalConstant(lb.A, alpha, c, context_for(lb.A), digits)


def gap_constant(b) -> Fraction:
    """Upper bound 1/certified_lower on limsup of normalized consecutive-prime gaps.

    In the progression setting the gap is additionally normalized by phi(q).
    """
    lb = _lower_bound(b)
    if lb.certified_lower <= 0:
        raise VacuousBound(f"certified lower bound {lb.certified_lower} is not positive")
    return 1 / lb.certified_lower


def report(b, alphas=(0, 1), digits: int = DISPLAY_DIGITS) -> dict:
    lb = _lower_bound(b)
    gap = gap_constant(lb)
    return {
        "A": str(lb.A),
        "certified_lower": decimal_string(lb.certified_lower, 25, "down"),
        "constants": [interval_constant(lb, a, digits).to_json() for a in alphas],
        "gap_constant_upper": decimal_string(gap, digits, "up"),
        "gap_constant_exact": str(gap),
    }


def render(b, alphas=(0, 1), digits: int = DISPLAY_DIGITS) -> str:
    lb = _lower_bound(b)
    blocks = [interval_constant(lb, a, digits).statement for a in alphas]
    blocks.append(f"limsup gap constant <= {decimal_string(gap_constant(lb), digits, 'up')}")
    return "\n\n".join(blocks)


def dumps(b, alphas=(0, 1)) -> str:
    return json.dumps(report(b, alphas), indent=2, sort_keys=True)
