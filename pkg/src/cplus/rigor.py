"""Rigorous enclosure arithmetic.

Enclosures are midpoint-radius balls backed by Arb (via python-flint).  Every
operation on an ``Enclosure`` returns a ball containing the exact result for
all members of the inputs, so downstream code never touches raw floats.

The working precision is the flint context precision, which is process
global.  Use :func:`working_precision` to change it for a block of code.
"""

from __future__ import annotations

import contextlib
from fractions import Fraction
from typing import Callable, Iterator, TypeVar

from flint import arb, ctx, fmpq, fmpz

Enclosure = arb

DEFAULT_PRECISION = 256
MIN_PRECISION = 64
MAX_PRECISION = 4096

T = TypeVar("T")


class PrecisionExhausted(ArithmeticError):
    """The result could not be enclosed with a finite radius."""


class Indeterminate(ArithmeticError):
    """A predicate could not be decided at the current precision."""

    def __init__(self, message: str, margin=None):
        super().__init__(message)
        self.margin = margin


def check_precision(bits: int) -> int:
    bits = int(bits)
    if bits < MIN_PRECISION:
        raise ValueError(f"precision must be at least {MIN_PRECISION} bits, got {bits}")
    return bits


@contextlib.contextmanager
def working_precision(bits: int) -> Iterator[int]:
    """Temporarily set the Arb working precision (in bits)."""
    bits = check_precision(bits)
    saved = ctx.prec
    ctx.prec = bits
    try:
        yield bits
    finally:
        ctx.prec = saved


@contextlib.contextmanager
def extra_precision(guard_bits: int) -> Iterator[int]:
    """Raise the working precision by ``guard_bits`` for a cancellation-prone step."""
    saved = ctx.prec
    ctx.prec = saved + int(guard_bits)
    try:
        yield ctx.prec
    finally:
        ctx.prec = saved


def current_precision() -> int:
    return ctx.prec


def enclosure(value, radius=0) -> Enclosure:
    """Build an enclosure from a number-like midpoint and a radius.

    Strings are parsed as decimals, ``Fraction``/``fmpq`` values are rounded
    into a ball that contains them.  A positive radius is added on top.
    """
    if isinstance(value, arb):
        x = +value
    elif isinstance(value, Fraction):
        x = arb(fmpq(value.numerator, value.denominator))
    elif isinstance(value, (int, fmpz, fmpq, float)):
        x = arb(value)
    elif isinstance(value, str):
        x = arb(value)
    else:
        raise TypeError(f"cannot build an enclosure from {type(value).__name__}")
    if radius:
        x = x + arb(0, _to_arb(radius).abs_upper())
    return x


def _to_arb(value) -> arb:
    if isinstance(value, arb):
        return value
    return enclosure(value)


def exact_to_fraction(x: arb) -> Fraction:
    """Convert an exact (zero radius) ball to a ``Fraction``."""
    man, exp = x.man_exp()
    man, exp = int(man), int(exp)
    if exp >= 0:
        return Fraction(man * 2**exp)
    return Fraction(man, 2**-exp)


def midpoint(x: arb) -> arb:
    return x.mid()


def radius(x: arb) -> arb:
    return x.rad()


def lower(x: arb) -> Fraction:
    """Exact rational lower endpoint of the enclosure."""
    if not x.is_finite():
        raise PrecisionExhausted("enclosure is not finite")
    return exact_to_fraction(x.lower())


def upper(x: arb) -> Fraction:
    """Exact rational upper endpoint of the enclosure."""
    if not x.is_finite():
        raise PrecisionExhausted("enclosure is not finite")
    return exact_to_fraction(x.upper())


def contains(x: arb, value) -> bool:
    """Decide whether ``value`` lies in the ball ``x``: |value - mid| <= rad.

    ``value`` is compared exactly for rationals and decimal strings.
    """
    if isinstance(value, arb):
        return bool(x.contains(value))
    if isinstance(value, str):
        value = Fraction(value)
    if isinstance(value, float):
        value = Fraction(value)
    if isinstance(value, int):
        value = Fraction(value)
    if isinstance(value, Fraction):
        return lower(x) <= value <= upper(x)
    raise TypeError(f"unsupported value type {type(value).__name__}")


def ensure_finite(x: arb, what: str) -> arb:
    if not x.is_finite():
        raise PrecisionExhausted(f"{what}: result radius is not finite at {ctx.prec} bits")
    return x


def upper_incomplete_gamma(s, x) -> Enclosure:
    """Enclosure of Gamma(s, x) = int_x^oo t^(s-1) e^(-t) dt for s > 0, x >= 0."""
    s = _to_arb(s)
    x = _to_arb(x)
    if not s.mid() > 0:
        raise ValueError("upper_incomplete_gamma requires s > 0")
    if x.mid() < 0:
        raise ValueError("upper_incomplete_gamma requires x >= 0")
    if x.is_zero():
        return ensure_finite(s.gamma(), "upper_incomplete_gamma")
    return ensure_finite(x.gamma_upper(s), "upper_incomplete_gamma")


def erfc_enclosure(x) -> Enclosure:
    """Enclosure of erfc(x) = (2/sqrt(pi)) int_x^oo e^(-t^2) dt."""
    return ensure_finite(_to_arb(x).erfc(), "erfc_enclosure")


def sup_clip_positive(x: arb) -> arb:
    """Upper bound on sup{max(y, 0) : y in x}, returned as an exact ball."""
    if not x.is_finite():
        raise PrecisionExhausted("sup_clip_positive: enclosure is not finite")
    hi = x.upper()
    return hi if hi > 0 else arb(0)


def abs_upper(x: arb) -> arb:
    """Exact upper bound on |y| over the enclosure."""
    if not x.is_finite():
        raise PrecisionExhausted("abs_upper: enclosure is not finite")
    return x.abs_upper()


def with_escalation(
    fn: Callable[[], T],
    start_bits: int = DEFAULT_PRECISION,
    max_bits: int = MAX_PRECISION,
) -> tuple[T, int]:
    """Run ``fn`` at increasing precision until it stops raising ``Indeterminate``.

    Precision doubles from ``start_bits`` up to ``max_bits``.  Returns the
    result and the precision that produced it; re-raises the last
    ``Indeterminate`` (or ``PrecisionExhausted``) once the cap is reached.
    """
    bits = check_precision(start_bits)
    while True:
        try:
            with working_precision(bits):
                return fn(), bits
        except (Indeterminate, PrecisionExhausted):
            if bits * 2 > max_bits:
                raise
            bits *= 2


def decimal_string(x: Fraction, digits: int = 25, rounding: str = "down") -> str:
    """Decimal rendering of a rational with ``digits`` significant digits.

    ``rounding`` is "down" (result <= x) or "up" (result >= x), so printed
    bounds stay on the safe side of the exact value.
    """
    import math

    x = Fraction(x)
    if x == 0:
        return "0"
    exp10 = math.floor(math.log10(abs(x.numerator)) - math.log10(x.denominator))
    scale = Fraction(10) ** (digits - 1 - exp10)
    y = x * scale
    q = math.floor(y) if rounding == "down" else math.ceil(y)
    d = Fraction(q) / scale
    if d.denominator == 1:
        return str(d.numerator)
    shift = digits - 1 - exp10
    sign = "-" if q < 0 else ""
    s = str(abs(q)).rjust(shift + 1, "0")
    out = sign + s[:-shift] + "." + s[-shift:]
    return out.rstrip("0").rstrip(".") if "." in out else out
