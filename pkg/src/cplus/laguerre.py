"""Even Gaussian-polynomial functions f(x) = p(x^2) exp(-pi x^2).

Two coefficient bases are supported:

* ``MONOMIAL``: f(x) = sum_k a_k x^(2k) exp(-pi x^2)
* ``LAGUERRE``: f(x) = sum_k b_k L_k(pi x^2) exp(-pi x^2), with L_k the
  generalized Laguerre polynomial of parameter -1/2.

All structure constants (Laguerre coefficients, change of basis, the Fourier
map and Laguerre product linearization) are exact rationals in the scaled
variable w = pi x^2; pi only enters when bridging to x-monomials and is
carried through enclosures.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass
from functools import lru_cache
from typing import Sequence

from flint import arb, arb_mat, fmpq, fmpq_mat, fmpz

from .rigor import Enclosure, enclosure, extra_precision

ALPHA = fmpq(-1, 2)


class DegreeOverflow(ValueError):
    pass


class DimensionMismatch(ValueError):
    pass


class Basis(str, enum.Enum):
    MONOMIAL = "monomial"
    LAGUERRE = "laguerre"


# ---------------------------------------------------------------------------
# exact structure constants


def _binom_half(n: int, k: int) -> fmpq:
    """binom(n - 1/2, k)."""
    r = fmpq(1)
    top = fmpq(2 * n - 1, 2)
    for i in range(k):
        r = r * (top - i) / (i + 1)
    return r


@lru_cache(maxsize=None)
def _factorial(n: int) -> fmpz:
    return fmpz(n).fac_ui(n) if hasattr(fmpz, "fac_ui") else fmpz(_fac_int(n))


def _fac_int(n: int) -> int:
    r = 1
    for i in range(2, n + 1):
        r *= i
    return r


@lru_cache(maxsize=None)
def _laguerre_table(k: int) -> tuple[tuple[fmpq, ...], ...]:
    """Coefficient rows of L_0..L_k in powers of w, via the three-term recurrence."""
    rows: list[list[fmpq]] = [[fmpq(1)]]
    if k >= 1:
        rows.append([1 + ALPHA, fmpq(-1)])
    for n in range(1, k):
        # (n+1) L_{n+1} = (2n+1+alpha-w) L_n - (n+alpha) L_{n-1}
        cur, prev = rows[n], rows[n - 1]
        nxt = [fmpq(0)] * (n + 2)
        a = 2 * n + 1 + ALPHA
        for j, c in enumerate(cur):
            nxt[j] += a * c
            nxt[j + 1] -= c
        for j, c in enumerate(prev):
            nxt[j] -= (n + ALPHA) * c
        rows.append([c / (n + 1) for c in nxt])
    return tuple(tuple(r) for r in rows)


def laguerre_coeffs(k: int) -> tuple[fmpq, ...]:
    """Coefficients of L_k^{-1/2}(w) in powers of w (index j -> w^j)."""
    if k < 0:
        raise ValueError("degree must be nonnegative")
    return _laguerre_table(k)[k]


def laguerre_at_zero(k: int) -> fmpq:
    """L_k^{-1/2}(0) = Gamma(k + 1/2) / (k! Gamma(1/2))."""
    return _binom_half(k, k)


@lru_cache(maxsize=None)
def _power_in_laguerre(n: int) -> tuple[fmpq, ...]:
    """w^n = sum_k T[n][k] L_k(w),  T[n][k] = n! (-1)^k binom(n - 1/2, n - k)."""
    f = fmpz(_fac_int(n))
    return tuple(f * (-1) ** k * _binom_half(n, n - k) for k in range(n + 1))


@lru_cache(maxsize=None)
def _fourier_row(n: int) -> tuple[fmpq, ...]:
    """Laguerre coefficients of FT[L_n(pi x^2) e^{-pi x^2}].

    Uses FT[w^j e^{-w}] = j! L_j, so the j-th entry is (-1)^j binom(n - 1/2, n - j).
    """
    return tuple((-1) ** j * _binom_half(n, n - j) for j in range(n + 1))


@lru_cache(maxsize=None)
def _square_matrix(kind: str, size: int) -> fmpq_mat:
    """Dense lower-triangular rational matrices acting on row vectors."""
    m = fmpq_mat(size, size)
    for n in range(size):
        row = {
            "laguerre_to_power": laguerre_coeffs(n) if size else (),
            "power_to_laguerre": _power_in_laguerre(n),
            "fourier": _fourier_row(n),
        }[kind]
        for j, c in enumerate(row):
            m[n, j] = c
    return m


def _apply(kind: str, coeffs: Sequence[arb]) -> list[arb]:
    n = len(coeffs)
    if n == 0:
        return []
    row = arb_mat(1, n, list(coeffs))
    out = row * arb_mat(_square_matrix(kind, n))
    return [out[0, j] for j in range(n)]


def times_w(coeffs: Sequence) -> list:
    """Multiply a Laguerre-basis polynomial by w (exact for rational input).

    w L_k = -(k+1) L_{k+1} + (2k + 1/2) L_k - (k - 1/2) L_{k-1}
    """
    n = len(coeffs)
    zero = coeffs[0] * 0 if n else fmpq(0)
    out = [zero] * (n + 1)
    for k, c in enumerate(coeffs):
        out[k + 1] = out[k + 1] - (k + 1) * c
        out[k] = out[k] + (2 * k + 1 + ALPHA) * c
        if k:
            out[k - 1] = out[k - 1] - (k + ALPHA) * c
    return out


# ---------------------------------------------------------------------------
# products of Laguerre polynomials


class ProductTable:
    """Exact Laguerre expansions of L_i L_j for 0 <= i <= j <= d.

    ``rows_q`` holds lin(i, j) for the (d+1)x(d+1) Gram block, ``rows_r`` holds
    w * lin(i, j) for the d x d block (the 1/pi of u = w/pi is applied by the
    caller).  Both are padded to length 2d+1 and stored as fmpq matrices whose
    row order matches :meth:`pairs`.
    """

    def __init__(self, d: int):
        if d < 0:
            raise ValueError("degree must be nonnegative")
        self.d = d
        self.length = 2 * d + 1
        lin = _linearize(d)
        self.lin = lin
        self.pairs_q = [(i, j) for i in range(d + 1) for j in range(i, d + 1)]
        self.pairs_r = [(i, j) for i in range(d) for j in range(i, d)]
        self.rows_q = self._matrix([lin[p] for p in self.pairs_q])
        self.rows_r = self._matrix([times_w(lin[p]) for p in self.pairs_r])

    def _matrix(self, rows: list[list[fmpq]]) -> fmpq_mat:
        m = fmpq_mat(len(rows), self.length)
        for r, vec in enumerate(rows):
            for k, c in enumerate(vec):
                if c != 0:
                    m[r, k] = c
        return m

    def product(self, i: int, j: int) -> list[fmpq]:
        """Laguerre coefficients of L_i L_j (unpadded)."""
        if i > j:
            i, j = j, i
        return self.lin[(i, j)]


def _linearize(d: int) -> dict[tuple[int, int], list[fmpq]]:
    """lin(i, j) for i <= j <= d through the recurrence in i."""
    lin: dict[tuple[int, int], list[fmpq]] = {}
    prev: list[list[fmpq]] | None = None
    cur = [[fmpq(0)] * j + [fmpq(1)] for j in range(d + 1)]
    for i in range(d + 1):
        for j in range(i, d + 1):
            lin[(i, j)] = cur[j]
        if i == d:
            break
        nxt = []
        a = 2 * i + 1 + ALPHA
        b = i + ALPHA
        for j in range(d + 1):
            wv = times_w(cur[j])
            vec = [a * c for c in cur[j]] + [fmpq(0)]
            for k, c in enumerate(wv):
                vec[k] -= c
            if prev is not None:
                for k, c in enumerate(prev[j]):
                    vec[k] -= b * c
            nxt.append(_trim([c / (i + 1) for c in vec], i + 1 + j))
        prev, cur = cur, nxt
    return lin


def _trim(vec: list[fmpq], degree: int) -> list[fmpq]:
    return vec[: degree + 1]


@lru_cache(maxsize=8)
def product_table(d: int) -> ProductTable:
    return ProductTable(d)


# ---------------------------------------------------------------------------
# the function type


@dataclass(frozen=True)
class EvenGaussianPoly:
    basis: Basis
    coeffs: tuple

    def __post_init__(self):
        object.__setattr__(self, "basis", Basis(self.basis))
        object.__setattr__(self, "coeffs", tuple(enclosure(c) for c in self.coeffs))

    @classmethod
    def monomial(cls, coeffs) -> "EvenGaussianPoly":
        return cls(Basis.MONOMIAL, tuple(coeffs))

    @classmethod
    def laguerre(cls, coeffs) -> "EvenGaussianPoly":
        return cls(Basis.LAGUERRE, tuple(coeffs))

    @property
    def degree(self) -> int:
        return len(self.coeffs) - 1

    def padded(self, length: int) -> "EvenGaussianPoly":
        if length < len(self.coeffs):
            raise DegreeOverflow(f"cannot pad degree {self.degree} poly to length {length}")
        return EvenGaussianPoly(self.basis, self.coeffs + (arb(0),) * (length - len(self.coeffs)))

    def _combine(self, other: "EvenGaussianPoly", sign: int) -> "EvenGaussianPoly":
        if other.basis != self.basis:
            other = convert(other, self.basis)
        n = max(len(self.coeffs), len(other.coeffs))
        a = self.padded(n).coeffs
        b = other.padded(n).coeffs
        return EvenGaussianPoly(self.basis, tuple(x + sign * y for x, y in zip(a, b)))

    def __add__(self, other: "EvenGaussianPoly") -> "EvenGaussianPoly":
        return self._combine(other, 1)

    def __sub__(self, other: "EvenGaussianPoly") -> "EvenGaussianPoly":
        return self._combine(other, -1)

    def __neg__(self) -> "EvenGaussianPoly":
        return EvenGaussianPoly(self.basis, tuple(-c for c in self.coeffs))

    def scale(self, factor) -> "EvenGaussianPoly":
        f = enclosure(factor)
        return EvenGaussianPoly(self.basis, tuple(f * c for c in self.coeffs))

    def polynomial_at(self, u) -> Enclosure:
        """Value of the polynomial part p(u) (u = x^2)."""
        u = enclosure(u)
        if self.basis is Basis.MONOMIAL:
            acc = arb(0)
            for c in reversed(self.coeffs):
                acc = acc * u + c
            return acc
        return _laguerre_sum(self.coeffs, arb.pi() * u)

    def __call__(self, x) -> Enclosure:
        """f(x) = p(x^2) exp(-pi x^2)."""
        x = enclosure(x)
        u = x * x
        return self.polynomial_at(u) * (-arb.pi() * u).exp()


def _laguerre_sum(coeffs: Sequence[arb], w: arb) -> arb:
    """sum_k b_k L_k(w) by forward recurrence."""
    if not coeffs:
        return arb(0)
    l_prev = arb(1)
    total = coeffs[0] * l_prev
    if len(coeffs) == 1:
        return total
    l_cur = (1 + ALPHA) - w
    total += coeffs[1] * l_cur
    for n in range(1, len(coeffs) - 1):
        l_next = ((2 * n + 1 + ALPHA - w) * l_cur - (n + ALPHA) * l_prev) / (n + 1)
        total += coeffs[n + 1] * l_next
        l_prev, l_cur = l_cur, l_next
    return total


# ---------------------------------------------------------------------------
# basis conversion and the Fourier map


def _pi_powers(n: int, sign: int) -> list[arb]:
    pi = arb.pi() if sign > 0 else 1 / arb.pi()
    out, acc = [], arb(1)
    for _ in range(n):
        out.append(acc)
        acc = acc * pi
    return out


def to_laguerre(p: EvenGaussianPoly) -> EvenGaussianPoly:
    """Exact change of basis x^(2k) -> Laguerre, via x^(2k) = w^k / pi^k."""
    if p.basis is Basis.LAGUERRE:
        return p
    n = len(p.coeffs)
    # T has entries ~ n!, so guard bits keep the output radius close to the input one
    with extra_precision(_guard_bits(n)):
        w_coeffs = [c * s for c, s in zip(p.coeffs, _pi_powers(n, -1))]
        out = _apply("power_to_laguerre", w_coeffs)
    return EvenGaussianPoly(Basis.LAGUERRE, tuple(+c for c in out))


def to_monomial(p: EvenGaussianPoly) -> EvenGaussianPoly:
    """Laguerre -> x^(2k) coefficients."""
    if p.basis is Basis.MONOMIAL:
        return p
    n = len(p.coeffs)
    with extra_precision(_guard_bits(n)):
        w_coeffs = _apply("laguerre_to_power", p.coeffs)
        out = [c * s for c, s in zip(w_coeffs, _pi_powers(n, 1))]
    return EvenGaussianPoly(Basis.MONOMIAL, tuple(+c for c in out))


def convert(p: EvenGaussianPoly, basis: Basis) -> EvenGaussianPoly:
    basis = Basis(basis)
    if basis is Basis.LAGUERRE:
        return to_laguerre(p)
    return to_monomial(p)


def _guard_bits(n: int) -> int:
    # log2(n!) plus slack; the conversion matrices carry entries of that size
    return int(sum(_log2(k) for k in range(2, n + 1))) + 2 * n + 32


def _log2(k: int) -> float:
    return k.bit_length() - 1 + 1.0


def fourier_transform(p: EvenGaussianPoly, basis: Basis = Basis.LAGUERRE) -> EvenGaussianPoly:
    """Fourier transform of f, with FT[f](t) = int f(x) e^{-2 pi i x t} dx.

    On monomials the map is diagonal: x^(2k) e^{-pi x^2} -> (k!/pi^k) L_k(pi t^2) e^{-pi t^2}.
    Laguerre input is handled by the exact Laguerre-to-Laguerre matrix.
    """
    n = len(p.coeffs)
    if p.basis is Basis.MONOMIAL:
        inv_pi = _pi_powers(n, -1)
        out = tuple(c * fmpz(_fac_int(k)) * inv_pi[k] for k, c in enumerate(p.coeffs))
    else:
        with extra_precision(n + 16):
            out = tuple(+c for c in _apply("fourier", p.coeffs))
    result = EvenGaussianPoly(Basis.LAGUERRE, out)
    return convert(result, basis)


def multiply(p: EvenGaussianPoly, q: EvenGaussianPoly, max_degree: int | None = None) -> EvenGaussianPoly:
    """Product of the polynomial parts (the Gaussian factor is left to the caller).

    Two Laguerre inputs give a Laguerre result through exact linearization;
    otherwise the product is formed on x^(2k) coefficients.
    """
    degree = p.degree + q.degree
    if max_degree is not None and degree > max_degree:
        raise DegreeOverflow(f"product degree {degree} exceeds cap {max_degree}")
    if p.basis is Basis.LAGUERRE and q.basis is Basis.LAGUERRE:
        table = product_table(max(p.degree, q.degree))
        out = [arb(0)] * (degree + 1)
        for i, a in enumerate(p.coeffs):
            if a.is_zero():
                continue
            for j, b in enumerate(q.coeffs):
                if b.is_zero():
                    continue
                ab = a * b
                for k, c in enumerate(table.product(i, j)):
                    if c != 0:
                        out[k] += ab * c
        return EvenGaussianPoly(Basis.LAGUERRE, tuple(out))
    a = to_monomial(p).coeffs
    b = to_monomial(q).coeffs
    out = [arb(0)] * (degree + 1)
    for i, x in enumerate(a):
        for j, y in enumerate(b):
            out[i + j] += x * y
    return EvenGaussianPoly(Basis.MONOMIAL, tuple(out))


# ---------------------------------------------------------------------------
# Gram-matrix parametrization


def _as_matrix(m, size: int, name: str) -> arb_mat:
    if isinstance(m, arb_mat):
        mat = m
    else:
        rows = [list(r) for r in m]
        if size == 0 and not rows:
            return arb_mat(0, 0)
        mat = arb_mat([[enclosure(x) for x in r] for r in rows]) if rows else arb_mat(0, 0)
    if mat.nrows() != size or mat.ncols() != size:
        raise DimensionMismatch(f"{name} must be {size}x{size}, got {mat.nrows()}x{mat.ncols()}")
    return mat


def _upper_vector(m: arb_mat, pairs: list[tuple[int, int]]) -> arb_mat:
    vals = []
    for i, j in pairs:
        vals.append(m[i, i] if i == j else m[i, j] + m[j, i])
    return arb_mat(1, len(vals), vals)


@lru_cache(maxsize=16)
def _table_arb(d: int, which: str, prec: int) -> arb_mat:
    table = product_table(d)
    return arb_mat(table.rows_q if which == "q" else table.rows_r)


def quadratic_form_expand(Q, R, d: int) -> EvenGaussianPoly:
    """Laguerre coefficients of p(u) = v_d(u)^T Q v_d(u) + u v_{d-1}(u)^T R v_{d-1}(u).

    v_k(u) = (L_0(pi u), ..., L_k(pi u)).  Q is (d+1)x(d+1), R is d x d.  Only
    Q_ij + Q_ji enters for i != j, so asymmetric input is implicitly symmetrized.
    """
    from flint import ctx

    if d < 0:
        raise ValueError("degree must be nonnegative")
    Qm = _as_matrix(Q, d + 1, "Q")
    Rm = _as_matrix(R, d, "R")
    table = product_table(d)
    coeffs = (_upper_vector(Qm, table.pairs_q) * _table_arb(d, "q", ctx.prec))
    out = [coeffs[0, k] for k in range(table.length)]
    if d > 0:
        rpart = _upper_vector(Rm, table.pairs_r) * _table_arb(d, "r", ctx.prec)
        inv_pi = 1 / arb.pi()
        for k in range(table.length):
            out[k] += rpart[0, k] * inv_pi
    return EvenGaussianPoly(Basis.LAGUERRE, tuple(out))


# ---------------------------------------------------------------------------
# integrals and point values


def full_moment(m: int) -> Enclosure:
    """int_R x^m e^{-pi x^2} dx = Gamma((m+1)/2) / pi^((m+1)/2), m even."""
    if m < 0 or m % 2:
        raise ValueError("moment order must be a nonnegative even integer")
    s = arb(fmpq(m + 1, 2))
    return s.gamma() / arb.pi() ** s


def tail_moment(m: int, T) -> Enclosure:
    """int_T^oo x^m e^{-pi x^2} dx = Gamma((m+1)/2, pi T^2) / (2 pi^((m+1)/2))."""
    from .rigor import upper_incomplete_gamma

    if m < 0 or m % 2:
        raise ValueError("moment order must be a nonnegative even integer")
    T = enclosure(T)
    if not T.mid() > 0:
        raise ValueError("tail cutoff must be positive")
    s = arb(fmpq(m + 1, 2))
    pi = arb.pi()
    return upper_incomplete_gamma(s, pi * T * T) / (2 * pi**s)


@lru_cache(maxsize=32)
def _laguerre_tail_weights(n: int, T_str: str, prec: int) -> tuple[arb, ...]:
    """h_k = int_{|x|>T} L_k(pi x^2) e^{-pi x^2} dx for k < n."""
    from .rigor import upper_incomplete_gamma

    with extra_precision(2 * n + 64):
        T = arb(T_str)
        pi = arb.pi()
        z = pi * T * T
        inv_sqrt_pi = 1 / pi.sqrt()
        g = [upper_incomplete_gamma(arb(fmpq(2 * k + 1, 2)), z) * inv_sqrt_pi for k in range(n)]
        out = []
        for k in range(n):
            acc = arb(0)
            for j, c in enumerate(laguerre_coeffs(k)):
                acc += c * g[j]
            out.append(acc)
    return tuple(+x for x in out)


def laguerre_tail_weights(n: int, T=1) -> tuple[arb, ...]:
    from flint import ctx

    return _laguerre_tail_weights(n, str(T), ctx.prec)


def eval_at_zero(p: EvenGaussianPoly) -> Enclosure:
    """f(0) = p(0)."""
    if p.basis is Basis.MONOMIAL:
        return +p.coeffs[0] if p.coeffs else arb(0)
    acc = arb(0)
    for k, c in enumerate(p.coeffs):
        acc += c * laguerre_at_zero(k)
    return acc


def integral_over_line(p: EvenGaussianPoly) -> Enclosure:
    """int_R f(x) dx.  In the Laguerre basis only b_0 survives."""
    if p.basis is Basis.LAGUERRE:
        return +p.coeffs[0] if p.coeffs else arb(0)
    acc = arb(0)
    for k, c in enumerate(p.coeffs):
        acc += c * full_moment(2 * k)
    return acc


def tail_integral(p: EvenGaussianPoly, T=1) -> Enclosure:
    """int_{|x| > T} f(x) dx."""
    if p.basis is Basis.MONOMIAL:
        acc = arb(0)
        for k, c in enumerate(p.coeffs):
            acc += c * tail_moment(2 * k, T)
        return 2 * acc
    weights = laguerre_tail_weights(len(p.coeffs), T)
    acc = arb(0)
    for c, h in zip(p.coeffs, weights):
        acc += c * h
    return acc
