"""Turn a numerically solved SOS tuple into a proven lower bound on C+(A).

Pipeline:

1. every block except Q4 must be PSD (rigorous lambda_min lower bound >= 0);
2. b := rigorous lower bound on lambda_min(Q4);
3. r := (FT f1 - FT f2) - (f3 - f4) written as v_d^T Q4' v_d with Q4'
   symmetric tridiagonal; B := max |entry of Q4'| in the product basis;
4. b >= 2B means Q4 - Q4' is PSD (Gershgorin gives lambda_min(Q4') >= -2B),
   and replacing Q4 by it makes the tuple exactly feasible;
5. the certified value is (f1(0) - f2(0) - A int_{|x|>1} f3) / (int f1 + int f2),
   which does not involve Q4.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np
from flint import arb, arb_mat, ctx, fmpq

from . import laguerre
from .laguerre import Basis, EvenGaussianPoly, DegreeOverflow
from .rigor import (
    DEFAULT_PRECISION,
    MAX_PRECISION,
    Indeterminate,
    decimal_string,
    extra_precision,
    lower,
    upper,
    with_escalation,
    working_precision,
)
from .sdp import N_FUNCTIONS, SosTuple

CERTIFICATE_SCHEMA = "cplus.certificate/1"


class CertificationError(ArithmeticError):
    pass


class PsdFailure(CertificationError):
    def __init__(self, block: str, bound: Fraction, required: Fraction = Fraction(0)):
        super().__init__(
            f"block {block} is not certified PSD: lambda_min lower bound {float(bound):.6e} "
            f"< required {float(required):.6e} (missed by {float(required - bound):.3e})"
        )
        self.block = block
        self.bound = bound
        self.required = required
        self.margin = bound - required


class GershgorinFailure(CertificationError):
    def __init__(self, b: Fraction, B: Fraction):
        super().__init__(
            f"residual absorption failed: b = {float(b):.6e} < 2B = {float(2 * B):.6e} "
            f"(missed by {float(2 * B - b):.3e})"
        )
        self.b = b
        self.B = B
        self.margin = b - 2 * B


# ---------------------------------------------------------------------------
# eigenvalue lower bounds


@dataclass(frozen=True)
class PsdCheck:
    lower: Fraction  # rigorous lower bound on lambda_min
    passed: bool
    slack: Fraction  # total ball radius that went into the bound


def _identity(n: int) -> arb_mat:
    M = arb_mat(n, n)
    for i in range(n):
        M[i, i] = 1
    return M


def _refined_eigenvectors(M: arb_mat, iterations: int = 8) -> arb_mat:
    """Approximate orthonormal eigenvectors of the midpoint of M at working precision.

    Starts from a double-precision eigh and applies the Ogita-Aishima
    refinement step, which roughly doubles the number of correct digits per
    pass and tolerates clustered eigenvalues.
    """
    n = M.nrows()
    Mm = M.mid()
    mf = np.array([[float(Mm[i, j]) for j in range(n)] for i in range(n)])
    _, vecs = np.linalg.eigh((mf + mf.T) / 2)
    X = arb_mat(n, n, [float(v) for v in vecs.ravel()])
    target = 2.0 ** (-(ctx.prec - 16))
    for _ in range(iterations):
        Xt = X.transpose()
        Rm = (_identity(n) - Xt * X).mid()
        S = (Xt * Mm * X).mid()
        lam = [S[i, i] / (1 - Rm[i, i]) for i in range(n)]
        r_norm = max(float(abs(Rm[i, j])) for i in range(n) for j in range(n))
        off = max((float(abs(S[i, j])) for i in range(n) for j in range(n) if i != j), default=0.0)
        m_norm = max(float(abs(x)) for x in lam) if lam else 0.0
        if r_norm < target and off <= target * max(m_norm, 1e-300):
            break
        delta = 2 * (off + m_norm * r_norm)
        E = arb_mat(n, n)
        for i in range(n):
            for j in range(n):
                if i == j:
                    E[i, j] = Rm[i, i] / 2
                    continue
                gap = lam[j] - lam[i]
                if abs(float(gap)) > delta:
                    E[i, j] = ((S[i, j] + lam[j] * Rm[i, j]) / gap).mid()
                else:
                    E[i, j] = Rm[i, j] / 2
        X = (X + X * E).mid()
    return X


def psd_lower_bound(M, required=0) -> PsdCheck:
    """Rigorous lower bound on the smallest eigenvalue of symmetric M.

    With V approximate eigenvectors, D = V^T M V is enclosed in ball
    arithmetic and Gershgorin's discs bound lambda_min(D) below by g.  Since
    the eigenvalues of V^T M V are those of M scaled by factors in
    [1 - eta, 1 + eta] with eta >= ||V^T V - I||, lambda_min(M) >= g/(1+eta)
    for g >= 0 and >= g/(1-eta) otherwise.

    Raises Indeterminate if the verdict against ``required`` depends on the
    ball radii (so more precision could change it).
    """
    if not isinstance(M, arb_mat):
        M = arb_mat(M)
    n = M.nrows()
    if n != M.ncols():
        raise ValueError("matrix must be square")
    required = Fraction(required)
    if n == 0:
        return PsdCheck(Fraction(0), True, Fraction(0))
    V = _refined_eigenvectors(M)
    Vt = V.transpose()
    D = Vt * M * V
    N = Vt * V - _identity(n)
    eta = max(upper(sum((abs(N[i, j]) for j in range(n)), arb(0))) for i in range(n))
    if eta >= 1:
        raise Indeterminate("approximate eigenvectors are not close to orthonormal")
    g = None
    slack = Fraction(0)
    for i in range(n):
        row = lower(D[i, i])
        for j in range(n):
            if j != i:
                row -= upper(abs(D[i, j]))
        g = row if g is None else min(g, row)
        slack = max(slack, 2 * sum((upper(D[i, j].rad()) for j in range(n)), Fraction(0)))
    bound = g / (1 + eta) if g >= 0 else g / (1 - eta)
    passed = bound >= required
    if not passed and bound + slack >= required:
        raise Indeterminate(
            f"lambda_min bound {float(bound):.3e} within ball radius {float(slack):.3e} of {float(required):.3e}",
            margin=bound - required,
        )
    return PsdCheck(bound, passed, slack)


# ---------------------------------------------------------------------------
# residual and its tridiagonal form


def tuple_polynomials(t: SosTuple) -> list[EvenGaussianPoly]:
    return [laguerre.quadratic_form_expand(t.Q[k], t.R[k], t.d) for k in range(N_FUNCTIONS)]


def residual_polynomial(t: SosTuple, polys=None) -> EvenGaussianPoly:
    """(FT f1 - FT f2) - (f3 - f4) in the Laguerre basis, degree <= 2d."""
    p = polys or tuple_polynomials(t)
    with extra_precision(2 * t.d + 32):
        g1 = laguerre.fourier_transform(p[0] - p[1])
        r = g1 - (p[2] - p[3])
    return EvenGaussianPoly(Basis.LAGUERRE, tuple(+c for c in r.coeffs))


@dataclass(frozen=True)
class TridiagonalRep:
    diag: tuple  # d+1 enclosures
    offdiag: tuple  # d enclosures

    def matrix(self) -> arb_mat:
        n = len(self.diag)
        M = arb_mat(n, n)
        for i, v in enumerate(self.diag):
            M[i, i] = v
        for i, v in enumerate(self.offdiag):
            M[i, i + 1] = v
            M[i + 1, i] = v
        return M

    def max_abs_upper(self) -> Fraction:
        """Upper bound on max |c_k| over the product-basis coefficients.

        c_{2i} = diag_i and c_{2i+1} = 2 offdiag_i.
        """
        vals = [upper(abs(v)) for v in self.diag] + [2 * upper(abs(v)) for v in self.offdiag]
        return max(vals, default=Fraction(0))

    def max_abs_lower(self) -> Fraction:
        """Lower bound on the same maximum."""
        vals = [lower(abs(v)) for v in self.diag] + [2 * lower(abs(v)) for v in self.offdiag]
        return max([max(v, Fraction(0)) for v in vals], default=Fraction(0))


def to_tridiagonal(r: EvenGaussianPoly, d: int) -> TridiagonalRep:
    """Write r as v_d^T Q' v_d with Q' symmetric tridiagonal.

    Peels off the basis L_d^2, L_{d-1} L_d, L_{d-1}^2, ... from the top
    degree down; basis element k has exact Laguerre degree k.
    """
    if r.basis is not Basis.LAGUERRE:
        r = laguerre.to_laguerre(r)
    coeffs = list(r.coeffs)
    if len(coeffs) > 2 * d + 1:
        extra = coeffs[2 * d + 1 :]
        if any(not c.contains(0) for c in extra):
            raise DegreeOverflow(f"residual degree {len(coeffs) - 1} exceeds 2d = {2 * d}")
        coeffs = coeffs[: 2 * d + 1]
    coeffs += [arb(0)] * (2 * d + 1 - len(coeffs))
    table = laguerre.product_table(d)
    c = [arb(0)] * (2 * d + 1)
    with extra_precision(4 * d + 32):
        work = [+x for x in coeffs]
        for k in range(2 * d, -1, -1):
            i = k // 2
            basis = table.product(i, i + (k % 2))
            ck = work[k] / basis[k]
            c[k] = ck
            for n in range(k + 1):
                if basis[n] != 0:
                    work[n] -= ck * basis[n]
    diag = tuple(+c[2 * i] for i in range(d + 1))
    off = tuple(+(c[2 * i + 1] / 2) for i in range(d))
    return TridiagonalRep(diag, off)


# ---------------------------------------------------------------------------
# the bound


@dataclass
class CertifiedBound:
    A: Fraction
    degree: int
    bound: arb
    provenance: str
    precision_bits: int
    checks: dict = field(default_factory=dict)
    metadata: dict = field(default_factory=dict)

    @property
    def certified_lower(self) -> Fraction:
        # endpoints are rounded at the bound's own precision, not the ambient one
        with working_precision(self.precision_bits):
            return lower(self.bound)

    @property
    def vacuous(self) -> bool:
        return self.certified_lower <= 0

    def to_json(self, **extra) -> dict:
        with working_precision(self.precision_bits):
            return self._to_json(extra)

    def _to_json(self, extra: dict) -> dict:
        def dec(x: Fraction, digits: int = 25, rounding: str = "down") -> str:
            return decimal_string(x, digits, rounding)

        checks = self.checks
        out = {
            "schema": CERTIFICATE_SCHEMA,
            "A": str(self.A),
            "degree": self.degree,
            "certified_lower": dec(self.certified_lower),
            "certified_lower_exact": str(self.certified_lower),
            "bound_midpoint": self.bound.mid().str(30, radius=False),
            "bound_radius": dec(upper(self.bound.rad()), 6, "up"),
            "b": dec(checks["b"]) if "b" in checks else None,
            "B": dec(checks["B"], 25, "up") if "B" in checks else None,
            "precision_bits": self.precision_bits,
            "provenance": self.provenance,
            "per_block_eigen_lower": {k: dec(v) for k, v in checks.get("per_block_eigen_lower", {}).items()},
            "vacuous": self.vacuous,
        }
        out.update(self.metadata)
        out.update(extra)
        return out

    def dumps(self, **extra) -> str:
        return json.dumps(self.to_json(**extra), indent=2, sort_keys=True)


def objective_quotient(polys, A) -> tuple[arb, arb, arb]:
    """(value, numerator, denominator) of the tuple's quotient."""
    A = Fraction(A)
    a = arb(fmpq(A.numerator, A.denominator))
    f1, f2, f3 = polys[0], polys[1], polys[2]
    num = laguerre.eval_at_zero(f1) - laguerre.eval_at_zero(f2) - a * laguerre.tail_integral(f3, 1)
    den = laguerre.integral_over_line(f1) + laguerre.integral_over_line(f2)
    if not den > 0:
        raise Indeterminate("normalization int f1 + int f2 is not certified positive")
    return num / den, num, den


def absorption_check(b: Fraction, b_slack: Fraction, rep: TridiagonalRep) -> Fraction:
    """Decide b >= 2B; returns B, raises GershgorinFailure or Indeterminate."""
    B = rep.max_abs_upper()
    if b >= 2 * B:
        return B
    # a definite failure needs the best possible b below the smallest possible B
    if b + b_slack >= 2 * rep.max_abs_lower():
        raise Indeterminate("b >= 2B undecided at this precision", margin=b - 2 * B)
    raise GershgorinFailure(b, B)


def _certify_once(t: SosTuple, A: Fraction) -> CertifiedBound:
    eig = {}
    names = t.block_names()
    for name, M in zip(names, t.blocks()):
        if name == "Q4":
            continue
        check = psd_lower_bound(M)
        eig[name] = check.lower
        if not check.passed:
            raise PsdFailure(name, check.lower)
    q4 = psd_lower_bound(t.Q[3])
    b = q4.lower
    eig["Q4"] = b
    if not q4.passed:
        # b >= 2B >= 0 is then impossible whatever the residual is
        raise PsdFailure("Q4", b)
    polys = tuple_polynomials(t)
    r = residual_polynomial(t, polys)
    rep = to_tridiagonal(r, t.d)
    B = absorption_check(b, q4.slack, rep)
    value, num, den = objective_quotient(polys, A)
    checks = {"b": b, "B": B, "per_block_eigen_lower": eig}
    meta = {"numerator": num.mid().str(20, radius=False), "denominator": den.mid().str(20, radius=False)}
    meta.update({k: v for k, v in t.metadata.items() if k in ("warnings", "max_skew")})
    return CertifiedBound(A, t.d, value, "sdp-solution", ctx.prec, checks, meta)


def absorb_and_certify(t: SosTuple, A, start_bits: int = DEFAULT_PRECISION,
                       max_bits: int = MAX_PRECISION) -> CertifiedBound:
    """Run the full verification, doubling precision on undecided predicates."""
    A = Fraction(A)
    result, _bits = with_escalation(lambda: _certify_once(t, A), start_bits, max_bits)
    return result


def corrected_q4(t: SosTuple) -> arb_mat:
    """Q4 - Q4', the block that makes the residual vanish identically."""
    r = residual_polynomial(t)
    rep = to_tridiagonal(r, t.d)
    return t.Q[3] - rep.matrix()
