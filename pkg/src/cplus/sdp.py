"""Semidefinite program for C+(A) at polynomial degree d.

Variables are eight PSD blocks: Q~_1..Q~_4 of size d+1 and R~_1..R~_4 of size
d, with f_i(x) = p_i(x^2) e^{-pi x^2} and

    p_i(u) = v_d(u)^T Q_i v_d(u) + u v_{d-1}(u)^T R_i v_{d-1}(u),
    Q_i = Q~_i + eps I,  R_i = R~_i + eps I.

Constraints, in Laguerre coefficients of the Fourier-side residual:

    (FT f_1 - FT f_2) - (f_3 - f_4) = 0         (2d+1 rows)
    int f_1 + int f_2 = 1                         (1 row)

Objective (maximized): f_1(0) - f_2(0) - A int_{|x|>1} f_3.

The program is stored in SDPA dual form, max F0.Y s.t. F_p.Y = c_p, Y >= 0,
so off-diagonal coefficients are written once and count twice.
"""

from __future__ import annotations

import io
import os
import re
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterator

from flint import arb, arb_mat, fmpq, fmpq_mat

from . import laguerre
from .rigor import DEFAULT_PRECISION, current_precision, enclosure, exact_to_fraction, working_precision

N_FUNCTIONS = 4
FORMAT_TAG = "cplus-sdp"
SKEW_WARNING_THRESHOLD = Fraction(1, 10**40)
DEFAULT_DIGITS = 60


class SdpError(ValueError):
    pass


class SolutionParseError(SdpError):
    pass


class MissingSection(SolutionParseError):
    pass


class DimensionMismatch(SdpError):
    pass


def _as_fraction(x) -> Fraction:
    if isinstance(x, Fraction):
        return x
    if isinstance(x, fmpq):
        return Fraction(int(x.p), int(x.q))
    return Fraction(x)


def _fmpq(x: Fraction) -> fmpq:
    return fmpq(x.numerator, x.denominator)


@dataclass
class _GramTerms:
    """Per-entry linear data for one Gram block shape (Q-type or R-type)."""

    pairs: list[tuple[int, int]]
    time_side: arb_mat  # Laguerre coefficients of f contributed by entry (i, j)
    fourier_side: arb_mat  # same for FT f
    at_zero: list[arb]
    mass: list[arb]
    tail: list[arb]


def _gram_terms(d: int, shifted: bool) -> _GramTerms:
    table = laguerre.product_table(d)
    length = table.length
    if shifted:
        pairs = table.pairs_r
        rows = arb_mat(table.rows_r) * (1 / arb.pi()) if pairs else arb_mat(0, length)
    else:
        pairs = table.pairs_q
        rows = arb_mat(table.rows_q)
    with laguerre.extra_precision(length + 16):
        fourier = rows * arb_mat(laguerre._square_matrix("fourier", length)) if pairs else rows
    zero_vals = arb_mat(length, 1, [arb(laguerre.laguerre_at_zero(k)) for k in range(length)])
    tail_weights = arb_mat(length, 1, list(laguerre.laguerre_tail_weights(length, 1)))
    at_zero = rows * zero_vals if pairs else None
    tail = rows * tail_weights if pairs else None
    n = len(pairs)
    return _GramTerms(
        pairs=pairs,
        time_side=rows,
        fourier_side=fourier,
        at_zero=[at_zero[r, 0] for r in range(n)],
        mass=[rows[r, 0] for r in range(n)],
        tail=[tail[r, 0] for r in range(n)],
    )


@dataclass
class SdpProblem:
    A: Fraction
    d: int
    epsilon: Fraction
    q_terms: _GramTerms = field(repr=False)
    r_terms: _GramTerms = field(repr=False)
    rhs: list = field(repr=False)
    objective_constant: arb = field(repr=False)
    precision: int = DEFAULT_PRECISION

    @property
    def block_sizes(self) -> tuple[int, ...]:
        return (self.d + 1,) * N_FUNCTIONS + (self.d,) * N_FUNCTIONS

    @property
    def n_constraints(self) -> int:
        return 2 * self.d + 2

    def _terms(self, block: int) -> _GramTerms:
        return self.q_terms if block < N_FUNCTIONS else self.r_terms

    def constraint_entries(self, block: int) -> list[tuple[int, int, int, arb]]:
        """(row, i, j, value) for block ``block`` (0-based everywhere), i <= j."""
        with working_precision(self.precision):
            return list(self._constraint_entries(block))

    def objective_entries(self, block: int) -> list[tuple[int, int, arb]]:
        with working_precision(self.precision):
            return list(self._objective_entries(block))

    def _constraint_entries(self, block: int) -> Iterator[tuple[int, int, int, arb]]:
        terms = self._terms(block)
        func = block % N_FUNCTIONS
        norm_row = self.n_constraints - 1
        for r, (i, j) in enumerate(terms.pairs):
            if func == 0:
                src, sign = terms.fourier_side, 1
            elif func == 1:
                src, sign = terms.fourier_side, -1
            elif func == 2:
                src, sign = terms.time_side, -1
            else:
                src, sign = terms.time_side, 1
            for n in range(i + j + 2 if block >= N_FUNCTIONS else i + j + 1):
                v = src[r, n]
                if not v.is_zero():
                    yield n, i, j, v if sign > 0 else -v
            if func < 2 and not terms.mass[r].is_zero():
                yield norm_row, i, j, terms.mass[r]

    def _objective_entries(self, block: int) -> Iterator[tuple[int, int, arb]]:
        terms = self._terms(block)
        func = block % N_FUNCTIONS
        A = arb(_fmpq(self.A))
        for r, (i, j) in enumerate(terms.pairs):
            if func == 0:
                v = terms.at_zero[r]
            elif func == 1:
                v = -terms.at_zero[r]
            elif func == 2:
                v = -A * terms.tail[r]
            else:
                continue
            if not v.is_zero():
                yield i, j, v


def assemble(A, d: int, epsilon=Fraction(1, 10**20)) -> SdpProblem:
    """Build the SDP for C+(A) at degree d with the eps*I shift folded in."""
    A = _as_fraction(A)
    epsilon = _as_fraction(epsilon)
    if A < 1:
        raise ValueError("A must be at least 1")
    if d < 2:
        raise ValueError("degree must be at least 2")
    if epsilon < 0:
        raise ValueError("epsilon must be nonnegative")
    with working_precision(max(current_precision(), DEFAULT_PRECISION)) as bits:
        return _assemble(A, d, epsilon, bits)


def _assemble(A: Fraction, d: int, epsilon: Fraction, bits: int) -> SdpProblem:
    q_terms = _gram_terms(d, shifted=False)
    r_terms = _gram_terms(d, shifted=True)
    m = 2 * d + 2
    problem = SdpProblem(A, d, epsilon, q_terms, r_terms, [], arb(0), bits)
    rhs = [arb(0)] * (m - 1) + [arb(1)]
    const = arb(0)
    if epsilon:
        eps = arb(_fmpq(epsilon))
        for b in range(2 * N_FUNCTIONS):
            for row, i, j, v in problem.constraint_entries(b):
                if i == j:
                    rhs[row] -= eps * v
            for i, j, v in problem.objective_entries(b):
                if i == j:
                    const += eps * v
    problem.rhs = rhs
    problem.objective_constant = const
    return problem


# ---------------------------------------------------------------------------
# SDPA sparse format


def _fmt(x: arb, digits: int) -> str:
    s = x.mid().str(digits, radius=False)
    return s if s != "0" else "0"


def write_sdpa(problem: SdpProblem, path, digits: int = DEFAULT_DIGITS) -> None:
    """Write the problem as SDPA sparse text (.dat-s).

    Comment lines carry A, d, eps and the objective constant from the shift so
    the file alone identifies the instance.  Output is byte-deterministic.
    """
    buf = io.StringIO()
    buf.write(f'"{FORMAT_TAG} A={problem.A} d={problem.d} epsilon={problem.epsilon}\n')
    buf.write(f'"objective_constant={_fmt(problem.objective_constant, digits)}\n')
    buf.write(f"{problem.n_constraints}\n")
    buf.write(f"{2 * N_FUNCTIONS}\n")
    buf.write(" ".join(str(s) for s in problem.block_sizes) + "\n")
    buf.write(" ".join(_fmt(c, digits) for c in problem.rhs) + "\n")
    for b in range(2 * N_FUNCTIONS):
        for i, j, v in problem.objective_entries(b):
            buf.write(f"0 {b + 1} {i + 1} {j + 1} {_fmt(v, digits)}\n")
    for b in range(2 * N_FUNCTIONS):
        lines = sorted(problem.constraint_entries(b), key=lambda e: (e[0], e[1], e[2]))
        for row, i, j, v in lines:
            buf.write(f"{row + 1} {b + 1} {i + 1} {j + 1} {_fmt(v, digits)}\n")
    try:
        with open(path, "w", encoding="ascii", newline="\n") as fh:
            fh.write(buf.getvalue())
    except OSError as exc:
        raise OSError(f"cannot write SDPA file {os.fspath(path)}: {exc}") from exc


@dataclass
class SdpaData:
    """Parsed .dat-s file with exact rational coefficients."""

    n_constraints: int
    block_sizes: tuple[int, ...]
    rhs: list[Fraction]
    entries: dict[tuple[int, int, int, int], Fraction]  # (matno, block, i, j), 1-based
    comments: list[str]

    def header(self) -> dict[str, str]:
        out = {}
        for c in self.comments:
            for tok in c.split():
                if "=" in tok:
                    k, v = tok.split("=", 1)
                    out[k] = v
        return out

    def structure(self):
        """Hashable summary of constraint count, blocks and sparsity pattern."""
        return (self.n_constraints, self.block_sizes, frozenset(self.entries))


_SPLIT = re.compile(r"[\s,{}()]+")


def read_sdpa(path) -> SdpaData:
    try:
        with open(path, encoding="ascii") as fh:
            lines = fh.read().splitlines()
    except OSError as exc:
        raise OSError(f"cannot read SDPA file {os.fspath(path)}: {exc}") from exc
    comments = []
    pos = 0
    while pos < len(lines) and (lines[pos].startswith(('"', "*")) or not lines[pos].strip()):
        if lines[pos].strip():
            comments.append(lines[pos][1:])
        pos += 1

    def tokens(line: str) -> list[str]:
        return [t for t in _SPLIT.split(line) if t]

    try:
        m = int(tokens(lines[pos])[0])
        nblocks = int(tokens(lines[pos + 1])[0])
        sizes = tuple(int(t) for t in tokens(lines[pos + 2])[:nblocks])
        rhs = [Fraction(t) for t in tokens(lines[pos + 3])[:m]]
    except (IndexError, ValueError) as exc:
        raise SdpError(f"{os.fspath(path)}: malformed SDPA header: {exc}") from exc
    if len(sizes) != nblocks or len(rhs) != m:
        raise SdpError(f"{os.fspath(path)}: header counts do not match")
    entries = {}
    for lineno, line in enumerate(lines[pos + 4 :], start=pos + 5):
        t = tokens(line)
        if not t:
            continue
        if len(t) != 5:
            raise SdpError(f"{os.fspath(path)}:{lineno}: expected 5 fields, got {len(t)}")
        key = tuple(int(x) for x in t[:4])
        mat, blk, i, j = key
        if not (0 <= mat <= m and 1 <= blk <= nblocks and 1 <= i <= j <= abs(sizes[blk - 1])):
            raise SdpError(f"{os.fspath(path)}:{lineno}: entry index out of range")
        entries[key] = Fraction(t[4])
    return SdpaData(m, sizes, rhs, entries, comments)


# ---------------------------------------------------------------------------
# solutions


@dataclass
class SosTuple:
    """Gram matrices of a candidate feasible tuple, shift already applied."""

    d: int
    Q: list  # four (d+1)x(d+1) arb_mat
    R: list  # four d x d arb_mat
    epsilon: Fraction = Fraction(0)
    metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        if len(self.Q) != N_FUNCTIONS or len(self.R) != N_FUNCTIONS:
            raise DimensionMismatch("an SOS tuple needs four Q and four R blocks")
        for name, mats, size in (("Q", self.Q, self.d + 1), ("R", self.R, self.d)):
            for k, M in enumerate(mats):
                if M.nrows() != size or M.ncols() != size:
                    raise DimensionMismatch(
                        f"{name}{k + 1} must be {size}x{size}, got {M.nrows()}x{M.ncols()}"
                    )

    def blocks(self) -> list:
        return list(self.Q) + list(self.R)

    def block_names(self) -> list[str]:
        return [f"Q{k + 1}" for k in range(N_FUNCTIONS)] + [f"R{k + 1}" for k in range(N_FUNCTIONS)]

    def scaled(self, factor) -> "SosTuple":
        f = enclosure(factor)
        return SosTuple(self.d, [M * f for M in self.Q], [M * f for M in self.R], self.epsilon, dict(self.metadata))

    def with_block(self, name: str, M) -> "SosTuple":
        Q, R = list(self.Q), list(self.R)
        (Q if name[0] == "Q" else R)[int(name[1:]) - 1] = M
        return SosTuple(self.d, Q, R, self.epsilon, dict(self.metadata))


def _parse_nested(text: str, start: int):
    """Parse a brace-nested list of numbers beginning at text[start] == '{'."""
    tok = re.compile(r"\s*(\{|\}|,|[^\s{},]+)")
    pos = start
    stack: list[list] = []
    result = None
    while True:
        mt = tok.match(text, pos)
        if not mt:
            raise SolutionParseError("unterminated matrix block in solution file")
        t = mt.group(1)
        pos = mt.end()
        if t == "{":
            stack.append([])
        elif t == "}":
            done = stack.pop()
            if not stack:
                result = done
                break
            stack[-1].append(done)
        elif t == ",":
            continue
        else:
            if not stack:
                raise SolutionParseError(f"unexpected token {t!r} outside braces")
            try:
                stack[-1].append(Fraction(t))
            except ValueError as exc:
                raise SolutionParseError(f"bad number {t!r} in solution file") from exc
    return result, pos


def read_solution_blocks(path, section: str = "yMat") -> list[list[list[Fraction]]]:
    """Block matrices from an SDPA-style result file, as exact rationals."""
    try:
        with open(path, encoding="ascii", errors="replace") as fh:
            text = fh.read()
    except OSError as exc:
        raise OSError(f"cannot read solution file {os.fspath(path)}: {exc}") from exc
    mt = re.search(rf"^\s*{section}\s*=", text, re.M)
    if not mt:
        raise MissingSection(f"{os.fspath(path)}: no '{section}' section")
    brace = text.find("{", mt.end())
    if brace < 0:
        raise MissingSection(f"{os.fspath(path)}: '{section}' section is empty")
    try:
        nested, _ = _parse_nested(text, brace)
    except IndexError as exc:
        raise SolutionParseError(f"{os.fspath(path)}: unbalanced braces in '{section}'") from exc
    return nested


def _dyadic(x: Fraction) -> arb:
    """Nearest working-precision dyadic rational, as an exact ball."""
    return arb(fmpq(x.numerator, x.denominator)).mid()


def read_solution(path, problem) -> SosTuple:
    """Load the solver's block matrices as an SosTuple with eps*I added back.

    ``problem`` may be an SdpProblem, ProblemShape or SdpaData; only its
    degree, block sizes and epsilon are used.
    """
    sizes, d, epsilon = _problem_shape(problem)
    blocks = read_solution_blocks(path)
    if len(blocks) < len(sizes):
        raise SolutionParseError(
            f"{os.fspath(path)}: solution has {len(blocks)} blocks, missing block {len(blocks) + 1}"
        )
    if len(blocks) > len(sizes):
        raise DimensionMismatch(f"{os.fspath(path)}: expected {len(sizes)} blocks, got {len(blocks)}")
    max_skew = Fraction(0)
    mats = []
    for b, (rows, size) in enumerate(zip(blocks, sizes)):
        if len(rows) != size or any(not isinstance(r, list) or len(r) != size for r in rows):
            raise DimensionMismatch(f"{os.fspath(path)}: block {b + 1} is not {size}x{size}")
        M = arb_mat(size, size)
        for i in range(size):
            for j in range(i, size):
                a, c = rows[i][j], rows[j][i]
                max_skew = max(max_skew, abs(a - c))
                # the shift is added before rounding so every entry is an exact ball
                v = _dyadic((a + c) / 2 + (epsilon if i == j else 0))
                M[i, j] = v
                M[j, i] = v
        mats.append(M)
    meta = {"source": os.fspath(path), "max_skew": float(max_skew)}
    if max_skew > SKEW_WARNING_THRESHOLD:
        meta["warnings"] = [f"input matrices were asymmetric (max skew {float(max_skew):.3e}); symmetrized"]
    return SosTuple(d, mats[:N_FUNCTIONS], mats[N_FUNCTIONS:], epsilon, meta)


@dataclass(frozen=True)
class ProblemShape:
    """What a solution reader needs to know about the instance."""

    A: Fraction
    d: int
    epsilon: Fraction

    @property
    def block_sizes(self) -> tuple[int, ...]:
        return (self.d + 1,) * N_FUNCTIONS + (self.d,) * N_FUNCTIONS


def read_sdpa_header(path) -> ProblemShape:
    """A, d and epsilon from the comment lines written by :func:`write_sdpa`."""
    header = {}
    try:
        with open(path, encoding="ascii") as fh:
            for line in fh:
                if not line.startswith(('"', "*")):
                    break
                for tok in line[1:].split():
                    if "=" in tok:
                        k, v = tok.split("=", 1)
                        header[k] = v
    except OSError as exc:
        raise OSError(f"cannot read SDPA file {os.fspath(path)}: {exc}") from exc
    try:
        return ProblemShape(Fraction(header["A"]), int(header["d"]), Fraction(header["epsilon"]))
    except (KeyError, ValueError) as exc:
        raise SdpError(f"{os.fspath(path)}: header does not identify A, d and epsilon") from exc


def _problem_shape(problem) -> tuple[tuple[int, ...], int, Fraction]:
    if isinstance(problem, (SdpProblem, ProblemShape)):
        return problem.block_sizes, problem.d, problem.epsilon
    if isinstance(problem, SdpaData):
        header = problem.header()
        sizes = problem.block_sizes
        if len(sizes) != 2 * N_FUNCTIONS:
            raise DimensionMismatch(f"expected {2 * N_FUNCTIONS} blocks, got {len(sizes)}")
        return sizes, sizes[0] - 1, Fraction(header.get("epsilon", "0"))
    raise TypeError("problem must be SdpProblem, ProblemShape or SdpaData")


def write_solution(path, blocks, digits: int = DEFAULT_DIGITS, extra: dict | None = None) -> None:
    """Write block matrices in the SDPA result layout (section ``yMat``)."""
    out = io.StringIO()
    for k, v in (extra or {}).items():
        out.write(f"{k} = {v}\n")
    out.write("yMat = \n{\n")
    for M in blocks:
        out.write("{\n")
        for row in M:
            out.write("{" + ",".join(_fmt_any(x, digits) for x in row) + " },\n")
        out.write("}\n")
    out.write("}\n")
    with open(path, "w", encoding="ascii", newline="\n") as fh:
        fh.write(out.getvalue())


def _fmt_any(x, digits: int) -> str:
    if isinstance(x, arb):
        return _fmt(x, digits)
    if isinstance(x, Fraction):
        return _fmt(arb(_fmpq(x)), digits)
    return repr(float(x))


def tuple_from_fractions(d: int, blocks, epsilon=Fraction(0)) -> SosTuple:
    """Exact SosTuple from eight rational matrices (already shifted)."""
    mats = [arb_mat(fmpq_mat([[_fmpq(_as_fraction(x)) for x in row] for row in M])) if len(M) else arb_mat(0, 0) for M in blocks]
    return SosTuple(d, mats[:N_FUNCTIONS], mats[N_FUNCTIONS:], _as_fraction(epsilon))


def fraction_of(x: arb) -> Fraction:
    return exact_to_fraction(x)
