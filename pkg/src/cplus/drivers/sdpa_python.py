"""Solve a .dat-s file with the SDPA Python bindings and write a yMat result.

The bindings take double-precision data, which is far too coarse for the
Laguerre constraint matrix (row norms span many orders of magnitude).  So:

1. the equality rows are orthonormalized in high precision (Cholesky of the
   Gram matrix A A^T, then Q = L^{-1} A, b' = L^{-1} b);
2. the well-conditioned system Q x = b' is rounded to doubles and solved;
3. the returned point is projected back onto {A x = b} in high precision,
   x <- x + Q^T (b' - Q x), and written with enough digits to keep the
   projection.

Nothing here is trusted: the certify step recomputes everything from the
written matrices.  Usage::

    python -m cplus.drivers.sdpa_python INPUT.dat-s OUTPUT.out [options]
"""

from __future__ import annotations

import argparse
import sys
import time

import numpy as np
from flint import arb, arb_mat, ctx, fmpq

from ..sdp import read_sdpa, write_solution


def _dense_problem(data):
    sizes = data.block_sizes
    offsets = np.cumsum([0] + [s * s for s in sizes])
    n = int(offsets[-1])
    m = data.n_constraints
    A = arb_mat(m, n)
    c = arb_mat(n, 1)
    for (mat, blk, i, j), v in data.entries.items():
        s = sizes[blk - 1]
        base = int(offsets[blk - 1])
        val = arb(fmpq(v.numerator, v.denominator))
        cols = {base + (i - 1) * s + (j - 1), base + (j - 1) * s + (i - 1)}
        for col in cols:
            if mat == 0:
                c[col, 0] = val
            else:
                A[mat - 1, col] = val
    b = arb_mat(m, 1, [arb(fmpq(v.numerator, v.denominator)) for v in data.rhs])
    return A, b, c, sizes, offsets


def _mid(M: arb_mat) -> arb_mat:
    return M.mid()


def _cholesky_mid(G: arb_mat) -> arb_mat:
    """Lower Cholesky factor, computed on midpoints only (no error tracking)."""
    import mpmath

    m = G.nrows()
    with mpmath.workprec(ctx.prec):
        Gm = mpmath.matrix(m, m)
        for i in range(m):
            for j in range(m):
                Gm[i, j] = mpmath.mpf(G[i, j].mid().str(ctx.prec // 3 + 10, radius=False))
        L = mpmath.cholesky(Gm)
        return arb_mat(m, m, [arb(mpmath.nstr(L[i, j], ctx.prec // 3 + 10)) for i in range(m) for j in range(m)])


def orthonormalize(A: arb_mat, b: arb_mat):
    G = _mid(A * A.transpose())
    L = _cholesky_mid(G)
    Q = _mid(L.solve(A, algorithm="approx"))
    bq = _mid(L.solve(b, algorithm="approx"))
    return Q, bq


def _to_numpy(M: arb_mat) -> np.ndarray:
    return np.array([[float(M[i, j]) for j in range(M.ncols())] for i in range(M.nrows())])


def solve(path_in: str, path_out: str, precision: int = 512, mpf_precision: int = 256,
          eps_star: float = 1e-12, eps_dash: float = 1e-12, lambda_star: float = 100.0,
          max_iteration: int = 200, trace_bound: float | None = None, digits: int | None = None,
          log=sys.stderr) -> int:
    import sdpap
    from scipy import sparse

    ctx.prec = precision
    t0 = time.time()
    data = read_sdpa(path_in)
    A, b, c, sizes, offsets = _dense_problem(data)
    m, n = A.nrows(), A.ncols()
    if trace_bound is not None:
        # one LP slack s >= 0 with s + sum_b tr(Y_b) = trace_bound
        row = arb_mat(1, n + 1)
        row[0, 0] = 1
        for k, s in enumerate(sizes):
            for i in range(s):
                row[0, 1 + int(offsets[k]) + i * s + i] = 1
        A2 = arb_mat(m + 1, n + 1)
        for i in range(m):
            for j in range(n):
                v = A[i, j]
                if not v.is_zero():
                    A2[i, j + 1] = v
        for j in range(n + 1):
            A2[m, j] = row[0, j]
        b2 = arb_mat(m + 1, 1, [b[i, 0] for i in range(m)] + [arb(trace_bound)])
        c2 = arb_mat(n + 1, 1, [arb(0)] + [c[i, 0] for i in range(n)])
        A, b, c = A2, b2, c2
        m, n = m + 1, n + 1
    print(f"read {m}x{n} in {time.time() - t0:.1f}s", file=log)

    t0 = time.time()
    Q, bq = orthonormalize(A, b)
    print(f"orthonormalized in {time.time() - t0:.1f}s", file=log)

    Qf, bf = _to_numpy(Q), _to_numpy(bq).ravel()
    cf = -_to_numpy(c).ravel()
    if trace_bound is not None:
        K = sdpap.SymCone(l=1, s=tuple(sizes))
    else:
        K = sdpap.SymCone(s=tuple(sizes))
    J = sdpap.SymCone(f=m)
    opt = {
        "print": "no",
        "epsilonStar": eps_star,
        "epsilonDash": eps_dash,
        "mpfPrecision": mpf_precision,
        "maxIteration": max_iteration,
        "lambdaStar": lambda_star,
    }
    t0 = time.time()
    x, _y, _info, _tinfo, sdpainfo = sdpap.solve(
        sparse.csc_matrix(Qf), sparse.csc_matrix(bf).T, sparse.csc_matrix(cf).T, K, J, opt
    )
    phase = sdpainfo.get("phasevalue")
    print(f"solver finished in {time.time() - t0:.1f}s: {phase} primal {sdpainfo.get('primalObj')}", file=log)
    if x is None:
        return 1
    xs = np.asarray(x.todense()).ravel()

    xa = arb_mat(n, 1, [arb(float(v)) for v in xs])
    Qt = Q.transpose()
    for _ in range(2):
        r = _mid(bq - Q * xa)
        xa = _mid(xa + Qt * r)
    resid = _mid(A * xa - b)
    worst = max(abs(float(resid[i, 0])) for i in range(m))
    print(f"projected; max constraint residual {worst:.3e}", file=log)

    start = 1 if trace_bound is not None else 0
    blocks = []
    for k, s in enumerate(sizes):
        base = start + int(offsets[k])
        M = [[(xa[base + i * s + j, 0] + xa[base + j * s + i, 0]) / 2 for j in range(s)] for i in range(s)]
        blocks.append(M)
    obj = (c.transpose() * xa)[0, 0]
    extra = {
        "phase.value": phase,
        "objValPrimal": obj.mid().str(30, radius=False),
        "maxConstraintResidual": f"{worst:.3e}",
    }
    write_solution(path_out, blocks, digits=digits or max(precision // 4, 60), extra=extra)
    return 0 if phase in ("pdOPT", "pdFEAS", "noINFO") else 1


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("input")
    ap.add_argument("output")
    ap.add_argument("--precision", type=int, default=512, help="bits for orthonormalization and projection")
    ap.add_argument("--mpf-precision", type=int, default=256)
    ap.add_argument("--epsilon-star", type=float, default=1e-12)
    ap.add_argument("--epsilon-dash", type=float, default=1e-12)
    ap.add_argument("--lambda-star", type=float, default=100.0)
    ap.add_argument("--max-iteration", type=int, default=200)
    ap.add_argument("--trace-bound", type=float, default=None)
    ns = ap.parse_args(argv)
    return solve(
        ns.input, ns.output, ns.precision, ns.mpf_precision, ns.epsilon_star, ns.epsilon_dash,
        ns.lambda_star, ns.max_iteration, ns.trace_bound,
    )


if __name__ == "__main__":
    sys.exit(main())
