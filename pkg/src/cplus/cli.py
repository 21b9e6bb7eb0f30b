"""Command-line entry point.

Exit codes: 0 certified / success, 2 verification failed, 3 input or parse
error, 4 solver invocation failed.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import os
import shlex
import subprocess
import sys
import time
from fractions import Fraction
from importlib import resources

from . import bounds as bounds_mod
from . import candidate, certify, config, sdp
from .rigor import Indeterminate, PrecisionExhausted, working_precision

EXIT_OK = 0
EXIT_VERIFY_FAILED = 2
EXIT_INPUT_ERROR = 3
EXIT_SOLVER_FAILED = 4

CANDIDATE_TARGET = Fraction(11943, 10000)
SDP_TARGET = Fraction(11965, 10000)


class SolverFailure(RuntimeError):
    pass


def shipped_candidate_path() -> str:
    return str(resources.files("cplus") / "data" / "explicit_candidate.json")


def _sha256(path: str) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def _write_json(path: str | None, payload: dict) -> None:
    text = json.dumps(payload, indent=2, sort_keys=True) + "\n"
    if path:
        os.makedirs(os.path.dirname(os.path.abspath(path)), exist_ok=True)
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def _stamp(cfg: config.RunConfig) -> dict:
    return {"config_hash": cfg.digest(), "config": cfg.to_dict()}


def _config_from_args(ns) -> config.RunConfig:
    return config.load(
        getattr(ns, "config", None),
        A=getattr(ns, "A", None),
        degree=getattr(ns, "degree", None),
        epsilon=getattr(ns, "epsilon", None),
        precision_bits=getattr(ns, "precision", None),
        digits=getattr(ns, "digits", None),
        solver=getattr(ns, "solver", None),
        workspace=getattr(ns, "workspace", None),
        quadrature_tolerance=getattr(ns, "tolerance", None),
        quadrature_budget=getattr(ns, "budget", None),
    )


def _default_problem_path(cfg: config.RunConfig) -> str:
    return cfg.path(f"cplus_A{cfg.A.numerator}_{cfg.A.denominator}_d{cfg.degree}.dat-s")


# ---------------------------------------------------------------------------
# subcommands


def cmd_build_sdp(cfg: config.RunConfig, output: str | None = None) -> dict:
    path = output or _default_problem_path(cfg)
    os.makedirs(os.path.dirname(os.path.abspath(path)), exist_ok=True)
    t0 = time.time()
    with working_precision(cfg.precision_bits):
        problem = sdp.assemble(cfg.A, cfg.degree, cfg.epsilon_fraction)
        sdp.write_sdpa(problem, path, cfg.digits)
    manifest = {
        "problem": os.path.abspath(path),
        "sha256": _sha256(path),
        "A": str(cfg.A),
        "degree": cfg.degree,
        "epsilon": str(cfg.epsilon_fraction),
        "constraints": problem.n_constraints,
        "block_sizes": list(problem.block_sizes),
        "seconds": round(time.time() - t0, 3),
        **_stamp(cfg),
    }
    _write_json(path + ".manifest.json", manifest)
    return manifest


def cmd_solve(cfg: config.RunConfig, problem_path: str, output: str) -> str:
    command = cfg.solver_command(problem_path, output)
    try:
        proc = subprocess.run(command, shell=True, cwd=cfg.workspace, env=_solver_env())
    except OSError as exc:
        raise SolverFailure(f"cannot start solver: {exc}") from exc
    if proc.returncode != 0:
        raise SolverFailure(f"solver exited with status {proc.returncode}: {command}")
    if not os.path.exists(output):
        raise SolverFailure(f"solver produced no output file {output}")
    return output


def _solver_env() -> dict:
    env = dict(os.environ)
    src = os.path.dirname(os.path.dirname(os.path.abspath(__file__)))
    env["PYTHONPATH"] = src + (os.pathsep + env["PYTHONPATH"] if env.get("PYTHONPATH") else "")
    return env


def cmd_verify(cfg: config.RunConfig, solution_path: str, problem_path: str | None = None) -> dict:
    if problem_path:
        shape = sdp.read_sdpa_header(problem_path)
    else:
        shape = sdp.ProblemShape(cfg.A, cfg.degree, cfg.epsilon_fraction)
    with working_precision(cfg.precision_bits):
        tup = sdp.read_solution(solution_path, shape)
        t0 = time.time()
        bound = certify.absorb_and_certify(tup, shape.A, cfg.precision_bits, cfg.max_precision_bits)
    return bound.to_json(
        solution=os.path.abspath(solution_path),
        solution_sha256=_sha256(solution_path),
        epsilon=str(shape.epsilon),
        seconds=round(time.time() - t0, 3),
        **_stamp(cfg),
    )


def cmd_certify_candidate(cfg: config.RunConfig, candidate_path: str) -> dict:
    t0 = time.time()
    with working_precision(cfg.precision_bits):
        # decimal inputs are rounded on load, so parse at the working precision
        F = candidate.load_mixture(candidate_path)
        bound = candidate.certify_candidate(
            F,
            cfg.A,
            tolerance=Fraction(cfg.quadrature_tolerance),
            budget=cfg.quadrature_budget,
            tail_tolerance=Fraction(cfg.tail_tolerance),
        )
    return bound.to_json(
        candidate=os.path.abspath(candidate_path),
        candidate_sha256=_sha256(candidate_path),
        seconds=round(time.time() - t0, 3),
        **_stamp(cfg),
    )


def cmd_bounds(certificate: dict, alphas) -> dict:
    out = bounds_mod.report(certificate, alphas)
    out["statement"] = bounds_mod.render(certificate, alphas)
    return out


# ---------------------------------------------------------------------------
# argument parsing


def _add_common(p: argparse.ArgumentParser, degree: bool = True) -> None:
    p.add_argument("--config", help="INI config file with a [run] section")
    p.add_argument("--A", dest="A", help="the constant A (rational, e.g. 36/11)")
    if degree:
        p.add_argument("--degree", "-d", type=int)
        p.add_argument("--epsilon", help="diagonal shift (default 1e-20)")
    p.add_argument("--precision", type=int, help="working precision in bits")
    p.add_argument("--workspace", help=f"workspace directory (default ${config.WORKSPACE_ENV} or cwd)")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="cplus", description="Certified lower bounds on C+(A).")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("build-sdp", help="assemble the SDP and write it as .dat-s")
    _add_common(p)
    p.add_argument("--digits", type=int, help="significant digits per coefficient (default 60)")
    p.add_argument("-o", "--output")

    p = sub.add_parser("solve", help="build (unless given) and run the configured solver")
    _add_common(p)
    p.add_argument("--digits", type=int)
    p.add_argument("--solver", help="template name or command with {input} and {output}")
    p.add_argument("--problem", help="existing .dat-s file")
    p.add_argument("-o", "--output", help="solution file path")
    p.add_argument("--verify", action="store_true", help="verify the solution afterwards")
    p.add_argument("--certificate", help="certificate path when --verify is given")

    p = sub.add_parser("verify", help="certify a solver solution")
    _add_common(p)
    p.add_argument("solution")
    p.add_argument("--problem", help=".dat-s file the solution belongs to (reads A, d, epsilon)")
    p.add_argument("-o", "--output", help="certificate JSON path (default stdout)")

    p = sub.add_parser("certify-candidate", help="certify an explicit Gaussian-mixture candidate")
    _add_common(p, degree=False)
    p.add_argument("candidate", nargs="?", help="JSON candidate (default: the shipped fixture)")
    p.add_argument("--tolerance", help="quadrature tolerance")
    p.add_argument("--budget", type=int, help="maximum number of subintervals")
    p.add_argument("-o", "--output")

    p = sub.add_parser("bounds", help="translate a certificate into interval constants")
    p.add_argument("certificate", nargs="?", help="certificate JSON")
    p.add_argument("--certified-lower", help="use this lower bound instead of a certificate")
    p.add_argument("--A", dest="A", help="A for --certified-lower")
    p.add_argument("--alpha", action="append", help="alpha values (repeatable; default 0 and 1)")
    p.add_argument("-o", "--output")

    p = sub.add_parser("reproduce-paper", help="explicit-candidate check, plus an SDP solution if given")
    p.add_argument("--solution", help="solution file for the degree-90 verification")
    p.add_argument("--problem", help=".dat-s file matching --solution")
    p.add_argument("--precision", type=int)
    p.add_argument("--workspace")
    p.add_argument("-o", "--output")
    return ap


def _run(ns) -> int:
    if ns.command == "bounds":
        if ns.certificate:
            with open(ns.certificate, encoding="utf-8") as fh:
                cert = json.load(fh)
        elif ns.certified_lower and ns.A:
            cert = {"A": ns.A, "certified_lower": ns.certified_lower}
        else:
            raise config.ConfigError("bounds needs a certificate or --certified-lower with --A")
        alphas = [Fraction(a) for a in (ns.alpha or ["0", "1"])]
        out = cmd_bounds(cert, alphas)
        print(out["statement"], file=sys.stderr)
        _write_json(ns.output, out)
        return EXIT_OK

    if ns.command == "reproduce-paper":
        return _reproduce(ns)

    cfg = _config_from_args(ns)
    if ns.command == "build-sdp":
        _write_json(None, cmd_build_sdp(cfg, ns.output))
        return EXIT_OK
    if ns.command == "solve":
        problem = ns.problem
        if not problem:
            problem = cmd_build_sdp(cfg, None)["problem"]
        output = ns.output or os.path.splitext(problem)[0] + ".out"
        cmd_solve(cfg, os.path.abspath(problem), os.path.abspath(output))
        print(output)
        if ns.verify:
            cert = cmd_verify(cfg, output, problem)
            _write_json(ns.certificate, cert)
        return EXIT_OK
    if ns.command == "verify":
        _write_json(ns.output, cmd_verify(cfg, ns.solution, ns.problem))
        return EXIT_OK
    if ns.command == "certify-candidate":
        cert = cmd_certify_candidate(cfg, ns.candidate or shipped_candidate_path())
        _write_json(ns.output, cert)
        return EXIT_OK if not cert["vacuous"] else EXIT_VERIFY_FAILED
    raise AssertionError(ns.command)


def _reproduce(ns) -> int:
    cfg = config.load(None, A="36/11", precision_bits=ns.precision, workspace=ns.workspace)
    report: dict = {}
    cert = cmd_certify_candidate(cfg, shipped_candidate_path())
    lower = Fraction(cert["certified_lower_exact"])
    report["explicit_candidate"] = {
        "certificate": cert,
        "target": str(CANDIDATE_TARGET),
        "passed": lower > CANDIDATE_TARGET,
    }
    status = EXIT_OK if lower > CANDIDATE_TARGET else EXIT_VERIFY_FAILED
    if ns.solution:
        sdp_cert = cmd_verify(cfg, ns.solution, ns.problem)
        sdp_lower = Fraction(sdp_cert["certified_lower_exact"])
        report["sdp_solution"] = {
            "certificate": sdp_cert,
            "target": str(SDP_TARGET),
            "passed": sdp_lower >= SDP_TARGET,
            "constants": bounds_mod.report(sdp_cert, [Fraction(0), Fraction(1)]),
        }
        if sdp_lower < SDP_TARGET:
            status = EXIT_VERIFY_FAILED
    _write_json(ns.output, report)
    for key, item in report.items():
        print(f"{key}: certified_lower {item['certificate']['certified_lower']} "
              f"target {item['target']} {'PASS' if item['passed'] else 'FAIL'}", file=sys.stderr)
    return status


def _margin(exc) -> str | None:
    m = getattr(exc, "margin", None)
    if isinstance(m, Fraction):
        return f"{float(m):.6e}"
    return None if m is None else str(m)


def main(argv=None) -> int:
    ns = build_parser().parse_args(argv)
    try:
        return _run(ns)
    except (certify.CertificationError, Indeterminate, PrecisionExhausted) as exc:
        _write_json(None, {"status": "verification-failed", "error": type(exc).__name__, "detail": str(exc),
                           "margin": _margin(exc)})
        return EXIT_VERIFY_FAILED
    except bounds_mod.VacuousBound as exc:
        _write_json(None, {"status": "vacuous", "detail": str(exc)})
        return EXIT_VERIFY_FAILED
    except SolverFailure as exc:
        _write_json(None, {"status": "solver-failed", "detail": str(exc)})
        return EXIT_SOLVER_FAILED
    except (config.ConfigError, sdp.SdpError, candidate.CandidateError, OSError, ValueError,
            json.JSONDecodeError, KeyError) as exc:
        _write_json(None, {"status": "input-error", "error": type(exc).__name__, "detail": str(exc)})
        return EXIT_INPUT_ERROR


if __name__ == "__main__":
    sys.exit(main())
