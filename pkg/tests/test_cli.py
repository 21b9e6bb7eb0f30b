import json
import os
import shutil
from fractions import Fraction

import pytest

from cplus import cli, config
from conftest import data_path


def run(capsys, *argv):
    code = cli.main(list(argv))
    out = capsys.readouterr()
    return code, out


def test_config_file_and_overrides(tmp_path):
    p = tmp_path / "run.ini"
    p.write_text("[run]\nA = 4\ndegree = 12\nepsilon = 1e-6\n")
    cfg = config.load(str(p), degree=16, workspace=str(tmp_path))
    assert cfg.A == 4 and cfg.degree == 16 and cfg.epsilon_fraction == Fraction(1, 10**6)
    assert cfg.precision_bits == 256


def test_config_defaults():
    cfg = config.load(None, workspace="/tmp")
    assert cfg.epsilon == "1e-20" and cfg.precision_bits == 256


@pytest.mark.parametrize(
    "overrides",
    [{"A": "1/2"}, {"degree": 1}, {"epsilon": "-1"}, {"precision_bits": 8}, {"solver": "foo {input}"},
     {"A": "x"}, {"degree": "ten"}],
)
def test_config_validation(overrides):
    with pytest.raises(config.ConfigError):
        config.load(None, workspace="/tmp", **overrides)


def test_config_rejects_unknown_key(tmp_path):
    p = tmp_path / "run.ini"
    p.write_text("[run]\ncolour = blue\n")
    with pytest.raises(config.ConfigError):
        config.load(str(p))


def test_digest_ignores_workspace_only():
    a = config.load(None, workspace="/tmp/a")
    b = config.load(None, workspace="/tmp/b")
    c = config.load(None, workspace="/tmp/a", degree=41)
    assert a.digest() == b.digest() != c.digest()


def test_build_sdp_manifest_and_determinism(tmp_path, capsys):
    out = str(tmp_path / "p.dat-s")
    code, res = run(capsys, "build-sdp", "--A", "36/11", "-d", "2", "-o", out)
    assert code == 0
    manifest = json.loads(res.out)
    assert manifest["constraints"] == 6
    assert manifest["block_sizes"] == [3, 3, 3, 3, 2, 2, 2, 2]
    first = open(out, "rb").read()
    code, res2 = run(capsys, "build-sdp", "--A", "36/11", "-d", "2", "-o", out)
    assert code == 0 and open(out, "rb").read() == first
    assert json.loads(res2.out)["sha256"] == manifest["sha256"]
    assert os.path.exists(out + ".manifest.json")


def test_verify_fixture(tmp_path, capsys):
    cert_path = tmp_path / "cert.json"
    code, _ = run(capsys, "verify", data_path("a3611_d2.out"), "--problem", data_path("a3611_d2.dat-s"),
                  "-o", str(cert_path))
    assert code == 0
    cert = json.loads(cert_path.read_text())
    assert Fraction("1.1405") < Fraction(cert["certified_lower_exact"]) < Fraction("1.1406")
    assert "config_hash" in cert


def _corrupt(src: str, dst) -> None:
    text = open(src, encoding="utf-8").read()
    head, tail = text.split("yMat", 1)
    # flip the sign of the first Q1 diagonal entry
    tail = tail.replace("{0.8153", "{-0.8153", 1)
    assert "-0.8153" in tail
    dst.write_text(head + "yMat" + tail)


def test_verify_corrupted_fixture_fails(tmp_path, capsys):
    bad = tmp_path / "bad.out"
    _corrupt(data_path("a3611_d2.out"), bad)
    code, res = run(capsys, "verify", str(bad), "--problem", data_path("a3611_d2.dat-s"))
    assert code == 2
    report = json.loads(res.out)
    assert report["status"] == "verification-failed"
    assert "Q1" in report["detail"]


def test_verify_missing_file(tmp_path, capsys):
    code, res = run(capsys, "verify", str(tmp_path / "nope.out"), "--A", "36/11", "-d", "2")
    assert code == 3
    assert json.loads(res.out)["status"] == "input-error"


def test_certify_candidate_gaussian(tmp_path, capsys):
    cand = tmp_path / "g.json"
    cand.write_text(json.dumps([{"c": "1", "k": 0, "lambda": "3"}]))
    code, res = run(capsys, "certify-candidate", str(cand), "--A", "36/11")
    assert code == 0
    cert = json.loads(res.out)
    assert 0 < Fraction(cert["certified_lower_exact"]) < 1
    assert cert["vacuous"] is False


def test_certify_candidate_empty(tmp_path, capsys):
    cand = tmp_path / "e.json"
    cand.write_text("[]")
    code, res = run(capsys, "certify-candidate", str(cand))
    assert code == 3


def test_bounds_command(tmp_path, capsys):
    code, res = run(capsys, "bounds", "--certified-lower", "1.1965", "--A", "36/11", "--alpha", "0")
    assert code == 0
    out = json.loads(res.out)
    assert Fraction(out["constants"][0]["c_upper"]) < Fraction("0.8358")
    assert "Riemann hypothesis" in res.err


def test_bounds_from_certificate_file(tmp_path, capsys):
    cert = tmp_path / "c.json"
    cert.write_text(json.dumps({"A": "4", "certified_lower": "1.2", "certified_lower_exact": "6/5"}))
    code, res = run(capsys, "bounds", str(cert))
    assert code == 0
    assert json.loads(res.out)["constants"][1]["c_exact"] == "5/2"


def test_bounds_vacuous(capsys):
    code, res = run(capsys, "bounds", "--certified-lower", "0", "--A", "4")
    assert code == 2
    assert json.loads(res.out)["status"] == "vacuous"


def test_solve_with_failing_solver(tmp_path, capsys):
    problem = tmp_path / "p.dat-s"
    shutil.copy(data_path("a3611_d2.dat-s"), problem)
    code, res = run(capsys, "solve", "--problem", str(problem), "--solver", "false {input} {output}",
                    "--workspace", str(tmp_path))
    assert code == 4
    assert json.loads(res.out)["status"] == "solver-failed"


def test_solve_with_copying_solver(tmp_path, capsys):
    problem = tmp_path / "p.dat-s"
    shutil.copy(data_path("a3611_d2.dat-s"), problem)
    fake = f"cp {data_path('a3611_d2.out')} {{output}} # {{input}}"
    cert = tmp_path / "cert.json"
    code, _ = run(capsys, "solve", "--problem", str(problem), "--solver", fake, "-o", str(tmp_path / "s.out"),
                  "--verify", "--certificate", str(cert), "--workspace", str(tmp_path))
    assert code == 0
    assert Fraction(json.loads(cert.read_text())["certified_lower_exact"]) > Fraction("1.14")


def test_candidate_precision_independent_of_ambient(capsys):
    from flint import ctx

    ctx.prec = 53  # what a fresh interpreter starts with
    code, res = run(capsys, "certify-candidate")
    assert code == 0
    # parsed at 53 bits, the shipped candidate's bound radius is about 5e-9
    assert Fraction(json.loads(res.out)["bound_radius"]) < Fraction(1, 10**12)
