import dataclasses
import io
import json

import pytest

from expr_core import parse_expr
from families import paper_examples
from jacobi_cli import (
    EXIT_FAILURE,
    EXIT_PARSE,
    EXIT_PASS,
    EXIT_PRECONDITION,
    ReportPrinter,
    main,
    run_examples,
)
from structure_files import load_structure_file, parse_structure_text

from .testing_utils import same_expr


@pytest.fixture(autouse=True)
def isolated_cwd(tmp_path, monkeypatch):
    monkeypatch.chdir(tmp_path)


def run(argv):
    out = io.StringIO()
    code = main([str(a) for a in argv], stream=out)
    return code, out.getvalue()


# ============================================================================
# check-jacobi
# ============================================================================

def test_check_jacobi_lehbel(structures_dir):
    code, out = run(["check-jacobi", structures_dir / "lehbel.struct"])
    assert code == EXIT_PASS
    assert "jacobi: PASS on " in out
    assert "contact defect: 2*x^4+2*y^4" in out
    assert "codim-1 witness: none (no_codim1_witness)" in out
    assert out.rstrip().endswith("result: PASS")


def test_check_jacobi_reports_the_obstruction(structures_dir):
    code, out = run(["check-jacobi", structures_dir / "example1.struct"])
    assert code == EXIT_PASS
    assert "codim-1 witness: " in out
    assert "tangential, order 2" in out
    assert "cites: " in out


def test_check_jacobi_fails_for_the_unit_reeb_field():
    code, out = run(["check-jacobi", "--example", "lehbel_unit_reeb"])
    assert code == EXIT_FAILURE
    assert "jacobi.pi_pi: FAIL" in out
    assert "result: FAIL" in out


def test_check_jacobi_parse_error(tmp_path, capsys):
    bad = tmp_path / "bad.struct"
    bad.write_text("chart x y z\npi deg 2\n  (x y) = x+*y\n")
    code, _ = run(["check-jacobi", bad])
    assert code == EXIT_PARSE
    assert "line 3, column 13" in capsys.readouterr().err


@pytest.mark.parametrize("argv", (["check-jacobi"],
                                  ["check-jacobi", "--example", "nope"],
                                  ["check-jacobi", "--example", "refjac_resolution"],
                                  ["check-jacobi", "--example", "lehbel", "--samples", "0"]))
def test_check_jacobi_preconditions(argv):
    code, _ = run(argv)
    assert code == EXIT_PRECONDITION


def test_structured_output_is_json_lines(structures_dir):
    code, out = run(["check-jacobi", structures_dir / "example2.struct", "--format", "structured"])
    assert code == EXIT_PASS
    records = [json.loads(line) for line in out.splitlines()]
    assert records[-1]["kind"] == "summary"
    assert records[-1]["passed"] is True
    assert any(r["kind"] == "witness" for r in records)
    checks = [r for r in records if r["kind"] == "check"]
    assert {"jacobi.pi_pi", "jacobi.e_pi"} <= {r["check"] for r in checks}
    assert all(list(r) == sorted(r) for r in records)


def test_runs_are_deterministic(structures_dir):
    first = run(["check-jacobi", structures_dir / "example2.struct", "--seed", "7"])
    second = run(["check-jacobi", structures_dir / "example2.struct", "--seed", "7"])
    assert first == second


# ============================================================================
# check-resolution
# ============================================================================

def test_check_resolution(structures_dir):
    code, out = run(["check-resolution", structures_dir / "sigma.struct",
                     structures_dir / "lehbel.struct", structures_dir / "etoill.map"])
    assert code == EXIT_PASS
    assert "contact_resolution: 6/6 relations" in out
    assert "asserted proper: false (not verified)" in out


def test_check_resolution_with_printed_map(structures_dir):
    code, out = run(["check-resolution", structures_dir / "sigma.struct",
                     structures_dir / "lehbel.struct", structures_dir / "etoill_printed.map"])
    assert code == EXIT_FAILURE
    assert "bivector(x,y): FAIL" in out


def test_check_resolution_dimension_mismatch(structures_dir, tmp_path):
    target = tmp_path / "five.struct"
    target.write_text("chart a b c d e\npi deg 2\n  (a b) = 1\n")
    phi = tmp_path / "embed.map"
    phi.write_text("map from x y z to a b c d e\na = x\nb = y\nc = z\nd = 0\ne = 0\n")
    code, _ = run(["check-resolution", structures_dir / "lehbel.struct", target, phi])
    assert code == EXIT_PRECONDITION


# ============================================================================
# poissonify
# ============================================================================

def test_poissonify_with_slice_round_trip(structures_dir):
    code, out = run(["poissonify", structures_dir / "lehbel.struct", "--slice-roundtrip"])
    assert code == EXIT_PASS
    assert "exp(-t)*(x^4+y^4)" in out
    assert "homogeneity constant: -1" in out
    assert "roundtrip.pi: PASS" in out
    assert "roundtrip.e: PASS" in out


def test_poissonify_output_file_parses(structures_dir, tmp_path, cfg):
    target = tmp_path / "lehbel_poisson.struct"
    code, out = run(["poissonify", structures_dir / "lehbel.struct", "--output", target])
    assert code == EXIT_PASS
    assert f"wrote {target}" in out
    hp = load_structure_file(target).homogeneous_poisson(cfg)
    assert hp.homogeneity_constant == -1
    assert hp.chart.names == ("t", "x", "y", "z")


def test_poissonify_contact_structure_is_symplectic():
    code, out = run(["poissonify", "--example", "sigma_contact"])
    assert code == EXIT_PASS
    assert "symplectic.nondegenerate: PASS" in out


# ============================================================================
# family
# ============================================================================

def test_family_example1(tmp_path):
    target = tmp_path / "family.struct"
    code, out = run(["family", "--f", "2+3*y", "--output", target])
    assert code == EXIT_PASS
    assert "g=-2; h=-3" in out
    assert "contact defect: " in out
    sf = load_structure_file(target)
    assert sf.notes == ["g=-2; h=-3"]
    assert same_expr(sf.block("pi").component("y", "z"), parse_expr("2+3*y", sf.chart))


def test_family_without_polynomial_solution():
    code, out = run(["family", "--f", "1", "--n", "2"])
    assert code == EXIT_FAILURE
    assert "no polynomial solution" in out


def test_family_with_zero_polynomial():
    code, out = run(["family", "--f", "0"])
    assert code == EXIT_PASS
    assert "g=0; h=0" in out


def test_family_parse_error():
    code, _ = run(["family", "--f", "2+*y"])
    assert code == EXIT_PARSE


def test_family_higher_dimension_is_not_jacobi():
    code, out = run(["family", "--f", "2+3*y", "--m", "2"])
    assert code == EXIT_FAILURE
    assert "jacobi.pi_pi: FAIL" in out
    assert "contact defect" not in out


# ============================================================================
# examples and show
# ============================================================================

def test_examples_run_all_structured():
    code, out = run(["examples", "--run-all", "--format", "structured"])
    assert code == EXIT_PASS
    records = [json.loads(line) for line in out.splitlines()]
    summary = records[-1]
    assert summary["kind"] == "summary"
    assert summary["examples"] == len(paper_examples())
    assert summary["mismatches"] == 0
    assert all(r["passed"] for r in records if r["kind"] == "expectation")


def test_single_example():
    code, out = run(["examples", "--example", "example3"])
    assert code == EXIT_PASS
    assert out.splitlines()[0] == "example3: ok"
    assert "1/1 examples match" in out


def test_flipped_expectation_fails(cfg):
    entry = dataclasses.replace(paper_examples()["lehbel"], expected={"jacobi": False})
    out = io.StringIO()
    code = run_examples([entry], cfg, ReportPrinter("text", out))
    assert code == EXIT_FAILURE
    assert "lehbel: MISMATCH" in out.getvalue()
    assert "jacobi: expected False, observed True" in out.getvalue()


def test_show_structure_parses_back(lehbel):
    code, out = run(["show", "lehbel"])
    assert code == EXIT_PASS
    assert out.startswith("# lehbel: ")
    J = parse_structure_text(out).jacobi_structure()
    assert all(same_expr(J.pi.coefficient(k), lehbel.pi.coefficient(k)) for k in lehbel.pi.coeffs)


def test_show_claim():
    code, out = run(["show", "refjac_resolution"])
    assert code == EXIT_PASS
    assert "# map" in out
    assert "map from p1 p2 p3 to x y z" in out
    assert "assert proper false" in out


def test_no_command_prints_help(capsys):
    assert main([]) == EXIT_PASS
    assert "check-jacobi" in capsys.readouterr().out
