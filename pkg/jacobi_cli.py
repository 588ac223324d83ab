#!/usr/bin/env python3
# ============================================================================
# jacobi_cli.py
# ============================================================================
"""
Command line front end for the Jacobi structure toolkit.

Usage:
    jacobi_cli.py check-jacobi FILE | --example NAME
    jacobi_cli.py check-resolution SOURCE TARGET MAP
    jacobi_cli.py poissonify FILE [--output OUT] [--slice-roundtrip]
    jacobi_cli.py family --f "2+3*y" [--n 1] [--m 1] [--output OUT]
    jacobi_cli.py examples [--run-all] [--example NAME]
    jacobi_cli.py show NAME

Exit codes: 0 pass, 1 mathematical failure, 2 parse error, 3 precondition.
Numerical agreement at sample points is evidence, not proof; every verdict
says which of the two it is.
"""

import argparse
import json
import logging
import sys
from pathlib import Path
from typing import Any, Dict, Iterable, List, Mapping, Optional, Sequence

from debug_log import setup_logging
from expr_core import (
    ExprSyntaxError,
    InvalidChart,
    NotPolynomial,
    ToolkitError,
    UnknownIdentifier,
)
from families import (
    ExampleEntry,
    FamilySpec,
    NoPolynomialSolution,
    build_family_structure,
    check_family_system,
    obstruction_report,
    paper_examples,
    run_example,
    solve_family,
)
from jacobi import (
    CheckResult,
    JacobiStructure,
    check_homogeneous,
    check_jacobi,
    check_poisson,
    contact_defect,
    is_contact_everywhere,
    poissonify,
    slice_induce,
    symplectic_check,
)
from morphism import MorphismReport, ResolutionClaim, check_contact_resolution
from multivector import field_zero_verdict
from run_config import ConfigError, RunConfig, load_run_config
from structure_files import (
    MapFile,
    StructureFile,
    StructureFileError,
    format_map,
    format_structure,
    load_map_file,
    load_structure_file,
)

log = logging.getLogger("jacobi_cli")

EXIT_PASS = 0
EXIT_FAILURE = 1
EXIT_PARSE = 2
EXIT_PRECONDITION = 3

PARSE_ERRORS = (StructureFileError, ExprSyntaxError, UnknownIdentifier, NotPolynomial, InvalidChart)


class PreconditionError(ToolkitError):
    pass


# ============================================================================
# Output
# ============================================================================

def _plain(value: Any) -> Any:
    if isinstance(value, dict):
        return {str(k): _plain(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_plain(v) for v in value]
    if isinstance(value, bool) or value is None or isinstance(value, (int, str)):
        return value
    return float(value)


class ReportPrinter:
    """Text lines or JSON records (one per check, keys sorted) on stdout."""

    def __init__(self, output_format: str = "text", stream=None):
        self.structured = output_format == "structured"
        self.stream = stream or sys.stdout

    def _emit(self, text: str) -> None:
        print(text, file=self.stream)

    def record(self, **fields: Any) -> None:
        if self.structured:
            self._emit(json.dumps(_plain(fields), sort_keys=True))

    def line(self, text: str = "") -> None:
        if not self.structured:
            self._emit(text)

    def check(self, result: CheckResult, citations: Sequence[str] = ()) -> None:
        if self.structured:
            self.record(kind="check", check=result.check_id, verdict=result.label, passed=result.passed,
                        residual=result.residual, witness=result.witness, citations=list(citations),
                        detail=result.detail)
            return
        status = "PASS" if result.passed else "FAIL"
        text = f"  {result.check_id}: {status} [{result.label}] residual {result.residual:.3e}"
        if result.detail:
            text += f" ({result.detail})"
        self._emit(text)
        if result.witness and not result.passed:
            self._emit(f"      witness: {_format_point(result.witness)}")

    def summary(self, passed: bool, **fields: Any) -> None:
        self.record(kind="summary", passed=passed, **fields)
        self.line(f"result: {'PASS' if passed else 'FAIL'}")


def _format_point(point: Mapping[str, float]) -> str:
    return ", ".join(f"{k}={float(v):.6g}" for k, v in sorted(point.items()))


# ============================================================================
# Inputs
# ============================================================================

def _load_jacobi(args) -> JacobiStructure:
    if getattr(args, "example", None):
        entry = _entry(args.example)
        subject = entry.build()
        if not isinstance(subject, JacobiStructure):
            raise PreconditionError(f"example '{entry.name}' is a {entry.kind}, not a structure")
        return subject
    if not args.file:
        raise PreconditionError("give a structure file or --example NAME")
    return load_structure_file(args.file).jacobi_structure()


def _entry(name: str) -> ExampleEntry:
    registry = paper_examples()
    if name not in registry:
        raise PreconditionError(f"unknown example '{name}' (known: {', '.join(sorted(registry))})")
    return registry[name]


def _write_or_print(text: str, output: Optional[str], printer: ReportPrinter) -> None:
    if output:
        Path(output).write_text(text, encoding="utf-8")
        printer.line(f"wrote {output}")
        printer.record(kind="output", path=output)
    else:
        printer.line(text.rstrip("\n"))


# ============================================================================
# Commands
# ============================================================================

def cmd_check_jacobi(args, cfg: RunConfig, printer: ReportPrinter) -> int:
    J = _load_jacobi(args)
    report = obstruction_report(J, cfg)
    identities_ok = all(c.passed for c in report.checks if c.check_id.startswith("jacobi."))

    printer.line(f"jacobi: {'PASS' if identities_ok else 'FAIL'} on {J.chart}")
    for c in report.checks:
        printer.check(c, report.citations if c.check_id == "euler.degree" else ())
    if "contact_defect" in report.measurements:
        printer.line(f"contact defect: {report.measurements['contact_defect']}")
    if report.singular_status == "codim1_witness":
        for w in report.witnesses:
            printer.line(f"codim-1 witness: {_format_point(w.point)} ({w.kind}, order {w.order})")
            printer.record(kind="witness", point=w.point, value=w.value, witness_kind=w.kind, order=w.order)
    elif report.singular_status is not None:
        printer.line(f"codim-1 witness: none ({report.singular_status})")
    for key, value in sorted(report.measurements.items()):
        printer.record(kind="measurement", name=key, value=value)
    for note in report.notes:
        printer.line(f"note: {note}")
        printer.record(kind="note", text=note)
    for citation in report.citations:
        printer.line(f"cites: {citation}")
    printer.summary(identities_ok, citations=report.citations)
    return EXIT_PASS if identities_ok else EXIT_FAILURE


def _print_morphism(report: MorphismReport, printer: ReportPrinter) -> None:
    total = len(report.relations)
    good = sum(r.passed for r in report.relations)
    printer.line(f"{report.subject}: {good}/{total} relations")
    for r in report.relations:
        printer.check(r)
    printer.line("source checks:")
    for c in report.source_checks:
        printer.check(c)
    for flag, value in sorted(report.asserted_flags.items()):
        printer.line(f"asserted {flag}: {str(value).lower()} (not verified)")
        printer.record(kind="assertion", flag=flag, value=value)
    for notice in report.notices:
        printer.line(f"notice: {notice}")
        printer.record(kind="notice", text=notice, citations=report.citations)


def cmd_check_resolution(args, cfg: RunConfig, printer: ReportPrinter) -> int:
    source_file = load_structure_file(args.source)
    target_file = load_structure_file(args.target)
    map_file = load_map_file(args.map)
    flags = {**source_file.assertions, **map_file.assertions}
    flags.pop("z_complete", None)
    claim = ResolutionClaim(map_file.map, source_file.jacobi_structure(), target_file.jacobi_structure(), flags)
    report = check_contact_resolution(claim, cfg)
    _print_morphism(report, printer)
    printer.summary(report.passed, citations=report.citations)
    return EXIT_PASS if report.passed else EXIT_FAILURE


def cmd_poissonify(args, cfg: RunConfig, printer: ReportPrinter) -> int:
    J = _load_jacobi(args)
    hp = poissonify(J, cfg)
    checks: List[CheckResult] = []
    homogeneous = check_homogeneous(hp, cfg)
    checks += homogeneous.checks
    checks += check_poisson(hp.pi, cfg).checks
    if J.dim % 2 and is_contact_everywhere(J, cfg).passed:
        checks.append(symplectic_check(hp, cfg))

    if args.slice_roundtrip:
        sliced = slice_induce(hp, hp.chart.names[0], 0)
        checks.append(CheckResult.from_verdict("roundtrip.pi", field_zero_verdict((sliced.pi - J.pi).simplified(), cfg)))
        checks.append(CheckResult.from_verdict("roundtrip.e", field_zero_verdict((sliced.e - J.e).simplified(), cfg)))

    printer.line(f"poissonification on {hp.chart}")
    for c in checks:
        printer.check(c)
    printer.line(f"homogeneity constant: {hp.homogeneity_constant}")
    printer.record(kind="measurement", name="homogeneity_constant", value=str(hp.homogeneity_constant))
    for note in homogeneous.notes:
        printer.line(f"note: {note}")
        printer.record(kind="note", text=note)

    out = StructureFile.from_homogeneous(hp, notes=[f"poissonification, homogeneity constant {hp.homogeneity_constant}"])
    _write_or_print(format_structure(out), args.output, printer)
    passed = all(c.passed for c in checks)
    printer.summary(passed)
    return EXIT_PASS if passed else EXIT_FAILURE


def cmd_family(args, cfg: RunConfig, printer: ReportPrinter) -> int:
    spec = FamilySpec.from_text(args.f, n=args.n, m=args.m)
    try:
        sol = solve_family(spec)
    except NoPolynomialSolution as e:
        printer.line(f"no polynomial solution: {e}")
        printer.record(kind="error", error="NoPolynomialSolution", message=str(e))
        return EXIT_FAILURE

    printer.line(sol.describe("y"))
    printer.record(kind="solution", g=str(sol.g_expr("y")), h=str(sol.h_expr("y")))
    system = check_family_system(spec, sol, cfg)
    for label, verdict in zip(("system.first", "system.second"), system):
        printer.check(CheckResult.from_verdict(label, verdict))

    J = build_family_structure(spec, sol)
    report = check_jacobi(J, cfg)
    for c in report.checks:
        printer.check(c)
    if J.dim == 3:
        printer.line(f"contact defect: {contact_defect(J)}")
    _write_or_print(format_structure(StructureFile.from_jacobi(J, notes=[sol.describe("y")])), args.output, printer)
    passed = report.passed and all(v.is_zero for v in system)
    printer.summary(passed)
    return EXIT_PASS if passed else EXIT_FAILURE


def run_examples(entries: Iterable[ExampleEntry], cfg: RunConfig, printer: ReportPrinter) -> int:
    failures = 0
    count = 0
    for entry in entries:
        count += 1
        outcome = run_example(entry, cfg)
        printer.line(f"{entry.name}: {'ok' if outcome.passed else 'MISMATCH'}")
        for key, expected, observed in outcome.rows:
            printer.record(kind="expectation", example=entry.name, key=key, expected=expected,
                           observed=observed, passed=expected == observed)
            if expected != observed:
                printer.line(f"  {key}: expected {expected!r}, observed {observed!r}")
        failures += not outcome.passed
    printer.line(f"{count - failures}/{count} examples match")
    printer.summary(failures == 0, examples=count, mismatches=failures)
    return EXIT_PASS if failures == 0 else EXIT_FAILURE


def cmd_examples(args, cfg: RunConfig, printer: ReportPrinter) -> int:
    registry = paper_examples()
    if args.example and not args.run_all:
        entries = [_entry(args.example)]
    else:
        entries = [registry[name] for name in registry]
    return run_examples(entries, cfg, printer)


def cmd_show(args, cfg: RunConfig, printer: ReportPrinter) -> int:
    entry = _entry(args.name)
    subject = entry.build()
    printer.line(f"# {entry.name}: {entry.description}")
    if isinstance(subject, ResolutionClaim):
        printer.line("# source")
        printer.line(format_structure(StructureFile.from_jacobi(subject.source)).rstrip("\n"))
        printer.line("# target")
        printer.line(format_structure(StructureFile.from_jacobi(subject.target)).rstrip("\n"))
        printer.line("# map")
        printer.line(format_map(MapFile(subject.map, dict(subject.asserted_flags))).rstrip("\n"))
    else:
        printer.line(format_structure(StructureFile.from_jacobi(subject)).rstrip("\n"))
    printer.record(kind="example", name=entry.name, description=entry.description,
                   expected=dict(entry.expected))
    return EXIT_PASS


COMMANDS = {
    "check-jacobi": cmd_check_jacobi,
    "check-resolution": cmd_check_resolution,
    "poissonify": cmd_poissonify,
    "family": cmd_family,
    "examples": cmd_examples,
    "show": cmd_show,
}


# ============================================================================
# Argument parsing
# ============================================================================

def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--samples", type=int, help="Sample points per numeric test (default: 64)")
    common.add_argument("--box", type=float, help="Half-width of the sampling box (default: 2)")
    common.add_argument("--tol", type=float, help="Numeric tolerance (default: 1e-9)")
    common.add_argument("--seed", type=int, help="Random seed (default: 0)")
    common.add_argument("--format", choices=["text", "structured"], help="Output format (default: text)")
    common.add_argument("--config", type=str, help="Path to a JSON run config")
    common.add_argument("--verbose", "-v", action="store_true", help="Log progress to stderr")

    parser = argparse.ArgumentParser(
        description="Jacobi, contact and Poisson structure checks",
        formatter_class=argparse.RawDescriptionHelpFormatter,
        epilog="""
Examples:
  jacobi_cli.py check-jacobi structures/lehbel.struct
  jacobi_cli.py check-resolution structures/sigma.struct structures/lehbel.struct structures/etoill.map
  jacobi_cli.py poissonify structures/lehbel.struct --slice-roundtrip
  jacobi_cli.py family --f "2+3*y" --n 1 --m 1
  jacobi_cli.py examples --run-all --format structured
""",
    )
    subparsers = parser.add_subparsers(dest="command", help="Command to run")

    p = subparsers.add_parser("check-jacobi", parents=[common], help="Check the Jacobi identities and obstructions")
    p.add_argument("file", nargs="?", help="Structure file")
    p.add_argument("--example", type=str, help="Use a registry entry instead of a file")

    p = subparsers.add_parser("check-resolution", parents=[common], help="Check a contact resolution claim")
    p.add_argument("source", help="Source structure file")
    p.add_argument("target", help="Target structure file")
    p.add_argument("map", help="Map file")

    p = subparsers.add_parser("poissonify", parents=[common], help="Poissonification of a Jacobi structure")
    p.add_argument("file", nargs="?", help="Structure file")
    p.add_argument("--example", type=str, help="Use a registry entry instead of a file")
    p.add_argument("--output", "-o", type=str, help="Write the Poissonification here")
    p.add_argument("--slice-roundtrip", action="store_true", help="Recover the input from the t=0 slice")

    p = subparsers.add_parser("family", parents=[common], help="Solve and build a polynomial family")
    p.add_argument("--f", type=str, required=True, help="Polynomial f in y")
    p.add_argument("--n", type=int, default=1, help="Exponent n (default: 1)")
    p.add_argument("--m", type=int, default=1, help="Half-dimension m (default: 1)")
    p.add_argument("--output", "-o", type=str, help="Write the structure here")

    p = subparsers.add_parser("examples", parents=[common], help="Run the example registry")
    p.add_argument("--run-all", action="store_true", help="Run every entry")
    p.add_argument("--example", type=str, help="Run a single entry")

    p = subparsers.add_parser("show", parents=[common], help="Print a registry entry as structure files")
    p.add_argument("name", help="Registry entry")
    return parser


def main(argv: Optional[List[str]] = None, stream=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if not args.command:
        parser.print_help()
        return EXIT_PASS

    setup_logging(args.verbose)
    try:
        cfg = load_run_config(args.config, samples=args.samples, box=args.box, tol=args.tol,
                              seed=args.seed, output_format=args.format)
    except (ConfigError, TypeError) as e:
        print(f"ERROR: invalid configuration: {e}", file=sys.stderr)
        return EXIT_PRECONDITION

    printer = ReportPrinter(cfg.output_format, stream)
    try:
        return COMMANDS[args.command](args, cfg, printer)
    except PARSE_ERRORS as e:
        print(f"ERROR: parse error: {e}", file=sys.stderr)
        return EXIT_PARSE
    except ToolkitError as e:
        print(f"ERROR: {type(e).__name__}: {e}", file=sys.stderr)
        return EXIT_PRECONDITION


if __name__ == "__main__":
    sys.exit(main())
