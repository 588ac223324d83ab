# ============================================================================
# families.py
# ============================================================================
"""
Polynomial families of Jacobi structures and the registry of named examples.

A family is fixed by a polynomial f, an exponent n and a half-dimension m:

    pi = sum_i f(y_i) d_yi ^ d_z  -  sum_i y_i^n f(y_i) d_yi ^ d_x
    E  = (sum_i g(y_i)) d_x + (sum_i h(y_i)) d_z

where (g, h) solve the linear system
    g + t^n h = -n t^(n-1) f,    g' + t^n h' = 0.
"""

import logging
from dataclasses import dataclass, field
from fractions import Fraction
from functools import lru_cache
from types import MappingProxyType
from typing import Any, Callable, Dict, List, Mapping, Optional, Tuple

from expr_core import (
    Chart,
    Expr,
    NotPolynomial,
    ToolkitError,
    Var,
    ZeroVerdict,
    add,
    differentiate,
    is_zero,
    mul,
    normalize_polynomial,
    parse_expr,
    power,
)
from jacobi import (
    ContactForm,
    JacobiStructure,
    StructureReport,
    check_jacobi,
    check_poisson,
    contact_form_to_jacobi,
    euler_degree_check,
    euler_weights,
    is_contact_everywhere,
    poissonify,
    singular_locus_report,
)
from morphism import ResolutionClaim, SmoothMap, check_contact_resolution
from multivector import MultiVectorField
from run_config import RunConfig

log = logging.getLogger(__name__)

Terms = Tuple[Tuple[int, Fraction], ...]

CONSTANT_TERM_RULE = "for n >= 2 the polynomial f must have zero constant term"


class NoPolynomialSolution(ToolkitError):
    pass


def _normalize_terms(terms) -> Terms:
    merged: Dict[int, Fraction] = {}
    for k, c in terms:
        if int(k) < 0:
            raise ValueError(f"negative degree {k}")
        merged[int(k)] = merged.get(int(k), Fraction(0)) + Fraction(c)
    return tuple(sorted((k, c) for k, c in merged.items() if c != 0))


def terms_to_expr(terms: Terms, variable: str) -> Expr:
    t = Var(variable)
    return add(*(mul(c, power(t, k)) for k, c in sorted(terms, reverse=True)))


@dataclass(frozen=True)
class FamilySpec:
    f: Terms
    n: int = 1
    m: int = 1

    def __post_init__(self):
        object.__setattr__(self, "f", _normalize_terms(self.f))
        if self.n < 1:
            raise ValueError(f"n must be a positive integer, got {self.n}")
        if self.m < 1:
            raise ValueError(f"m must be a positive integer, got {self.m}")

    @classmethod
    def from_text(cls, text: str, n: int = 1, m: int = 1, variable: str = "y") -> "FamilySpec":
        poly = normalize_polynomial(parse_expr(text, Chart.of(variable)))
        if poly.variables not in ((), (variable,)):
            raise NotPolynomial(f"{text} is not a polynomial in {variable}")
        terms = [(exps[0] if exps else 0, c) for exps, c in poly.terms.items()]
        return cls(tuple(terms), n, m)

    def f_expr(self, variable: str = "y") -> Expr:
        return terms_to_expr(self.f, variable)

    @property
    def dim(self) -> int:
        return 2 * self.m + 1


@dataclass(frozen=True)
class FamilySolution:
    g: Terms
    h: Terms

    def g_expr(self, variable: str = "y") -> Expr:
        return terms_to_expr(self.g, variable)

    def h_expr(self, variable: str = "y") -> Expr:
        return terms_to_expr(self.h, variable)

    def describe(self, variable: str = "y") -> str:
        return f"g={self.g_expr(variable)}; h={self.h_expr(variable)}"

    def __add__(self, other: "FamilySolution") -> "FamilySolution":
        return FamilySolution(_normalize_terms(self.g + other.g), _normalize_terms(self.h + other.h))


def solve_family(spec: FamilySpec) -> FamilySolution:
    """Monomial by monomial: c t^k contributes c(k-1) t^(k+n-1) to g and -c(k+n-1) t^(k-1) to h."""
    g: List[Tuple[int, Fraction]] = []
    h: List[Tuple[int, Fraction]] = []
    n = spec.n
    for k, c in spec.f:
        if n >= 2 and k == 0:
            raise NoPolynomialSolution(f"f has constant term {c}: {CONSTANT_TERM_RULE}")
        g.append((k + n - 1, c * (k - 1)))
        if k >= 1:
            h.append((k - 1, -c * (k + n - 1)))
    return FamilySolution(_normalize_terms(g), _normalize_terms(h))


def check_family_system(spec: FamilySpec, sol: FamilySolution,
                        cfg: Optional[RunConfig] = None) -> Tuple[ZeroVerdict, ZeroVerdict]:
    """Verdicts of g + t^n h + n t^(n-1) f and g' + t^n h' (both exact zero for a solution)."""
    t = Var("t")
    n = spec.n
    g, h, f = sol.g_expr("t"), sol.h_expr("t"), spec.f_expr("t")
    first = add(g, mul(power(t, n), h), mul(n, power(t, n - 1), f))
    second = add(differentiate(g, "t"), mul(power(t, n), differentiate(h, "t")))
    return is_zero(first, cfg), is_zero(second, cfg)


def family_chart(m: int) -> Chart:
    ys = ("y",) if m == 1 else tuple(f"y{i}" for i in range(1, 2 * m))
    return Chart(("x", "z") + ys)


def build_family_structure(spec: FamilySpec, sol: FamilySolution) -> JacobiStructure:
    chart = family_chart(spec.m)
    pi: Dict[Tuple[int, ...], Expr] = {}
    gx, hz = [], []
    for idx, name in enumerate(chart.names[2:], start=2):
        f_i = spec.f_expr(name)
        pi[(1, idx)] = mul(-1, f_i)
        pi[(0, idx)] = mul(power(Var(name), spec.n), f_i)
        gx.append(sol.g_expr(name))
        hz.append(sol.h_expr(name))
    e = MultiVectorField(chart, 1, {(0,): add(*gx), (1,): add(*hz)})
    return JacobiStructure(chart, MultiVectorField(chart, 2, pi), e)


# ============================================================================
# Obstruction report
# ============================================================================

def obstruction_report(J: JacobiStructure, cfg: Optional[RunConfig] = None) -> StructureReport:
    """check_jacobi, the singular-locus search and (for Euler fields) the degree check, with citations."""
    cfg = cfg or RunConfig()
    report = check_jacobi(J, cfg)
    report.subject = "obstruction"
    if J.dim % 2 == 0:
        report.notes.append("even dimension: no contact defect")
        return report

    singular = singular_locus_report(J, cfg)
    report.absorb(singular)
    if singular.singular_status == "codim1_witness":
        report.notes.append("singular locus contains a codimension-1 piece: no proper or semi-connected contact resolution")
    elif singular.singular_status == "no_codim1_witness":
        contact = is_contact_everywhere(J, cfg)
        report.measurements["contact_everywhere"] = contact.detail
        if contact.passed:
            report.notes.append("contact everywhere")

    weights = euler_weights(J)
    if weights is not None:
        euler = euler_degree_check(J, weights, cfg)
        euler.witnesses = []
        report.absorb(euler)
    return report


# ============================================================================
# Registry
# ============================================================================

@dataclass(frozen=True)
class ExampleEntry:
    name: str
    kind: str                              # structure | claim
    description: str
    build: Callable[[], Any]
    expected: Mapping[str, Any] = field(default_factory=dict)
    family: Optional[FamilySpec] = None


SIGMA_PROFILE = "cos(p1^3*p2)^4+sin(p1^3*p2)^4"
CORRECTED_MAP = ("p1*cos(p1^3*p2)", "p1*sin(p1^3*p2)", "p3")
PRINTED_MAP = ("p1*sin(p1^3*p2)", "p1*cos(p1^3*p2)", "p3")
SIGMA_FORM = {
    "p1": f"3*p2/({SIGMA_PROFILE})",
    "p2": f"p1/({SIGMA_PROFILE})",
    "p3": "1",
}

XYZ = Chart.of("x", "y", "z")
SIGMA_CHART = Chart.of("p1", "p2", "p3")


def lehbel_structure(reeb: Any = 2) -> JacobiStructure:
    return JacobiStructure.from_components(
        XYZ, {("x", "y"): "x^4+y^4", ("z", "x"): "x", ("y", "z"): "-y"}, {"z": reeb})


def sigma_structure() -> JacobiStructure:
    return JacobiStructure.from_components(
        SIGMA_CHART, {("p1", "p2"): SIGMA_PROFILE, ("p2", "p3"): "3*p2", ("p3", "p1"): "p1"}, {"p3": 2})


def sigma_contact_form(scale: Fraction = Fraction(1)) -> ContactForm:
    components = {k: mul(scale, parse_expr(v, SIGMA_CHART)) for k, v in SIGMA_FORM.items()}
    return ContactForm.from_components(SIGMA_CHART, components)


def refjac_claim(components: Tuple[str, ...] = CORRECTED_MAP) -> ResolutionClaim:
    return ResolutionClaim(
        SmoothMap.parse(SIGMA_CHART, XYZ, components),
        sigma_structure(),
        lehbel_structure(),
        {"surjective": True, "proper": False, "semi_connected": True},
    )


def family_structure(spec: FamilySpec) -> JacobiStructure:
    return build_family_structure(spec, solve_family(spec))


def euler_contact_structure() -> JacobiStructure:
    return JacobiStructure.from_components(
        XYZ, {("x", "y"): "-z^2", ("x", "z"): "x*z/2", ("y", "z"): "y*z/2"}, {"x": "x", "y": "y", "z": "z"})


def euler_weighted_structure() -> JacobiStructure:
    return JacobiStructure.from_components(
        XYZ, {("x", "y"): "-z^3", ("z", "x"): "-2*x*z/3", ("y", "z"): "y*z/3"}, {"x": "2*x", "y": "y", "z": "z"})


def _family_entry(name: str, text: str, description: str, expected: Dict[str, Any], n: int = 1) -> ExampleEntry:
    spec = FamilySpec.from_text(text, n=n)
    return ExampleEntry(name, "structure", description, lambda: family_structure(spec), expected, spec)


@lru_cache(maxsize=1)
def paper_examples() -> Mapping[str, ExampleEntry]:
    entries = [
        ExampleEntry("lehbel", "structure", "quartic bivector with Reeb field 2 d/dz; singular only on {x=y=0}",
                     lehbel_structure, {"jacobi": True, "codim1_witness": False, "poisson_lift": True}),
        ExampleEntry("lehbel_unit_reeb", "structure", "the same bivector with E = d/dz, not Jacobi",
                     lambda: lehbel_structure(1), {"jacobi": False}),
        ExampleEntry("standard_contact", "structure", "Jacobi structure of the contact form dz + x dy",
                     lambda: contact_form_to_jacobi(ContactForm.from_components(XYZ, {"z": 1, "y": "x"})),
                     {"jacobi": True, "contact_everywhere": True}),
        ExampleEntry("sigma_contact", "structure", "contact structure of the resolving space, E = 2 d/dp3",
                     sigma_structure, {"jacobi": True, "contact_everywhere": True, "poisson_lift": True}),
        ExampleEntry("refjac_resolution", "claim", "contact resolution of lehbel by the polar-type map",
                     refjac_claim, {"resolution": True, "contradiction_notice": False}),
        ExampleEntry("refjac_printed_map", "claim", "the resolution map with sin and cos exchanged, orientation reversed",
                     lambda: refjac_claim(PRINTED_MAP), {"resolution": False}),
        _family_entry("example1", "2+3*y", "family with f = 2+3y",
                      {"jacobi": True, "codim1_witness": True, "witness_kind": "tangential", "poisson_lift": True,
                       "solution": "g=-2; h=-3"}),
        _family_entry("example2", "y^3+y^2+y", "family with f = y^3+y^2+y",
                      {"jacobi": True, "codim1_witness": True, "poisson_lift": True,
                       "solution": "g=2*y^3+y^2; h=-3*y^2-2*y-1"}),
        _family_entry("example3", "y^2+y+1", "family with f = y^2+y+1, no real zero",
                      {"jacobi": True, "codim1_witness": False, "contact_everywhere": True, "poisson_lift": True,
                       "solution": "g=y^2-1; h=-2*y-1"}),
        _family_entry("family_contact", "1", "family with constant f: contact everywhere",
                      {"jacobi": True, "contact_everywhere": True, "solution": "g=-1; h=0"}),
        ExampleEntry("euler_contact", "structure", "Euler field with a compatible quadratic bivector, P = -z^3",
                     euler_contact_structure,
                     {"jacobi": True, "euler_degree": True, "weight_parity": "odd", "codim1_witness": True,
                      "witness_kind": "sign_change"}),
        ExampleEntry("euler_weighted", "structure", "weighted Euler field (2,1,1), P = -z^4",
                     euler_weighted_structure, {"jacobi": True, "euler_degree": True, "weight_parity": "even"}),
    ]
    return MappingProxyType({e.name: e for e in entries})


@dataclass
class ExampleOutcome:
    name: str
    rows: List[Tuple[str, Any, Any]] = field(default_factory=list)

    @property
    def mismatches(self) -> List[Tuple[str, Any, Any]]:
        return [r for r in self.rows if r[1] != r[2]]

    @property
    def passed(self) -> bool:
        return not self.mismatches


def _observe(key: str, entry: ExampleEntry, subject: Any, cfg: RunConfig, cache: Dict[str, Any]) -> Any:
    if key == "jacobi":
        return check_jacobi(subject, cfg).passed
    if key in ("codim1_witness", "witness_kind"):
        if "singular" not in cache:
            cache["singular"] = singular_locus_report(subject, cfg)
        singular = cache["singular"]
        if key == "codim1_witness":
            return singular.singular_status == "codim1_witness"
        return singular.witnesses[0].kind if singular.witnesses else None
    if key == "contact_everywhere":
        return is_contact_everywhere(subject, cfg).passed
    if key == "poisson_lift":
        return check_poisson(poissonify(subject, cfg).pi, cfg).passed
    if key in ("euler_degree", "weight_parity"):
        if "euler" not in cache:
            weights = euler_weights(subject)
            cache["euler"] = euler_degree_check(subject, weights, cfg) if weights else None
        euler = cache["euler"]
        if euler is None:
            return None
        return euler.passed if key == "euler_degree" else euler.measurements["parity"]
    if key in ("resolution", "contradiction_notice"):
        if "resolution" not in cache:
            cache["resolution"] = check_contact_resolution(subject, cfg)
        report = cache["resolution"]
        return report.passed if key == "resolution" else bool(report.notices)
    if key == "solution":
        return solve_family(entry.family).describe("y")
    raise KeyError(f"unknown expectation '{key}'")


def run_example(entry: ExampleEntry, cfg: Optional[RunConfig] = None) -> ExampleOutcome:
    cfg = cfg or RunConfig()
    subject = entry.build()
    outcome = ExampleOutcome(entry.name)
    cache: Dict[str, Any] = {}
    for key in sorted(entry.expected):
        observed = _observe(key, entry, subject, cfg, cache)
        outcome.rows.append((key, entry.expected[key], observed))
    log.info("example %s: %s", entry.name, "ok" if outcome.passed else "MISMATCH")
    return outcome


if __name__ == "__main__":
    for entry in paper_examples().values():
        outcome = run_example(entry)
        print(f"[Examples] {entry.name}: {'ok' if outcome.passed else outcome.mismatches}")
