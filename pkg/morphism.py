# ============================================================================
# morphism.py
# ============================================================================
"""
Verification of Jacobi morphisms, contact resolutions and homogeneous
symplectic resolutions between coordinate charts.

Every relation is checked by substituting the map's components into the
target coefficients; no inverse map is ever needed. Surjectivity, properness
and semi-connectedness are recorded as user assertions and echoed verbatim.
"""

import logging
from dataclasses import dataclass, field
from typing import Any, Dict, List, Mapping, Optional, Sequence, Tuple, Union

from expr_core import (
    Chart,
    ChartMismatch,
    Expr,
    ToolkitError,
    Var,
    add,
    as_expr,
    differentiate,
    is_zero,
    mul,
    parse_expr,
    sub,
    substitute,
)
from jacobi import (
    CITE_PROPER,
    CITE_SEMI_CONNECTED,
    CheckResult,
    EvenDimension,
    HomogeneousPoisson,
    JacobiStructure,
    OddDimension,
    check_jacobi,
    check_poisson,
    is_contact_everywhere,
    singular_locus_report,
    symplectic_check,
)
from multivector import MultiVectorField
from run_config import RunConfig

log = logging.getLogger(__name__)

ASSERTION_FLAGS = ("surjective", "proper", "semi_connected")


class DimensionMismatch(ToolkitError):
    pass


class MapError(ToolkitError):
    pass


# ============================================================================
# Maps
# ============================================================================

@dataclass(frozen=True)
class SmoothMap:
    """phi: source -> target, one component per target coordinate."""

    source: Chart
    target: Chart
    components: Tuple[Expr, ...]

    def __post_init__(self):
        comps = tuple(as_expr(c) for c in self.components)
        object.__setattr__(self, "components", comps)
        if len(comps) != self.target.dim:
            raise MapError(f"{len(comps)} components for a {self.target.dim}-dimensional target")
        allowed = set(self.source.names)
        for name, c in zip(self.target.names, comps):
            stray = c.free_variables - allowed
            if stray:
                raise MapError(f"component {name} uses {sorted(stray)} outside {self.source}")

    @classmethod
    def parse(cls, source: Chart, target: Chart, texts: Union[Sequence[str], Mapping[str, str]]) -> "SmoothMap":
        if isinstance(texts, Mapping):
            missing = [n for n in target.names if n not in texts]
            if missing:
                raise MapError(f"no component given for {missing}")
            texts = [texts[n] for n in target.names]
        return cls(source, target, tuple(parse_expr(t, source) for t in texts))

    def component(self, name: str) -> Expr:
        return self.components[self.target.index(name)]

    def pullback(self, e: Expr) -> Expr:
        """e(phi): target coordinates replaced by the map's components."""
        return substitute(e, dict(zip(self.target.names, self.components)))

    def jacobian(self, k: int, a: int) -> Expr:
        return differentiate(self.components[k], self.source.names[a])

    def lines(self) -> List[str]:
        return [f"{n} = {c}" for n, c in zip(self.target.names, self.components)]


def identity_map(chart: Chart) -> SmoothMap:
    return SmoothMap(chart, chart, tuple(Var(n) for n in chart.names))


def constant_map(source: Chart, target: Chart, point: Mapping[str, Any]) -> SmoothMap:
    return SmoothMap(source, target, tuple(as_expr(point[n]) for n in target.names))


def compose_maps(first: SmoothMap, second: SmoothMap) -> SmoothMap:
    """second o first."""
    if first.target != second.source:
        raise ChartMismatch(f"cannot compose: {first.target} != {second.source}")
    return SmoothMap(first.source, second.target, tuple(first.pullback(c) for c in second.components))


def lift_resolution(phi: SmoothMap, name: str = "t") -> SmoothMap:
    """(sigma, t) -> (phi(sigma), t) on charts with t prepended."""
    if name in phi.source or name in phi.target:
        raise MapError(f"coordinate '{name}' already used by the map's charts")
    return SmoothMap(phi.source.prepend(name), phi.target.prepend(name), (Var(name),) + phi.components)


# ============================================================================
# Relations
# ============================================================================

def _expect_charts(phi: SmoothMap, source_field: MultiVectorField, target_field: MultiVectorField) -> None:
    if source_field.chart != phi.source:
        raise ChartMismatch(f"source field on {source_field.chart}, map from {phi.source}")
    if target_field.chart != phi.target:
        raise ChartMismatch(f"target field on {target_field.chart}, map to {phi.target}")


def pushforward_check_vector(X: MultiVectorField, phi: SmoothMap, Y: MultiVectorField,
                             cfg: Optional[RunConfig] = None, prefix: str = "vector") -> List[CheckResult]:
    """X[phi^k] = Y^k(phi) for each target coordinate k."""
    _expect_charts(phi, X, Y)
    results = []
    for k, name in enumerate(phi.target.names):
        pushed = add(*(mul(a, phi.jacobian(k, i)) for (i,), a in X.coeffs.items()))
        residual = sub(pushed, phi.pullback(Y.coefficient((k,))))
        results.append(CheckResult.from_verdict(f"{prefix}({name})", is_zero(residual, cfg)))
    return results


def pushforward_check_bivector(P: MultiVectorField, phi: SmoothMap, Q: MultiVectorField,
                               cfg: Optional[RunConfig] = None, prefix: str = "bivector") -> List[CheckResult]:
    """{phi^i, phi^j}_P = Q^(ij)(phi) for each target pair i < j."""
    _expect_charts(phi, P, Q)
    results = []
    names = phi.target.names
    for i in range(len(names)):
        for j in range(i + 1, len(names)):
            terms = []
            for (a, b), c in P.coeffs.items():
                minor = sub(mul(phi.jacobian(i, a), phi.jacobian(j, b)), mul(phi.jacobian(i, b), phi.jacobian(j, a)))
                terms.append(mul(c, minor))
            residual = sub(add(*terms), phi.pullback(Q.coefficient((i, j))))
            results.append(CheckResult.from_verdict(f"{prefix}({names[i]},{names[j]})", is_zero(residual, cfg)))
    return results


# ============================================================================
# Reports
# ============================================================================

@dataclass
class ResolutionClaim:
    map: SmoothMap
    source: Union[JacobiStructure, HomogeneousPoisson]
    target: Union[JacobiStructure, HomogeneousPoisson]
    asserted_flags: Dict[str, bool] = field(default_factory=dict)


@dataclass
class MorphismReport:
    subject: str
    relations: List[CheckResult] = field(default_factory=list)
    source_checks: List[CheckResult] = field(default_factory=list)
    asserted_flags: Dict[str, bool] = field(default_factory=dict)
    notices: List[str] = field(default_factory=list)
    citations: List[str] = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return all(r.passed for r in self.relations) and all(c.passed for c in self.source_checks)

    @property
    def failing(self) -> List[CheckResult]:
        return [r for r in self.source_checks + self.relations if not r.passed]


def check_jacobi_morphism(phi: SmoothMap, source: JacobiStructure, target: JacobiStructure,
                          cfg: Optional[RunConfig] = None) -> MorphismReport:
    report = MorphismReport("jacobi_morphism")
    report.relations += pushforward_check_bivector(source.pi, phi, target.pi, cfg)
    report.relations += pushforward_check_vector(source.e, phi, target.e, cfg)
    log.info("morphism: %d/%d relations pass", sum(r.passed for r in report.relations), len(report.relations))
    return report


def check_contact_resolution(claim: ResolutionClaim, cfg: Optional[RunConfig] = None) -> MorphismReport:
    """
    (a) the source is Jacobi and contact at every sample, (b) the map is a
    Jacobi morphism. Asserted flags are echoed; an asserted proper (or
    semi-connected) resolution of a target with a codimension-1 singular
    witness gets a contradiction notice.
    """
    cfg = cfg or RunConfig()
    source, target, phi = claim.source, claim.target, claim.map
    if source.chart.dim != target.chart.dim:
        raise DimensionMismatch(f"source dim {source.chart.dim} != target dim {target.chart.dim}")
    if source.chart.dim % 2 == 0:
        raise EvenDimension(f"contact resolutions need odd dimension, got {source.chart.dim}")

    report = check_jacobi_morphism(phi, source, target, cfg)
    report.subject = "contact_resolution"
    report.source_checks += check_jacobi(source, cfg).checks
    report.source_checks.append(is_contact_everywhere(source, cfg))
    report.asserted_flags = dict(claim.asserted_flags)

    singular = singular_locus_report(target, cfg)
    if singular.singular_status == "codim1_witness":
        point = singular.witnesses[0].point
        if claim.asserted_flags.get("proper"):
            report.notices.append(f"asserted proper resolution contradicts the codimension-1 singular witness at {point}")
            report.citations.append(CITE_PROPER)
        if claim.asserted_flags.get("semi_connected"):
            report.notices.append(f"asserted semi-connected resolution contradicts the codimension-1 singular witness at {point}")
            report.citations.append(CITE_SEMI_CONNECTED)
    return report


def check_homogeneous_symplectic_resolution(phi: SmoothMap, source: HomogeneousPoisson, target: HomogeneousPoisson,
                                            cfg: Optional[RunConfig] = None) -> MorphismReport:
    if source.chart.dim != target.chart.dim:
        raise DimensionMismatch(f"source dim {source.chart.dim} != target dim {target.chart.dim}")
    if source.chart.dim % 2:
        raise OddDimension(f"symplectic resolutions need even dimension, got {source.chart.dim}")
    report = MorphismReport("homogeneous_symplectic_resolution")
    report.source_checks += check_poisson(source.pi, cfg).checks
    report.source_checks.append(symplectic_check(source, cfg))
    report.relations += pushforward_check_bivector(source.pi, phi, target.pi, cfg)
    report.relations += pushforward_check_vector(source.z, phi, target.z, cfg, prefix="homothety")
    return report


if __name__ == "__main__":
    chart = Chart.of("x", "y", "z")
    J = JacobiStructure.from_components(chart, {("x", "y"): "x^4+y^4", ("x", "z"): "-x", ("y", "z"): "-y"},
                                        {"z": 2})
    report = check_jacobi_morphism(identity_map(chart), J, J)
    for r in report.relations:
        print(f"[Morphism] {r.check_id}: {'PASS' if r.passed else 'FAIL'} ({r.label})")
