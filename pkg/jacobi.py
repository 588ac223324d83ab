# ============================================================================
# jacobi.py
# ============================================================================
"""
Jacobi, contact and Poisson structures on a chart and their checks.

Conventions:
- (pi, E) is Jacobi when [pi, pi] = 2 E^pi and [E, pi] = 0.
- The contact defect P is the top coefficient of E ^ pi^n on a (2n+1)-chart.
- Poissonification on the chart (t, ...) is pi_P = exp(-t) (pi + E ^ d_t) with
  homothety field d_t; its measured homogeneity constant is -1.

Constructors never validate; every check returns a StructureReport.
"""

import logging
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Any, Dict, List, Mapping, Optional, Sequence, Tuple

import numpy as np
from scipy.optimize import brentq, minimize_scalar

from expr_core import (
    ONE,
    Chart,
    ChartMismatch,
    Const,
    DivisionNearZero,
    Expr,
    ToolkitError,
    Var,
    ZeroVerdict,
    add,
    as_expr,
    differentiate,
    div,
    evaluate,
    exp,
    is_zero,
    mul,
    neg,
    sample_values,
    simplify,
    sub,
    substitute,
)
from multivector import (
    DiffForm,
    MultiVectorField,
    VolumeForm,
    bivector_field,
    contract,
    divergence,
    exterior_derivative,
    field_zero_verdict,
    form_wedge,
    function_differential,
    lie_derivative,
    mv_power,
    one_form,
    schouten,
    top_coefficient,
    vector_field,
    wedge,
)
from run_config import RunConfig

log = logging.getLogger(__name__)

CITE_PROPER = "Thm: no proper contact resolution when the singular locus contains a codimension-1 submanifold"
CITE_SEMI_CONNECTED = "Thm: no semi-connected contact resolution when the singular locus contains a codimension-1 submanifold"
CITE_EULER_PARITY = "Prop: with an Euler field of odd weight sum the contact defect is homogeneous of odd degree and changes sign"
NOTE_HOMOGENEITY = "homogeneity constant {c} differs from the +1 of the homogeneity definition [Z, pi] = pi"

# Singular-locus probing
SEGMENT_SAMPLES = 33
ZERO_VALUE_TOL = 1e-10
GRADIENT_STEP = 1e-6
GRADIENT_MIN = 1e-6
ORDER_STEP = 1e-3
PERSISTENCE_SHIFT = 0.05
PERSISTENCE_HALF_WIDTH = 0.5
PERSISTENCE_SAMPLES = 41
MAX_WITNESSES = 5


class EvenDimension(ToolkitError):
    pass


class OddDimension(ToolkitError):
    pass


class UnsupportedDimension(ToolkitError):
    pass


class NonCoordinateHomothety(ToolkitError):
    pass


class NotContact(ToolkitError):
    def __init__(self, message: str, point: Optional[Dict[str, float]] = None):
        super().__init__(message)
        self.point = point


class NotEulerField(ToolkitError):
    pass


class NotHomogeneous(ToolkitError):
    pass


# ============================================================================
# Structures
# ============================================================================

@dataclass(frozen=True)
class JacobiStructure:
    """Candidate pair (pi, E); validity is only established by check_jacobi."""

    chart: Chart
    pi: MultiVectorField
    e: MultiVectorField

    def __post_init__(self):
        if self.pi.chart != self.chart or self.e.chart != self.chart:
            raise ChartMismatch("pi and E must live on the structure's chart")
        if self.pi.degree != 2 or self.e.degree != 1:
            raise ValueError("a Jacobi structure pairs a bivector with a vector field")

    @classmethod
    def from_components(cls, chart: Chart, pi: Mapping[Tuple[str, str], Any], e: Mapping[str, Any]) -> "JacobiStructure":
        return cls(chart, bivector_field(chart, pi), vector_field(chart, e))

    @property
    def dim(self) -> int:
        return self.chart.dim


@dataclass(frozen=True)
class HomogeneousPoisson:
    chart: Chart
    pi: MultiVectorField
    z: MultiVectorField
    homogeneity_constant: Fraction
    z_complete: bool = True  # user assertion, never checked

    @classmethod
    def measured(cls, chart: Chart, pi: MultiVectorField, z: MultiVectorField,
                 cfg: Optional[RunConfig] = None, z_complete: bool = True) -> "HomogeneousPoisson":
        c = measure_homogeneity(pi, z, cfg)
        if c is None:
            raise NotHomogeneous("L_Z pi is not a constant multiple of pi")
        return cls(chart, pi, z, c, z_complete)


@dataclass(frozen=True)
class ContactForm:
    chart: Chart
    alpha: DiffForm

    @classmethod
    def from_components(cls, chart: Chart, components: Mapping[str, Any]) -> "ContactForm":
        return cls(chart, one_form(chart, components))


# ============================================================================
# Reports
# ============================================================================

@dataclass
class CheckResult:
    check_id: str
    passed: bool
    verdict: Optional[ZeroVerdict] = None
    residual: float = 0.0
    witness: Optional[Dict[str, float]] = None
    detail: str = ""

    @classmethod
    def from_verdict(cls, check_id: str, verdict: ZeroVerdict, detail: str = "") -> "CheckResult":
        return cls(check_id, verdict.is_zero, verdict, verdict.residual, verdict.witness, detail)

    @property
    def label(self) -> str:
        if self.verdict is not None:
            return self.verdict.label
        return "nonvanishing" if self.passed else "vanishes"


@dataclass
class SingularWitness:
    point: Dict[str, float]
    value: float
    kind: str        # sign_change | tangential
    order: int
    slope: float     # |grad P| for simple zeros, slope of |P|^(1/order) otherwise


@dataclass
class StructureReport:
    subject: str
    checks: List[CheckResult] = field(default_factory=list)
    witnesses: List[SingularWitness] = field(default_factory=list)
    singular_status: Optional[str] = None
    measurements: Dict[str, str] = field(default_factory=dict)
    notes: List[str] = field(default_factory=list)
    citations: List[str] = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)

    def check(self, check_id: str) -> CheckResult:
        for c in self.checks:
            if c.check_id == check_id:
                return c
        raise KeyError(check_id)

    def cite(self, *citations: str) -> None:
        for c in citations:
            if c not in self.citations:
                self.citations.append(c)

    def absorb(self, other: "StructureReport") -> "StructureReport":
        self.checks.extend(other.checks)
        self.witnesses.extend(other.witnesses)
        self.singular_status = self.singular_status or other.singular_status
        self.measurements.update(other.measurements)
        self.notes.extend(n for n in other.notes if n not in self.notes)
        self.cite(*other.citations)
        return self


# ============================================================================
# Identity checks
# ============================================================================

def jacobi_residuals(J: JacobiStructure) -> Tuple[MultiVectorField, MultiVectorField]:
    """([pi,pi] - 2 E^pi, [E,pi])."""
    first = (schouten(J.pi, J.pi) - wedge(J.e, J.pi).scale(2)).simplified()
    second = schouten(J.e, J.pi)
    return first, second


def check_jacobi(J: JacobiStructure, cfg: Optional[RunConfig] = None) -> StructureReport:
    first, second = jacobi_residuals(J)
    report = StructureReport("jacobi")
    report.checks.append(CheckResult.from_verdict("jacobi.pi_pi", field_zero_verdict(first, cfg), "[pi,pi] - 2 E^pi"))
    report.checks.append(CheckResult.from_verdict("jacobi.e_pi", field_zero_verdict(second, cfg), "[E,pi]"))
    log.info("check_jacobi: %s", "PASS" if report.passed else "FAIL")
    return report


def check_poisson(pi: MultiVectorField, cfg: Optional[RunConfig] = None) -> StructureReport:
    report = StructureReport("poisson")
    report.checks.append(CheckResult.from_verdict("poisson.pi_pi", field_zero_verdict(schouten(pi, pi), cfg), "[pi,pi]"))
    return report


def dim3_components(J: JacobiStructure) -> Tuple[Expr, ...]:
    """(fx, fy, fz, gx, gy, gz) with pi = fz dx^dy + fy dz^dx + fx dy^dz."""
    if J.dim != 3:
        raise UnsupportedDimension(f"expected a 3-dimensional chart, got {J.chart}")
    x, y, z = J.chart.names
    return (
        J.pi.component(y, z), J.pi.component(z, x), J.pi.component(x, y),
        J.e.component(x), J.e.component(y), J.e.component(z),
    )


def check_jacobi_dim3(fx: Expr, fy: Expr, fz: Expr, gx: Expr, gy: Expr, gz: Expr,
                      chart: Optional[Chart] = None, cfg: Optional[RunConfig] = None) -> StructureReport:
    """
    The explicit scalar form of the Jacobi conditions on R^3. Condition (1) is
    f.(curl-like C - g); the three (2) relations are the components of [E, pi].
    """
    chart = chart or Chart.of("x", "y", "z")
    if chart.dim != 3:
        raise UnsupportedDimension(f"expected a 3-dimensional chart, got {chart}")
    X, Y, Z = chart.names
    fx, fy, fz, gx, gy, gz = (as_expr(v) for v in (fx, fy, fz, gx, gy, gz))
    d = differentiate

    def E(h: Expr) -> Expr:
        return add(mul(gx, d(h, X)), mul(gy, d(h, Y)), mul(gz, d(h, Z)))

    relations = {
        "dim3.condition1": add(
            mul(fx, sub(sub(d(fy, Z), d(fz, Y)), gx)),
            mul(fy, sub(sub(d(fz, X), d(fx, Z)), gy)),
            mul(fz, sub(sub(d(fx, Y), d(fy, X)), gz)),
        ),
        "dim3.condition2.x": add(E(fx), neg(mul(fx, add(d(gy, Y), d(gz, Z)))), mul(fy, d(gy, X)), mul(fz, d(gz, X))),
        "dim3.condition2.y": add(E(fy), neg(mul(fy, add(d(gz, Z), d(gx, X)))), mul(fz, d(gz, Y)), mul(fx, d(gx, Y))),
        "dim3.condition2.z": add(E(fz), neg(mul(fz, add(d(gx, X), d(gy, Y)))), mul(fx, d(gx, Z)), mul(fy, d(gy, Z))),
    }
    report = StructureReport("jacobi_dim3")
    for check_id, expr in relations.items():
        report.checks.append(CheckResult.from_verdict(check_id, is_zero(expr, cfg)))
    return report


# ============================================================================
# Contact defect and singular locus
# ============================================================================

def contact_defect(J: JacobiStructure) -> Expr:
    """P with E ^ pi^n = P d_1^...^d_(2n+1)."""
    if J.dim % 2 == 0:
        raise EvenDimension(f"contact defect needs an odd-dimensional chart, got {J.chart}")
    n = (J.dim - 1) // 2
    top = J.e if n == 0 else wedge(J.e, mv_power(J.pi, n))
    return simplify(top_coefficient(top))


def dimension3_singular_type(J: JacobiStructure, point: Mapping[str, float], tol: float = 1e-12) -> str:
    """regular | pi_vanishes | reeb_in_image for a point of a 3-dimensional structure."""
    if J.dim != 3:
        raise UnsupportedDimension(f"expected a 3-dimensional chart, got {J.chart}")
    pi_values = [abs(evaluate(v, point)) for v in J.pi.coeffs.values()]
    if all(v <= tol for v in pi_values):
        return "pi_vanishes"
    if abs(evaluate(contact_defect(J), point)) <= tol:
        return "reeb_in_image"
    return "regular"


class _DefectProbe:
    """Evaluates the defect along lines of the chart and certifies zero crossings."""

    def __init__(self, defect: Expr, chart: Chart):
        self.defect = defect
        self.names = chart.names

    def values(self, X: np.ndarray) -> np.ndarray:
        X = np.atleast_2d(X)
        point = {name: X[:, i] for i, name in enumerate(self.names)}
        return np.broadcast_to(evaluate(self.defect, point), (X.shape[0],)).astype(float)

    def at(self, x: np.ndarray) -> float:
        return float(self.values(x[None, :])[0])

    def gradient_norm(self, x: np.ndarray) -> float:
        h = GRADIENT_STEP
        grad = [(self.at(x + h * e) - self.at(x - h * e)) / (2 * h) for e in np.eye(len(x))]
        return float(np.linalg.norm(grad))

    def order(self, x: np.ndarray, u: np.ndarray) -> Tuple[int, float]:
        h = ORDER_STEP
        v1 = max(abs(self.at(x + h * u)), abs(self.at(x - h * u)))
        v2 = max(abs(self.at(x + 2 * h * u)), abs(self.at(x - 2 * h * u)))
        if v1 <= 0 or v2 <= 0:
            return 0, 0.0
        k = max(1, int(round(np.log2(v2 / v1))))
        return k, v1 ** (1.0 / k) / h

    def line_min(self, x: np.ndarray, u: np.ndarray) -> float:
        s = np.linspace(-PERSISTENCE_HALF_WIDTH, PERSISTENCE_HALF_WIDTH, PERSISTENCE_SAMPLES)
        v = self.values(x[None, :] + s[:, None] * u[None, :])
        if np.any(np.sign(v[:-1]) * np.sign(v[1:]) < 0):
            return 0.0
        j = int(np.argmin(np.abs(v)))
        lo, hi = s[max(j - 1, 0)], s[min(j + 1, len(s) - 1)]
        res = minimize_scalar(lambda t: abs(self.at(x + t * u)), bounds=(lo, hi), method="bounded",
                              options={"xatol": 1e-12})
        return float(min(abs(v[j]), res.fun))

    def persists(self, x: np.ndarray, u: np.ndarray) -> bool:
        if len(x) == 1:
            return True
        _, _, vt = np.linalg.svd(u[None, :])
        for w in vt[1:]:
            for sign in (1.0, -1.0):
                if self.line_min(x + sign * PERSISTENCE_SHIFT * w, u) > ZERO_VALUE_TOL:
                    return False
        return True

    def certify(self, x: np.ndarray, u: np.ndarray, kind: str) -> Optional[SingularWitness]:
        value = self.at(x)
        if abs(value) > ZERO_VALUE_TOL:
            return None
        k, slope = self.order(x, u)
        if k == 0:
            return None
        if k == 1:
            slope = self.gradient_norm(x)
            if slope <= GRADIENT_MIN:
                return None
        elif slope <= GRADIENT_MIN or not self.persists(x, u):
            return None
        point = {name: float(x[i]) for i, name in enumerate(self.names)}
        return SingularWitness(point, value, kind, k, float(slope))


def _is_new(witnesses: List[SingularWitness], w: SingularWitness) -> bool:
    for other in witnesses:
        gap = max(abs(other.point[k] - w.point[k]) for k in w.point)
        if gap < 1e-6:
            return False
    return True


def find_codim1_witnesses(defect: Expr, chart: Chart, cfg: RunConfig) -> List[SingularWitness]:
    """
    Probes cfg.segments random segments of the sampling box. Sign changes are
    located by bracketing; even-order zeros by minimising |P| along the
    segment. A witness needs |P| <= 1e-10 plus an order-aware slope certificate.
    """
    probe = _DefectProbe(defect, chart)
    rng = cfg.rng(offset=101)
    dim = chart.dim
    witnesses: List[SingularWitness] = []

    for _ in range(cfg.segments):
        a = rng.uniform(-cfg.box, cfg.box, dim)
        b = rng.uniform(-cfg.box, cfg.box, dim)
        length = float(np.linalg.norm(b - a))
        if length < 1e-9:
            continue
        u = (b - a) / length
        ts = np.linspace(0.0, length, SEGMENT_SAMPLES)
        try:
            v = probe.values(a[None, :] + ts[:, None] * u[None, :])
        except DivisionNearZero:
            continue

        candidates: List[Tuple[np.ndarray, str]] = []
        for j in np.nonzero(np.sign(v[:-1]) * np.sign(v[1:]) < 0)[0]:
            t0 = brentq(lambda t: probe.at(a + t * u), ts[j], ts[j + 1], xtol=1e-15)
            candidates.append((a + t0 * u, "sign_change"))

        mags = np.abs(v)
        for j in range(len(ts)):
            left = mags[j - 1] if j > 0 else np.inf
            right = mags[j + 1] if j + 1 < len(ts) else np.inf
            if not (mags[j] < left and mags[j] <= right):
                continue
            lo, hi = ts[max(j - 1, 0)], ts[min(j + 1, len(ts) - 1)]
            res = minimize_scalar(lambda t: abs(probe.at(a + t * u)), bounds=(lo, hi), method="bounded",
                                  options={"xatol": 1e-12})
            if res.fun <= ZERO_VALUE_TOL:
                candidates.append((a + res.x * u, "tangential"))

        for x, kind in candidates:
            try:
                w = probe.certify(x, u, kind)
            except DivisionNearZero:
                continue
            if w is not None and _is_new(witnesses, w):
                witnesses.append(w)
                log.debug("Codim-1 witness (%s, order %d) at %s", w.kind, w.order, w.point)
            if len(witnesses) >= MAX_WITNESSES:
                return witnesses
    return witnesses


def singular_locus_report(J: JacobiStructure, cfg: Optional[RunConfig] = None) -> StructureReport:
    cfg = cfg or RunConfig()
    P = contact_defect(J)
    report = StructureReport("singular_locus")
    report.measurements["contact_defect"] = str(P)
    if is_zero(P, cfg).is_zero:
        report.singular_status = "identically_zero"
        report.notes.append("contact defect vanishes identically: no contact point")
        return report

    report.witnesses = find_codim1_witnesses(P, J.chart, cfg)
    if report.witnesses:
        report.singular_status = "codim1_witness"
        report.cite(CITE_PROPER, CITE_SEMI_CONNECTED)
    else:
        report.singular_status = "no_codim1_witness"
    log.info("singular locus: %s (%d witnesses)", report.singular_status, len(report.witnesses))
    return report


def is_contact_everywhere(J: JacobiStructure, cfg: Optional[RunConfig] = None) -> CheckResult:
    """Exact when the defect is a nonzero constant, otherwise nonvanishing at every sample."""
    cfg = cfg or RunConfig()
    P = contact_defect(J)
    if isinstance(P, Const):
        return CheckResult("contact.everywhere", P.value != 0, residual=abs(float(P.value)),
                           detail="exact: constant defect")
    points, values = sample_values(P, J.chart.names, cfg, offset=3)
    return _nonvanishing("contact.everywhere", points, values, cfg)


def _nonvanishing(check_id: str, points: Dict[str, np.ndarray], values: np.ndarray, cfg: RunConfig) -> CheckResult:
    mags = np.abs(values)
    good = int(np.sum(mags > cfg.tol))
    idx = int(np.argmin(mags))
    witness = None if good == len(mags) else {k: float(v[idx]) for k, v in points.items()}
    return CheckResult(check_id, good == len(mags), residual=float(mags[idx]), witness=witness,
                       detail=f"at {good}/{len(mags)} samples")


# ============================================================================
# Poissonification and slices
# ============================================================================

def measure_homogeneity(pi: MultiVectorField, z: MultiVectorField, cfg: Optional[RunConfig] = None) -> Optional[Fraction]:
    """The constant c with L_Z pi = c pi, or None when there is none (or pi = 0)."""
    cfg = cfg or RunConfig()
    if not pi.coeffs:
        return None
    L = lie_derivative(z, pi)
    key = sorted(pi.coeffs)[0]
    if is_zero(L.coefficient(key), cfg).is_zero:
        c = Fraction(0)
    else:
        ratio = simplify(div(L.coefficient(key), pi.coefficient(key)))
        if isinstance(ratio, Const):
            c = ratio.value
        else:
            _, values = sample_values(ratio, pi.chart.names, cfg, offset=5)
            c = Fraction(float(values[0])).limit_denominator(1000)
    verdict = field_zero_verdict((L - pi.scale(Const(c))).simplified(), cfg)
    return c if verdict.is_zero else None


def poissonify(J: JacobiStructure, cfg: Optional[RunConfig] = None) -> HomogeneousPoisson:
    """pi_P = exp(-t) (pi + E ^ d_t) on the chart (t, ...), Z = d_t."""
    t_name = J.chart.fresh_name("t")
    chart = J.chart.prepend(t_name)
    scale = exp(neg(Var(t_name)))
    coeffs: Dict[Tuple[int, ...], Expr] = {}
    for (i, j), c in J.pi.coeffs.items():
        coeffs[(i + 1, j + 1)] = mul(scale, c)
    for (i,), c in J.e.coeffs.items():
        coeffs[(0, i + 1)] = mul(scale, neg(c))
    pi_p = MultiVectorField(chart, 2, coeffs)
    z = MultiVectorField(chart, 1, {(0,): ONE})
    c = measure_homogeneity(pi_p, z, cfg)
    if c is None:
        if pi_p.coeffs:
            log.warning("poissonify: no homogeneity constant measured on %s, recording -1", chart)
        c = Fraction(-1)
    log.info("poissonify: chart %s, homogeneity constant %s", chart, c)
    return HomogeneousPoisson(chart, pi_p, z, c)


def check_homogeneous(hp: HomogeneousPoisson, cfg: Optional[RunConfig] = None) -> StructureReport:
    residual = (lie_derivative(hp.z, hp.pi) - hp.pi.scale(Const(hp.homogeneity_constant))).simplified()
    report = StructureReport("homogeneous")
    report.checks.append(CheckResult.from_verdict("homogeneous.lie", field_zero_verdict(residual, cfg),
                                                  f"L_Z pi - ({hp.homogeneity_constant}) pi"))
    report.measurements["homogeneity_constant"] = str(hp.homogeneity_constant)
    report.measurements["z_complete"] = "asserted" if hp.z_complete else "not asserted"
    if hp.homogeneity_constant != 1:
        report.notes.append(NOTE_HOMOGENEITY.format(c=hp.homogeneity_constant))
    return report


def symplectic_check(hp: HomogeneousPoisson, cfg: Optional[RunConfig] = None) -> CheckResult:
    """Nondegeneracy: the top coefficient of pi^(dim/2) is nonzero at every sample."""
    cfg = cfg or RunConfig()
    if hp.chart.dim % 2:
        raise OddDimension(f"symplectic check needs an even-dimensional chart, got {hp.chart}")
    top = top_coefficient(mv_power(hp.pi, hp.chart.dim // 2))
    if is_zero(top, cfg).is_zero:
        return CheckResult("symplectic.nondegenerate", False, detail="pi^n vanishes identically")
    points, values = sample_values(top, hp.chart.names, cfg, offset=11)
    return _nonvanishing("symplectic.nondegenerate", points, values, cfg)


def slice_induce(hp: HomogeneousPoisson, coord: str, value: Any = 0) -> JacobiStructure:
    """
    Induced Jacobi structure on the slice {coord = value} for Z = d_coord:
    pi_N^(ij) = pi^(ij) and E_N^i = pi^(i, coord), restricted to the slice.
    """
    idx = hp.chart.index(coord)
    z = hp.z.simplified()
    if z.coeffs != {(idx,): ONE}:
        raise NonCoordinateHomothety(f"homothety field {z} is not d/d{coord}")

    chart = hp.chart.without(coord)
    at = {coord: as_expr(Fraction(value))}

    def shift(i: int) -> int:
        return i if i < idx else i - 1

    pi_n: Dict[Tuple[int, ...], Expr] = {}
    e_n: Dict[Tuple[int, ...], List[Expr]] = {}
    for (i, j), c in hp.pi.coeffs.items():
        c = substitute(c, at)
        if idx == j:
            e_n.setdefault((shift(i),), []).append(c)
        elif idx == i:
            e_n.setdefault((shift(j),), []).append(neg(c))
        else:
            pi_n[(shift(i), shift(j))] = c
    e = MultiVectorField(chart, 1, {k: add(*v) for k, v in e_n.items()})
    return JacobiStructure(chart, MultiVectorField(chart, 2, pi_n), e)


# ============================================================================
# Contact forms
# ============================================================================

def _contact_pieces(cf: ContactForm) -> Tuple[List[Expr], List[Expr], Expr]:
    if cf.chart.dim != 3:
        raise UnsupportedDimension(f"symbolic contact conversion needs dim 3, got {cf.chart}")
    a = [cf.alpha.coefficient((i,)) for i in range(3)]
    d_alpha = exterior_derivative(cf.alpha)
    B = [
        d_alpha.coefficient((1, 2)),
        neg(d_alpha.coefficient((0, 2))),
        d_alpha.coefficient((0, 1)),
    ]
    volume = simplify(add(*(mul(ai, bi) for ai, bi in zip(a, B))))
    return a, B, volume


def contact_form_to_jacobi(cf: ContactForm, cfg: Optional[RunConfig] = None) -> JacobiStructure:
    """
    Reeb field R = B / (a.B) and bivector pi dual to -a / (a.B), where a are
    the coefficients of alpha, dalpha = B1 dy^dz + B2 dz^dx + B3 dx^dy and
    a.B is the coefficient of alpha ^ dalpha.
    """
    cfg = cfg or RunConfig()
    a, B, volume = _contact_pieces(cf)
    if is_zero(volume, cfg).is_zero:
        raise NotContact(f"alpha ^ dalpha vanishes identically on {cf.chart}")
    points, values = sample_values(volume, cf.chart.names, cfg, offset=13)
    small = np.abs(values) < cfg.tol
    if small.any():
        idx = int(np.argmax(small))
        raise NotContact("alpha ^ dalpha vanishes at a sample point", {k: float(v[idx]) for k, v in points.items()})

    reeb = [simplify(div(b, volume)) for b in B]
    L = [simplify(div(neg(ai), volume)) for ai in a]
    chart = cf.chart
    pi = MultiVectorField(chart, 2, {(1, 2): L[0], (0, 2): neg(L[1]), (0, 1): L[2]})
    e = MultiVectorField(chart, 1, {(i,): r for i, r in enumerate(reeb)})
    return JacobiStructure(chart, pi.simplified(), e)


@dataclass(frozen=True)
class ContactSample:
    reeb: np.ndarray
    bivector: np.ndarray
    volume: float


def sample_contact_jacobi(cf: ContactForm, point: Mapping[str, float]) -> ContactSample:
    """
    Pointwise Reeb vector and bivector matrix in any odd dimension. With
    D_ij = dalpha(d_i, d_j) and M = D + a a^T: R = M^-T a, Lambda = -M^-1 D M^-T.
    """
    dim = cf.chart.dim
    if dim % 2 == 0:
        raise EvenDimension(f"contact forms live on odd-dimensional charts, got {cf.chart}")
    a = np.array([evaluate(cf.alpha.coefficient((i,)), point) for i in range(dim)])
    d_alpha = exterior_derivative(cf.alpha)
    D = np.zeros((dim, dim))
    for (i, j), c in d_alpha.coeffs.items():
        D[i, j] = evaluate(c, point)
        D[j, i] = -D[i, j]
    M = D + np.outer(a, a)
    det = float(np.linalg.det(M))
    if abs(det) < 1e-12:
        raise NotContact("alpha ^ (dalpha)^n vanishes at the point", dict(point))
    M_inv = np.linalg.inv(M)
    return ContactSample(M_inv.T @ a, -M_inv @ D @ M_inv.T, det)


def dalpha_constant(cf: ContactForm, profile: Expr, cfg: Optional[RunConfig] = None) -> Tuple[Fraction, ZeroVerdict]:
    """The constant c with dalpha_(12) = c / profile, and the verdict confirming it."""
    cfg = cfg or RunConfig()
    d_alpha = exterior_derivative(cf.alpha)
    scaled = simplify(mul(d_alpha.coefficient((0, 1)), profile))
    if isinstance(scaled, Const):
        return scaled.value, is_zero(sub(scaled, scaled), cfg)
    _, values = sample_values(scaled, cf.chart.names, cfg, offset=17)
    c = Fraction(float(values[0])).limit_denominator(1000)
    return c, is_zero(sub(scaled, Const(c)), cfg)


# ============================================================================
# Brackets, divergence, Euler fields
# ============================================================================

def jacobi_bracket(J: JacobiStructure, f: Any, g: Any) -> Expr:
    """{f, g} = pi(df, dg) - f E[g] + g E[f]."""
    f, g = as_expr(f), as_expr(g)
    df = function_differential(f, J.chart)
    dg = function_differential(g, J.chart)
    pairing = contract(J.pi, form_wedge(df, dg)).coefficient(())
    e_f = contract(J.e, df).coefficient(())
    e_g = contract(J.e, dg).coefficient(())
    return simplify(add(pairing, neg(mul(f, e_g)), mul(g, e_f)))


def divergence_structure(pi: MultiVectorField, vol: Optional[VolumeForm] = None) -> JacobiStructure:
    """(pi, -dv(pi)): [pi, pi] = -2 dv(pi)^pi makes the first Jacobi identity hold on R^3."""
    vol = vol or VolumeForm.standard(pi.chart)
    return JacobiStructure(pi.chart, pi, divergence(pi, vol).scale(-1).simplified())


def euler_weights(J: JacobiStructure) -> Optional[List[int]]:
    """Positive integer weights w with E = sum w_i x_i d_i, or None."""
    weights = []
    for i, name in enumerate(J.chart.names):
        ratio = simplify(div(J.e.coefficient((i,)), Var(name)))
        if not isinstance(ratio, Const) or ratio.value <= 0 or ratio.value.denominator != 1:
            return None
        weights.append(int(ratio.value))
    return weights


def euler_degree_check(J: JacobiStructure, weights: Sequence[int], cfg: Optional[RunConfig] = None) -> StructureReport:
    """E[P] = d P with d the weight sum; odd d with a sign change cites the parity obstruction."""
    cfg = cfg or RunConfig()
    if len(weights) != J.dim or any(int(w) < 1 for w in weights):
        raise NotEulerField(f"need {J.dim} positive integer weights, got {list(weights)}")
    expected = vector_field(J.chart, {n: mul(int(w), Var(n)) for n, w in zip(J.chart.names, weights)})
    if (J.e - expected).simplified().coeffs:
        raise NotEulerField(f"E is not the Euler field with weights {list(weights)}")

    P = contact_defect(J)
    d = sum(int(w) for w in weights)
    e_of_p = contract(J.e, function_differential(P, J.chart)).coefficient(())
    report = StructureReport("euler")
    report.checks.append(CheckResult.from_verdict("euler.degree", is_zero(sub(e_of_p, mul(d, P)), cfg), f"E[P] - {d} P"))
    report.measurements["weight_sum"] = str(d)
    report.measurements["parity"] = "odd" if d % 2 else "even"
    if d % 2 and report.passed:
        singular = singular_locus_report(J, cfg)
        if any(w.kind == "sign_change" for w in singular.witnesses):
            report.cite(CITE_EULER_PARITY, CITE_PROPER, CITE_SEMI_CONNECTED)
            report.notes.append("odd weight sum: the contact defect changes sign across a hypersurface")
        report.witnesses = singular.witnesses
        report.singular_status = singular.singular_status
    elif d % 2 == 0:
        report.notes.append("even weight sum: no parity obstruction")
    return report


if __name__ == "__main__":
    chart = Chart.of("x", "y", "z")
    lehbel = JacobiStructure.from_components(
        chart, {("x", "y"): "x^4+y^4", ("z", "x"): "x", ("y", "z"): "-y"}, {"z": 2})
    print(f"[Jacobi] lehbel passes: {check_jacobi(lehbel).passed}")
    print(f"[Jacobi] contact defect: {contact_defect(lehbel)}")
    hp = poissonify(lehbel)
    print(f"[Jacobi] Poissonification:\n{hp.pi}")
