# ============================================================================
# multivector.py
# ============================================================================
"""
Graded exterior calculus on a coordinate chart.

A degree-k field stores one coefficient per strictly increasing k-tuple of
coordinate indices. Multivector fields are treated as polynomials in
anticommuting symbols theta_i, which makes the Schouten bracket a single
formula:

    [P, Q] = sum_i (P d<theta_i) (d_i Q) - (d_i P) (d>theta_i Q)

with d<theta / d>theta the right / left derivatives in theta_i.

Key Features:
- wedge, schouten, lie_derivative, mv_power on multivector fields
- exterior_derivative, contract (interior product), divergence on forms
- chart re-ordering, substitution, pointwise evaluation
- field-level zero test aggregating coefficient verdicts
"""

import logging
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, Dict, List, Mapping, Optional, Sequence, Tuple, Union

from expr_core import (
    ZERO,
    Chart,
    ChartMismatch,
    Expr,
    NumericallyZero,
    ProvedZero,
    ToolkitError,
    ZeroVerdict,
    add,
    as_expr,
    differentiate,
    div,
    evaluate,
    is_const,
    is_zero,
    mul,
    neg,
    parse_expr,
    print_expr,
    simplify,
    substitute,
)
from run_config import RunConfig

log = logging.getLogger(__name__)

Key = Tuple[int, ...]
Coefficient = Union[Expr, int, Fraction, str]


class DegenerateVolume(ToolkitError):
    pass


def sort_sign(indices: Sequence[int]) -> Tuple[int, Key]:
    """Sign of the permutation sorting `indices`, 0 if an index repeats."""
    items = list(indices)
    if len(set(items)) != len(items):
        return 0, ()
    sign = 1
    for i in range(len(items)):
        for j in range(i + 1, len(items)):
            if items[i] > items[j]:
                sign = -sign
    return sign, tuple(sorted(items))


# ============================================================================
# Field containers
# ============================================================================

@dataclass(frozen=True)
class _SkewField:
    chart: Chart
    degree: int
    coeffs: Mapping[Key, Expr] = field(default_factory=dict)

    def __post_init__(self):
        if self.degree < 0:
            raise ValueError(f"negative degree {self.degree}")
        clean: Dict[Key, Expr] = {}
        for key, value in self.coeffs.items():
            key = tuple(key)
            if len(key) != self.degree or any(b <= a for a, b in zip(key, key[1:])):
                raise ValueError(f"key {key} is not a strictly increasing {self.degree}-tuple")
            if any(not 0 <= i < self.chart.dim for i in key):
                raise ValueError(f"key {key} out of range for {self.chart}")
            value = parse_expr(value, self.chart) if isinstance(value, str) else as_expr(value)
            if not is_const(value, 0):
                clean[key] = value
        object.__setattr__(self, "coeffs", clean)

    # -- construction ---------------------------------------------------------

    @classmethod
    def zero(cls, chart: Chart, degree: int):
        return cls(chart, degree, {})

    @classmethod
    def scalar(cls, chart: Chart, value: Coefficient):
        return cls(chart, 0, {(): value})

    @classmethod
    def from_names(cls, chart: Chart, degree: int, entries: Mapping[Sequence[str], Coefficient]):
        """Build from coordinate-name tuples in any order; signs follow the reordering."""
        acc: Dict[Key, List[Expr]] = {}
        for names, value in entries.items():
            if isinstance(names, str):
                names = (names,)
            if len(names) != degree:
                raise ValueError(f"entry {names} does not have degree {degree}")
            sign, key = sort_sign([chart.index(n) for n in names])
            if sign == 0:
                continue
            value = parse_expr(value, chart) if isinstance(value, str) else as_expr(value)
            acc.setdefault(key, []).append(value if sign > 0 else neg(value))
        return cls(chart, degree, {k: add(*v) for k, v in acc.items()})

    def _like(self, degree: int, coeffs: Mapping[Key, Expr]):
        return type(self)(self.chart, degree, coeffs)

    # -- access ---------------------------------------------------------------

    def coefficient(self, key: Key) -> Expr:
        return self.coeffs.get(tuple(key), ZERO)

    def component(self, *names: str) -> Expr:
        """Coefficient on the named basis element, sign included."""
        sign, key = sort_sign([self.chart.index(n) for n in names])
        if sign == 0:
            return ZERO
        value = self.coefficient(key)
        return value if sign > 0 else neg(value)

    def names_of(self, key: Key) -> Tuple[str, ...]:
        return tuple(self.chart.names[i] for i in key)

    @property
    def is_structurally_zero(self) -> bool:
        return not self.coeffs

    def lines(self) -> List[str]:
        return [f"({' '.join(self.names_of(k))}) = {print_expr(v)}" for k, v in sorted(self.coeffs.items())]

    def __str__(self) -> str:
        return "\n".join(self.lines()) if self.coeffs else "0"

    # -- linear structure -----------------------------------------------------

    def map_coefficients(self, fn: Callable[[Expr], Expr]):
        return self._like(self.degree, {k: fn(v) for k, v in self.coeffs.items()})

    def scale(self, factor: Coefficient):
        factor = as_expr(factor)
        return self.map_coefficients(lambda v: mul(factor, v))

    def simplified(self):
        return self._like(self.degree, _simplified(self.coeffs))

    def _check_compatible(self, other: "_SkewField") -> None:
        if type(self) is not type(other):
            raise TypeError(f"cannot combine {type(self).__name__} with {type(other).__name__}")
        if self.chart != other.chart:
            raise ChartMismatch(f"{self.chart} != {other.chart}")

    def __add__(self, other):
        self._check_compatible(other)
        if self.degree != other.degree:
            raise ValueError(f"degree mismatch {self.degree} != {other.degree}")
        acc: Dict[Key, List[Expr]] = {k: [v] for k, v in self.coeffs.items()}
        for k, v in other.coeffs.items():
            acc.setdefault(k, []).append(v)
        return self._like(self.degree, {k: add(*v) for k, v in acc.items()})

    def __neg__(self):
        return self.map_coefficients(neg)

    def __sub__(self, other):
        return self + (-other)


class MultiVectorField(_SkewField):
    """Contravariant skew field: sum of coefficients times d_I = d_i1 ^ ... ^ d_ik."""


class DiffForm(_SkewField):
    """Covariant skew field: sum of coefficients times dx_I."""


@dataclass(frozen=True)
class VolumeForm:
    """Top-degree form density * dx_1 ^ ... ^ dx_n."""

    chart: Chart
    density: Expr

    @classmethod
    def standard(cls, chart: Chart) -> "VolumeForm":
        return cls(chart, as_expr(1))

    @property
    def form(self) -> DiffForm:
        return DiffForm(self.chart, self.chart.dim, {tuple(range(self.chart.dim)): self.density})

    def validate(self, cfg: Optional[RunConfig] = None) -> "VolumeForm":
        if is_zero(self.density, cfg).is_zero:
            raise DegenerateVolume(f"volume density {self.density} vanishes identically")
        return self


def vector_field(chart: Chart, components: Mapping[str, Coefficient]) -> MultiVectorField:
    return MultiVectorField.from_names(chart, 1, {(n,): v for n, v in components.items()})


def bivector_field(chart: Chart, components: Mapping[Tuple[str, str], Coefficient]) -> MultiVectorField:
    return MultiVectorField.from_names(chart, 2, components)


def one_form(chart: Chart, components: Mapping[str, Coefficient]) -> DiffForm:
    return DiffForm.from_names(chart, 1, {(n,): v for n, v in components.items()})


def _simplified(acc: Mapping[Key, Expr]) -> Dict[Key, Expr]:
    out = {}
    for k, v in acc.items():
        s = simplify(v)
        if not is_const(s, 0):
            out[k] = s
    return out


def _collect(terms: Dict[Key, List[Expr]]) -> Dict[Key, Expr]:
    return _simplified({k: add(*v) for k, v in terms.items()})


def _same_chart(*fields: _SkewField) -> Chart:
    chart = fields[0].chart
    for f in fields[1:]:
        if f.chart != chart:
            raise ChartMismatch(f"{chart} != {f.chart}")
    return chart


# ============================================================================
# Algebra
# ============================================================================

def _wedge_coeffs(p: Mapping[Key, Expr], q: Mapping[Key, Expr]) -> Dict[Key, List[Expr]]:
    acc: Dict[Key, List[Expr]] = {}
    for i, a in p.items():
        for j, b in q.items():
            sign, key = sort_sign(i + j)
            if sign == 0:
                continue
            term = mul(a, b)
            acc.setdefault(key, []).append(term if sign > 0 else neg(term))
    return acc


def wedge(P: _SkewField, Q: _SkewField) -> _SkewField:
    """Exterior product of two multivector fields (or two forms)."""
    if type(P) is not type(Q):
        raise TypeError(f"cannot wedge {type(P).__name__} with {type(Q).__name__}")
    chart = _same_chart(P, Q)
    return type(P)(chart, P.degree + Q.degree, _collect(_wedge_coeffs(P.coeffs, Q.coeffs)))


def form_wedge(alpha: DiffForm, beta: DiffForm) -> DiffForm:
    if not isinstance(alpha, DiffForm) or not isinstance(beta, DiffForm):
        raise TypeError("form_wedge takes differential forms")
    return wedge(alpha, beta)


def mv_power(P: _SkewField, n: int) -> _SkewField:
    """n-fold wedge of P with itself (n >= 1)."""
    if n < 1:
        raise ValueError(f"power must be positive, got {n}")
    result = P
    for _ in range(n - 1):
        result = wedge(result, P)
    return result


def form_power(omega: DiffForm, n: int) -> DiffForm:
    return mv_power(omega, n)


def schouten(P: MultiVectorField, Q: MultiVectorField) -> MultiVectorField:
    """Schouten-Nijenhuis bracket; [X, f] = X[f] and [X, Y] is the Lie bracket."""
    if not isinstance(P, MultiVectorField) or not isinstance(Q, MultiVectorField):
        raise TypeError("schouten takes multivector fields")
    chart = _same_chart(P, Q)
    p, q = P.degree, Q.degree
    if p + q == 0:
        return MultiVectorField.zero(chart, 0)

    acc: Dict[Key, List[Expr]] = {}

    def push(key_a: Key, key_b: Key, coeff: Expr, sign: int) -> None:
        s, key = sort_sign(key_a + key_b)
        if s == 0 or is_const(coeff, 0):
            return
        acc.setdefault(key, []).append(coeff if s * sign > 0 else neg(coeff))

    names = chart.names
    for i, name in enumerate(names):
        # (P d<theta_i)(d_i Q)
        for I, a in P.coeffs.items():
            if i not in I:
                continue
            k = I.index(i)
            sign = -1 if (p - 1 - k) % 2 else 1
            rest = I[:k] + I[k + 1:]
            for J, b in Q.coeffs.items():
                db = differentiate(b, name)
                if not is_const(db, 0):
                    push(rest, J, mul(a, db), sign)
        # -(d_i P)(d>theta_i Q)
        for J, b in Q.coeffs.items():
            if i not in J:
                continue
            k = J.index(i)
            sign = -1 if k % 2 else 1
            rest = J[:k] + J[k + 1:]
            for I, a in P.coeffs.items():
                da = differentiate(a, name)
                if not is_const(da, 0):
                    push(I, rest, mul(da, b), -sign)

    return MultiVectorField(chart, p + q - 1, _collect(acc))


def contract(P: MultiVectorField, omega: DiffForm) -> DiffForm:
    """
    Interior product i_P omega. For dx_J = eps dx_I ^ dx_(J-I) the pairing is
    i_(d_I) dx_J = eps dx_(J-I), so <d_I, dx_I> = 1.
    """
    if not isinstance(P, MultiVectorField) or not isinstance(omega, DiffForm):
        raise TypeError("contract takes a multivector field and a form")
    chart = _same_chart(P, omega)
    if P.degree > omega.degree:
        raise ValueError(f"cannot contract a degree-{P.degree} field into a {omega.degree}-form")
    acc: Dict[Key, List[Expr]] = {}
    for I, a in P.coeffs.items():
        inside = set(I)
        for J, w in omega.coeffs.items():
            if not inside.issubset(J):
                continue
            rest = tuple(j for j in J if j not in inside)
            eps, _ = sort_sign(I + rest)
            term = mul(a, w)
            acc.setdefault(rest, []).append(term if eps > 0 else neg(term))
    return DiffForm(chart, omega.degree - P.degree, _collect(acc))


def exterior_derivative(omega: DiffForm) -> DiffForm:
    if not isinstance(omega, DiffForm):
        raise TypeError("exterior_derivative takes a form")
    chart = omega.chart
    acc: Dict[Key, List[Expr]] = {}
    for J, w in omega.coeffs.items():
        for i, name in enumerate(chart.names):
            dw = differentiate(w, name)
            if is_const(dw, 0):
                continue
            sign, key = sort_sign((i,) + J)
            if sign == 0:
                continue
            acc.setdefault(key, []).append(dw if sign > 0 else neg(dw))
    return DiffForm(chart, omega.degree + 1, _collect(acc))


def function_differential(f: Coefficient, chart: Chart) -> DiffForm:
    return exterior_derivative(DiffForm.scalar(chart, f))


def divergence(P: MultiVectorField, vol: VolumeForm, cfg: Optional[RunConfig] = None) -> MultiVectorField:
    """
    The (p-1)-field dv(P) with contract(dv(P), vol) = d(contract(P, vol)).
    Raises DegenerateVolume when the density vanishes identically.
    """
    if P.degree < 1:
        raise ValueError("divergence needs degree >= 1")
    chart = _same_chart(P, vol.validate(cfg).form)
    omega = exterior_derivative(contract(P, vol.form))
    everything = tuple(range(chart.dim))
    out: Dict[Key, List[Expr]] = {}
    for L, w in omega.coeffs.items():
        K = tuple(i for i in everything if i not in L)
        eps, _ = sort_sign(K + L)
        value = div(w, vol.density)
        out.setdefault(K, []).append(value if eps > 0 else neg(value))
    return MultiVectorField(chart, P.degree - 1, _collect(out))


def lie_derivative(X: MultiVectorField, P: _SkewField) -> _SkewField:
    """L_X P: the bracket [X, P] on multivectors, Cartan's formula on forms."""
    if X.degree != 1:
        raise ValueError("lie_derivative needs a vector field")
    if isinstance(P, DiffForm):
        return lie_derivative_form(X, P)
    return schouten(X, P)


def lie_derivative_form(X: MultiVectorField, omega: DiffForm) -> DiffForm:
    _same_chart(X, omega)
    parts = []
    if omega.degree >= 1:
        parts.append(exterior_derivative(contract(X, omega)))
    if omega.degree < omega.chart.dim:
        parts.append(contract(X, exterior_derivative(omega)))
    if not parts:
        return DiffForm.zero(omega.chart, omega.degree)
    total = parts[0]
    for extra in parts[1:]:
        total = total + extra
    return total.simplified()


# ============================================================================
# Charts, substitution, evaluation
# ============================================================================

def top_coefficient(P: _SkewField) -> Expr:
    if P.degree != P.chart.dim:
        raise ValueError(f"degree {P.degree} is not top degree {P.chart.dim}")
    return P.coefficient(tuple(range(P.chart.dim)))


def to_chart(P: _SkewField, chart: Chart) -> _SkewField:
    """Re-express P on a chart listing the same coordinates in another order."""
    if sorted(chart.names) != sorted(P.chart.names):
        raise ChartMismatch(f"{chart} is not a reordering of {P.chart}")
    entries = {P.names_of(k): v for k, v in P.coeffs.items()}
    return type(P).from_names(chart, P.degree, entries)


def substitute_field(P: _SkewField, mapping: Mapping[str, Expr], chart: Optional[Chart] = None) -> _SkewField:
    return type(P)(chart or P.chart, P.degree, {k: substitute(v, mapping) for k, v in P.coeffs.items()})


def evaluate_field(P: _SkewField, point: Mapping[str, float]) -> Dict[Key, float]:
    return {k: evaluate(v, point) for k, v in P.coeffs.items()}


def field_zero_verdict(P: _SkewField, cfg: Optional[RunConfig] = None) -> ZeroVerdict:
    """ProvedZero if every coefficient is; the first NonZero coefficient otherwise."""
    worst: ZeroVerdict = ProvedZero()
    for key in sorted(P.coeffs):
        verdict = is_zero(P.coeffs[key], cfg, variables=P.chart.names)
        if not verdict.is_zero:
            log.debug("Coefficient %s nonzero: %s", P.names_of(key), verdict)
            return verdict
        if isinstance(verdict, NumericallyZero):
            if not isinstance(worst, NumericallyZero) or verdict.max_residual > worst.max_residual:
                worst = verdict
    return worst


if __name__ == "__main__":
    chart = Chart.of("x", "y", "z")
    pi = bivector_field(chart, {("y", "z"): "2+3*y", ("x", "y"): "y*(2+3*y)"})
    print(f"[Schouten] [pi,pi] =\n{schouten(pi, pi)}")
    vol = VolumeForm.standard(chart)
    print(f"[Schouten] dv(pi) =\n{divergence(pi, vol)}")
