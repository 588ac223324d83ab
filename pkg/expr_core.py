# ============================================================================
# expr_core.py
# ============================================================================
"""
Exact scalar expressions over a coordinate chart.

Key Features:
- Immutable expression trees with rational constants (Const, Var, Sum, Prod,
  Neg, Pow, Div, Sin, Cos, Exp) built through folding smart constructors
- Recursive-descent parser for the expression grammar, canonical printer
- Exact partial derivatives, simultaneous substitution, vectorised evaluation
- Expansion into polynomials over coordinates and opaque transcendental atoms
- Tri-state zero test: proved zero, numerically zero, or nonzero with a witness

No trigonometric or exponential identity is ever applied symbolically;
identities such as sin^2 + cos^2 = 1 are only accepted numerically.
"""

import logging
import re
from dataclasses import dataclass
from fractions import Fraction
from functools import cached_property, lru_cache
from typing import Dict, FrozenSet, Iterable, List, Mapping, Optional, Sequence, Tuple, Union

import numpy as np

from run_config import RunConfig

log = logging.getLogger(__name__)

DIVISION_FLOOR = 1e-300


# ============================================================================
# Errors
# ============================================================================

class ToolkitError(Exception):
    """Base class for every error raised by the toolkit."""


class ExprSyntaxError(ToolkitError):
    def __init__(self, reason: str, position: int):
        super().__init__(f"{reason} at position {position}")
        self.reason = reason
        self.position = position


class UnknownIdentifier(ToolkitError):
    def __init__(self, name: str, position: Optional[int] = None):
        where = f" at position {position}" if position is not None else ""
        super().__init__(f"unknown identifier '{name}'{where}")
        self.name = name
        self.position = position


class InvalidChart(ToolkitError):
    pass


class ChartMismatch(ToolkitError):
    pass


class DivisionNearZero(ToolkitError):
    def __init__(self, point: Optional[Dict[str, float]] = None, reason: str = "division by a denominator near zero"):
        super().__init__(f"{reason} at {point}" if point else reason)
        self.point = point


class NotPolynomial(ToolkitError):
    pass


# ============================================================================
# Chart
# ============================================================================

_IDENTIFIER = re.compile(r"^[A-Za-z_][A-Za-z_0-9]*$")
_RESERVED = frozenset({"sin", "cos", "exp"})


@dataclass(frozen=True)
class Chart:
    """Ordered coordinate names of a chart."""

    names: Tuple[str, ...]

    def __post_init__(self):
        names = tuple(self.names)
        object.__setattr__(self, "names", names)
        if not names:
            raise InvalidChart("a chart needs at least one coordinate")
        if len(set(names)) != len(names):
            raise InvalidChart(f"duplicate coordinate names in {names}")
        for name in names:
            if not _IDENTIFIER.match(name) or name in _RESERVED:
                raise InvalidChart(f"invalid coordinate name '{name}'")

    @classmethod
    def of(cls, *names: str) -> "Chart":
        return cls(tuple(names))

    @property
    def dim(self) -> int:
        return len(self.names)

    def index(self, name: str) -> int:
        try:
            return self.names.index(name)
        except ValueError:
            raise UnknownIdentifier(name) from None

    def prepend(self, name: str) -> "Chart":
        return Chart((name,) + self.names)

    def without(self, name: str) -> "Chart":
        self.index(name)
        return Chart(tuple(n for n in self.names if n != name))

    def fresh_name(self, base: str) -> str:
        candidate = base
        while candidate in self.names:
            candidate += "_"
        return candidate

    def __contains__(self, name: object) -> bool:
        return name in self.names

    def __iter__(self):
        return iter(self.names)

    def __len__(self) -> int:
        return len(self.names)

    def __str__(self) -> str:
        return f"chart({', '.join(self.names)})"


# ============================================================================
# Expression nodes
# ============================================================================

Number = Union[int, Fraction]


class Expr:
    """
    Base of the expression tree.

    Nodes compare and hash by their canonical printed text, so two trees are
    equal exactly when they print identically.
    """

    @cached_property
    def key(self) -> str:
        return print_expr(self)

    @cached_property
    def free_variables(self) -> FrozenSet[str]:
        return frozenset().union(*(c.free_variables for c in self.children()))

    def children(self) -> Tuple["Expr", ...]:
        return ()

    def __eq__(self, other: object) -> bool:
        return isinstance(other, Expr) and self.key == other.key

    def __hash__(self) -> int:
        return hash(self.key)

    def __str__(self) -> str:
        return self.key

    def __repr__(self) -> str:
        return f"Expr({self.key!r})"

    def __add__(self, other):
        return add(self, as_expr(other))

    def __radd__(self, other):
        return add(as_expr(other), self)

    def __sub__(self, other):
        return sub(self, as_expr(other))

    def __rsub__(self, other):
        return sub(as_expr(other), self)

    def __mul__(self, other):
        return mul(self, as_expr(other))

    def __rmul__(self, other):
        return mul(as_expr(other), self)

    def __truediv__(self, other):
        return div(self, as_expr(other))

    def __rtruediv__(self, other):
        return div(as_expr(other), self)

    def __neg__(self):
        return neg(self)

    def __pow__(self, exponent: int):
        return power(self, exponent)


@dataclass(frozen=True, eq=False)
class Const(Expr):
    value: Fraction

    def __post_init__(self):
        object.__setattr__(self, "value", Fraction(self.value))

    @cached_property
    def free_variables(self) -> FrozenSet[str]:
        return frozenset()


@dataclass(frozen=True, eq=False)
class Var(Expr):
    name: str

    @cached_property
    def free_variables(self) -> FrozenSet[str]:
        return frozenset((self.name,))


@dataclass(frozen=True, eq=False)
class Sum(Expr):
    terms: Tuple[Expr, ...]

    def children(self):
        return self.terms


@dataclass(frozen=True, eq=False)
class Prod(Expr):
    factors: Tuple[Expr, ...]

    def children(self):
        return self.factors


@dataclass(frozen=True, eq=False)
class Neg(Expr):
    arg: Expr

    def children(self):
        return (self.arg,)


@dataclass(frozen=True, eq=False)
class Pow(Expr):
    base: Expr
    exponent: int

    def children(self):
        return (self.base,)


@dataclass(frozen=True, eq=False)
class Div(Expr):
    num: Expr
    den: Expr

    def children(self):
        return (self.num, self.den)


@dataclass(frozen=True, eq=False)
class Sin(Expr):
    arg: Expr

    def children(self):
        return (self.arg,)


@dataclass(frozen=True, eq=False)
class Cos(Expr):
    arg: Expr

    def children(self):
        return (self.arg,)


@dataclass(frozen=True, eq=False)
class Exp(Expr):
    arg: Expr

    def children(self):
        return (self.arg,)


_FUNCTION_NAMES = {Sin: "sin", Cos: "cos", Exp: "exp"}

ZERO = Const(Fraction(0))
ONE = Const(Fraction(1))


def as_expr(value: Union[Expr, Number]) -> Expr:
    if isinstance(value, Expr):
        return value
    if isinstance(value, (int, Fraction)) and not isinstance(value, bool):
        return Const(Fraction(value))
    raise TypeError(f"cannot convert {type(value).__name__} to an exact expression")


def is_const(e: Expr, value: Optional[Number] = None) -> bool:
    return isinstance(e, Const) and (value is None or e.value == value)


# ============================================================================
# Smart constructors
# ============================================================================

def var(name: str) -> Var:
    return Var(name)


def const(value: Number) -> Const:
    return Const(Fraction(value))


def add(*terms: Union[Expr, Number]) -> Expr:
    """Flattens nested sums, merges constants at the first constant's slot, drops zeros."""
    flat: List[Expr] = []
    for t in terms:
        t = as_expr(t)
        flat.extend(t.terms if isinstance(t, Sum) else (t,))

    constant = sum((t.value for t in flat if isinstance(t, Const)), Fraction(0))
    out: List[Expr] = []
    placed = False
    for t in flat:
        if isinstance(t, Const):
            if not placed and constant != 0:
                out.append(Const(constant))
            placed = True
            continue
        out.append(t)

    if not out:
        return ZERO
    if len(out) == 1:
        return out[0]
    return Sum(tuple(out))


def _gather_factors(e: Expr, out: List[Expr]) -> Fraction:
    if isinstance(e, Const):
        return e.value
    if isinstance(e, Neg):
        return -_gather_factors(e.arg, out)
    if isinstance(e, Prod):
        coeff = Fraction(1)
        for f in e.factors:
            coeff *= _gather_factors(f, out)
        return coeff
    out.append(e)
    return Fraction(1)


def mul(*factors: Union[Expr, Number]) -> Expr:
    """Flattens products; signs and constants collapse into one leading constant."""
    coeff = Fraction(1)
    out: List[Expr] = []
    for f in factors:
        coeff *= _gather_factors(as_expr(f), out)
        if coeff == 0:
            return ZERO

    if not out:
        return Const(coeff)
    body = out[0] if len(out) == 1 else Prod(tuple(out))
    if coeff == 1:
        return body
    if coeff == -1:
        return Neg(body)
    return Prod((Const(coeff),) + tuple(out))


def neg(e: Union[Expr, Number]) -> Expr:
    return mul(Const(Fraction(-1)), e)


def sub(a: Union[Expr, Number], b: Union[Expr, Number]) -> Expr:
    return add(a, neg(b))


def _is_negative_form(e: Expr) -> bool:
    if isinstance(e, Neg):
        return True
    if isinstance(e, Const):
        return e.value < 0
    return isinstance(e, Prod) and isinstance(e.factors[0], Const) and e.factors[0].value < 0


def power(base: Union[Expr, Number], exponent: int) -> Expr:
    base = as_expr(base)
    exponent = int(exponent)
    if exponent == 0:
        return ONE
    if exponent == 1:
        return base
    if isinstance(base, Const):
        if base.value == 0 and exponent < 0:
            raise DivisionNearZero(reason="negative power of the literal zero")
        return Const(base.value ** exponent)
    if exponent < 0:
        return div(ONE, power(base, -exponent))
    if isinstance(base, Pow):
        return power(base.base, base.exponent * exponent)
    if isinstance(base, Neg):
        inner = power(base.arg, exponent)
        return neg(inner) if exponent % 2 else inner
    return Pow(base, exponent)


def div(num: Union[Expr, Number], den: Union[Expr, Number]) -> Expr:
    num, den = as_expr(num), as_expr(den)
    if isinstance(den, Const):
        if den.value == 0:
            raise DivisionNearZero(reason="division by the literal zero")
        return mul(Const(1 / den.value), num)
    if is_const(num, 0):
        return ZERO
    if _is_negative_form(den):
        return neg(div(num, neg(den)))
    if _is_negative_form(num):
        return neg(div(neg(num), den))
    return Div(num, den)


def sin(arg: Union[Expr, Number]) -> Expr:
    arg = as_expr(arg)
    return ZERO if is_const(arg, 0) else Sin(arg)


def cos(arg: Union[Expr, Number]) -> Expr:
    arg = as_expr(arg)
    return ONE if is_const(arg, 0) else Cos(arg)


def exp(arg: Union[Expr, Number]) -> Expr:
    arg = as_expr(arg)
    return ONE if is_const(arg, 0) else Exp(arg)


_FUNCTION_CONSTRUCTORS = {Sin: sin, Cos: cos, Exp: exp}


# ============================================================================
# Printing
# ============================================================================

def _print_const(value: Fraction) -> str:
    if value.denominator == 1:
        return str(value.numerator)
    return f"{value.numerator}/{value.denominator}"


def _print_factor(e: Expr) -> str:
    text = print_expr(e)
    return f"({text})" if isinstance(e, (Sum, Div)) else text


def _print_term_magnitude(e: Expr) -> str:
    """Text of -e for a term in negative form."""
    if isinstance(e, Neg):
        return print_expr(e.arg) if not isinstance(e.arg, Sum) else f"({print_expr(e.arg)})"
    if isinstance(e, Const):
        return _print_const(-e.value)
    lead = -e.factors[0].value
    rest = "*".join(_print_factor(f) for f in e.factors[1:])
    return f"{_print_const(lead)}*{rest}"


def print_expr(e: Expr) -> str:
    """Canonical text in the parse grammar; parse(print_expr(e)) reproduces e."""
    if isinstance(e, Const):
        return _print_const(e.value)
    if isinstance(e, Var):
        return e.name
    if isinstance(e, Sum):
        parts = []
        for i, t in enumerate(e.terms):
            if _is_negative_form(t):
                parts.append("-" + _print_term_magnitude(t))
            else:
                parts.append(("+" if i else "") + print_expr(t))
        return "".join(parts)
    if isinstance(e, Prod):
        return "*".join(_print_factor(f) for f in e.factors)
    if isinstance(e, Neg):
        inner = print_expr(e.arg)
        return f"-({inner})" if isinstance(e.arg, Sum) else f"-{inner}"
    if isinstance(e, Pow):
        b = e.base
        bare = isinstance(b, (Var, Sin, Cos, Exp)) or (isinstance(b, Const) and b.value >= 0 and b.value.denominator == 1)
        base = print_expr(b) if bare else f"({print_expr(b)})"
        return f"{base}^{e.exponent}"
    if isinstance(e, Div):
        num = print_expr(e.num)
        if isinstance(e.num, (Sum, Div)):
            num = f"({num})"
        den = print_expr(e.den)
        if isinstance(e.den, (Sum, Prod, Div, Neg)):
            den = f"({den})"
        return f"{num}/{den}"
    if isinstance(e, (Sin, Cos, Exp)):
        return f"{_FUNCTION_NAMES[type(e)]}({print_expr(e.arg)})"
    raise TypeError(f"unknown expression node {type(e).__name__}")


# ============================================================================
# Parsing
# ============================================================================

_TOKEN = re.compile(r"\s*(?:(?P<num>\d+(?:\.\d+)?)|(?P<ident>[A-Za-z_][A-Za-z_0-9]*)|(?P<op>\S))")


class _Parser:
    """
    expr   := term (('+'|'-') term)*
    term   := factor (('*'|'/') factor)*
    factor := base ('^' integer)?
    base   := number | ident | '(' expr ')' | func '(' expr ')' | '-' factor
    """

    def __init__(self, text: str, chart: Optional[Chart]):
        self.text = text
        self.chart = chart
        self.tokens: List[Tuple[str, str, int]] = []
        pos = 0
        while pos < len(text):
            m = _TOKEN.match(text, pos)
            if not m or m.lastgroup is None:
                break
            self.tokens.append((m.lastgroup, m.group(m.lastgroup), m.start(m.lastgroup)))
            pos = m.end()
        self.i = 0

    def peek(self) -> Optional[Tuple[str, str, int]]:
        return self.tokens[self.i] if self.i < len(self.tokens) else None

    def next(self) -> Tuple[str, str, int]:
        tok = self.peek()
        if tok is None:
            raise ExprSyntaxError("unexpected end of input", len(self.text))
        self.i += 1
        return tok

    def expect(self, op: str) -> None:
        kind, value, pos = self.next()
        if kind != "op" or value != op:
            raise ExprSyntaxError(f"expected '{op}', found '{value}'", pos)

    def at_op(self, *ops: str) -> bool:
        tok = self.peek()
        return tok is not None and tok[0] == "op" and tok[1] in ops

    def parse(self) -> Expr:
        if not self.tokens:
            raise ExprSyntaxError("empty expression", 0)
        e = self.expr()
        tok = self.peek()
        if tok is not None:
            raise ExprSyntaxError(f"unexpected '{tok[1]}'", tok[2])
        return e

    def expr(self) -> Expr:
        e = self.term()
        while self.at_op("+", "-"):
            op = self.next()[1]
            rhs = self.term()
            e = add(e, rhs) if op == "+" else sub(e, rhs)
        return e

    def term(self) -> Expr:
        e = self.factor()
        while self.at_op("*", "/"):
            kind, op, pos = self.next()
            rhs = self.factor()
            if op == "*":
                e = mul(e, rhs)
            else:
                if is_const(rhs, 0):
                    raise ExprSyntaxError("division by the literal zero", pos)
                e = div(e, rhs)
        return e

    def factor(self) -> Expr:
        b = self.base()
        if self.at_op("^"):
            self.next()
            sign = 1
            if self.at_op("-"):
                self.next()
                sign = -1
            kind, value, pos = self.next()
            if kind != "num" or "." in value:
                raise ExprSyntaxError("exponent must be an integer", pos)
            if is_const(b, 0) and sign < 0:
                raise ExprSyntaxError("negative power of zero", pos)
            b = power(b, sign * int(value))
        return b

    def base(self) -> Expr:
        kind, value, pos = self.next()
        if kind == "num":
            return Const(Fraction(value))
        if kind == "ident":
            if value in _RESERVED:
                self.expect("(")
                arg = self.expr()
                self.expect(")")
                return {"sin": sin, "cos": cos, "exp": exp}[value](arg)
            if self.chart is not None and value not in self.chart:
                raise UnknownIdentifier(value, pos)
            return Var(value)
        if value == "(":
            e = self.expr()
            self.expect(")")
            return e
        if value == "-":
            return neg(self.factor())
        raise ExprSyntaxError(f"unexpected '{value}'", pos)


def parse_expr(text: str, chart: Optional[Chart] = None) -> Expr:
    """Parse `text`; identifiers must be coordinates of `chart` when one is given."""
    return _Parser(text, chart).parse()


# ============================================================================
# Calculus
# ============================================================================

def differentiate(e: Expr, v: str) -> Expr:
    """Exact partial derivative d e / d v."""
    if v not in e.free_variables:
        return ZERO
    if isinstance(e, Var):
        return ONE
    if isinstance(e, Sum):
        return add(*(differentiate(t, v) for t in e.terms))
    if isinstance(e, Prod):
        pieces = []
        for i, f in enumerate(e.factors):
            df = differentiate(f, v)
            if not is_const(df, 0):
                pieces.append(mul(*e.factors[:i], df, *e.factors[i + 1:]))
        return add(*pieces)
    if isinstance(e, Neg):
        return neg(differentiate(e.arg, v))
    if isinstance(e, Pow):
        return mul(Const(Fraction(e.exponent)), power(e.base, e.exponent - 1), differentiate(e.base, v))
    if isinstance(e, Div):
        dn = differentiate(e.num, v)
        dd = differentiate(e.den, v)
        if is_const(dd, 0):
            return div(dn, e.den)
        return div(sub(mul(dn, e.den), mul(e.num, dd)), power(e.den, 2))
    if isinstance(e, Sin):
        return mul(differentiate(e.arg, v), cos(e.arg))
    if isinstance(e, Cos):
        return neg(mul(differentiate(e.arg, v), sin(e.arg)))
    if isinstance(e, Exp):
        return mul(differentiate(e.arg, v), e)
    raise TypeError(f"unknown expression node {type(e).__name__}")


def substitute(e: Expr, mapping: Mapping[str, Union[Expr, Number]]) -> Expr:
    """Simultaneous substitution of coordinates by expressions."""
    if not mapping or not (e.free_variables & set(mapping)):
        return e
    if isinstance(e, Var):
        return as_expr(mapping[e.name])
    if isinstance(e, Sum):
        return add(*(substitute(t, mapping) for t in e.terms))
    if isinstance(e, Prod):
        return mul(*(substitute(f, mapping) for f in e.factors))
    if isinstance(e, Neg):
        return neg(substitute(e.arg, mapping))
    if isinstance(e, Pow):
        return power(substitute(e.base, mapping), e.exponent)
    if isinstance(e, Div):
        return div(substitute(e.num, mapping), substitute(e.den, mapping))
    if isinstance(e, (Sin, Cos, Exp)):
        return _FUNCTION_CONSTRUCTORS[type(e)](substitute(e.arg, mapping))
    raise TypeError(f"unknown expression node {type(e).__name__}")


def free_variables(e: Expr) -> FrozenSet[str]:
    return e.free_variables


# ============================================================================
# Evaluation
# ============================================================================

Point = Mapping[str, Union[float, np.ndarray]]


def _bad_point(point: Point, mask) -> Dict[str, float]:
    if np.ndim(mask) == 0:
        return {k: float(np.asarray(v).reshape(-1)[0]) for k, v in point.items()}
    idx = int(np.argmax(mask))
    return {k: float(np.asarray(v).reshape(-1)[idx]) if np.ndim(v) else float(v) for k, v in point.items()}


def _eval(e: Expr, point: Point):
    if isinstance(e, Const):
        return float(e.value)
    if isinstance(e, Var):
        try:
            return point[e.name]
        except KeyError:
            raise UnknownIdentifier(e.name) from None
    if isinstance(e, Sum):
        total = 0.0
        for t in e.terms:
            total = total + _eval(t, point)
        return total
    if isinstance(e, Prod):
        result = 1.0
        for f in e.factors:
            result = result * _eval(f, point)
        return result
    if isinstance(e, Neg):
        return -_eval(e.arg, point)
    if isinstance(e, Pow):
        return _eval(e.base, point) ** e.exponent
    if isinstance(e, Div):
        num = _eval(e.num, point)
        den = _eval(e.den, point)
        small = np.abs(den) < DIVISION_FLOOR
        if np.any(small):
            raise DivisionNearZero(_bad_point(point, small))
        return num / den
    if isinstance(e, Sin):
        return np.sin(_eval(e.arg, point))
    if isinstance(e, Cos):
        return np.cos(_eval(e.arg, point))
    if isinstance(e, Exp):
        return np.exp(_eval(e.arg, point))
    raise TypeError(f"unknown expression node {type(e).__name__}")


def evaluate(e: Expr, point: Point):
    """
    IEEE evaluation in tree order. Values in `point` may be floats or equally
    shaped numpy arrays; the result has the matching shape.
    """
    value = _eval(e, point)
    return float(value) if np.ndim(value) == 0 else np.asarray(value, dtype=float)


# ============================================================================
# Expansion over atoms
# ============================================================================
#
# A monomial is a sorted tuple of (atom, exponent). Atoms are coordinates,
# sin/cos/exp of canonical arguments (negative exponents allowed for both), and
# reciprocals 1/D of canonical multi-term denominators D (positive exponents).

Monomial = Tuple[Tuple[Expr, int], ...]
_Poly = Dict[Monomial, Fraction]

_ATOM_RANK = {Var: 0, Sin: 1, Cos: 1, Exp: 1, Div: 2}


def _atom_order(atom: Expr) -> Tuple[int, str]:
    return (_ATOM_RANK[type(atom)], atom.key)


def _mono_mul(m1: Monomial, m2: Monomial) -> Monomial:
    if not m1:
        return m2
    if not m2:
        return m1
    exps: Dict[Expr, int] = dict(m1)
    for atom, k in m2:
        exps[atom] = exps.get(atom, 0) + k
    return tuple(sorted(((a, k) for a, k in exps.items() if k != 0), key=lambda ak: _atom_order(ak[0])))


def _poly_add_into(acc: _Poly, other: _Poly, scale: Fraction = Fraction(1)) -> None:
    for m, c in other.items():
        value = acc.get(m, Fraction(0)) + c * scale
        if value:
            acc[m] = value
        else:
            acc.pop(m, None)


def _poly_mul(p: _Poly, q: _Poly) -> _Poly:
    out: _Poly = {}
    for m1, c1 in p.items():
        for m2, c2 in q.items():
            m = _mono_mul(m1, m2)
            value = out.get(m, Fraction(0)) + c1 * c2
            if value:
                out[m] = value
            else:
                out.pop(m, None)
    return out


def _poly_pow(p: _Poly, k: int) -> _Poly:
    result: _Poly = {(): Fraction(1)}
    for _ in range(k):
        result = _poly_mul(result, p)
    return result


def _canonical_function(e: Expr) -> Expr:
    return _FUNCTION_CONSTRUCTORS[type(e)](simplify(e.arg))


def _expand_node(e: Expr) -> _Poly:
    if isinstance(e, Const):
        return {(): e.value} if e.value else {}
    if isinstance(e, Var):
        return {((e, 1),): Fraction(1)}
    if isinstance(e, Sum):
        acc: _Poly = {}
        for t in e.terms:
            _poly_add_into(acc, _expand(t))
        return acc
    if isinstance(e, Prod):
        acc = {(): Fraction(1)}
        for f in e.factors:
            acc = _poly_mul(acc, _expand(f))
            if not acc:
                break
        return acc
    if isinstance(e, Neg):
        return {m: -c for m, c in _expand(e.arg).items()}
    if isinstance(e, Pow):
        if e.exponent < 0:
            return _poly_pow(_reciprocal(e.base), -e.exponent)
        return _poly_pow(_expand(e.base), e.exponent)
    if isinstance(e, Div):
        return _poly_mul(_expand(e.num), _reciprocal(e.den))
    if isinstance(e, (Sin, Cos, Exp)):
        canon = _canonical_function(e)
        if type(canon) is not type(e):
            return _expand(canon)
        return {((canon, 1),): Fraction(1)}
    raise TypeError(f"unknown expression node {type(e).__name__}")


def _reciprocal(d: Expr) -> _Poly:
    if isinstance(d, Const):
        if d.value == 0:
            raise DivisionNearZero(reason="division by the literal zero")
        return {(): 1 / d.value}
    if isinstance(d, Var):
        return {((d, -1),): Fraction(1)}
    if isinstance(d, Neg):
        return {m: -c for m, c in _reciprocal(d.arg).items()}
    if isinstance(d, Prod):
        acc: _Poly = {(): Fraction(1)}
        for f in d.factors:
            acc = _poly_mul(acc, _reciprocal(f))
        return acc
    if isinstance(d, Pow):
        if d.exponent < 0:
            return _poly_pow(_expand(d.base), -d.exponent)
        return _poly_pow(_reciprocal(d.base), d.exponent)
    if isinstance(d, Div):
        return _poly_mul(_expand(d.den), _reciprocal(d.num))
    if isinstance(d, (Sin, Cos, Exp)):
        canon = _canonical_function(d)
        if type(canon) is not type(d):
            return _reciprocal(canon)
        return {((canon, -1),): Fraction(1)}

    p = _expand(d)
    if not p:
        raise DivisionNearZero(reason=f"denominator {d} simplifies to zero")
    if len(p) == 1:
        (m, c), = p.items()
        acc = {(): 1 / c}
        for atom, k in m:
            if isinstance(atom, Div):
                acc = _poly_mul(acc, _poly_pow(_expand(atom.den), k))
            else:
                acc = _poly_mul(acc, {((atom, -k),): Fraction(1)})
        return acc

    ordered = _sorted_terms(p)
    lead = ordered[0][1]
    canon_den = _rebuild({m: c / lead for m, c in p.items()})
    atom = Div(ONE, canon_den)
    return {((atom, 1),): 1 / lead}


@lru_cache(maxsize=1 << 16)
def _expand_frozen(e: Expr) -> Tuple[Tuple[Monomial, Fraction], ...]:
    return tuple(_expand_node(e).items())


def _expand(e: Expr) -> _Poly:
    return dict(_expand_frozen(e))


def _monomial_sort_key(m: Monomial):
    degree = sum(k for a, k in m if not isinstance(a, Div))
    return (-degree, tuple((_atom_order(a), -k) for a, k in m))


def _sorted_terms(p: _Poly) -> List[Tuple[Monomial, Fraction]]:
    return sorted(p.items(), key=lambda mc: _monomial_sort_key(mc[0]))


def _rebuild(p: _Poly) -> Expr:
    terms = []
    for m, c in _sorted_terms(p):
        num: List[Expr] = []
        den: List[Expr] = []
        for atom, k in m:
            if isinstance(atom, Div):
                den.append(power(atom.den, k))
            elif k > 0:
                num.append(power(atom, k))
            else:
                den.append(power(atom, -k))
        term = mul(Const(c), *num)
        terms.append(div(term, mul(*den)) if den else term)
    return add(*terms)


@lru_cache(maxsize=1 << 14)
def simplify(e: Expr) -> Expr:
    """Canonical expanded form; ZERO exactly when the expansion cancels."""
    return _rebuild(_expand(e))


# ============================================================================
# Polynomials
# ============================================================================

@dataclass(frozen=True)
class Polynomial:
    """Sparse polynomial: exponent vector over `variables` -> rational coefficient."""

    variables: Tuple[str, ...]
    terms: Mapping[Tuple[int, ...], Fraction]

    def __hash__(self) -> int:
        return hash((self.variables, tuple(sorted(self.terms.items()))))

    @property
    def is_zero(self) -> bool:
        return not self.terms

    def total_degree(self) -> int:
        return max((sum(e) for e in self.terms), default=0)

    def to_expr(self) -> Expr:
        pieces = []
        for exps, c in sorted(self.terms.items(), key=lambda ec: (-sum(ec[0]), ec[0])):
            pieces.append(mul(Const(c), *(power(Var(v), k) for v, k in zip(self.variables, exps) if k)))
        return add(*pieces)


def normalize_polynomial(e: Expr) -> Polynomial:
    """Expanded polynomial form; raises NotPolynomial for transcendental or rational input."""
    p = _expand(e)
    names = set()
    for m in p:
        for atom, k in m:
            if not isinstance(atom, Var) or k < 0:
                raise NotPolynomial(f"{e} is not a polynomial in its coordinates (atom {atom})")
            names.add(atom.name)
    variables = tuple(sorted(names))
    position = {v: i for i, v in enumerate(variables)}
    terms: Dict[Tuple[int, ...], Fraction] = {}
    for m, c in p.items():
        exps = [0] * len(variables)
        for atom, k in m:
            exps[position[atom.name]] = k
        terms[tuple(exps)] = c
    return Polynomial(variables, terms)


# ============================================================================
# Zero test
# ============================================================================

@dataclass(frozen=True)
class ZeroVerdict:
    """Outcome of a zero test. Subclasses carry the evidence."""

    @property
    def is_zero(self) -> bool:
        return True

    @property
    def label(self) -> str:
        raise NotImplementedError

    @property
    def residual(self) -> float:
        return 0.0

    @property
    def witness(self) -> Optional[Dict[str, float]]:
        return None

    def to_dict(self) -> Dict[str, object]:
        return {"verdict": self.label, "residual": self.residual, "witness": self.witness}


@dataclass(frozen=True)
class ProvedZero(ZeroVerdict):
    @property
    def label(self) -> str:
        return "proved_zero"


@dataclass(frozen=True)
class NumericallyZero(ZeroVerdict):
    samples: int
    max_residual: float

    @property
    def label(self) -> str:
        return "numerically_zero"

    @property
    def residual(self) -> float:
        return self.max_residual


@dataclass(frozen=True)
class NonZero(ZeroVerdict):
    point: Dict[str, float]
    value: float

    @property
    def is_zero(self) -> bool:
        return False

    @property
    def label(self) -> str:
        return "nonzero"

    @property
    def residual(self) -> float:
        return abs(self.value)

    @property
    def witness(self) -> Optional[Dict[str, float]]:
        return dict(self.point)


def _abs_or_zero(e: Expr, points: Point, n: int) -> np.ndarray:
    try:
        return np.abs(np.broadcast_to(evaluate(e, points), (n,)))
    except DivisionNearZero:
        return np.zeros(n)


def sample_points(
    variables: Iterable[str],
    cfg: RunConfig,
    denominators: Sequence[Expr] = (),
    offset: int = 0,
) -> Dict[str, np.ndarray]:
    """
    cfg.samples points drawn uniformly from [-box, box] per variable. Rows where
    some denominator falls below cfg.denominator_floor are redrawn.
    """
    names = sorted(set(variables))
    rng = cfg.rng(offset)
    n = cfg.samples
    draws = rng.uniform(-cfg.box, cfg.box, size=(n, len(names)))
    points = {name: draws[:, i].copy() for i, name in enumerate(names)}
    if not denominators or not names:
        return points

    for attempt in range(cfg.max_redraws):
        bad = np.zeros(n, dtype=bool)
        for den in denominators:
            bad |= _abs_or_zero(den, points, n) < cfg.denominator_floor
        if not bad.any():
            return points
        redraw = rng.uniform(-cfg.box, cfg.box, size=(int(bad.sum()), len(names)))
        for i, name in enumerate(names):
            points[name][bad] = redraw[:, i]
    log.warning("Some sample points stay near a denominator zero after %d redraws", cfg.max_redraws)
    return points


def _denominators(p: _Poly) -> List[Expr]:
    dens = set()
    for m in p:
        for atom, k in m:
            if isinstance(atom, Div):
                dens.add(atom.den)
            elif k < 0:
                dens.add(atom)
    return sorted(dens, key=lambda d: d.key)


def denominators_of(e: Expr) -> List[Expr]:
    """Canonical denominators of e's expansion, for the sampler's redraw rule."""
    return _denominators(_expand(e))


def sample_values(e: Expr, variables: Iterable[str], cfg: RunConfig, offset: int = 0) -> Tuple[Dict[str, np.ndarray], np.ndarray]:
    """Seeded sample points over `variables` and the values of e there."""
    points = sample_points(variables, cfg, denominators_of(e), offset)
    values = np.broadcast_to(evaluate(e, points), (cfg.samples,))
    return points, np.asarray(values, dtype=float)


def evaluate_terms(p: _Poly, points: Point, n: int) -> Tuple[np.ndarray, np.ndarray]:
    """Value and magnitude bound (sum of absolute term values) of an expansion."""
    cache: Dict[Expr, np.ndarray] = {}
    value = np.zeros(n)
    bound = np.zeros(n)
    for m, c in p.items():
        term = np.full(n, float(c))
        for atom, k in m:
            if atom not in cache:
                cache[atom] = np.broadcast_to(evaluate(atom, points), (n,))
            term = term * cache[atom] ** k
        value += term
        bound += np.abs(term)
    return value, bound


def is_zero(e: Expr, cfg: Optional[RunConfig] = None, offset: int = 0,
            variables: Iterable[str] = ()) -> ZeroVerdict:
    """
    ProvedZero when the expansion cancels exactly. Otherwise the canonical form
    is sampled and NumericallyZero is returned when every |value| stays within
    tol * (1 + magnitude bound); the first failing point gives NonZero.

    A nonzero constant is NonZero at the first sample point over `variables`
    (usually the chart coordinates), so the witness always names a point.
    """
    cfg = cfg or RunConfig()
    p = _expand(e)
    if not p:
        return ProvedZero()
    if list(p) == [()]:
        names = sorted(set(variables) | set(e.free_variables))
        first = {name: float(column[0]) for name, column in sample_points(names, cfg, offset=offset).items()}
        return NonZero(first, float(p[()]))

    n = cfg.samples
    sampled = sorted(e.free_variables)
    points = sample_points(sampled, cfg, _denominators(p), offset)
    value, bound = evaluate_terms(p, points, n)
    residual = np.abs(value)
    failing = residual > cfg.tol * (1.0 + bound)
    if failing.any():
        idx = int(np.argmax(failing))
        witness = {name: float(points[name][idx]) for name in sampled}
        log.debug("Nonzero at %s: %g", witness, value[idx])
        return NonZero(witness, float(value[idx]))
    return NumericallyZero(n, float(residual.max()))


if __name__ == "__main__":
    chart = Chart.of("x", "y", "z")
    e = parse_expr("(x+y)^2 - x^2 - 2*x*y - y^2", chart)
    print(f"[Expr] {e} -> {is_zero(e).label}")
    u = parse_expr("sin(x)^2 + cos(x)^2 - 1", chart)
    print(f"[Expr] {u} -> {is_zero(u)}")
    s = parse_expr("sin(x^3*y)", chart)
    print(f"[Expr] d/dx {s} = {differentiate(s, 'x')}")
