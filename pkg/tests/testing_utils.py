import itertools

import numpy as np

from expr_core import Chart, Expr, Var, add, is_const, mul, power, simplify, sub
from multivector import MultiVectorField


def random_polynomial(rng: np.random.Generator, chart: Chart, max_degree: int = 2, max_terms: int = 3) -> Expr:
    """Small integer polynomial in the chart's coordinates."""
    terms = []
    for _ in range(int(rng.integers(1, max_terms + 1))):
        c = int(rng.integers(-2, 3))
        exps = rng.integers(0, max_degree + 1, size=chart.dim)
        terms.append(mul(c, *(power(Var(n), int(k)) for n, k in zip(chart.names, exps))))
    return add(*terms)


def random_field(rng: np.random.Generator, chart: Chart, degree: int, max_degree: int = 2) -> MultiVectorField:
    coeffs = {key: random_polynomial(rng, chart, max_degree)
              for key in itertools.combinations(range(chart.dim), degree)}
    return MultiVectorField(chart, degree, coeffs)


def same_expr(a: Expr, b: Expr) -> bool:
    """Exact equality after canonical expansion."""
    return is_const(simplify(sub(a, b)), 0)
