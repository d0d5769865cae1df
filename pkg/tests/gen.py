"""Deterministic random expression generator shared by property tests.

Constants stay within moderate magnitudes and evaluation points within
[0.3, 3] so reassociation noise stays far below the semantic-preservation
tolerance; domain-violating draws are filtered by the callers.
"""

from __future__ import annotations

import numpy as np

from rediscovery.expr import Apply, Constant, Expression, Operator, Variable

BINARY = (Operator.ADD, Operator.SUB, Operator.MUL, Operator.DIV, Operator.POW)
UNARY = (
    Operator.NEG,
    Operator.EXP,
    Operator.LOG,
    Operator.SQRT,
    Operator.SIN,
    Operator.COS,
    Operator.TANH,
)
POW_EXPONENTS = (2.0, 3.0, 0.5, -1.0, 1.5)


def random_constant(rng: np.random.Generator) -> Constant:
    roll = rng.random()
    if roll < 0.4:
        return Constant(float(rng.integers(1, 6)))
    if roll < 0.7:
        return Constant(round(float(rng.uniform(0.1, 4.0)), 3))
    value = float(rng.uniform(0.05, 20.0))
    if rng.random() < 0.3:
        value = -value
    return Constant(value)


def random_expression(
    rng: np.random.Generator, depth: int, max_variables: int = 4
) -> Expression:
    if depth <= 0 or rng.random() < 0.3:
        if rng.random() < 0.6:
            return Variable(int(rng.integers(1, max_variables + 1)))
        return random_constant(rng)
    roll = rng.random()
    if roll < 0.55:
        op = BINARY[int(rng.integers(4))]  # add/sub/mul/div
        return Apply(op, (
            random_expression(rng, depth - 1, max_variables),
            random_expression(rng, depth - 1, max_variables),
        ))
    if roll < 0.7:
        exponent = Constant(POW_EXPONENTS[int(rng.integers(len(POW_EXPONENTS)))])
        return Apply(Operator.POW, (random_expression(rng, depth - 1, max_variables), exponent))
    op = UNARY[int(rng.integers(len(UNARY)))]
    return Apply(op, (random_expression(rng, depth - 1, max_variables),))


def random_point(rng: np.random.Generator, max_variables: int = 4) -> dict[int, float]:
    return {i: float(rng.uniform(0.3, 3.0)) for i in range(1, max_variables + 1)}


_LONG_OPS = {
    Operator.ADD: lambda a, b: a + b,
    Operator.SUB: lambda a, b: a - b,
    Operator.MUL: lambda a, b: a * b,
    Operator.DIV: lambda a, b: a / b,
    Operator.POW: lambda a, b: np.power(a, b),
    Operator.NEG: lambda a: -a,
    Operator.EXP: np.exp,
    Operator.LOG: np.log,
    Operator.SQRT: np.sqrt,
    Operator.SIN: np.sin,
    Operator.COS: np.cos,
    Operator.TANH: np.tanh,
}


def evaluate_longdouble(e: Expression, point: dict[int, float]):
    """Extended-precision evaluation, the arbiter for preservation checks.

    float64 noise sits at 1e-16 while 80-bit longdouble noise sits at 1e-19,
    so a 1e-12 claim about float64 results can be judged against this.
    """
    if isinstance(e, Constant):
        return np.longdouble(e.value)
    if isinstance(e, Variable):
        return np.longdouble(point[e.index])
    args = []
    for child in e.children:
        value = evaluate_longdouble(child, point)
        if value is None:
            return None
        args.append(value)
    with np.errstate(all="ignore"):
        result = _LONG_OPS[e.op](*args)
    if not np.isfinite(result):
        return None
    return result


def working_scale(e: Expression, point: dict[int, float]) -> float:
    """Largest absolute subtree value during evaluation (1.0 floor).

    Reassociation error is proportional to the magnitudes the arithmetic
    passes through, not to the final result; semantic-preservation checks
    measure deviations against this scale.
    """
    from rediscovery.expr import evaluate

    peak = 1.0
    stack = [e]
    while stack:
        node = stack.pop()
        value = evaluate(node, point)
        if value is not None:
            peak = max(peak, abs(value))
        if isinstance(node, Apply):
            stack.extend(node.children)
    return peak
