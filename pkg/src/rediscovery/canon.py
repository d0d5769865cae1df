"""Deterministic simplification, significant-digit rounding, canonical strings.

List matching is string equality on canonical forms, so everything here is
about *consistency*, not algebraic power: a small confluent rule set applied
to a fixed point, followed by decimal significant-digit rounding of every
constant.  Residual form diversity is absorbed by the curated lists, which is
the whole point of the list mechanism.
"""

from __future__ import annotations

import decimal
import math
from dataclasses import dataclass
from functools import reduce
from typing import Optional

from .expr import (
    Apply,
    Constant,
    Expression,
    Operator,
    Variable,
    parse,
    print_canonical,
)

__all__ = [
    "CanonConfig",
    "DEFAULT_CANON_CONFIG",
    "simplify",
    "round_constants",
    "canonicalize",
]


@dataclass(frozen=True)
class CanonConfig:
    """Knobs of the canonicalization pipeline.

    ``significant_digits`` is the rounding width applied to every constant of
    a candidate before list lookup.  ``exp_log_identities`` controls the one
    transcendental rewrite pair (exp∘log and log∘exp collapse); the default
    search configuration forbids those nestings anyway, so enabling it only
    normalises forms the engines could not have produced.
    """

    significant_digits: int = 5
    fold_constants: bool = True
    sort_commutative: bool = True
    exp_log_identities: bool = True

    def __post_init__(self) -> None:
        if self.significant_digits < 1:
            raise ValueError("significant_digits must be >= 1")


DEFAULT_CANON_CONFIG = CanonConfig()

_MAX_PASSES = 50


# ---------------------------------------------------------------------------
# rounding
# ---------------------------------------------------------------------------

def round_constants(e: Expression, n: int) -> Expression:
    """Round every constant to ``n`` significant decimal digits.

    Rounding is half-even on the decimal significand of the exact binary
    value, so it matches what a careful human does with a printed constant.
    Structure is untouched.
    """
    if n < 1:
        raise ValueError("significant digits must be >= 1")
    if isinstance(e, Constant):
        return Constant(_round_value(e.value, n))
    if isinstance(e, Variable):
        return e
    return Apply(e.op, tuple(round_constants(c, n) for c in e.children))


def _round_value(value: float, n: int) -> float:
    if value == 0.0:
        return 0.0
    ctx = decimal.Context(prec=n, rounding=decimal.ROUND_HALF_EVEN)
    return float(ctx.create_decimal(decimal.Decimal(value)))


# ---------------------------------------------------------------------------
# simplification
# ---------------------------------------------------------------------------

def simplify(e: Expression, cfg: CanonConfig = DEFAULT_CANON_CONFIG) -> Expression:
    """Rewrite ``e`` to the fixed point of the rule set.

    Rules: constant folding over exact subtrees, identity elimination,
    neg/neg and sub-of-neg normalisation, flattening and deterministic
    ordering of commutative chains with like-term collection, constant-
    exponent pow merging, and division-by-constant to multiplication where
    the reciprocal inverts exactly.  Rules that would fold a division by
    zero simply do not fire.  Equal inputs give identical outputs.
    """
    current = e
    for _ in range(_MAX_PASSES):
        rewritten = _simplify_once(current, cfg)
        if rewritten == current:
            return rewritten
        current = rewritten
    return current


def canonicalize(e: Expression, cfg: CanonConfig = DEFAULT_CANON_CONFIG) -> str:
    """simplify → round constants → print, iterated to a stable string.

    A single round-last pass is almost always enough, but rounding can land a
    constant exactly on an identity element (1.0000004·x rounds to 1·x);
    iterating keeps canonicalize idempotent on its own output.
    """
    current = e
    last: Optional[str] = None
    for _ in range(_MAX_PASSES):
        current = round_constants(simplify(current, cfg), cfg.significant_digits)
        rendered = print_canonical(current)
        if rendered == last:
            return rendered
        last = rendered
    return print_canonical(current)


def canonicalize_str(text: str, cfg: CanonConfig = DEFAULT_CANON_CONFIG) -> str:
    """Convenience wrapper: parse then canonicalize."""
    return canonicalize(parse(text), cfg)


def _simplify_once(e: Expression, cfg: CanonConfig) -> Expression:
    if isinstance(e, (Constant, Variable)):
        return e
    children = tuple(_simplify_once(c, cfg) for c in e.children)
    node = Apply(e.op, children)
    return _rewrite(node, cfg)


def _rewrite(node: Apply, cfg: CanonConfig) -> Expression:
    op = node.op

    if cfg.fold_constants and all(isinstance(c, Constant) for c in node.children):
        folded = _fold(node)
        if folded is not None:
            return folded

    if op is Operator.NEG:
        child = node.children[0]
        if isinstance(child, Constant):
            return Constant(-child.value)
        if isinstance(child, Apply) and child.op is Operator.NEG:
            return child.children[0]
        return node

    if op is Operator.SUB:
        left, right = node.children
        if isinstance(right, Apply) and right.op is Operator.NEG:
            return Apply(Operator.ADD, (left, right.children[0]))
        if isinstance(right, Constant) and right.value == 0.0:
            return left
        return node

    if op is Operator.POW:
        return _rewrite_pow(node, cfg)

    if op is Operator.DIV:
        left, right = node.children
        if isinstance(right, Constant) and right.value == 1.0:
            return left
        if isinstance(right, Constant) and _exactly_invertible(right.value):
            return Apply(Operator.MUL, (left, Constant(1.0 / right.value)))
        return node

    if op in (Operator.ADD, Operator.MUL):
        return _rewrite_chain(node, cfg)

    if cfg.exp_log_identities and op in (Operator.EXP, Operator.LOG):
        child = node.children[0]
        if isinstance(child, Apply):
            if op is Operator.EXP and child.op is Operator.LOG:
                return child.children[0]
            if op is Operator.LOG and child.op is Operator.EXP:
                return child.children[0]
        return node

    return node


def _fold(node: Apply) -> Optional[Expression]:
    from .expr import evaluate  # local import avoids a cycle at module load

    value = evaluate(node, {})
    if value is None:
        return None  # domain violation stays symbolic (e.g. division by zero)
    return Constant(value)


def _exactly_invertible(c: float) -> bool:
    if c == 0.0 or not math.isfinite(c):
        return False
    inv = 1.0 / c
    return inv != 0.0 and math.isfinite(inv) and 1.0 / inv == c


def _rewrite_pow(node: Apply, cfg: CanonConfig) -> Expression:
    base, exponent = node.children
    if isinstance(exponent, Constant) and exponent.value == 1.0:
        return base
    if (
        isinstance(base, Apply)
        and base.op is Operator.POW
        and isinstance(base.children[1], Constant)
        and isinstance(exponent, Constant)
    ):
        a = base.children[1].value
        b = exponent.value
        product = a * b
        if math.isfinite(product) and not _pow_merge_changes_sign(a, product):
            return _rewrite_pow(
                Apply(Operator.POW, (base.children[0], Constant(product))), cfg
            )
    return node


def _pow_merge_changes_sign(inner: float, merged: float) -> bool:
    # (x^a)^b == x^(a*b) except when a is even (erasing x's sign) while a*b is
    # odd, e.g. (x^2)^1.5 vs x^3 on x < 0.
    inner_even = inner == int(inner) and int(inner) % 2 == 0
    merged_odd = merged == int(merged) and int(merged) % 2 == 1
    return inner_even and merged_odd


def _flatten(node: Expression, op: Operator) -> list[Expression]:
    if isinstance(node, Apply) and node.op is op:
        out: list[Expression] = []
        for child in node.children:
            out.extend(_flatten(child, op))
        return out
    return [node]


def _sort_key(e: Expression) -> tuple[int, float, str]:
    # Total order: constants by value, then variables by index, then compound
    # subtrees by canonical string.
    if isinstance(e, Constant):
        return (0, e.value, "")
    if isinstance(e, Variable):
        return (1, float(e.index), "")
    return (2, 0.0, print_canonical(e))


def _rebinarize(op: Operator, items: list[Expression]) -> Expression:
    return reduce(lambda a, b: Apply(op, (a, b)), items)


def _rewrite_chain(node: Apply, cfg: CanonConfig) -> Expression:
    items = _flatten(node, node.op)
    if node.op is Operator.MUL:
        return _rebuild_mul(items, cfg)
    return _rebuild_add(items, cfg)


def _rebuild_mul(items: list[Expression], cfg: CanonConfig) -> Expression:
    if not cfg.fold_constants:
        ordered = sorted(items, key=_sort_key) if cfg.sort_commutative else items
        return _rebinarize(Operator.MUL, ordered)
    coeff = 1.0
    rest: list[Expression] = []
    for item in items:
        if isinstance(item, Constant):
            coeff *= item.value
        else:
            rest.append(item)
    if not math.isfinite(coeff):
        # Overflowing coefficient: leave the chain alone rather than fold junk.
        ordered = sorted(items, key=_sort_key) if cfg.sort_commutative else items
        return _rebinarize(Operator.MUL, ordered)
    if coeff == 0.0:
        return Constant(0.0)
    if cfg.sort_commutative:
        rest = sorted(rest, key=_sort_key)
    if not rest:
        return Constant(coeff)
    if coeff != 1.0:
        rest = [Constant(coeff)] + rest
    if len(rest) == 1:
        return rest[0]
    return _rebinarize(Operator.MUL, rest)


def _term_parts(term: Expression) -> tuple[float, list[Expression]]:
    """Split an additive term into (coefficient, non-constant factors)."""
    sign = 1.0
    while isinstance(term, Apply) and term.op is Operator.NEG:
        sign = -sign
        term = term.children[0]
    coeff = sign
    factors: list[Expression] = []
    for factor in _flatten(term, Operator.MUL):
        if isinstance(factor, Constant):
            coeff *= factor.value
        else:
            factors.append(factor)
    return coeff, factors


def _rebuild_term(coeff: float, factors: list[Expression]) -> Optional[Expression]:
    if coeff == 0.0:
        return None
    if not factors:
        return Constant(coeff)
    core = _rebinarize(Operator.MUL, factors) if len(factors) > 1 else factors[0]
    if coeff == 1.0:
        return core
    if coeff == -1.0:
        return Apply(Operator.NEG, (core,))
    return _rebinarize(Operator.MUL, [Constant(coeff)] + factors)


def _rebuild_add(items: list[Expression], cfg: CanonConfig) -> Expression:
    if not cfg.fold_constants:
        ordered = sorted(items, key=_sort_key) if cfg.sort_commutative else items
        return _rebinarize(Operator.ADD, ordered)
    constant_sum = 0.0
    order: list[str] = []
    coeffs: dict[str, float] = {}
    cores: dict[str, list[Expression]] = {}
    overflow: list[Expression] = []
    for item in items:
        coeff, factors = _term_parts(item)
        if not math.isfinite(coeff):
            overflow.append(item)
            continue
        if not factors:
            constant_sum += coeff
            continue
        if cfg.sort_commutative:
            factors = sorted(factors, key=_sort_key)
        key = "*".join(print_canonical(f) for f in factors)
        if key not in coeffs:
            coeffs[key] = 0.0
            cores[key] = factors
            order.append(key)
        coeffs[key] += coeff
    terms: list[Expression] = []
    for key in order:
        rebuilt = _rebuild_term(coeffs[key], cores[key])
        if rebuilt is not None:
            terms.append(rebuilt)
    terms.extend(overflow)
    if constant_sum != 0.0 or not terms:
        terms = [Constant(constant_sum)] + terms
    if cfg.sort_commutative:
        terms = sorted(terms, key=_sort_key)
    if len(terms) == 1:
        return terms[0]
    return _rebinarize(Operator.ADD, terms)
