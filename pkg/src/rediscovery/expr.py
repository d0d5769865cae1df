"""Expression IR: grammar, parser, canonical printer, complexity and evaluation.

The expression language is the one the whole harness speaks: acceptable-list
files, wire-protocol payloads and CLI arguments all carry expressions in the
surface syntax produced by :func:`print_canonical`.  The printer is therefore
the normative side of the grammar; the parser accepts a whitespace-insensitive
superset (standard precedence, optional parentheses).

Surface syntax in one glance::

    (v1/(2*(1+v2)))          fully parenthesised infix, '^' for powers
    sqrt(((v1*v2)/v3))       named unary functions
    (0.25*v1*(v4^2))         flat chains for associative '+' and '*'
    (v2^-4)                  negative constants fold into the literal
    -(v1)                    unary negation

The formal grammar ships with the package as ``data/GRAMMAR.ebnf``.
"""

from __future__ import annotations

import enum
import math
import re
from dataclasses import dataclass
from decimal import Decimal
from typing import Iterator, Mapping, Optional, Union

import numpy as np

__all__ = [
    "Operator",
    "Expression",
    "Constant",
    "Variable",
    "Apply",
    "ExprError",
    "ParseError",
    "UnboundVariableError",
    "NestingRules",
    "NestingViolation",
    "DEFAULT_NESTING_RULES",
    "apply",
    "parse",
    "print_canonical",
    "format_constant",
    "complexity",
    "evaluate",
    "evaluate_batch",
    "variables",
    "nesting_violations",
    "walk",
]


class ExprError(Exception):
    """Base class for expression-level errors."""


class ParseError(ExprError):
    """Raised on malformed input; carries the byte offset of the fault."""

    def __init__(self, message: str, offset: int):
        super().__init__(f"{message} (at offset {offset})")
        self.offset = offset


class UnboundVariableError(ExprError):
    """Raised when evaluation hits a variable missing from the point."""

    def __init__(self, index: int):
        super().__init__(f"variable v{index} is not bound")
        self.index = index


class Operator(enum.Enum):
    """The fixed function set.  Nothing outside these 14 is constructible."""

    ADD = "+"
    SUB = "-"
    MUL = "*"
    DIV = "/"
    POW = "^"
    NEG = "neg"
    EXP = "exp"
    LOG = "log"
    SQRT = "sqrt"
    POW2 = "pow2"
    POW3 = "pow3"
    SIN = "sin"
    COS = "cos"
    TANH = "tanh"

    @property
    def arity(self) -> int:
        return 2 if self in _BINARY else 1

    @property
    def symbol(self) -> str:
        return self.value


_BINARY = frozenset(
    {Operator.ADD, Operator.SUB, Operator.MUL, Operator.DIV, Operator.POW}
)
_UNARY_FUNCTIONS = {
    "neg": Operator.NEG,
    "exp": Operator.EXP,
    "log": Operator.LOG,
    "sqrt": Operator.SQRT,
    "pow2": Operator.POW2,
    "pow3": Operator.POW3,
    "sin": Operator.SIN,
    "cos": Operator.COS,
    "tanh": Operator.TANH,
}

FUNCTION_SET: tuple[str, ...] = (
    "add", "sub", "mul", "div", "pow",
    "neg", "exp", "log", "sqrt", "pow2", "pow3", "sin", "cos", "tanh",
)


@dataclass(frozen=True)
class Constant:
    """A finite float64 literal."""

    value: float

    def __post_init__(self) -> None:
        v = float(self.value)
        if not math.isfinite(v):
            raise ExprError(f"constants must be finite, got {v!r}")
        if v == 0.0:
            v = 0.0  # normalise -0.0 so printing never emits "-0"
        object.__setattr__(self, "value", v)


@dataclass(frozen=True)
class Variable:
    """An input variable, rendered ``v<index>`` with index >= 1."""

    index: int

    def __post_init__(self) -> None:
        if not isinstance(self.index, int) or self.index < 1:
            raise ExprError(f"variable index must be a positive integer, got {self.index!r}")


@dataclass(frozen=True)
class Apply:
    """An operator application; child count must equal the operator's arity."""

    op: Operator
    children: tuple["Expression", ...]

    def __post_init__(self) -> None:
        if self.op in (Operator.POW2, Operator.POW3):
            raise ExprError(
                f"{self.op.name.lower()} is a parse-level alias; "
                f"construct pow(x, {2 if self.op is Operator.POW2 else 3}) instead"
            )
        if len(self.children) != self.op.arity:
            raise ExprError(
                f"{self.op.name.lower()} takes {self.op.arity} argument(s), "
                f"got {len(self.children)}"
            )


Expression = Union[Constant, Variable, Apply]


def apply(op: Operator, *children: Expression) -> Expression:
    """Build an application, normalising the pow2/pow3 aliases to pow."""
    if op is Operator.POW2:
        return Apply(Operator.POW, (children[0], Constant(2.0)))
    if op is Operator.POW3:
        return Apply(Operator.POW, (children[0], Constant(3.0)))
    return Apply(op, tuple(children))


def walk(e: Expression) -> Iterator[Expression]:
    """Yield every node of ``e``, pre-order."""
    stack = [e]
    while stack:
        node = stack.pop()
        yield node
        if isinstance(node, Apply):
            stack.extend(reversed(node.children))


def variables(e: Expression) -> frozenset[int]:
    """The set of variable indices occurring in ``e``."""
    return frozenset(n.index for n in walk(e) if isinstance(n, Variable))


# ---------------------------------------------------------------------------
# constant formatting
# ---------------------------------------------------------------------------

def format_constant(value: float) -> str:
    """Shortest decimal-or-scientific rendering that round-trips to ``value``.

    Equal-length candidates resolve to scientific notation when the leading
    digit's power of ten is at least 5 in magnitude, plain decimal otherwise.
    """
    if value == 0.0:
        return "0"
    sign = "-" if value < 0 else ""
    # repr() already yields the shortest digit string that round-trips.
    dec = Decimal(repr(abs(value)))
    digits, exponent = _strip_zeros(dec)
    adjusted = len(digits) + exponent - 1  # exponent of the leading digit

    plain = _render_plain(digits, exponent)
    sci = _render_scientific(digits, adjusted)
    if len(plain) < len(sci):
        return sign + plain
    if len(sci) < len(plain):
        return sign + sci
    return sign + (sci if abs(adjusted) >= 5 else plain)


def _strip_zeros(dec: Decimal) -> tuple[str, int]:
    sign, digit_tuple, exponent = dec.as_tuple()
    digits = "".join(map(str, digit_tuple))
    while len(digits) > 1 and digits.endswith("0"):
        digits = digits[:-1]
        exponent += 1
    return digits, int(exponent)


def _render_plain(digits: str, exponent: int) -> str:
    if exponent >= 0:
        return digits + "0" * exponent
    point = len(digits) + exponent
    if point > 0:
        return digits[:point] + "." + digits[point:]
    return "0." + "0" * (-point) + digits


def _render_scientific(digits: str, adjusted: int) -> str:
    mantissa = digits[0] + ("." + digits[1:] if len(digits) > 1 else "")
    return f"{mantissa}e{adjusted}"


# ---------------------------------------------------------------------------
# printer
# ---------------------------------------------------------------------------

def print_canonical(e: Expression) -> str:
    """Deterministic rendering; ``parse(print_canonical(e))`` equals ``e``.

    Left-nested chains of the same associative operator ('+' or '*') print as
    one flat parenthesised chain, so ``mul(mul(a,b),c)`` renders ``(a*b*c)``.
    Right-nested chains keep their grouping, preserving round-trip fidelity.
    """
    if isinstance(e, Constant):
        return format_constant(e.value)
    if isinstance(e, Variable):
        return f"v{e.index}"
    op = e.op
    if op in (Operator.ADD, Operator.MUL):
        parts: list[str] = []
        node: Expression = e
        while isinstance(node, Apply) and node.op is op:
            parts.append(print_canonical(node.children[1]))
            node = node.children[0]
        parts.append(print_canonical(node))
        return "(" + op.symbol.join(reversed(parts)) + ")"
    if op in (Operator.SUB, Operator.DIV, Operator.POW):
        left, right = e.children
        rendered = print_canonical(left)
        # '^' binds tighter than prefix '-', so a negated base needs its own
        # parentheses: pow(neg(v1), 2) renders "((-(v1))^2)".
        if op is Operator.POW and _starts_with_minus(left):
            rendered = f"({rendered})"
        return f"({rendered}{op.symbol}{print_canonical(right)})"
    if op is Operator.NEG:
        return f"-({print_canonical(e.children[0])})"
    return f"{op.value}({print_canonical(e.children[0])})"


def _starts_with_minus(e: Expression) -> bool:
    if isinstance(e, Constant):
        return e.value < 0
    return isinstance(e, Apply) and e.op is Operator.NEG


# ---------------------------------------------------------------------------
# parser (recursive descent, standard precedence)
# ---------------------------------------------------------------------------

_NUMBER_RE = re.compile(r"\d+(?:\.\d*)?(?:[eE][+-]?\d+)?")
_IDENT_RE = re.compile(r"[A-Za-z_][A-Za-z_0-9]*")


class _Parser:
    def __init__(self, text: str):
        self.text = text
        self.pos = 0

    def fail(self, message: str, offset: Optional[int] = None) -> "NoReturn":  # noqa: F821
        raise ParseError(message, self.pos if offset is None else offset)

    def skip_ws(self) -> None:
        while self.pos < len(self.text) and self.text[self.pos].isspace():
            self.pos += 1

    def peek(self) -> str:
        self.skip_ws()
        return self.text[self.pos] if self.pos < len(self.text) else ""

    def expect(self, ch: str) -> None:
        if self.peek() != ch:
            self.fail(f"expected '{ch}'")
        self.pos += 1

    def parse(self) -> Expression:
        if not self.text.strip():
            self.fail("empty expression")
        node = self.additive()
        self.skip_ws()
        if self.pos != len(self.text):
            self.fail("trailing input")
        return node

    def additive(self) -> Expression:
        node = self.multiplicative()
        while True:
            ch = self.peek()
            if ch == "+":
                self.pos += 1
                node = Apply(Operator.ADD, (node, self.multiplicative()))
            elif ch == "-":
                self.pos += 1
                node = Apply(Operator.SUB, (node, self.multiplicative()))
            else:
                return node

    def multiplicative(self) -> Expression:
        node = self.unary()
        while True:
            ch = self.peek()
            if ch == "*":
                self.pos += 1
                node = Apply(Operator.MUL, (node, self.unary()))
            elif ch == "/":
                self.pos += 1
                node = Apply(Operator.DIV, (node, self.unary()))
            else:
                return node

    def unary(self) -> Expression:
        if self.peek() == "-":
            self.pos += 1
            self.skip_ws()
            # A '-' directly before a literal folds into the constant, so
            # "(v2^-4)" carries Constant(-4); anything else is neg(...).
            if self.pos < len(self.text) and self.text[self.pos].isdigit():
                return Constant(-self.number())
            return Apply(Operator.NEG, (self.unary(),))
        return self.power()

    def power(self) -> Expression:
        node = self.atom()
        if self.peek() == "^":
            self.pos += 1
            exponent = self.unary()  # right-associative via recursion
            node = Apply(Operator.POW, (node, exponent))
        return node

    def atom(self) -> Expression:
        ch = self.peek()
        if ch == "(":
            self.pos += 1
            node = self.additive()
            self.expect(")")
            return node
        if ch.isdigit():
            return Constant(self.number())
        if ch.isalpha() or ch == "_":
            return self.identifier()
        if ch == "":
            self.fail("unexpected end of input")
        self.fail(f"unexpected character {ch!r}")

    def number(self) -> float:
        m = _NUMBER_RE.match(self.text, self.pos)
        if m is None:
            self.fail("malformed number")
        start = self.pos
        self.pos = m.end()
        try:
            value = float(m.group())
        except ValueError:
            self.fail("malformed number", start)
        if not math.isfinite(value):
            self.fail("constant overflows float64", start)
        return value

    def identifier(self) -> Expression:
        m = _IDENT_RE.match(self.text, self.pos)
        if m is None:
            self.fail("malformed identifier")
        name = m.group()
        start = self.pos
        self.pos = m.end()
        if name[0] == "v" and name[1:].isdigit():
            index = int(name[1:])
            if index < 1:
                self.fail("variable indices start at v1", start)
            return Variable(index)
        if name in _UNARY_FUNCTIONS:
            op = _UNARY_FUNCTIONS[name]
            self.expect("(")
            argument = self.additive()
            self.expect(")")
            return apply(op, argument)
        self.fail(f"unknown identifier '{name}'", start)


def parse(text: str) -> Expression:
    """Parse an expression string; raises :class:`ParseError` with an offset."""
    return _Parser(text).parse()


# ---------------------------------------------------------------------------
# complexity
# ---------------------------------------------------------------------------

def complexity(e: Expression) -> int:
    """Operator-plus-operand count of the binarised AST.

    Squares and cubes count as pow with an explicit constant exponent, so
    printed-equivalent forms score equally however they were built.
    """
    if isinstance(e, (Constant, Variable)):
        return 1
    return 1 + sum(complexity(c) for c in e.children)


# ---------------------------------------------------------------------------
# evaluation
# ---------------------------------------------------------------------------

def evaluate(e: Expression, point: Mapping[int, float]) -> Optional[float]:
    """IEEE-754 evaluation at one point; ``None`` marks a domain violation.

    Search candidates routinely leave operator domains (log of a negative,
    overflowing exp, 0/0); those outcomes must be scorable, never a crash.
    Only an unbound variable is a caller error.
    """
    if isinstance(e, Constant):
        return e.value
    if isinstance(e, Variable):
        try:
            return float(point[e.index])
        except KeyError:
            raise UnboundVariableError(e.index) from None
    values = []
    for child in e.children:
        v = evaluate(child, point)
        if v is None:
            return None
        values.append(v)
    try:
        result = _SCALAR_OPS[e.op](*values)
    except (ValueError, OverflowError, ZeroDivisionError):
        return None
    return result if math.isfinite(result) else None


_SCALAR_OPS = {
    Operator.ADD: lambda a, b: a + b,
    Operator.SUB: lambda a, b: a - b,
    Operator.MUL: lambda a, b: a * b,
    Operator.DIV: lambda a, b: a / b,
    Operator.POW: math.pow,
    Operator.NEG: lambda a: -a,
    Operator.EXP: math.exp,
    Operator.LOG: math.log,
    Operator.SQRT: math.sqrt,
    Operator.SIN: math.sin,
    Operator.COS: math.cos,
    Operator.TANH: math.tanh,
}


def evaluate_batch(e: Expression, columns: Mapping[int, np.ndarray]) -> np.ndarray:
    """Vectorised evaluation; invalid rows come back as NaN.

    All columns must share one length.  Overflows and domain violations are
    mapped to NaN so callers can mask them in a single pass.
    """
    with np.errstate(all="ignore"):
        result = _batch(e, columns)
    result = np.asarray(result, dtype=np.float64)
    if result.ndim == 0:
        length = len(next(iter(columns.values()))) if columns else 1
        result = np.full(length, float(result))
    return np.where(np.isfinite(result), result, np.nan)


def _batch(e: Expression, columns: Mapping[int, np.ndarray]):
    if isinstance(e, Constant):
        return e.value
    if isinstance(e, Variable):
        try:
            return np.asarray(columns[e.index], dtype=np.float64)
        except KeyError:
            raise UnboundVariableError(e.index) from None
    args = [_batch(c, columns) for c in e.children]
    return _BATCH_OPS[e.op](*args)


def _np_pow(a, b):
    # np.power rejects negative bases with non-integer exponents by returning
    # NaN, matching the scalar invalid outcome.
    return np.power(a, b)


_BATCH_OPS = {
    Operator.ADD: lambda a, b: a + b,
    Operator.SUB: lambda a, b: a - b,
    Operator.MUL: lambda a, b: a * b,
    Operator.DIV: lambda a, b: np.divide(a, b),
    Operator.POW: _np_pow,
    Operator.NEG: lambda a: np.negative(a),
    Operator.EXP: np.exp,
    Operator.LOG: np.log,
    Operator.SQRT: np.sqrt,
    Operator.SIN: np.sin,
    Operator.COS: np.cos,
    Operator.TANH: np.tanh,
}


# ---------------------------------------------------------------------------
# nesting rules
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class NestingRules:
    """Which operators may not appear anywhere under one another.

    ``groups`` are mutually non-nestable operator sets.  When
    ``require_constant_pow_exponent`` is set, every pow exponent subtree must
    be a bare constant.
    """

    groups: tuple[frozenset[Operator], ...] = (
        frozenset({Operator.EXP, Operator.LOG}),
        frozenset({Operator.SIN, Operator.COS, Operator.TANH}),
    )
    require_constant_pow_exponent: bool = False


DEFAULT_NESTING_RULES = NestingRules()


@dataclass(frozen=True)
class NestingViolation:
    inner: Operator
    outer: Optional[Operator]  # None for the constant-exponent rule
    rule: str

    def __str__(self) -> str:
        if self.outer is None:
            return f"pow exponent must be a constant (found {self.inner.name.lower()})"
        return f"{self.inner.name.lower()} nested under {self.outer.name.lower()} ({self.rule})"


def nesting_violations(
    e: Expression, rules: NestingRules = DEFAULT_NESTING_RULES
) -> list[NestingViolation]:
    """Every application whose operator sits forbidden under another.

    One violation is reported per offending inner node, naming its nearest
    forbidding ancestor.
    """
    violations: list[NestingViolation] = []

    def visit(node: Expression, ancestors: tuple[Operator, ...]) -> None:
        if not isinstance(node, Apply):
            return
        for group in rules.groups:
            if node.op in group:
                for outer in reversed(ancestors):
                    if outer in group:
                        violations.append(
                            NestingViolation(node.op, outer, _group_name(group))
                        )
                        break
        if (
            rules.require_constant_pow_exponent
            and node.op is Operator.POW
            and not isinstance(node.children[1], Constant)
        ):
            inner = node.children[1]
            inner_op = inner.op if isinstance(inner, Apply) else Operator.POW
            violations.append(NestingViolation(inner_op, None, "constant-exponent"))
        next_ancestors = ancestors + (node.op,)
        for child in node.children:
            visit(child, next_ancestors)

    visit(e, ())
    return violations


def _group_name(group: frozenset[Operator]) -> str:
    return "/".join(sorted(op.name.lower() for op in group))
