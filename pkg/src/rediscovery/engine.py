"""Built-in toy genetic-programming engine and the external-engine server.

The toy GP exists so the harness is testable end to end without any
third-party search package: tournament selection, subtree crossover, a few
mutation kinds, and a periodic constant polish on hall-of-fame members so
physical constants can actually be identified to gate precision.  It is a
test vehicle, not a competitive engine.

``serve_external`` is the harness side of the wire protocol: it feeds an
engine its datasets, evaluates every snapshot candidate on the test split,
runs the early-termination check, and replies stop/continue.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass
from typing import Callable, Optional, Sequence

import numpy as np

from .callback import (
    Candidate,
    CandidateChecker,
    Decision,
    ThrottleState,
    relative_error,
    throttled_invoke,
)
from .expr import (
    Apply,
    Constant,
    Expression,
    FUNCTION_SET,
    NestingRules,
    DEFAULT_NESTING_RULES,
    Operator,
    Variable,
    complexity,
    evaluate_batch,
    nesting_violations,
    parse,
)
from .protocol import (
    Bye,
    Candidates,
    DecisionMessage,
    Hello,
    LineTransport,
    ProtocolError,
)
from .registry import Dataset, ProblemSpec

__all__ = [
    "GPConfig",
    "HallOfFame",
    "HofMember",
    "run_toy_gp",
    "GPResult",
    "serve_external",
    "ServeResult",
]

EARLY_STOP = "early-stop"
BUDGET = "budget"
GENERATIONS = "generations"


@dataclass(frozen=True)
class GPConfig:
    """Toy-GP knobs; the complexity cap and nesting rules come from the problem."""

    population_size: int = 200
    tournament_size: int = 3
    crossover_rate: float = 0.6
    mutation_rate: float = 0.9
    constant_perturbation_scale: float = 0.25
    max_complexity: int = 30
    nesting: NestingRules = DEFAULT_NESTING_RULES
    seed: int = 0
    plant: Optional[Expression] = None   # test hook: inject a known individual
    max_generations: int = 10_000_000
    elite_count: int = 8
    polish_every: int = 10

    def __post_init__(self) -> None:
        if self.population_size < 2:
            raise ValueError("population_size must be >= 2")
        for name in ("crossover_rate", "mutation_rate"):
            rate = getattr(self, name)
            if not (0.0 <= rate <= 1.0):
                raise ValueError(f"{name} must lie in [0, 1]")
        if self.tournament_size < 1:
            raise ValueError("tournament_size must be >= 1")
        if self.max_complexity < 1:
            raise ValueError("max_complexity must be >= 1")


@dataclass(frozen=True)
class HofMember:
    complexity: int
    loss: float
    expression: Expression


class HallOfFame:
    """Per-complexity best individuals, pruned to the Pareto front.

    At most one slot per complexity value; a slot survives only if its loss
    beats every lower-complexity slot, so no member is dominated.
    """

    def __init__(self, max_complexity: int):
        self.max_complexity = max_complexity
        self._slots: dict[int, tuple[float, Expression]] = {}

    def update(self, expression: Expression, loss: float) -> bool:
        if not math.isfinite(loss):
            return False
        cx = complexity(expression)
        if cx > self.max_complexity:
            return False
        current = self._slots.get(cx)
        if current is not None and current[0] <= loss:
            return False
        self._slots[cx] = (loss, expression)
        self._prune()
        return cx in self._slots and self._slots[cx][0] == loss

    def _prune(self) -> None:
        best = math.inf
        for cx in sorted(self._slots):
            loss = self._slots[cx][0]
            if loss >= best:
                del self._slots[cx]
            else:
                best = loss

    def members(self) -> list[HofMember]:
        return [
            HofMember(cx, loss, expr)
            for cx, (loss, expr) in sorted(self._slots.items())
        ]

    def best(self) -> Optional[HofMember]:
        members = self.members()
        return min(members, key=lambda m: (m.loss, m.complexity)) if members else None

    def __len__(self) -> int:
        return len(self._slots)


@dataclass
class GPResult:
    hall_of_fame: HallOfFame
    reason: str
    decision: Optional[Decision]
    generations: int
    elapsed_s: float


# ---------------------------------------------------------------------------
# random expressions and variation
# ---------------------------------------------------------------------------

_BINARY_OPS = (Operator.ADD, Operator.SUB, Operator.MUL, Operator.DIV)
_UNARY_OPS = (
    Operator.NEG, Operator.SQRT, Operator.EXP, Operator.LOG,
    Operator.SIN, Operator.COS, Operator.TANH,
)
_POW_EXPONENTS = (2.0, 3.0, 0.5, -1.0, -2.0)


class _Breeder:
    def __init__(self, spec: ProblemSpec, cfg: GPConfig, rng: np.random.Generator):
        self.spec = spec
        self.cfg = cfg
        self.rng = rng
        self.variable_pool = spec.variable_indices or (1,)

    def random_constant(self) -> Constant:
        r = self.rng.random()
        if r < 0.5:
            return Constant(float(self.rng.integers(1, 6)))
        if r < 0.75:
            return Constant(round(float(self.rng.uniform(0.05, 2.0)), 2))
        # Log-scaled draw reaches the magnitudes physical constants live at.
        magnitude = float(self.rng.uniform(-3.0, 3.0))
        return Constant(round(10.0 ** magnitude, 6))

    def random_terminal(self) -> Expression:
        if self.rng.random() < 0.7:
            return Variable(int(self.rng.choice(self.variable_pool)))
        return self.random_constant()

    def random_tree(self, depth: int) -> Expression:
        if depth <= 0 or self.rng.random() < 0.3:
            return self.random_terminal()
        roll = self.rng.random()
        if roll < 0.62:
            op = _BINARY_OPS[int(self.rng.integers(len(_BINARY_OPS)))]
            return Apply(op, (self.random_tree(depth - 1), self.random_tree(depth - 1)))
        if roll < 0.75:
            exponent = Constant(_POW_EXPONENTS[int(self.rng.integers(len(_POW_EXPONENTS)))])
            return Apply(Operator.POW, (self.random_tree(depth - 1), exponent))
        op = _UNARY_OPS[int(self.rng.integers(len(_UNARY_OPS)))]
        return Apply(op, (self.random_tree(depth - 1),))

    def admissible(self, e: Expression) -> bool:
        return (
            complexity(e) <= self.cfg.max_complexity
            and not nesting_violations(e, self.cfg.nesting)
        )

    def random_individual(self) -> Expression:
        for _ in range(24):
            depth = int(self.rng.integers(1, 5))
            tree = self.random_tree(depth)
            if self.admissible(tree):
                return tree
        return self.random_terminal()

    # -- variation ---------------------------------------------------------

    def crossover(self, a: Expression, b: Expression) -> Expression:
        donor = self._random_subtree(b)
        return self._replace_random_node(a, lambda _: donor)

    def mutate(self, e: Expression) -> Expression:
        roll = self.rng.random()
        if roll < 0.35:
            return self._replace_random_node(
                e, lambda _: self.random_tree(int(self.rng.integers(1, 3)))
            )
        if roll < 0.6:
            return self._swap_operator(e)
        return self._perturb_constant(e)

    def _nodes(self, e: Expression) -> list[tuple[int, ...]]:
        paths: list[tuple[int, ...]] = []

        def collect(node: Expression, path: tuple[int, ...]) -> None:
            paths.append(path)
            if isinstance(node, Apply):
                for i, child in enumerate(node.children):
                    collect(child, path + (i,))

        collect(e, ())
        return paths

    def _get(self, e: Expression, path: tuple[int, ...]) -> Expression:
        node = e
        for i in path:
            node = node.children[i]  # type: ignore[union-attr]
        return node

    def _set(self, e: Expression, path: tuple[int, ...], value: Expression) -> Expression:
        if not path:
            return value
        assert isinstance(e, Apply)
        i = path[0]
        children = list(e.children)
        children[i] = self._set(children[i], path[1:], value)
        return Apply(e.op, tuple(children))

    def _random_subtree(self, e: Expression) -> Expression:
        paths = self._nodes(e)
        return self._get(e, paths[int(self.rng.integers(len(paths)))])

    def _replace_random_node(
        self, e: Expression, make: Callable[[Expression], Expression]
    ) -> Expression:
        paths = self._nodes(e)
        path = paths[int(self.rng.integers(len(paths)))]
        return self._set(e, path, make(self._get(e, path)))

    def _swap_operator(self, e: Expression) -> Expression:
        paths = [p for p in self._nodes(e) if isinstance(self._get(e, p), Apply)]
        if not paths:
            return self._perturb_constant(e)
        path = paths[int(self.rng.integers(len(paths)))]
        node = self._get(e, path)
        assert isinstance(node, Apply)
        if node.op.arity == 2:
            op = _BINARY_OPS[int(self.rng.integers(len(_BINARY_OPS)))]
        else:
            op = _UNARY_OPS[int(self.rng.integers(len(_UNARY_OPS)))]
        return self._set(e, path, Apply(op, node.children))

    def _constant_paths(self, e: Expression) -> list[tuple[int, ...]]:
        return [p for p in self._nodes(e) if isinstance(self._get(e, p), Constant)]

    def _perturb_constant(self, e: Expression) -> Expression:
        paths = self._constant_paths(e)
        if not paths:
            return self._replace_random_node(e, lambda _: self.random_constant())
        path = paths[int(self.rng.integers(len(paths)))]
        node = self._get(e, path)
        assert isinstance(node, Constant)
        scale = self.cfg.constant_perturbation_scale
        if node.value == 0.0:
            value = float(self.rng.normal(0.0, scale))
        else:
            value = node.value * float(1.0 + self.rng.normal(0.0, scale))
        if not math.isfinite(value):
            return e
        return self._set(e, path, Constant(value))

    # -- constant polish ----------------------------------------------------

    def polish(
        self, e: Expression, loss_fn: Callable[[Expression], float]
    ) -> tuple[Expression, float]:
        """Coordinate descent on constants, then snap to round values.

        The gate demands fits at 1e-8 relative, so the scan shrinks the step
        down to 1e-11 of the constant; snapping afterwards prefers the exact
        decimal the canonicalizer would print anyway.
        """
        best = e
        best_loss = loss_fn(e)
        for path in self._constant_paths(e):
            node = self._get(best, path)
            assert isinstance(node, Constant)
            value = node.value
            step = 0.5
            while step > 1e-11:
                improved = False
                for direction in (1.0, -1.0):
                    delta = (abs(value) or 1.0) * step * direction
                    candidate_value = value + delta
                    if not math.isfinite(candidate_value):
                        continue
                    candidate = self._set(best, path, Constant(candidate_value))
                    loss = loss_fn(candidate)
                    if loss < best_loss:
                        best, best_loss, value = candidate, loss, candidate_value
                        improved = True
                        break
                if not improved:
                    step /= 4.0
            for digits in (1, 2, 3, 4, 5, 6):
                snapped_value = _round_sig(value, digits)
                if snapped_value == value:
                    continue
                snapped = self._set(best, path, Constant(snapped_value))
                loss = loss_fn(snapped)
                if loss <= best_loss:
                    best, best_loss, value = snapped, loss, snapped_value
        return best, best_loss


def _round_sig(value: float, digits: int) -> float:
    if value == 0.0 or not math.isfinite(value):
        return value
    from decimal import Context, Decimal, ROUND_HALF_EVEN

    return float(Context(prec=digits, rounding=ROUND_HALF_EVEN).create_decimal(Decimal(value)))


# ---------------------------------------------------------------------------
# the GP loop
# ---------------------------------------------------------------------------

OnTick = Callable[[HallOfFame, float], Optional[Decision]]


def run_toy_gp(
    spec: ProblemSpec,
    train: Dataset,
    cfg: GPConfig,
    on_tick: Optional[OnTick] = None,
    budget_s: float = 1800.0,
    tick_interval: float = 15.0,
    clock: Callable[[], float] = time.monotonic,
    offset: float = 1e-100,
) -> GPResult:
    """Evolve expressions; tick the callback at the throttle cadence.

    Deterministic given the seed and an injected clock.  Terminates on a stop
    decision, the time budget, or the generation cap.
    """
    rng = np.random.Generator(np.random.PCG64(cfg.seed))
    breeder = _Breeder(spec, cfg, rng)
    columns = train.columns()
    target_norm = float(np.linalg.norm(train.targets)) + offset

    cache: dict[Expression, float] = {}

    def loss_fn(e: Expression) -> float:
        hit = cache.get(e)
        if hit is not None:
            return hit
        prediction = evaluate_batch(e, columns)
        if not np.isfinite(prediction).all():
            loss = math.inf
        else:
            loss = float(np.linalg.norm(train.targets - prediction)) / target_norm
        if len(cache) < 200_000:
            cache[e] = loss
        return loss

    hof = HallOfFame(cfg.max_complexity)
    population: list[tuple[Expression, float]] = []

    def admit(e: Expression) -> None:
        loss = loss_fn(e)
        population.append((e, loss))
        hof.update(e, loss)

    if cfg.plant is not None:
        if breeder.admissible(cfg.plant):
            admit(cfg.plant)
        else:
            raise ValueError("planted individual violates the search constraints")
    while len(population) < cfg.population_size:
        admit(breeder.random_individual())

    throttle = ThrottleState()
    start = clock()
    generation = 0
    stop_decision: Optional[Decision] = None
    reason = GENERATIONS

    def tick() -> Optional[Decision]:
        if on_tick is None:
            return None
        return on_tick(hof, clock() - start)

    while True:
        decision = throttled_invoke(throttle, clock(), tick, tick_interval)
        if decision is not None and decision.stop:
            stop_decision = decision
            reason = EARLY_STOP
            break
        elapsed = clock() - start
        if elapsed >= budget_s:
            reason = BUDGET
            break
        if generation >= cfg.max_generations:
            reason = GENERATIONS
            break
        generation += 1
        population.sort(key=lambda item: (item[1], complexity(item[0])))
        survivors = population[: cfg.elite_count]
        offspring: list[tuple[Expression, float]] = list(survivors)
        while len(offspring) < cfg.population_size:
            parent = _tournament(population, cfg.tournament_size, rng)
            child = parent
            if rng.random() < cfg.crossover_rate:
                mate = _tournament(population, cfg.tournament_size, rng)
                child = breeder.crossover(child, mate)
            if rng.random() < cfg.mutation_rate:
                child = breeder.mutate(child)
            if not breeder.admissible(child):
                child = breeder.random_individual()
            loss = loss_fn(child)
            offspring.append((child, loss))
            hof.update(child, loss)
        population = offspring
        if cfg.polish_every and generation % cfg.polish_every == 0:
            for member in hof.members():
                polished, loss = breeder.polish(member.expression, loss_fn)
                if breeder.admissible(polished):
                    hof.update(polished, loss)

    return GPResult(hof, reason, stop_decision, generation, clock() - start)


def _tournament(
    population: Sequence[tuple[Expression, float]],
    size: int,
    rng: np.random.Generator,
) -> Expression:
    picks = rng.integers(len(population), size=max(1, size))
    best = min(picks, key=lambda i: (population[i][1], complexity(population[i][0])))
    return population[best][0]


# ---------------------------------------------------------------------------
# serving an external engine
# ---------------------------------------------------------------------------

@dataclass
class ServeResult:
    outcome: str                     # discovered | exhausted | invalid
    matched_form: Optional[str]
    used_s: float
    reason: str = ""
    skipped_candidates: int = 0


def serve_external(
    spec: ProblemSpec,
    test: Dataset,
    checker: CandidateChecker,
    transport: LineTransport,
    hello: Hello,
    budget_s: float,
    clock: Callable[[], float] = time.monotonic,
    poll_s: float = 1.0,
) -> ServeResult:
    """Drive one external run over an established transport.

    Candidate fit is judged harness-side on the test split; the engine's
    reported train losses are informational.  Malformed traffic invalidates
    the run; unparseable candidates are skipped and counted.
    """
    start = clock()
    transport.send(hello)
    skipped = 0
    test_columns = test.columns()

    def elapsed() -> float:
        return clock() - start

    while True:
        remaining = budget_s - elapsed()
        if remaining <= 0:
            transport.send(Bye("budget exhausted"))
            return ServeResult("exhausted", None, min(elapsed(), budget_s),
                               reason="budget", skipped_candidates=skipped)
        try:
            message = transport.recv(timeout=min(poll_s, remaining))
        except TimeoutError:
            continue
        except ProtocolError as exc:
            transport.send(Bye(f"malformed message: {exc}"))
            return ServeResult("invalid", None, elapsed(),
                               reason=str(exc), skipped_candidates=skipped)
        if message is None:
            return ServeResult("exhausted", None, elapsed(),
                               reason="engine closed the stream",
                               skipped_candidates=skipped)
        if isinstance(message, Bye):
            return ServeResult("exhausted", None, elapsed(),
                               reason=f"engine bye: {message.reason}",
                               skipped_candidates=skipped)
        if not isinstance(message, Candidates):
            transport.send(Bye(f"unexpected message type {type(message).__name__}"))
            return ServeResult("invalid", None, elapsed(),
                               reason="unexpected message",
                               skipped_candidates=skipped)
        stop: Optional[Decision] = None
        for entry in message.exprs:
            try:
                expression = parse(entry.expr)
            except Exception:
                skipped += 1
                continue
            prediction = evaluate_batch(expression, test_columns)
            if np.isfinite(prediction).all():
                delta = relative_error(test.targets, prediction, checker.cfg.offset)
            else:
                delta = math.inf
            decision = checker.check(
                Candidate(expression, delta, elapsed_s=message.run_elapsed_s)
            )
            if decision.stop:
                stop = decision
                break
        transport.send(DecisionMessage(stop=stop is not None))
        if stop is not None:
            transport.send(Bye("accepted form found"))
            return ServeResult("discovered", stop.matched_form, elapsed(),
                               reason="early termination",
                               skipped_candidates=skipped)


def default_hello(
    spec: ProblemSpec, budget_s: float, train_path: str, test_path: str
) -> Hello:
    return Hello(
        problem_id=spec.id,
        function_set=FUNCTION_SET,
        max_complexity=spec.max_search_complexity,
        budget_s=budget_s,
        train_path=train_path,
        test_path=test_path,
    )
