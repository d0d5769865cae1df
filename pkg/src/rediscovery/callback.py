"""Early-termination callback: gate, canonical lookup, recording, throttling.

The check is deliberately ordered: the cheap fit-quality gate runs first and
rejects almost every candidate without touching the simplifier; only
near-perfect fits pay for canonicalization.  A matched candidate stops the
search; an unmatched near-perfect fit is recorded as a potential new
acceptable form for post-run review.  Checker failures are logged and turn
into ``continue`` — the benchmark measures the engine, not the checker.

The numeric equivalence probe lives here too.  It is the post-processing
stand-in for a CAS equivalence check: sampled agreement, constant offset, or
constant ratio over the problem's own domain.
"""

from __future__ import annotations

import datetime as _dt
import logging
import time
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Optional, Union

import numpy as np

from .canon import CanonConfig, canonicalize
from .expr import Expression, complexity, evaluate_batch, parse, variables
from .registry import AcceptableList, ProblemSpec, draw_valid_points, match

__all__ = [
    "CallbackConfig",
    "Candidate",
    "CandidateReport",
    "Decision",
    "CONTINUE",
    "STOP",
    "relative_error",
    "CandidateChecker",
    "check_candidate",
    "ThrottleState",
    "throttled_invoke",
    "RunRecorder",
    "EventRecord",
    "read_events",
    "ProbeResult",
    "numeric_equivalence_probe",
    "PROBE_EQUIVALENT",
    "PROBE_CONSTANT_OFFSET",
    "PROBE_CONSTANT_RATIO",
    "PROBE_NOT_EQUIVALENT",
    "PROBE_INCONCLUSIVE",
]

log = logging.getLogger(__name__)

CONTINUE = "continue"
STOP = "stop"


@dataclass(frozen=True)
class CallbackConfig:
    """Thresholds of the early-termination check.

    ``delta_max`` is the relative-error gate on test data (0.000001 percent),
    computed with ``offset`` guarding the zero-target corner.  Candidates are
    rounded to ``significant_digits`` before list lookup.  ``per_point_max``
    switches the gate to the max pointwise relative error instead of the
    norm ratio.
    """

    delta_max: float = 1e-8
    offset: float = 1e-100
    significant_digits: int = 5
    throttle_interval: float = 15.0
    require_all_variables: bool = True
    max_recorded_potentials: int = 50
    per_point_max: bool = False

    def __post_init__(self) -> None:
        if not (self.delta_max > 0):
            raise ValueError("delta_max must be positive")
        if not (self.offset > 0):
            raise ValueError("offset must be positive")
        if self.significant_digits < 1:
            raise ValueError("significant_digits must be >= 1")
        if not (self.throttle_interval > 0):
            raise ValueError("throttle_interval must be positive")

    def canon_config(self) -> CanonConfig:
        return CanonConfig(significant_digits=self.significant_digits)


@dataclass(frozen=True)
class Candidate:
    """What the engine hands the checker: an expression and its fit."""

    expression: Expression
    delta: float
    elapsed_s: float = 0.0


@dataclass(frozen=True)
class CandidateReport:
    """A fully processed candidate, as recorded in the event log."""

    expression: Expression
    canonical: str
    delta: float
    complexity: int
    elapsed_s: float

    def __post_init__(self) -> None:
        if self.delta < 0:
            raise ValueError("delta must be non-negative")


@dataclass(frozen=True)
class Decision:
    action: str
    matched_form: Optional[str] = None
    recorded_potential: bool = False

    def __post_init__(self) -> None:
        if self.action == STOP and self.matched_form is None:
            raise ValueError("a stop decision must name the matched form")

    @property
    def stop(self) -> bool:
        return self.action == STOP


def relative_error(
    y_orig: np.ndarray, y_pred: np.ndarray, offset: float = 1e-100
) -> float:
    """``||y_orig - y_pred|| / (||y_orig|| + offset)``.

    Non-finite predictions fail the gate outright (returns +inf); non-finite
    targets are a caller error.
    """
    y_orig = np.asarray(y_orig, dtype=np.float64)
    y_pred = np.asarray(y_pred, dtype=np.float64)
    if y_orig.shape != y_pred.shape or y_orig.size < 1:
        raise ValueError(f"shape mismatch: {y_orig.shape} vs {y_pred.shape}")
    if not np.isfinite(y_orig).all():
        raise ValueError("targets must be finite")
    if not np.isfinite(y_pred).all():
        return float("inf")
    return float(np.linalg.norm(y_orig - y_pred) / (np.linalg.norm(y_orig) + offset))


def per_point_relative_error(
    y_orig: np.ndarray, y_pred: np.ndarray, offset: float = 1e-100
) -> float:
    """Max pointwise ``|y - yhat| / (|y| + offset)`` (alternative gate gauge)."""
    y_orig = np.asarray(y_orig, dtype=np.float64)
    y_pred = np.asarray(y_pred, dtype=np.float64)
    if y_orig.shape != y_pred.shape or y_orig.size < 1:
        raise ValueError(f"shape mismatch: {y_orig.shape} vs {y_pred.shape}")
    if not np.isfinite(y_orig).all():
        raise ValueError("targets must be finite")
    if not np.isfinite(y_pred).all():
        return float("inf")
    return float(np.max(np.abs(y_orig - y_pred) / (np.abs(y_orig) + offset)))


# ---------------------------------------------------------------------------
# event log
# ---------------------------------------------------------------------------

DISCOVERY = "DISCOVERY"
POTENTIAL = "POTENTIAL"


@dataclass(frozen=True)
class EventRecord:
    timestamp: str
    elapsed_s: float
    kind: str
    problem_id: str
    run_index: int
    delta: float
    complexity: int
    canonical: str

    def line(self) -> str:
        return (
            f"{self.timestamp} {self.elapsed_s:.3f} {self.kind} {self.problem_id} "
            f"{self.run_index} {self.delta:.6e} {self.complexity} {self.canonical}"
        )


def read_events(path: Union[str, Path]) -> list[EventRecord]:
    records = []
    for line in Path(path).read_text().splitlines():
        if not line.strip():
            continue
        ts, elapsed, kind, pid, run, delta, cx, canonical = line.split(" ", 7)
        records.append(
            EventRecord(ts, float(elapsed), kind, pid, int(run), float(delta),
                        int(cx), canonical)
        )
    return records


class RunRecorder:
    """Append-only event log for one run.

    Potential forms are deduplicated and bounded so post-run review stays
    tractable.  Lines are written whole and flushed, so concurrent readers
    never see a torn record.
    """

    def __init__(
        self,
        path: Optional[Union[str, Path]],
        problem_id: str,
        run_index: int,
        max_potentials: int = 50,
        wallclock: Callable[[], float] = time.time,
    ):
        self.path = Path(path) if path is not None else None
        self.problem_id = problem_id
        self.run_index = run_index
        self.max_potentials = max_potentials
        self.wallclock = wallclock
        self.events: list[EventRecord] = []
        self._seen_potentials: set[str] = set()
        if self.path is not None:
            self.path.parent.mkdir(parents=True, exist_ok=True)

    def _append(self, kind: str, report: CandidateReport) -> EventRecord:
        stamp = _dt.datetime.fromtimestamp(
            self.wallclock(), tz=_dt.timezone.utc
        ).isoformat()
        record = EventRecord(
            stamp, report.elapsed_s, kind, self.problem_id, self.run_index,
            report.delta, report.complexity, report.canonical,
        )
        self.events.append(record)
        if self.path is not None:
            with open(self.path, "a") as handle:
                handle.write(record.line() + "\n")
                handle.flush()
        return record

    def discovery(self, report: CandidateReport) -> None:
        self._append(DISCOVERY, report)

    def potential(self, report: CandidateReport) -> bool:
        if report.canonical in self._seen_potentials:
            return False
        if len(self._seen_potentials) >= self.max_potentials:
            return False
        self._seen_potentials.add(report.canonical)
        self._append(POTENTIAL, report)
        return True

    def potentials(self) -> list[str]:
        return [e.canonical for e in self.events if e.kind == POTENTIAL]


# ---------------------------------------------------------------------------
# the check itself
# ---------------------------------------------------------------------------

@dataclass
class CheckerStats:
    checks: int = 0
    gate_rejections: int = 0
    simplify_calls: int = 0
    stops: int = 0
    potentials: int = 0
    internal_failures: int = 0


class CandidateChecker:
    """Stateful checker for one run: gate, canonicalize, match, record."""

    def __init__(
        self,
        cfg: CallbackConfig,
        acceptable: AcceptableList,
        spec: ProblemSpec,
        recorder: Optional[RunRecorder] = None,
    ):
        self.cfg = cfg
        self.acceptable = acceptable
        self.spec = spec
        self.recorder = recorder or RunRecorder(
            None, spec.id, 0, max_potentials=cfg.max_recorded_potentials
        )
        self.stats = CheckerStats()
        self._required = variables(spec.ground_truth)
        self._canon_cfg = cfg.canon_config()

    def check(self, candidate: Candidate) -> Decision:
        self.stats.checks += 1
        delta = candidate.delta
        # Gate first: no symbolic work for candidates that do not fit.
        if not (delta < self.cfg.delta_max):
            self.stats.gate_rejections += 1
            return Decision(CONTINUE)
        try:
            self.stats.simplify_calls += 1
            canonical = canonicalize(candidate.expression, self._canon_cfg)
            parsed = parse(canonical)
            report = CandidateReport(
                expression=candidate.expression,
                canonical=canonical,
                delta=max(delta, 0.0),
                complexity=complexity(parsed),
                elapsed_s=candidate.elapsed_s,
            )
            if match(self.acceptable, canonical):
                self.recorder.discovery(report)
                self.stats.stops += 1
                return Decision(STOP, matched_form=canonical)
            if self._meets_prerequisites(parsed, report.complexity):
                recorded = self.recorder.potential(report)
                if recorded:
                    self.stats.potentials += 1
                return Decision(CONTINUE, recorded_potential=recorded)
            return Decision(CONTINUE)
        except Exception:
            # A checker bug must never abort the search it is measuring.
            self.stats.internal_failures += 1
            log.exception("candidate check failed; continuing search")
            return Decision(CONTINUE)

    def _meets_prerequisites(self, parsed: Expression, cx: int) -> bool:
        if cx > self.spec.acceptance_complexity_cap:
            return False
        if self.cfg.require_all_variables and not self._required <= variables(parsed):
            return False
        return True


def check_candidate(
    candidate: Candidate,
    cfg: CallbackConfig,
    acceptable: AcceptableList,
    spec: ProblemSpec,
    recorder: Optional[RunRecorder] = None,
) -> Decision:
    """One-shot form of :meth:`CandidateChecker.check`."""
    return CandidateChecker(cfg, acceptable, spec, recorder).check(candidate)


# ---------------------------------------------------------------------------
# throttling
# ---------------------------------------------------------------------------

@dataclass
class ThrottleState:
    last_run: Optional[float] = None
    last_seen: Optional[float] = None


def throttled_invoke(
    state: ThrottleState,
    now: float,
    body: Callable[[], Optional[Decision]],
    interval: float,
) -> Optional[Decision]:
    """Run ``body`` iff at least ``interval`` passed since the last run.

    The first invocation always runs.  ``last_run`` advances only when the
    body actually ran, so over any window of length T the body runs at most
    ceil(T / interval) + 1 times.
    """
    if interval <= 0:
        raise ValueError("throttle interval must be positive")
    if state.last_seen is not None and now < state.last_seen:
        raise ValueError("timestamps must be monotone")
    state.last_seen = now
    if state.last_run is not None and now - state.last_run < interval:
        return None
    state.last_run = now
    return body()


# ---------------------------------------------------------------------------
# numeric equivalence probe
# ---------------------------------------------------------------------------

PROBE_EQUIVALENT = "equivalent"
PROBE_CONSTANT_OFFSET = "constant_offset"
PROBE_CONSTANT_RATIO = "constant_ratio"
PROBE_NOT_EQUIVALENT = "not_equivalent"
PROBE_INCONCLUSIVE = "inconclusive"

# Offsets/ratios wilder than this are numeric degeneracy, not structure.
_K_RANGE = (1e-6, 1e6)


@dataclass(frozen=True)
class ProbeResult:
    outcome: str
    constant: Optional[float] = None

    def __str__(self) -> str:
        if self.constant is None:
            return self.outcome
        return f"{self.outcome}(k={self.constant:.6g})"


def numeric_equivalence_probe(
    a: Expression,
    b: Expression,
    spec: ProblemSpec,
    points: int = 100,
    rel_tol: float = 1e-8,
    seed: int = 0x5EED,
) -> ProbeResult:
    """Sampled equivalence over the problem's domain.

    Outcomes, in check order: ``equivalent`` when values agree to
    ``rel_tol`` at scale max(1, max|a|); ``constant_offset`` when a - b is
    constant; ``constant_ratio`` when a / b is constant; otherwise
    ``not_equivalent``.  Fewer than points/2 mutually valid draws is
    ``inconclusive``.
    """
    for e in (a, b):
        missing = variables(e) - set(spec.variables)
        if missing:
            names = ", ".join(f"v{i}" for i in sorted(missing))
            raise ValueError(f"expression uses {names} outside the sampling spec")
    rng = np.random.Generator(np.random.PCG64(seed))
    columns = draw_valid_points(spec, [a, b], points, rng)
    if columns is None:
        return ProbeResult(PROBE_INCONCLUSIVE)
    n = len(next(iter(columns.values()))) if columns else 0
    if n < max(1, points // 2):
        return ProbeResult(PROBE_INCONCLUSIVE)
    va = evaluate_batch(a, columns)
    vb = evaluate_batch(b, columns)
    scale = max(1.0, float(np.max(np.abs(va))))
    tolerance = rel_tol * scale

    diff = va - vb
    if float(np.max(np.abs(diff))) <= tolerance:
        return ProbeResult(PROBE_EQUIVALENT)

    k_offset = float(np.mean(diff))
    spread = float(np.std(diff, ddof=1)) if n > 1 else float("inf")
    if spread <= tolerance and _k_in_range(k_offset):
        return ProbeResult(PROBE_CONSTANT_OFFSET, k_offset)

    if np.all(vb != 0.0):
        ratio = va / vb
        if np.isfinite(ratio).all():
            k_ratio = float(np.mean(ratio))
            ratio_spread = float(np.std(ratio, ddof=1)) if n > 1 else float("inf")
            if (
                k_ratio != 0.0
                and _k_in_range(k_ratio)
                and ratio_spread <= rel_tol * abs(k_ratio)
            ):
                return ProbeResult(PROBE_CONSTANT_RATIO, k_ratio)

    return ProbeResult(PROBE_NOT_EQUIVALENT)


def _k_in_range(k: float) -> bool:
    return _K_RANGE[0] <= abs(k) <= _K_RANGE[1]


def probe_strings(
    a: str, b: str, spec: ProblemSpec, points: int = 100, seed: int = 0x5EED
) -> ProbeResult:
    """Probe two expression strings (CLI convenience)."""
    return numeric_equivalence_probe(parse(a), parse(b), spec, points=points, seed=seed)
