"""Problem definitions, dataset sampling, and the acceptable-list store.

Problems and lists live in plain text files so that curation stays
reviewable: a problem spec is a small key-value file, an acceptable list is
one canonical form per line.  The bundled data directory carries a subset of
physics rediscovery problems with sampling ranges approximating the SRSD
declarations; the formats are open for extension to the full suite.
"""

from __future__ import annotations

import hashlib
import math
import os
import tempfile
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Callable, Iterable, Mapping, Optional, Sequence, Union

import numpy as np

from . import canon
from .expr import Expression, complexity, evaluate_batch, parse, variables

__all__ = [
    "SamplingSpec",
    "ProblemSpec",
    "AcceptableList",
    "Dataset",
    "RegistryError",
    "ProblemFormatError",
    "SamplingExhausted",
    "Registry",
    "load_problem",
    "load_acceptable_list",
    "store_acceptable_list",
    "sample_dataset",
    "match",
    "merge_candidates",
    "MergeResult",
    "seed_for",
    "bundled_data_dir",
]

CATEGORIES = ("easy", "medium", "hard")
DISTRIBUTIONS = ("uniform", "log-uniform")
SIGNS = ("positive", "negative", "either")

BUNDLED_PROVENANCE = "bundled"


class RegistryError(Exception):
    """Base class for registry failures."""


class ProblemFormatError(RegistryError):
    """A problem or list file violates its schema."""


class SamplingExhausted(RegistryError):
    """The ground truth was invalid on almost every drawn point."""


@dataclass(frozen=True)
class SamplingSpec:
    """How one variable is drawn.

    ``low``/``high`` bound the drawn magnitude; ``sign`` then maps it to the
    positive axis, the negative axis, or a fair coin between both.
    """

    distribution: str
    low: float
    high: float
    sign: str = "positive"

    def __post_init__(self) -> None:
        if self.distribution not in DISTRIBUTIONS:
            raise ProblemFormatError(f"unknown distribution {self.distribution!r}")
        if self.sign not in SIGNS:
            raise ProblemFormatError(f"unknown sign {self.sign!r}")
        if not (self.low < self.high):
            raise ProblemFormatError(f"need low < high, got [{self.low}, {self.high}]")
        if self.distribution == "log-uniform" and self.low <= 0:
            raise ProblemFormatError("log-uniform sampling requires low > 0")
        if self.sign != "positive" and self.low < 0:
            raise ProblemFormatError("signed sampling interprets [low, high] as magnitudes")


@dataclass(frozen=True)
class ProblemSpec:
    """One benchmark problem, with its derived complexity budgets.

    ``reference`` is the canonicalized ground truth; the complexity caps are
    ceilings of 1.2x (acceptance) and 1.5x (search) its complexity.
    """

    id: str
    category: str
    ground_truth: Expression
    variables: Mapping[int, SamplingSpec]
    reference: str = field(init=False)
    reference_complexity: int = field(init=False)
    acceptance_complexity_cap: int = field(init=False)
    max_search_complexity: int = field(init=False)

    def __post_init__(self) -> None:
        if self.category not in CATEGORIES:
            raise ProblemFormatError(f"unknown category {self.category!r}")
        used = variables(self.ground_truth)
        declared = frozenset(self.variables)
        if used - declared:
            missing = ", ".join(f"v{i}" for i in sorted(used - declared))
            raise ProblemFormatError(f"{self.id}: no sampling spec for {missing}")
        if declared - used:
            unused = ", ".join(f"v{i}" for i in sorted(declared - used))
            raise ProblemFormatError(f"{self.id}: sampled but unused: {unused}")
        reference = canon.canonicalize(self.ground_truth)
        ref_cx = complexity(parse(reference))
        object.__setattr__(self, "reference", reference)
        object.__setattr__(self, "reference_complexity", ref_cx)
        object.__setattr__(self, "acceptance_complexity_cap", math.ceil(1.2 * ref_cx))
        object.__setattr__(self, "max_search_complexity", math.ceil(1.5 * ref_cx))

    @property
    def variable_indices(self) -> tuple[int, ...]:
        return tuple(sorted(self.variables))


@dataclass(frozen=True)
class AcceptableList:
    """The curated set of canonical forms that count as a rediscovery."""

    problem_id: str
    forms: tuple[str, ...]
    provenance: Mapping[str, str] = field(default_factory=dict)
    source_path: Optional[Path] = None

    def __post_init__(self) -> None:
        if len(set(self.forms)) != len(self.forms):
            raise ProblemFormatError(f"{self.problem_id}: duplicate forms in list")

    def provenance_of(self, form: str) -> str:
        return self.provenance.get(form, BUNDLED_PROVENANCE)

    def with_form(self, form: str, provenance: str) -> "AcceptableList":
        prov = dict(self.provenance)
        if provenance != BUNDLED_PROVENANCE:
            prov[form] = provenance
        return replace(self, forms=self.forms + (form,), provenance=prov)


def match(acceptable: AcceptableList, canonical: str) -> bool:
    """Exact string-set membership of a canonicalize-stable string."""
    return canonical in acceptable.forms


@dataclass
class Dataset:
    """Sampled inputs and targets for one role of one run."""

    inputs: np.ndarray          # (points, V), columns follow variable_indices
    targets: np.ndarray         # (points,)
    role: str
    seed: int
    variable_indices: tuple[int, ...]

    def columns(self) -> dict[int, np.ndarray]:
        return {idx: self.inputs[:, j] for j, idx in enumerate(self.variable_indices)}


# ---------------------------------------------------------------------------
# problem files
# ---------------------------------------------------------------------------

def load_problem(path: Union[str, Path]) -> ProblemSpec:
    """Load and fully validate a ``.spec`` file.

    The reference form and complexity budgets are recomputed; stored values
    that disagree are errors, not warnings, so stale files cannot lie.
    """
    path = Path(path)
    fields: dict[str, str] = {}
    sampling: dict[int, SamplingSpec] = {}
    for lineno, raw in enumerate(path.read_text().splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if ":" not in line:
            raise ProblemFormatError(f"{path}:{lineno}: expected 'key: value'")
        key, _, value = line.partition(":")
        key = key.strip()
        value = value.strip()
        if key.startswith("var "):
            index = _parse_var_key(key, path, lineno)
            if index in sampling:
                raise ProblemFormatError(f"{path}:{lineno}: duplicate variable v{index}")
            sampling[index] = _parse_sampling(value, path, lineno)
        elif key in ("id", "category", "expression", "reference", "reference-complexity"):
            if key in fields:
                raise ProblemFormatError(f"{path}:{lineno}: duplicate key {key!r}")
            fields[key] = value
        else:
            raise ProblemFormatError(f"{path}:{lineno}: unknown key {key!r}")
    for required in ("id", "category", "expression"):
        if required not in fields:
            raise ProblemFormatError(f"{path}: missing required key {required!r}")
    try:
        ground_truth = parse(fields["expression"])
    except Exception as exc:
        raise ProblemFormatError(f"{path}: bad expression: {exc}") from exc
    spec = ProblemSpec(
        id=fields["id"],
        category=fields["category"],
        ground_truth=ground_truth,
        variables=sampling,
    )
    if "reference" in fields and fields["reference"] != spec.reference:
        raise ProblemFormatError(
            f"{path}: stored reference {fields['reference']!r} does not match "
            f"recomputed {spec.reference!r}"
        )
    if "reference-complexity" in fields:
        stored = int(fields["reference-complexity"])
        if stored != spec.reference_complexity:
            raise ProblemFormatError(
                f"{path}: stored reference-complexity {stored} does not match "
                f"recomputed {spec.reference_complexity}"
            )
    return spec


def _parse_var_key(key: str, path: Path, lineno: int) -> int:
    name = key[4:].strip()
    if not (name.startswith("v") and name[1:].isdigit() and int(name[1:]) >= 1):
        raise ProblemFormatError(f"{path}:{lineno}: bad variable name {name!r}")
    return int(name[1:])


def _parse_sampling(value: str, path: Path, lineno: int) -> SamplingSpec:
    parts = value.split()
    if len(parts) not in (3, 4):
        raise ProblemFormatError(
            f"{path}:{lineno}: expected 'distribution low high [sign]', got {value!r}"
        )
    sign = parts[3] if len(parts) == 4 else "positive"
    try:
        return SamplingSpec(parts[0], float(parts[1]), float(parts[2]), sign)
    except ValueError as exc:
        raise ProblemFormatError(f"{path}:{lineno}: {exc}") from exc


def store_problem(spec: ProblemSpec, path: Union[str, Path], comment: str = "") -> None:
    """Write a problem spec in the canonical file layout."""
    lines = []
    if comment:
        lines.extend(f"# {line}".rstrip() for line in comment.splitlines())
    lines.append(f"id: {spec.id}")
    lines.append(f"category: {spec.category}")
    from .expr import format_constant, print_canonical

    lines.append(f"expression: {print_canonical(spec.ground_truth)}")
    for index in spec.variable_indices:
        s = spec.variables[index]
        lines.append(
            f"var v{index}: {s.distribution} {format_constant(s.low)} "
            f"{format_constant(s.high)} {s.sign}"
        )
    lines.append(f"reference: {spec.reference}")
    lines.append(f"reference-complexity: {spec.reference_complexity}")
    _atomic_write(Path(path), "\n".join(lines) + "\n")


# ---------------------------------------------------------------------------
# acceptable-list files
# ---------------------------------------------------------------------------

def load_acceptable_list(path: Union[str, Path], problem_id: Optional[str] = None) -> AcceptableList:
    """Load a ``.accept`` file: one canonical form per line, ``#`` comments.

    Every form must parse and be a fixed point of canonicalize; anything else
    means the file was edited by hand without re-canonicalizing.
    """
    path = Path(path)
    pid = problem_id or path.stem
    forms: list[str] = []
    provenance: dict[str, str] = {}
    for lineno, raw in enumerate(path.read_text().splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        form, _, comment = line.partition("#")
        form = form.strip()
        prov = comment.strip() or BUNDLED_PROVENANCE
        try:
            canonical = canon.canonicalize(parse(form))
        except Exception as exc:
            raise ProblemFormatError(f"{path}:{lineno}: bad form: {exc}") from exc
        if canonical != form:
            raise ProblemFormatError(
                f"{path}:{lineno}: form is not canonicalize-stable "
                f"({form!r} -> {canonical!r})"
            )
        if form in forms:
            raise ProblemFormatError(f"{path}:{lineno}: duplicate form")
        forms.append(form)
        if prov != BUNDLED_PROVENANCE:
            provenance[form] = prov
    return AcceptableList(pid, tuple(forms), provenance, source_path=path)


def store_acceptable_list(acceptable: AcceptableList, path: Union[str, Path]) -> None:
    """Rewrite a list file atomically in the canonical layout."""
    lines = [f"# acceptable forms for {acceptable.problem_id}"]
    for form in acceptable.forms:
        prov = acceptable.provenance_of(form)
        if prov == BUNDLED_PROVENANCE:
            lines.append(form)
        else:
            lines.append(f"{form}  # {prov}")
    _atomic_write(Path(path), "\n".join(lines) + "\n")


def _atomic_write(path: Path, content: str) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=path.name, suffix=".tmp")
    try:
        with os.fdopen(fd, "w") as handle:
            handle.write(content)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def check_list_against_spec(spec: ProblemSpec, acceptable: AcceptableList) -> None:
    """Structural soundness of a list for its problem (complexity, id)."""
    if acceptable.problem_id != spec.id:
        raise ProblemFormatError(
            f"list {acceptable.problem_id!r} does not belong to problem {spec.id!r}"
        )
    for form in acceptable.forms:
        cx = complexity(parse(form))
        if cx > spec.acceptance_complexity_cap:
            raise ProblemFormatError(
                f"{spec.id}: form {form!r} has complexity {cx} > "
                f"cap {spec.acceptance_complexity_cap}"
            )


# ---------------------------------------------------------------------------
# sampling
# ---------------------------------------------------------------------------

def seed_for(problem_id: str, run_index: int, base_seed: int = 0) -> int:
    """Platform-stable seed schedule: sha256 over (base, problem, run)."""
    digest = hashlib.sha256(f"{base_seed}|{problem_id}|{run_index}".encode()).digest()
    return int.from_bytes(digest[:8], "big")


def _rng_for(seed: int, role: str) -> np.random.Generator:
    digest = hashlib.sha256(f"{seed}|{role}".encode()).digest()
    return np.random.Generator(np.random.PCG64(int.from_bytes(digest[:8], "big")))


def draw_columns(
    sampling: Mapping[int, SamplingSpec], rng: np.random.Generator, n: int
) -> dict[int, np.ndarray]:
    """Draw ``n`` rows for every variable, in index order."""
    columns: dict[int, np.ndarray] = {}
    for index in sorted(sampling):
        spec = sampling[index]
        u = rng.random(n)
        if spec.distribution == "log-uniform":
            base = np.exp(np.log(spec.low) + u * (np.log(spec.high) - np.log(spec.low)))
        else:
            base = spec.low + u * (spec.high - spec.low)
        if spec.sign == "negative":
            base = -base
        elif spec.sign == "either":
            base = base * np.where(rng.random(n) < 0.5, -1.0, 1.0)
        columns[index] = base
    return columns


def sample_dataset(
    spec: ProblemSpec, role: str, seed: int, points: int = 200
) -> Dataset:
    """Reproducibly sample one dataset; rows with invalid targets are redrawn.

    Raises :class:`SamplingExhausted` when the ground truth is invalid on at
    least 99 percent of draws.
    """
    if points < 1:
        raise ValueError("points must be positive")
    if role not in ("train", "test"):
        raise ValueError(f"unknown dataset role {role!r}")
    rng = _rng_for(seed, role)
    indices = spec.variable_indices
    kept_inputs: list[np.ndarray] = []
    kept_targets: list[np.ndarray] = []
    kept = 0
    drawn = 0
    max_draws = max(points * 100, 10_000)
    while kept < points and drawn < max_draws:
        batch = points
        columns = draw_columns(spec.variables, rng, batch)
        targets = evaluate_batch(spec.ground_truth, columns)
        valid = np.isfinite(targets)
        drawn += batch
        if valid.any():
            stacked = np.column_stack([columns[i] for i in indices]) if indices else np.empty((batch, 0))
            kept_inputs.append(stacked[valid])
            kept_targets.append(targets[valid])
            kept += int(valid.sum())
    if kept < points:
        raise SamplingExhausted(
            f"{spec.id}: only {kept}/{points} valid targets after {drawn} draws"
        )
    inputs = np.concatenate(kept_inputs)[:points]
    targets = np.concatenate(kept_targets)[:points]
    return Dataset(inputs, targets, role, seed, indices)


def draw_valid_points(
    spec: ProblemSpec,
    expressions: Sequence[Expression],
    points: int,
    rng: np.random.Generator,
    max_batches: int = 50,
) -> Optional[dict[int, np.ndarray]]:
    """Columns on which every expression evaluates finite, or ``None``.

    Returns fewer than ``points`` rows only when the domain is mostly
    invalid; callers decide whether a partial draw is usable.
    """
    collected: list[np.ndarray] = []
    kept = 0
    for _ in range(max_batches):
        columns = draw_columns(spec.variables, rng, points)
        mask = np.ones(points, dtype=bool)
        for e in expressions:
            mask &= np.isfinite(evaluate_batch(e, columns))
        if mask.any():
            stacked = np.column_stack([columns[i] for i in sorted(spec.variables)])
            collected.append(stacked[mask])
            kept += int(mask.sum())
        if kept >= points:
            break
    if not collected:
        return None
    stacked = np.concatenate(collected)[:points]
    indices = sorted(spec.variables)
    return {idx: stacked[:, j] for j, idx in enumerate(indices)}


# ---------------------------------------------------------------------------
# merge pipeline
# ---------------------------------------------------------------------------

@dataclass
class MergeResult:
    acceptable: AcceptableList
    added: list[str]
    rejected: list[tuple[str, str]]   # (candidate, reason)
    unchanged: list[str]              # already present


ApprovalPolicy = Union[Mapping[str, bool], Callable[[str, str], bool]]


def merge_candidates(
    acceptable: AcceptableList,
    recorded: Iterable[str],
    spec: ProblemSpec,
    approvals: ApprovalPolicy,
    provenance: str = "manual",
    path: Optional[Union[str, Path]] = None,
    probe_points: int = 100,
    probe_seed: int = 0x5EED,
) -> MergeResult:
    """Review recorded candidates into the list, machine checks first.

    A candidate is appended only when it canonicalizes cleanly, fits the
    acceptance complexity cap, numerically matches the ground truth, and the
    human said yes.  An inconclusive probe is never auto-merged.  The list
    file is rewritten atomically when a path is known.
    """
    from .callback import PROBE_EQUIVALENT, PROBE_INCONCLUSIVE, numeric_equivalence_probe

    result = MergeResult(acceptable, [], [], [])
    for raw in recorded:
        try:
            expression = parse(raw)
        except Exception as exc:
            result.rejected.append((raw, f"parse error: {exc}"))
            continue
        canonical = canon.canonicalize(expression)
        if match(result.acceptable, canonical):
            result.unchanged.append(canonical)
            continue
        extraneous = variables(parse(canonical)) - set(spec.variables)
        if extraneous:
            names = ", ".join(f"v{i}" for i in sorted(extraneous))
            result.rejected.append((raw, f"uses variables outside the problem: {names}"))
            continue
        cx = complexity(parse(canonical))
        if cx > spec.acceptance_complexity_cap:
            result.rejected.append(
                (raw, f"complexity {cx} > cap {spec.acceptance_complexity_cap}")
            )
            continue
        probe = numeric_equivalence_probe(
            parse(canonical), spec.ground_truth, spec,
            points=probe_points, seed=probe_seed,
        )
        if probe.outcome == PROBE_INCONCLUSIVE:
            result.rejected.append((raw, "probe inconclusive; flagged for manual review"))
            continue
        if probe.outcome != PROBE_EQUIVALENT:
            result.rejected.append((raw, f"probe outcome {probe.outcome}"))
            continue
        if not _approved(approvals, raw, canonical):
            result.rejected.append((raw, "not approved"))
            continue
        result.acceptable = result.acceptable.with_form(canonical, provenance)
        result.added.append(canonical)
    destination = path or acceptable.source_path
    if result.added and destination is not None:
        store_acceptable_list(result.acceptable, destination)
    return result


def _approved(approvals: ApprovalPolicy, raw: str, canonical: str) -> bool:
    if callable(approvals):
        return bool(approvals(raw, canonical))
    if canonical in approvals:
        return bool(approvals[canonical])
    return bool(approvals.get(raw, False))


# ---------------------------------------------------------------------------
# registry facade
# ---------------------------------------------------------------------------

def bundled_data_dir() -> Path:
    return Path(__file__).parent / "data"


class Registry:
    """A directory of problems plus their acceptable lists.

    Layout: ``<root>/problems/<id>.spec`` and ``<root>/lists/<id>.accept``.
    Defaults to the data bundled with the package.
    """

    def __init__(self, root: Optional[Union[str, Path]] = None):
        self.root = Path(root) if root is not None else bundled_data_dir()
        self.problems_dir = self.root / "problems"
        self.lists_dir = self.root / "lists"

    def problem_ids(self) -> list[str]:
        if not self.problems_dir.is_dir():
            return []
        return sorted(p.stem for p in self.problems_dir.glob("*.spec"))

    def load(self, problem_id: str) -> tuple[ProblemSpec, AcceptableList]:
        spec_path = self.problems_dir / f"{problem_id}.spec"
        if not spec_path.is_file():
            raise RegistryError(f"unknown problem id {problem_id!r} (no {spec_path})")
        spec = load_problem(spec_path)
        if spec.id != problem_id:
            raise ProblemFormatError(
                f"{spec_path}: file name does not match id {spec.id!r}"
            )
        list_path = self.lists_dir / f"{problem_id}.accept"
        if list_path.is_file():
            acceptable = load_acceptable_list(list_path, problem_id)
        else:
            acceptable = AcceptableList(problem_id, (spec.reference,))
        check_list_against_spec(spec, acceptable)
        return spec, acceptable

    def copy_to(self, destination: Union[str, Path]) -> Path:
        """Materialise the registry into a writable working directory."""
        destination = Path(destination)
        for sub in ("problems", "lists"):
            source = self.root / sub
            target = destination / sub
            target.mkdir(parents=True, exist_ok=True)
            if source.is_dir():
                for item in sorted(source.iterdir()):
                    if item.is_file():
                        (target / item.name).write_text(item.read_text())
        return destination
