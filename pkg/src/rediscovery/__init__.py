"""Ground-truth-rediscovery benchmark harness for symbolic regression.

Curated lists of acceptable expression forms define what counts as a
rediscovery; a throttled callback terminates searches early once any listed
form appears; near-miss candidates are recorded for human review and merged
back into the lists, so the benchmark gets better with use.
"""

from .canon import CanonConfig, canonicalize, round_constants, simplify
from .expr import (
    Apply,
    Constant,
    Expression,
    Operator,
    ParseError,
    Variable,
    complexity,
    evaluate,
    parse,
    print_canonical,
)
from .registry import (
    AcceptableList,
    Dataset,
    ProblemSpec,
    Registry,
    SamplingSpec,
    match,
    merge_candidates,
    sample_dataset,
)
from .callback import (
    CallbackConfig,
    Candidate,
    CandidateChecker,
    Decision,
    numeric_equivalence_probe,
    relative_error,
)

__version__ = "0.1.0"

__all__ = [
    "Apply",
    "AcceptableList",
    "CallbackConfig",
    "Candidate",
    "CandidateChecker",
    "CanonConfig",
    "Constant",
    "Dataset",
    "Decision",
    "Expression",
    "Operator",
    "ParseError",
    "ProblemSpec",
    "Registry",
    "SamplingSpec",
    "Variable",
    "canonicalize",
    "complexity",
    "evaluate",
    "match",
    "merge_candidates",
    "numeric_equivalence_probe",
    "parse",
    "print_canonical",
    "relative_error",
    "round_constants",
    "sample_dataset",
    "simplify",
    "__version__",
]
