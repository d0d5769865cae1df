"""Campaign orchestration and report generation.

A campaign is a directory: the manifest pins the configuration, each problem
gets a subdirectory of per-run event logs and run records, and the report is
derived from those files alone.  Jobs are child processes (one per problem,
its runs sequential inside) so job timeouts can kill reliably and nothing
shares mutable state; the parent is the only writer of the manifest and the
schedule log.
"""

from __future__ import annotations

import dataclasses
import json
import math
import os
import signal
import subprocess
import sys
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Mapping, Optional, Sequence, Union

import numpy as np

from .callback import (
    Candidate,
    CandidateChecker,
    CallbackConfig,
    Decision,
    RunRecorder,
    per_point_relative_error,
    relative_error,
)
from .engine import (
    EARLY_STOP,
    GPConfig,
    ServeResult,
    default_hello,
    run_toy_gp,
    serve_external,
)
from .expr import evaluate_batch
from .protocol import ProcessTransport, write_dataset_csv
from .registry import AcceptableList, ProblemSpec, Registry, sample_dataset, seed_for

__all__ = [
    "CampaignConfig",
    "RunRecord",
    "CampaignReport",
    "run_campaign",
    "job_main",
    "aggregate",
    "render_report",
    "load_records",
    "OUTCOMES",
]

MANIFEST_NAME = "campaign.manifest"
SCHEDULE_NAME = "schedule.json"

DISCOVERED = "discovered"
EXHAUSTED = "exhausted"
TIMEOUT = "timeout"
INVALID = "invalid"
OUTCOMES = (DISCOVERED, EXHAUSTED, TIMEOUT, INVALID)


@dataclass
class CampaignConfig:
    """Everything a campaign needs, JSON-serialisable for the manifest."""

    problems: list[str]
    runs_per_problem: int = 5
    per_run_budget_s: float = 1800.0
    per_job_timeout_s: float = 10000.0
    max_parallel_jobs: int = 8
    engine: str = "toy"
    engine_cmd: Optional[list[str]] = None
    base_seed: int = 0
    points: int = 200
    registry_root: Optional[str] = None
    plant_ground_truth: bool = False      # test hook: inject the ground truth
    population_size: int = 200
    tick_interval_s: float = 15.0
    per_point_gate: bool = False

    def __post_init__(self) -> None:
        if not self.problems:
            raise ValueError("campaign needs at least one problem")
        if self.runs_per_problem < 1:
            raise ValueError("runs_per_problem must be >= 1")
        if self.per_job_timeout_s < self.per_run_budget_s:
            raise ValueError("per_job_timeout_s must cover at least one run budget")
        if self.max_parallel_jobs < 1:
            raise ValueError("max_parallel_jobs must be >= 1")
        if self.engine not in ("toy", "external"):
            raise ValueError(f"unknown engine {self.engine!r}")
        if self.engine == "external" and not self.engine_cmd:
            raise ValueError("external engine requires engine_cmd")

    def to_json(self) -> str:
        return json.dumps(dataclasses.asdict(self), indent=2, sort_keys=True)

    @classmethod
    def from_json(cls, text: str) -> "CampaignConfig":
        return cls(**json.loads(text))

    def callback_config(self) -> CallbackConfig:
        return CallbackConfig(
            throttle_interval=self.tick_interval_s,
            per_point_max=self.per_point_gate,
        )


@dataclass
class RunRecord:
    """Outcome of one search run, exactly what lands on disk."""

    problem_id: str
    run_index: int
    outcome: str
    allotted_s: float
    used_s: float
    matched_form: Optional[str] = None
    discovery_elapsed_s: Optional[float] = None
    potentials: list[str] = field(default_factory=list)
    reason: str = ""

    def __post_init__(self) -> None:
        if self.outcome not in OUTCOMES:
            raise ValueError(f"unknown outcome {self.outcome!r}")
        if self.outcome == DISCOVERED and not self.matched_form:
            raise ValueError("a discovery must carry the matched form")
        if self.outcome in (DISCOVERED, EXHAUSTED) and self.used_s > self.allotted_s:
            raise ValueError("used_s may not exceed allotted_s")

    def to_json(self) -> str:
        return json.dumps(dataclasses.asdict(self), indent=2, sort_keys=True)

    @classmethod
    def from_json(cls, text: str) -> "RunRecord":
        return cls(**json.loads(text))


def _record_path(campaign_dir: Path, problem_id: str, run_index: int) -> Path:
    return campaign_dir / problem_id / f"run{run_index}.record"


def _events_path(campaign_dir: Path, problem_id: str, run_index: int) -> Path:
    return campaign_dir / problem_id / f"run{run_index}.events"


def load_records(campaign_dir: Union[str, Path]) -> list[RunRecord]:
    campaign_dir = Path(campaign_dir)
    records = []
    for path in sorted(campaign_dir.glob("*/run*.record")):
        records.append(RunRecord.from_json(path.read_text()))
    return records


# ---------------------------------------------------------------------------
# one run (inside the job process)
# ---------------------------------------------------------------------------

def _gate_delta(cfg: CallbackConfig, targets: np.ndarray, prediction: np.ndarray) -> float:
    if not np.isfinite(prediction).all():
        return math.inf
    if cfg.per_point_max:
        return per_point_relative_error(targets, prediction, cfg.offset)
    return relative_error(targets, prediction, cfg.offset)


def run_one(
    cfg: CampaignConfig,
    spec: ProblemSpec,
    acceptable: AcceptableList,
    run_index: int,
    campaign_dir: Path,
    clock: Callable[[], float] = time.monotonic,
) -> RunRecord:
    """Execute a single run of one problem and persist its record."""
    seed = seed_for(spec.id, run_index, cfg.base_seed)
    train = sample_dataset(spec, "train", seed, cfg.points)
    test = sample_dataset(spec, "test", seed, cfg.points)
    events_path = _events_path(campaign_dir, spec.id, run_index)
    if events_path.exists():
        events_path.unlink()  # leftovers from an interrupted attempt
    cb_cfg = cfg.callback_config()
    recorder = RunRecorder(
        events_path, spec.id, run_index, max_potentials=cb_cfg.max_recorded_potentials
    )
    checker = CandidateChecker(cb_cfg, acceptable, spec, recorder)
    budget = cfg.per_run_budget_s

    if cfg.engine == "toy":
        record = _run_toy(cfg, spec, checker, train, test, run_index, budget, seed, clock)
    else:
        record = _run_external(
            cfg, spec, checker, train, test, run_index, budget, campaign_dir, clock
        )
    record.potentials = recorder.potentials()
    path = _record_path(campaign_dir, spec.id, run_index)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(record.to_json() + "\n")
    return record


def _run_toy(
    cfg: CampaignConfig,
    spec: ProblemSpec,
    checker: CandidateChecker,
    train,
    test,
    run_index: int,
    budget: float,
    seed: int,
    clock: Callable[[], float],
) -> RunRecord:
    test_columns = test.columns()
    cb_cfg = checker.cfg

    def on_tick(hof, elapsed: float) -> Optional[Decision]:
        for member in hof.members():
            prediction = evaluate_batch(member.expression, test_columns)
            delta = _gate_delta(cb_cfg, test.targets, prediction)
            decision = checker.check(Candidate(member.expression, delta, elapsed))
            if decision.stop:
                return decision
        return None

    gp_cfg = GPConfig(
        population_size=cfg.population_size,
        max_complexity=spec.max_search_complexity,
        seed=seed,
        plant=spec.ground_truth if cfg.plant_ground_truth else None,
    )
    result = run_toy_gp(
        spec, train, gp_cfg, on_tick,
        budget_s=budget, tick_interval=cfg.tick_interval_s, clock=clock,
    )
    if result.reason == EARLY_STOP and result.decision is not None:
        return RunRecord(
            spec.id, run_index, DISCOVERED,
            allotted_s=budget, used_s=min(result.elapsed_s, budget),
            matched_form=result.decision.matched_form,
            discovery_elapsed_s=result.elapsed_s,
            reason=f"early stop after {result.generations} generations",
        )
    return RunRecord(
        spec.id, run_index, EXHAUSTED,
        allotted_s=budget, used_s=budget,
        reason=f"{result.reason} after {result.generations} generations",
    )


def _run_external(
    cfg: CampaignConfig,
    spec: ProblemSpec,
    checker: CandidateChecker,
    train,
    test,
    run_index: int,
    budget: float,
    campaign_dir: Path,
    clock: Callable[[], float],
) -> RunRecord:
    data_dir = campaign_dir / spec.id
    train_path = data_dir / f"run{run_index}.train.csv"
    test_path = data_dir / f"run{run_index}.test.csv"
    write_dataset_csv(train, train_path)
    write_dataset_csv(test, test_path)
    hello = default_hello(spec, budget, str(train_path), str(test_path))
    try:
        transport = ProcessTransport(list(cfg.engine_cmd or []))
    except OSError as exc:
        return RunRecord(
            spec.id, run_index, INVALID,
            allotted_s=budget, used_s=budget,
            reason=f"engine spawn failure: {exc}",
        )
    try:
        served: ServeResult = serve_external(
            spec, test, checker, transport, hello, budget, clock=clock
        )
    finally:
        transport.close()
    if served.outcome == DISCOVERED:
        return RunRecord(
            spec.id, run_index, DISCOVERED,
            allotted_s=budget, used_s=min(served.used_s, budget),
            matched_form=served.matched_form,
            discovery_elapsed_s=served.used_s,
            reason=served.reason,
        )
    if served.outcome == INVALID:
        return RunRecord(
            spec.id, run_index, INVALID,
            allotted_s=budget, used_s=budget, reason=served.reason,
        )
    return RunRecord(
        spec.id, run_index, EXHAUSTED,
        allotted_s=budget, used_s=min(max(served.used_s, 0.0), budget),
        reason=served.reason,
    )


def job_main(campaign_dir: Union[str, Path], problem_id: str) -> int:
    """Child-process entry point: all runs of one problem, resumable."""
    campaign_dir = Path(campaign_dir)
    cfg = CampaignConfig.from_json((campaign_dir / MANIFEST_NAME).read_text())
    registry = Registry(cfg.registry_root)
    spec, acceptable = registry.load(problem_id)
    for run_index in range(cfg.runs_per_problem):
        if _record_path(campaign_dir, problem_id, run_index).exists():
            continue
        run_one(cfg, spec, acceptable, run_index, campaign_dir)
    return 0


# ---------------------------------------------------------------------------
# the campaign scheduler (parent process)
# ---------------------------------------------------------------------------

@dataclass
class _Job:
    problem_id: str
    process: subprocess.Popen
    started: float
    killed: bool = False


def run_campaign(
    cfg: CampaignConfig,
    campaign_dir: Union[str, Path],
    poll_s: float = 0.05,
) -> list[RunRecord]:
    """Run every configured problem, at most ``max_parallel_jobs`` at once.

    Completed runs (record file present) are never re-executed, so an
    interrupted campaign resumes where it stopped.  A job past its timeout is
    killed and its missing runs are recorded as timeouts.
    """
    campaign_dir = Path(campaign_dir)
    campaign_dir.mkdir(parents=True, exist_ok=True)
    manifest = campaign_dir / MANIFEST_NAME
    if manifest.exists():
        existing = CampaignConfig.from_json(manifest.read_text())
        if existing != cfg:
            raise ValueError(
                f"{manifest} holds a different configuration; "
                "use a fresh directory or the stored config"
            )
    else:
        manifest.write_text(cfg.to_json() + "\n")

    registry = Registry(cfg.registry_root)
    known = set(registry.problem_ids())
    for pid in cfg.problems:
        if pid not in known:
            raise ValueError(f"unknown problem id {pid!r}")

    pending = [
        pid for pid in cfg.problems
        if not all(
            _record_path(campaign_dir, pid, k).exists()
            for k in range(cfg.runs_per_problem)
        )
    ]
    running: list[_Job] = []
    schedule: list[dict] = []

    def start(pid: str) -> _Job:
        # New session so a timeout kill reaps the whole tree, engine
        # grandchildren included.
        process = subprocess.Popen(
            [sys.executable, "-m", "rediscovery", "_job",
             "--campaign-dir", str(campaign_dir), "--problem", pid],
            stdout=subprocess.DEVNULL,
            stderr=subprocess.PIPE,
            text=True,
            start_new_session=True,
        )
        return _Job(pid, process, time.monotonic())

    def kill_tree(job: _Job) -> None:
        try:
            os.killpg(os.getpgid(job.process.pid), signal.SIGKILL)
        except (ProcessLookupError, PermissionError):
            job.process.kill()
        job.process.wait()

    try:
        while pending or running:
            while pending and len(running) < cfg.max_parallel_jobs:
                running.append(start(pending.pop(0)))
            time.sleep(poll_s)
            still = []
            for job in running:
                code = job.process.poll()
                overdue = time.monotonic() - job.started > cfg.per_job_timeout_s
                if code is None and overdue:
                    kill_tree(job)
                    job.killed = True
                    code = job.process.returncode
                if code is None:
                    still.append(job)
                    continue
                stderr = job.process.stderr.read() if job.process.stderr else ""
                schedule.append({
                    "problem": job.problem_id,
                    "started": job.started,
                    "ended": time.monotonic(),
                    "killed": job.killed,
                    "returncode": code,
                })
                if code != 0 and not job.killed and stderr:
                    sys.stderr.write(f"[{job.problem_id}] job failed:\n{stderr}\n")
            running = still
    finally:
        for job in running:
            kill_tree(job)
        (campaign_dir / SCHEDULE_NAME).write_text(
            json.dumps(schedule, indent=2) + "\n"
        )

    _fill_missing_records(cfg, campaign_dir)
    return load_records(campaign_dir)


def _fill_missing_records(cfg: CampaignConfig, campaign_dir: Path) -> None:
    for pid in cfg.problems:
        for k in range(cfg.runs_per_problem):
            path = _record_path(campaign_dir, pid, k)
            if path.exists():
                continue
            record = RunRecord(
                pid, k, TIMEOUT,
                allotted_s=cfg.per_run_budget_s, used_s=cfg.per_run_budget_s,
                reason="job killed by per-job timeout",
            )
            path.parent.mkdir(parents=True, exist_ok=True)
            path.write_text(record.to_json() + "\n")


# ---------------------------------------------------------------------------
# aggregation and reporting
# ---------------------------------------------------------------------------

@dataclass
class ProblemSummary:
    problem_id: str
    category: str
    runs: int
    discovered: int

    @property
    def rate(self) -> float:
        return self.discovered / self.runs if self.runs else 0.0


@dataclass
class CampaignReport:
    category_rates: dict[str, float]
    overall_rate: float
    time_saved_fraction: float
    per_problem: list[ProblemSummary]
    outcome_counts: dict[str, int]
    excluded: list[str]
    flat_rate: float

    def to_summary(self) -> dict:
        return {
            "category_rates_percent": {
                c: round(100.0 * r, 1) for c, r in self.category_rates.items()
            },
            "overall_rate_percent": round(100.0 * self.overall_rate, 1),
            "time_saved_percent": round(100.0 * self.time_saved_fraction, 1),
            "outcome_counts": dict(self.outcome_counts),
            "excluded_problems": list(self.excluded),
            "per_problem": [
                {
                    "id": p.problem_id,
                    "category": p.category,
                    "runs": p.runs,
                    "discovered": p.discovered,
                    "rate_percent": round(100.0 * p.rate, 1),
                }
                for p in self.per_problem
            ],
        }


def aggregate(
    records: Sequence[RunRecord],
    specs: Mapping[str, ProblemSpec],
    run_flat: bool = False,
) -> CampaignReport:
    """Rediscovery rates per category plus the time-saved fraction.

    Rates average problem-first (each problem's run rate, then the mean over
    the category's problems); ``run_flat`` switches the overall rate to a
    plain mean over runs.  Time saved counts unused per-run budget; timeout
    and invalid runs count as fully used.
    """
    if not records:
        raise ValueError("no run records to aggregate")
    by_problem: dict[str, list[RunRecord]] = {}
    for record in records:
        if record.problem_id not in specs:
            raise ValueError(f"record references unknown problem {record.problem_id!r}")
        by_problem.setdefault(record.problem_id, []).append(record)

    summaries = []
    for pid in sorted(by_problem):
        runs = by_problem[pid]
        summaries.append(
            ProblemSummary(
                pid,
                specs[pid].category,
                runs=len(runs),
                discovered=sum(1 for r in runs if r.outcome == DISCOVERED),
            )
        )

    category_rates: dict[str, float] = {}
    for category in ("easy", "medium", "hard"):
        rates = [s.rate for s in summaries if s.category == category]
        if rates:
            category_rates[category] = float(np.mean(rates))
    overall = float(np.mean([s.rate for s in summaries]))
    total_runs = sum(s.runs for s in summaries)
    flat = sum(s.discovered for s in summaries) / total_runs

    allotted = sum(r.allotted_s for r in records)
    used = sum(
        min(r.used_s, r.allotted_s) if r.outcome in (DISCOVERED, EXHAUSTED)
        else r.allotted_s
        for r in records
    )
    time_saved = 1.0 - used / allotted if allotted > 0 else 0.0

    counts = {outcome: 0 for outcome in OUTCOMES}
    for record in records:
        counts[record.outcome] += 1

    excluded = sorted(set(specs) - set(by_problem))
    return CampaignReport(
        category_rates=category_rates,
        overall_rate=flat if run_flat else overall,
        time_saved_fraction=time_saved,
        per_problem=summaries,
        outcome_counts=counts,
        excluded=excluded,
        flat_rate=flat,
    )


def render_report(report: CampaignReport) -> str:
    """Plain-text table mirroring the category/overall presentation."""
    lines = []
    lines.append("Category   Rediscovery rate")
    lines.append("-------------------------------")
    for category in ("easy", "medium", "hard"):
        if category in report.category_rates:
            rate = report.category_rates[category]
            lines.append(f"{category.capitalize():<10} {100.0 * rate:5.1f}%")
    lines.append("-------------------------------")
    lines.append(f"{'Overall':<10} {100.0 * report.overall_rate:5.1f}%")
    lines.append(f"{'Saved':<10} {100.0 * report.time_saved_fraction:5.1f}% of allotted time")
    counts = ", ".join(f"{k}={v}" for k, v in report.outcome_counts.items() if v)
    lines.append(f"Runs: {counts}")
    if report.excluded:
        lines.append("Excluded problems (no records): " + ", ".join(report.excluded))
    lines.append("")
    lines.append("Problem breakdown")
    for summary in report.per_problem:
        lines.append(
            f"  {summary.problem_id:<10} {summary.category:<7} "
            f"{summary.discovered}/{summary.runs}  ({100.0 * summary.rate:.1f}%)"
        )
    return "\n".join(lines)
