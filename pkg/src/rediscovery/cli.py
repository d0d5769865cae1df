"""Command-line interface.

Subcommands::

    canon  <expr>                      print the canonical form
    check  <expr> --problem ID         one-shot early-termination decision
    probe  <exprA> <exprB> --problem ID   numeric equivalence probe
    run    --problems A,B --out DIR    run a benchmark campaign
    report <campaign-dir>              rates + time-saved table
    merge  --problem ID --campaign DIR --lists-dir DIR   review potentials
    init-workdir DIR                   copy the bundled registry somewhere writable
"""

from __future__ import annotations

import argparse
import math
import sys
from pathlib import Path

import numpy as np

from . import runner
from .callback import (
    Candidate,
    CandidateChecker,
    CallbackConfig,
    numeric_equivalence_probe,
    read_events,
    relative_error,
    POTENTIAL,
)
from .canon import canonicalize
from .expr import ParseError, evaluate_batch, parse
from .registry import (
    Registry,
    RegistryError,
    load_acceptable_list,
    merge_candidates,
    sample_dataset,
    seed_for,
)
from .runner import CampaignConfig, aggregate, render_report


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ParseError, RegistryError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="rediscovery",
        description="Ground-truth-rediscovery benchmark harness for symbolic regression",
    )
    sub = parser.add_subparsers(required=True)

    p = sub.add_parser("canon", help="print the canonical form of an expression")
    p.add_argument("expr")
    p.set_defaults(func=cmd_canon)

    p = sub.add_parser("check", help="run the early-termination check once")
    p.add_argument("expr")
    p.add_argument("--problem", required=True)
    p.add_argument("--registry-root", default=None)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--points", type=int, default=200)
    p.set_defaults(func=cmd_check)

    p = sub.add_parser("probe", help="numeric equivalence probe between two expressions")
    p.add_argument("expr_a")
    p.add_argument("expr_b")
    p.add_argument("--problem", required=True)
    p.add_argument("--registry-root", default=None)
    p.add_argument("--points", type=int, default=100)
    p.set_defaults(func=cmd_probe)

    p = sub.add_parser("run", help="run a benchmark campaign")
    p.add_argument("--problems", required=True,
                   help="comma-separated problem ids, or 'all'")
    p.add_argument("--out", required=True, help="campaign directory")
    p.add_argument("--runs", type=int, default=5)
    p.add_argument("--budget", type=float, default=1800.0,
                   help="per-run search budget in seconds")
    p.add_argument("--job-timeout", type=float, default=10000.0)
    p.add_argument("--jobs", type=int, default=8, help="max parallel jobs")
    p.add_argument("--engine", choices=("toy", "external"), default="toy")
    p.add_argument("--engine-cmd", default=None,
                   help="external engine command line (shell-split)")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--points", type=int, default=200)
    p.add_argument("--tick-interval", type=float, default=15.0)
    p.add_argument("--registry-root", default=None)
    p.add_argument("--plant", action="store_true",
                   help="plant the ground truth into the toy engine (smoke tests)")
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("report", help="aggregate a campaign directory")
    p.add_argument("campaign_dir")
    p.add_argument("--registry-root", default=None)
    p.add_argument("--flat", action="store_true",
                   help="average over runs instead of problems first")
    p.set_defaults(func=cmd_report)

    p = sub.add_parser("merge", help="review recorded potentials into a list")
    p.add_argument("--problem", required=True)
    p.add_argument("--campaign", required=True, help="campaign directory to harvest")
    p.add_argument("--lists-dir", required=True,
                   help="writable directory holding <id>.accept")
    p.add_argument("--registry-root", default=None)
    p.add_argument("--yes", action="store_true",
                   help="approve every machine-checked candidate (no prompt)")
    p.set_defaults(func=cmd_merge)

    p = sub.add_parser("init-workdir", help="copy the bundled registry to a directory")
    p.add_argument("directory")
    p.set_defaults(func=cmd_init_workdir)

    p = sub.add_parser("_job")  # internal: campaign child process
    p.add_argument("--campaign-dir", required=True)
    p.add_argument("--problem", required=True)
    p.set_defaults(func=cmd_job)

    return parser


def cmd_canon(args: argparse.Namespace) -> int:
    print(canonicalize(parse(args.expr)))
    return 0


def cmd_check(args: argparse.Namespace) -> int:
    registry = Registry(args.registry_root)
    spec, acceptable = registry.load(args.problem)
    expression = parse(args.expr)
    seed = seed_for(spec.id, args.seed)
    test = sample_dataset(spec, "test", seed, args.points)
    prediction = evaluate_batch(expression, test.columns())
    cfg = CallbackConfig()
    if np.isfinite(prediction).all():
        delta = relative_error(test.targets, prediction, cfg.offset)
    else:
        delta = math.inf
    checker = CandidateChecker(cfg, acceptable, spec)
    decision = checker.check(Candidate(expression, delta))
    print(f"delta: {delta:.6e} (threshold {cfg.delta_max:.0e})")
    if decision.stop:
        print(f"STOP matched: {decision.matched_form}")
    else:
        note = " (recorded as potential)" if decision.recorded_potential else ""
        print(f"CONTINUE{note}")
    return 0


def cmd_probe(args: argparse.Namespace) -> int:
    registry = Registry(args.registry_root)
    spec, _ = registry.load(args.problem)
    result = numeric_equivalence_probe(
        parse(args.expr_a), parse(args.expr_b), spec, points=args.points
    )
    print(result)
    return 0


def cmd_run(args: argparse.Namespace) -> int:
    registry = Registry(args.registry_root)
    if args.problems.strip() == "all":
        problems = registry.problem_ids()
    else:
        problems = [p.strip() for p in args.problems.split(",") if p.strip()]
    engine_cmd = args.engine_cmd.split() if args.engine_cmd else None
    cfg = CampaignConfig(
        problems=problems,
        runs_per_problem=args.runs,
        per_run_budget_s=args.budget,
        per_job_timeout_s=args.job_timeout,
        max_parallel_jobs=args.jobs,
        engine=args.engine,
        engine_cmd=engine_cmd,
        base_seed=args.seed,
        points=args.points,
        registry_root=args.registry_root,
        plant_ground_truth=args.plant,
        tick_interval_s=args.tick_interval,
    )
    records = runner.run_campaign(cfg, args.out)
    specs = {pid: registry.load(pid)[0] for pid in problems}
    report = aggregate(records, specs)
    print(render_report(report))
    return 0


def cmd_report(args: argparse.Namespace) -> int:
    campaign_dir = Path(args.campaign_dir)
    records = runner.load_records(campaign_dir)
    if not records:
        print(f"error: no run records under {campaign_dir}", file=sys.stderr)
        return 1
    manifest = campaign_dir / runner.MANIFEST_NAME
    root = None
    if manifest.exists():
        root = CampaignConfig.from_json(manifest.read_text()).registry_root
    registry = Registry(args.registry_root or root)
    specs = {pid: registry.load(pid)[0]
             for pid in sorted({r.problem_id for r in records})}
    report = aggregate(records, specs, run_flat=args.flat)
    print(render_report(report))
    summary_path = campaign_dir / "summary.json"
    import json

    summary_path.write_text(json.dumps(report.to_summary(), indent=2) + "\n")
    print(f"\nsummary written to {summary_path}")
    return 0


def cmd_merge(args: argparse.Namespace) -> int:
    registry = Registry(args.registry_root)
    spec, _ = registry.load(args.problem)
    list_path = Path(args.lists_dir) / f"{args.problem}.accept"
    if not list_path.is_file():
        print(f"error: {list_path} does not exist", file=sys.stderr)
        return 1
    acceptable = load_acceptable_list(list_path, args.problem)
    campaign_dir = Path(args.campaign)
    recorded: list[str] = []
    for events_file in sorted(campaign_dir.glob(f"{args.problem}/run*.events")):
        for event in read_events(events_file):
            if event.kind == POTENTIAL and event.canonical not in recorded:
                recorded.append(event.canonical)
    if not recorded:
        print("no recorded potentials to review")
        return 0

    def ask(raw: str, canonical: str) -> bool:
        if args.yes:
            return True
        answer = input(f"accept {canonical!r}? [y/N] ").strip().lower()
        return answer in ("y", "yes")

    result = merge_candidates(
        acceptable, recorded, spec, ask,
        provenance=f"merged-from-run {campaign_dir.name}",
        path=list_path,
    )
    for canonical in result.added:
        print(f"added: {canonical}")
    for canonical in result.unchanged:
        print(f"already listed: {canonical}")
    for candidate, reason in result.rejected:
        print(f"rejected: {candidate} ({reason})")
    print(f"{len(result.added)} added, {len(result.rejected)} rejected, "
          f"{len(result.unchanged)} already present")
    return 0


def cmd_init_workdir(args: argparse.Namespace) -> int:
    destination = Registry().copy_to(args.directory)
    print(f"bundled registry copied to {destination}")
    return 0


def cmd_job(args: argparse.Namespace) -> int:
    return runner.job_main(args.campaign_dir, args.problem)


if __name__ == "__main__":
    sys.exit(main())
