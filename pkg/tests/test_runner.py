import json
import sys
import time

import pytest

from rediscovery.expr import parse
from rediscovery.registry import ProblemSpec, Registry, SamplingSpec
from rediscovery.runner import (
    CampaignConfig,
    DISCOVERED,
    EXHAUSTED,
    INVALID,
    OUTCOMES,
    RunRecord,
    TIMEOUT,
    aggregate,
    render_report,
    run_campaign,
)


def fake_spec(pid: str, category: str) -> ProblemSpec:
    return ProblemSpec(
        id=pid,
        category=category,
        ground_truth=parse("v1"),
        variables={1: SamplingSpec("uniform", 0.0, 1.0)},
    )


def record(pid, k, outcome, allotted=1800.0, used=None):
    return RunRecord(
        problem_id=pid,
        run_index=k,
        outcome=outcome,
        allotted_s=allotted,
        used_s=allotted if used is None else used,
        matched_form="v1" if outcome == DISCOVERED else None,
    )


def runs(pid, discovered, total=5, used_when_found=60.0):
    out = []
    for k in range(total):
        if k < discovered:
            out.append(record(pid, k, DISCOVERED, used=used_when_found))
        else:
            out.append(record(pid, k, EXHAUSTED))
    return out


class TestAggregate:
    def test_four_of_five(self):
        specs = {"P": fake_spec("P", "easy")}
        report = aggregate(runs("P", 4), specs)
        assert report.category_rates["easy"] == pytest.approx(0.8)
        assert report.overall_rate == pytest.approx(0.8)

    def test_problem_first_averaging(self):
        specs = {"A": fake_spec("A", "easy"), "B": fake_spec("B", "easy")}
        records = runs("A", 5) + runs("B", 0)
        report = aggregate(records, specs)
        # mean of per-problem rates (1.0, 0.0), not of the 10 runs
        assert report.category_rates["easy"] == pytest.approx(0.5)
        assert report.flat_rate == pytest.approx(0.5)

    def test_table_shaped_fixture(self):
        # synthetic campaign shaped to a published results column:
        # easy 86.0 / medium 46.0 / hard 17.4 and overall 44.7 percent
        specs = {}
        records = []
        layout = {
            "easy": (30, [5] * 25 + [4] + [0] * 4),
            "medium": (30, [5] * 13 + [4] + [0] * 16),
            "hard": (47, [5] * 8 + [1] + [0] * 38),
        }
        for category, (count, discoveries) in layout.items():
            assert len(discoveries) == count
            for i, d in enumerate(discoveries):
                pid = f"{category}{i}"
                specs[pid] = fake_spec(pid, category)
                records.extend(runs(pid, d))
        report = aggregate(records, specs)
        summary = report.to_summary()
        assert summary["category_rates_percent"] == {
            "easy": 86.0, "medium": 46.0, "hard": 17.4,
        }
        assert summary["overall_rate_percent"] == 44.7
        text = render_report(report)
        assert "86.0%" in text and "46.0%" in text and "17.4%" in text
        assert "44.7%" in text

    def test_all_instant_discoveries_save_everything(self):
        specs = {"P": fake_spec("P", "easy")}
        records = [record("P", k, DISCOVERED, used=0.0) for k in range(5)]
        report = aggregate(records, specs)
        assert report.time_saved_fraction == pytest.approx(1.0)

    def test_exhausted_campaign_saves_nothing(self):
        specs = {"P": fake_spec("P", "hard")}
        report = aggregate(runs("P", 0), specs)
        assert report.time_saved_fraction == 0.0

    def test_time_saved_counts_timeouts_as_spent(self):
        specs = {"P": fake_spec("P", "hard")}
        records = [record("P", 0, TIMEOUT), record("P", 1, DISCOVERED, used=900.0)]
        report = aggregate(records, specs)
        assert report.time_saved_fraction == pytest.approx(900.0 / 3600.0)
        assert 0.0 <= report.time_saved_fraction <= 1.0

    def test_adding_a_discovery_never_lowers_rates(self):
        specs = {"A": fake_spec("A", "easy"), "B": fake_spec("B", "medium")}
        base = runs("A", 2) + runs("B", 1)
        before = aggregate(base, specs)
        extended = base + [record("A", 5, DISCOVERED, used=10.0)]
        after = aggregate(extended, specs)
        for category in before.category_rates:
            assert after.category_rates[category] >= before.category_rates[category]
        assert after.overall_rate >= before.overall_rate

    def test_conservation(self):
        specs = {"A": fake_spec("A", "easy")}
        records = [
            record("A", 0, DISCOVERED, used=1.0),
            record("A", 1, EXHAUSTED),
            record("A", 2, TIMEOUT),
            record("A", 3, INVALID),
            record("A", 4, EXHAUSTED),
        ]
        report = aggregate(records, specs)
        assert sum(report.outcome_counts.values()) == 5
        assert set(report.outcome_counts) == set(OUTCOMES)

    def test_unknown_problem_rejected(self):
        with pytest.raises(ValueError, match="unknown problem"):
            aggregate([record("zzz", 0, EXHAUSTED)], {})

    def test_empty_records_rejected(self):
        with pytest.raises(ValueError):
            aggregate([], {})

    def test_excluded_problems_listed(self):
        specs = {"A": fake_spec("A", "easy"), "B": fake_spec("B", "easy")}
        report = aggregate(runs("A", 1), specs)
        assert report.excluded == ["B"]


class TestRunRecord:
    def test_discovery_requires_form(self):
        with pytest.raises(ValueError):
            RunRecord("P", 0, DISCOVERED, allotted_s=10.0, used_s=1.0)

    def test_used_cannot_exceed_allotted(self):
        with pytest.raises(ValueError):
            RunRecord("P", 0, EXHAUSTED, allotted_s=10.0, used_s=11.0)

    def test_json_round_trip(self):
        r = record("P", 3, DISCOVERED, used=12.5)
        assert RunRecord.from_json(r.to_json()) == r


class TestCampaignConfig:
    def test_timeout_must_cover_budget(self):
        with pytest.raises(ValueError):
            CampaignConfig(problems=["x"], per_run_budget_s=100.0, per_job_timeout_s=10.0)

    def test_external_needs_command(self):
        with pytest.raises(ValueError):
            CampaignConfig(problems=["x"], engine="external")

    def test_json_round_trip(self):
        cfg = CampaignConfig(problems=["a", "b"], runs_per_problem=2)
        assert CampaignConfig.from_json(cfg.to_json()) == cfg


PLANTED = dict(
    runs_per_problem=5,
    per_run_budget_s=20.0,
    per_job_timeout_s=120.0,
    plant_ground_truth=True,
)


class TestRunCampaign:
    def test_planted_campaign_discovers_everything(self, tmp_path):
        cfg = CampaignConfig(problems=["II.38.14", "I.47.23", "II.3.24"], **PLANTED)
        records = run_campaign(cfg, tmp_path / "camp")
        assert len(records) == 15
        assert all(r.outcome == DISCOVERED for r in records)
        registry = Registry()
        specs = {pid: registry.load(pid)[0] for pid in cfg.problems}
        report = aggregate(records, specs)
        assert report.overall_rate == 1.0
        assert report.time_saved_fraction > 0.9
        # discovered forms are members of the lists on disk at run end
        for r in records:
            _, acceptable = registry.load(r.problem_id)
            assert r.matched_form in acceptable.forms
        # every run's event log carries its DISCOVERY line
        from rediscovery.callback import read_events

        for r in records:
            events = read_events(
                tmp_path / "camp" / r.problem_id / f"run{r.run_index}.events"
            )
            kinds = [e.kind for e in events]
            assert "DISCOVERY" in kinds
            discovery = next(e for e in events if e.kind == "DISCOVERY")
            assert discovery.canonical == r.matched_form

    def test_resume_skips_completed_runs(self, tmp_path):
        cfg = CampaignConfig(problems=["II.38.14"], **PLANTED)
        directory = tmp_path / "camp"
        run_campaign(cfg, directory)
        stamps = {
            p: p.stat().st_mtime_ns for p in directory.glob("II.38.14/run*.record")
        }
        assert len(stamps) == 5
        time.sleep(0.01)
        run_campaign(cfg, directory)
        after = {
            p: p.stat().st_mtime_ns for p in directory.glob("II.38.14/run*.record")
        }
        assert after == stamps

    def test_manifest_conflict_rejected(self, tmp_path):
        directory = tmp_path / "camp"
        cfg = CampaignConfig(problems=["II.38.14"], **PLANTED)
        run_campaign(cfg, directory)
        other = CampaignConfig(problems=["I.47.23"], **PLANTED)
        with pytest.raises(ValueError, match="different configuration"):
            run_campaign(other, directory)

    def test_job_timeout_marks_unfinished_runs(self, tmp_path):
        cfg = CampaignConfig(
            problems=["II.38.14"],
            runs_per_problem=3,
            per_run_budget_s=1.0,
            per_job_timeout_s=1.0,
            engine="external",
            engine_cmd=[sys.executable, "-c", "import time; time.sleep(300)"],
        )
        records = run_campaign(cfg, tmp_path / "camp")
        assert len(records) == 3
        assert all(r.outcome in (EXHAUSTED, TIMEOUT) for r in records)
        assert any(r.outcome == TIMEOUT for r in records)
        schedule = json.loads((tmp_path / "camp" / "schedule.json").read_text())
        assert any(entry["killed"] for entry in schedule)

    def test_spawn_failure_marks_run_invalid(self, tmp_path):
        cfg = CampaignConfig(
            problems=["II.38.14"],
            runs_per_problem=1,
            per_run_budget_s=1.0,
            per_job_timeout_s=30.0,
            engine="external",
            engine_cmd=["/nonexistent/engine-binary"],
        )
        records = run_campaign(cfg, tmp_path / "camp")
        assert [r.outcome for r in records] == [INVALID]
        assert "spawn failure" in records[0].reason

    def test_scheduler_respects_parallel_bound(self, tmp_path):
        problems = ["II.38.14", "I.47.23", "II.3.24", "I.18.4", "I.43.43"]
        cfg = CampaignConfig(problems=problems, max_parallel_jobs=2, **PLANTED)
        run_campaign(cfg, tmp_path / "camp")
        schedule = json.loads((tmp_path / "camp" / "schedule.json").read_text())
        assert len(schedule) == len(problems)
        events = []
        for entry in schedule:
            events.append((entry["started"], 1))
            events.append((entry["ended"], -1))
        live = peak = 0
        for _, step in sorted(events):
            live += step
            peak = max(peak, live)
        assert peak <= 2
