import datetime
import json

from rediscovery.callback import EventRecord
from rediscovery.cli import main
from rediscovery.registry import Registry, load_acceptable_list


def run_cli(*argv):
    return main(list(argv))


class TestCanon:
    def test_identity_elimination(self, capsys):
        assert run_cli("canon", "(v1*1)") == 0
        assert capsys.readouterr().out.strip() == "v1"

    def test_parse_error_reports_offset(self, capsys):
        assert run_cli("canon", "(v1+") == 1
        err = capsys.readouterr().err
        assert "offset" in err


class TestCheck:
    def test_acceptable_form_stops(self, capsys):
        assert run_cli("check", "(v1/(2+(2*v2)))", "--problem", "II.38.14") == 0
        out = capsys.readouterr().out
        assert "STOP matched: (v1/(2+(2*v2)))" in out

    def test_poor_fit_continues(self, capsys):
        assert run_cli("check", "(v1+v2)", "--problem", "II.38.14") == 0
        assert "CONTINUE" in capsys.readouterr().out

    def test_unknown_problem(self, capsys):
        assert run_cli("check", "v1", "--problem", "nope") == 1
        assert "unknown problem" in capsys.readouterr().err


class TestProbe:
    def test_equivalent_pair(self, capsys):
        code = run_cli(
            "probe", "sqrt(((v1*v2)/v3))", "(sqrt(v2)*sqrt((v1/v3)))",
            "--problem", "I.47.23",
        )
        assert code == 0
        assert capsys.readouterr().out.strip() == "equivalent"


class TestCampaignCommands:
    def test_run_and_report(self, tmp_path, capsys):
        directory = tmp_path / "camp"
        code = run_cli(
            "run", "--problems", "II.38.14", "--out", str(directory),
            "--runs", "2", "--budget", "10", "--job-timeout", "60", "--plant",
        )
        assert code == 0
        out = capsys.readouterr().out
        assert "100.0%" in out
        assert run_cli("report", str(directory)) == 0
        out = capsys.readouterr().out
        assert "Overall" in out
        summary = json.loads((directory / "summary.json").read_text())
        assert summary["overall_rate_percent"] == 100.0
        assert summary["outcome_counts"]["discovered"] == 2

    def test_report_without_records(self, tmp_path, capsys):
        assert run_cli("report", str(tmp_path)) == 1
        assert "no run records" in capsys.readouterr().err


class TestMerge:
    def test_merge_reviews_recorded_potentials(self, tmp_path, capsys):
        workdir = Registry().copy_to(tmp_path / "registry")
        campaign = tmp_path / "camp"
        (campaign / "II.38.14").mkdir(parents=True)
        stamp = datetime.datetime.now(datetime.timezone.utc).isoformat()
        event = EventRecord(
            stamp, 12.0, "POTENTIAL", "II.38.14", 0,
            1e-12, 7, "(v1*(0.5/(1+v2)))",
        )
        (campaign / "II.38.14" / "run0.events").write_text(event.line() + "\n")

        code = run_cli(
            "merge", "--problem", "II.38.14",
            "--campaign", str(campaign),
            "--lists-dir", str(workdir / "lists"),
            "--yes",
        )
        assert code == 0
        out = capsys.readouterr().out
        assert "added: (v1*(0.5/(1+v2)))" in out
        merged = load_acceptable_list(workdir / "lists" / "II.38.14.accept", "II.38.14")
        assert "(v1*(0.5/(1+v2)))" in merged.forms
        assert merged.provenance_of("(v1*(0.5/(1+v2)))").startswith("merged-from-run")

    def test_merge_with_nothing_recorded(self, tmp_path, capsys):
        workdir = Registry().copy_to(tmp_path / "registry")
        campaign = tmp_path / "camp"
        campaign.mkdir()
        code = run_cli(
            "merge", "--problem", "II.38.14",
            "--campaign", str(campaign),
            "--lists-dir", str(workdir / "lists"),
            "--yes",
        )
        assert code == 0
        assert "no recorded potentials" in capsys.readouterr().out


class TestInitWorkdir:
    def test_copies_bundle(self, tmp_path, capsys):
        assert run_cli("init-workdir", str(tmp_path / "wd")) == 0
        registry = Registry(tmp_path / "wd")
        assert "II.38.14" in registry.problem_ids()
        spec, acceptable = registry.load("II.38.14")
        assert len(acceptable.forms) == 3
