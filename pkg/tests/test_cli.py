import io
import json
import shutil

import pytest

from daqsynth.cli import main

from conftest import write_script
from helpers import CHAIN_DOT, plan_responses


GOOD_DOT = "digraph G { A -> B; B -> C }"
BROKEN_DOT = "digraph G { A -> B; C }"


class TestValidateCommand:
    def test_clean_diagram_exits_zero(self, tmp_path, capsys):
        path = tmp_path / "good.dot"
        path.write_text(GOOD_DOT, encoding="utf-8")
        assert main(["validate", str(path)]) == 0
        assert "no findings" in capsys.readouterr().out

    def test_error_findings_exit_nonzero(self, tmp_path, capsys):
        path = tmp_path / "bad.dot"
        path.write_text(BROKEN_DOT, encoding="utf-8")
        assert main(["validate", str(path)]) == 1
        out = capsys.readouterr().out
        assert "ERROR" in out
        assert "disconnected-node" in out

    def test_unparseable_file_reports_error(self, tmp_path, capsys):
        path = tmp_path / "nope.dot"
        path.write_text("digraph G { subgraph s { A } }", encoding="utf-8")
        assert main(["validate", str(path)]) == 1
        assert "error" in capsys.readouterr().err.lower()


class TestRenderCommand:
    def test_render_depends_on_external_binary(self, tmp_path, capsys):
        path = tmp_path / "g.dot"
        path.write_text(GOOD_DOT, encoding="utf-8")
        code = main(["render", str(path), "--out", str(tmp_path / "g.svg")])
        if shutil.which("dot"):
            assert code == 0
            assert (tmp_path / "g.svg").exists()
        else:
            assert code == 1
            assert "renderer" in capsys.readouterr().err


class TestBatchCommand:
    def test_batch_creates_run_dirs_and_aggregate(self, tmp_path, capsys):
        script = write_script(tmp_path / "s.jsonl", plan_responses())
        code = main(
            [
                "batch",
                "--testbench", "angular_position",
                "--mode", "direct",
                "--iterations", "3",
                "--backend", "scripted",
                "--script", str(script),
                "--out", str(tmp_path / "out"),
            ]
        )
        assert code == 0
        mode_dir = tmp_path / "out" / "angular_position" / "direct"
        assert len([p for p in mode_dir.iterdir() if p.is_dir()]) == 3
        assert (mode_dir / "aggregate.csv").exists()
        assert "3 done" in capsys.readouterr().out

    def test_unknown_flags_exit_two(self):
        with pytest.raises(SystemExit) as err:
            main(["batch", "--no-such-flag"])
        assert err.value.code == 2

    def test_unknown_testbench_exits_two(self, tmp_path):
        with pytest.raises(SystemExit) as err:
            main(["batch", "--testbench", "bogus", "--mode", "direct", "--out", str(tmp_path)])
        assert err.value.code == 2

    def test_missing_script_is_runtime_error(self, tmp_path, capsys):
        code = main(
            [
                "batch",
                "--testbench", "thermometry",
                "--mode", "direct",
                "--out", str(tmp_path),
            ]
        )
        assert code == 1
        assert "script" in capsys.readouterr().err


class TestReplayCommand:
    def test_replay_recorded_script(self, tmp_path, capsys):
        script = write_script(tmp_path / "s.jsonl", plan_responses())
        assert (
            main(
                [
                    "batch",
                    "--testbench", "angular_position",
                    "--mode", "direct",
                    "--iterations", "1",
                    "--backend", "scripted",
                    "--script", str(script),
                    "--out", str(tmp_path / "first"),
                ]
            )
            == 0
        )
        recorded = (
            tmp_path / "first" / "angular_position" / "direct" / "run_000" / "script.jsonl"
        )
        code = main(
            [
                "replay",
                "--script", str(recorded),
                "--testbench", "angular_position",
                "--mode", "direct",
                "--out", str(tmp_path / "second"),
            ]
        )
        assert code == 0
        assert "done" in capsys.readouterr().out


class TestDesignCommand:
    def test_scripted_design_with_piped_verdicts_completes(
        self, tmp_path, capsys, monkeypatch
    ):
        script = write_script(tmp_path / "s.jsonl", plan_responses())
        # 3 empty answers, then accept architecture, 4 details, summary
        monkeypatch.setattr("sys.stdin", io.StringIO("\n\n\n" + "y\n" * 6))
        code = main(
            [
                "design",
                "--description", "Design a pendulum angle measurement system.",
                "--backend", "scripted",
                "--script", str(script),
                "--store", str(tmp_path / "store"),
                "--out", str(tmp_path / "artifacts"),
            ]
        )
        out = capsys.readouterr().out
        assert code == 0, out
        assert "The designer asks:" in out
        assert "=== Summary ===" in out
        assert "Summary of the solution" in out
        dots = list((tmp_path / "artifacts").glob("*-architecture.dot"))
        assert len(dots) == 1
        assert "digraph architecture {" in dots[0].read_text(encoding="utf-8")

    def test_design_revise_then_accept(self, tmp_path, capsys, monkeypatch):
        responses = plan_responses()
        # one extra diagram consumed by the revise round
        responses.insert(2, f"Revised:\n```dot\n{CHAIN_DOT}\n```")
        script = write_script(tmp_path / "s.jsonl", responses)
        stdin = "\n\n\n" + "use fewer blocks\n" + "y\n" * 6
        monkeypatch.setattr("sys.stdin", io.StringIO(stdin))
        code = main(
            [
                "design",
                "--description", "Pendulum project.",
                "--script", str(script),
                "--store", str(tmp_path / "store"),
                "--out", str(tmp_path / "artifacts"),
            ]
        )
        assert code == 0

    def test_design_empty_description_fails(self, tmp_path, capsys, monkeypatch):
        monkeypatch.setattr("sys.stdin", io.StringIO("\n"))
        code = main(["design", "--description", "  ", "--store", str(tmp_path)])
        assert code == 1

    def test_failed_session_reports_and_exits_nonzero(
        self, tmp_path, capsys, monkeypatch
    ):
        script = write_script(
            tmp_path / "s.jsonl",
            ["1. One question?", "digraph {", "digraph {", "digraph {"],
        )
        monkeypatch.setattr("sys.stdin", io.StringIO("\n"))
        code = main(
            [
                "design",
                "--description", "Broken run.",
                "--script", str(script),
                "--store", str(tmp_path / "store"),
                "--out", str(tmp_path / "artifacts"),
            ]
        )
        assert code == 1
        assert "failed" in capsys.readouterr().err


class TestSessionEventsOnDisk:
    def test_design_persists_event_log(self, tmp_path, monkeypatch):
        script = write_script(tmp_path / "s.jsonl", plan_responses())
        monkeypatch.setattr("sys.stdin", io.StringIO("\n\n\n" + "y\n" * 6))
        main(
            [
                "design",
                "--description", "Persisted run.",
                "--script", str(script),
                "--store", str(tmp_path / "store"),
                "--out", str(tmp_path / "artifacts"),
            ]
        )
        logs = list((tmp_path / "store").glob("*.jsonl"))
        assert len(logs) == 1
        events = [json.loads(line) for line in logs[0].read_text().splitlines()]
        assert events[0]["event"] == "session_started"
        assert events[-1]["event"] == "session_done"
