"""Tests for the spin-control command line."""

from __future__ import annotations

import json
from pathlib import Path

import pandas as pd
import pytest

from spin_control.cli import EXIT_INFEASIBLE, EXIT_INVALID, EXIT_OK, build_parser, run
from spin_control.const import FIXTURE_NAMES, REPORT_SCHEMA

PAIR = {"n": 2, "drift_edges": [], "control_edges": [[1, 2, 1.0]], "name": "pair"}


@pytest.fixture
def pair_file(tmp_path: Path) -> Path:
    path = tmp_path / "pair.json"
    path.write_text(json.dumps(PAIR), encoding="utf-8")
    return path


def _report(path: Path) -> dict:
    return json.loads(path.read_text(encoding="utf-8"))


def test_bound_on_a_fixture(tmp_path: Path) -> None:
    out = tmp_path / "bound.json"
    assert run(["bound", "--net", "fig2.json", "--target", "3", "--out", str(out)]) == EXIT_OK
    report = _report(out)
    assert report["schema"] == REPORT_SCHEMA
    assert report["network"]["n"] == 7
    assert report["network"]["bipartite"] is True
    assert report["results"]["fidelity"] == pytest.approx(0.6, abs=1e-9)


def test_bound_writes_to_stdout(capsys: pytest.CaptureFixture[str]) -> None:
    assert run(["bound", "--net", "fig1", "--target", "5"]) == EXIT_OK
    report = json.loads(capsys.readouterr().out)
    assert report["command"] == "bound --net fig1 --target 5"
    assert report["results"]["fidelity"] == pytest.approx(1.0, abs=1e-9)


def test_analyze_fig1(tmp_path: Path) -> None:
    out = tmp_path / "analyze.json"
    assert run(["analyze", "--net", "fig1.json", "--out", str(out)]) == EXIT_OK
    results = _report(out)["results"]
    assert len(results["csos"]) == 1
    assert len(results["asos"]) == 1
    assert results["accessible_dim"] == 6
    assert results["lie_dim"] == 15
    assert results["automorphisms"] == [[[6, 7]]]
    assert results["spectrum"]["bipartition"] is not None


def test_analyze_raw_matrices(tmp_path: Path) -> None:
    out = tmp_path / "example1.json"
    assert run(["analyze", "--net", "example1", "--out", str(out)]) == EXIT_OK
    report = _report(out)
    assert report["network"]["matrices"] == 2
    assert report["results"]["csos"] == []
    assert len(report["results"]["asos"]) == 1
    assert report["results"]["lie_dim"] == 3


def test_output_is_reproducible(tmp_path: Path) -> None:
    first, second = tmp_path / "a.json", tmp_path / "b.json"
    args = ["bound", "--net", "fig2", "--target", '{"6": [1, 0], "7": [1, 0]}', "--out"]
    assert run([*args, str(first)]) == EXIT_OK
    assert run([*args, str(second)]) == EXIT_OK
    first_report, second_report = _report(first), _report(second)
    first_report.pop("command")
    second_report.pop("command")
    assert first_report == second_report
    assert first_report["results"]["fidelity"] == pytest.approx(0.8, abs=1e-9)


def test_simulate_a_pendant_pair(tmp_path: Path, pair_file: Path) -> None:
    out = tmp_path / "simulate.json"
    assert run(["simulate", "--net", str(pair_file), "--target", "2", "--out", str(out)]) == EXIT_OK
    results = _report(out)["results"]
    assert results["feasible"] is True
    assert results["simulation"]["fidelity"] > 0.999
    csv = Path(results["trajectory_csv"])
    assert csv == tmp_path / "pair-simulate.csv"
    assert list(pd.read_csv(csv).columns) == ["time", "1", "2"]


@pytest.mark.slow
def test_catalyze_fig2(tmp_path: Path) -> None:
    out = tmp_path / "catalyze.json"
    csv = tmp_path / "trajectory.csv"
    code = run(
        ["catalyze", "--net", "fig2", "--target", "3", "--quality", "0.02",
         "--csv", str(csv), "--out", str(out)]
    )
    assert code == EXIT_OK
    results = _report(out)["results"]
    assert results["feasible"] is True
    assert results["simulation"]["fidelity"] >= 0.9
    assert csv.exists()


def test_catalyze_reports_infeasible_tasks(tmp_path: Path) -> None:
    out = tmp_path / "infeasible.json"
    target = '{"6": [0.7071, 0], "7": [-0.7071, 0]}'
    code = run(["catalyze", "--net", "fig2", "--target", target, "--out", str(out)])
    assert code == EXIT_INFEASIBLE
    results = _report(out)["results"]
    assert results["feasible"] is False
    assert results["blocker"] == [1, 2, 3, 4, 5, 7, 6]


def test_invalid_inputs(tmp_path: Path, capsys: pytest.CaptureFixture[str]) -> None:
    missing = tmp_path / "missing.json"
    assert run(["bound", "--net", str(missing), "--target", "3"]) == EXIT_INVALID
    assert "Cannot read --net" in capsys.readouterr().err
    assert run(["bound", "--net", "fig1", "--target", "9"]) == EXIT_INVALID
    assert run(["simulate", "--net", "fig1", "--target", "5", "--refine"]) == EXIT_INVALID
    assert run(["bound", "--net", "fig1", "--target", "5", "--config", str(missing)]) == EXIT_INVALID
    assert run(["--config", str(missing), "bound", "--net", "fig1", "--target", "5"]) == EXIT_INVALID
    assert run(["bound", "--net", "fig1", "--target", "5", "--bogus"]) == EXIT_INVALID
    assert run(["bound", "--net", "fig1"]) == EXIT_INVALID


def test_identify_writes_the_record(tmp_path: Path, pair_file: Path) -> None:
    out = tmp_path / "identify.json"
    csv = tmp_path / "record.csv"
    code = run(
        ["identify", "--net", str(pair_file), "--epsilon", "0.05", "--T", "500", "--dt", "0.5",
         "--csv", str(csv), "--out", str(out)]
    )
    assert code == EXIT_OK
    results = _report(out)["results"]
    assert results["zero_level"] is True
    assert results["aso_symmetric"] is False
    assert results["levels"][0]["alpha"] == pytest.approx(1.0, rel=0.02)
    assert len(pd.read_csv(csv)) == 1001


def test_fixtures_are_written(tmp_path: Path) -> None:
    folder = tmp_path / "nets"
    out = tmp_path / "fixtures.json"
    assert run(["fixtures", str(folder), "--out", str(out)]) == EXIT_OK
    assert sorted(p.stem for p in folder.glob("*.json")) == sorted(FIXTURE_NAMES)
    written = json.loads((folder / "fig1.json").read_text(encoding="utf-8"))
    assert written["n"] == 7
    assert len(_report(out)["results"]["files"]) == len(FIXTURE_NAMES)


def test_parser_knows_every_command() -> None:
    parser = build_parser()
    extras = {
        "analyze": ["--net", "fig1"],
        "bound": ["--net", "fig1", "--target", "5"],
        "simulate": ["--net", "fig1", "--target", "5"],
        "catalyze": ["--net", "fig1", "--target", "5"],
        "identify": ["--net", "fig1"],
        "fixtures": ["out"],
    }
    for command, extra in extras.items():
        assert parser.parse_args([command, *extra]).command == command
    assert parser.parse_args(["identify", "--net", "fig1", "--T", "10"]).duration == 10.0


def test_bound_report_keys(tmp_path: Path) -> None:
    out = tmp_path / "bound.json"
    target = '{"3": [0.7071, 0], "6": [0.7071, 0]}'
    assert run(["bound", "--net", "fig2", "--target", target, "--out", str(out)]) == EXIT_OK
    results = _report(out)["results"]
    assert {"fidelity", "dark", "phase_attainable", "classification"} <= set(results)
    assert results["dark"]
    assert all({"eigvec", "weight"} <= set(entry) for entry in results["dark"])
    lost = sum(entry["weight"] for entry in results["dark"])
    assert results["fidelity"] == pytest.approx(1.0 - lost, abs=1e-9)
    assert results["classification"]["kind"] in {"truly_dark", "catalytically_accessible"}

    bright = tmp_path / "bright.json"
    assert run(["bound", "--net", "fig1", "--target", "5", "--out", str(bright)]) == EXIT_OK
    results = _report(bright)["results"]
    assert results["dark"] == []
    assert results["classification"] is None


def test_analyze_blocks_carry_their_basis(tmp_path: Path) -> None:
    out = tmp_path / "analyze.json"
    assert run(["analyze", "--net", "fig2", "--out", str(out)]) == EXIT_OK
    results = _report(out)["results"]
    blocks = results["blocks"]
    assert [block["dim"] for block in blocks] == [5, 2]
    assert results["accessible_block"] == 0
    for block in blocks:
        assert len(block["basis"]) == 7
        assert all(len(row) == block["dim"] for row in block["basis"])


def test_config_after_the_subcommand(tmp_path: Path) -> None:
    config = tmp_path / "settings.yaml"
    config.write_text("logger:\n  default: warning\n", encoding="utf-8")
    out = tmp_path / "bound.json"
    code = run(
        ["bound", "--net", "fig1", "--target", "5", "--config", str(config), "--out", str(out)]
    )
    assert code == EXIT_OK
    assert _report(out)["results"]["fidelity"] == pytest.approx(1.0, abs=1e-9)


def test_unreachable_phases_are_infeasible(tmp_path: Path) -> None:
    out = tmp_path / "simulate.json"
    target = '{"2": [0.7071, 0], "3": [0.7071, 0]}'
    code = run(["simulate", "--net", "fig1", "--target", target, "--out", str(out)])
    assert code == EXIT_INFEASIBLE
    results = _report(out)["results"]
    assert results["feasible"] is False
    assert results["blocker"] is None
