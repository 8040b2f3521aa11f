import csv
import json
from pathlib import Path

import pytest

from deflatecrb import harness
from deflatecrb.cli import build_default_parser, main
from deflatecrb.harness import TrialResult

DATA_DIR = Path(__file__).parent / "data"


def _json_output(capsys, argv):
    assert main([*argv, "--json"]) == 0
    return json.loads(capsys.readouterr().out)


def test_parser_requires_a_command():
    with pytest.raises(SystemExit) as excinfo:
        build_default_parser().parse_args([])
    assert excinfo.value.code == 2


def test_bound_matches_the_closed_form(capsys):
    payload = _json_output(
        capsys, ["bound", "--n", "100", "--la", "10", "--lb", "10", "--snr-db", "10", "--draws", "5"]
    )
    bounds = payload["bounds"]
    assert payload["dims"]["k"] == 200
    assert payload["sigma2"] == pytest.approx(0.01)
    assert bounds["c_deflated_inf"] == pytest.approx(0.0125)
    assert bounds["c_deflated"] == pytest.approx(0.0125, rel=0.1)
    assert bounds["c_ideal"] <= bounds["c_deflated"]
    assert set(payload["stderr"]) == {"c_deflated", "c_joint", "c_ideal"}


def test_bound_without_interference_equals_ideal(capsys):
    payload = _json_output(capsys, ["bound", "--n", "60", "--la", "6"])
    assert payload["bounds"]["c_deflated"] == pytest.approx(payload["bounds"]["c_ideal"], rel=1e-9)


def test_bound_text_output(capsys):
    assert main(["bound", "--n", "60", "--la", "6", "--lb", "6"]) == 0
    out = capsys.readouterr().out
    assert "N=60 K=120 L_A=6 L_B=6" in out
    assert "deflated" in out and "joint" in out and "ideal" in out


def test_bound_requires_n():
    with pytest.raises(SystemExit) as excinfo:
        main(["bound", "--la", "10"])
    assert excinfo.value.code == 2


def test_bound_rejects_impossible_dimensions(capsys):
    with pytest.raises(SystemExit) as excinfo:
        main(["bound", "--n", "10", "--la", "6", "--lb", "6"])
    assert excinfo.value.code == 2
    assert "error" in capsys.readouterr().err


def test_mp_summary(capsys):
    payload = _json_output(capsys, ["mp", "--rho-tilde", "9", "--moments-up-to", "2", "--grid", "5"])
    assert payload["lambda_minus"] == pytest.approx(4.0)
    assert payload["lambda_plus"] == pytest.approx(16.0)
    assert payload["stieltjes_at_zero"] == pytest.approx(0.125)
    assert payload["moments"] == pytest.approx([9.0, 90.0])
    assert len(payload["density"]) == 5


def test_mp_text_output(capsys):
    assert main(["mp", "--rho-tilde", "9"]) == 0
    out = capsys.readouterr().out
    assert "lambda-=4" in out
    assert "S(0)=0.125" in out


def test_mp_rejects_negative_ratio():
    with pytest.raises(SystemExit) as excinfo:
        main(["mp", "--rho-tilde", "-1"])
    assert excinfo.value.code == 2


def test_lemma1_small_run_writes_traces(tmp_path, capsys):
    target = tmp_path / "lemma1.csv"
    payload = _json_output(
        capsys,
        ["lemma1", "--n", "200", "--la", "20", "--lb", "20", "--trials", "3", "--workers", "1", "--out", str(target)],
    )
    (report,) = payload["reports"]
    assert report["inverse_trace_limit"] == pytest.approx(1.25)
    assert report["trace_limit"] == pytest.approx(0.1)
    with target.open(encoding="utf-8") as handle:
        rows = list(csv.reader(handle))
    assert rows[0] == ["n", "k", "l_a", "l_b", "trial", "inverse_trace", "trace"]
    assert rows[1][:5] == ["200", "400", "20", "20", "0"]
    assert len(rows) == 4


def test_lemma1_runs_every_size_of_a_scenario(capsys):
    argv = ["lemma1", "--config", str(DATA_DIR / "sample_scenario.toml"), "--trials", "2", "--workers", "1"]
    payload = _json_output(capsys, argv)
    assert payload["seed"] == 11
    (report,) = payload["reports"]
    assert report["dims"] == {"n": 40, "k": 80, "l_a": 4, "l_b": 4}
    assert report["trials"] == 2
    assert report["inverse_trace_limit"] == pytest.approx(10.0 / 8.0)


def test_lemma1_uses_scenario_trials_and_seed_by_default(capsys):
    payload = _json_output(capsys, ["lemma1", "--config", str(DATA_DIR / "sample_scenario.toml"), "--workers", "1"])
    assert payload["seed"] == 11
    assert payload["reports"][0]["trials"] == 6


def test_lemma1_text_output_is_independent_of_workers(capsys):
    argv = ["lemma1", "--n", "60", "--la", "6", "--lb", "6", "--trials", "3", "--seed", "4"]
    assert main([*argv, "--workers", "1"]) == 0
    serial = capsys.readouterr().out
    assert main([*argv, "--workers", "2"]) == 0
    assert capsys.readouterr().out == serial
    assert "N=60 K=120 L_A=6 L_B=6 trials=3" in serial


@pytest.mark.parametrize(
    "argv",
    [
        ["lemma1", "--trials", "2"],
        ["lemma1", "--n", "60", "--la", "6"],
        ["lemma1", "--config", str(DATA_DIR / "sample_scenario.toml"), "--n", "60"],
        ["lemma1", "--n", "60", "--la", "6", "--lb", "6", "--workers", "0"],
    ],
)
def test_lemma1_rejects_incomplete_or_conflicting_sizes(argv, capsys):
    with pytest.raises(SystemExit) as excinfo:
        main(argv)
    assert excinfo.value.code == 2
    assert "deflatecrb: error" in capsys.readouterr().err


def test_lemma1_below_the_stable_ratio_is_a_numerical_failure(capsys):
    code = main(["lemma1", "--n", "30", "--la", "14", "--lb", "15", "--trials", "2", "--workers", "1"])
    assert code == 1
    err = capsys.readouterr().err
    assert "deflatecrb: error:" in err
    assert "rho_tilde" in err


def test_simulate_missing_config_is_a_usage_error(tmp_path, capsys):
    with pytest.raises(SystemExit) as excinfo:
        main(["simulate", "--config", str(tmp_path / "missing.toml")])
    assert excinfo.value.code == 2
    assert "Scenario file not found" in capsys.readouterr().err


def test_simulate_writes_csv(tmp_path, capsys):
    target = tmp_path / "runs" / "sample.csv"
    code = main(
        [
            "simulate",
            "--config",
            str(DATA_DIR / "sample_scenario.toml"),
            "--trials",
            "2",
            "--workers",
            "1",
            "--out",
            str(target),
        ]
    )
    assert code == 0
    out = capsys.readouterr().out
    assert "N=40 K=80 L_A=4 L_B=4 SNR=10dB ok=2" in out
    with target.open(encoding="utf-8") as handle:
        rows = list(csv.DictReader(handle))
    assert len(rows) == 2 * 2 * 2
    assert {row["estimator"] for row in rows} == {"omp", "oracle_ls"}
    assert {row["deflated"] for row in rows} == {"true", "false"}


def test_simulate_json_suffix_selects_json(tmp_path, capsys):
    target = tmp_path / "sample.json"
    argv = ["simulate", "--config", str(DATA_DIR / "sample_scenario.toml"), "--trials", "1", "--workers", "1"]
    assert main([*argv, "--out", str(target)]) == 0
    capsys.readouterr()
    payload = json.loads(target.read_text(encoding="utf-8"))
    assert payload["scenario"]["trials"] == 1
    assert len(payload["rows"]) == 8


def test_simulate_exits_1_when_too_many_trials_fail(monkeypatch, capsys):
    def fail(scenario, point, trial_index):
        return TrialResult(point.index, trial_index, error="SolverError: did not converge")

    monkeypatch.setattr(harness, "run_trial", fail)
    argv = ["simulate", "--config", str(DATA_DIR / "sample_scenario.toml"), "--trials", "2", "--workers", "1"]
    assert main(argv) == 1
    captured = capsys.readouterr()
    assert captured.out == ""
    assert "deflatecrb: error: 2 of 2 trials failed at grid point 0" in captured.err
    assert "did not converge" in captured.err


def test_simulate_json_output_is_strict_json(capsys):
    argv = ["simulate", "--config", str(DATA_DIR / "sample_scenario.toml"), "--trials", "1", "--workers", "1"]
    assert main([*argv, "--json"]) == 0
    text = capsys.readouterr().out
    assert "NaN" not in text and "Infinity" not in text
    json.loads(text, parse_constant=pytest.fail)


def test_simulate_rejects_zero_trials():
    argv = ["simulate", "--config", str(DATA_DIR / "sample_scenario.toml"), "--trials", "0"]
    with pytest.raises(SystemExit) as excinfo:
        main(argv)
    assert excinfo.value.code == 2


def test_figure_is_deterministic(capsys):
    argv = ["figure", "--id", "2", "--trials", "2", "--workers", "1", "--seed", "9"]
    first = _json_output(capsys, argv)
    second = _json_output(capsys, argv)
    assert first == second
    assert len(first["rows"]) == 6
    assert len(first["curves"]["bounds"]) == 6
    assert {row["figure_id"] for row in first["rows"]} == {2}


def test_figure_rejects_unknown_id():
    with pytest.raises(SystemExit) as excinfo:
        main(["figure", "--id", "9"])
    assert excinfo.value.code == 2


def test_figure_csv_is_byte_identical_across_runs(tmp_path, capsys):
    outputs = []
    for name in ("first.csv", "second.csv"):
        target = tmp_path / name
        argv = ["figure", "--id", "4", "--trials", "2", "--seed", "7", "--workers", "1", "--out", str(target)]
        assert main(argv) == 0
        outputs.append((target.read_bytes(), target.with_name(f"{target.stem}_curves.csv").read_bytes()))
    capsys.readouterr()
    assert outputs[0] == outputs[1]
