import io
import json
import os
import sys

import pytest

from slrtrack import matio
from slrtrack.cli import EXIT_ERROR
from slrtrack.cli import EXIT_OK
from slrtrack.cli import EXIT_THRESHOLD
from slrtrack.cli import main
from slrtrack.scenarios import assemble_scenario
from slrtrack.scenarios import load_ground_truth
from slrtrack.scenarios import parse_scenario

SCENARIO = {
    "name": "cli", "n": 40, "tmax": 160, "r": 2, "change_times": [80], "deltas": [0.001],
    "outlier_segments": [{"start": 0, "model": "bernoulli", "rho": 0.01}, {"start": 40, "model": "bernoulli", "rho": 0.05}],
    "t_train": 40, "seed": 2,
}
NORST_PARAMS = ["--param", "alpha=20", "--param", "K=2"]


@pytest.fixture
def scenario_file(tmp_path):
    path = tmp_path / "scenario.json"
    path.write_text(json.dumps(SCENARIO))
    return str(path)


@pytest.fixture
def suite_file(tmp_path):
    path = tmp_path / "suite.json"
    path.write_text(json.dumps({
        "scenarios": [SCENARIO],
        "algorithms": [{"name": "norst", "params": {"alpha": 20, "K": 2}}, {"name": "altproj"}],
        "trials": 2,
    }))
    return str(path)


def test_gen(tmp_path, scenario_file):
    out = str(tmp_path / "gen")
    assert main(["gen", "--config", scenario_file, "--out", out]) == EXIT_OK
    truth = load_ground_truth(out)
    assert truth.M.shape == (40, 160)
    assert truth.config.seed == 2


def test_gen_seed_from_environment(tmp_path, scenario_file, monkeypatch):
    monkeypatch.setenv("SLR_SEED", "17")
    out = str(tmp_path / "gen")
    assert main(["gen", "--config", scenario_file, "--out", out]) == EXIT_OK
    assert load_ground_truth(out).config.seed == 17
    monkeypatch.setenv("SLR_SEED", "seventeen")
    assert main(["gen", "--config", scenario_file, "--out", out]) == EXIT_ERROR


def test_gen_missing_config(tmp_path, capsys):
    assert main(["gen", "--config", str(tmp_path / "nope.json"), "--out", str(tmp_path)]) == EXIT_ERROR
    assert "slr: error" in capsys.readouterr().err


def test_run_batch(tmp_path, scenario_file):
    out = str(tmp_path / "run")
    assert main(["run", "--algo", "altproj", "--config", scenario_file, "--param", "T_per_stage=5", "--out", out]) == EXIT_OK
    with open(os.path.join(out, "record.json")) as f:
        record = json.load(f)
    assert record["algo"] == "altproj"
    assert record["params"] == {"T_per_stage": 5}
    assert record["error"] is None
    assert os.path.exists(os.path.join(out, "curve.csv"))


def test_run_failure_exit_code(scenario_file):
    assert main(["run", "--algo", "altproj", "--config", scenario_file, "--param", "r=500"]) == EXIT_ERROR
    assert main(["run", "--algo", "altproj"]) == EXIT_ERROR
    assert main(["run", "--algo", "altproj", "--config", scenario_file, "--param", "r"]) == EXIT_ERROR


def test_run_streams_matrix_file(tmp_path, scenario_file):
    truth = assemble_scenario(parse_scenario(SCENARIO))
    data = str(tmp_path / "M.slrm")
    matio.write_matrix(data, truth.M)
    out = str(tmp_path / "stream")
    code = main(["run", "--algo", "norst", "--config", scenario_file, "--data", data, "--out", out] + NORST_PARAMS)
    assert code == EXIT_OK
    with open(os.path.join(out, "frames.csv")) as f:
        lines = f.read().splitlines()
    assert lines[0] == "t,|T|,||x||,residual,phase,k"
    assert len(lines) == 1 + 160 - 40
    assert lines[1].startswith("40,")
    with open(os.path.join(out, "summary.json")) as f:
        summary = json.load(f)
    assert summary["frames"] == 160
    assert summary["params"]["alpha"] == 20


def test_run_streams_stdin(tmp_path, monkeypatch, capsys):
    truth = assemble_scenario(parse_scenario(SCENARIO))
    stream = io.BytesIO()
    for t in range(truth.tmax):
        matio.write_frame(stream, truth.M[:, t])
    stream.seek(0)
    monkeypatch.setattr(sys, "stdin", io.TextIOWrapper(stream))
    out = str(tmp_path / "stdin")
    params = ["--param", "r=2", "--param", "xmin=10", "--param", "t_train=40"] + NORST_PARAMS
    assert main(["run", "--algo", "norst", "--data", "-", "--out", out] + params) == EXIT_OK
    printed = json.loads(capsys.readouterr().out.strip().splitlines()[-1])
    assert printed["frames"] == 160


def test_streaming_is_norst_only(tmp_path, scenario_file):
    assert main(["run", "--algo", "pcp", "--config", scenario_file, "--data", "-"]) == EXIT_ERROR


def test_bench_and_verify(tmp_path, suite_file):
    golden = str(tmp_path / "golden")
    assert main(["bench", "--suite", suite_file, "--out", golden, "--deterministic"]) == EXIT_OK
    assert sorted(os.listdir(golden)) == [
        "cli__altproj.csv", "cli__norst.csv", "plot.gp", "suite.json", "summary.json",
    ]
    assert main(["verify", "--golden", golden]) == EXIT_OK

    candidate = str(tmp_path / "candidate")
    assert main(["bench", "--suite", suite_file, "--out", candidate, "--workers", "2", "--deterministic"]) == EXIT_OK
    assert main(["verify", "--golden", golden, "--candidate", candidate]) == EXIT_OK

    path = os.path.join(candidate, "cli__norst.csv")
    with open(path) as f:
        lines = f.read().splitlines()
    t, se, rel, ms = lines[1].split(",")
    lines[1] = ",".join([t, repr(float(se) * 2 + 1), rel, ms])
    with open(path, "w") as f:
        f.write("\n".join(lines) + "\n")
    assert main(["verify", "--golden", golden, "--candidate", candidate]) == EXIT_THRESHOLD


def test_bench_trials_and_seed_override(tmp_path, suite_file, monkeypatch):
    monkeypatch.setenv("SLR_SEED", "5")
    out = str(tmp_path / "bench")
    assert main(["bench", "--suite", suite_file, "--trials", "1", "--out", out]) == EXIT_OK
    with open(os.path.join(out, "summary.json")) as f:
        assert json.load(f)["seeds"] == [5]


def test_bench_threshold_failure(tmp_path):
    path = tmp_path / "suite.json"
    path.write_text(json.dumps({
        "scenarios": [SCENARIO], "algorithms": [{"name": "altproj"}], "trials": 1,
        "thresholds": {"cli/altproj": 0.0, "cli/pcp": 1.0},
    }))
    assert main(["bench", "--suite", str(path), "--out", str(tmp_path / "out")]) == EXIT_THRESHOLD


def test_bench_needs_suite():
    assert main(["bench"]) == EXIT_ERROR
