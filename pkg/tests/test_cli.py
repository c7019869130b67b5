import json
import subprocess
import sys

import pytest

from reward_route.cli import main
from reward_route.fitness import EvalCaches, PenaltyWeights, evaluate_fitness
from reward_route.ga import WaypointSequence
from reward_route.scenario import load_scenario, save_scenario

from conftest import make_scenario


def toy_scenario_text():
    sc = make_scenario(
        waypoints=[(0.55, 0.55, 0.0), (2.05, 0.55, 1.0), (2.05, 2.05, 2.0),
                   (0.55, 2.05, 3.0), (2.55, 2.55, 0.0)],
        bounds=(0.0, 3.0, 0.0, 3.0), t_max=500.0)
    return save_scenario(sc)


@pytest.fixture
def scenario_file(tmp_path):
    path = tmp_path / "scenario.json"
    path.write_text(toy_scenario_text(), encoding="utf-8")
    return path


def plan_args(scenario_file, out, seed=7, extra=()):
    return ["plan", "--scenario", str(scenario_file), "--out", str(out),
            "--seed", str(seed), "--max-iter", "40", "--pop-size", "24",
            *extra]


class TestPlan:
    def test_smoke_writes_files_and_exits_zero(self, scenario_file, tmp_path):
        out = tmp_path / "run"
        code = main(plan_args(scenario_file, out, extra=["--plot"]))
        assert code == 0
        for name in ("solution.json", "trajectory.csv", "states.csv",
                     "history.csv", "plot.svg"):
            assert (out / name).exists(), name
        doc = json.loads((out / "solution.json").read_text())
        assert doc["feasible"] is True
        assert doc["sequence"][0] == 1

    def test_solution_reevaluates_to_stored_fitness(self, scenario_file, tmp_path):
        out = tmp_path / "run"
        assert main(plan_args(scenario_file, out)) == 0
        doc = json.loads((out / "solution.json").read_text())
        sc = load_scenario(scenario_file.read_text())
        ev = evaluate_fitness(WaypointSequence(tuple(doc["sequence"])), sc,
                              PenaltyWeights(), EvalCaches(sc))
        assert abs(ev.h - doc["fitness"]) <= 1e-12

    def test_missing_scenario_exits_one(self, tmp_path, capsys):
        code = main(["plan", "--scenario", str(tmp_path / "absent.json"),
                     "--out", str(tmp_path / "o")])
        assert code == 1
        assert "absent.json" in capsys.readouterr().err

    def test_overconstrained_exits_two(self, tmp_path):
        sc = make_scenario(
            waypoints=[(0.55, 0.55, 0.0), (2.05, 0.55, 1.0), (2.55, 2.55, 0.0)],
            bounds=(0.0, 3.0, 0.0, 3.0), d_max=0.5, v_max=1.0)
        path = tmp_path / "tight.json"
        path.write_text(save_scenario(sc), encoding="utf-8")
        out = tmp_path / "run"
        code = main(plan_args(path, out))
        assert code == 2
        doc = json.loads((out / "solution.json").read_text())
        assert doc["feasible"] is False

    def test_deterministic_outputs(self, scenario_file, tmp_path):
        out_a, out_b = tmp_path / "a", tmp_path / "b"
        assert main(plan_args(scenario_file, out_a, seed=3,
                              extra=["--threads", "1"])) == 0
        assert main(plan_args(scenario_file, out_b, seed=3,
                              extra=["--threads", "1"])) == 0
        for name in ("solution.json", "history.csv", "trajectory.csv",
                     "states.csv"):
            assert (out_a / name).read_bytes() == (out_b / name).read_bytes()

    def test_bad_flag_exits_one(self, scenario_file, tmp_path, capsys):
        code = main(["plan", "--scenario", str(scenario_file),
                     "--out", str(tmp_path / "o"), "--pm", "1.5"])
        assert code == 1

    def test_threads_env_fallback(self, scenario_file, tmp_path, monkeypatch):
        monkeypatch.setenv("REWARD_ROUTE_THREADS", "2")
        out = tmp_path / "run"
        assert main(plan_args(scenario_file, out)) == 0


class TestOracleCmd:
    def test_writes_oracle_json(self, scenario_file, tmp_path):
        out = tmp_path / "run"
        code = main(["oracle", "--scenario", str(scenario_file),
                     "--out", str(out)])
        assert code == 0
        doc = json.loads((out / "oracle.json").read_text())
        assert doc["feasible"] is True
        # three prizes, all collectable on this roomy map
        assert doc["reward"] == 6.0
        assert doc["fitness"] == 1.0

    def test_guard_exits_one(self, tmp_path, capsys):
        sc = make_scenario(
            waypoints=[(0.55, 0.55, 0.0)]
            + [(1.05 + 0.5 * k, 1.55, 1.0) for k in range(9)]
            + [(5.55, 5.55, 0.0)],
            bounds=(0.0, 7.0, 0.0, 7.0), t_max=500.0)
        path = tmp_path / "nine.json"
        path.write_text(save_scenario(sc), encoding="utf-8")
        code = main(["oracle", "--scenario", str(path),
                     "--out", str(tmp_path / "o")])
        assert code == 1
        assert "exceed" in capsys.readouterr().err

    def test_matches_plan_on_easy_instance(self, scenario_file, tmp_path):
        out_o = tmp_path / "o"
        out_p = tmp_path / "p"
        assert main(["oracle", "--scenario", str(scenario_file),
                     "--out", str(out_o)]) == 0
        assert main(plan_args(scenario_file, out_p)) == 0
        doc_o = json.loads((out_o / "oracle.json").read_text())
        doc_p = json.loads((out_p / "solution.json").read_text())
        assert abs(doc_o["fitness"] - doc_p["fitness"]) <= 1e-9


class TestBenchCmd:
    def test_zero_trials_exits_one(self, tmp_path, capsys):
        code = main(["bench", "--counts", "3", "--trials", "0",
                     "--out", str(tmp_path)])
        assert code == 1

    def test_bad_counts_exits_one(self, tmp_path):
        assert main(["bench", "--counts", "a,b", "--trials", "1",
                     "--out", str(tmp_path)]) == 1

    def test_smoke_and_reproducible(self, tmp_path, capsys):
        args = ["bench", "--counts", "2,3", "--trials", "1",
                "--out", None, "--seed", "5", "--pop-size", "10",
                "--max-iter", "2"]
        a_dir, b_dir = tmp_path / "a", tmp_path / "b"
        args_a = [*args]
        args_a[args_a.index(None)] = str(a_dir)
        args_b = [*args]
        args_b[args_b.index(None)] = str(b_dir)
        assert main(args_a) == 0
        assert main(args_b) == 0
        a = (a_dir / "bench.csv").read_text()
        lines = a.strip().split("\n")
        assert len(lines) == 4  # header + 2 rows + slope summary
        assert lines[-1].startswith("slope,")
        b = (b_dir / "bench.csv").read_text()
        assert [x.rsplit(",", 1)[0] for x in a.splitlines()[:-3]] == \
            [x.rsplit(",", 1)[0] for x in b.splitlines()[:-3]]


class TestEntryPoint:
    def test_module_invocation(self, scenario_file, tmp_path):
        result = subprocess.run(
            [sys.executable, "-m", "reward_route.cli", "plan",
             "--scenario", str(scenario_file), "--out", str(tmp_path / "r"),
             "--pop-size", "12", "--max-iter", "10"],
            capture_output=True, text=True)
        assert result.returncode == 0
