import csv
import json

import numpy as np
import pytest

from relosplit import cli
from relosplit.errors import ConfigError


def minimal_dr2_config(**overrides):
    doc = {
        "problem": {"name": "indicator_neglog"},
        "algorithm": "dr2",
        "schedule": {"kind": "constant", "gamma": 1.0},
        "stop": {"residual_tol": 1e-8, "max_iters": 200},
    }
    doc.update(overrides)
    return doc


def geometric_dr2_config(tmp_path):
    return {
        "problem": {"name": "indicator_neglog"},
        "algorithm": "dr2",
        "schedule": {"kind": "geometric", "limit": 1.0, "start": 2.0, "ratio": 0.5},
        "stop": {"residual_tol": 1e-9, "max_iters": 500},
        "x0": [3.0],
        "output": {
            "trace_path": str(tmp_path / "trace.csv"),
            "summary_path": str(tmp_path / "summary.json"),
        },
    }


class TestParseConfig:
    def test_minimal_dr2(self):
        cfg = cli.parse_config(minimal_dr2_config())
        assert cfg.algorithm == "dr2"
        assert cfg.schedule["kind"] == "constant"

    def test_round_trip(self, tmp_path):
        cfg = cli.parse_config(geometric_dr2_config(tmp_path))
        assert cli.parse_config(cli.config_to_dict(cfg)) == cfg

    def test_round_trip_graph_config(self):
        doc = {
            "problem": {"name": "affine_random",
                        "params": {"count": 3, "dim": 2}, "seed": 1},
            "algorithm": "graph",
            "theta": 1.0,
            "graph": {"N": 3, "E": [[1, 2], [2, 3], [1, 3]],
                      "Eprime": [[1, 2], [2, 3]]},
            "schedule": {"kind": "explicit", "values": [2.0, 1.0, 1.0]},
            "stop": {"residual_tol": 1e-8, "max_iters": 50},
            "x0": [[0.0, 0.0], [0.0, 0.0]],
        }
        cfg = cli.parse_config(doc)
        assert cli.parse_config(cli.config_to_dict(cfg)) == cfg

    def test_mt_theta_out_of_range(self):
        doc = {
            "problem": {"name": "affine_consensus",
                        "params": {"count": 3, "dim": 2}, "seed": 0},
            "algorithm": "mt",
            "theta": 1.5,
            "schedule": {"kind": "constant", "gamma": 1.0},
            "stop": {"residual_tol": 1e-8, "max_iters": 10},
        }
        with pytest.raises(ConfigError) as err:
            cli.parse_config(doc)
        assert any("theta must lie in (0,1)" in m for m in err.value.errors)

    def test_graph_backward_arc(self):
        doc = {
            "problem": {"name": "affine_consensus",
                        "params": {"count": 3, "dim": 2}, "seed": 0},
            "algorithm": "graph",
            "theta": 1.0,
            "graph": {"N": 3, "E": [[1, 2], [3, 2]], "Eprime": [[1, 2], [3, 2]]},
            "schedule": {"kind": "constant", "gamma": 1.0},
            "stop": {"residual_tol": 1e-8, "max_iters": 10},
        }
        with pytest.raises(ConfigError) as err:
            cli.parse_config(doc)
        assert any("ordering" in m for m in err.value.errors)

    def test_dr2_arity_enforced(self):
        doc = minimal_dr2_config(
            problem={"name": "affine_consensus",
                     "params": {"count": 3, "dim": 2}, "seed": 0})
        with pytest.raises(ConfigError) as err:
            cli.parse_config(doc)
        assert any("exactly 2 operators" in m for m in err.value.errors)

    def test_aggregated_errors(self):
        doc = {
            "problem": {"name": "nope"},
            "algorithm": "warp",
            "schedule": {"kind": "nope"},
            "stop": {"residual_tol": -1, "max_iters": 0},
            "bogus": 1,
        }
        with pytest.raises(ConfigError) as err:
            cli.parse_config(doc)
        messages = "\n".join(err.value.errors)
        for fragment in ("problem.name", "algorithm", "schedule", "stop", "bogus"):
            assert fragment in messages

    def test_invalid_json_text(self):
        with pytest.raises(ConfigError):
            cli.parse_config("{not json")


class TestExecuteExperiment:
    def test_dr2_geometric_writes_outputs(self, tmp_path, capsys):
        cfg = cli.parse_config(geometric_dr2_config(tmp_path))
        code = cli.execute_experiment(cfg)
        assert code == 0
        summary = json.loads((tmp_path / "summary.json").read_text())
        assert summary["status"] == "converged"
        # the shadow point converges to the solution z = 1
        assert abs(summary["final_point"][0] - 1.0) <= 1e-6
        assert summary["final_solution_residual"] <= 1e-6
        with open(tmp_path / "trace.csv") as fh:
            rows = list(csv.DictReader(fh))
        assert rows[0]["gamma"] == "2"
        assert {"n", "gamma", "residual", "solution_residual", "point_0",
                "z_0", "y_0", "w_0"} <= set(rows[0])

    def test_trace_csv_lossless(self, tmp_path):
        cfg = cli.parse_config(geometric_dr2_config(tmp_path))
        trace = cli.run_experiment(cfg)
        trace.write_csv(tmp_path / "t.csv")
        with open(tmp_path / "t.csv") as fh:
            rows = list(csv.DictReader(fh))
        for n, row in enumerate(rows):
            assert float(row["point_0"]) == trace.points[n][0]
            assert float(row["gamma"]) == trace.gammas[n]

    def test_mt_consensus(self, tmp_path):
        doc = {
            "problem": {"name": "affine_consensus",
                        "params": {"c": [[1.0], [3.0], [5.0], [7.0]]}},
            "algorithm": "mt",
            "theta": 0.5,
            "schedule": {"kind": "constant", "gamma": 1.0},
            "stop": {"residual_tol": 1e-10, "max_iters": 2000},
            "output": {"summary_path": str(tmp_path / "s.json")},
        }
        code = cli.execute_experiment(cli.parse_config(doc))
        assert code == 0
        summary = json.loads((tmp_path / "s.json").read_text())
        z_blocks = np.array(summary["final_point"]).reshape(4, 1)
        assert np.max(np.abs(z_blocks - 4.0)) <= 1e-6

    def test_graph_algorithm_runs(self, tmp_path):
        doc = {
            "problem": {"name": "affine_consensus",
                        "params": {"c": [[0.0, 0.0], [2.0, 2.0], [4.0, -2.0]]}},
            "algorithm": "graph",
            "theta": 1.0,
            "graph": {"N": 3, "E": [[1, 2], [2, 3], [1, 3]],
                      "Eprime": [[1, 2], [2, 3]]},
            "schedule": {"kind": "geometric", "limit": 1.0, "start": 2.0,
                         "ratio": 0.5},
            "stop": {"residual_tol": 1e-10, "max_iters": 2000},
        }
        trace = cli.run_experiment(cli.parse_config(doc))
        assert trace.status == "converged"
        z_blocks = trace.points[-1].reshape(3, 2)
        assert np.max(np.abs(z_blocks - np.array([2.0, 0.0]))) <= 1e-6

    def test_infeasible_box_hits_max_iters(self, tmp_path):
        doc = {
            "problem": {"name": "box_feasibility",
                        "params": {"boxes": [[[0.0], [1.0]], [[2.0], [3.0]]]}},
            "algorithm": "mt",
            "theta": 0.5,
            "schedule": {"kind": "constant", "gamma": 1.0},
            "stop": {"residual_tol": 1e-9, "max_iters": 50},
        }
        code = cli.execute_experiment(cli.parse_config(doc))
        assert code == 2

    def test_custom_operator_specs_through_config(self):
        doc = {
            "problem": {"name": "custom", "params": {
                "ops": [
                    {"kind": "normal_cone_point", "c": [1.0]},
                    {"kind": "neg_log", "dim": 1},
                ],
                "solution": [1.0],
            }},
            "algorithm": "dr2",
            "schedule": {"kind": "geometric", "limit": 1.0, "start": 2.0,
                         "ratio": 0.5},
            "stop": {"residual_tol": 1e-9, "max_iters": 200},
            "x0": [3.0],
        }
        trace = cli.run_experiment(cli.parse_config(doc))
        assert trace.status == "converged"
        assert abs(trace.points[-1][0] - 1.0) <= 1e-6

    def test_io_failure_exit_code(self, tmp_path):
        cfg = cli.parse_config(minimal_dr2_config())
        code = cli.execute_experiment(
            cfg, trace_out=str(tmp_path / "missing_dir" / "trace.csv"))
        assert code == 4


class TestMainEntry:
    def test_run_subcommand(self, tmp_path, capsys):
        path = tmp_path / "cfg.json"
        path.write_text(json.dumps(geometric_dr2_config(tmp_path)))
        code = cli.main(["run", str(path)])
        assert code == 0
        out = capsys.readouterr().out
        assert json.loads(out.strip().splitlines()[-1])["status"] == "converged"

    def test_run_jobs_batch(self, tmp_path):
        paths = []
        for i in range(2):
            sub = tmp_path / f"run{i}"
            sub.mkdir()
            path = tmp_path / f"cfg{i}.json"
            path.write_text(json.dumps(geometric_dr2_config(sub)))
            paths.append(str(path))
        code = cli.main(["run", *paths, "--jobs", "2"])
        assert code == 0
        assert (tmp_path / "run0" / "summary.json").exists()
        assert (tmp_path / "run1" / "summary.json").exists()

    def test_run_invalid_config(self, tmp_path, capsys):
        path = tmp_path / "bad.json"
        path.write_text(json.dumps({"algorithm": "dr2"}))
        code = cli.main(["run", str(path)])
        assert code == 1
        assert "problem" in capsys.readouterr().err

    def test_run_missing_file(self, tmp_path):
        assert cli.main(["run", str(tmp_path / "nope.json")]) == 4

    def test_validate_schedule_accepted(self, tmp_path, capsys):
        path = tmp_path / "cfg.json"
        path.write_text(json.dumps(minimal_dr2_config()))
        assert cli.main(["validate-schedule", str(path)]) == 0
        report = json.loads(capsys.readouterr().out)
        assert report["accepted"] is True

    def test_validate_schedule_rejected(self, tmp_path, capsys):
        doc = minimal_dr2_config(
            schedule={"kind": "explicit", "values": [1.0, 1.5, 0.5, 0.625, -0.375]})
        path = tmp_path / "cfg.json"
        path.write_text(json.dumps(doc))
        assert cli.main(["validate-schedule", str(path)]) == 1
        report = json.loads(capsys.readouterr().out)
        assert report["accepted"] is False

    def test_compare(self, tmp_path, capsys):
        p1 = tmp_path / "a.json"
        p2 = tmp_path / "b.json"
        p1.write_text(json.dumps(minimal_dr2_config(x0=[3.0])))
        p2.write_text(json.dumps({
            **minimal_dr2_config(x0=[3.0]),
            "schedule": {"kind": "geometric", "limit": 1.0, "start": 2.0,
                         "ratio": 0.5},
        }))
        code = cli.main(["compare", str(p1), str(p2)])
        assert code == 0
        report = json.loads(capsys.readouterr().out)
        assert {"a", "b", "iters_delta"} <= set(report)

    def test_selftest_passes(self, capsys):
        code = cli.main(["selftest"])
        assert code == 0
        report = json.loads(capsys.readouterr().out)
        assert report["passed"] is True
        names = {g["name"] for g in report["groups"]}
        assert "negative_controls" in names
        assert all(g["checks"] > 0 for g in report["groups"])
