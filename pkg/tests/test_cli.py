"""Tests for the npg-lab command line."""

import json
import logging

import pytest

from npg_lab import cli
from npg_lab.exceptions import RegularizedOptimumError
from npg_lab.utils import logging as lab_logging


@pytest.fixture(autouse=True)
def isolated_logging(monkeypatch):
    root = logging.getLogger()
    before = list(root.handlers)
    monkeypatch.setattr(lab_logging, "_CONFIGURED", False)
    yield
    for handler in root.handlers[:]:
        if handler not in before:
            root.removeHandler(handler)
            handler.close()


@pytest.fixture
def run(tmp_path, capsys):
    """Run the CLI and return (exit code, parsed stdout or None)."""

    def invoke(*argv):
        code = cli.main(["--log-dir", str(tmp_path / "logs"), *argv])
        out = capsys.readouterr().out
        return code, json.loads(out) if out.strip() else None

    return invoke


class TestSolve:
    def test_uniform_policy(self, run):
        code, doc = run("solve", "builtin:kakade_two_state")
        assert code == 0
        assert doc["reward"] == pytest.approx(0.735)
        assert doc["rho"] == pytest.approx([0.47, 0.53])
        assert len(doc["q"]) == 2

    def test_policy_file(self, run, tmp_path):
        policy = tmp_path / "policy.json"
        policy.write_text(json.dumps({"probs": [[0.0, 1.0], [1.0, 0.0]]}))
        code, doc = run("solve", "builtin:kakade_two_state", "--policy", str(policy))
        assert code == 0
        assert doc["reward"] == pytest.approx(1.84)

    def test_invalid_policy(self, run, tmp_path):
        policy = tmp_path / "policy.json"
        policy.write_text(json.dumps([[0.5, 0.6], [1.0, 0.0]]))
        code, _ = run("solve", "builtin:kakade_two_state", "--policy", str(policy))
        assert code == 1

    def test_missing_mdp(self, run, tmp_path):
        code, _ = run("solve", str(tmp_path / "absent.json"))
        assert code == 1


class TestOracle:
    def test_two_state(self, run):
        code, doc = run("oracle", "builtin:kakade_two_state")
        assert code == 0
        assert doc["optimal_value"] == pytest.approx(1.84)
        assert doc["is_unique"]
        assert doc["maximizers"][0]["actions"] == [1, 0]
        assert "regularized" not in doc

    def test_regularized(self, run):
        code, doc = run(
            "oracle", "builtin:kakade_two_state", "--lambda", "0.5", "--regularizer", "sigma:1"
        )
        assert code == 0
        assert doc["regularized"]["regularizer"] == "sigma:1"
        assert doc["regularized"]["value"] > doc["optimal_value"]

    def test_lambda_without_regularizer(self, run):
        code, _ = run("oracle", "builtin:kakade_two_state", "--lambda", "0.5")
        assert code == 1


class TestNewton:
    def test_reports_errors(self, run):
        code, doc = run(
            "newton", "builtin:kakade_two_state", "--geometry", "morimura", "--lambda", "0.5"
        )
        assert code == 0
        assert doc["step_size"] == pytest.approx(2.0)
        assert doc["step_size_rule"] == "1/lambda"
        assert doc["errors"][-1] < doc["errors"][0]
        assert not doc["diverged"]

    def test_explicit_step_size(self, run):
        code, doc = run(
            "newton",
            "builtin:kakade_two_state",
            "--geometry",
            "morimura",
            "--lambda",
            "0.5",
            "--step-size",
            "0.5",
            "--max-iters",
            "5",
        )
        assert code == 0
        assert doc["step_size"] == pytest.approx(0.5)
        assert doc["step_size_rule"] == "given"

    def test_unsolved_reference_exits_with_numerical_code(self, run, monkeypatch):
        def failing(*args, **kwargs):
            raise RegularizedOptimumError("Newton step failed: array must not contain infs or NaNs")

        monkeypatch.setattr(cli, "regularized_npg_newton", failing)
        code, doc = run(
            "newton", "builtin:kakade_two_state", "--geometry", "morimura", "--lambda", "0.5"
        )
        assert code == 2
        assert doc is None

    def test_geometry_without_potential(self, run):
        code, _ = run(
            "newton", "builtin:kakade_two_state", "--geometry", "vanilla", "--lambda", "0.5"
        )
        assert code == 1

    def test_nonpositive_lambda(self, run):
        code, _ = run("newton", "builtin:kakade_two_state", "--geometry", "kakade", "--lambda", "0")
        assert code == 1


class TestFlow:
    def test_small_sweep(self, run, tmp_path):
        out = tmp_path / "runs"
        code, doc = run(
            "flow",
            "builtin:kakade_two_state",
            "--geometry",
            "kakade",
            "--geometry",
            "sigma:0.5",
            "--inits",
            "1",
            "--max-iters",
            "10",
            "--out",
            str(out),
        )
        assert code == 0
        assert set(doc["methods"]) == {"kakade", "sigma:0.5"}
        assert (out / "summary.json").exists()
        assert (out / "kakade_init000.csv").exists()


class TestUsage:
    @pytest.mark.parametrize(
        "argv",
        [(), ("frobnicate",), ("oracle",), ("flow", "builtin:kakade_two_state")],
        ids=["no-command", "unknown-command", "missing-mdp", "missing-geometry"],
    )
    def test_usage_errors(self, run, argv):
        code, doc = run(*argv)
        assert code == 1
        assert doc is None
