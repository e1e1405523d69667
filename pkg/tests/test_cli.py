import csv
import json
import subprocess
import sys

import numpy as np
import pytest

from arcsine_lab import cli
from arcsine_lab.engine import ResampleBudgetError


def read_csv(path):
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


def run(tmp_path, *args):
    return cli.main(list(args) + ["--out", str(tmp_path)])


class TestSampleGas:
    def test_constant_law(self, tmp_path, capsys):
        assert run(tmp_path, "sample-gas", "--alpha", "1", "--beta", "0.5,0.5",
                   "--n-samples", "20") == cli.EXIT_OK
        rows = read_csv(tmp_path / "samples.csv")
        assert len(rows) == 20 and list(rows[0]) == ["zeta_1", "zeta_2"]
        assert all(float(r["zeta_1"]) == 0.5 and float(r["zeta_2"]) == 0.5 for r in rows)
        assert "sample mean" in capsys.readouterr().out

    def test_rows_on_simplex_and_reproducible(self, tmp_path):
        a, b = tmp_path / "a", tmp_path / "b"
        for out in (a, b):
            assert cli.main(["sample-gas", "--alpha", "0.4", "--beta", "0.2,0.3,0.5",
                             "--n-samples", "500", "--seed", "42", "--out", str(out)]) == 0
        rows = read_csv(a / "samples.csv")
        assert all(abs(sum(float(v) for v in r.values()) - 1.0) < 1e-9 for r in rows)
        assert (a / "samples.csv").read_bytes() == (b / "samples.csv").read_bytes()
        man = json.loads((a / "manifest.json").read_text())
        assert man["seed"] == 42 and man["config"]["beta"] == [0.2, 0.3, 0.5]
        assert "version" in man

    @pytest.mark.parametrize("args", [["--alpha", "1.5"], ["--beta", "0.5,0.6"],
                                      ["--beta", "a,b"], ["--n-samples", "0"], ["--seed", "-1"]])
    def test_bad_values(self, tmp_path, args):
        assert run(tmp_path, "sample-gas", *args) == cli.EXIT_USAGE


class TestSimulate:
    def test_chain_rows_per_checkpoint(self, tmp_path):
        assert run(tmp_path, "simulate", "--model", "chain", "--p", "0.2,0.3,0.5",
                   "--checkpoints", "100,1000", "--n-traj", "10000", "--threads", "2") == 0
        rows = read_csv(tmp_path / "occupation.csv")
        assert len(rows) == 20_000
        assert sum(r["n"] == "100" for r in rows) == 10_000
        prof = read_csv(tmp_path / "junction_profile.csv")
        assert [p["n"] for p in prof] == ["100", "1000"]

    def test_boole_ray_names(self, tmp_path, capsys):
        assert run(tmp_path, "simulate", "--checkpoints", "10,100", "--n-traj", "5") == 0
        man = json.loads((tmp_path / "manifest.json").read_text())
        assert man["ray_names"] == ["(-inf,-1)", "(1,inf)"]
        assert man["config"]["measure"] == "uniform_boole"
        assert "(-inf,-1)" in capsys.readouterr().out

    def test_cubic_constants_in_manifest(self, tmp_path):
        assert run(tmp_path, "simulate", "--model", "cubic3", "--eps", "0.04",
                   "--checkpoints", "50", "--n-traj", "4") == 0
        model = json.loads((tmp_path / "manifest.json").read_text())["config"]["model"]
        assert model == {"kind": "cubic3", "eps": 0.04, "c": [18.0, 72.0, 18.0]}

    def test_threads_do_not_change_output(self, tmp_path):
        outs = []
        for threads in ("1", "3"):
            out = tmp_path / threads
            assert cli.main(["simulate", "--model", "cubic3", "--checkpoints", "100,1000",
                             "--n-traj", "300", "--seed", "9", "--threads", threads,
                             "--out", str(out)]) == 0
            outs.append((out / "occupation.csv").read_bytes())
        assert outs[0] == outs[1]

    @pytest.mark.parametrize("args", [
        ["--model", "chain", "--p", "0.5,0.6"],
        ["--checkpoints", "100,10"],
        ["--measure", "origin"],
        ["--measure", "nonsense"],
        ["--model", "cubic3", "--eps", "0.5"],
    ])
    def test_bad_values(self, tmp_path, args):
        assert run(tmp_path, "simulate", "--n-traj", "2", *args) == cli.EXIT_USAGE

    def test_runtime_error_exit_code(self, tmp_path, monkeypatch):
        def boom(*a, **k):
            raise ResampleBudgetError("no usable start")

        monkeypatch.setattr(cli, "run_ensemble", boom)
        assert run(tmp_path, "simulate", "--checkpoints", "10", "--n-traj", "2") == cli.EXIT_RUNTIME


class TestConfig:
    def test_unknown_key(self, tmp_path):
        cfg = tmp_path / "c.json"
        cfg.write_text(json.dumps({"alpha": 0.5, "bogus": 1}))
        assert run(tmp_path, "sample-gas", "--config", str(cfg)) == cli.EXIT_USAGE

    def test_unreadable_config(self, tmp_path):
        assert run(tmp_path, "sample-gas", "--config", str(tmp_path / "missing.json")) == 2
        bad = tmp_path / "bad.json"
        bad.write_text("[1, 2]")
        assert run(tmp_path, "sample-gas", "--config", str(bad)) == 2

    def test_flags_override_file(self, tmp_path):
        cfg = tmp_path / "c.json"
        cfg.write_text(json.dumps({"alpha": 0.3, "n_samples": 7, "seed": 1}))
        assert run(tmp_path, "sample-gas", "--config", str(cfg), "--n-samples", "3") == 0
        man = json.loads((tmp_path / "manifest.json").read_text())
        assert man["config"]["alpha"] == 0.3 and man["config"]["n_samples"] == 3
        assert len(read_csv(tmp_path / "samples.csv")) == 3

    def test_manifest_replay(self, tmp_path):
        first, second = tmp_path / "first", tmp_path / "second"
        assert cli.main(["simulate", "--model", "chain", "--p", "0.3,0.7", "--checkpoints",
                         "50,500", "--n-traj", "40", "--seed", "17", "--out", str(first)]) == 0
        cfg = json.loads((first / "manifest.json").read_text())["config"]
        cfg.pop("out")
        replay = tmp_path / "replay.json"
        replay.write_text(json.dumps(cfg))
        assert cli.main(["simulate", "--config", str(replay), "--out", str(second)]) == 0
        assert (first / "occupation.csv").read_bytes() == (second / "occupation.csv").read_bytes()

    def test_config_for_other_command(self, tmp_path):
        cfg = tmp_path / "c.json"
        cfg.write_text(json.dumps({"experiment": "simulate"}))
        assert run(tmp_path, "sample-gas", "--config", str(cfg)) == cli.EXIT_USAGE

    def test_usage_errors(self, tmp_path):
        assert cli.main([]) == cli.EXIT_USAGE
        assert cli.main(["no-such-command"]) == cli.EXIT_USAGE
        assert run(tmp_path, "sample-gas", "--alpha", "x") == cli.EXIT_USAGE

    def test_output_dir_is_a_file(self, tmp_path):
        f = tmp_path / "file"
        f.write_text("x")
        assert cli.main(["sample-gas", "--out", str(f)]) == cli.EXIT_USAGE


class TestWandering:
    def test_table(self, tmp_path):
        assert run(tmp_path, "wandering", "--p", "0.2,0.8", "--horizon", "200") == 0
        rows = read_csv(tmp_path / "wandering.csv")
        assert len(rows) >= 200
        man = json.loads((tmp_path / "manifest.json").read_text())
        assert man["config"]["p"] == [0.2, 0.8] and man["config"]["horizon"] == 200

    def test_horizon_too_large(self, tmp_path):
        assert run(tmp_path, "wandering", "--horizon", str(10 ** 12)) == cli.EXIT_USAGE


class TestFit:
    def test_fit_samples(self, tmp_path, capsys):
        assert run(tmp_path, "sample-gas", "--alpha", "0.5", "--beta", "0.3,0.7",
                   "--n-samples", "5000", "--seed", "3") == 0
        assert run(tmp_path, "fit", "--input", str(tmp_path / "samples.csv")) == 0
        res = json.loads((tmp_path / "fit.json").read_text())
        assert res["kind"] == "regular" and abs(res["alpha_hat"] - 0.5) <= 0.1
        np.testing.assert_allclose(res["beta_hat"], [0.3, 0.7], atol=0.03)
        assert "alpha_hat" in capsys.readouterr().out

    def test_fit_occupation_with_merge(self, tmp_path):
        assert run(tmp_path, "simulate", "--model", "chain", "--p", "0.25,0.25,0.5",
                   "--checkpoints", "100,2000", "--n-traj", "1200", "--seed", "4") == 0
        assert run(tmp_path, "fit", "--input", str(tmp_path / "occupation.csv"),
                   "--merge", "1,2;3") == 0
        res = json.loads((tmp_path / "fit.json").read_text())
        assert len(res["beta_hat"]) == 2
        assert json.loads((tmp_path / "manifest.json").read_text())["n_rows"] == 1200

    def test_fit_errors(self, tmp_path):
        assert run(tmp_path, "fit") == cli.EXIT_USAGE
        assert run(tmp_path, "fit", "--input", str(tmp_path / "missing.csv")) == cli.EXIT_USAGE
        assert run(tmp_path, "sample-gas", "--n-samples", "10") == 0
        assert run(tmp_path, "fit", "--input", str(tmp_path / "samples.csv")) == cli.EXIT_USAGE
        assert run(tmp_path, "sample-gas", "--n-samples", "2000") == 0
        assert run(tmp_path, "fit", "--input", str(tmp_path / "samples.csv"),
                   "--merge", "1;5") == cli.EXIT_USAGE


class TestVerify:
    def test_unknown_experiment(self, tmp_path):
        assert run(tmp_path, "verify", "nope") == cli.EXIT_USAGE

    def test_tauberian_passes(self, tmp_path, capsys):
        assert run(tmp_path, "verify", "tauberian") == cli.EXIT_OK
        report = json.loads((tmp_path / "report.json").read_text())
        assert report["passed"] is True
        man = json.loads((tmp_path / "manifest.json").read_text())
        assert man["config"]["seed"] == 0 and man["command"] == "verify"
        assert "PASS" in capsys.readouterr().out

    @pytest.mark.slow
    def test_double_laplace_asymptotics_passes(self, tmp_path):
        assert run(tmp_path, "verify", "prop51") == cli.EXIT_OK
        rows = json.loads((tmp_path / "report.json").read_text())["checks"][0]["details"]["rows"]
        assert [r["t"] for r in rows] == [100.0, 1000.0, 10000.0]

    def test_exact_oracles_with_threads(self, tmp_path):
        assert run(tmp_path, "verify", "exact-oracles", "--threads", "2") == cli.EXIT_OK

    def test_statistical_failure_exit_code(self, tmp_path, monkeypatch):
        from arcsine_lab.experiments import Verdict
        from arcsine_lab.gof import GofReport

        def failing(seed=None):
            return Verdict("tauberian", [GofReport("x", 1.0, (1,), 0.5, False)], 0.0, {}, {})

        monkeypatch.setitem(cli.EXPERIMENTS, "tauberian", failing)
        assert run(tmp_path, "verify", "tauberian") == cli.EXIT_FAIL


def test_console_entry_point():
    proc = subprocess.run([sys.executable, "-m", "arcsine_lab.cli", "--version"],
                          capture_output=True, text=True)
    assert proc.returncode == 0 and "arcsine-lab" in proc.stdout
