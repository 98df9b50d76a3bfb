import json

import pytest

from stochpp.cli import load_config, main
from stochpp.errors import ConfigError

from conftest import THETA

PARAMS_TOML = "[params]\n" + "\n".join(f"{k} = {v}" for k, v in THETA.items())


def write_config(tmp_path, body, name="scenario.toml"):
    path = tmp_path / name
    path.write_text(body + "\n")
    return str(path)


@pytest.fixture
def params_config(tmp_path):
    return write_config(tmp_path, PARAMS_TOML)


class TestLoadConfig:
    def test_minimal(self, params_config):
        cfg = load_config(params_config)
        assert cfg["params"]["a1"] == 2.0

    def test_missing_file(self, tmp_path):
        with pytest.raises(ConfigError, match="not found"):
            load_config(str(tmp_path / "nope.toml"))

    def test_malformed_toml(self, tmp_path):
        with pytest.raises(ConfigError):
            load_config(write_config(tmp_path, "[params\na1 = "))

    def test_unknown_section(self, tmp_path):
        with pytest.raises(ConfigError, match="unknown sections"):
            load_config(write_config(tmp_path, PARAMS_TOML + "\n[extras]\nfoo = 1"))

    def test_unknown_key(self, tmp_path):
        with pytest.raises(ConfigError, match="unknown keys"):
            load_config(
                write_config(tmp_path, PARAMS_TOML + "\n[sim]\ntimestep = 0.1")
            )

    def test_missing_params(self, tmp_path):
        with pytest.raises(ConfigError, match="params"):
            load_config(write_config(tmp_path, "[sim]\ndt = 0.1"))


class TestExitCodes:
    def test_classify_ok(self, params_config, tmp_path, capsys):
        code = main(["classify", "--config", params_config,
                     "--out", str(tmp_path / "out")])
        assert code == 0
        out = capsys.readouterr().out
        assert "lambda=0.884371" in out
        assert "regime=Coexistence" in out

    def test_classify_critical_band(self, tmp_path, capsys):
        # lambda ~ 0.884: an enormous eps_critical forces the critical exit
        cfg = write_config(tmp_path, PARAMS_TOML)
        code = main(["classify", "--config", cfg, "--out", str(tmp_path / "o"),
                     "--eps-critical", "1.0"])
        assert code == 3
        assert "regime=Critical" in capsys.readouterr().out

    def test_config_error_exit(self, tmp_path, capsys):
        cfg = write_config(tmp_path, "[params]\na1 = 2.0")
        assert main(["classify", "--config", cfg, "--out", str(tmp_path)]) == 2
        assert "config error" in capsys.readouterr().err

    def test_invalid_params_exit(self, tmp_path, capsys):
        cfg = write_config(tmp_path, PARAMS_TOML.replace("b1 = 1.0", "b1 = -1.0"))
        assert main(["classify", "--config", cfg, "--out", str(tmp_path)]) == 2

    def test_invalid_mode_exit(self, tmp_path):
        cfg = write_config(tmp_path, PARAMS_TOML + '\n[sim]\nmode = "mixed"')
        assert main(["simulate", "--config", cfg, "--out", str(tmp_path)]) == 2

    def test_trajectory_cap_exit(self, tmp_path, capsys):
        cfg = write_config(
            tmp_path,
            PARAMS_TOML + "\n[sim]\nhorizon = 0.1\n[simulate]\ntrajectories = 5000",
        )
        assert main(["simulate", "--config", cfg, "--out", str(tmp_path)]) == 5
        assert "cap" in capsys.readouterr().err

    def test_support_requires_shared_mode(self, tmp_path, capsys):
        cfg = write_config(tmp_path, PARAMS_TOML + "\n[sim]\nhorizon = 1.0")
        assert main(["support", "--config", cfg, "--out", str(tmp_path)]) == 2
        assert "shared" in capsys.readouterr().err


class TestClassifyOutputs:
    def test_report_and_manifest(self, params_config, tmp_path):
        out = tmp_path / "out"
        assert main(["classify", "--config", params_config, "--out", str(out)]) == 0
        rep = json.loads((out / "threshold_report.json").read_text())
        assert rep["lambda"] == pytest.approx(0.884371, abs=1e-5)
        assert rep["regime"] == "Coexistence"
        manifest = json.loads((out / "run_manifest.json").read_text())
        assert manifest["tool"] == "stochpp"
        assert set(manifest["outputs"]) == {"threshold_report.json"}
        digest = manifest["outputs"]["threshold_report.json"]
        assert len(digest) == 64 and int(digest, 16) >= 0

    def test_manifest_digest_matches_file(self, params_config, tmp_path):
        import hashlib

        out = tmp_path / "out"
        main(["classify", "--config", params_config, "--out", str(out)])
        manifest = json.loads((out / "run_manifest.json").read_text())
        actual = hashlib.sha256(
            (out / "threshold_report.json").read_bytes()
        ).hexdigest()
        assert manifest["outputs"]["threshold_report.json"] == actual


class TestSimulateOutputs:
    def test_trajectories_written(self, tmp_path, capsys):
        cfg = write_config(
            tmp_path,
            PARAMS_TOML
            + "\n[sim]\nhorizon = 1.0\nthinning = 100\n[simulate]\ntrajectories = 2",
        )
        out = tmp_path / "out"
        assert main(["simulate", "--config", cfg, "--out", str(out)]) == 0
        for name in ("trajectory_000.csv", "trajectory_001.csv"):
            lines = (out / name).read_text().splitlines()
            assert lines[0] == "t,u,v,x,y"
            assert len(lines) == 12
        a = (out / "trajectory_000.csv").read_text()
        b = (out / "trajectory_001.csv").read_text()
        assert a != b

    def test_seed_override_changes_output(self, tmp_path):
        cfg = write_config(tmp_path, PARAMS_TOML + "\n[sim]\nhorizon = 1.0")
        out1, out2, out3 = (tmp_path / d for d in ("o1", "o2", "o3"))
        main(["simulate", "--config", cfg, "--out", str(out1), "--seed", "1"])
        main(["simulate", "--config", cfg, "--out", str(out2), "--seed", "2"])
        main(["simulate", "--config", cfg, "--out", str(out3), "--seed", "1"])
        t1 = (out1 / "trajectory_000.csv").read_text()
        assert t1 != (out2 / "trajectory_000.csv").read_text()
        assert t1 == (out3 / "trajectory_000.csv").read_text()


class TestErgodicOutputs:
    CFG = (
        PARAMS_TOML
        + "\n[sim]\nhorizon = 120.0\nthinning = 100"
        + '\n[ergodic]\ntrajectories = 3\nfunctionals = ["x^1", "y^1"]'
    )

    def test_report_structure(self, tmp_path):
        cfg = write_config(tmp_path, self.CFG)
        out = tmp_path / "out"
        assert main(["ergodic", "--config", cfg, "--out", str(out)]) == 0
        rep = json.loads((out / "ergodic_report.json").read_text())
        assert len(rep["per_trajectory"]) == 3
        assert set(rep["merged"]["averages"]) == {"x^1", "y^1"}
        assert "v" in rep["merged"]["lyapunov"]

    def test_worker_count_invariance(self, tmp_path):
        cfg = write_config(tmp_path, self.CFG)
        out1, out4 = tmp_path / "w1", tmp_path / "w4"
        main(["ergodic", "--config", cfg, "--out", str(out1), "--workers", "1"])
        main(["ergodic", "--config", cfg, "--out", str(out4), "--workers", "4"])
        assert (out1 / "ergodic_report.json").read_bytes() == (
            out4 / "ergodic_report.json"
        ).read_bytes()

    def test_env_workers_honored_only_without_flag(self, tmp_path, monkeypatch):
        from stochpp.cli import _resolve_workers

        monkeypatch.setenv("STOCHPP_WORKERS", "3")
        assert _resolve_workers(None) == 3
        assert _resolve_workers(2) == 2
        monkeypatch.delenv("STOCHPP_WORKERS")
        assert _resolve_workers(None) == 1


class TestSupportOutputs:
    def test_half_plane_report(self, tmp_path):
        body = (
            PARAMS_TOML.replace("beta = 0.5", "beta = -0.5")
            + '\n[sim]\nhorizon = 20.0\nmode = "shared"\nthinning = 10'
            + "\n[support]\nmargin = 0.05"
        )
        cfg = write_config(tmp_path, body)
        out = tmp_path / "out"
        assert main(["support", "--config", cfg, "--out", str(out)]) == 0
        rep = json.loads((out / "support_report.json").read_text())
        assert rep["control_set"]["kind"] == "half-plane"
        assert rep["outside_fraction_mean"] == 0.0
        lines = (out / "support_fractions.csv").read_text().splitlines()
        assert lines[0] == "trajectory,outside_fraction"
        assert lines[1].startswith("0,")


class TestLieRankOutputs:
    def test_both_variants(self, tmp_path, capsys):
        body = PARAMS_TOML + "\n[lie_rank]\nlo = -2.0\nhi = 2.0\nn = 3"
        cfg = write_config(tmp_path, body)
        out = tmp_path / "out"
        assert main(["lie-rank", "--config", cfg, "--out", str(out)]) == 0
        rep = json.loads((out / "lie_rank_report.json").read_text())
        assert set(rep) == {"full", "ideal"}
        assert rep["full"]["deficient_points"] == []
        assert rep["ideal"]["ranks"] == [2] * 9
        assert "deficient_points=0" in capsys.readouterr().out


class TestSweepOutputs:
    def test_csv_schema_and_summary(self, tmp_path, capsys):
        body = (
            PARAMS_TOML
            + "\n[sweep]\n[sweep.axes]\nb2 = [0.0001, 0.01, 1.0, 10.0]"
        )
        cfg = write_config(tmp_path, body)
        out = tmp_path / "out"
        assert main(["sweep", "--config", cfg, "--out", str(out)]) == 0
        lines = (out / "sweep.csv").read_text().splitlines()
        assert lines[0] == "b2,lambda,regime,ji,lw_applicable,lw_extinct,lw_persist"
        assert len(lines) == 5
        summary = json.loads((out / "sweep_summary.json").read_text())
        assert sum(summary.values()) == 4
        assert summary["coexist_ji_no"] >= 1

    def test_missing_axes(self, params_config, tmp_path):
        assert main(["sweep", "--config", params_config, "--out", str(tmp_path)]) == 2
