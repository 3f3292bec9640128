import json

import pytest
import yaml

from mcsn import analysis
from mcsn.cli import main
from mcsn.analysis import read_sweep_csv


def write_config(path, data):
    path.write_text(yaml.safe_dump(data))
    return str(path)


@pytest.fixture
def reed_cfg(tmp_path):
    return write_config(tmp_path / "run.yaml", {
        "problem": "reed",
        "sampler": "qmc",
        "N_s": 0,
        "N_p": 1024,
    })


class TestRun:
    def test_smoke(self, reed_cfg, tmp_path, capsys):
        out = tmp_path / "out"
        assert main(["run", reed_cfg, "--out-dir", str(out)]) == 0
        assert (out / "flux.csv").exists()
        summary = json.loads((out / "summary.json").read_text())
        assert summary["sn_iterations"] >= 1
        assert summary["weight_balance_residual"] < 1e-8
        assert set(summary["timings"]) == {"mc", "sn", "remap"}
        header = (out / "flux.csv").read_text().splitlines()[0]
        assert header == "x,flux"

    def test_invalid_scatter_cap(self, tmp_path, capsys):
        cfg = write_config(tmp_path / "bad.yaml", {"problem": "reed", "N_s": -1})
        assert main(["run", cfg, "--out-dir", str(tmp_path)]) != 0
        msg = json.loads(capsys.readouterr().out)
        assert msg["error"] == "config"
        assert "scatter cap" in msg["message"]

    def test_reproducible_csv(self, reed_cfg, tmp_path):
        out1, out2 = tmp_path / "a", tmp_path / "b"
        assert main(["run", reed_cfg, "--out-dir", str(out1), "--deterministic"]) == 0
        assert main(["run", reed_cfg, "--out-dir", str(out2), "--deterministic"]) == 0
        assert (out1 / "flux.csv").read_bytes() == (out2 / "flux.csv").read_bytes()

    def test_time_mode_summary_has_steps(self, tmp_path):
        cfg = write_config(tmp_path / "t.yaml", {
            "problem": "reed", "mode": "time", "dt": 0.5, "n_steps": 2,
            "N_s": 0, "N_p": 512,
        })
        out = tmp_path / "out"
        assert main(["run", cfg, "--out-dir", str(out)]) == 0
        summary = json.loads((out / "summary.json").read_text())
        assert len(summary["steps"]) == 2

    def test_seed_env_override(self, reed_cfg, tmp_path, monkeypatch):
        out1, out2 = tmp_path / "a", tmp_path / "b"
        monkeypatch.setenv("MCSN_SEED", "17")
        assert main(["run", reed_cfg, "--out-dir", str(out1)]) == 0
        s1 = json.loads((out1 / "summary.json").read_text())
        assert s1["seed"] == 17
        monkeypatch.setenv("MCSN_OUT_DIR", str(out2))
        assert main(["run", reed_cfg]) == 0
        assert (out2 / "flux.csv").exists()


class TestSweep:
    def test_two_by_two_rows(self, tmp_path):
        cfg = write_config(tmp_path / "s.yaml", {
            "problem": "reed",
            "sweep": {"N_s": [0, "inf"], "N_p": [128, 256],
                      "sampler": ["mc"], "replicas": 1},
        })
        out = tmp_path / "out"
        assert main(["sweep", cfg, "--out-dir", str(out)]) == 0
        rows = (out / "sweep.csv").read_text().splitlines()
        assert rows[0] == "problem,sampler,N_s,N_p,replica,l2_error,runtime_s,sn_iterations"
        assert len(rows) == 5
        assert (out / "alphas.json").exists()

    def test_csv_round_trips(self, tmp_path):
        cfg = write_config(tmp_path / "s.yaml", {
            "problem": "reed",
            "sweep": {"N_s": [0], "N_p": [128, 256, 512], "sampler": ["mc"],
                      "replicas": 1},
        })
        out = tmp_path / "out"
        assert main(["sweep", cfg, "--out-dir", str(out)]) == 0
        pts = read_sweep_csv(out / "sweep.csv")
        assert len(pts) == 3
        assert {p.N_p for p in pts} == {128, 256, 512}
        raw = (out / "sweep.csv").read_text()
        for p in pts:
            assert f"{p.l2_error:.17g}" in raw

    def test_partial_flush_on_failure(self, tmp_path, monkeypatch):
        cfg = write_config(tmp_path / "s.yaml", {
            "problem": "reed",
            "sweep": {"N_s": [0], "N_p": [128], "sampler": ["mc"], "replicas": 1},
        })

        def boom(*args, **kwargs):
            kwargs["progress"](analysis.ConvergencePoint(
                "reed", "mc", 0, 128, 0, 1.0, 0.1, 3))
            raise RuntimeError("lost the particles")

        monkeypatch.setattr(analysis, "run_sweep", boom)
        out = tmp_path / "out"
        assert main(["sweep", cfg, "--out-dir", str(out)]) != 0
        rows = (out / "sweep.csv").read_text().splitlines()
        assert rows[-1].startswith("FAILED,")
        assert len(rows) == 3  # header, one data row, failure marker

    def test_sweep_requires_section(self, reed_cfg, tmp_path, capsys):
        assert main(["sweep", reed_cfg, "--out-dir", str(tmp_path)]) != 0
        assert "sweep" in json.loads(capsys.readouterr().out)["message"]


class TestValidate:
    def test_valid_preset(self, reed_cfg, capsys):
        assert main(["validate", reed_cfg]) == 0
        norm = yaml.safe_load(capsys.readouterr().out)
        assert norm["problem"] == "reed"
        assert norm["N_s"] == 0
        assert norm["sn"]["order"] == 4

    def test_misaligned_custom_problem_names_edge(self, tmp_path, capsys):
        cfg = write_config(tmp_path / "bad.yaml", {
            "problem": {
                "kind": "slab", "cells": 10,
                "regions": [
                    {"x": [0.0, 0.35], "sigma_a": 1.0},
                    {"x": [0.35, 1.0], "sigma_a": 2.0},
                ],
            },
        })
        assert main(["validate", cfg]) != 0
        msg = json.loads(capsys.readouterr().out)
        assert "0.35" in msg["message"]

    def test_unknown_key_warns_but_passes(self, tmp_path, capsys):
        cfg = write_config(tmp_path / "w.yaml", {
            "problem": "reed", "frobnicate": True,
        })
        assert main(["validate", cfg]) == 0
        err = capsys.readouterr().err
        assert "frobnicate" in err and "unknown key" in err

    def test_inline_custom_problem(self, tmp_path, capsys):
        cfg = write_config(tmp_path / "c.yaml", {
            "problem": {
                "kind": "slab", "cells": 8,
                "regions": [{"x": [0.0, 2.0], "sigma_a": 0.5, "sigma_s": 0.2,
                             "q": 1.0}],
                "boundary": {"x_lo": 0.1},
            },
            "N_p": 128,
        })
        assert main(["validate", cfg]) == 0
        norm = yaml.safe_load(capsys.readouterr().out)
        assert norm["problem"] == "custom"

    def test_inf_cap_accepted(self, tmp_path, capsys):
        cfg = write_config(tmp_path / "i.yaml", {"problem": "reed", "N_s": "inf"})
        assert main(["validate", cfg]) == 0
        assert yaml.safe_load(capsys.readouterr().out)["N_s"] == "inf"

    def test_missing_file(self, tmp_path, capsys):
        assert main(["validate", str(tmp_path / "nope.yaml")]) != 0
