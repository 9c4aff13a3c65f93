import json
import os
import subprocess
import sys

import numpy as np
import pytest

from twofluid.cli import main
from twofluid.model import StateArray
from twofluid.runio import (parse_config, read_snapshot, write_snapshot,
                            write_stats)


class TestConfigParser:
    def test_values_and_comments(self, tmp_path):
        p = tmp_path / "a.cfg"
        p.write_text("# header\nx.y = 3.5   # trailing\nflag = true\n"
                     "name = hello\nlist = 1.0 2.0 3.0\ncount = 7\n")
        cfg = parse_config(str(p))
        assert cfg["x.y"] == 3.5
        assert cfg["flag"] is True
        assert cfg["name"] == "hello"
        assert cfg["list"] == [1.0, 2.0, 3.0]
        assert cfg["count"] == 7

    def test_line_number_in_error(self, tmp_path):
        p = tmp_path / "b.cfg"
        p.write_text("ok = 1\nnot a pair\n")
        from twofluid.errors import ConfigError
        with pytest.raises(ConfigError, match=":2"):
            parse_config(str(p))


class TestSnapshotIO:
    def test_roundtrip_bitwise(self, tmp_path):
        rng = np.random.default_rng(0)
        prim = rng.normal(size=(9, 6)) * np.array([1, 1e5, 10, 10, 1e6, 1e6])
        x = np.linspace(0.0, 1.0, 9)
        st = StateArray(np.zeros((9, 6)), prim)
        path = tmp_path / "snap.csv"
        write_snapshot(str(path), x, st)
        x2, prim2 = read_snapshot(str(path))
        assert np.array_equal(x, x2)
        assert np.array_equal(st.prim, prim2)

    def test_empty_trajectory_header_only(self, tmp_path):
        path = tmp_path / "empty.csv"
        write_snapshot(str(path), np.empty(0), StateArray(np.empty((0, 6)),
                                                          np.empty((0, 6))))
        lines = path.read_text().strip().splitlines()
        assert len(lines) == 1
        assert lines[0].startswith("x,alpha_v,p,")

    def test_stats_clean_run_zeros(self, tmp_path):
        from twofluid.solver import RunStats
        path = tmp_path / "stats.json"
        write_stats(str(path), RunStats(status="completed", steps=10))
        data = json.loads(path.read_text())
        assert data["problematic_step_fraction"] == 0.0
        assert data["dt_reductions"] == 0
        assert data["status"] == "completed"


class TestCli:
    def test_poly_phdf_matches_coefficients(self, tmp_path):
        rc = main(["poly", "--variant", "phdf", "--samples", "501",
                   "--out", str(tmp_path)])
        assert rc == 0
        data = np.loadtxt(tmp_path / "poly_phdf.csv", delimiter=",",
                          skiprows=1)
        from twofluid.matfun import build_PHDF, eval_poly
        spec = build_PHDF()
        assert np.array_equal(data[:, 1], eval_poly(spec, data[:, 0]))
        assert np.all(data[:, 1] >= data[:, 2])

    def test_poly_tanh(self, tmp_path):
        rc = main(["poly", "--variant", "tanh", "--tau", "1e-3",
                   "--out", str(tmp_path)])
        assert rc == 0
        assert (tmp_path / "poly_tanh.csv").exists()

    def test_oracle_ransom(self, tmp_path, capsys):
        rc = main(["oracle", "--case", "ransom", "--t", "0.6",
                   "--out", str(tmp_path)])
        assert rc == 0
        out = capsys.readouterr().out
        assert "7.7658" in out

    def test_probe_emits_csv(self, tmp_path):
        rc = main(["probe", "--case", "channel_saturated", "--decades", "4",
                   "--out", str(tmp_path)])
        assert rc == 0
        data = np.loadtxt(tmp_path / "channel_saturated_collapse.csv",
                          delimiter=",", skiprows=1)
        assert data.shape == (4, 3)
        assert np.all(np.diff(data[:, 2]) < 0)     # angle decreasing

    def test_run_small_ransom(self, tmp_path):
        rc = main(["run", "--case", "ransom", "--scheme", "phdd",
                   "--cells", "24", "--t-end", "0.02", "--out", str(tmp_path)])
        assert rc == 0
        x, prim = read_snapshot(tmp_path / "ransom_phdd_profile.csv")
        assert len(x) == 24
        stats = json.loads((tmp_path / "ransom_phdd_stats.json").read_text())
        assert stats["status"] == "completed"

    def test_unknown_flag_exits_nonzero(self):
        rc = main(["run", "--case", "ransom", "--no-such-flag"])
        assert rc != 0

    def test_unknown_case_reports_structured_error(self, capsys):
        rc = main(["run", "--case", "nonexistent_case"])
        assert rc == 1
        err = capsys.readouterr().err
        payload = json.loads(err.strip().splitlines()[-1])
        assert payload["error"] == "UnknownCase"

    def test_module_entrypoint(self):
        proc = subprocess.run([sys.executable, "-m", "twofluid", "--help"],
                              capture_output=True, text=True,
                              cwd=os.path.dirname(os.path.dirname(__file__)))
        assert proc.returncode == 0
        assert "subcommand" in proc.stdout or "usage" in proc.stdout
