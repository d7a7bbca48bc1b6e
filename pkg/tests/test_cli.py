import csv
import json
import math

import numpy as np
import pytest

from chsim.besov import BesovParams, besov_norm, build_partition
from chsim.cli import main
from chsim.runner import read_snapshot
from chsim.spectral_core import Grid1D

SMALL = """system = "A"
[grid]
n_points = 256
L = 10.0
[integrator]
t_end = 0.3
[[init.m0]]
family = "gaussian"
amplitude = 1.0
center = -0.5
[[init.n0]]
family = "gaussian"
amplitude = 1.0
center = 0.5
[characteristics]
n_seeds = 8
[outputs]
snapshot_every = 1
"""


def write(tmp_path, text, name="cfg.toml"):
    p = tmp_path / name
    p.write_text(text)
    return str(p)


def run_cli(capsys, *argv):
    code = main(list(argv))
    out = capsys.readouterr()
    return code, out.out, out.err


class TestSimulate:
    def test_artifacts(self, tmp_path, capsys):
        out = tmp_path / "run"
        code, stdout, _ = run_cli(capsys, "simulate", write(tmp_path, SMALL), "-o", str(out))
        assert code == 0 and json.loads(stdout)["status"] == "completed"
        with open(out / "diagnostics.csv") as fh:
            rows = list(csv.reader(fh))
        assert rows[0][0] == "t" and len(rows) == 1 + 4
        assert [float(r[0]) for r in rows[1:]] == [0.0, 0.1, 0.2, 0.3]
        with open(out / "characteristics.csv") as fh:
            chars = list(csv.reader(fh))
        assert chars[0] == ["t", "seed", "q", "qx", "phase", "residual_m", "residual_n"]
        assert len(chars) == 1 + 4 * 8
        manifest = json.loads((out / "manifest.json").read_text())
        assert manifest["config"]["integrator"]["cfl"] == 0.3
        assert manifest["status"]["status"] == "completed"
        x, m = read_snapshot(out / "m_00000.csv")
        assert x.size == 256 and m.max() == pytest.approx(1.0, abs=1e-3)
        assert (out / "n_00003.csv").exists()

    def test_reals_round_trip(self, tmp_path, capsys):
        out = tmp_path / "run"
        run_cli(capsys, "simulate", write(tmp_path, SMALL), "-o", str(out))
        lines = (out / "diagnostics.csv").read_text().splitlines()[1:]
        for line in lines:
            for tok in line.split(","):
                assert repr(float(tok)) == tok

    def test_bad_config(self, tmp_path, capsys):
        code, _, err = run_cli(capsys, "simulate", write(tmp_path, "[integrator]\ncf1 = 1\n"))
        assert code == 2 and "cf1" in err

    def test_missing_file(self, tmp_path, capsys):
        assert run_cli(capsys, "simulate", str(tmp_path / "nope.toml"))[0] == 3

    def test_dt_underflow_is_failure(self, tmp_path, capsys):
        text = SMALL.replace("t_end = 0.3", "t_end = 0.3\ndt_min = 0.5")
        code, stdout, _ = run_cli(capsys, "simulate", write(tmp_path, text), "-o",
                                  str(tmp_path / "r"))
        assert code == 1 and json.loads(stdout)["status"] == "dt_underflow"


class TestPredict:
    def test_json_fields(self, tmp_path, capsys):
        code, stdout, _ = run_cli(capsys, "predict", write(tmp_path, SMALL), "--family", "A_sign",
                                  "--x0", "0.0")
        assert code == 0
        d = json.loads(stdout)
        assert {"family", "C", "N0", "Qx0", "a0", "threshold", "triggered", "T0_upper",
                "derivation"} <= set(d)
        assert d["derivation"][-1]["value"] == d["C"]
        assert abs(d["additional"][0]["Qx0"]) < 1e-12

    def test_l1_has_no_root(self, tmp_path, capsys):
        _, stdout, _ = run_cli(capsys, "predict", write(tmp_path, SMALL), "--family", "A_L1")
        d = json.loads(stdout)
        assert d["a0"] is None and d["threshold"] == pytest.approx(-math.sqrt(2 * d["C"] * d["N0"]))

    def test_zero_data(self, tmp_path, capsys):
        code, _, err = run_cli(capsys, "predict", write(tmp_path, 'system = "A"\n'),
                               "--family", "A_L1")
        assert code == 1 and "N0" in err

    def test_wrong_system(self, tmp_path, capsys):
        code, _, err = run_cli(capsys, "predict", write(tmp_path, SMALL), "--family", "B_sign")
        assert code == 1 and "hypothesis" in err

    def test_sign_changing(self, tmp_path, capsys):
        text = SMALL + '[[init.m0]]\nfamily = "gaussian"\namplitude = 2.0\ncenter = -3.0\nsign = -1\n'
        assert run_cli(capsys, "predict", write(tmp_path, text), "--family", "A_sign")[0] == 1

    def test_unknown_family(self, tmp_path, capsys):
        assert run_cli(capsys, "predict", write(tmp_path, SMALL), "--family", "C_sign")[0] == 2


class TestBesov:
    def _snapshot(self, tmp_path):
        g = Grid1D(256, 10.0)
        u = np.exp(-g.x**2)
        p = tmp_path / "u.csv"
        p.write_text("x,value\n" + "".join(f"{a!r},{b!r}\n" for a, b in zip(g.x.tolist(), u.tolist())))
        return g, u, str(p)

    def test_norm(self, tmp_path, capsys):
        g, u, path = self._snapshot(tmp_path)
        code, stdout, _ = run_cli(capsys, "besov", path, "--s", "1", "--p", "2", "--r", "inf")
        assert code == 0
        d = json.loads(stdout)
        ref = besov_norm(u, BesovParams(1.0, 2, "inf"), build_partition(g))
        assert d["norm"] == pytest.approx(ref, rel=1e-12) and len(d["blocks"]) == d["j_max"] + 2

    def test_bad_index(self, tmp_path, capsys):
        _, _, path = self._snapshot(tmp_path)
        assert run_cli(capsys, "besov", path, "--s", "1", "--p", "3")[0] == 2

    def test_non_uniform_grid(self, tmp_path, capsys):
        p = tmp_path / "bad.csv"
        p.write_text("x,value\n-1,0\n0,1\n0.7,0\n")
        assert run_cli(capsys, "besov", str(p), "--s", "1")[0] == 2


def test_usage_errors(capsys):
    assert main([]) == 2
    assert main(["preset", "NoSuchPreset"]) == 2
    assert main(["--help"]) == 0
    capsys.readouterr()
