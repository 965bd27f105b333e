import io
import json
import subprocess
import sys

import numpy as np
import pytest

from spectral_rank import fit, format_choice_csv, parse_choice_csv
from spectral_rank.cli import format_fit_csv, read_fit_csv, run
from conftest import FIG1_CSV, small_fixed_design


def call(argv, stdin=None):
    out, err = io.StringIO(), io.StringIO()
    code = run(argv, stdin=io.StringIO(stdin) if stdin is not None else None,
               stdout=out, stderr=err)
    return code, out.getvalue(), err.getvalue()


@pytest.fixture(scope="module")
def design_csv(tmp_path_factory):
    p = tmp_path_factory.mktemp("cli") / "design.csv"
    p.write_text(format_choice_csv(small_fixed_design(seed=2, D=2000)))
    return str(p)


class TestFit:
    def test_json(self, fig1_csv):
        code, out, _ = call(["fit", "--data", str(fig1_csv), "--scheme", "two-step",
                             "--format", "json"])
        assert code == 0
        doc = json.loads(out)
        assert {"theta", "pi", "d", "iterations"} <= set(doc)
        assert len(doc["theta"]) == 5 and abs(sum(doc["theta"])) < 1e-10

    def test_constant_matches_library(self, fig1_csv):
        code, out, _ = call(["fit", "--data", str(fig1_csv), "--scheme", "constant"])
        assert code == 0
        back = read_fit_csv(out)
        np.testing.assert_allclose(back["pi"], np.array([3, 8, 12, 3, 1]) / 27, atol=1e-9)
        assert back["d"] == 6 and back["scheme"] == "constant"

    def test_csv_round_trip(self, design_csv):
        ds = parse_choice_csv(open(design_csv).read())
        f = fit(ds, "vanilla")
        back = read_fit_csv(format_fit_csv(f))
        np.testing.assert_array_equal(back["theta"], f.theta)
        np.testing.assert_array_equal(back["pi"], f.pi_hat)
        assert back["d"] == f.d and back["iterations"] == f.iterations
        assert back["residual"] == f.residual

    def test_stdin(self):
        code, out, _ = call(["fit", "--data", "-", "--scheme", "vanilla"], stdin=FIG1_CSV)
        assert code == 0 and out.startswith("# scheme=vanilla")

    def test_oracle_file(self, fig1_csv, tmp_path):
        code, out, _ = call(["fit", "--data", str(fig1_csv), "--scheme", "constant"])
        p = tmp_path / "theta.csv"
        p.write_text(out)
        code, out2, _ = call(["fit", "--data", str(fig1_csv), "--scheme", f"oracle:{p}"])
        assert code == 0 and out2.startswith("# scheme=oracle")
        q = tmp_path / "plain.txt"
        q.write_text("0 0 0 0 0\n")
        code, out3, _ = call(["fit", "--data", str(fig1_csv), "--scheme", f"oracle:{q}"])
        assert code == 0
        q.write_text("0 0\n")
        assert call(["fit", "--data", str(fig1_csv), "--scheme", f"oracle:{q}"])[0] == 1

    def test_rankings_with_break(self, tmp_path):
        p = tmp_path / "r.csv"
        p.write_text("rank:0>1>2\nrank:1>2>0\nrank:2>0>1\n")
        assert call(["fit", "--data", str(p)])[0] == 1
        code, out, _ = call(["fit", "--data", str(p), "--break", "multilevel"])
        assert code == 0


class TestInference:
    def test_ci_rows(self, design_csv):
        code, out, _ = call(["ci", "--data", design_csv, "--items", "3,10,20", "--alpha",
                             "0.05", "--B", "200", "--seed", "7", "--side", "two"])
        assert code == 0
        lines = out.splitlines()
        assert lines[0] == "item,theta,rank,lower,upper,alpha,side"
        assert [l.split(",")[0] for l in lines[1:]] == ["3", "10", "20"]

    def test_sides(self, design_csv):
        res = {}
        for side in ("one", "two", "uniform-one"):
            code, out, _ = call(["ci", "--data", design_csv, "--items", "5", "--B", "200",
                                 "--side", side, "--format", "json"])
            assert code == 0
            res[side] = json.loads(out)[0]
        assert res["one"]["upper"] == 25 and res["uniform-one"]["upper"] == 25
        # uniform intervals over all items are wider than the single-item one
        assert res["uniform-one"]["lower"] <= res["one"]["lower"]

    def test_byte_identical(self, design_csv):
        argv = ["ci", "--data", design_csv, "--items", "1,2", "--B", "150", "--seed", "3"]
        a, b = call(argv), call(argv)
        c = call(argv + ["--workers", "4"])
        assert a[1] == b[1] == c[1] and a[0] == 0

    def test_topk_and_screen(self, design_csv):
        code, out, _ = call(["test-topk", "--data", design_csv, "--items", "0,20",
                             "--K", "3", "--B", "200", "--format", "json"])
        assert code == 0
        rows = json.loads(out)
        assert rows[0]["reject"] == 0 and rows[1]["reject"] == 1
        code, out, _ = call(["screen", "--data", design_csv, "--K", "3", "--B", "200"])
        assert code == 0 and len(out.splitlines()) - 1 >= 3

    def test_two_sample(self, design_csv):
        for mode in ("item:4", "topk:3"):
            code, out, _ = call(["two-sample", "--data1", design_csv, "--data2", design_csv,
                                 "--mode", mode, "--B", "200", "--format", "json"])
            assert code == 0 and json.loads(out)[0]["reject"] == 0
        assert call(["two-sample", "--data1", design_csv, "--data2", design_csv,
                     "--mode", "pair:1"])[0] == 1


class TestSimulate:
    def test_small_t1(self):
        argv = ["simulate", "--scenario", "T1", "--D", "1500", "--reps", "2", "--B", "100",
                "--set", "n=25", "--set", "items=3", "--seed", "1"]
        code, out, err = call(argv)
        assert code == 0 and out.startswith("# scenario=T1")
        assert "replications" in err
        assert call(argv)[1] == out

    def test_ppplot_emit(self):
        code, out, _ = call(["simulate", "--scenario", "PPplot", "--D", "1500", "--reps",
                             "2", "--B", "100", "--set", "n=25", "--set", "items=3",
                             "--set", "alphas=0.1,0.2", "--emit-ppplot"])
        assert code == 0
        assert out.splitlines()[0] == "alpha,exceedance"
        assert len(out.splitlines()) == 3

    def test_config_file(self, tmp_path):
        p = tmp_path / "t.cfg"
        p.write_text("scenario=T5\nn=12\nreps=2\nps=0.3\nL=2\n")
        code, out, _ = call(["simulate", "--config", str(p), "--format", "json"])
        assert code == 0 and json.loads(out)["scenario"] == "T5"

    def test_unknown_scenario(self):
        assert call(["simulate", "--scenario", "T99"])[0] == 1


class TestExitCodes:
    def test_unknown_flag(self, fig1_csv):
        code, _, err = call(["fit", "--data", str(fig1_csv), "--bogus"])
        assert code == 1 and "unrecognized" in err

    def test_data_error_names_line(self, tmp_path):
        p = tmp_path / "bad.csv"
        p.write_text("0,0,1\n5,1,2\n")
        code, _, err = call(["fit", "--data", str(p)])
        assert code == 1 and "line 2" in err

    def test_unknown_item(self, fig1_csv):
        assert call(["ci", "--data", str(fig1_csv), "--items", "9", "--B", "100"])[0] == 1

    def test_not_rankable(self, tmp_path):
        p = tmp_path / "nr.csv"
        p.write_text("1,0,1\n1,1,2\n2,1,2\n")
        code, _, err = call(["fit", "--data", str(p)])
        assert code == 2 and "zero wins" in err

    def test_missing_file(self):
        assert call(["fit", "--data", "/nonexistent/x.csv"])[0] == 1

    def test_diagnose(self, fig1_csv):
        code, out, _ = call(["diagnose", "--data", str(fig1_csv), "--spectrum"])
        assert code == 0
        assert "# n_dagger=5" in out and "# strongly_connected=true" in out
        assert "# omega_spectrum=" in out
        code, out, _ = call(["diagnose", "--data", str(fig1_csv), "--format", "json"])
        assert json.loads(out)["per_item_counts"] == [2, 4, 2, 5, 4]

    def test_diagnose_never_fails_on_bad_data(self, tmp_path):
        p = tmp_path / "nr.csv"
        p.write_text("1,0,1\n1,1,2\n2,1,2\n")
        code, out, _ = call(["diagnose", "--data", str(p)])
        assert code == 0 and "# flag: item 0 has zero wins" in out

    def test_console_script(self, fig1_csv):
        r = subprocess.run([sys.executable, "-m", "spectral_rank.cli", "fit", "--data",
                            str(fig1_csv), "--scheme", "constant"],
                           capture_output=True, text=True)
        assert r.returncode == 0 and r.stdout.startswith("# scheme=constant")

    def test_package_main(self, fig1_csv):
        r = subprocess.run([sys.executable, "-m", "spectral_rank", "diagnose", "--data",
                            str(fig1_csv)], capture_output=True, text=True)
        assert r.returncode == 0 and "n_dagger" in r.stdout
