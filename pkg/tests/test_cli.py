import json
import math

import numpy as np
import pytest

from lasercool import return_function, LambdaSystem
from lasercool.cli import main


def read_rows(path):
    lines = path.read_text().splitlines()
    assert lines[0].startswith("# lasercool ")
    header = lines[1].split(",")
    rows = [line.split(",") for line in lines[2:]]
    return header, rows


class TestSimulate:
    def test_greedy_canonical_run(self, tmp_path):
        out = tmp_path / "run"
        code = main(
            [
                "simulate",
                "--out",
                str(out),
                "--horizon",
                "3.0",
                "--dt",
                "1e-4",
                "--stride",
                "1000",
            ]
        )
        assert code == 0
        header, rows = read_rows(out / "trajectory.csv")
        assert header == ["t", "lambda1", "lambda2", "lambda3", "purity", "regime"]

        manifest = json.loads((out / "manifest.json").read_text())
        results = manifest["results"]
        sys = LambdaSystem(2.0, 1.0)
        reference = return_function([0.5, 0.3, 0.2], 3.0, sys)
        assert abs(results["final_purity"] - reference) < 2e-5
        assert abs(results["equalization_time"] - math.log(4.0 / 3.0) / 3.0) < 1e-4
        assert results["invariant_maxima"]["max_sum_deviation"] < 1e-8
        assert results["invariant_maxima"]["min_component"] > -1e-8
        # regime column flips exactly once, at the equalization time
        regimes = [row[-1] for row in rows]
        assert regimes[0] == "pre_equalization"
        assert regimes[-1] == "equalized"
        flips = sum(1 for a, b in zip(regimes, regimes[1:]) if a != b)
        assert flips == 1

    def test_identity_policy_pure_state_constant(self, tmp_path):
        out = tmp_path / "run"
        code = main(
            [
                "simulate",
                "--out",
                str(out),
                "--policy",
                "identity",
                "--lambda0",
                "1,0,0",
                "--horizon",
                "1.0",
                "--stride",
                "200",
            ]
        )
        assert code == 0
        _, rows = read_rows(out / "trajectory.csv")
        for row in rows:
            assert float(row[1]) == pytest.approx(1.0, abs=1e-12)
            assert float(row[2]) == pytest.approx(0.0, abs=1e-12)

    def test_schedule_policy_from_file(self, tmp_path):
        schedule = [
            {"time": 0.0, "theta": np.eye(3).tolist()},
            {"time": 0.2, "theta": [[0, 1, 0], [1, 0, 0], [0, 0, 1]]},
        ]
        spath = tmp_path / "schedule.json"
        spath.write_text(json.dumps(schedule))
        out = tmp_path / "run"
        code = main(
            [
                "simulate",
                "--out",
                str(out),
                "--policy",
                str(spath),
                "--horizon",
                "0.5",
                "--stride",
                "100",
            ]
        )
        assert code == 0

    def test_plot_renders_figure(self, tmp_path):
        out = tmp_path / "run"
        code = main(
            ["simulate", "--out", str(out), "--horizon", "0.2", "--stride", "100", "--plot"]
        )
        assert code == 0
        png = out / "trajectory.png"
        assert png.exists() and png.stat().st_size > 1000

    def test_config_file_with_flag_override(self, tmp_path):
        cfg = {"horizon": 0.4, "stride": 100, "lambda0": [0.6, 0.3, 0.1]}
        cpath = tmp_path / "config.json"
        cpath.write_text(json.dumps(cfg))
        out = tmp_path / "run"
        code = main(
            ["simulate", "--config", str(cpath), "--out", str(out), "--horizon", "0.1"]
        )
        assert code == 0
        manifest = json.loads((out / "manifest.json").read_text())
        assert manifest["config"]["horizon"] == 0.1  # flag wins
        assert manifest["config"]["lambda0"] == [0.6, 0.3, 0.1]

    def test_bad_lambda0_is_config_error(self, tmp_path):
        assert main(["simulate", "--out", str(tmp_path), "--lambda0", "0.5,0.4,0.3"]) == 1

    def test_unknown_config_field_rejected(self, tmp_path):
        cpath = tmp_path / "config.json"
        cpath.write_text(json.dumps({"horizons": 1.0}))
        assert main(["simulate", "--config", str(cpath), "--out", str(tmp_path / "o")]) == 1

    def test_malformed_json_reports_location(self, tmp_path, capsys):
        cpath = tmp_path / "config.json"
        cpath.write_text('{"horizon": }')
        assert main(["simulate", "--config", str(cpath), "--out", str(tmp_path / "o")]) == 1
        assert "line 1" in capsys.readouterr().err


class TestCertify:
    def test_small_lattice_passes(self, tmp_path):
        out = tmp_path / "cert"
        code = main(
            [
                "certify",
                "--out",
                str(out),
                "--grid-m",
                "6",
                "--n-haar",
                "8",
                "--n-birkhoff",
                "8",
                "--exchange-samples",
                "50",
            ]
        )
        assert code == 0
        report = json.loads((out / "certification.json").read_text())
        assert report["report"]["all_pass"]
        assert set(report["report"]["checks"]) == {
            "argmax_identity",
            "hessian_determinant_identity",
            "hessian_finite_difference",
            "boundary_slopes_nonpositive",
            "boundary_slopes_finite_difference",
            "coherence_exchange_nondecreasing",
            "mu_gradient_match",
        }

    def test_swapped_costate_fails(self, tmp_path):
        out = tmp_path / "cert"
        code = main(
            [
                "certify",
                "--out",
                str(out),
                "--grid-m",
                "6",
                "--n-haar",
                "8",
                "--n-birkhoff",
                "8",
                "--exchange-samples",
                "50",
                "--swap-mu",
            ]
        )
        assert code == 3
        report = json.loads((out / "certification.json").read_text())
        assert not report["report"]["checks"]["argmax_identity"]["pass"]


class TestDp:
    def test_small_solve_and_report(self, tmp_path):
        out = tmp_path / "dp"
        code = main(
            [
                "dp",
                "--out",
                str(out),
                "--grid-m",
                "12",
                "--n-t",
                "150",
                "--horizon",
                "0.5",
                "--max-deviation",
                "0.05",
            ]
        )
        assert code == 0
        report = json.loads((out / "dp_report.json").read_text())
        assert report["pass"]
        assert report["comparison"]["max_deviation"] < 0.05
        header, rows = read_rows(out / "value_table.csv")
        assert header == ["lambda1", "lambda2", "lambda3", "tau", "value", "policy"]
        # terminal slice rows exist with value = lambda1 and no action
        terminal = [r for r in rows if float(r[3]) == 0.0]
        assert terminal
        for r in terminal:
            assert float(r[4]) == pytest.approx(float(r[0]), abs=0.0)
            assert r[5] == "-1"

    def test_unreachable_bound_exits_3(self, tmp_path):
        out = tmp_path / "dp"
        code = main(
            [
                "dp",
                "--out",
                str(out),
                "--grid-m",
                "12",
                "--n-t",
                "150",
                "--horizon",
                "0.5",
                "--max-deviation",
                "1e-9",
            ]
        )
        assert code == 3


class TestEquiv:
    def test_small_sweep_passes(self, tmp_path):
        out = tmp_path / "eq"
        code = main(["equiv", "--out", str(out), "--samples", "40", "--cases", "15"])
        assert code == 0
        report = json.loads((out / "equiv_report.json").read_text())
        assert report["pass"]
        assert report["algebraic"]["worst_deviation"] < 1e-9
        assert 3.5 <= report["perturbation"]["ratio_min"]
        assert report["perturbation"]["ratio_max"] <= 4.5


class TestDeterminism:
    @pytest.mark.parametrize(
        "argv",
        [
            ["simulate", "--horizon", "0.5", "--stride", "100"],
            ["equiv", "--samples", "25", "--cases", "10"],
            [
                "certify",
                "--grid-m",
                "6",
                "--n-haar",
                "8",
                "--n-birkhoff",
                "8",
                "--exchange-samples",
                "40",
            ],
            ["dp", "--grid-m", "10", "--n-t", "120", "--horizon", "0.3", "--max-deviation", "0.1"],
        ],
    )
    def test_reruns_are_byte_identical(self, tmp_path, argv):
        out = tmp_path / "out"
        assert main(argv + ["--out", str(out), "--seed", "7"]) in (0, 3)
        first = {p.name: p.read_bytes() for p in out.iterdir()}
        assert main(argv + ["--out", str(out), "--seed", "7"]) in (0, 3)
        second = {p.name: p.read_bytes() for p in out.iterdir()}
        assert first == second
