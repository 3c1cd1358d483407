"""Command-line contract tests.

The CLI is exercised in process through main(argv); one subprocess run checks
the installed console script.  Format contracts (CSV header, JSON field set,
exit codes, determinism outside timing lines) are asserted byte for byte;
wall-clock values themselves are never asserted."""

import json
import shutil
import subprocess
import sys

import pytest

from fem_errbal.cli import (
    ConfigError,
    _parse_config_file,
    _parse_degrees,
    _parse_streak,
    _parse_variables,
    main,
)
from fem_errbal.problem import CATALOG_NAMES

_JSON_FIELDS = [
    "problem",
    "fem",
    "p",
    "var",
    "N_c",
    "E_c",
    "alpha_T",
    "beta_T",
    "alpha_R",
    "beta_R",
    "N_opt_real",
    "N_opt_mesh",
    "E_min",
    "reachable",
    "status",
    "refinements_used",
]


class TestOptionParsing:
    def test_degree_specs(self):
        assert _parse_degrees("2") == (2,)
        assert _parse_degrees("1,3") == (1, 3)
        assert _parse_degrees("1..5") == (1, 2, 3, 4, 5)
        assert _parse_degrees("1,3..5") == (1, 3, 4, 5)
        assert _parse_degrees("2,2") == (2,)

    def test_degree_spec_errors(self):
        for bad in ("", "0", "a", "2..x"):
            with pytest.raises(ConfigError):
                _parse_degrees(bad)

    def test_variable_lists_are_canonically_ordered(self):
        assert _parse_variables("u,uxx") == ("u", "uxx")
        assert _parse_variables("uxx,ux,u") == ("u", "ux", "uxx")
        with pytest.raises(ConfigError, match="unknown variable"):
            _parse_variables("u,flux")

    def test_rise_streak_accepts_none(self):
        assert _parse_streak("none") is None
        assert _parse_streak("4") == 4
        with pytest.raises(ConfigError):
            _parse_streak("0")

    def test_config_file_parsing(self, tmp_path):
        path = tmp_path / "run.cfg"
        path.write_text("# comment\nproblem = bench-poisson\nn-max=500  # inline\n\n")
        assert _parse_config_file(str(path)) == {"problem": "bench-poisson", "n_max": "500"}
        path.write_text("just a line\n")
        with pytest.raises(ConfigError, match="expected key=value"):
            _parse_config_file(str(path))
        with pytest.raises(ConfigError, match="cannot read"):
            _parse_config_file(str(tmp_path / "absent.cfg"))


class TestSweep:
    def test_csv_format_and_minimum_summary(self, tmp_path, capsys):
        code = main(
            [
                "sweep", "--problem", "bench-poisson", "--p", "2", "--var", "u",
                "--n-max", "2000", "--out-dir", str(tmp_path),
            ]
        )
        assert code == 0
        out = capsys.readouterr().out
        assert "minimum E=" in out and "wrote 1 file(s)" in out
        raw = (tmp_path / "sweep_bench-poisson_standard_p2_u.csv").read_bytes()
        assert b"\r" not in raw  # LF line endings
        lines = raw.decode().splitlines()
        meta = [ln for ln in lines if ln.startswith("#")]
        assert any("estimator=exact" in ln for ln in meta)
        body = [ln for ln in lines if not ln.startswith("#")]
        assert body[0] == "REF,N_h,E_h,rate"
        first = body[1].split(",")
        assert first[0] == "0" and float(first[1]) > 0

    def test_refined_estimator_used_without_closed_form(self, tmp_path):
        code = main(
            [
                "sweep", "--problem", "validation-helmholtz", "--fem", "mixed",
                "--p", "4", "--var", "u", "--n-max", "500", "--out-dir", str(tmp_path),
            ]
        )
        assert code == 0
        text = (tmp_path / "sweep_validation-helmholtz_mixed_p4_u.csv").read_text()
        assert "# estimator=refined" in text

    def test_unknown_problem_lists_catalog(self, tmp_path, capsys):
        code = main(["sweep", "--problem", "no-such", "--out-dir", str(tmp_path)])
        assert code == 2
        err = capsys.readouterr().err
        for name in CATALOG_NAMES:
            assert name in err

    def test_reruns_are_byte_identical(self, tmp_path):
        argv = [
            "sweep", "--problem", "bench-poisson", "--p", "2", "--var", "u",
            "--n-max", "2000", "--out-dir",
        ]
        assert main(argv + [str(tmp_path / "a")]) == 0
        assert main(argv + [str(tmp_path / "b")]) == 0
        name = "sweep_bench-poisson_standard_p2_u.csv"
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()


class TestPredict:
    def test_json_fields_and_table(self, tmp_path, capsys):
        code = main(
            [
                "predict", "--problem", "bench-poisson", "--p", "2", "--var", "u",
                "--out-dir", str(tmp_path),
            ]
        )
        assert code == 0
        assert "E_min" in capsys.readouterr().out
        payload = json.loads((tmp_path / "predict_bench-poisson_standard.json").read_text())
        assert len(payload) == 1
        entry = payload[0]
        assert list(entry.keys()) == _JSON_FIELDS
        assert entry["fem"] == "standard"
        assert entry["status"] == "converged"
        assert entry["reachable"] is None  # no --tol given
        assert entry["beta_T"] == 3.0 and entry["beta_R"] == 2.0
        assert entry["alpha_R"] == 2e-17
        assert 0 < entry["E_min"] < 1e-8

    def test_reachable_verdict_follows_tolerance(self, tmp_path):
        argv = [
            "predict", "--problem", "bench-poisson", "--p", "2", "--var", "u",
            "--json", str(tmp_path / "out.json"), "--tol",
        ]
        assert main(argv + ["1e-6"]) == 0
        assert json.loads((tmp_path / "out.json").read_text())[0]["reachable"] is True
        assert main(argv + ["1e-14"]) == 0
        assert json.loads((tmp_path / "out.json").read_text())[0]["reachable"] is False

    def test_product_expansion_skips_unavailable(self, tmp_path, capsys):
        code = main(
            [
                "predict", "--problem", "bench-poisson", "--p", "1..2",
                "--var", "u,uxx", "--out-dir", str(tmp_path),
            ]
        )
        assert code == 0
        assert "not defined for standard p=1" in capsys.readouterr().err
        payload = json.loads((tmp_path / "predict_bench-poisson_standard.json").read_text())
        assert [(e["p"], e["var"]) for e in payload] == [(1, "u"), (2, "u"), (2, "uxx")]

    def test_nothing_runnable_is_a_config_error(self, tmp_path, capsys):
        code = main(
            [
                "predict", "--problem", "bench-poisson", "--p", "1", "--var", "uxx",
                "--out-dir", str(tmp_path),
            ]
        )
        assert code == 2
        assert "no runnable" in capsys.readouterr().err


class TestValidate:
    def test_report_layout(self, tmp_path, capsys):
        code = main(
            [
                "validate", "--problem", "bench-poisson", "--p", "2,3", "--var", "u",
                "--out-dir", str(tmp_path),
            ]
        )
        assert code == 0
        out = capsys.readouterr().out
        assert "t_pred" in out and "saved" in out
        lines = (tmp_path / "validate_bench-poisson_standard.csv").read_text().splitlines()
        header = [ln for ln in lines if not ln.startswith("#")][0]
        assert header == "fem,p,var,status,E_min_pred,N_opt_mesh,E_min_bf,N_opt_bf"
        rows = [ln for ln in lines if not ln.startswith("#")][1:]
        assert len(rows) == 2
        timing = [ln for ln in lines if ln.startswith("# timing")]
        assert len(timing) == 2
        assert all("PRED+" in ln and "BF" in ln and "saved" in ln for ln in timing)

    def test_deterministic_outside_timing_lines(self, tmp_path):
        argv = [
            "validate", "--problem", "bench-poisson", "--p", "2", "--var", "u",
            "--out-dir",
        ]
        assert main(argv + [str(tmp_path / "a")]) == 0
        assert main(argv + [str(tmp_path / "b")]) == 0
        name = "validate_bench-poisson_standard.csv"

        def stable(path):
            return [ln for ln in path.read_text().splitlines() if not ln.startswith("# timing")]

        assert stable(tmp_path / "a" / name) == stable(tmp_path / "b" / name)


class TestCalibrate:
    def test_solver_suite_files(self, tmp_path, capsys):
        code = main(
            [
                "calibrate", "--suite", "solver", "--var", "u", "--n-max", "4000",
                "--rise-streak", "3", "--out-dir", str(tmp_path),
            ]
        )
        assert code == 0
        out = capsys.readouterr().out
        assert "configurations=3" in out
        assert "alpha_R_hat" in out  # the loose-tolerance run fits a floor
        for name in (
            "solver-lu_standard_2_u.csv",
            "solver-cg-1e-10_standard_2_u.csv",
            "solver-cg-1e-04_standard_2_u.csv",
        ):
            assert (tmp_path / name).exists()

    def test_magnitude_writes_one_file_per_coefficient(self, tmp_path):
        code = main(
            [
                "calibrate", "--suite", "magnitude", "--case", "1", "--scheme", "S",
                "--var", "u", "--n-max", "3000", "--rise-streak", "3",
                "--out-dir", str(tmp_path),
            ]
        )
        assert code == 0
        files = sorted(p.name for p in tmp_path.glob("magnitude-case1-*.csv"))
        assert len(files) == 5
        assert all(name.endswith("-S_standard_2_u.csv") for name in files)

    def test_suite_is_required_and_validated(self, tmp_path, capsys):
        assert main(["calibrate", "--out-dir", str(tmp_path)]) == 2
        assert "--suite is required" in capsys.readouterr().err
        assert main(["calibrate", "--suite", "weather", "--out-dir", str(tmp_path)]) == 2


class TestConfigFileMerge:
    def test_flags_override_file_entries(self, tmp_path):
        cfg = tmp_path / "run.cfg"
        cfg.write_text("problem=bench-poisson\ndegrees=2\nvariables=u\nn-max=1000\n")
        code = main(
            ["sweep", "--config", str(cfg), "--n-max", "500", "--out-dir", str(tmp_path)]
        )
        assert code == 0
        body = [
            ln
            for ln in (tmp_path / "sweep_bench-poisson_standard_p2_u.csv")
            .read_text()
            .splitlines()
            if not ln.startswith("#")
        ]
        # the flag cap (500) wins over the file cap (1000)
        assert body[-1].split(",")[1] == "513"

    def test_unknown_config_key_rejected(self, tmp_path, capsys):
        cfg = tmp_path / "run.cfg"
        cfg.write_text("problem=bench-poisson\nmesh_flavor=exotic\n")
        assert main(["sweep", "--config", str(cfg), "--out-dir", str(tmp_path)]) == 2
        assert "unknown config key" in capsys.readouterr().err


class TestExitCodes:
    def test_numerical_failure_is_exit_three(self, tmp_path, capsys):
        code = main(
            [
                "predict", "--problem", "bench-poisson", "--p", "2", "--var", "u",
                "--n-max", "50", "--out-dir", str(tmp_path),
            ]
        )
        assert code == 3
        assert "numerical failure" in capsys.readouterr().err

    def test_unknown_subcommand_exits_two(self):
        with pytest.raises(SystemExit) as exc:
            main(["deploy"])
        assert exc.value.code == 2

    def test_missing_coefficient_is_exit_two(self, tmp_path, capsys):
        code = main(["sweep", "--problem", "case1", "--out-dir", str(tmp_path)])
        assert code == 2
        assert "coefficient" in capsys.readouterr().err


class TestConsoleScript:
    def test_entry_point_installed_and_runs(self):
        exe = shutil.which("fem-errbal")
        assert exe is not None
        proc = subprocess.run(
            [exe, "catalog"], capture_output=True, text=True, timeout=120
        )
        assert proc.returncode == 0
        for name in CATALOG_NAMES:
            assert name in proc.stdout

    def test_module_invocation(self):
        proc = subprocess.run(
            [sys.executable, "-m", "fem_errbal.cli", "catalog"],
            capture_output=True,
            text=True,
            timeout=120,
        )
        assert proc.returncode == 0
        assert "bench-poisson" in proc.stdout
