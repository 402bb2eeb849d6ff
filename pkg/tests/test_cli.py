import hashlib
import math
import subprocess
import sys

import pytest

from overdet import io
from overdet.cli import EXIT_CONFIG, EXIT_FAIL, EXIT_OK, main


def run(tmp_path, *argv):
    return main([argv[0], "--output-dir", str(tmp_path), *argv[1:]])


def digest(directory):
    return {p.name: hashlib.sha256(p.read_bytes()).hexdigest()
            for p in sorted(directory.iterdir())}


def test_profile_linear_limit(tmp_path, capsys):
    assert run(tmp_path, "profile", "--p", "2", "--oracle-mode") == EXIT_OK
    data = io.read_json(tmp_path / "profile.json")
    assert abs(data["trajectory"]["zeros"][0] - math.pi) < 1e-9
    assert "r_1=" in capsys.readouterr().out
    header, rows = io.read_csv(tmp_path / "critical_points.csv")
    assert header == ["j", "r_j", "mu_j", "u_at_mu_j"]
    assert abs(rows[0][2] - 4.493409457909064) < 1e-8


def test_bifurcate_rows_per_branch(tmp_path):
    assert run(tmp_path, "bifurcate", "--k", "4") == EXIT_OK
    header, rows = io.read_csv(tmp_path / "bifurcation.csv")
    assert header == ["N", "p", "m", "mu_m", "lambda_m", "c_m", "delta_m", "beta_m"]
    assert [row[2] for row in rows] == [1, 2]
    for m in (1, 2):
        assert (tmp_path / f"boundary_m{m}.csv").exists()
        assert (tmp_path / f"state_m{m}.json").exists()


def test_format_selection(tmp_path):
    assert run(tmp_path, "spectrum", "--format", "csv", "--m", "1") == EXIT_OK
    assert not list(tmp_path.glob("*.json"))
    assert (tmp_path / "spectrum.csv").exists()


def test_verify_passes_by_default(tmp_path, capsys):
    assert run(tmp_path, "verify") == EXIT_OK
    assert capsys.readouterr().out.split() == ["m=1", "pass", "m=2", "pass"]
    header, rows = io.read_csv(tmp_path / "summary.csv")
    assert header[-1] == "pass_flags" and len(rows) == 2


def test_verify_reports_failed_check(tmp_path, capsys):
    assert run(tmp_path, "verify", "--set", "slope_min=2.1", "--m", "1") == EXIT_FAIL
    err = capsys.readouterr().err
    assert "FAIL m=1 residual_scaling" in err and "[2.1, 2.2]" in err


def test_sweep_outputs(tmp_path, capsys):
    assert run(tmp_path, "sweep", "--m", "1", "--resolutions", "256", "512", "1024") == EXIT_OK
    assert "slope=" in capsys.readouterr().out
    header, rows = io.read_csv(tmp_path / "convergence_m1.csv")
    assert [row[0] for row in rows] == [256, 512, 1024]
    _, scaling = io.read_csv(tmp_path / "scaling_m1.csv")
    assert len(scaling) == 5


def test_unknown_key_in_file(tmp_path, capsys):
    cfg = tmp_path / "run.cfg"
    cfg.write_text("N = 3\nfoo = 1\n")
    assert run(tmp_path, "profile", "--config", str(cfg)) == EXIT_CONFIG
    err = capsys.readouterr().err
    assert "run.cfg:2" in err and "'foo'" in err


def test_unknown_key_in_override(tmp_path, capsys):
    assert run(tmp_path, "verify", "--set", "tolerance=1") == EXIT_CONFIG
    assert "'tolerance'" in capsys.readouterr().err


def test_invalid_parameters_and_branch(tmp_path):
    assert run(tmp_path, "profile", "--p", "6") == EXIT_CONFIG
    assert run(tmp_path, "profile", "--m", "5") == EXIT_CONFIG


def test_numerical_failure_exit(tmp_path, capsys):
    assert run(tmp_path, "profile", "--set", "R_max=3") == EXIT_FAIL
    assert "HorizonTooShort" in capsys.readouterr().err


def test_env_output_dir(tmp_path, monkeypatch):
    monkeypatch.setenv(io.ENV_OUTPUT_DIR, str(tmp_path / "env"))
    assert main(["spectrum", "--m", "1"]) == EXIT_OK
    assert (tmp_path / "env" / "spectrum.json").exists()


@pytest.mark.parametrize("command,names", [
    ("profile", ["profiles.png"]),
    ("spectrum", ["eigenfunctions.png"]),
    ("bifurcate", ["boundary.png"]),
    ("verify", ["scaling_m1.png", "kernel_m1.png"]),
])
def test_figures(tmp_path, command, names):
    pytest.importorskip("matplotlib")
    assert run(tmp_path, command, "--figures", "--m", "1") == EXIT_OK
    for name in names:
        assert (tmp_path / name).stat().st_size > 0


def test_figures_byte_identical(tmp_path):
    pytest.importorskip("matplotlib")
    a, b = tmp_path / "a", tmp_path / "b"
    run(a, "bifurcate", "--figures")
    run(b, "bifurcate", "--figures")
    assert digest(a) == digest(b)


@pytest.mark.parametrize("command", ["profile", "spectrum", "bifurcate", "verify"])
def test_repeated_runs_byte_identical(tmp_path, command):
    a, b = tmp_path / "a", tmp_path / "b"
    assert run(a, command) == run(b, command)
    assert digest(a) == digest(b)


def test_module_entry_point(tmp_path):
    proc = subprocess.run([sys.executable, "-m", "overdet", "profile", "--output-dir",
                           str(tmp_path), "--format", "json"], capture_output=True, text=True)
    assert proc.returncode == 0, proc.stderr
    assert (tmp_path / "profile.json").exists()
