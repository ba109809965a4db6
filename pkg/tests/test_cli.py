"""
Command-line tests: output shape, exit codes and reproducible files
"""
import pandas as pd
import pytest

from src.cli import main


def write_config(path, text):
    path.write_text(text, encoding="utf-8")
    return path


def test_constants_command(capsys):
    assert main(["constants", "--preset", "table1"]) == 0
    out = capsys.readouterr().out
    assert "constants_source" in out and "anchored" in out
    assert "regime" in out and "short" in out
    assert "A_sellmeier" in out


def test_constants_tau_override(capsys):
    assert main(["constants", "--preset", "table1", "--tau-fs", "372"]) == 0
    lines = dict(
        (key.strip(), value.strip())
        for key, value in (line.split("=", 1) for line in capsys.readouterr().out.splitlines())
    )
    assert float(lines["tau_fs"]) == 372.0
    assert float(lines["eta"]) == pytest.approx(2 * 0.0638, abs=1e-3)


def test_constants_csv(temp_dir, capsys):
    path = temp_dir / "constants.csv"
    assert main(["constants", "--preset", "table2", "--csv", str(path)]) == 0
    frame = pd.read_csv(path)
    assert list(frame["length_mm"]) == [5.0]
    assert frame["constants_source"][0] == "anchored"


def test_constants_without_walkoff_exits_with_regime_code(temp_dir, capsys):
    path = write_config(temp_dir / "vacuum.toml",
                        'crystal = "vacuum-test"\n'
                        "[pump]\n"
                        "lambda_nm = 397.5\n"
                        "tau_fs = 186.0\n")
    assert main(["constants", "--config", str(path)]) == 3
    captured = capsys.readouterr()
    assert "undefined" in captured.out
    assert "undefined" in captured.err


def test_missing_config_exits_with_config_code(temp_dir, capsys):
    assert main(["constants", "--config", str(temp_dir / "absent.toml")]) == 2
    assert "config error" in capsys.readouterr().err


def test_config_source_required(capsys):
    assert main(["constants"]) == 2
    assert "--preset" in capsys.readouterr().err


def test_rtot_command(capsys):
    assert main(["rtot", "--r-angle", "16", "--r-omega", "316"]) == 0
    assert "R_tot <= 10112" in capsys.readouterr().out


def test_rtot_rejects_ratio_below_one(capsys):
    assert main(["rtot", "--r-angle", "0.5", "--r-omega", "316"]) == 2
    assert "ratios must be >= 1" in capsys.readouterr().err


def test_fit_command(coincidence_csv, capsys):
    assert main(["fit", str(coincidence_csv), "--resolution-nm", "0.2"]) == 0
    out = capsys.readouterr().out
    assert "center       = 795" in out
    assert "deconvolved" in out
    assert "converged    = True" in out


def test_fit_empty_file_exits_with_ingestion_code(temp_dir, capsys):
    path = write_config(temp_dir / "empty.csv", "")
    assert main(["fit", str(path)]) == 5


def test_fit_missing_file(temp_dir, capsys):
    assert main(["fit", str(temp_dir / "absent.csv")]) == 5
    assert "file not found" in capsys.readouterr().err


def test_sweep_command(capsys):
    argv = ["sweep", "--preset", "fig1", "--tau-min-fs", "2000", "--tau-max-fs", "4000",
            "--points", "2", "--no-cache", "--workers", "2"]
    assert main(argv) == 0
    lines = capsys.readouterr().out.splitlines()
    assert lines[0] == "tau_fs,eta,R_analytic,K_numerical,K_converged"
    assert len(lines) == 3
    for line in lines[1:]:
        tau, eta, r, k, converged = line.split(",")
        # η >= 1 at these durations: the closed form is refused
        assert float(eta) >= 1.0
        assert r == ""
        assert float(k) >= 1.0


def test_sweep_rerun_served_from_cache(temp_dir, monkeypatch, capsys):
    monkeypatch.setenv("BIPHOTON_CACHE_PATH", str(temp_dir / "cache.db"))
    argv = ["sweep", "--preset", "fig1", "--tau-min-fs", "2000", "--tau-max-fs", "4000", "--points", "2",
            "--csv", str(temp_dir / "sweep.csv")]
    assert main(argv) == 0
    first = capsys.readouterr().out
    assert (temp_dir / "cache.db").exists()

    assert main(argv) == 0
    second = capsys.readouterr().out
    assert second == first
    assert (temp_dir / "sweep.csv").read_text(encoding="utf-8") == first


def test_spectra_command_is_reproducible(temp_dir, capsys):
    out_dir = temp_dir / "spectra"
    argv = ["spectra", "--preset", "table1", "--tau-fs", "5000", "--out", str(out_dir), "--svg"]
    assert main(argv) == 0
    written = capsys.readouterr().out.split()
    names = {p.split("/")[-1] for p in written}
    assert {"coincidence.csv", "singles.csv", "coincidence_convolved.csv", "singles_convolved.csv",
            "coincidence.svg", "singles.svg"} <= names

    frame = pd.read_csv(out_dir / "coincidence.csv")
    assert list(frame.columns) == ["axis_nm", "intensity"]
    assert frame["intensity"].max() == pytest.approx(1.0)
    peak = frame["axis_nm"][frame["intensity"].idxmax()]
    assert peak == pytest.approx(795.0, abs=0.5)

    before = {name: (out_dir / name).read_bytes() for name in names}
    assert main(argv) == 0
    after = {name: (out_dir / name).read_bytes() for name in names}
    assert after == before


@pytest.mark.slow
def test_report_command_with_measurements(coincidence_csv, singles_csv, capsys):
    argv = ["report", "--preset", "table1", "--measured-coincidence", str(coincidence_csv),
            "--measured-single", str(singles_csv)]
    assert main(argv) == 0
    out = capsys.readouterr().out
    assert "coincidence Δλ_c [nm]" in out
    assert "±" in out
    assert "measured Δλ_p/Δλ_c" in out
    assert "K = " in out


@pytest.mark.slow
def test_report_halving_crystal_doubles_coincidence_width(temp_dir, capsys):
    """The 5 mm preset's numerical coincidence width is twice the 10 mm one"""
    widths = {}
    for preset in ("table1", "table2"):
        path = temp_dir / f"{preset}.csv"
        assert main(["report", "--preset", preset, "--csv", str(path)]) == 0
        widths[preset] = float(pd.read_csv(path)["delta_lambda_c_numerical"][0])
    capsys.readouterr()
    assert widths["table2"] / widths["table1"] == pytest.approx(2.0, rel=0.02)
