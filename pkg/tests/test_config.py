"""
Unit tests for run configuration loading, validation and process settings
"""
import pytest

from src.config import AppSettings, apply_overrides, available_presets, build_config, load_config
from src.errors import ConfigError

PUMP_TABLE = {"lambda_nm": 397.5, "tau_fs": 186.0}

INDEX_FILE = """\
name = "LiIO3-file"
[[index]]
polarization = "ordinary"
coefficients = [3.415716, 0.047031, 0.035306, 0.008801]
window_nm = [300.0, 5500.0]
[[index]]
polarization = "extraordinary"
coefficients = [2.918692, 0.035145, 0.028224, 0.003641]
window_nm = [300.0, 5500.0]
"""


def write(path, text):
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(text, encoding="utf-8")
    return path


def test_all_presets_parse():
    names = available_presets()
    assert names == ["fig1", "table1", "table2"]
    for name in names:
        assert build_config({"preset": name}).preset == name


def test_descriptive_preset_aliases():
    for alias, name in [("liio3-10mm", "table1"), ("liio3-5mm", "table2"), ("tau-sweep", "fig1")]:
        aliased = build_config({"preset": alias})
        canonical = build_config({"preset": name})
        assert aliased.model_dump(exclude={"preset"}) == canonical.model_dump(exclude={"preset"})


def test_fig1_registry_crystal():
    config = build_config({"preset": "fig1", "crystal": "LiIO3-fig1"})
    assert config.crystal.length_mm == 5.0
    assert config.pump.lambda_nm == 400.0
    assert config.constants().source == "sellmeier"


def test_table1_preset(table1_config):
    assert table1_config.crystal.length_mm == 10.0
    assert table1_config.pump.tau_fs == 186.0
    constants = table1_config.constants()
    assert constants.source == "anchored"
    assert constants.A == 0.1748 and constants.B == 0.0695
    assert constants.eta == pytest.approx(0.0638, abs=5e-4)
    assert table1_config.analysis.measured_pump_width_nm == 1.8


def test_table2_preset(table2_config):
    assert table2_config.crystal.length_mm == 5.0
    assert table2_config.constants().eta == pytest.approx(2 * 0.0638, abs=1e-3)


def test_fig1_preset(fig1_config):
    assert fig1_config.pump.lambda_nm == 400.0
    assert fig1_config.crystal.constants_source == "sellmeier"
    assert fig1_config.sweep.points == 40
    assert fig1_config.sweep.k_method == "purity"
    assert fig1_config.constants().source == "sellmeier"


def test_error_names_key_and_line(temp_dir):
    path = write(temp_dir / "run.toml",
                 "[crystal]\n"
                 'material = "LiIO3"\n'
                 "length_mm = 10.0\n"
                 "\n"
                 "[pump]\n"
                 "lambda_nm = 397.5\n"
                 "tau_fs = -1.0\n")
    with pytest.raises(ConfigError) as exc_info:
        load_config(path)
    assert any(p.startswith("pump.tau_fs (line 7)") for p in exc_info.value.problems)


def test_unknown_key_rejected(temp_dir):
    path = write(temp_dir / "run.toml",
                 "[crystal]\n"
                 'material = "LiIO3"\n'
                 "length_mm = 10.0\n"
                 "[pump]\n"
                 "lambda_nm = 397.5\n"
                 "tau_fs = 186.0\n"
                 "colour = 3\n")
    with pytest.raises(ConfigError, match="pump.colour"):
        load_config(path)


def test_every_problem_is_reported():
    with pytest.raises(ConfigError) as exc_info:
        build_config({"crystal": {"material": "LiIO3", "length_mm": -1.0},
                      "pump": {"lambda_nm": 397.5, "tau_fs": 0.0}})
    problems = exc_info.value.problems
    assert len(problems) == 2
    assert any(p.startswith("crystal.length_mm") for p in problems)
    assert any(p.startswith("pump.tau_fs") for p in problems)


def test_unknown_crystal_name():
    with pytest.raises(ConfigError, match="unknown crystal 'BBO-1mm'"):
        build_config({"crystal": "BBO-1mm", "pump": PUMP_TABLE})


def test_unknown_preset():
    with pytest.raises(ConfigError, match="unknown preset 'bbo-2mm'"):
        build_config({"preset": "bbo-2mm"})


def test_unknown_material():
    with pytest.raises(ConfigError, match="unknown material"):
        build_config({"crystal": {"material": "BBO", "length_mm": 1.0}, "pump": PUMP_TABLE})


def test_index_sources_are_exclusive(temp_dir):
    write(temp_dir / "idx.toml", INDEX_FILE)
    with pytest.raises(ConfigError, match="exactly one of"):
        build_config({"crystal": {"material": "LiIO3", "index_file": "idx.toml", "length_mm": 10.0},
                      "pump": PUMP_TABLE}, base_dir=temp_dir)


def test_anchored_needs_both_anchors():
    with pytest.raises(ConfigError, match="anchor_A and anchor_B"):
        build_config({"crystal": {"material": "LiIO3", "length_mm": 10.0, "constants_source": "anchored",
                                  "anchor_A": 0.17},
                      "pump": PUMP_TABLE})


def test_sweep_range_must_be_ordered():
    with pytest.raises(ConfigError, match="tau_min_fs"):
        build_config({"preset": "fig1", "sweep": {"tau_min_fs": 500.0, "tau_max_fs": 100.0}})


def test_registry_crystal_over_preset():
    """A registered crystal replaces the preset's length but keeps its anchored constants"""
    config = build_config({"preset": "table1", "crystal": "LiIO3-5mm-default"})
    assert config.crystal.length_mm == 5.0
    assert config.crystal.constants_source == "anchored"
    assert config.constants().length_mm == 5.0


def test_registry_crystal_alone():
    config = build_config({"crystal": "vacuum-test", "pump": PUMP_TABLE})
    assert config.crystal.material == "vacuum"
    assert config.constants().regime == "undefined"


def test_index_file_resolved_against_config_directory(temp_dir):
    index_path = write(temp_dir / "dispersion" / "liio3.toml", INDEX_FILE)
    path = write(temp_dir / "run.toml",
                 "[crystal]\n"
                 'index_file = "dispersion/liio3.toml"\n'
                 "length_mm = 10.0\n"
                 "[pump]\n"
                 "lambda_nm = 397.5\n"
                 "tau_fs = 186.0\n")
    config = load_config(path)
    assert config.crystal.index_file == index_path.resolve()
    assert config.crystal_spec().model.name == "LiIO3-file"
    assert config.constants().A == pytest.approx(build_config(
        {"crystal": {"material": "LiIO3", "length_mm": 10.0}, "pump": PUMP_TABLE}).constants().A, rel=1e-12)


def test_inline_index_entries():
    config = build_config({
        "crystal": {"name": "inline", "length_mm": 10.0, "index": [
            {"polarization": "ordinary", "coefficients": [3.415716, 0.047031, 0.035306, 0.008801],
             "window_nm": [300.0, 5500.0]},
            {"polarization": "extraordinary", "coefficients": [2.918692, 0.035145, 0.028224, 0.003641],
             "window_nm": [300.0, 5500.0]},
        ]},
        "pump": PUMP_TABLE,
    })
    assert config.crystal_spec().model.name == "inline"
    assert config.constants().regime == "short"


def test_measured_paths_resolved(temp_dir):
    path = write(temp_dir / "run.toml",
                 'preset = "table1"\n'
                 "[analysis]\n"
                 'measured_coincidence_csv = "data/coincidence.csv"\n')
    config = load_config(path)
    assert config.analysis.measured_coincidence_csv == (temp_dir / "data" / "coincidence.csv").resolve()
    assert config.analysis.measured_pump_width_nm == 1.8


def test_missing_and_malformed_files(temp_dir):
    with pytest.raises(ConfigError, match="not found"):
        load_config(temp_dir / "absent.toml")
    with pytest.raises(ConfigError):
        load_config(write(temp_dir / "broken.toml", "[pump\n"))


def test_overrides(table1_config):
    config = apply_overrides(table1_config, tau_fs=1000.0, length_mm=5.0)
    assert config.pump.tau_fs == 1000.0
    assert config.crystal.length_mm == 5.0
    assert config.preset == "table1"
    assert config.constants().source == "anchored"
    assert config.constants().eta == pytest.approx(0.0638 * 1000.0 / 186.0 * 2, rel=2e-3)


def test_overrides_are_validated(table1_config):
    with pytest.raises(ConfigError, match="pump.tau_fs"):
        apply_overrides(table1_config, tau_fs=-5.0)


def test_report_options_follow_sections(table1_config):
    config = build_config({"preset": "table1", "grid": {"resolution_factor": 4.0, "k_method": "svd"},
                           "analysis": {"single_resolution_nm": 2.0}})
    options = config.report_options(AppSettings(dense_limit=512), workers=3)
    assert options.grid.resolution_factor == 4.0
    assert options.k_method == "svd"
    assert options.single_resolution_nm == 2.0
    assert options.dense_limit == 512
    assert options.workers == 3
    assert table1_config.report_options().grid.resolution_factor == 8.0


def test_settings_from_environment(monkeypatch, temp_dir):
    monkeypatch.setenv("BIPHOTON_WORKERS", "2")
    monkeypatch.setenv("BIPHOTON_CACHE_PATH", str(temp_dir / "cache.db"))
    monkeypatch.setenv("BIPHOTON_LOG_LEVEL", "DEBUG")
    settings = AppSettings()
    assert settings.workers == 2
    assert settings.cache_path == temp_dir / "cache.db"
    assert settings.log_level == "DEBUG"


def test_sweep_fingerprint(fig1_config):
    again = build_config({"preset": "fig1"})
    assert fig1_config.sweep_fingerprint() == again.sweep_fingerprint()
    # τ is the sweep variable, not part of the key
    assert apply_overrides(fig1_config, tau_fs=300.0).sweep_fingerprint() == fig1_config.sweep_fingerprint()
    assert apply_overrides(fig1_config, length_mm=10.0).sweep_fingerprint() != fig1_config.sweep_fingerprint()
