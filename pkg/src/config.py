"""
Run configuration and process settings

A run is described by a TOML file validated by strict pydantic models. A
`preset = "<name>"` key layers a shipped preset underneath the file, and
`crystal = "<name>"` expands to a registered crystal section. Process-level
settings come from BIPHOTON_* environment variables.
"""
import hashlib
import json
import logging
import re
try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib
from pathlib import Path
from typing import Any, Dict, List, Literal, Optional, Tuple

from pydantic import BaseModel, ConfigDict, Field, ValidationError, model_validator
from pydantic_settings import BaseSettings, SettingsConfigDict

from src.crystals import CRYSTAL_REGISTRY, material
from src.dispersion import (
    CrystalSpec,
    IndexEntry,
    IndexFile,
    anchored_constants,
    load_dispersion_model,
    walkoff_constants,
)
from src.entanglement import DENSE_AUTO_LIMIT, DENSE_LIMIT, KMethod, Quantifier, ReportOptions
from src.errors import ConfigError, format_validation_errors
from src.jsa import SCHMIDT_POLICY, GridPolicy
from src.models import PhaseMatchConstants, PumpSpec

logger = logging.getLogger(__name__)

PRESET_DIR = Path(__file__).parent / "presets"
# descriptive names for the shipped presets
PRESET_ALIASES: Dict[str, str] = {"liio3-10mm": "table1", "liio3-5mm": "table2", "tau-sweep": "fig1"}


class AppSettings(BaseSettings):
    model_config = SettingsConfigDict(env_prefix="BIPHOTON_")

    log_level: str = "INFO"
    cache_path: Path = Path("data/results.db")
    workers: int = Field(4, ge=1)
    dense_limit: int = Field(DENSE_LIMIT, ge=3)
    dense_auto_limit: int = Field(DENSE_AUTO_LIMIT, ge=3)


class StrictModel(BaseModel):
    model_config = ConfigDict(extra="forbid")


class CrystalSection(StrictModel):
    name: str = "LiIO3"
    material: Optional[str] = None
    index_file: Optional[Path] = None
    index: Optional[List[IndexEntry]] = None
    length_mm: float = Field(..., gt=0)
    pump_angle_deg: Optional[float] = Field(None, ge=0, le=90)
    constants_source: Literal["sellmeier", "anchored"] = "sellmeier"
    anchor_A: Optional[float] = Field(None, gt=0)
    anchor_B: Optional[float] = Field(None, gt=0)

    @model_validator(mode="after")
    def one_index_source(self) -> "CrystalSection":
        sources = [s for s in (self.material, self.index_file, self.index) if s is not None]
        if len(sources) != 1:
            raise ValueError("give exactly one of material, index_file or index")
        if self.material is not None and self.material not in ("LiIO3", "vacuum"):
            raise ValueError(f"unknown material '{self.material}'")
        if self.constants_source == "anchored" and (self.anchor_A is None or self.anchor_B is None):
            raise ValueError("anchored constants need anchor_A and anchor_B")
        return self


class PumpSection(StrictModel):
    lambda_nm: float = Field(..., gt=0)
    tau_fs: float = Field(..., gt=0)


class GridSection(StrictModel):
    resolution_factor: float = Field(8.0, ge=1.0)
    span_factor: float = Field(3.0, gt=0.0)
    axis_points: Optional[int] = Field(None, ge=1)
    max_points: int = Field(60_000_000, ge=9)
    layout: Literal["product", "sheared"] = "sheared"
    schmidt_resolution_factor: float = Field(SCHMIDT_POLICY.resolution_factor, ge=1.0)
    schmidt_span_factor: float = Field(SCHMIDT_POLICY.span_factor, gt=0.0)
    k_method: KMethod = "auto"


class AnalysisSection(StrictModel):
    idler_detuning_nm: float = 0.0
    idler_window_nm: float = Field(0.0, ge=0)
    coincidence_resolution_nm: Optional[float] = Field(0.2, gt=0)
    single_resolution_nm: Optional[float] = Field(1.0, gt=0)
    response_shape: Literal["gaussian", "rectangular"] = "gaussian"
    measured_coincidence_csv: Optional[Path] = None
    measured_single_csv: Optional[Path] = None
    measured_pump_width_nm: Optional[float] = Field(None, gt=0)


class SweepSection(StrictModel):
    tau_min_fs: float = Field(50.0, gt=0)
    tau_max_fs: float = Field(10_000.0, gt=0)
    points: int = Field(40, ge=2)
    which: List[Quantifier] = ["R_analytic", "K"]
    k_method: KMethod = "purity"

    @model_validator(mode="after")
    def range_is_ordered(self) -> "SweepSection":
        if not self.tau_min_fs < self.tau_max_fs:
            raise ValueError("tau_min_fs must be below tau_max_fs")
        return self


class OutputSection(StrictModel):
    directory: Path = Path("out")
    svg: bool = False
    jsa: Optional[Literal["csv", "matrix"]] = None


class RunConfig(StrictModel):
    preset: Optional[str] = None
    crystal: CrystalSection
    pump: PumpSection
    grid: GridSection = GridSection()
    analysis: AnalysisSection = AnalysisSection()
    sweep: SweepSection = SweepSection()
    output: OutputSection = OutputSection()

    def crystal_spec(self) -> CrystalSpec:
        section = self.crystal
        if section.material is not None:
            model = material(section.material)
        elif section.index_file is not None:
            model = load_dispersion_model(section.index_file)
        else:
            model = IndexFile(name=section.name, index=section.index).build()
        return CrystalSpec(name=section.name, length_mm=section.length_mm, model=model,
                           pump_angle_deg=section.pump_angle_deg)

    def pump_spec(self) -> PumpSpec:
        return PumpSpec(lambda_nm=self.pump.lambda_nm, tau_fs=self.pump.tau_fs)

    def sellmeier_constants(self) -> PhaseMatchConstants:
        return walkoff_constants(self.crystal_spec(), self.pump_spec())

    def constants(self) -> PhaseMatchConstants:
        """Constants the run evaluates Ψ with: anchored values when configured, else from the index model"""
        if self.crystal.constants_source == "anchored":
            return anchored_constants(self.crystal.anchor_A, self.crystal.anchor_B, self.crystal.length_mm,
                                      self.pump_spec())
        return self.sellmeier_constants()

    def grid_policy(self) -> GridPolicy:
        g = self.grid
        return GridPolicy(resolution_factor=g.resolution_factor, span_factor=g.span_factor,
                          axis_points=g.axis_points, max_points=g.max_points, layout=g.layout)

    def schmidt_policy(self) -> GridPolicy:
        return GridPolicy(resolution_factor=self.grid.schmidt_resolution_factor,
                          span_factor=self.grid.schmidt_span_factor, max_points=self.grid.max_points)

    def report_options(self, settings: Optional[AppSettings] = None, workers: int = 1) -> ReportOptions:
        settings = settings or AppSettings()
        a = self.analysis
        return ReportOptions(
            grid=self.grid_policy(),
            schmidt_grid=self.schmidt_policy(),
            k_method=self.grid.k_method,
            dense_auto_limit=settings.dense_auto_limit,
            dense_limit=settings.dense_limit,
            idler_detuning_nm=a.idler_detuning_nm,
            idler_window_nm=a.idler_window_nm,
            coincidence_resolution_nm=a.coincidence_resolution_nm,
            single_resolution_nm=a.single_resolution_nm,
            response_shape=a.response_shape,
            workers=workers,
        )

    def sweep_fingerprint(self) -> str:
        """Stable hash of everything a sweep row depends on except τ"""
        payload = {
            "constants": self.constants().model_dump(mode="json", exclude={"tau_fs", "eta", "regime"}),
            "schmidt_policy": self.schmidt_policy().model_dump(mode="json"),
            "which": sorted(self.sweep.which),
            "k_method": self.sweep.k_method,
        }
        return hashlib.sha256(json.dumps(payload, sort_keys=True).encode()).hexdigest()


# --- loading -------------------------------------------------------------

def available_presets() -> List[str]:
    return sorted(p.stem for p in PRESET_DIR.glob("*.toml"))


def _deep_merge(base: Dict[str, Any], override: Dict[str, Any]) -> Dict[str, Any]:
    merged = dict(base)
    for key, value in override.items():
        if isinstance(value, dict) and isinstance(merged.get(key), dict):
            merged[key] = _deep_merge(merged[key], value)
        else:
            merged[key] = value
    return merged


def _expand_crystal(data: Dict[str, Any], problems: List[str]) -> Dict[str, Any]:
    crystal = data.get("crystal")
    if isinstance(crystal, str):
        if crystal not in CRYSTAL_REGISTRY:
            problems.append(f"crystal: unknown crystal '{crystal}', known: {sorted(CRYSTAL_REGISTRY)}")
            return {k: v for k, v in data.items() if k != "crystal"}
        return {**data, "crystal": dict(CRYSTAL_REGISTRY[crystal])}
    return data


_PATH_KEYS = (("crystal", "index_file"), ("analysis", "measured_coincidence_csv"),
              ("analysis", "measured_single_csv"))


def _resolve_paths(data: Dict[str, Any], base_dir: Path) -> Dict[str, Any]:
    for section, key in _PATH_KEYS:
        table = data.get(section)
        if isinstance(table, dict) and isinstance(table.get(key), str):
            path = Path(table[key]).expanduser()
            if not path.is_absolute():
                table[key] = str((base_dir / path).resolve())
    return data


def _key_lines(text: str) -> Dict[Tuple[Any, ...], int]:
    """Line number of every `key = value` in a TOML document, keyed by its dotted path"""
    lines: Dict[Tuple[Any, ...], int] = {}
    table: Tuple[Any, ...] = ()
    array_counts: Dict[Tuple[str, ...], int] = {}
    header = re.compile(r"^\s*(\[\[?)\s*([A-Za-z0-9_.\-]+)\s*\]\]?")
    assignment = re.compile(r"^\s*([A-Za-z0-9_\-]+)\s*=")
    for number, line in enumerate(text.splitlines(), start=1):
        if match := header.match(line):
            path = tuple(match.group(2).split("."))
            if match.group(1) == "[[":
                index = array_counts.get(path, -1) + 1
                array_counts[path] = index
                table = path + (index,)
            else:
                table = path
            lines.setdefault(table, number)
        elif match := assignment.match(line):
            lines.setdefault(table + (match.group(1),), number)
    return lines


def _locator(text: Optional[str]):
    if text is None:
        return None
    lines = _key_lines(text)

    def locate(loc: Tuple[Any, ...]) -> Optional[int]:
        for end in range(len(loc), 0, -1):
            if loc[:end] in lines:
                return lines[loc[:end]]
        return None

    return locate


def load_preset(name: str) -> Dict[str, Any]:
    path = PRESET_DIR / f"{PRESET_ALIASES.get(name, name)}.toml"
    if not path.exists():
        raise ConfigError([f"preset: unknown preset '{name}', known: {available_presets()} "
                           f"(aliases: {sorted(PRESET_ALIASES)})"])
    return _resolve_paths(tomllib.loads(path.read_text(encoding="utf-8")), PRESET_DIR)


def build_config(data: Dict[str, Any], base_dir: Path = Path("."), text: Optional[str] = None) -> RunConfig:
    """
    Validate a configuration mapping (TOML-shaped). All problems are
    collected into a single ConfigError.
    """
    problems: List[str] = []
    data = _resolve_paths(_expand_crystal(dict(data), problems), base_dir)
    preset = data.get("preset")
    if preset is not None:
        if not isinstance(preset, str):
            problems.append("preset: must be a preset name")
        else:
            try:
                base = _expand_crystal(load_preset(preset), problems)
                data = _deep_merge(base, data)
            except ConfigError as exc:
                problems.extend(exc.problems)
    try:
        config = RunConfig.model_validate(data)
    except ValidationError as exc:
        problems.extend(format_validation_errors(exc, _locator(text)))
        config = None
    if problems:
        raise ConfigError(problems)
    return config


def load_config(path: Path) -> RunConfig:
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except FileNotFoundError as exc:
        raise ConfigError([f"{path}: configuration file not found"]) from exc
    try:
        data = tomllib.loads(text)
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError([f"{path}: {exc}"]) from exc
    config = build_config(data, base_dir=path.parent, text=text)
    logger.info(f"Loaded configuration {path}" + (f" (preset {config.preset})" if config.preset else ""))
    return config


def apply_overrides(config: RunConfig, **overrides: Optional[float]) -> RunConfig:
    """Command-line overrides: tau_fs, lambda_nm, length_mm"""
    data = config.model_dump(mode="json", exclude_none=True, exclude={"preset"})
    table = {"tau_fs": "pump", "lambda_nm": "pump", "length_mm": "crystal"}
    for key, value in overrides.items():
        if value is not None:
            data[table[key]][key] = value
    return build_config(data).model_copy(update={"preset": config.preset})
