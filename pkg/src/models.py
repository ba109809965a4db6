"""
Domain models and validation schemas
"""
import math
from typing import Any, Dict, List, Literal, Optional

from pydantic import BaseModel, ConfigDict, Field, computed_field, field_validator, model_validator

from src.units import (
    fs_to_s,
    mm_to_m,
    nm_to_m,
    omega_width_to_wavelength,
    transform_limited_bandwidth,
    wavelength_to_omega,
)

Polarization = Literal["ordinary", "extraordinary"]
Regime = Literal["short", "intermediate", "long", "undefined"]
ConstantsSource = Literal["sellmeier", "anchored"]

SHORT_PULSE_LIMIT = 0.2
LONG_PULSE_LIMIT = 5.0


def classify_regime(eta: Optional[float]) -> Regime:
    if eta is None:
        return "undefined"
    if eta < SHORT_PULSE_LIMIT:
        return "short"
    if eta > LONG_PULSE_LIMIT:
        return "long"
    return "intermediate"


class PumpSpec(BaseModel):
    """
    Transform-limited Gaussian pump pulse
    """
    model_config = ConfigDict(frozen=True)

    lambda_nm: float = Field(..., gt=0, description="Central pump wavelength in nm")
    tau_fs: float = Field(..., gt=0, description="Intensity FWHM pulse duration in fs")

    @property
    def lambda_m(self) -> float:
        return nm_to_m(self.lambda_nm)

    @property
    def tau_s(self) -> float:
        return fs_to_s(self.tau_fs)

    @property
    def omega_p(self) -> float:
        return wavelength_to_omega(self.lambda_nm)

    @property
    def bandwidth(self) -> float:
        """Intensity FWHM in rad/s, Δω_p·τ = 4 ln 2"""
        return transform_limited_bandwidth(self.tau_s)

    @property
    def bandwidth_nm(self) -> float:
        return omega_width_to_wavelength(self.bandwidth, self.lambda_nm)

    @property
    def degenerate_wavelength_nm(self) -> float:
        return 2.0 * self.lambda_nm

    def with_tau(self, tau_fs: float) -> "PumpSpec":
        return self.model_copy(update={"tau_fs": tau_fs})


class ControlParameter(BaseModel):
    model_config = ConfigDict(frozen=True)

    eta: float = Field(..., ge=0)
    regime: Regime


class PhaseMatchConstants(BaseModel):
    """
    Walk-off constant A, dispersion constant B and the control parameter η
    for one crystal / pump combination.
    """
    model_config = ConfigDict(frozen=True)

    A: float
    B: float
    eta: Optional[float] = None
    regime: Regime = "undefined"
    source: ConstantsSource = "sellmeier"
    lambda_p_nm: float = Field(..., gt=0)
    tau_fs: float = Field(..., gt=0)
    length_mm: float = Field(..., gt=0)
    vg_pump: Optional[float] = Field(None, description="Pump group velocity in m/s")
    vg_ordinary: Optional[float] = Field(None, description="Ordinary-wave group velocity at ω_p/2 in m/s")
    group_index_pump: Optional[float] = None
    group_index_ordinary: Optional[float] = None
    phase_matching_angle_deg: Optional[float] = None

    @computed_field
    @property
    def degenerate(self) -> bool:
        return not self.A > 0

    @property
    def length_m(self) -> float:
        return mm_to_m(self.length_mm)


class Width(BaseModel):
    """A spectral width with its 1σ uncertainty and unit tag"""
    model_config = ConfigDict(frozen=True)

    value: float = Field(..., gt=0)
    sigma: float = Field(0.0, ge=0)
    unit: str = "nm"


class RatioEstimate(BaseModel):
    model_config = ConfigDict(frozen=True)

    value: float
    sigma: float = Field(0.0, ge=0)


class FitResult(BaseModel):
    """
    Gaussian fit amplitude·exp(−4 ln 2·(x−center)²/fwhm²) + baseline
    """
    center: float
    center_sigma: float = Field(..., ge=0)
    fwhm: float = Field(..., gt=0)
    fwhm_sigma: float = Field(..., ge=0)
    amplitude: float
    baseline: float
    residual_rms: float = Field(..., ge=0)
    n_points: int = Field(..., ge=5)
    converged: bool
    unit: str = "nm"
    model: Literal["gaussian"] = "gaussian"

    def width(self) -> Width:
        return Width(value=self.fwhm, sigma=self.fwhm_sigma, unit=self.unit)


class MeasuredColumn(BaseModel):
    """Experimental column of the theory/experiment table"""
    coincidence: Optional[FitResult] = None
    single: Optional[FitResult] = None
    pump_width_nm: Optional[float] = Field(None, gt=0)
    r: Optional[RatioEstimate] = None
    pump_to_coincidence: Optional[float] = None
    single_to_pump: Optional[float] = None


class EntanglementReport(BaseModel):
    """
    Theory column (analytic and numerical) plus the optional measured column.
    Widths in rad/s carry the `delta_omega_` prefix, widths in nm `delta_lambda_`.
    """
    crystal: str
    length_mm: float
    lambda_p_nm: float
    tau_fs: float
    delta_lambda_p_nm: float
    center_nm: float
    A: float
    B: float
    constants_source: ConstantsSource
    eta: Optional[float]
    regime: Regime

    delta_omega_c_analytic: Optional[float] = None
    delta_omega_s_analytic: Optional[float] = None
    delta_omega_c_numerical: float
    delta_omega_s_numerical: float
    delta_lambda_c_analytic: Optional[float] = None
    delta_lambda_s_analytic: Optional[float] = None
    delta_lambda_c_numerical: float
    delta_lambda_s_numerical: float
    delta_lambda_c_convolved: Optional[float] = None
    delta_lambda_s_convolved: Optional[float] = None

    R_analytic: Optional[float] = None
    R_numerical: float
    K: float = Field(..., ge=1.0 - 1e-9)
    K_half_density: Optional[float] = None
    K_converged: bool
    K_method: Literal["svd", "purity"]
    schmidt_eigenvalues: List[float] = Field(default_factory=list)

    measured: Optional[MeasuredColumn] = None
    flags: List[str] = Field(default_factory=list)
    provenance: Dict[str, str] = Field(default_factory=dict)

    @field_validator("schmidt_eigenvalues")
    @classmethod
    def eigenvalues_are_normalized(cls, values: List[float]) -> List[float]:
        if values:
            if min(values) < -1e-12:
                raise ValueError("Schmidt eigenvalues must be nonnegative")
            if abs(math.fsum(values) - 1.0) > 1e-9:
                raise ValueError("Schmidt eigenvalues must sum to 1")
        return values

    @model_validator(mode="after")
    def k_matches_eigenvalues(self) -> "EntanglementReport":
        if self.schmidt_eigenvalues:
            k = 1.0 / math.fsum(v * v for v in self.schmidt_eigenvalues)
            if abs(k - self.K) > 1e-9 * max(1.0, self.K):
                raise ValueError(f"K={self.K} does not match its eigenvalues (recomputed {k})")
        return self

    def flat_items(self) -> Dict[str, object]:
        """Scalar fields flattened to one level, measured values prefixed with `measured_`"""
        data = self.model_dump(exclude={"schmidt_eigenvalues", "measured", "flags", "provenance"})
        if self.measured is not None:
            m = self.measured
            if m.coincidence is not None:
                data["measured_delta_lambda_c"] = m.coincidence.fwhm
                data["measured_delta_lambda_c_sigma"] = m.coincidence.fwhm_sigma
            if m.single is not None:
                data["measured_delta_lambda_s"] = m.single.fwhm
                data["measured_delta_lambda_s_sigma"] = m.single.fwhm_sigma
            if m.r is not None:
                data["measured_R"] = m.r.value
                data["measured_R_sigma"] = m.r.sigma
        data["flags"] = "|".join(self.flags)
        return data

    def to_key_values(self) -> str:
        lines = []
        for key, value in self.flat_items().items():
            lines.append(f"{key} = {'' if value is None else value}")
        return "\n".join(lines) + "\n"


class SweepRow(BaseModel):
    model_config = ConfigDict(populate_by_name=True)

    tau_fs: float = Field(..., gt=0)
    eta: Optional[float] = None
    r_analytic: Optional[float] = Field(None, serialization_alias="R_analytic")
    k_numerical: Optional[float] = Field(None, serialization_alias="K_numerical")
    k_converged: Optional[bool] = Field(None, serialization_alias="K_converged")
    error: Optional[str] = None


SWEEP_COLUMNS = ["tau_fs", "eta", "R_analytic", "K_numerical", "K_converged"]


class SweepTable(BaseModel):
    rows: List[SweepRow]

    @field_validator("rows")
    @classmethod
    def rows_are_monotone(cls, rows: List[SweepRow]) -> List[SweepRow]:
        if len(rows) < 2:
            raise ValueError("a sweep needs at least 2 rows")
        taus = [row.tau_fs for row in rows]
        if any(b < a for a, b in zip(taus, taus[1:])):
            raise ValueError("sweep rows must be ordered by tau")
        return rows

    def column(self, name: str) -> List[Optional[float]]:
        return [getattr(row, name) for row in self.rows]


class TotalEntanglementBound(BaseModel):
    """R_tot ≈ 2·R_angle·R_ω across polarization, angle and frequency"""
    model_config = ConfigDict(frozen=True)

    r_angle: float = Field(..., ge=1)
    r_omega: float = Field(..., ge=1)
    r_tot: float
    kind: Literal["upper_bound"] = "upper_bound"


# --- HTTP request bodies -------------------------------------------------

class RunRequest(BaseModel):
    """A run configuration in TOML shape, a preset name, or both (config keys win)"""
    preset: Optional[str] = None
    config: Dict[str, Any] = Field(default_factory=dict)
    tau_fs: Optional[float] = Field(None, gt=0)
    lambda_nm: Optional[float] = Field(None, gt=0)
    length_mm: Optional[float] = Field(None, gt=0)

    @model_validator(mode="after")
    def has_a_source(self) -> "RunRequest":
        if self.preset is None and not self.config:
            raise ValueError("give a preset, a config, or both")
        return self


class RtotRequest(BaseModel):
    r_angle: float
    r_omega: float


class FitRequest(BaseModel):
    axis: List[float] = Field(..., min_length=5)
    intensity: List[float] = Field(..., min_length=5)
    sigma: Optional[List[float]] = None
    unit: Literal["nm", "rad_s"] = "nm"
