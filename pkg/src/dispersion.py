"""
Crystal dispersion

Refractive-index models with validity windows, wave-vector derivatives
k′ = dk/dω and k″ = d²k/dω², the collinear type-I phase-matching angle and
the walk-off / dispersion constants A, B with the control parameter η.

Sellmeier coefficients take λ in μm; everything returned is SI.
"""
import logging
import math
try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib
from abc import ABC, abstractmethod
from pathlib import Path
from typing import Dict, List, Literal, NamedTuple, Optional, Sequence, Tuple

from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator, model_validator
from scipy.optimize import brentq

from src.errors import ConfigError, DomainError, PhaseMatchingError, UndefinedRegimeError, format_validation_errors
from src.models import (
    ControlParameter,
    PhaseMatchConstants,
    Polarization,
    PumpSpec,
    classify_regime,
)
from src.units import SPEED_OF_LIGHT, m_to_nm, mm_to_m

logger = logging.getLogger(__name__)

# relative frequency steps for the finite-difference path
FIRST_DERIVATIVE_STEP = 1e-5
SECOND_DERIVATIVE_STEP = 1e-3

UM_PER_M = 1e6


class IndexDerivatives(NamedTuple):
    """n, dn/dλ (1/m) and d²n/dλ² (1/m²) at one vacuum wavelength"""
    n: float
    dn: float
    d2n: float


class DispersionModel(ABC):
    """
    Refractive index n(λ) per polarization.

    Subclasses provide f = n² and its first two derivatives in λ (μm); the
    base class turns them into index derivatives, which keeps the
    angle-dependent extraordinary index a matter of combining two f's.
    """

    name: str = "model"

    @abstractmethod
    def window_nm(self, polarization: Polarization) -> Tuple[float, float]:
        ...

    @abstractmethod
    def square_derivatives(self, lambda_um: float, polarization: Polarization) -> Tuple[float, float, float]:
        """n², d(n²)/dλ, d²(n²)/dλ² with λ in μm"""

    @property
    def isotropic(self) -> bool:
        return False

    def check_window(self, lambda_nm: float, polarization: Polarization) -> None:
        low, high = self.window_nm(polarization)
        if not (math.isfinite(lambda_nm) and low <= lambda_nm <= high):
            raise DomainError(
                f"{self.name}: {polarization} index requested at {lambda_nm:.6g} nm, "
                f"outside the validity window [{low:g}, {high:g}] nm"
            )


def _index_from_square(f: float, f1: float, f2: float) -> Tuple[float, float, float]:
    n = math.sqrt(f)
    n1 = f1 / (2.0 * n)
    n2 = f2 / (2.0 * n) - f1 * f1 / (4.0 * n ** 3)
    return n, n1, n2


def _index_from_inverse_square(g: float, g1: float, g2: float) -> Tuple[float, float, float]:
    n = g ** -0.5
    n1 = -0.5 * g ** -1.5 * g1
    n2 = 0.75 * g ** -2.5 * g1 * g1 - 0.5 * g ** -1.5 * g2
    return n, n1, n2


class ConstantIndexModel(DispersionModel):
    """Dispersionless medium; n = 1 is the vacuum test crystal"""

    def __init__(self, n: float = 1.0, name: str = "constant", window: Tuple[float, float] = (1.0, 1e7)):
        if n <= 0:
            raise ValueError("index must be positive")
        self.n = n
        self.name = name
        self.window = window

    @property
    def isotropic(self) -> bool:
        return True

    def window_nm(self, polarization: Polarization) -> Tuple[float, float]:
        return self.window

    def square_derivatives(self, lambda_um, polarization):
        return self.n * self.n, 0.0, 0.0


class QuadraticIndexModel(DispersionModel):
    """n(λ) = n0 + α·λ² (λ in μm), isotropic; used to check k″ against closed forms"""

    def __init__(self, n0: float = 1.5, alpha: float = 0.01, name: str = "quadratic",
                 window: Tuple[float, float] = (200.0, 5000.0)):
        self.n0 = n0
        self.alpha = alpha
        self.name = name
        self.window = window

    @property
    def isotropic(self) -> bool:
        return True

    def window_nm(self, polarization: Polarization) -> Tuple[float, float]:
        return self.window

    def square_derivatives(self, lambda_um, polarization):
        n = self.n0 + self.alpha * lambda_um ** 2
        n1 = 2.0 * self.alpha * lambda_um
        n2 = 2.0 * self.alpha
        return n * n, 2.0 * n * n1, 2.0 * (n1 * n1 + n * n2)


class PoleTerms(BaseModel):
    """
    n² = a + Σ p_i/(λ² − q_i) − d·λ² with λ in μm
    """
    model_config = ConfigDict(frozen=True)

    a: float
    poles: Tuple[Tuple[float, float], ...] = ()
    d: float = 0.0
    window_nm: Tuple[float, float]

    def square_derivatives(self, lam: float) -> Tuple[float, float, float]:
        lam2 = lam * lam
        f = self.a - self.d * lam2
        f1 = -2.0 * self.d * lam
        f2 = -2.0 * self.d
        for p, q in self.poles:
            den = lam2 - q
            f += p / den
            f1 -= 2.0 * p * lam / den ** 2
            f2 += -2.0 * p / den ** 2 + 8.0 * p * lam2 / den ** 3
        return f, f1, f2


class PoleSellmeierModel(DispersionModel):
    def __init__(self, ordinary: PoleTerms, extraordinary: PoleTerms, name: str = "sellmeier"):
        self.terms: Dict[str, PoleTerms] = {"ordinary": ordinary, "extraordinary": extraordinary}
        self.name = name

    @property
    def isotropic(self) -> bool:
        return self.terms["ordinary"] == self.terms["extraordinary"]

    def window_nm(self, polarization: Polarization) -> Tuple[float, float]:
        return self.terms[polarization].window_nm

    def square_derivatives(self, lambda_um, polarization):
        return self.terms[polarization].square_derivatives(lambda_um)


def refractive_index(model: DispersionModel, lambda_nm: float, polarization: Polarization,
                     angle_rad: Optional[float] = None) -> float:
    return index_derivatives(model, lambda_nm, polarization, angle_rad).n


def index_derivatives(model: DispersionModel, lambda_nm: float, polarization: Polarization,
                      angle_rad: Optional[float] = None) -> IndexDerivatives:
    """
    n and its λ-derivatives. For the extraordinary wave at propagation angle θ
    to the optic axis the uniaxial relation n⁻² = cos²θ/n_o² + sin²θ/n_e² is
    differentiated through; angle None means the principal index.
    """
    lam_um = lambda_nm / 1000.0
    model.check_window(lambda_nm, polarization)

    if polarization == "extraordinary" and angle_rad is not None and not model.isotropic:
        model.check_window(lambda_nm, "ordinary")
        fo, fo1, fo2 = model.square_derivatives(lam_um, "ordinary")
        fe, fe1, fe2 = model.square_derivatives(lam_um, "extraordinary")
        cos2 = math.cos(angle_rad) ** 2
        sin2 = math.sin(angle_rad) ** 2
        g = cos2 / fo + sin2 / fe
        g1 = -cos2 * fo1 / fo ** 2 - sin2 * fe1 / fe ** 2
        g2 = (cos2 * (-fo2 / fo ** 2 + 2.0 * fo1 ** 2 / fo ** 3)
              + sin2 * (-fe2 / fe ** 2 + 2.0 * fe1 ** 2 / fe ** 3))
        n, n1, n2 = _index_from_inverse_square(g, g1, g2)
    else:
        n, n1, n2 = _index_from_square(*model.square_derivatives(lam_um, polarization))

    if not n > 0:
        raise DomainError(f"{model.name}: non-physical index {n} at {lambda_nm} nm")
    return IndexDerivatives(n, n1 * UM_PER_M, n2 * UM_PER_M ** 2)


def group_index(model: DispersionModel, lambda_nm: float, polarization: Polarization,
                angle_rad: Optional[float] = None) -> float:
    """n_g = n − λ·dn/dλ"""
    n, dn, _ = index_derivatives(model, lambda_nm, polarization, angle_rad)
    return n - lambda_nm * 1e-9 * dn


def _omega_to_nm(omega: float) -> float:
    return m_to_nm(2.0 * math.pi * SPEED_OF_LIGHT / omega)


def _wavenumber(model, polarization, omega, angle_rad) -> float:
    return refractive_index(model, _omega_to_nm(omega), polarization, angle_rad) * omega / SPEED_OF_LIGHT


def _richardson(estimate, h: float) -> float:
    return (4.0 * estimate(h / 2.0) - estimate(h)) / 3.0


def wavevector_derivatives(model: DispersionModel, polarization: Polarization, omega: float,
                           angle_rad: Optional[float] = None,
                           method: Literal["analytic", "numeric"] = "analytic") -> Tuple[float, float]:
    """
    k′ (s/m) and k″ (s²/m) at angular frequency omega.

    The analytic path uses k′ = (n − λn′)/c and k″ = λ³n″/(2πc²). The numeric
    path differentiates k(ω) = n·ω/c by central differences with one
    Richardson step; its stencil must stay inside the validity window.
    """
    if not (math.isfinite(omega) and omega > 0):
        raise ValueError(f"omega must be positive and finite, got {omega}")
    low_nm = _omega_to_nm(omega * (1.0 + 2.0 * SECOND_DERIVATIVE_STEP))
    high_nm = _omega_to_nm(omega * (1.0 - 2.0 * SECOND_DERIVATIVE_STEP))
    model.check_window(low_nm, polarization)
    model.check_window(high_nm, polarization)

    if method == "analytic":
        lam = 2.0 * math.pi * SPEED_OF_LIGHT / omega
        n, dn, d2n = index_derivatives(model, m_to_nm(lam), polarization, angle_rad)
        k1 = (n - lam * dn) / SPEED_OF_LIGHT
        k2 = lam ** 3 * d2n / (2.0 * math.pi * SPEED_OF_LIGHT ** 2)
        return k1, k2

    if method != "numeric":
        raise ValueError(f"unknown differentiation method {method!r}")

    def k(w: float) -> float:
        return _wavenumber(model, polarization, w, angle_rad)

    k0 = k(omega)

    def first(h: float) -> float:
        return (k(omega + h) - k(omega - h)) / (2.0 * h)

    def second(h: float) -> float:
        return (k(omega + h) - 2.0 * k0 + k(omega - h)) / (h * h)

    k1 = _richardson(first, FIRST_DERIVATIVE_STEP * omega)
    k2 = _richardson(second, SECOND_DERIVATIVE_STEP * omega)
    return k1, k2


def phase_matching_angle(model: DispersionModel, lambda_p_nm: float) -> Optional[float]:
    """
    Collinear type-I (e → o + o) angle θ with n_e(θ, λ_p) = n_o(2λ_p), in
    radians. Isotropic models have no angle and return None.
    """
    if model.isotropic:
        return None
    target = refractive_index(model, 2.0 * lambda_p_nm, "ordinary")

    def mismatch(theta: float) -> float:
        return refractive_index(model, lambda_p_nm, "extraordinary", theta) - target

    low, high = mismatch(0.0), mismatch(math.pi / 2.0)
    if low * high > 0:
        raise PhaseMatchingError(
            f"{model.name}: n_o(2λ_p) = {target:.6f} is outside the reachable pump index range "
            f"[{min(low, high) + target:.6f}, {max(low, high) + target:.6f}] at λ_p = {lambda_p_nm} nm"
        )
    return brentq(mismatch, 0.0, math.pi / 2.0, xtol=1e-14, rtol=1e-14)


class CrystalSpec(BaseModel):
    """
    A nonlinear crystal: index model, length and optionally a fixed pump
    propagation angle (otherwise the phase-matching angle is solved for).
    Pump is extraordinary, signal and idler ordinary.
    """
    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    name: str
    length_mm: float = Field(..., gt=0)
    model: DispersionModel
    pump_angle_deg: Optional[float] = Field(None, ge=0, le=90)

    @property
    def length_m(self) -> float:
        return mm_to_m(self.length_mm)


def control_parameter(A: float, length_m: float, tau_s: float) -> ControlParameter:
    """η = 2cτ/(A·L) and its regime label"""
    if not (length_m > 0 and tau_s > 0):
        raise ValueError("crystal length and pulse duration must be positive")
    if not A > 0:
        raise UndefinedRegimeError(f"walk-off constant A = {A:g} <= 0, η is undefined")
    eta = 2.0 * SPEED_OF_LIGHT * tau_s / (A * length_m)
    return ControlParameter(eta=eta, regime=classify_regime(eta))


def _with_control_parameter(A: float, length_m: float, pump: PumpSpec) -> Dict[str, object]:
    try:
        cp = control_parameter(A, length_m, pump.tau_s)
        return {"eta": cp.eta, "regime": cp.regime}
    except UndefinedRegimeError as exc:
        logger.warning(str(exc))
        return {"eta": None, "regime": "undefined"}


def walkoff_constants(crystal: CrystalSpec, pump: PumpSpec,
                      method: Literal["analytic", "numeric"] = "analytic") -> PhaseMatchConstants:
    """
    A = c·(k_p′ − k_1′) = c·(1/v_p − 1/v_o) and B = (c/4)·ω_p·k_1″, with the
    pump on the extraordinary wave at the phase-matching angle and the
    degenerate photons ordinary at ω_p/2.
    """
    if crystal.pump_angle_deg is not None:
        theta = math.radians(crystal.pump_angle_deg)
    else:
        theta = phase_matching_angle(crystal.model, pump.lambda_nm)

    omega_p = pump.omega_p
    kp1, _ = wavevector_derivatives(crystal.model, "extraordinary", omega_p, theta, method)
    k11, k12 = wavevector_derivatives(crystal.model, "ordinary", omega_p / 2.0, None, method)

    A = SPEED_OF_LIGHT * (kp1 - k11)
    B = SPEED_OF_LIGHT / 4.0 * omega_p * k12
    logger.debug(f"{crystal.name}: A={A:.6g} B={B:.6g} theta={theta}")

    return PhaseMatchConstants(
        A=A,
        B=B,
        source="sellmeier",
        lambda_p_nm=pump.lambda_nm,
        tau_fs=pump.tau_fs,
        length_mm=crystal.length_mm,
        vg_pump=1.0 / kp1,
        vg_ordinary=1.0 / k11,
        group_index_pump=SPEED_OF_LIGHT * kp1,
        group_index_ordinary=SPEED_OF_LIGHT * k11,
        phase_matching_angle_deg=None if theta is None else math.degrees(theta),
        **_with_control_parameter(A, crystal.length_m, pump),
    )


def anchored_constants(A: float, B: float, length_mm: float, pump: PumpSpec) -> PhaseMatchConstants:
    """Constants taken as given (e.g. inverted from a measured table) instead of from the index model"""
    if not (math.isfinite(A) and math.isfinite(B)):
        raise ValueError("A and B must be finite")
    return PhaseMatchConstants(
        A=A,
        B=B,
        source="anchored",
        lambda_p_nm=pump.lambda_nm,
        tau_fs=pump.tau_fs,
        length_mm=length_mm,
        **_with_control_parameter(A, mm_to_m(length_mm), pump),
    )


def with_pulse(constants: PhaseMatchConstants, tau_fs: float) -> PhaseMatchConstants:
    """Same crystal and pump wavelength, new pulse duration; only η changes"""
    pump = PumpSpec(lambda_nm=constants.lambda_p_nm, tau_fs=tau_fs)
    update = {"tau_fs": tau_fs, **_with_control_parameter(constants.A, constants.length_m, pump)}
    return constants.model_copy(update=update)


# --- index files ---------------------------------------------------------

class IndexEntry(BaseModel):
    """
    One `[[index]]` table of an index file.

    form = "pole":      coefficients [a, p1, q1, ..., pk, qk, d]
                        n² = a + Σ p/(λ² − q) − d·λ²
    form = "sellmeier": coefficients [B1, C1, ..., Bk, Ck]
                        n² = 1 + Σ B·λ²/(λ² − C), C in μm²
    """
    model_config = ConfigDict(extra="forbid")

    polarization: Polarization
    form: Literal["pole", "sellmeier"] = "pole"
    coefficients: List[float]
    window_nm: Tuple[float, float]

    @field_validator("window_nm")
    @classmethod
    def window_is_ordered(cls, window: Tuple[float, float]) -> Tuple[float, float]:
        low, high = window
        if not (0 < low < high):
            raise ValueError("window_nm must be [low, high] with 0 < low < high")
        return window

    @model_validator(mode="after")
    def coefficient_count_matches_form(self) -> "IndexEntry":
        count = len(self.coefficients)
        if self.form == "pole" and (count < 4 or count % 2):
            raise ValueError("pole form needs [a, p1, q1, ..., d]: an even count of at least 4")
        if self.form == "sellmeier" and (count < 2 or count % 2):
            raise ValueError("sellmeier form needs [B1, C1, ...]: an even count of at least 2")
        return self

    def to_terms(self) -> PoleTerms:
        c = self.coefficients
        if self.form == "pole":
            poles = tuple((c[i], c[i + 1]) for i in range(1, len(c) - 1, 2))
            return PoleTerms(a=c[0], poles=poles, d=c[-1], window_nm=self.window_nm)
        # B·λ²/(λ² − C) = B + B·C/(λ² − C)
        pairs = [(c[i], c[i + 1]) for i in range(0, len(c), 2)]
        return PoleTerms(
            a=1.0 + sum(b for b, _ in pairs),
            poles=tuple((b * q, q) for b, q in pairs),
            window_nm=self.window_nm,
        )


class IndexFile(BaseModel):
    model_config = ConfigDict(extra="forbid")

    name: str = "custom"
    index: List[IndexEntry]

    @field_validator("index")
    @classmethod
    def one_entry_per_polarization(cls, entries: List[IndexEntry]) -> List[IndexEntry]:
        seen = [e.polarization for e in entries]
        if sorted(seen) != ["extraordinary", "ordinary"]:
            raise ValueError(f"need exactly one ordinary and one extraordinary entry, got {seen}")
        return entries

    def build(self) -> PoleSellmeierModel:
        by_pol = {e.polarization: e.to_terms() for e in self.index}
        return PoleSellmeierModel(by_pol["ordinary"], by_pol["extraordinary"], name=self.name)


def build_dispersion_model(entries: Sequence[dict], name: str = "custom") -> PoleSellmeierModel:
    try:
        return IndexFile(name=name, index=list(entries)).build()
    except ValidationError as exc:
        raise ConfigError(format_validation_errors(exc)) from exc


def load_dispersion_model(path: Path) -> PoleSellmeierModel:
    path = Path(path)
    try:
        data = tomllib.loads(path.read_text(encoding="utf-8"))
    except FileNotFoundError as exc:
        raise ConfigError([f"{path}: index file not found"]) from exc
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError([f"{path}: {exc}"]) from exc
    data.setdefault("name", path.stem)
    try:
        model = IndexFile.model_validate(data).build()
    except ValidationError as exc:
        raise ConfigError([f"{path}: {p}" for p in format_validation_errors(exc)]) from exc
    logger.info(f"Loaded dispersion model '{model.name}' from {path}")
    return model
