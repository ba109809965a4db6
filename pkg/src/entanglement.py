"""
Entanglement quantifiers

The experimentally accessible ratio R = Δω_s/Δω_c, the Schmidt number
K = 1/Σλ_n² (dense SVD of the sampled amplitude, or the purity Tr ρ₁² by
quadrature for grids too large to decompose), sweeps over pulse duration,
the total-entanglement bound and the theory/experiment report.
"""
import logging
import math
from dataclasses import dataclass, field
from typing import Iterable, List, Literal, Optional, Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict, Field
from scipy.linalg import LinAlgError, svdvals

from src.dispersion import CrystalSpec, control_parameter, walkoff_constants, with_pulse
from src.errors import (
    BiphotonError,
    DecompositionError,
    RegimeError,
    SizingError,
    UndefinedRegimeError,
    UnitMismatchError,
)
from src.jsa import (
    SCHMIDT_POLICY,
    GridPolicy,
    JointSpectralAmplitude,
    build_grid,
    sample_jsa,
    short_pulse_coincidence_width,
    short_pulse_single_width,
)
from src.models import (
    EntanglementReport,
    MeasuredColumn,
    PhaseMatchConstants,
    PumpSpec,
    RatioEstimate,
    SweepRow,
    SweepTable,
    TotalEntanglementBound,
    Width,
)
from src.spectra import (
    MeasuredSpectrum,
    Spectrum,
    coincidence_spectrum,
    convolve_response,
    fwhm,
    single_spectrum,
    wavelength_to_width,
    width_to_wavelength,
)
from src.units import wavelength_to_omega

logger = logging.getLogger(__name__)

# η above which the short-pulse widths are flagged, and at which they are refused
WARNING_ETA = 0.2
REFUSAL_ETA = 1.0
CONVERGENCE_TOLERANCE = 0.01
R_DISCREPANCY_TOLERANCE = 0.10
DENSE_LIMIT = 4096
DENSE_AUTO_LIMIT = DENSE_LIMIT

Quantifier = Literal["R_analytic", "K"]
KMethod = Literal["auto", "svd", "purity"]


def analytic_widths_short_pulse(constants: PhaseMatchConstants, length_m: float,
                                pump: PumpSpec) -> Tuple[float, float]:
    """
    (Δω_c, Δω_s) in rad/s from the short-pulse closed forms
    Δω_c = 5.56c/(AL), Δω_s = √(2A·ln 2·ω_p/(Bτ)). Refused for η >= 1.
    """
    A, B = constants.A, constants.B
    if not (A > 0 and B > 0):
        raise UndefinedRegimeError(f"short-pulse widths need A > 0 and B > 0 (A={A:g}, B={B:g})")
    eta = control_parameter(A, length_m, pump.tau_s).eta
    if eta >= REFUSAL_ETA:
        raise RegimeError(f"η = {eta:.3g} >= {REFUSAL_ETA:g}: the short-pulse widths do not apply")
    if eta > WARNING_ETA:
        logger.warning(f"η = {eta:.3g} > {WARNING_ETA:g}: short-pulse widths are approximate")
    return short_pulse_coincidence_width(A, length_m), short_pulse_single_width(A, B, pump.omega_p, pump.tau_s)


def r_from_widths(delta_s: Width, delta_c: Width) -> RatioEstimate:
    """R = Δs/Δc with first-order error propagation"""
    if delta_s.unit != delta_c.unit:
        raise UnitMismatchError(f"widths in different units: {delta_s.unit} and {delta_c.unit}")
    value = delta_s.value / delta_c.value
    relative = math.hypot(delta_s.sigma / delta_s.value, delta_c.sigma / delta_c.value)
    return RatioEstimate(value=value, sigma=value * relative)


def double_gaussian_schmidt_number(a: float, b: float) -> float:
    if not (a > 0 and b > 0):
        raise ValueError("widths must be positive")
    return (a * a + b * b) / (2.0 * a * b)


@dataclass(frozen=True)
class SchmidtResult:
    K: float
    method: Literal["svd", "purity"]
    K_half_density: Optional[float] = None
    converged: bool = True
    eigenvalues: np.ndarray = field(default_factory=lambda: np.empty(0))


def _schmidt_eigenvalues(matrix: np.ndarray, step: float) -> np.ndarray:
    finite = bool(np.all(np.isfinite(matrix)))
    try:
        singular = svdvals(matrix * step)
    except (LinAlgError, ValueError) as exc:
        raise DecompositionError(
            "singular value decomposition failed",
            diagnostics={"shape": matrix.shape, "finite": finite},
        ) from exc
    weights = singular * singular
    total = float(np.sum(weights))
    if not total > 0:
        raise DecompositionError("amplitude is identically zero", diagnostics={"shape": matrix.shape})
    return weights / total


def _check_convergence(K: float, K_half: Optional[float], method: str) -> bool:
    if K_half is None:
        return True
    change = abs(K - K_half) / K
    if change >= CONVERGENCE_TOLERANCE:
        logger.warning(f"K ({method}) changed by {change:.1%} between half and full density; not converged")
        return False
    return True


def schmidt_decomposition(jsa: JointSpectralAmplitude, check_convergence: bool = True,
                          dense_limit: int = DENSE_LIMIT) -> SchmidtResult:
    """
    Schmidt eigenvalues λ_n = s_n²/Σs² from the singular values of the
    sampled amplitude (scaled by the lattice step) and K = 1/Σλ². The
    convergence record repeats the decomposition at half the density.
    """
    g = jsa.grid
    if g.n1 != g.n2:
        raise ValueError(f"decomposition needs a square lattice, got {g.n1}x{g.n2}")
    if g.n1 > dense_limit:
        raise SizingError(f"{g.n1}x{g.n1} dense decomposition exceeds the limit of {dense_limit}",
                          suggestion="use the purity method")
    eigenvalues = _schmidt_eigenvalues(jsa.densify(), g.step)
    K = 1.0 / float(np.sum(eigenvalues * eigenvalues))

    K_half = None
    if check_convergence:
        coarse = jsa.subsample()
        half_eigenvalues = _schmidt_eigenvalues(coarse.densify(), coarse.grid.step)
        K_half = 1.0 / float(np.sum(half_eigenvalues * half_eigenvalues))
    converged = _check_convergence(K, K_half, "svd")
    logger.info(f"Schmidt decomposition {g.n1}x{g.n1}: K = {K:.4g}")
    return SchmidtResult(K=K, method="svd", K_half_density=K_half, converged=converged, eigenvalues=eigenvalues)


def _purity_schmidt_number(jsa: JointSpectralAmplitude) -> float:
    g = jsa.grid
    S = np.asarray(jsa.amplitude)
    h = g.step
    norm = float(np.sum(S * S)) * h * h
    if not norm > 0:
        raise DecompositionError("amplitude is identically zero", diagnostics={"shape": S.shape})
    if g.n_sum is None:
        M = S * h
        rho = M @ M.T
        purity = float(np.sum(rho * rho))
    else:
        # ρ₁(ν₁, ν₁′) along each band diagonal d = ν₁′ − ν₁, the matrix is symmetric in d
        n1, ns = S.shape
        total = 0.0
        for d in range(min(n1, ns)):
            r = np.einsum("ij,ij->i", S[: n1 - d, : ns - d], S[d:, d:])
            total += (1.0 if d == 0 else 2.0) * float(np.dot(r, r))
        purity = total * h ** 4
    if not purity > 0:
        raise DecompositionError("purity quadrature vanished", diagnostics={"shape": S.shape})
    return norm * norm / purity


def schmidt_from_purity(jsa: JointSpectralAmplitude, check_convergence: bool = True) -> SchmidtResult:
    """K = (Σ|Ψ|²Δ²)²/Tr ρ₁² by quadrature; any layout"""
    K = _purity_schmidt_number(jsa)
    K_half = _purity_schmidt_number(jsa.subsample()) if check_convergence else None
    converged = _check_convergence(K, K_half, "purity")
    logger.info(f"Purity quadrature {jsa.grid.shape[0]}x{jsa.grid.shape[1]}: K = {K:.4g}")
    return SchmidtResult(K=K, method="purity", K_half_density=K_half, converged=converged)


def purity_quadrature_K(constants: PhaseMatchConstants, pump: PumpSpec, length_m: float,
                        policy: GridPolicy = SCHMIDT_POLICY, workers: int = 1) -> SchmidtResult:
    grid = build_grid(constants, pump, length_m, policy.model_copy(update={"layout": "sheared"}))
    return schmidt_from_purity(sample_jsa(constants, pump, length_m, grid, workers))


def schmidt_number(constants: PhaseMatchConstants, pump: PumpSpec, length_m: float, method: KMethod = "auto",
                   policy: GridPolicy = SCHMIDT_POLICY, dense_auto_limit: int = DENSE_AUTO_LIMIT,
                   dense_limit: int = DENSE_LIMIT, workers: int = 1) -> SchmidtResult:
    """K of the physical state; `auto` decomposes densely when the lattice is small enough"""
    grid = build_grid(constants, pump, length_m, policy.model_copy(update={"layout": "sheared"}))
    if method == "auto":
        method = "svd" if grid.n1 <= dense_auto_limit else "purity"
    jsa = sample_jsa(constants, pump, length_m, grid, workers)
    if method == "svd":
        return schmidt_decomposition(jsa, dense_limit=dense_limit)
    return schmidt_from_purity(jsa)


def total_entanglement_bound(r_angle: float, r_omega: float) -> TotalEntanglementBound:
    """R_tot ≈ 2·R_angle·R_ω; polarization contributes the factor 2. An upper bound."""
    if not (r_angle >= 1 and r_omega >= 1):
        raise ValueError(f"ratios must be >= 1, got R_angle={r_angle}, R_omega={r_omega}")
    return TotalEntanglementBound(r_angle=r_angle, r_omega=r_omega, r_tot=2.0 * r_angle * r_omega)


# --- sweeps --------------------------------------------------------------

def sweep_taus(tau_min_fs: float, tau_max_fs: float, n_points: int) -> List[float]:
    """Log-spaced pulse durations, endpoints included"""
    if n_points < 2:
        raise ValueError("a sweep needs at least 2 points")
    if not (0 < tau_min_fs < tau_max_fs):
        raise ValueError(f"need 0 < tau_min < tau_max, got {tau_min_fs}, {tau_max_fs}")
    return [float(t) for t in np.geomspace(tau_min_fs, tau_max_fs, n_points)]


def sweep_row(constants: PhaseMatchConstants, tau_fs: float, which: Iterable[Quantifier] = ("R_analytic", "K"),
              policy: GridPolicy = SCHMIDT_POLICY, k_method: KMethod = "purity") -> SweepRow:
    """
    One sweep row. Failures are recorded on the row, not raised, so one bad
    point does not sink the sweep.
    """
    which = set(which)
    row_constants = with_pulse(constants, tau_fs)
    pump = PumpSpec(lambda_nm=row_constants.lambda_p_nm, tau_fs=tau_fs)
    values = {"tau_fs": tau_fs, "eta": row_constants.eta}
    try:
        if "R_analytic" in which and row_constants.eta is not None and row_constants.eta < REFUSAL_ETA:
            delta_c, delta_s = analytic_widths_short_pulse(row_constants, row_constants.length_m, pump)
            values["r_analytic"] = delta_s / delta_c
        if "K" in which:
            result = schmidt_number(row_constants, pump, row_constants.length_m, method=k_method, policy=policy)
            values["k_numerical"] = result.K
            values["k_converged"] = result.converged
    except BiphotonError as exc:
        logger.warning(f"Sweep row tau={tau_fs:.4g} fs failed: {exc}")
        values["error"] = str(exc)
    return SweepRow(**values)


def sweep_quantifiers(crystal: CrystalSpec, pump: PumpSpec, tau_range_fs: Tuple[float, float], n_points: int,
                      which: Iterable[Quantifier] = ("R_analytic", "K"),
                      constants: Optional[PhaseMatchConstants] = None,
                      policy: GridPolicy = SCHMIDT_POLICY, k_method: KMethod = "purity") -> SweepTable:
    """Sequential sweep; SweepRunner evaluates the same rows concurrently with caching"""
    base = constants if constants is not None else walkoff_constants(crystal, pump)
    taus = sweep_taus(tau_range_fs[0], tau_range_fs[1], n_points)
    return SweepTable(rows=[sweep_row(base, tau, which, policy, k_method) for tau in taus])


# --- report --------------------------------------------------------------

class ReportOptions(BaseModel):
    model_config = ConfigDict(frozen=True)

    grid: GridPolicy = GridPolicy()
    schmidt_grid: GridPolicy = SCHMIDT_POLICY
    k_method: KMethod = "auto"
    dense_auto_limit: int = DENSE_AUTO_LIMIT
    dense_limit: int = DENSE_LIMIT
    idler_detuning_nm: float = 0.0
    idler_window_nm: float = Field(0.0, ge=0)
    coincidence_resolution_nm: Optional[float] = Field(0.2, gt=0)
    single_resolution_nm: Optional[float] = Field(1.0, gt=0)
    response_shape: Literal["gaussian", "rectangular"] = "gaussian"
    workers: int = Field(1, ge=1)


@dataclass(frozen=True)
class PredictedSpectra:
    """Sampled amplitude and the spectra derived from it, all on detuning axes in rad/s"""
    jsa: JointSpectralAmplitude
    coincidence: Spectrum
    single: Spectrum
    center_nm: float
    coincidence_convolved: Optional[Spectrum] = None
    single_convolved: Optional[Spectrum] = None


def _through_detector(spectrum: Spectrum, resolution_nm: Optional[float], center_nm: float,
                      shape: str) -> Optional[Spectrum]:
    if not resolution_nm:
        return None
    return convolve_response(spectrum, wavelength_to_width(resolution_nm, center_nm), shape)


def predicted_spectra(constants: PhaseMatchConstants, options: ReportOptions = ReportOptions()) -> PredictedSpectra:
    """
    Coincidence spectrum with the idler fixed at the configured detuning
    (integrated over the idler window if one is set), single-count spectrum,
    and both as seen through the monochromator resolutions.
    """
    pump = PumpSpec(lambda_nm=constants.lambda_p_nm, tau_fs=constants.tau_fs)
    length_m = constants.length_m
    center_nm = pump.degenerate_wavelength_nm

    grid = build_grid(constants, pump, length_m, options.grid)
    jsa = sample_jsa(constants, pump, length_m, grid, options.workers)
    idler_nu = wavelength_to_omega(center_nm + options.idler_detuning_nm) - pump.omega_p / 2.0
    window = wavelength_to_width(options.idler_window_nm, center_nm)
    coincidence = coincidence_spectrum(jsa, idler_nu, window)
    single = single_spectrum(jsa)
    return PredictedSpectra(
        jsa=jsa,
        coincidence=coincidence,
        single=single,
        center_nm=center_nm,
        coincidence_convolved=_through_detector(coincidence, options.coincidence_resolution_nm, center_nm,
                                                options.response_shape),
        single_convolved=_through_detector(single, options.single_resolution_nm, center_nm,
                                           options.response_shape),
    )


@dataclass(frozen=True)
class MeasuredInputs:
    coincidence: Optional[MeasuredSpectrum] = None
    single: Optional[MeasuredSpectrum] = None
    pump_width_nm: Optional[float] = None


def _measured_column(measured: MeasuredInputs, predicted_coincidence_nm: Optional[float],
                     flags: List[str]) -> MeasuredColumn:
    coincidence = measured.coincidence.fit() if measured.coincidence is not None else None
    single = measured.single.fit() if measured.single is not None else None
    column = MeasuredColumn(coincidence=coincidence, single=single, pump_width_nm=measured.pump_width_nm)
    if coincidence is not None and single is not None:
        column.r = r_from_widths(single.width(), coincidence.width())
    if measured.pump_width_nm is not None:
        if coincidence is not None:
            column.pump_to_coincidence = measured.pump_width_nm / coincidence.fwhm
        if single is not None:
            column.single_to_pump = single.fwhm / measured.pump_width_nm
    if (coincidence is not None and predicted_coincidence_nm is not None
            and coincidence.fwhm + 2.0 * coincidence.fwhm_sigma < predicted_coincidence_nm):
        flags.append("measured coincidence width below the instrument-limited prediction")
    return column


def build_report(crystal_name: str, constants: PhaseMatchConstants, options: ReportOptions = ReportOptions(),
                 measured: Optional[MeasuredInputs] = None) -> EntanglementReport:
    """
    Theory column (closed-form and numerical widths in rad/s and nm, raw and
    through the detector response, both R values, K) and, when measured
    spectra are given, the experiment column.
    """
    pump = PumpSpec(lambda_nm=constants.lambda_p_nm, tau_fs=constants.tau_fs)
    length_m = constants.length_m
    center_nm = pump.degenerate_wavelength_nm
    flags: List[str] = []
    provenance = {"constants": constants.source}

    delta_c_an = delta_s_an = None
    try:
        delta_c_an, delta_s_an = analytic_widths_short_pulse(constants, length_m, pump)
        provenance["analytic"] = "short-pulse closed form"
        if constants.eta is not None and constants.eta > WARNING_ETA:
            flags.append(f"η = {constants.eta:.3g} above {WARNING_ETA:g}: closed-form widths approximate")
    except RegimeError as exc:
        provenance["analytic"] = f"refused: {exc}"
        flags.append("closed-form widths unavailable")

    predicted = predicted_spectra(constants, options)
    grid = predicted.jsa.grid
    delta_c_num = fwhm(predicted.coincidence)
    delta_s_num = fwhm(predicted.single)
    provenance["numerical"] = (f"{grid.layout} grid {grid.shape[0]}x{grid.shape[1]}, "
                               f"step {grid.step:.4g} rad/s")

    convolved_c = convolved_s = None
    if predicted.coincidence_convolved is not None:
        convolved_c = width_to_wavelength(fwhm(predicted.coincidence_convolved), center_nm)
    if predicted.single_convolved is not None:
        convolved_s = width_to_wavelength(fwhm(predicted.single_convolved), center_nm)
    provenance["convolved"] = (f"{options.response_shape} response, "
                               f"{options.coincidence_resolution_nm} nm / {options.single_resolution_nm} nm")

    schmidt = schmidt_number(constants, pump, length_m, method=options.k_method, policy=options.schmidt_grid,
                             dense_auto_limit=options.dense_auto_limit, dense_limit=options.dense_limit,
                             workers=options.workers)
    provenance["K"] = f"{schmidt.method}, half-density K = {schmidt.K_half_density}"
    if not schmidt.converged:
        flags.append("K not converged between half and full density")

    r_analytic = delta_s_an / delta_c_an if delta_c_an else None
    r_numerical = delta_s_num / delta_c_num
    if r_analytic is not None:
        discrepancy = abs(r_numerical - r_analytic) / r_analytic
        if discrepancy > R_DISCREPANCY_TOLERANCE:
            logger.warning(f"numerical R = {r_numerical:.4g} differs from closed-form R = {r_analytic:.4g} "
                           f"by {discrepancy:.1%}")
            flags.append(f"numerical and closed-form R differ by {discrepancy:.1%}")

    measured_column = None
    if measured is not None:
        measured_column = _measured_column(measured, convolved_c, flags)
        provenance["measured"] = ", ".join(
            s.source for s in (measured.coincidence, measured.single) if s is not None and s.source
        ) or "pump width only"

    return EntanglementReport(
        crystal=crystal_name,
        length_mm=constants.length_mm,
        lambda_p_nm=pump.lambda_nm,
        tau_fs=pump.tau_fs,
        delta_lambda_p_nm=pump.bandwidth_nm,
        center_nm=center_nm,
        A=constants.A,
        B=constants.B,
        constants_source=constants.source,
        eta=constants.eta,
        regime=constants.regime,
        delta_omega_c_analytic=delta_c_an,
        delta_omega_s_analytic=delta_s_an,
        delta_omega_c_numerical=delta_c_num,
        delta_omega_s_numerical=delta_s_num,
        delta_lambda_c_analytic=None if delta_c_an is None else width_to_wavelength(delta_c_an, center_nm),
        delta_lambda_s_analytic=None if delta_s_an is None else width_to_wavelength(delta_s_an, center_nm),
        delta_lambda_c_numerical=width_to_wavelength(delta_c_num, center_nm),
        delta_lambda_s_numerical=width_to_wavelength(delta_s_num, center_nm),
        delta_lambda_c_convolved=convolved_c,
        delta_lambda_s_convolved=convolved_s,
        R_analytic=r_analytic,
        R_numerical=r_numerical,
        K=schmidt.K,
        K_half_density=schmidt.K_half_density,
        K_converged=schmidt.converged,
        K_method=schmidt.method,
        schmidt_eigenvalues=[float(v) for v in schmidt.eigenvalues],
        measured=measured_column,
        flags=flags,
        provenance=provenance,
    )
