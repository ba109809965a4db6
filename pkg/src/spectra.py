"""
Coincidence and single-count spectra

Slices and marginals of a sampled JSA, FWHM extraction, detector response
convolution, Gaussian fitting of measured spectra and spectrum CSV files.
"""
import logging
import math
from dataclasses import dataclass
from pathlib import Path
from typing import List, Literal, Optional, Sequence, Tuple

import numpy as np
import pandas as pd
from scipy.integrate import trapezoid
from scipy.optimize import least_squares
from scipy.signal import convolve

from src.errors import (
    AmbiguousPeakError,
    FitConvergenceError,
    IncompleteSupportError,
    IngestionError,
    NumericalError,
    SizingError,
    UnitMismatchError,
    WidthError,
)
from src.jsa import JointSpectralAmplitude, Photon
from src.models import FitResult
from src.units import SPEED_OF_LIGHT, omega_width_to_wavelength, wavelength_to_omega, wavelength_width_to_omega

logger = logging.getLogger(__name__)

Unit = Literal["rad_s", "nm"]
Kind = Literal["coincidence", "single", "measured"]

FOUR_LN2 = 4.0 * math.log(2.0)
# a second maximum this close to the global one makes the width ambiguous
PEAK_TIE_TOLERANCE = 1e-6


@dataclass(frozen=True)
class Spectrum:
    """
    Peak-normalized intensity on a strictly increasing axis. `norm` keeps the
    peak value removed by normalization so integrals can be recovered.
    Intensities stay per unit angular frequency after a change to nm.
    """
    axis: np.ndarray
    intensity: np.ndarray
    unit: Unit
    kind: Kind
    norm: float = 1.0

    @classmethod
    def normalized(cls, axis: Sequence[float], intensity: Sequence[float], unit: Unit, kind: Kind,
                   scale: float = 1.0) -> "Spectrum":
        axis = np.asarray(axis, dtype=float)
        intensity = np.clip(np.asarray(intensity, dtype=float), 0.0, None)
        if axis.ndim != 1 or axis.shape != intensity.shape:
            raise ValueError("axis and intensity must be 1-D arrays of equal length")
        if axis.size < 3 or np.any(np.diff(axis) <= 0):
            raise ValueError("spectrum axis must be strictly increasing with at least 3 points")
        peak = float(np.max(intensity))
        if not peak > 0:
            raise WidthError(f"{kind} spectrum has no positive intensity")
        return cls(axis=axis, intensity=intensity / peak, unit=unit, kind=kind, norm=peak * scale)

    @property
    def center(self) -> float:
        return float(self.axis[int(np.argmax(self.intensity))])

    @property
    def raw_integral(self) -> float:
        return float(trapezoid(self.intensity, self.axis)) * self.norm

    @property
    def step(self) -> Optional[float]:
        """Axis step when uniform, else None"""
        steps = np.diff(self.axis)
        return float(steps[0]) if np.allclose(steps, steps[0], rtol=1e-6, atol=0.0) else None


def coincidence_spectrum(jsa: JointSpectralAmplitude, nu2_fixed: float = 0.0, window: float = 0.0) -> Spectrum:
    """
    Signal spectrum heralded by an idler detected at detuning ν₂. A positive
    `window` (rad/s) integrates idler detunings across a bandpass of that
    full width instead of a single slice.
    """
    if not window >= 0:
        raise ValueError("idler window must be nonnegative")
    step = jsa.grid.step
    half = int(window / (2.0 * step))
    if half == 0:
        intensity = jsa.conditional_intensity(nu2_fixed)
    else:
        offsets = np.arange(-half, half + 1) * step
        slices = np.stack([jsa.conditional_intensity(nu2_fixed + o) for o in offsets])
        intensity = trapezoid(slices, dx=step, axis=0)
    return Spectrum.normalized(jsa.grid.nu1_axis, intensity, "rad_s", "coincidence")


def single_spectrum(jsa: JointSpectralAmplitude, photon: Photon = "signal") -> Spectrum:
    axis = jsa.grid.nu1_axis if photon == "signal" else jsa.grid.nu2_axis
    return Spectrum.normalized(axis, jsa.marginal(photon), "rad_s", "single")


def _crossing(x0: float, x1: float, y0: float, y1: float, level: float) -> float:
    return x0 + (level - y0) * (x1 - x0) / (y1 - y0)


def _all_crossings(x: np.ndarray, y: np.ndarray, level: float) -> List[float]:
    above = y >= level
    edges = np.flatnonzero(above[1:] != above[:-1])
    return [_crossing(x[k], x[k + 1], y[k], y[k + 1], level) for k in edges]


def half_maximum_crossings(axis: np.ndarray, intensity: np.ndarray) -> Tuple[float, float]:
    """
    Linearly interpolated half-maximum crossings bounding the contiguous
    region around the global maximum.
    """
    x = np.asarray(axis, dtype=float)
    y = np.asarray(intensity, dtype=float)
    peak = int(np.argmax(y))
    top = y[peak]
    if not top > 0:
        raise WidthError("no positive maximum")
    half = 0.5 * top

    below = np.flatnonzero(y < half)
    left = below[below < peak]
    right = below[below > peak]
    if left.size == 0 or right.size == 0:
        side = "low" if left.size == 0 else "high"
        raise IncompleteSupportError(
            f"intensity never drops below half maximum on the {side} side of the peak at {x[peak]:.6g}; "
            f"widen the axis span"
        )
    i, j = left[-1], right[0]

    outside = np.ones(y.size, dtype=bool)
    outside[i + 1:j] = False
    if np.any(y[outside] >= (1.0 - PEAK_TIE_TOLERANCE) * top):
        raise AmbiguousPeakError("several maxima of equal height", _all_crossings(x, y, half))

    return _crossing(x[i], x[i + 1], y[i], y[i + 1], half), _crossing(x[j - 1], x[j], y[j - 1], y[j], half)


def fwhm(spectrum: Spectrum) -> float:
    low, high = half_maximum_crossings(spectrum.axis, spectrum.intensity)
    return high - low


def width_to_wavelength(delta_omega: float, lambda_center_nm: float) -> float:
    """Δλ = λ²Δω/(2πc) in nm for Δω in rad/s"""
    if delta_omega < 0 or not lambda_center_nm > 0:
        raise ValueError("width must be nonnegative and the center wavelength positive")
    return omega_width_to_wavelength(delta_omega, lambda_center_nm)


def wavelength_to_width(delta_lambda_nm: float, lambda_center_nm: float) -> float:
    if delta_lambda_nm < 0 or not lambda_center_nm > 0:
        raise ValueError("width must be nonnegative and the center wavelength positive")
    return wavelength_width_to_omega(delta_lambda_nm, lambda_center_nm)


def to_wavelength(spectrum: Spectrum, lambda_center_nm: float) -> Spectrum:
    """Detuning axis ν → vacuum wavelength 2πc/(ω₀ + ν) with ω₀ the frequency of lambda_center_nm"""
    if spectrum.unit != "rad_s":
        raise UnitMismatchError(f"expected a detuning spectrum in rad_s, got {spectrum.unit}")
    omega = wavelength_to_omega(lambda_center_nm) + spectrum.axis
    if np.any(omega <= 0):
        raise ValueError("detuning axis reaches zero absolute frequency")
    lam_nm = 2.0 * math.pi * SPEED_OF_LIGHT / omega * 1e9
    return Spectrum(axis=lam_nm[::-1].copy(), intensity=spectrum.intensity[::-1].copy(), unit="nm",
                    kind=spectrum.kind, norm=spectrum.norm)


def crop(spectrum: Spectrum, low: float, high: float) -> Spectrum:
    keep = (spectrum.axis >= low) & (spectrum.axis <= high)
    return Spectrum.normalized(spectrum.axis[keep], spectrum.intensity[keep] * spectrum.norm,
                               spectrum.unit, spectrum.kind)


def response_kernel(resolution_fwhm: float, step: float,
                    shape: Literal["gaussian", "rectangular"] = "gaussian") -> np.ndarray:
    """Unit-sum sampled instrument response, odd length, centred"""
    if not resolution_fwhm > 0:
        raise ValueError("resolution must be positive")
    if shape == "gaussian":
        sigma = resolution_fwhm / (2.0 * math.sqrt(2.0 * math.log(2.0)))
        half = max(1, math.ceil(6.0 * sigma / step))
        x = np.arange(-half, half + 1) * step
        kernel = np.exp(-0.5 * (x / sigma) ** 2)
    elif shape == "rectangular":
        half = int(round(resolution_fwhm / (2.0 * step)))
        kernel = np.ones(2 * half + 1)
    else:
        raise ValueError(f"unknown response shape {shape!r}")
    return kernel / kernel.sum()


def convolve_response(spectrum: Spectrum, resolution_fwhm: float,
                      shape: Literal["gaussian", "rectangular"] = "gaussian") -> Spectrum:
    """
    Spectrum as seen through a detector of the given resolution (same unit
    as the axis). The result is peak-normalized again; its integral is kept.
    """
    step = spectrum.step
    if step is None:
        raise ValueError("response convolution needs a uniform axis")
    kernel = response_kernel(resolution_fwhm, step, shape)
    if kernel.size > spectrum.axis.size:
        raise SizingError(
            f"response kernel ({kernel.size} points) is wider than the spectrum axis ({spectrum.axis.size} points)",
            suggestion="widen the axis span or reduce the resolution width",
        )
    smeared = convolve(spectrum.intensity, kernel, mode="same")
    return Spectrum.normalized(spectrum.axis, smeared, spectrum.unit, spectrum.kind, scale=spectrum.norm)


def _gaussian(x: np.ndarray, amplitude: float, center: float, width: float, baseline: float) -> np.ndarray:
    return amplitude * np.exp(-FOUR_LN2 * (x - center) ** 2 / (width * width)) + baseline


def _initial_width(x: np.ndarray, y: np.ndarray) -> float:
    try:
        low, high = half_maximum_crossings(x, y - np.min(y))
        if high > low:
            return high - low
    except WidthError:
        pass
    return (x[-1] - x[0]) / 4.0


def fit_gaussian(axis: Sequence[float], intensity: Sequence[float], sigma: Optional[Sequence[float]] = None,
                 unit: str = "nm", max_nfev: Optional[int] = None) -> FitResult:
    """
    Least-squares Gaussian + baseline fit (Levenberg-Marquardt in scaled
    coordinates). Uncertainties come from the linearized covariance, scaled
    by the residual variance unless per-point `sigma` is given, in which case
    they are absolute.
    """
    x = np.asarray(axis, dtype=float)
    y = np.asarray(intensity, dtype=float)
    if x.ndim != 1 or x.shape != y.shape:
        raise ValueError("axis and intensity must be 1-D arrays of equal length")
    if x.size < 5:
        raise ValueError(f"a Gaussian fit needs at least 5 points, got {x.size}")
    if not (np.all(np.isfinite(x)) and np.all(np.isfinite(y))):
        raise ValueError("fit data must be finite")
    weights = None
    if sigma is not None:
        weights = np.asarray(sigma, dtype=float)
        if weights.shape != y.shape or not np.all(weights > 0):
            raise ValueError("sigma must be positive and match the data")
    if np.ptp(y) == 0:
        raise NumericalError("data has zero variance; a Gaussian is not identifiable")

    order = np.argsort(x)
    x, y = x[order], y[order]
    if weights is not None:
        weights = weights[order]

    peak = int(np.argmax(y))
    x0 = x[peak]
    x_scale = _initial_width(x, y)
    y_scale = float(np.max(np.abs(y)))
    xs = (x - x0) / x_scale
    ys = y / y_scale
    ws = np.ones_like(ys) if weights is None else weights / y_scale

    def residuals(p: np.ndarray) -> np.ndarray:
        return (_gaussian(xs, *p) - ys) / ws

    p0 = np.array([ys[peak] - ys.min(), 0.0, 1.0, ys.min()])
    result = least_squares(residuals, p0, method="lm", xtol=1e-12, ftol=1e-12, gtol=1e-12, max_nfev=max_nfev)

    amp, center, width, base = result.x
    best = {
        "amplitude": amp * y_scale,
        "center": x0 + center * x_scale,
        "fwhm": abs(width) * x_scale,
        "baseline": base * y_scale,
    }
    if not result.success or not best["fwhm"] > 0:
        raise FitConvergenceError(f"Gaussian fit did not converge: {result.message}", best_point=best)

    jac = result.jac
    try:
        cov = np.linalg.inv(jac.T @ jac)
    except np.linalg.LinAlgError:
        cov = np.linalg.pinv(jac.T @ jac)
    if weights is None:
        dof = max(x.size - 4, 1)
        cov = cov * (2.0 * result.cost / dof)

    model = _gaussian(x, best["amplitude"], best["center"], best["fwhm"], best["baseline"])
    logger.debug(f"Gaussian fit: {result.nfev} evaluations, status {result.status}")
    return FitResult(
        center=best["center"],
        center_sigma=x_scale * math.sqrt(max(cov[1, 1], 0.0)),
        fwhm=best["fwhm"],
        fwhm_sigma=x_scale * math.sqrt(max(cov[2, 2], 0.0)),
        amplitude=best["amplitude"],
        baseline=best["baseline"],
        residual_rms=float(np.sqrt(np.mean((model - y) ** 2))),
        n_points=int(x.size),
        converged=True,
        unit=unit,
    )


# --- CSV -----------------------------------------------------------------

@dataclass(frozen=True)
class MeasuredSpectrum:
    axis: np.ndarray
    intensity: np.ndarray
    unit: Unit
    sigma: Optional[np.ndarray] = None
    source: Optional[str] = None

    def fit(self) -> FitResult:
        return fit_gaussian(self.axis, self.intensity, self.sigma, unit=self.unit)


def read_spectrum_csv(path: Path, expected_unit: Optional[Unit] = None) -> MeasuredSpectrum:
    """
    Columns `axis_nm` or `axis_rad_s`, `intensity` and optionally `sigma`.
    Lines starting with '#' are comments (provenance notes).
    """
    path = Path(path)
    try:
        frame = pd.read_csv(path, comment="#", skipinitialspace=True)
    except FileNotFoundError as exc:
        raise IngestionError(f"{path}: file not found") from exc
    except (pd.errors.EmptyDataError, pd.errors.ParserError, UnicodeDecodeError) as exc:
        raise IngestionError(f"{path}: {exc}") from exc

    axis_columns = [c for c in frame.columns if str(c).startswith("axis_")]
    if len(axis_columns) != 1 or "intensity" not in frame.columns:
        raise IngestionError(f"{path}: need one axis_<unit> column and an intensity column, got {list(frame.columns)}")
    unit = axis_columns[0][len("axis_"):]
    if unit not in ("nm", "rad_s"):
        raise UnitMismatchError(f"{path}: unknown axis unit '{unit}'")
    if expected_unit is not None and unit != expected_unit:
        raise UnitMismatchError(f"{path}: axis is in {unit}, expected {expected_unit}")

    try:
        numeric = frame.apply(pd.to_numeric, errors="raise")
    except (ValueError, TypeError) as exc:
        raise IngestionError(f"{path}: non-numeric value ({exc})") from exc
    if numeric.isna().to_numpy().any() or not np.all(np.isfinite(numeric.to_numpy(dtype=float))):
        raise IngestionError(f"{path}: missing or non-finite values")
    if len(numeric) < 5:
        raise IngestionError(f"{path}: need at least 5 data rows, got {len(numeric)}")

    axis = numeric[axis_columns[0]].to_numpy(dtype=float)
    if np.any(np.diff(axis) <= 0):
        raise IngestionError(f"{path}: axis must be strictly increasing")
    sigma = numeric["sigma"].to_numpy(dtype=float) if "sigma" in numeric.columns else None
    if sigma is not None and np.any(sigma <= 0):
        raise IngestionError(f"{path}: sigma must be positive")
    return MeasuredSpectrum(axis=axis, intensity=numeric["intensity"].to_numpy(dtype=float), unit=unit,
                            sigma=sigma, source=str(path))


def write_spectrum_csv(spectrum: Spectrum, path: Path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    pd.DataFrame({f"axis_{spectrum.unit}": spectrum.axis, "intensity": spectrum.intensity}).to_csv(
        path, index=False, float_format="%.10g"
    )
    return path
