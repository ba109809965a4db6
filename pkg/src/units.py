"""
Physical constants and unit conversions shared by every module.

All internal arithmetic is SI (m, s, rad/s). Interfaces take nm and fs;
conversions go through this module only.
"""
import math

from scipy.constants import c as SPEED_OF_LIGHT

NM = 1e-9
UM = 1e-6
MM = 1e-3
FS = 1e-15

# Gaussian intensity-FWHM time-bandwidth product for a transform-limited pulse
TIME_BANDWIDTH = 4.0 * math.log(2.0)


def nm_to_m(value_nm: float) -> float:
    return value_nm * NM


def m_to_nm(value_m: float) -> float:
    return value_m / NM


def mm_to_m(value_mm: float) -> float:
    return value_mm * MM


def fs_to_s(value_fs: float) -> float:
    return value_fs * FS


def s_to_fs(value_s: float) -> float:
    return value_s / FS


def wavelength_to_omega(lambda_nm: float) -> float:
    """Angular frequency (rad/s) of a vacuum wavelength given in nm."""
    return 2.0 * math.pi * SPEED_OF_LIGHT / nm_to_m(lambda_nm)


def omega_to_wavelength(omega: float) -> float:
    """Vacuum wavelength (nm) of an angular frequency in rad/s."""
    return m_to_nm(2.0 * math.pi * SPEED_OF_LIGHT / omega)


def omega_width_to_wavelength(delta_omega: float, lambda_center_nm: float) -> float:
    """Linearized width conversion: Δλ = λ²·Δω/(2πc), result in nm."""
    lam = nm_to_m(lambda_center_nm)
    return m_to_nm(lam * lam * delta_omega / (2.0 * math.pi * SPEED_OF_LIGHT))


def wavelength_width_to_omega(delta_lambda_nm: float, lambda_center_nm: float) -> float:
    """Inverse of omega_width_to_wavelength."""
    lam = nm_to_m(lambda_center_nm)
    return 2.0 * math.pi * SPEED_OF_LIGHT * nm_to_m(delta_lambda_nm) / (lam * lam)


def transform_limited_bandwidth(tau_s: float) -> float:
    """Pump intensity FWHM in rad/s for a transform-limited Gaussian pulse."""
    return TIME_BANDWIDTH / tau_s
