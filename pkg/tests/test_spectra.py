"""
Unit tests for spectra: widths, detector response, Gaussian fits and CSV ingestion
"""
import math

import numpy as np
import pytest

from src.errors import (
    AmbiguousPeakError,
    IncompleteSupportError,
    IngestionError,
    NumericalError,
    SizingError,
    UnitMismatchError,
)
from src.jsa import FrequencyGrid, double_gaussian, sample_function
from src.spectra import (
    Spectrum,
    coincidence_spectrum,
    convolve_response,
    crop,
    fit_gaussian,
    fwhm,
    read_spectrum_csv,
    response_kernel,
    single_spectrum,
    to_wavelength,
    wavelength_to_width,
    width_to_wavelength,
    write_spectrum_csv,
)

GAUSSIAN_FWHM = 2.0 * math.sqrt(2.0 * math.log(2.0))


def gaussian_spectrum(sigma: float = 1.0, half_span: float = 20.0, step: float = 0.01) -> Spectrum:
    x = np.arange(-round(half_span / step), round(half_span / step) + 1) * step
    return Spectrum.normalized(x, np.exp(-0.5 * (x / sigma) ** 2), "rad_s", "single")


def test_gaussian_fwhm():
    spectrum = gaussian_spectrum(sigma=1.5)
    assert fwhm(spectrum) == pytest.approx(GAUSSIAN_FWHM * 1.5, abs=0.01)


def test_sinc_squared_fwhm():
    """sinc²(u) drops to one half at u = ±1.39156"""
    x = np.linspace(-10.0, 10.0, 2001)
    spectrum = Spectrum.normalized(x, np.sinc(x / np.pi) ** 2, "rad_s", "coincidence")
    assert fwhm(spectrum) == pytest.approx(2 * 1.3915573, abs=0.01)


def test_fwhm_follows_the_axis():
    """Shifting the axis leaves the width alone; stretching it stretches the width"""
    x = np.linspace(-10.0, 10.0, 2001)
    intensity = np.sinc(x / np.pi) ** 2 * np.exp(-0.1 * x)
    base = fwhm(Spectrum.normalized(x, intensity, "rad_s", "coincidence"))
    assert fwhm(Spectrum.normalized(x + 795.0, intensity, "nm", "coincidence")) == pytest.approx(base, rel=1e-9)
    assert fwhm(Spectrum.normalized(3.7 * x, intensity, "rad_s", "coincidence")) == pytest.approx(3.7 * base,
                                                                                                rel=1e-9)


def test_normalized_spectrum_keeps_peak():
    x = np.linspace(-5, 5, 101)
    spectrum = Spectrum.normalized(x, 4.0 * np.exp(-x ** 2), "rad_s", "single")
    assert spectrum.intensity.max() == 1.0
    assert spectrum.norm == pytest.approx(4.0, rel=1e-12)
    assert spectrum.center == pytest.approx(0.0, abs=1e-12)
    assert spectrum.step == pytest.approx(0.1)
    assert spectrum.raw_integral == pytest.approx(4.0 * math.sqrt(math.pi), rel=1e-6)


def test_normalized_spectrum_rejects_bad_axis():
    with pytest.raises(ValueError):
        Spectrum.normalized([0.0, 2.0, 1.0], [0.1, 1.0, 0.1], "nm", "measured")


def test_incomplete_support():
    x = np.linspace(0.0, 3.0, 31)
    with pytest.raises(IncompleteSupportError, match="low side"):
        fwhm(Spectrum.normalized(x, np.exp(-x ** 2), "rad_s", "single"))


def test_ambiguous_peak():
    x = np.linspace(-10.0, 10.0, 2001)
    y = np.exp(-(x - 3.0) ** 2) + np.exp(-(x + 3.0) ** 2)
    with pytest.raises(AmbiguousPeakError) as exc_info:
        fwhm(Spectrum.normalized(x, y, "rad_s", "single"))
    assert len(exc_info.value.crossings) == 4


def test_spectra_from_jsa():
    """Double Gaussian with a = 1, b = 3: slice FWHM from the sum width, marginal from both"""
    jsa = sample_function(double_gaussian(1.0, 3.0), FrequencyGrid.symmetric(half_span=15.0, n=601))
    # |Ψ(ν₁, 0)|² = exp(−ν₁²(1/(2a²) + 1/(2b²)))
    slice_sigma = 1.0 / math.sqrt(1.0 + 1.0 / 9.0)
    assert fwhm(coincidence_spectrum(jsa)) == pytest.approx(GAUSSIAN_FWHM * slice_sigma, rel=2e-3)
    # marginal σ² = (a² + b²)/4
    marginal_sigma = math.sqrt(10.0) / 2.0
    assert fwhm(single_spectrum(jsa)) == pytest.approx(GAUSSIAN_FWHM * marginal_sigma, rel=2e-3)
    assert fwhm(single_spectrum(jsa, "idler")) == pytest.approx(fwhm(single_spectrum(jsa)), rel=1e-12)


def test_idler_window_broadens_coincidence():
    jsa = sample_function(double_gaussian(1.0, 3.0), FrequencyGrid.symmetric(half_span=15.0, n=601))
    narrow = fwhm(coincidence_spectrum(jsa))
    wide = fwhm(coincidence_spectrum(jsa, window=4.0))
    assert wide > narrow


def test_width_conversions_are_inverse():
    delta_omega = wavelength_to_width(0.32, 795.0)
    assert width_to_wavelength(delta_omega, 795.0) == pytest.approx(0.32, rel=1e-12)
    with pytest.raises(ValueError):
        width_to_wavelength(-1.0, 795.0)


def test_to_wavelength_axis():
    x = np.linspace(-2e12, 2e12, 401)
    spectrum = Spectrum.normalized(x, np.exp(-(x / 5e11) ** 2), "rad_s", "coincidence")
    in_nm = to_wavelength(spectrum, 795.0)
    assert in_nm.unit == "nm"
    assert np.all(np.diff(in_nm.axis) > 0)
    assert in_nm.center == pytest.approx(795.0, abs=1e-9)
    assert fwhm(in_nm) == pytest.approx(width_to_wavelength(fwhm(spectrum), 795.0), rel=1e-3)


def test_to_wavelength_rejects_nm():
    spectrum = Spectrum.normalized([794.0, 795.0, 796.0], [0.2, 1.0, 0.2], "nm", "measured")
    with pytest.raises(UnitMismatchError):
        to_wavelength(spectrum, 795.0)


def test_crop():
    cropped = crop(gaussian_spectrum(), -3.0, 3.0)
    assert cropped.axis[0] >= -3.0 and cropped.axis[-1] <= 3.0
    assert cropped.intensity.max() == 1.0


@pytest.mark.parametrize("shape", ["gaussian", "rectangular"])
def test_response_kernel_is_normalized(shape):
    kernel = response_kernel(0.5, 0.01, shape)
    assert kernel.sum() == pytest.approx(1.0, rel=1e-12)
    assert kernel.size % 2 == 1
    np.testing.assert_allclose(kernel, kernel[::-1])


def test_response_kernel_rejects_unknown_shape():
    with pytest.raises(ValueError):
        response_kernel(0.5, 0.01, "lorentzian")


def test_gaussian_widths_add_in_quadrature():
    spectrum = gaussian_spectrum(sigma=1.0)
    resolution = GAUSSIAN_FWHM * 0.75
    smeared = convolve_response(spectrum, resolution)
    assert fwhm(smeared) == pytest.approx(GAUSSIAN_FWHM * 1.25, rel=1e-3)
    assert smeared.raw_integral == pytest.approx(spectrum.raw_integral, rel=1e-6)


@pytest.mark.parametrize("shape,tolerance", [("gaussian", 1e-3), ("rectangular", 0.02)])
def test_narrow_line_takes_the_response_width(shape, tolerance):
    """A one-sample line seen through a response of width w comes out w wide"""
    x = np.arange(-2000, 2001) * 0.001
    line = Spectrum.normalized(x, (x == 0.0).astype(float), "nm", "coincidence")
    assert fwhm(convolve_response(line, 0.5, shape)) == pytest.approx(0.5, rel=tolerance)


def test_response_wider_than_axis():
    x = np.linspace(-1.0, 1.0, 11)
    spectrum = Spectrum.normalized(x, np.exp(-x ** 2), "nm", "single")
    with pytest.raises(SizingError):
        convolve_response(spectrum, 5.0)


def test_fit_recovers_noiseless_gaussian():
    x = np.linspace(790.0, 800.0, 101)
    y = 2.0 * np.exp(-4 * math.log(2) * (x - 795.3) ** 2 / 0.8 ** 2) + 0.1
    fit = fit_gaussian(x, y)
    assert fit.converged
    assert fit.fwhm == pytest.approx(0.8, rel=1e-6)
    assert fit.center == pytest.approx(795.3, abs=1e-6)
    assert fit.amplitude == pytest.approx(2.0, rel=1e-6)
    assert fit.baseline == pytest.approx(0.1, abs=1e-6)
    assert fit.residual_rms < 1e-8
    assert fit.n_points == 101


def test_fit_accepts_unsorted_axis():
    x = np.linspace(-5.0, 5.0, 41)
    y = np.exp(-4 * math.log(2) * x ** 2 / 2.0 ** 2)
    order = np.random.default_rng(3).permutation(x.size)
    fit = fit_gaussian(x[order], y[order], unit="rad_s")
    assert fit.fwhm == pytest.approx(2.0, rel=1e-6)
    assert fit.unit == "rad_s"


def test_fit_needs_five_points():
    with pytest.raises(ValueError, match="at least 5"):
        fit_gaussian([1.0, 2.0, 3.0, 4.0], [0.1, 1.0, 0.9, 0.1])


def test_fit_rejects_flat_data():
    with pytest.raises(NumericalError, match="zero variance"):
        fit_gaussian(np.arange(10.0), np.ones(10))


def test_fit_rejects_bad_sigma():
    x = np.linspace(-3, 3, 11)
    with pytest.raises(ValueError, match="sigma"):
        fit_gaussian(x, np.exp(-x ** 2), sigma=np.zeros(11))


def test_coincidence_fixture_fit(coincidence_csv):
    measured = read_spectrum_csv(coincidence_csv, expected_unit="nm")
    fit = measured.fit()
    assert fit.fwhm == pytest.approx(0.29, abs=0.01)
    assert 0.015 <= fit.fwhm_sigma <= 0.06
    assert fit.center == pytest.approx(795.0, abs=0.02)


def test_singles_fixture_fit(singles_csv):
    fit = read_spectrum_csv(singles_csv).fit()
    assert fit.fwhm == pytest.approx(101.0, abs=1.0)
    assert 0.5 < fit.fwhm_sigma < 2.0


@pytest.mark.slow
@pytest.mark.parametrize("known_sigma", [True, False])
def test_fit_uncertainty_coverage(known_sigma):
    """At 5% noise, at least 90% of fits land within 2σ of the true width, with or without per-point σ"""
    x = np.round(np.arange(794.5, 795.5 + 1e-9, 0.02), 2)
    truth = np.exp(-4 * math.log(2) * (x - 795.0) ** 2 / 0.29 ** 2)
    noise = 0.05
    trials = 200
    hits = 0
    for seed in range(trials):
        y = truth + np.random.default_rng(seed).normal(0.0, noise, x.size)
        sigma = np.full(x.size, noise) if known_sigma else None
        fit = fit_gaussian(x, y, sigma=sigma)
        if abs(fit.fwhm - 0.29) <= 2.0 * fit.fwhm_sigma:
            hits += 1
    assert hits / trials >= 0.9


def test_written_spectrum_reads_back(temp_dir):
    x = np.linspace(790.0, 800.0, 51)
    spectrum = Spectrum.normalized(x, np.exp(-4 * math.log(2) * (x - 795.0) ** 2 / 2.0 ** 2), "nm", "single")
    path = write_spectrum_csv(spectrum, temp_dir / "out" / "singles.csv")
    measured = read_spectrum_csv(path, expected_unit="nm")
    assert measured.sigma is None
    assert measured.fit().fwhm == pytest.approx(2.0, rel=1e-5)


def test_csv_empty_file(temp_dir):
    path = temp_dir / "empty.csv"
    path.write_text("", encoding="utf-8")
    with pytest.raises(IngestionError):
        read_spectrum_csv(path)


def test_csv_header_only(temp_dir):
    path = temp_dir / "header.csv"
    path.write_text("# nothing measured\naxis_nm,intensity\n", encoding="utf-8")
    with pytest.raises(IngestionError, match="at least 5"):
        read_spectrum_csv(path)


def test_csv_axis_not_increasing(temp_dir):
    path = temp_dir / "order.csv"
    path.write_text("axis_nm,intensity\n1,0.1\n2,0.5\n4,1.0\n3,0.5\n5,0.1\n", encoding="utf-8")
    with pytest.raises(IngestionError, match="strictly increasing"):
        read_spectrum_csv(path)


def test_csv_non_numeric(temp_dir):
    path = temp_dir / "text.csv"
    path.write_text("axis_nm,intensity\n1,0.1\n2,high\n3,1.0\n4,0.5\n5,0.1\n", encoding="utf-8")
    with pytest.raises(IngestionError):
        read_spectrum_csv(path)


def test_csv_unit_checks(temp_dir, coincidence_csv):
    with pytest.raises(UnitMismatchError, match="expected rad_s"):
        read_spectrum_csv(coincidence_csv, expected_unit="rad_s")
    path = temp_dir / "microns.csv"
    path.write_text("axis_um,intensity\n1,0.1\n2,0.5\n3,1.0\n4,0.5\n5,0.1\n", encoding="utf-8")
    with pytest.raises(UnitMismatchError, match="unknown axis unit"):
        read_spectrum_csv(path)


def test_csv_missing_file(temp_dir):
    with pytest.raises(IngestionError, match="not found"):
        read_spectrum_csv(temp_dir / "absent.csv")
