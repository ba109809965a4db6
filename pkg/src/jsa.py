"""
Joint spectral amplitude of the degenerate biphoton

    Ψ(ν₁, ν₂) = exp(−ν₊²τ²/(8 ln 2)) · sinc((L/2c)·(A·ν₊ − B·ν₋²/ω_p))

with ν± = ν₁ ± ν₂ the detunings from ω_p/2 and sinc(x) = sin(x)/x.

The amplitude is sampled on a uniform lattice symmetric about zero. Two
storage layouts share that lattice:

  product  rows ν₁, columns ν₂; the full square
  sheared  rows ν₁, columns the sum index ν₊ = ν₁ + ν₂, limited to the band
           where the pump envelope exceeds a cutoff. Every stored value is the
           product-layout value at the same (ν₁, ν₂) lattice point.

Sampled amplitudes are real and normalized so that Σ|Ψ|²·Δ² = 1.
"""
import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, List, Literal, Optional, Tuple, Union

import numpy as np
import pandas as pd
from pydantic import BaseModel, ConfigDict, Field
from scipy.integrate import trapezoid
from scipy.interpolate import RegularGridInterpolator

from src.errors import DomainError, IngestionError, NumericalError, SizingError, UndefinedRegimeError
from src.models import PhaseMatchConstants, PumpSpec
from src.units import SPEED_OF_LIGHT

logger = logging.getLogger(__name__)

LN2 = math.log(2.0)
# sinc²(x) = 1/2
SINC_HALF_MAX = 1.3915573
COINCIDENCE_WIDTH_FACTOR = 5.56
# Ψ is trusted for |ν| up to this fraction of ω_p
VALIDITY_FRACTION = 0.3
ROW_CHUNK = 128
INTERPOLATION_MARGIN = 8

Amplitude = Callable[[np.ndarray, np.ndarray], np.ndarray]
Photon = Literal["signal", "idler"]


def evaluate_amplitude(constants: PhaseMatchConstants, pump: PumpSpec, length_m: float,
                       nu1: Union[float, np.ndarray], nu2: Union[float, np.ndarray],
                       warn: bool = True) -> Union[float, np.ndarray]:
    """
    Ψ at detunings (ν₁, ν₂) in rad/s, unnormalized. Broadcasts over arrays.
    Exactly symmetric under exchanging ν₁ and ν₂.
    """
    nu1 = np.asarray(nu1, dtype=float)
    nu2 = np.asarray(nu2, dtype=float)
    if not (np.all(np.isfinite(nu1)) and np.all(np.isfinite(nu2))):
        raise ValueError("detunings must be finite")
    if not (math.isfinite(constants.A) and math.isfinite(constants.B)):
        raise ValueError("A and B must be finite")

    omega_p = pump.omega_p
    if warn:
        _warn_outside_validity(max(_abs_max(nu1), _abs_max(nu2)), omega_p)

    nu_sum = nu1 + nu2
    nu_diff = nu1 - nu2
    envelope = np.exp(-(nu_sum * pump.tau_s) ** 2 / (8.0 * LN2))
    phase = length_m / (2.0 * SPEED_OF_LIGHT) * (constants.A * nu_sum - constants.B * nu_diff * nu_diff / omega_p)
    value = envelope * np.sinc(phase / np.pi)
    return float(value) if value.ndim == 0 else value


def _abs_max(values: np.ndarray) -> float:
    return float(np.max(np.abs(values))) if values.size else 0.0


def _warn_outside_validity(nu_max: float, omega_p: float) -> None:
    if nu_max > VALIDITY_FRACTION * omega_p:
        logger.warning(
            f"|ν| up to {nu_max:.3e} rad/s exceeds {VALIDITY_FRACTION}·ω_p = "
            f"{VALIDITY_FRACTION * omega_p:.3e} rad/s; the expanded phase mismatch is unreliable there"
        )


def short_pulse_coincidence_width(A: float, length_m: float) -> float:
    """Δω_c = 5.56·c/(A·L), intensity FWHM in rad/s"""
    return COINCIDENCE_WIDTH_FACTOR * SPEED_OF_LIGHT / (A * length_m)


def short_pulse_single_width(A: float, B: float, omega_p: float, tau_s: float) -> float:
    """Δω_s = √(2A·ln 2·ω_p/(B·τ)), intensity FWHM in rad/s"""
    return math.sqrt(2.0 * A * LN2 * omega_p / (B * tau_s))


@dataclass(frozen=True)
class FeatureWidths:
    """Expected narrowest feature (coincidence) and widest extent (single) in rad/s"""
    coincidence: float
    single: float


def estimate_feature_widths(constants: PhaseMatchConstants, pump: PumpSpec, length_m: float) -> FeatureWidths:
    """
    Regime-aware widths used for sizing grids. The coincidence scale is the
    narrower of the phase-matching width and the pump bandwidth; the single
    scale adds the pump and phase-matching contributions along the ν₋²
    ridge, reducing to the short-pulse single width when the pump dominates.
    """
    A, B = constants.A, constants.B
    if not (A > 0 and B > 0):
        raise UndefinedRegimeError(f"grid sizing needs A > 0 and B > 0 (A={A:g}, B={B:g})")
    alpha = length_m * A / (2.0 * SPEED_OF_LIGHT)
    gamma = B / (A * pump.omega_p)
    pump_bandwidth = pump.bandwidth
    coincidence = min(short_pulse_coincidence_width(A, length_m), pump_bandwidth)
    single = math.sqrt((pump_bandwidth / 2.0 + SINC_HALF_MAX / alpha) / gamma)
    return FeatureWidths(coincidence=coincidence, single=single)


class GridPolicy(BaseModel):
    """
    How finely and how far to sample.

    step <= coincidence width / resolution_factor and
    half-span >= span_factor · single width. `axis_points` fixes the (odd)
    point count instead; doubling the number of intervals halves the step
    at the same span.
    """
    model_config = ConfigDict(extra="forbid", frozen=True)

    resolution_factor: float = Field(8.0, ge=1.0)
    span_factor: float = Field(3.0, gt=0.0)
    axis_points: Optional[int] = Field(None, ge=1)
    max_points: int = Field(60_000_000, ge=9, description="Budget on stored values")
    layout: Literal["product", "sheared"] = "sheared"
    envelope_cutoff: float = Field(1e-8, gt=0.0, lt=1.0)


# decomposition grids: the Schmidt number converges well before the spectra do
SCHMIDT_POLICY = GridPolicy(resolution_factor=4.0, span_factor=1.25)


@dataclass(frozen=True)
class FrequencyGrid:
    """
    Uniform lattice of detunings centered on zero, in rad/s.

    The constructor only checks that the lattice is well formed. It does not
    know the spectrum, so the resolution rule (step <= coincidence width /
    resolution_factor) is applied by build_grid; a grid built by hand, or
    through `symmetric`, can undersample.
    """
    step: float
    n1: int
    n2: int
    n_sum: Optional[int] = None

    def __post_init__(self):
        if not (math.isfinite(self.step) and self.step > 0):
            raise ValueError(f"grid step must be positive and finite, got {self.step}")
        for n in (self.n1, self.n2):
            if n < 3 or n % 2 == 0:
                raise ValueError(f"axis point counts must be odd and at least 3, got {n}")
        if self.n_sum is not None:
            if self.n_sum < 1 or self.n_sum % 2 == 0:
                raise ValueError(f"sum-axis count must be odd, got {self.n_sum}")
            if self.n1 != self.n2:
                raise ValueError("sheared layout needs equal axes")

    @classmethod
    def symmetric(cls, half_span: float, n: int, n_sum: Optional[int] = None) -> "FrequencyGrid":
        return cls(step=half_span / ((n - 1) // 2), n1=n, n2=n, n_sum=n_sum)

    @property
    def layout(self) -> str:
        return "product" if self.n_sum is None else "sheared"

    @staticmethod
    def _axis(n: int, step: float) -> np.ndarray:
        return (np.arange(n) - (n - 1) // 2) * step

    @property
    def nu1_axis(self) -> np.ndarray:
        return self._axis(self.n1, self.step)

    @property
    def nu2_axis(self) -> np.ndarray:
        return self._axis(self.n2, self.step)

    @property
    def sum_axis(self) -> np.ndarray:
        if self.n_sum is None:
            raise ValueError("product layout has no sum axis")
        return self._axis(self.n_sum, self.step)

    @property
    def half_span(self) -> float:
        return (self.n1 - 1) // 2 * self.step

    @property
    def shape(self) -> Tuple[int, int]:
        return (self.n1, self.n2) if self.n_sum is None else (self.n1, self.n_sum)

    @property
    def size(self) -> int:
        return self.shape[0] * self.shape[1]

    @property
    def memory_bytes(self) -> int:
        return self.size * 8


def build_grid(constants: PhaseMatchConstants, pump: PumpSpec, length_m: float,
               policy: GridPolicy = GridPolicy()) -> FrequencyGrid:
    widths = estimate_feature_widths(constants, pump, length_m)
    max_step = widths.coincidence / policy.resolution_factor
    half_span = policy.span_factor * widths.single

    if policy.axis_points is not None:
        n = policy.axis_points
        if n < 3 or n % 2 == 0:
            raise SizingError(f"axis_points must be odd and at least 3, got {n}",
                              suggestion=f"axis_points = {max(3, n | 1)}")
        step = half_span / ((n - 1) // 2)
        if step > max_step * (1.0 + 1e-12):
            needed = 2 * math.ceil(half_span / max_step) + 1
            raise SizingError(
                f"{n} points give a step of {step:.4g} rad/s, coarser than the required {max_step:.4g} rad/s",
                suggestion=f"axis_points >= {needed}",
            )
    else:
        half_intervals = math.ceil(half_span / max_step)
        step = half_span / half_intervals
        n = 2 * half_intervals + 1

    n_sum = None
    if policy.layout == "sheared":
        band = math.sqrt(8.0 * LN2 * math.log(1.0 / policy.envelope_cutoff)) / pump.tau_s
        n_sum = min(2 * math.ceil(band / step) + 1, 2 * n - 1)

    grid = FrequencyGrid(step=step, n1=n, n2=n, n_sum=n_sum)
    if grid.size > policy.max_points:
        raise SizingError(
            f"{grid.layout} grid {grid.shape[0]}x{grid.shape[1]} = {grid.size} values exceeds the "
            f"budget of {policy.max_points}",
            suggestion=_compromise(grid, policy, widths, max_step, half_span),
        )
    logger.info(
        f"Grid {grid.layout} {grid.shape[0]}x{grid.shape[1]}, step {step:.4g} rad/s, "
        f"half-span {grid.half_span:.4g} rad/s, ~{grid.memory_bytes / 2**20:.1f} MiB"
    )
    return grid


def _compromise(grid: FrequencyGrid, policy: GridPolicy, widths: FeatureWidths,
                max_step: float, half_span: float) -> str:
    if grid.n_sum is None:
        n_allowed = math.isqrt(policy.max_points)
    else:
        n_allowed = policy.max_points // grid.n_sum
    half_allowed = max((n_allowed - 1) // 2, 1)
    span_factor = half_allowed * max_step / widths.single
    resolution_factor = widths.coincidence * half_allowed / half_span
    options = [f"span_factor <= {span_factor:.3g}", f"resolution_factor <= {resolution_factor:.3g}",
               f"max_points >= {grid.size}"]
    if grid.n_sum is None:
        options.insert(0, "layout = 'sheared'")
    return " or ".join(options)


@dataclass(frozen=True)
class JointSpectralAmplitude:
    grid: FrequencyGrid
    amplitude: np.ndarray
    scale: float = 1.0

    def __post_init__(self):
        if self.amplitude.shape != self.grid.shape:
            raise ValueError(f"amplitude shape {self.amplitude.shape} does not match grid {self.grid.shape}")

    @property
    def layout(self) -> str:
        return self.grid.layout

    @property
    def norm(self) -> float:
        """Σ|Ψ|²·Δ² over the stored values"""
        return float(np.sum(self.amplitude * self.amplitude)) * self.grid.step ** 2

    def _row_offsets(self) -> np.ndarray:
        return np.arange(self.grid.n1) - (self.grid.n1 - 1) // 2

    def _nu2_indices(self) -> np.ndarray:
        """Product-layout column index of every stored sheared value"""
        g = self.grid
        rel_sum = np.arange(g.n_sum) - (g.n_sum - 1) // 2
        return (rel_sum[None, :] - self._row_offsets()[:, None]) + (g.n2 - 1) // 2

    def column(self, j: int) -> np.ndarray:
        """Ψ(ν₁, ν₂ = lattice point j) over the ν₁ axis"""
        g = self.grid
        if g.n_sum is None:
            return self.amplitude[:, j]
        m = (j - (g.n2 - 1) // 2) + self._row_offsets() + (g.n_sum - 1) // 2
        inside = (m >= 0) & (m < g.n_sum)
        out = np.zeros(g.n1)
        out[inside] = self.amplitude[np.flatnonzero(inside), m[inside]]
        return out

    def conditional_intensity(self, nu2: float) -> np.ndarray:
        """|Ψ(ν₁, ν₂)|² over ν₁ at fixed ν₂, linear between lattice columns"""
        g = self.grid
        t = nu2 / g.step + (g.n2 - 1) // 2
        if not (math.isfinite(t) and 0.0 <= t <= g.n2 - 1):
            raise DomainError(f"ν₂ = {nu2:.4g} rad/s is outside the grid span ±{g.half_span:.4g} rad/s")
        j0 = min(int(math.floor(t)), g.n2 - 2)
        w = t - j0
        lower = self.column(j0) ** 2
        if w == 0.0:
            return lower
        return (1.0 - w) * lower + w * self.column(j0 + 1) ** 2

    def marginal(self, photon: Photon = "signal") -> np.ndarray:
        """
        Single-photon intensity: |Ψ|² integrated over the partner photon by
        the trapezoidal rule, on the photon's own axis.
        """
        g = self.grid
        intensity = self.amplitude * self.amplitude
        if g.n_sum is None:
            return trapezoid(intensity, dx=g.step, axis=1 if photon == "signal" else 0)
        if photon == "signal":
            return trapezoid(intensity, dx=g.step, axis=1)
        # fixed-ν₂ lines run diagonally through the band; trapezoid end weights on its border
        weights = np.ones(g.shape)
        weights[[0, -1], :] = 0.5
        weights[:, [0, -1]] = 0.5
        j = self._nu2_indices()
        inside = (j >= 0) & (j < g.n2)
        return np.bincount(j[inside], weights=(intensity * weights)[inside], minlength=g.n2) * g.step

    def densify(self) -> np.ndarray:
        """Product-layout matrix; sheared values outside the band are zero"""
        g = self.grid
        if g.n_sum is None:
            return np.asarray(self.amplitude)
        dense = np.zeros((g.n1, g.n2))
        j = self._nu2_indices()
        inside = (j >= 0) & (j < g.n2)
        rows = np.broadcast_to(np.arange(g.n1)[:, None], g.shape)
        dense[rows[inside], j[inside]] = self.amplitude[inside]
        return dense

    def subsample(self) -> "JointSpectralAmplitude":
        """Every other lattice point (double step), keeping the origin on the lattice"""
        g = self.grid
        r0 = ((g.n1 - 1) // 2) % 2
        if g.n_sum is None:
            c0 = ((g.n2 - 1) // 2) % 2
            sub = self.amplitude[r0::2, c0::2]
            return JointSpectralAmplitude(FrequencyGrid(2.0 * g.step, sub.shape[0], sub.shape[1]), sub)
        m0 = ((g.n_sum - 1) // 2) % 2
        sub = self.amplitude[r0::2, m0::2]
        return JointSpectralAmplitude(
            FrequencyGrid(2.0 * g.step, sub.shape[0], sub.shape[0], sub.shape[1]), sub
        )

    def interpolate(self, nu1: Union[float, np.ndarray], nu2: Union[float, np.ndarray],
                    method: str = "cubic") -> np.ndarray:
        """
        Spline interpolation of the stored amplitude; zero off the grid.

        Only the block of lattice rows and columns around the requested
        points (plus INTERPOLATION_MARGIN on each side) is fitted.
        """
        g = self.grid
        nu1 = np.asarray(nu1, dtype=float)
        nu2 = np.asarray(nu2, dtype=float)
        if g.n_sum is None:
            axes, second = (g.nu1_axis, g.nu2_axis), nu2
        else:
            axes, second = (g.nu1_axis, g.sum_axis), nu1 + nu2
        first, second = np.broadcast_arrays(nu1, second)
        values = np.zeros(first.shape)
        inside = (np.abs(first) <= axes[0][-1]) & (np.abs(second) <= axes[1][-1])
        if not np.any(inside):
            return values

        window = []
        for axis, coords in ((axes[0], first[inside]), (axes[1], second[inside])):
            center = (len(axis) - 1) // 2
            lo = max(int(math.floor(coords.min() / g.step)) + center - INTERPOLATION_MARGIN, 0)
            hi = min(int(math.ceil(coords.max() / g.step)) + center + INTERPOLATION_MARGIN, len(axis) - 1)
            window.append(slice(lo, hi + 1))
        block = self.amplitude[window[0], window[1]]
        kind = method if min(block.shape) >= 4 else "linear"
        interp = RegularGridInterpolator((axes[0][window[0]], axes[1][window[1]]), block, method=kind)
        values[inside] = interp(np.stack([first[inside], second[inside]], axis=-1))
        return values


def _chunk_coordinates(grid: FrequencyGrid, start: int, stop: int) -> Tuple[np.ndarray, np.ndarray]:
    rel1 = (np.arange(start, stop) - (grid.n1 - 1) // 2)[:, None]
    if grid.n_sum is None:
        rel2 = (np.arange(grid.n2) - (grid.n2 - 1) // 2)[None, :]
    else:
        rel2 = (np.arange(grid.n_sum) - (grid.n_sum - 1) // 2)[None, :] - rel1
    return rel1 * grid.step, rel2 * grid.step


def sample_function(fn: Amplitude, grid: FrequencyGrid, workers: int = 1,
                    normalize: bool = True) -> JointSpectralAmplitude:
    """
    Sample fn(ν₁, ν₂) on the grid in row chunks (optionally on a thread
    pool; chunking never changes values) and normalize to unit Σ|Ψ|²Δ².
    """
    amplitude = np.empty(grid.shape)

    def fill(start: int) -> None:
        stop = min(start + ROW_CHUNK, grid.n1)
        nu1, nu2 = _chunk_coordinates(grid, start, stop)
        amplitude[start:stop] = fn(nu1, nu2)

    starts = range(0, grid.n1, ROW_CHUNK)
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            list(pool.map(fill, starts))
    else:
        for start in starts:
            fill(start)

    if not np.all(np.isfinite(amplitude)):
        raise NumericalError("sampled amplitude contains non-finite values")
    scale = math.sqrt(float(np.sum(amplitude * amplitude)) * grid.step ** 2)
    if scale == 0.0:
        raise NumericalError("sampled amplitude vanishes on the whole grid")
    if normalize:
        amplitude /= scale
    amplitude.setflags(write=False)
    return JointSpectralAmplitude(grid=grid, amplitude=amplitude, scale=scale if normalize else 1.0)


def sample_jsa(constants: PhaseMatchConstants, pump: PumpSpec, length_m: float, grid: FrequencyGrid,
               workers: int = 1) -> JointSpectralAmplitude:
    reach = grid.half_span if grid.n_sum is None else grid.half_span + (grid.n_sum - 1) // 2 * grid.step
    _warn_outside_validity(reach, pump.omega_p)

    def fn(nu1, nu2):
        return evaluate_amplitude(constants, pump, length_m, nu1, nu2, warn=False)

    jsa = sample_function(fn, grid, workers=workers)
    logger.debug(f"Sampled JSA {grid.shape} (scale {jsa.scale:.4g})")
    return jsa


def sample_sheared_jsa(constants: PhaseMatchConstants, pump: PumpSpec, length_m: float,
                       policy: GridPolicy = GridPolicy(), workers: int = 1) -> JointSpectralAmplitude:
    policy = policy.model_copy(update={"layout": "sheared"})
    return sample_jsa(constants, pump, length_m, build_grid(constants, pump, length_m, policy), workers)


def double_gaussian(a: float, b: float) -> Amplitude:
    """
    exp(−ν₊²/(4a²) − ν₋²/(4b²)); a = b is a product state. Its Schmidt
    number is (a² + b²)/(2ab).
    """
    if not (a > 0 and b > 0):
        raise ValueError("double-Gaussian widths must be positive")

    def amplitude(nu1, nu2):
        s = nu1 + nu2
        d = nu1 - nu2
        return np.exp(-s * s / (4.0 * a * a) - d * d / (4.0 * b * b))

    return amplitude


# --- dump / load ---------------------------------------------------------

JSA_COLUMNS = ["nu1_rad_s", "nu2_rad_s", "amplitude"]


def _stored_coordinates(jsa: JointSpectralAmplitude) -> Tuple[np.ndarray, np.ndarray]:
    nu1, nu2 = _chunk_coordinates(jsa.grid, 0, jsa.grid.n1)
    return np.broadcast_to(nu1, jsa.grid.shape), np.broadcast_to(nu2, jsa.grid.shape)


def write_jsa_csv(jsa: JointSpectralAmplitude, path: Path) -> Path:
    nu1, nu2 = _stored_coordinates(jsa)
    frame = pd.DataFrame({
        "nu1_rad_s": nu1.ravel(),
        "nu2_rad_s": nu2.ravel(),
        "amplitude": jsa.amplitude.ravel(),
    })
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    frame.to_csv(path, index=False, float_format="%.17g")
    return path


def _lattice_indices(values: np.ndarray, step: float, label: str) -> Tuple[np.ndarray, int]:
    rel = np.rint(values / step)
    if not np.allclose(rel * step, values, rtol=1e-9, atol=1e-9 * step):
        raise IngestionError(f"{label} values are not on a uniform lattice through zero")
    half = int(np.max(np.abs(rel)))
    return rel.astype(np.int64) + half, 2 * half + 1


def read_jsa_csv(path: Path) -> JointSpectralAmplitude:
    """Load a triplet dump into the product layout; lattice points absent from the file are zero"""
    path = Path(path)
    try:
        frame = pd.read_csv(path, float_precision="round_trip")
    except (FileNotFoundError, pd.errors.EmptyDataError, pd.errors.ParserError) as exc:
        raise IngestionError(f"{path}: {exc}") from exc
    missing = [c for c in JSA_COLUMNS if c not in frame.columns]
    if missing:
        raise IngestionError(f"{path}: missing columns {missing}")
    try:
        data = frame[JSA_COLUMNS].to_numpy(dtype=float)
    except ValueError as exc:
        raise IngestionError(f"{path}: non-numeric values ({exc})") from exc
    if len(data) < 9 or not np.all(np.isfinite(data)):
        raise IngestionError(f"{path}: need at least 9 finite rows")

    nu1, nu2, values = data.T
    steps = np.diff(np.unique(np.concatenate([nu1, nu2])))
    step = float(np.min(steps))
    i, n1 = _lattice_indices(nu1, step, "nu1")
    j, n2 = _lattice_indices(nu2, step, "nu2")
    amplitude = np.zeros((n1, n2))
    amplitude[i, j] = values
    return JointSpectralAmplitude(FrequencyGrid(step, n1, n2), amplitude)


def write_jsa_matrix(jsa: JointSpectralAmplitude, directory: Path, stem: str = "jsa") -> List[Path]:
    """Dense amplitude matrix plus axis sidecar files"""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    g = jsa.grid
    paths = [directory / f"{stem}_amplitude.txt", directory / f"{stem}_nu1_rad_s.txt"]
    np.savetxt(paths[0], jsa.amplitude, fmt="%.17g")
    np.savetxt(paths[1], g.nu1_axis, fmt="%.17g")
    if g.n_sum is None:
        paths.append(directory / f"{stem}_nu2_rad_s.txt")
        np.savetxt(paths[2], g.nu2_axis, fmt="%.17g")
    else:
        paths.append(directory / f"{stem}_sum_rad_s.txt")
        np.savetxt(paths[2], g.sum_axis, fmt="%.17g")
    return paths


def read_jsa_matrix(directory: Path, stem: str = "jsa") -> JointSpectralAmplitude:
    directory = Path(directory)
    try:
        amplitude = np.loadtxt(directory / f"{stem}_amplitude.txt", ndmin=2)
        nu1 = np.loadtxt(directory / f"{stem}_nu1_rad_s.txt", ndmin=1)
        sum_path = directory / f"{stem}_sum_rad_s.txt"
        sheared = sum_path.exists()
        second = np.loadtxt(sum_path if sheared else directory / f"{stem}_nu2_rad_s.txt", ndmin=1)
    except (OSError, ValueError) as exc:
        raise IngestionError(f"{directory}: cannot read JSA matrix '{stem}': {exc}") from exc

    step = float(nu1[1] - nu1[0]) if len(nu1) > 1 else 0.0
    try:
        grid = FrequencyGrid(step, len(nu1), len(nu1) if sheared else len(second),
                             len(second) if sheared else None)
    except ValueError as exc:
        raise IngestionError(f"{directory}: {exc}") from exc
    if not (np.allclose(grid.nu1_axis, nu1, rtol=0, atol=1e-9 * step) and amplitude.shape == grid.shape):
        raise IngestionError(f"{directory}: axes do not describe a symmetric uniform lattice of shape {amplitude.shape}")
    return JointSpectralAmplitude(grid, amplitude)
