"""
Command-line interface

    python -m src.cli constants --preset table1
    python -m src.cli report --preset table1 --measured-coincidence src/fixtures/coincidence_liio3_10mm.csv
    python -m src.cli spectra --preset table1 --out out/liio3-10mm --svg
    python -m src.cli sweep --preset fig1 --csv out/tau_sweep.csv
    python -m src.cli fit src/fixtures/coincidence_liio3_10mm.csv --resolution-nm 0.2
    python -m src.cli rtot --r-angle 16 --r-omega 316

Exit codes: 0 success, 2 configuration or input, 3 regime, 4 numerical,
5 ingestion.
"""
import argparse
import asyncio
import logging
import math
import sys
from functools import partial
from pathlib import Path
from typing import Callable, Dict, List, Optional, Sequence

import matplotlib
import pandas as pd
from matplotlib.figure import Figure

from src.config import AppSettings, RunConfig, apply_overrides, available_presets, build_config, load_config
from src.entanglement import (
    MeasuredInputs,
    build_report,
    predicted_spectra,
    sweep_row,
    sweep_taus,
    total_entanglement_bound,
)
from src.errors import BiphotonError, ConfigError, UndefinedRegimeError
from src.jsa import write_jsa_csv, write_jsa_matrix
from src.models import SWEEP_COLUMNS, EntanglementReport, FitResult, SweepTable
from src.result_store import ResultStore
from src.spectra import Spectrum, read_spectrum_csv, to_wavelength, write_spectrum_csv
from src.sweep_runner import SweepRunner

logger = logging.getLogger(__name__)

LOG_FORMAT = '%(asctime)s - %(name)s - %(levelname)s - %(message)s'

# fixed ids and no timestamp, so re-running writes identical SVG
matplotlib.rcParams["svg.hashsalt"] = "biphoton"
SVG_METADATA = {"Date": None, "Creator": None}


# --- configuration -------------------------------------------------------

def _run_config(args: argparse.Namespace) -> RunConfig:
    if args.config is not None:
        config = load_config(args.config)
    elif args.preset is not None:
        config = build_config({"preset": args.preset})
    else:
        raise ConfigError([f"give --config FILE or --preset NAME (presets: {', '.join(available_presets())})"])
    overrides = {"tau_fs": args.tau_fs, "lambda_nm": args.lambda_nm, "length_mm": args.length_mm}
    if any(v is not None for v in overrides.values()):
        config = apply_overrides(config, **overrides)
    return config


def _output_dir(args: argparse.Namespace, config: RunConfig) -> Path:
    return Path(args.out) if getattr(args, "out", None) else config.output.directory


def _fmt(value: Optional[float], digits: int = 4) -> str:
    if value is None:
        return ""
    return f"{value:.{digits}g}"


def _fmt_sigma(value: Optional[float], sigma: Optional[float], digits: int = 3) -> str:
    if value is None:
        return ""
    if not sigma:
        return _fmt(value, digits)
    return f"{value:.{digits}g} ± {sigma:.2g}"


def _table(headers: Sequence[str], rows: Sequence[Sequence[str]]) -> str:
    widths = [max(len(str(r[i])) for r in [headers, *rows]) for i in range(len(headers))]
    lines = ["  ".join(str(cell).ljust(w) for cell, w in zip(row, widths)).rstrip() for row in [headers, *rows]]
    lines.insert(1, "  ".join("-" * w for w in widths))
    return "\n".join(lines)


def _write_csv(rows: List[Dict[str, object]], path: Path, columns: Optional[List[str]] = None) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    pd.DataFrame(rows, columns=columns).to_csv(path, index=False, float_format="%.10g")
    logger.info(f"Wrote {path}")
    return path


def _write_svg(path: Path, x, curves: Dict[str, Sequence[float]], xlabel: str, ylabel: str,
               log_x: bool = False) -> Path:
    figure = Figure(figsize=(6.0, 4.0))
    ax = figure.add_subplot()
    for label, y in curves.items():
        ax.plot(x, y, label=label)
    if log_x:
        ax.set_xscale("log")
    ax.set_xlabel(xlabel)
    ax.set_ylabel(ylabel)
    if len(curves) > 1:
        ax.legend()
    figure.tight_layout()
    path.parent.mkdir(parents=True, exist_ok=True)
    figure.savefig(path, format="svg", metadata=SVG_METADATA)
    logger.info(f"Wrote {path}")
    return path


# --- constants -----------------------------------------------------------

def cmd_constants(args: argparse.Namespace, settings: AppSettings) -> int:
    config = _run_config(args)
    pump = config.pump_spec()
    sellmeier = config.sellmeier_constants()
    used = config.constants()

    row = {
        "crystal": config.crystal.name,
        "length_mm": used.length_mm,
        "lambda_p_nm": pump.lambda_nm,
        "tau_fs": pump.tau_fs,
        "delta_lambda_p_nm": pump.bandwidth_nm,
        "constants_source": used.source,
        "A": used.A,
        "B": used.B,
        "A_sellmeier": sellmeier.A,
        "B_sellmeier": sellmeier.B,
        "eta": used.eta,
        "regime": used.regime,
        "phase_matching_angle_deg": sellmeier.phase_matching_angle_deg,
        "vg_pump_m_s": sellmeier.vg_pump,
        "vg_ordinary_m_s": sellmeier.vg_ordinary,
        "group_index_pump": sellmeier.group_index_pump,
        "group_index_ordinary": sellmeier.group_index_ordinary,
    }
    width = max(len(k) for k in row)
    for key, value in row.items():
        text = _fmt(value, 6) if isinstance(value, float) else ("" if value is None else str(value))
        print(f"{key.ljust(width)} = {text}")
    if args.csv:
        _write_csv([row], Path(args.csv))

    if not used.A > 0:
        raise UndefinedRegimeError(f"walk-off constant A = {used.A:g} <= 0: η and the regime are undefined")
    return 0


# --- report --------------------------------------------------------------

def _measured_inputs(args: argparse.Namespace, config: RunConfig) -> Optional[MeasuredInputs]:
    coincidence_path = args.measured_coincidence or config.analysis.measured_coincidence_csv
    single_path = args.measured_single or config.analysis.measured_single_csv
    pump_width = config.analysis.measured_pump_width_nm
    if coincidence_path is None and single_path is None and pump_width is None:
        return None
    return MeasuredInputs(
        coincidence=read_spectrum_csv(coincidence_path, expected_unit="nm") if coincidence_path else None,
        single=read_spectrum_csv(single_path, expected_unit="nm") if single_path else None,
        pump_width_nm=pump_width,
    )


def format_report(report: EntanglementReport) -> str:
    """Theory and experiment side by side, one row per measured quantity"""
    m = report.measured
    coincidence = m.coincidence if m else None
    single = m.single if m else None
    headers = ["", "closed form", "numerical", "through detector", "experiment"]
    rows = [
        ["pump Δλ_p [nm]", _fmt(report.delta_lambda_p_nm), _fmt(report.delta_lambda_p_nm), "",
         _fmt(m.pump_width_nm) if m else ""],
        ["coincidence Δλ_c [nm]", _fmt(report.delta_lambda_c_analytic), _fmt(report.delta_lambda_c_numerical),
         _fmt(report.delta_lambda_c_convolved),
         _fmt_sigma(coincidence.fwhm, coincidence.fwhm_sigma) if coincidence else ""],
        ["single Δλ_s [nm]", _fmt(report.delta_lambda_s_analytic), _fmt(report.delta_lambda_s_numerical),
         _fmt(report.delta_lambda_s_convolved), _fmt_sigma(single.fwhm, single.fwhm_sigma) if single else ""],
        ["R = Δλ_s/Δλ_c", _fmt(report.R_analytic), _fmt(report.R_numerical), "",
         _fmt_sigma(m.r.value, m.r.sigma) if m and m.r else ""],
    ]
    lines = [
        f"{report.crystal}, L = {report.length_mm:g} mm, λ_p = {report.lambda_p_nm:g} nm, "
        f"τ = {report.tau_fs:g} fs, photons at {report.center_nm:g} nm",
        f"A = {report.A:.4g}, B = {report.B:.4g} ({report.constants_source}), "
        f"η = {_fmt(report.eta)} ({report.regime})",
        "",
        _table(headers, rows),
        "",
        f"K = {report.K:.4g} ({report.K_method}, half density {_fmt(report.K_half_density)}, "
        f"{'converged' if report.K_converged else 'NOT converged'})",
    ]
    if m and m.pump_to_coincidence is not None:
        lines.append(f"measured Δλ_p/Δλ_c = {m.pump_to_coincidence:.3g}")
    if m and m.single_to_pump is not None:
        lines.append(f"measured Δλ_s/Δλ_p = {m.single_to_pump:.3g}")
    for flag in report.flags:
        lines.append(f"note: {flag}")
    return "\n".join(lines)


def cmd_report(args: argparse.Namespace, settings: AppSettings) -> int:
    config = _run_config(args)
    measured = _measured_inputs(args, config)
    report = build_report(config.crystal.name, config.constants(),
                          config.report_options(settings, workers=args.workers or settings.workers), measured)
    print(format_report(report))
    if args.csv:
        _write_csv([report.flat_items()], Path(args.csv))
    return 0


# --- spectra -------------------------------------------------------------

def cmd_spectra(args: argparse.Namespace, settings: AppSettings) -> int:
    config = _run_config(args)
    out = _output_dir(args, config)
    predicted = predicted_spectra(config.constants(),
                                  config.report_options(settings, workers=args.workers or settings.workers))
    center = predicted.center_nm

    spectra = {
        "coincidence": predicted.coincidence,
        "singles": predicted.single,
        "coincidence_convolved": predicted.coincidence_convolved,
        "singles_convolved": predicted.single_convolved,
    }
    written = []
    in_nm: Dict[str, Spectrum] = {}
    for name, spectrum in spectra.items():
        if spectrum is None:
            continue
        in_nm[name] = to_wavelength(spectrum, center)
        written.append(write_spectrum_csv(in_nm[name], out / f"{name}.csv"))

    if config.output.jsa == "csv":
        written.append(write_jsa_csv(predicted.jsa, out / "jsa.csv"))
    elif config.output.jsa == "matrix":
        written.extend(write_jsa_matrix(predicted.jsa, out))

    if args.svg or config.output.svg:
        for kind in ("coincidence", "singles"):
            curves = {label: in_nm[label].intensity for label in (kind, f"{kind}_convolved") if label in in_nm}
            written.append(_write_svg(out / f"{kind}.svg", in_nm[kind].axis, curves,
                                      "wavelength [nm]", "normalized intensity"))

    for path in written:
        print(path)
    return 0


# --- sweep ---------------------------------------------------------------

def sweep_frame(table: SweepTable) -> pd.DataFrame:
    records = [row.model_dump(by_alias=True) for row in table.rows]
    return pd.DataFrame(records, columns=SWEEP_COLUMNS)


async def _run_sweep(runner: SweepRunner, taus: List[float], store: Optional[ResultStore]) -> SweepTable:
    if store is not None:
        await store.initialize()
    try:
        return await runner.run(taus)
    finally:
        if store is not None:
            await store.close()


def cmd_sweep(args: argparse.Namespace, settings: AppSettings) -> int:
    config = _run_config(args)
    s = config.sweep
    taus = sweep_taus(args.tau_min_fs or s.tau_min_fs, args.tau_max_fs or s.tau_max_fs, args.points or s.points)

    evaluate = partial(sweep_row, config.constants(), which=s.which, policy=config.schmidt_policy(),
                       k_method=s.k_method)
    store = None if args.no_cache else ResultStore(db_path=str(settings.cache_path))
    runner = SweepRunner(evaluate, store=store, fingerprint=config.sweep_fingerprint(),
                         workers=args.workers or settings.workers)
    table = asyncio.run(_run_sweep(runner, taus, store))

    frame = sweep_frame(table)
    text = frame.to_csv(index=False, float_format="%.10g")
    if args.csv:
        path = Path(args.csv)
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(text, encoding="utf-8")
        logger.info(f"Wrote {path}")
    sys.stdout.write(text)

    for row in table.rows:
        if row.error:
            logger.warning(f"tau={row.tau_fs:.4g} fs: {row.error}")

    if args.svg or config.output.svg:
        svg_path = Path(args.csv).with_suffix(".svg") if args.csv else _output_dir(args, config) / "sweep.svg"
        curves = {}
        if "R_analytic" in s.which:
            curves["R (closed form)"] = [math.nan if v is None else v for v in table.column("r_analytic")]
        if "K" in s.which:
            curves["K"] = [math.nan if v is None else v for v in table.column("k_numerical")]
        _write_svg(svg_path, table.column("tau_fs"), curves, "pulse duration τ [fs]", "entanglement", log_x=True)
    logger.info(f"Sweep stats: {runner.get_stats()}")
    return 0


# --- fit -----------------------------------------------------------------

def format_fit(fit: FitResult, resolution: Optional[float] = None) -> str:
    lines = [
        f"model        = {fit.model}",
        f"center       = {fit.center:.6g} ± {fit.center_sigma:.2g} {fit.unit}",
        f"fwhm         = {fit.fwhm:.4g} ± {fit.fwhm_sigma:.2g} {fit.unit}",
        f"amplitude    = {fit.amplitude:.4g}",
        f"baseline     = {fit.baseline:.4g}",
        f"residual_rms = {fit.residual_rms:.3g}",
        f"n_points     = {fit.n_points}",
        f"converged    = {fit.converged}",
    ]
    if resolution:
        # Gaussian response: widths add in quadrature
        if fit.fwhm > resolution:
            intrinsic = math.sqrt(fit.fwhm ** 2 - resolution ** 2)
            lines.append(f"deconvolved  = {intrinsic:.4g} {fit.unit} (resolution {resolution:g} {fit.unit})")
        else:
            lines.append(f"deconvolved  = unresolved (fwhm below resolution {resolution:g} {fit.unit})")
    return "\n".join(lines)


def cmd_fit(args: argparse.Namespace, settings: AppSettings) -> int:
    measured = read_spectrum_csv(Path(args.input))
    fit = measured.fit()
    print(format_fit(fit, args.resolution_nm if measured.unit == "nm" else None))
    if args.csv:
        _write_csv([fit.model_dump()], Path(args.csv))
    return 0


# --- rtot ----------------------------------------------------------------

def cmd_rtot(args: argparse.Namespace, settings: AppSettings) -> int:
    bound = total_entanglement_bound(args.r_angle, args.r_omega)
    print(f"R_tot <= {bound.r_tot:.6g} (upper bound: 2 x R_angle {bound.r_angle:g} x R_omega {bound.r_omega:g})")
    return 0


# --- entry point ---------------------------------------------------------

def _add_config_options(parser: argparse.ArgumentParser) -> None:
    source = parser.add_mutually_exclusive_group()
    source.add_argument("--config", type=Path, help="Run configuration TOML file")
    source.add_argument("--preset", help=f"Shipped preset ({', '.join(available_presets())})")
    parser.add_argument("--tau-fs", type=float, help="Override pump pulse duration (fs)")
    parser.add_argument("--lambda-nm", type=float, help="Override pump wavelength (nm)")
    parser.add_argument("--length-mm", type=float, help="Override crystal length (mm)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="biphoton", description="Biphoton spectral entanglement toolkit")
    parser.add_argument("--log-level", default=None, help="Logging level (default from BIPHOTON_LOG_LEVEL)")
    commands = parser.add_subparsers(dest="command", required=True)

    p = commands.add_parser("constants", help="Walk-off and dispersion constants, η, group velocities")
    _add_config_options(p)
    p.add_argument("--csv", help="Also write the constants as a one-row CSV")
    p.set_defaults(handler=cmd_constants)

    p = commands.add_parser("report", help="Theory table with optional measured column")
    _add_config_options(p)
    p.add_argument("--measured-coincidence", type=Path, help="Measured coincidence spectrum CSV (axis_nm)")
    p.add_argument("--measured-single", type=Path, help="Measured single-count spectrum CSV (axis_nm)")
    p.add_argument("--workers", type=int, help="Sampling threads")
    p.add_argument("--csv", help="Also write the report as a one-row CSV")
    p.set_defaults(handler=cmd_report)

    p = commands.add_parser("spectra", help="Coincidence and single-count spectra as CSV")
    _add_config_options(p)
    p.add_argument("--out", help="Output directory (default from the configuration)")
    p.add_argument("--svg", action="store_true", help="Also write SVG plots")
    p.add_argument("--workers", type=int, help="Sampling threads")
    p.set_defaults(handler=cmd_spectra)

    p = commands.add_parser("sweep", help="Entanglement quantifiers against pulse duration")
    _add_config_options(p)
    p.add_argument("--tau-min-fs", type=float, help="Shortest pulse (fs)")
    p.add_argument("--tau-max-fs", type=float, help="Longest pulse (fs)")
    p.add_argument("--points", type=int, help="Number of log-spaced pulse durations")
    p.add_argument("--csv", help="Write the sweep table here as well as to standard output")
    p.add_argument("--out", help="Output directory for the SVG when --csv is not given")
    p.add_argument("--svg", action="store_true", help="Also write an SVG plot")
    p.add_argument("--no-cache", action="store_true", help="Do not read or write the result cache")
    p.add_argument("--workers", type=int, help="Rows evaluated concurrently")
    p.set_defaults(handler=cmd_sweep)

    p = commands.add_parser("fit", help="Gaussian fit of a measured spectrum CSV")
    p.add_argument("input", help="CSV with axis_nm or axis_rad_s, intensity and optional sigma columns")
    p.add_argument("--resolution-nm", type=float, help="Monochromator resolution FWHM to deconvolve (nm)")
    p.add_argument("--csv", help="Also write the fit result as a one-row CSV")
    p.set_defaults(handler=cmd_fit)

    p = commands.add_parser("rtot", help="Total-entanglement upper bound 2·R_angle·R_ω")
    p.add_argument("--r-angle", type=float, required=True, help="Angular entanglement ratio")
    p.add_argument("--r-omega", type=float, required=True, help="Frequency entanglement ratio")
    p.set_defaults(handler=cmd_rtot)
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    settings = AppSettings()
    logging.basicConfig(level=(args.log_level or settings.log_level).upper(), format=LOG_FORMAT)

    handler: Callable[[argparse.Namespace, AppSettings], int] = args.handler
    try:
        return handler(args, settings)
    except ConfigError as exc:
        for problem in exc.problems:
            print(f"config error: {problem}", file=sys.stderr)
        return exc.exit_code
    except BiphotonError as exc:
        logger.error(f"{type(exc).__name__}: {exc}")
        print(f"error: {exc}", file=sys.stderr)
        return exc.exit_code
    except ValueError as exc:
        logger.error(f"Invalid input: {exc}")
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
