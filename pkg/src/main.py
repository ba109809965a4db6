"""
FastAPI Biphoton Entanglement Service
"""
import asyncio
import logging
import time
from contextlib import asynccontextmanager

from fastapi import FastAPI, Request, status
from fastapi.responses import JSONResponse

from src.config import AppSettings, RunConfig, apply_overrides, build_config
from src.entanglement import build_report, total_entanglement_bound
from src.errors import BiphotonError, ConfigError
from src.models import (
    EntanglementReport,
    FitRequest,
    FitResult,
    PhaseMatchConstants,
    RtotRequest,
    RunRequest,
    TotalEntanglementBound,
)
from src.spectra import fit_gaussian

settings = AppSettings()

logging.basicConfig(
    level=settings.log_level.upper(),
    format='%(asctime)s - %(name)s - %(levelname)s - %(message)s'
)
logger = logging.getLogger(__name__)

start_time: float = 0


@asynccontextmanager
async def lifespan(app: FastAPI):
    global start_time

    logger.info("Starting Biphoton Entanglement Service...")
    start_time = time.time()
    logger.info(f"Workers per report: {settings.workers}")

    yield

    logger.info("Biphoton Entanglement Service stopped")


app = FastAPI(
    title="Biphoton Entanglement Service",
    description="Walk-off constants, spectral widths and entanglement of SPDC photon pairs",
    version="1.0.0",
    lifespan=lifespan
)


def _run_config(request: RunRequest) -> RunConfig:
    data = dict(request.config)
    if request.preset is not None:
        data["preset"] = request.preset
    config = build_config(data)
    overrides = {"tau_fs": request.tau_fs, "lambda_nm": request.lambda_nm, "length_mm": request.length_mm}
    if any(v is not None for v in overrides.values()):
        config = apply_overrides(config, **overrides)
    return config


@app.get("/")
async def root():
    """Health check endpoint"""
    return {
        "service": "Biphoton Entanglement",
        "status": "running",
        "version": "1.0.0",
        "uptime_seconds": time.time() - start_time if start_time else 0.0
    }


@app.post("/constants", response_model=PhaseMatchConstants)
async def constants(request: RunRequest):
    """
    A, B and η for the configured crystal and pump. Anchored constants are
    returned when the configuration asks for them.
    """
    return _run_config(request).constants()


@app.post("/report", response_model=EntanglementReport)
async def report(request: RunRequest):
    """
    Theory column of the entanglement report

    Sampling and decomposition run in a worker thread.
    """
    config = _run_config(request)
    options = config.report_options(settings, workers=settings.workers)
    return await asyncio.to_thread(build_report, config.crystal.name, config.constants(), options)


@app.post("/rtot", response_model=TotalEntanglementBound)
async def rtot(request: RtotRequest):
    return total_entanglement_bound(request.r_angle, request.r_omega)


@app.post("/fit", response_model=FitResult)
async def fit(request: FitRequest):
    return fit_gaussian(request.axis, request.intensity, request.sigma, unit=request.unit)


@app.exception_handler(ConfigError)
async def config_exception_handler(request: Request, exc: ConfigError):
    return JSONResponse(
        status_code=status.HTTP_422_UNPROCESSABLE_ENTITY,
        content={"detail": exc.problems, "error": type(exc).__name__}
    )


@app.exception_handler(BiphotonError)
async def domain_exception_handler(request: Request, exc: BiphotonError):
    logger.warning(f"{type(exc).__name__}: {exc}")
    return JSONResponse(
        status_code=status.HTTP_422_UNPROCESSABLE_ENTITY,
        content={"detail": str(exc), "error": type(exc).__name__}
    )


@app.exception_handler(ValueError)
async def value_exception_handler(request: Request, exc: ValueError):
    return JSONResponse(
        status_code=status.HTTP_422_UNPROCESSABLE_ENTITY,
        content={"detail": str(exc), "error": "ValueError"}
    )


@app.exception_handler(Exception)
async def global_exception_handler(request, exc):
    """Global exception handler"""
    logger.error(f"Unhandled exception: {exc}", exc_info=True)
    return JSONResponse(
        status_code=status.HTTP_500_INTERNAL_SERVER_ERROR,
        content={"detail": "Internal server error"}
    )


if __name__ == "__main__":
    import uvicorn
    uvicorn.run(
        "src.main:app",
        host="0.0.0.0",
        port=8080,
        log_level="info"
    )
