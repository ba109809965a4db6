"""
Pytest configuration and fixtures
"""
import pytest
import asyncio
import tempfile
import shutil
from pathlib import Path

from src.config import build_config
from src.crystals import liio3
from src.dispersion import CrystalSpec
from src.models import PumpSpec, SweepRow
from src.result_store import ResultStore

FIXTURE_DIR = Path(__file__).resolve().parent.parent / "src" / "fixtures"


@pytest.fixture
def temp_dir():
    """Create a temporary directory for output files"""
    path = Path(tempfile.mkdtemp())
    yield path
    # Cleanup
    shutil.rmtree(path)


@pytest.fixture
def temp_db_path(temp_dir):
    """Temporary result-cache path for testing"""
    return str(temp_dir / "test_results.db")


@pytest.fixture
async def result_store(temp_db_path):
    """Create a fresh result store for each test"""
    store = ResultStore(db_path=temp_db_path)
    await store.initialize()
    yield store
    await store.close()


@pytest.fixture
def table1_config():
    return build_config({"preset": "table1"})


@pytest.fixture
def table2_config():
    return build_config({"preset": "table2"})


@pytest.fixture
def fig1_config():
    return build_config({"preset": "fig1"})


@pytest.fixture
def liio3_10mm():
    return CrystalSpec(name="LiIO3", length_mm=10.0, model=liio3())


@pytest.fixture
def reference_pump():
    return PumpSpec(lambda_nm=397.5, tau_fs=186.0)


@pytest.fixture
def coincidence_csv():
    return FIXTURE_DIR / "coincidence_liio3_10mm.csv"


@pytest.fixture
def singles_csv():
    return FIXTURE_DIR / "singles_liio3_10mm.csv"


@pytest.fixture
def fake_row():
    """Cheap row evaluator: K = τ/10, R = τ/100"""
    def evaluate(tau_fs: float) -> SweepRow:
        return SweepRow(tau_fs=tau_fs, eta=tau_fs / 1000.0, r_analytic=tau_fs / 100.0,
                        k_numerical=tau_fs / 10.0, k_converged=True)
    return evaluate


@pytest.fixture(scope="session")
def event_loop_policy():
    """Set event loop policy for Windows compatibility"""
    if hasattr(asyncio, 'WindowsSelectorEventLoopPolicy'):
        asyncio.set_event_loop_policy(asyncio.WindowsSelectorEventLoopPolicy())
