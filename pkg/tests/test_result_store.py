"""
Unit tests for ResultStore
"""
import pytest

from src.models import SweepRow
from src.result_store import ResultStore, tau_key

FINGERPRINT = "a" * 64


def make_row(tau_fs: float, k: float = 42.0) -> SweepRow:
    return SweepRow(tau_fs=tau_fs, eta=0.1, r_analytic=40.0, k_numerical=k, k_converged=True)


@pytest.mark.asyncio
async def test_result_store_initialization(result_store):
    """Test that result store initializes correctly"""
    assert result_store is not None
    assert result_store.db is not None


@pytest.mark.asyncio
async def test_get_row_missing(result_store):
    """Test that an unknown (fingerprint, tau) is not found"""
    row = await result_store.get_row(FINGERPRINT, 186.0)
    assert row is None


@pytest.mark.asyncio
async def test_save_and_get_row(result_store):
    """Test storing a row and reading it back"""
    result = await result_store.save_row(FINGERPRINT, make_row(186.0))
    assert result is True

    row = await result_store.get_row(FINGERPRINT, 186.0)
    assert row == make_row(186.0)


@pytest.mark.asyncio
async def test_save_row_twice(result_store):
    """Test that a second row for the same key is rejected and the first kept"""
    result1 = await result_store.save_row(FINGERPRINT, make_row(186.0, k=42.0))
    assert result1 is True

    result2 = await result_store.save_row(FINGERPRINT, make_row(186.0, k=99.0))
    assert result2 is False

    row = await result_store.get_row(FINGERPRINT, 186.0)
    assert row.k_numerical == 42.0


@pytest.mark.asyncio
async def test_same_tau_different_fingerprints(result_store):
    """Test that the same tau under different configurations are separate rows"""
    result1 = await result_store.save_row(FINGERPRINT, make_row(186.0))
    result2 = await result_store.save_row("b" * 64, make_row(186.0))
    assert result1 is True
    assert result2 is True


@pytest.mark.asyncio
async def test_tau_key_is_exact(result_store):
    """Test that nearby but different taus do not collide"""
    await result_store.save_row(FINGERPRINT, make_row(0.1 + 0.2))
    assert await result_store.get_row(FINGERPRINT, 0.3) is None
    assert await result_store.get_row(FINGERPRINT, 0.1 + 0.2) is not None
    assert tau_key(186) == tau_key(186.0)


@pytest.mark.asyncio
async def test_row_with_empty_fields(result_store):
    """Test that empty R and K survive the round trip as None"""
    await result_store.save_row(FINGERPRINT, SweepRow(tau_fs=5000.0, eta=1.7))
    row = await result_store.get_row(FINGERPRINT, 5000.0)
    assert row.r_analytic is None
    assert row.k_numerical is None


@pytest.mark.asyncio
async def test_fingerprints(result_store):
    """Test listing stored configurations"""
    await result_store.save_row("b" * 64, make_row(50.0))
    await result_store.save_row(FINGERPRINT, make_row(50.0))
    await result_store.save_row(FINGERPRINT, make_row(100.0))

    fingerprints = await result_store.fingerprints()
    assert fingerprints == [FINGERPRINT, "b" * 64]


@pytest.mark.asyncio
async def test_count_rows(result_store):
    """Test counting stored rows"""
    await result_store.save_row(FINGERPRINT, make_row(50.0))
    await result_store.save_row(FINGERPRINT, make_row(100.0))
    await result_store.save_row("b" * 64, make_row(50.0))

    assert await result_store.count_rows() == 3
    assert await result_store.count_rows(fingerprint=FINGERPRINT) == 2
    assert await result_store.count_rows(fingerprint="b" * 64) == 1


@pytest.mark.asyncio
async def test_uninitialized_store(temp_db_path):
    """Test that using a store before initialize() fails loudly"""
    store = ResultStore(db_path=temp_db_path)
    with pytest.raises(RuntimeError):
        await store.get_row(FINGERPRINT, 186.0)


@pytest.mark.asyncio
async def test_persistence_across_instances(temp_db_path):
    """Test that stored rows survive a restart"""
    store1 = ResultStore(db_path=temp_db_path)
    await store1.initialize()
    await store1.save_row(FINGERPRINT, make_row(186.0))
    await store1.close()

    store2 = ResultStore(db_path=temp_db_path)
    await store2.initialize()
    row = await store2.get_row(FINGERPRINT, 186.0)
    assert row is not None
    assert row.k_numerical == 42.0

    count = await store2.count_rows()
    assert count == 1
    await store2.close()
