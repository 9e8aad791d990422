import pytest

from spectral_lab.config import get_settings


@pytest.fixture
def dense_budget(monkeypatch):
    """Set SPECTRAL_LAB_MAX_DENSE_DIM for one test."""
    def set_budget(dim: int) -> None:
        monkeypatch.setenv("SPECTRAL_LAB_MAX_DENSE_DIM", str(dim))
        get_settings.cache_clear()

    yield set_budget
    get_settings.cache_clear()


@pytest.fixture
def output_root(tmp_path, monkeypatch):
    """Point the default output root at a temporary directory."""
    root = tmp_path / "results"
    monkeypatch.setenv("SPECTRAL_LAB_OUTPUT_ROOT", str(root))
    get_settings.cache_clear()
    yield root
    get_settings.cache_clear()
