"""
Shared fixtures: the working points used across the test modules.
"""

from pathlib import Path

import pytest

from app.core.config import get_settings
from app.quantum.bath import PseudomodeSpec
from app.quantum.liouvillian import TruncationSpec


@pytest.fixture(autouse=True)
def fresh_settings(monkeypatch):
    """Ignore a developer's .env and PSEUDOMODE_* variables."""
    monkeypatch.setenv("PSEUDOMODE_LOG_LEVEL", "INFO")
    monkeypatch.delenv("PSEUDOMODE_DENSE_EIGEN_LIMIT", raising=False)
    monkeypatch.delenv("PSEUDOMODE_DENSE_DIMENSION_LIMIT", raising=False)
    get_settings.cache_clear()
    yield
    get_settings.cache_clear()


@pytest.fixture
def lep_spec() -> PseudomodeSpec:
    """gamma = 4 alpha: the two roots coalesce."""
    return PseudomodeSpec.single(omega0=1.0, alpha=2.5, omega=1.0, gamma=10.0)


@pytest.fixture
def overdamped_spec() -> PseudomodeSpec:
    return PseudomodeSpec.single(omega0=1.0, alpha=2.4, omega=1.0, gamma=10.0)


@pytest.fixture
def underdamped_spec() -> PseudomodeSpec:
    return PseudomodeSpec.single(omega0=1.0, alpha=1.0, omega=1.0, gamma=2.0)


@pytest.fixture
def detuned_spec() -> PseudomodeSpec:
    """Off resonance, so no two combination eigenvalues coincide."""
    return PseudomodeSpec.single(omega0=1.0, alpha=0.5, omega=2.0, gamma=4.0)


@pytest.fixture
def small_trunc() -> TruncationSpec:
    return TruncationSpec(n_sys=3, n_modes=(3,))


@pytest.fixture
def write_config(tmp_path):
    """Write an INI text into tmp_path and return its path."""
    def _write(text: str, name: str = "run.ini") -> Path:
        path = tmp_path / name
        path.write_text(text, encoding="utf-8")
        return path
    return _write
