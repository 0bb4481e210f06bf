import os
import sys
from pathlib import Path

import pytest

PROJECT_ROOT = Path(__file__).resolve().parents[1]
if str(PROJECT_ROOT) not in sys.path:
    sys.path.insert(0, str(PROJECT_ROOT))

from scarif.config import Calibration, load_calibration  # noqa: E402
from scarif.model import AcceleratorSpec, ServerConfig, Vendor  # noqa: E402


@pytest.fixture(autouse=True)
def _clean_scarif_env(monkeypatch: pytest.MonkeyPatch) -> None:
    for name in [name for name in os.environ if name.startswith("SCARIF_")]:
        monkeypatch.delenv(name)


@pytest.fixture
def paper_eq3() -> Calibration:
    return load_calibration("paper-eq3")


@pytest.fixture
def paper_r740() -> Calibration:
    return load_calibration("paper-R740")


@pytest.fixture
def r740() -> ServerConfig:
    return ServerConfig(
        cpu_core_count=56,
        hdd_gb=1000,
        memory_gb=64,
        release_year=2017,
        vendor=Vendor.DELL,
    )


@pytest.fixture
def r750() -> ServerConfig:
    return ServerConfig(
        cpu_core_count=64,
        hdd_gb=1000,
        memory_gb=64,
        release_year=2020,
        vendor=Vendor.DELL,
    )


@pytest.fixture
def v100() -> AcceleratorSpec:
    return AcceleratorSpec(name="V100", die_area_mm2=815, node_nm=12)


@pytest.fixture
def a100() -> AcceleratorSpec:
    return AcceleratorSpec(name="A100", die_area_mm2=826, node_nm=7)
