import math

import pytest
from pydantic import ValidationError

from scarif.config import Calibration
from scarif.errors import InvalidInputError, MissingCalibrationError, ModelOutOfRangeError
from scarif.model import (
    PUBLISHED_COEFFICIENTS,
    AcceleratorSpec,
    ChipCarbonTable,
    EmbodiedBreakdown,
    ServerConfig,
    Vendor,
    accelerator_part,
    chip_embodied,
    chip_level_embodied,
    cpu_part,
    embodied_server,
    embodied_system,
    k6_calibrate,
    peripheral_gap,
)

LINEAR_STEPS = [
    ("cpu_core_count", 8, "k1"),
    ("ssd_gb", 960.0, "k2"),
    ("hdd_gb", 4000.0, "k3"),
    ("memory_gb", 128.0, "k4"),
    ("release_year", 3, "k5"),
]


def test_cpu_part_anchor() -> None:
    assert cpu_part(56) == pytest.approx(280.56, abs=1e-9)


def test_cpu_part_rejects_zero_cores() -> None:
    with pytest.raises(InvalidInputError):
        cpu_part(0)


def test_k6_anchor_and_v100_part(paper_eq3: Calibration, v100: AcceleratorSpec) -> None:
    assert paper_eq3.k6 == pytest.approx(280.56 / 26.71, rel=1e-12)
    assert chip_embodied(v100, paper_eq3.chip_table) == pytest.approx(15.69, abs=1e-3)
    assert accelerator_part(v100, paper_eq3.k6, paper_eq3.chip_table) == pytest.approx(164.81, abs=0.02)


def test_k6_round_trip() -> None:
    k6 = k6_calibrate(280.56, 26.71)
    anchor = AcceleratorSpec(name="2x Xeon 8180", die_area_mm2=0, node_nm=14, chip_carbon_kg=26.71)
    table = ChipCarbonTable(entries={14: 0.0385})
    assert accelerator_part(anchor, k6, table) == pytest.approx(280.56, rel=1e-12)


@pytest.mark.parametrize("k6", [0.5, 280.56 / 26.71, 42.0])
def test_k6_round_trip_over_table_nodes(paper_eq3: Calibration, k6: float) -> None:
    table = paper_eq3.chip_table
    for node in table.entries:
        for area in (50.0, 245.0, 826.0):
            chip = AcceleratorSpec(name=f"{node} nm part", die_area_mm2=area, node_nm=node)
            part = accelerator_part(chip, k6, table)
            assert k6_calibrate(part, chip_embodied(chip, table)) == pytest.approx(k6, rel=1e-12)


def test_r740_v100_system_total(
    paper_r740: Calibration, r740: ServerConfig, v100: AcceleratorSpec
) -> None:
    breakdown = embodied_system(r740, [v100], paper_r740.coefficients, paper_r740.k6, paper_r740.chip_table)
    assert breakdown.server_total == pytest.approx(1993.72, abs=1e-6)
    assert breakdown.total == pytest.approx(2158.52, abs=0.02)
    assert [part.name for part in breakdown.accelerator_parts] == ["V100"]


def test_r750_a100_system_total(
    paper_r740: Calibration, r750: ServerConfig, a100: AcceleratorSpec
) -> None:
    breakdown = embodied_system(r750, [a100], paper_r740.coefficients, paper_r740.k6, paper_r740.chip_table)
    assert breakdown.server_total == pytest.approx(2283.04, abs=1e-6)
    assert breakdown.total == pytest.approx(2542.0, abs=0.05)


def test_r740_under_published_intercepts(r740: ServerConfig) -> None:
    assert embodied_server(r740).total == pytest.approx(293.72, abs=1e-6)


def test_breakdown_closes(paper_r740: Calibration, r740: ServerConfig, v100: AcceleratorSpec) -> None:
    breakdown = embodied_system(r740, [v100, v100], paper_r740.coefficients, paper_r740.k6, paper_r740.chip_table)
    assert breakdown.total == pytest.approx(math.fsum(breakdown.parts()), abs=1e-9)
    assert breakdown.total - breakdown.server_total == pytest.approx(2 * breakdown.accelerator_parts[0].kg)


def test_breakdown_rejects_inconsistent_total() -> None:
    with pytest.raises(ValidationError):
        EmbodiedBreakdown(
            cpu_part=1.0,
            ssd_part=0.0,
            hdd_part=0.0,
            memory_part=0.0,
            year_part=0.0,
            intercept=0.0,
            total=5.0,
        )


@pytest.mark.parametrize("feature, step, coefficient", LINEAR_STEPS)
def test_model_is_linear_in_each_feature(
    r740: ServerConfig, feature: str, step: float, coefficient: str
) -> None:
    base = embodied_server(r740, check_range=False).total
    moved = r740.model_copy(update={feature: getattr(r740, feature) + step})
    expected = getattr(PUBLISHED_COEFFICIENTS, coefficient) * step
    assert embodied_server(moved, check_range=False).total - base == pytest.approx(expected, rel=1e-9)


@pytest.mark.parametrize("feature, step", [(feature, step) for feature, step, _ in LINEAR_STEPS])
def test_model_monotone_in_each_feature(r740: ServerConfig, feature: str, step: float) -> None:
    totals = [
        embodied_server(
            r740.model_copy(update={feature: getattr(r740, feature) + i * step}), check_range=False
        ).total
        for i in range(4)
    ]
    assert totals == sorted(totals)


def test_vendor_offsets(r740: ServerConfig) -> None:
    hp = embodied_server(r740.model_copy(update={"vendor": Vendor.HP})).total
    dell = embodied_server(r740, check_range=False).total
    lenovo = embodied_server(r740.model_copy(update={"vendor": "lenovo"}), check_range=False).total
    assert hp - dell == pytest.approx(400.0)
    assert hp - lenovo == pytest.approx(900.0)


def test_negative_total_raises_with_breakdown() -> None:
    small = ServerConfig(cpu_core_count=4, memory_gb=8, release_year=2005, vendor="Lenovo")
    with pytest.raises(ModelOutOfRangeError) as excinfo:
        embodied_server(small)
    assert excinfo.value.breakdown.total < 0
    assert embodied_server(small, check_range=False).total == excinfo.value.breakdown.total


def test_server_config_validation() -> None:
    with pytest.raises(ValidationError):
        ServerConfig(cpu_core_count=8, release_year=1999)
    with pytest.raises(ValidationError):
        ServerConfig(cpu_core_count=0, release_year=2017)
    with pytest.raises(ValidationError):
        ServerConfig(cpu_core_count=8, release_year=2017, vendor="Acme")


def test_missing_node_raises(paper_eq3: Calibration) -> None:
    chip = AcceleratorSpec(name="Mystery", die_area_mm2=100, node_nm=5)
    with pytest.raises(MissingCalibrationError) as excinfo:
        chip_embodied(chip, paper_eq3.chip_table)
    assert "5 nm" in str(excinfo.value)


def test_explicit_chip_carbon_wins(paper_eq3: Calibration) -> None:
    chip = AcceleratorSpec(name="Custom", die_area_mm2=100, node_nm=5, chip_carbon_kg=3.0)
    assert chip_embodied(chip, paper_eq3.chip_table) == 3.0


def test_chip_table_rejects_non_positive() -> None:
    with pytest.raises(ValidationError):
        ChipCarbonTable(entries={7: 0.0})


def test_chip_level_upgrade_totals(paper_eq3: Calibration) -> None:
    table = paper_eq3.chip_table
    xeon_8180_pair = AcceleratorSpec(name="2x Xeon 8180", die_area_mm2=694, node_nm=14)
    xeon_8375_pair = AcceleratorSpec(name="2x Xeon 8375", die_area_mm2=660, node_nm=10)
    v100 = AcceleratorSpec(name="V100", die_area_mm2=815, node_nm=12)
    a100 = AcceleratorSpec(name="A100", die_area_mm2=826, node_nm=7)
    old = chip_level_embodied([(xeon_8180_pair, 1)], [v100], table)
    new = chip_level_embodied([(xeon_8375_pair, 1)], [a100], table)
    assert old == pytest.approx(26.71 + 15.69, abs=0.01)
    assert new == pytest.approx(70.0, abs=0.1)


def test_peripheral_gap(
    paper_r740: Calibration, r750: ServerConfig, a100: AcceleratorSpec
) -> None:
    system = embodied_system(r750, [a100], paper_r740.coefficients, paper_r740.k6, paper_r740.chip_table).total
    assert peripheral_gap(system, 70.0) == pytest.approx(36.3, abs=0.1)
    with pytest.raises(InvalidInputError):
        peripheral_gap(system, 0.0)


def test_published_coefficients_constant() -> None:
    assert PUBLISHED_COEFFICIENTS.intercept_for(Vendor.DELL) == -1500.0
    assert PUBLISHED_COEFFICIENTS.offset_for(Vendor.GENERIC) == 0.0
