"""Embodied carbon of servers and attached accelerators.

The server model is linear in five features::

    E = k1*cores + k2*ssd_gb + k3*hdd_gb + k4*memory_gb + k5*(year - 2000) + d + offset[vendor]

Accelerators are charged through a single system-to-chip ratio, k6, calibrated
on the CPU part of a reference server: the accelerator's chip-level carbon
times k6 gives its system-level share (slots, board, power delivery included).

Everything here is a pure function of its arguments.
"""

from __future__ import annotations

import logging
import math
from enum import StrEnum
from typing import Sequence

from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

from scarif.errors import (
    InvalidInputError,
    MissingCalibrationError,
    ModelOutOfRangeError,
)

logger = logging.getLogger(__name__)

BASE_YEAR = 2000
GB_PER_TB = 1000.0


class Vendor(StrEnum):
    HP = "HP"
    DELL = "Dell"
    LENOVO = "Lenovo"
    GENERIC = "Generic"

    @classmethod
    def parse(cls, value: "str | Vendor") -> "Vendor":
        if isinstance(value, Vendor):
            return value
        key = str(value).strip().lower()
        for vendor in cls:
            if vendor.value.lower() == key:
                return vendor
        raise ValueError(
            f"unknown vendor {value!r}; expected one of {', '.join(v.value for v in cls)}"
        )


class ServerConfig(BaseModel):
    """The feature vector the server model is evaluated on.

    Sizes use decimal units (1 TB = 1000 GB), as vendor spec sheets do.
    """

    model_config = ConfigDict(frozen=True)

    cpu_core_count: int = Field(
        ..., ge=1, description="Total CPU cores across all sockets."
    )
    ssd_gb: float = Field(0.0, ge=0, description="Total SSD capacity in GB.")
    hdd_gb: float = Field(0.0, ge=0, description="Total HDD capacity in GB.")
    memory_gb: float = Field(0.0, ge=0, description="Main memory size in GB.")
    release_year: int = Field(
        ...,
        ge=BASE_YEAR,
        description="Server release year; stands in for the technology node.",
    )
    vendor: Vendor = Field(
        Vendor.GENERIC, description="Vendor whose intercept offset applies."
    )
    augmented_fields: frozenset[str] = Field(
        default_factory=frozenset,
        description=(
            "Names of fields filled in by augmentation rather than reported. "
            "Provenance only; never used in computation."
        ),
    )

    @field_validator("vendor", mode="before")
    @classmethod
    def _parse_vendor(cls, value):
        return Vendor.parse(value)


class ModelCoefficients(BaseModel):
    model_config = ConfigDict(frozen=True)

    name: str = Field("custom", description="Calibration profile name.")
    k1: float = Field(..., ge=0, description="kgCO2e per CPU core.")
    k2: float = Field(..., ge=0, description="kgCO2e per GB of SSD.")
    k3: float = Field(..., ge=0, description="kgCO2e per GB of HDD.")
    k4: float = Field(..., ge=0, description="kgCO2e per GB of memory.")
    k5: float = Field(..., ge=0, description="kgCO2e per year since 2000.")
    d: float = Field(..., description="Base intercept in kgCO2e, may be negative.")
    vendor_offsets: dict[Vendor, float] = Field(
        default_factory=dict,
        description="Additive intercept per vendor; vendors not listed get 0.",
    )

    @field_validator("vendor_offsets", mode="before")
    @classmethod
    def _parse_offset_keys(cls, value):
        if value is None:
            return {}
        return {Vendor.parse(key): offset for key, offset in dict(value).items()}

    def offset_for(self, vendor: Vendor) -> float:
        return self.vendor_offsets.get(vendor, 0.0)

    def intercept_for(self, vendor: Vendor) -> float:
        return self.d + self.offset_for(vendor)


PUBLISHED_COEFFICIENTS = ModelCoefficients(
    name="paper-eq3",
    k1=5.01,
    k2=0.16,
    k3=0.04,
    k4=0.95,
    k5=83.08,
    d=-1100.0,
    vendor_offsets={Vendor.HP: 0.0, Vendor.DELL: -400.0, Vendor.LENOVO: -900.0},
)


class AcceleratorSpec(BaseModel):
    """A chip whose embodied carbon is estimated from its die area and node.

    Used for accelerators (GPU, FPGA) and, for chip-level accounting, for CPUs.
    """

    model_config = ConfigDict(frozen=True)

    name: str = Field(..., min_length=1)
    die_area_mm2: float = Field(..., ge=0, description="Die area in mm^2.")
    node_nm: int = Field(..., gt=0, description="Technology node in nm.")
    chip_carbon_kg: float | None = Field(
        None,
        ge=0,
        description="Explicit chip-level carbon; takes precedence over the chip table.",
    )


class ChipCarbonTable(BaseModel):
    model_config = ConfigDict(frozen=True)

    entries: dict[int, float] = Field(
        ..., description="Technology node (nm) -> kgCO2e per mm^2 of die."
    )

    @field_validator("entries")
    @classmethod
    def _positive_entries(cls, value: dict[int, float]) -> dict[int, float]:
        for node, per_area in value.items():
            if node <= 0:
                raise ValueError(f"technology node must be positive, got {node}")
            if not per_area > 0:
                raise ValueError(f"carbon per area for {node} nm must be > 0, got {per_area}")
        return value

    def per_area(self, node_nm: int) -> float | None:
        return self.entries.get(node_nm)


class AcceleratorPart(BaseModel):
    model_config = ConfigDict(frozen=True)

    name: str
    kg: float


class EmbodiedBreakdown(BaseModel):
    """Per-term embodied carbon; ``total`` is the sum of every other field."""

    model_config = ConfigDict(frozen=True)

    cpu_part: float
    ssd_part: float
    hdd_part: float
    memory_part: float
    year_part: float
    intercept: float
    accelerator_parts: list[AcceleratorPart] = Field(default_factory=list)
    total: float

    @model_validator(mode="after")
    def _total_closes(self) -> "EmbodiedBreakdown":
        expected = math.fsum(self.parts())
        scale = max(1.0, math.fsum(abs(p) for p in self.parts()))
        if abs(self.total - expected) > 1e-9 * scale:
            raise ValueError(
                f"total {self.total} does not equal the sum of parts {expected}"
            )
        return self

    @classmethod
    def from_parts(
        cls,
        *,
        cpu_part: float,
        ssd_part: float,
        hdd_part: float,
        memory_part: float,
        year_part: float,
        intercept: float,
        accelerator_parts: Sequence[AcceleratorPart] = (),
    ) -> "EmbodiedBreakdown":
        accelerator_parts = list(accelerator_parts)
        total = math.fsum(
            [cpu_part, ssd_part, hdd_part, memory_part, year_part, intercept]
            + [part.kg for part in accelerator_parts]
        )
        return cls(
            cpu_part=cpu_part,
            ssd_part=ssd_part,
            hdd_part=hdd_part,
            memory_part=memory_part,
            year_part=year_part,
            intercept=intercept,
            accelerator_parts=accelerator_parts,
            total=total,
        )

    def parts(self) -> list[float]:
        return [
            self.cpu_part,
            self.ssd_part,
            self.hdd_part,
            self.memory_part,
            self.year_part,
            self.intercept,
        ] + [part.kg for part in self.accelerator_parts]

    @property
    def server_total(self) -> float:
        return self.total - math.fsum(part.kg for part in self.accelerator_parts)


def cpu_part(cores: int, coeffs: ModelCoefficients = PUBLISHED_COEFFICIENTS) -> float:
    """k1 * cores under ``coeffs``."""
    if cores < 1:
        raise InvalidInputError(f"CPU core count must be >= 1, got {cores}")
    return coeffs.k1 * cores


def _server_breakdown(
    config: ServerConfig,
    coeffs: ModelCoefficients,
    accelerator_parts: Sequence[AcceleratorPart] = (),
) -> EmbodiedBreakdown:
    return EmbodiedBreakdown.from_parts(
        cpu_part=cpu_part(config.cpu_core_count, coeffs),
        ssd_part=coeffs.k2 * config.ssd_gb,
        hdd_part=coeffs.k3 * config.hdd_gb,
        memory_part=coeffs.k4 * config.memory_gb,
        year_part=coeffs.k5 * (config.release_year - BASE_YEAR),
        intercept=coeffs.intercept_for(config.vendor),
        accelerator_parts=accelerator_parts,
    )


def _check_range(breakdown: EmbodiedBreakdown) -> EmbodiedBreakdown:
    if breakdown.total < 0:
        raise ModelOutOfRangeError(breakdown)
    return breakdown


def embodied_server(
    config: ServerConfig,
    coeffs: ModelCoefficients = PUBLISHED_COEFFICIENTS,
    *,
    check_range: bool = True,
) -> EmbodiedBreakdown:
    """Evaluate the server model term by term.

    A negative total raises ``ModelOutOfRangeError`` (carrying the breakdown)
    unless ``check_range`` is false, which prediction sweeps over report data use.
    """
    breakdown = _server_breakdown(config, coeffs)
    logger.debug(
        "server %s/%d cores -> %.2f kgCO2e (%s)",
        config.vendor.value,
        config.cpu_core_count,
        breakdown.total,
        coeffs.name,
    )
    return _check_range(breakdown) if check_range else breakdown


def chip_embodied(spec: AcceleratorSpec, table: ChipCarbonTable) -> float:
    if spec.chip_carbon_kg is not None:
        return spec.chip_carbon_kg
    per_area = table.per_area(spec.node_nm)
    if per_area is None:
        raise MissingCalibrationError(spec.name, spec.node_nm, list(table.entries))
    return per_area * spec.die_area_mm2


def k6_calibrate(system_cpu_part: float, chip_cpu: float) -> float:
    """System-to-chip ratio of the CPU part, shared with accelerators."""
    if system_cpu_part <= 0 or chip_cpu <= 0:
        raise InvalidInputError(
            "k6 calibration needs positive system and chip carbon, got "
            f"{system_cpu_part} and {chip_cpu}"
        )
    return system_cpu_part / chip_cpu


def accelerator_part(spec: AcceleratorSpec, k6: float, table: ChipCarbonTable) -> float:
    if k6 <= 0:
        raise InvalidInputError(f"k6 must be > 0, got {k6}")
    return k6 * chip_embodied(spec, table)


def embodied_system(
    config: ServerConfig,
    accels: Sequence[AcceleratorSpec],
    coeffs: ModelCoefficients,
    k6: float,
    table: ChipCarbonTable,
) -> EmbodiedBreakdown:
    """Server breakdown plus one ``AcceleratorPart`` per attached accelerator."""
    parts = [
        AcceleratorPart(name=spec.name, kg=accelerator_part(spec, k6, table))
        for spec in accels
    ]
    breakdown = _server_breakdown(config, coeffs, parts)
    logger.debug(
        "system with %d accelerator(s) -> %.2f kgCO2e", len(parts), breakdown.total
    )
    return _check_range(breakdown)


def chip_level_embodied(
    cpu_chips: Sequence[tuple[AcceleratorSpec, int]],
    accels: Sequence[AcceleratorSpec],
    table: ChipCarbonTable,
) -> float:
    """Device-level carbon: chips only, no board, storage or chassis."""
    total = 0.0
    for spec, count in cpu_chips:
        if count < 0:
            raise InvalidInputError(f"chip count for {spec.name!r} must be >= 0, got {count}")
        total += count * chip_embodied(spec, table)
    for spec in accels:
        total += chip_embodied(spec, table)
    return total


def peripheral_gap(system_total: float, chip_total: float) -> float:
    if system_total <= 0 or chip_total <= 0:
        raise InvalidInputError(
            f"peripheral gap needs positive totals, got {system_total} and {chip_total}"
        )
    return system_total / chip_total
