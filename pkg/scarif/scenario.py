"""Operational carbon and the two decision analyses built on it.

* upgrade breakeven: the new system's embodied carbon is paid at year 0 and
  recovered by its lower annual energy; the old system's embodied carbon is sunk.
* fleet comparison: candidate server designs are scaled to serve the same task
  rate and ranked by embodied plus lifetime operational carbon.

Energy model for one server over a year (8760 h)::

    P = n_dev * (u * P_dyn + (1 - u) * P_static) + P_host_static
"""

from __future__ import annotations

import logging
import math
from pathlib import Path
from typing import Literal, Sequence

from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

from scarif.config import data_path, profiles_file, read_config_file
from scarif.errors import (
    CapacityExceededError,
    InvalidInputError,
    MissingRegionError,
)
from scarif.model import (
    AcceleratorSpec,
    ChipCarbonTable,
    ModelCoefficients,
    ServerConfig,
    chip_level_embodied,
    embodied_system,
    peripheral_gap,
)

HOURS_PER_YEAR = 8760.0

logger = logging.getLogger(__name__)


class DevicePowerProfile(BaseModel):
    model_config = ConfigDict(frozen=True)

    name: str = Field(..., min_length=1)
    latency_ms: float = Field(..., gt=0, description="Latency of one task, ms.")
    dynamic_power_w: float = Field(..., ge=0, description="Power at full activity, W.")
    static_power_w: float = Field(..., ge=0, description="Idle power, W.")

    @model_validator(mode="after")
    def _dynamic_covers_static(self) -> "DevicePowerProfile":
        if self.dynamic_power_w < self.static_power_w:
            raise ValueError(
                f"{self.name}: dynamic power {self.dynamic_power_w} W is below "
                f"static power {self.static_power_w} W"
            )
        return self

    @property
    def tasks_per_second(self) -> float:
        return 1000.0 / self.latency_ms


class SystemProfile(BaseModel):
    model_config = ConfigDict(frozen=True)

    embodied_kg: float = Field(0.0, ge=0)
    accelerator: DevicePowerProfile
    host_static_power_w: float = Field(0.0, ge=0)
    utilization: float = Field(1.0, ge=0, le=1)
    accelerator_count: int = Field(1, ge=0, description="Devices drawing accelerator power.")


class CarbonIntensityTable(BaseModel):
    model_config = ConfigDict(frozen=True)

    intensities: dict[str, float] = Field(..., description="Region -> kgCO2e per kWh.")

    @field_validator("intensities")
    @classmethod
    def _positive(cls, value: dict[str, float]) -> dict[str, float]:
        normalized = {}
        for region, intensity in value.items():
            if not intensity > 0:
                raise ValueError(f"carbon intensity for {region} must be > 0, got {intensity}")
            normalized[region.strip().upper()] = float(intensity)
        return normalized

    def intensity(self, region: str) -> float:
        try:
            return self.intensities[region.strip().upper()]
        except KeyError:
            raise MissingRegionError(region, list(self.intensities)) from None

    @property
    def regions(self) -> list[str]:
        return list(self.intensities)


DEFAULT_INTENSITIES = CarbonIntensityTable(
    intensities={"AZ": 0.395, "CA": 0.234, "TX": 0.438, "NY": 0.188}
)


def load_intensity_table(path: str | Path | None = None) -> CarbonIntensityTable:
    document = read_config_file(profiles_file(path))
    return CarbonIntensityTable(intensities=document.get("carbon_intensity", {}))


BreakevenStatus = Literal["reached", "never", "beyond_horizon"]


class BreakevenCurve(BaseModel):
    """Cumulative saving of upgrading vs. keeping the old system, by elapsed year."""

    model_config = ConfigDict(frozen=True)

    region: str
    intensity: float
    new_embodied_kg: float
    annual_saving_kg: float
    points: list[tuple[float, float]]
    breakeven_years: float | None
    status: BreakevenStatus

    @model_validator(mode="after")
    def _years_increase(self) -> "BreakevenCurve":
        years = [year for year, _ in self.points]
        if any(b <= a for a, b in zip(years, years[1:])):
            raise ValueError("breakeven curve years must be strictly increasing")
        return self

    def saving_at(self, years: float) -> float:
        return -self.new_embodied_kg + self.annual_saving_kg * years

    @property
    def summary_value(self) -> float | str:
        if self.status == "reached":
            return self.breakeven_years
        if self.status == "never":
            return "never"
        return "never within horizon"


def normalize_utilization(lat_old: float, lat_new: float, util_old: float) -> float:
    """Utilization the new device needs to serve the old device's task rate."""
    if lat_old <= 0 or lat_new <= 0:
        raise InvalidInputError(f"latencies must be > 0, got {lat_old} and {lat_new}")
    if not 0 <= util_old <= 1:
        raise InvalidInputError(f"utilization must be within [0, 1], got {util_old}")
    utilization = util_old * lat_new / lat_old
    if utilization > 1:
        raise CapacityExceededError(utilization)
    return utilization


def average_power_w(profile: SystemProfile) -> float:
    device = profile.accelerator
    u = profile.utilization
    per_device = u * device.dynamic_power_w + (1 - u) * device.static_power_w
    return profile.accelerator_count * per_device + profile.host_static_power_w


def annual_energy(profile: SystemProfile) -> float:
    """kWh per year."""
    return average_power_w(profile) * HOURS_PER_YEAR / 1000.0


def operational_carbon(energy_kwh: float, region: str, table: CarbonIntensityTable) -> float:
    if energy_kwh < 0:
        raise InvalidInputError(f"energy must be >= 0, got {energy_kwh}")
    return energy_kwh * table.intensity(region)


def _year_grid(horizon_years: float, step_years: float) -> list[float]:
    count = math.floor(horizon_years / step_years + 1e-9)
    years = [i * step_years for i in range(count + 1)]
    if years[-1] < horizon_years - 1e-9:
        years.append(horizon_years)
    return years


def breakeven(
    new_embodied: float,
    old_annual_kwh: float,
    new_annual_kwh: float,
    region: str,
    table: CarbonIntensityTable,
    horizon_years: float,
    step_years: float = 0.5,
) -> BreakevenCurve:
    if new_embodied < 0:
        raise InvalidInputError(f"embodied carbon must be >= 0, got {new_embodied}")
    if horizon_years <= 0 or step_years <= 0:
        raise InvalidInputError("horizon and step must be > 0")

    intensity = table.intensity(region)
    annual_saving = (old_annual_kwh - new_annual_kwh) * intensity

    if annual_saving <= 0:
        years, status = None, "never"
    else:
        years = new_embodied / annual_saving
        status = "reached" if years <= horizon_years else "beyond_horizon"

    curve = BreakevenCurve(
        region=region.strip().upper(),
        intensity=intensity,
        new_embodied_kg=new_embodied,
        annual_saving_kg=annual_saving,
        points=[
            (t, -new_embodied + annual_saving * t)
            for t in _year_grid(horizon_years, step_years)
        ],
        breakeven_years=years,
        status=status,
    )
    logger.debug("breakeven %s: %s", curve.region, curve.summary_value)
    return curve


def breakeven_sweep(
    new_embodied: float,
    old_annual_kwh: float,
    new_annual_kwh: float,
    regions: Sequence[str],
    table: CarbonIntensityTable,
    horizon_years: float,
    step_years: float = 0.5,
) -> list[BreakevenCurve]:
    return [
        breakeven(
            new_embodied,
            old_annual_kwh,
            new_annual_kwh,
            region,
            table,
            horizon_years,
            step_years,
        )
        for region in regions
    ]


def per_core_profile(cpu_profile: DevicePowerProfile, cores_per_cpu: int) -> DevicePowerProfile:
    """Spread a whole-CPU power reading over its cores.

    CPU latency is measured on a single core while power is measured with every
    core busy, so one core is the unit that serves tasks.
    """
    if cores_per_cpu < 1:
        raise InvalidInputError(f"cores per CPU must be >= 1, got {cores_per_cpu}")
    return DevicePowerProfile(
        name=f"{cpu_profile.name} (per core)",
        latency_ms=cpu_profile.latency_ms,
        dynamic_power_w=cpu_profile.dynamic_power_w / cores_per_cpu,
        static_power_w=cpu_profile.static_power_w / cores_per_cpu,
    )


class SystemDefinition(BaseModel):
    """A server build as described in scenario files."""

    model_config = ConfigDict(frozen=True)

    name: str = Field(..., min_length=1)
    server: ServerConfig
    accelerators: list[AcceleratorSpec] = Field(
        default_factory=list, description="Accelerator chips attached to the server."
    )
    device: DevicePowerProfile = Field(
        ..., description="The device that serves tasks (an accelerator or a CPU)."
    )
    device_cores: int | None = Field(
        None,
        ge=1,
        description=(
            "Set for CPU devices: cores the device power was measured on. "
            "The device is then normalized to one core."
        ),
    )
    units: int | None = Field(
        None,
        ge=0,
        description="Devices serving tasks per server; defaults to the accelerator count (or 1).",
    )
    host_static_power_w: float = Field(0.0, ge=0)
    utilization: float | None = Field(None, ge=0, le=1)
    embodied_kg: float | None = Field(
        None, ge=0, description="Override for the modeled embodied carbon."
    )
    cpu_chip: AcceleratorSpec | None = Field(
        None, description="CPU chip, needed only for chip-level accounting."
    )
    cpu_count: int = Field(1, ge=0)

    @property
    def serving_device(self) -> DevicePowerProfile:
        if self.device_cores is None:
            return self.device
        return per_core_profile(self.device, self.device_cores)

    @property
    def unit_count(self) -> int:
        if self.units is not None:
            return self.units
        return max(len(self.accelerators), 1)

    def system_profile(self, embodied_kg: float, utilization: float) -> SystemProfile:
        return SystemProfile(
            embodied_kg=embodied_kg,
            accelerator=self.serving_device,
            host_static_power_w=self.host_static_power_w,
            utilization=utilization,
            accelerator_count=self.unit_count,
        )

    def embodied(
        self,
        coeffs: ModelCoefficients,
        k6: float,
        chip_table: ChipCarbonTable,
    ) -> float:
        if self.embodied_kg is not None:
            return self.embodied_kg
        return embodied_system(self.server, self.accelerators, coeffs, k6, chip_table).total

    def chip_embodied(self, chip_table: ChipCarbonTable) -> float:
        if self.cpu_chip is None:
            raise InvalidInputError(
                f"{self.name}: chip-level accounting needs a cpu_chip entry"
            )
        return chip_level_embodied(
            [(self.cpu_chip, self.cpu_count)], self.accelerators, chip_table
        )


class UpgradeScenario(BaseModel):
    model_config = ConfigDict(frozen=True)

    profile: str | None = None
    regions: list[str] = Field(default_factory=lambda: ["AZ", "CA", "TX", "NY"], min_length=1)
    horizon_years: float = Field(12.0, gt=0)
    step_years: float = Field(0.5, gt=0)
    old: SystemDefinition
    new: SystemDefinition


class UpgradeReport(BaseModel):
    model_config = ConfigDict(frozen=True)

    basis: Literal["system", "chip"]
    old_utilization: float
    new_utilization: float
    old_annual_kwh: float
    new_annual_kwh: float
    old_embodied_kg: float
    new_embodied_kg: float
    new_peripheral_gap: float | None = Field(
        None, description="System over chip-level carbon of the new system (chip basis only)."
    )
    curves: list[BreakevenCurve]


def upgrade_analysis(
    scenario: UpgradeScenario,
    *,
    coeffs: ModelCoefficients,
    k6: float,
    chip_table: ChipCarbonTable,
    intensities: CarbonIntensityTable,
    basis: Literal["system", "chip"] = "system",
) -> UpgradeReport:
    """Breakeven of replacing ``scenario.old`` with ``scenario.new`` under the same workload."""
    old, new = scenario.old, scenario.new
    old_util = 1.0 if old.utilization is None else old.utilization
    if new.utilization is not None:
        new_util = new.utilization
    elif old.unit_count == new.unit_count:
        new_util = normalize_utilization(
            old.serving_device.latency_ms, new.serving_device.latency_ms, old_util
        )
    else:
        # same tasks per second, spread over each system's serving units
        old_rate = old.unit_count * old.serving_device.tasks_per_second * old_util
        new_capacity = new.unit_count * new.serving_device.tasks_per_second
        if new_capacity <= 0:
            raise InvalidInputError(f"{new.name} cannot serve any tasks")
        new_util = old_rate / new_capacity
        if new_util > 1:
            raise CapacityExceededError(new_util)

    gap = None
    if basis == "chip":
        old_embodied = old.chip_embodied(chip_table)
        new_embodied = new.chip_embodied(chip_table)
        gap = peripheral_gap(new.embodied(coeffs, k6, chip_table), new_embodied)
    else:
        old_embodied = old.embodied(coeffs, k6, chip_table)
        new_embodied = new.embodied(coeffs, k6, chip_table)

    old_kwh = annual_energy(old.system_profile(old_embodied, old_util))
    new_kwh = annual_energy(new.system_profile(new_embodied, new_util))
    logger.info(
        "upgrade %s -> %s: %.1f -> %.1f kWh/yr, new embodied %.2f kg (%s basis)",
        old.name,
        new.name,
        old_kwh,
        new_kwh,
        new_embodied,
        basis,
    )
    curves = breakeven_sweep(
        new_embodied,
        old_kwh,
        new_kwh,
        scenario.regions,
        intensities,
        scenario.horizon_years,
        scenario.step_years,
    )
    return UpgradeReport(
        basis=basis,
        old_utilization=old_util,
        new_utilization=new_util,
        old_annual_kwh=old_kwh,
        new_annual_kwh=new_kwh,
        old_embodied_kg=old_embodied,
        new_embodied_kg=new_embodied,
        new_peripheral_gap=gap,
        curves=curves,
    )


class FleetResult(BaseModel):
    model_config = ConfigDict(frozen=True)

    name: str
    servers_needed: float
    tasks_per_second_per_server: float
    embodied_kg_per_server: float
    annual_kwh_per_server: float
    operational_kg_per_server: float
    total_kg: float


class FleetScenario(BaseModel):
    model_config = ConfigDict(frozen=True)

    profile: str | None = None
    workload: str = Field("inference", description="What one task is.")
    workload_tasks_per_s: float = Field(..., gt=0)
    region: str = "TX"
    lifetime_years: float = Field(4.0, gt=0)
    integer_servers: bool = False
    candidates: list[SystemDefinition] = Field(..., min_length=1)


def fleet_compare(
    workload_tasks_per_s: float,
    candidates: Sequence[SystemDefinition],
    region: str,
    lifetime_years: float,
    *,
    coeffs: ModelCoefficients,
    k6: float,
    chip_table: ChipCarbonTable,
    intensities: CarbonIntensityTable,
    integer_servers: bool = False,
) -> list[FleetResult]:
    """Rank candidates by total carbon for serving the workload, lowest first.

    Every device runs at full utilization and server counts are fractional
    unless ``integer_servers`` is set. Ties keep input order.
    """
    if workload_tasks_per_s <= 0:
        raise InvalidInputError(f"workload must be > 0 tasks/s, got {workload_tasks_per_s}")
    if lifetime_years <= 0:
        raise InvalidInputError(f"lifetime must be > 0 years, got {lifetime_years}")

    results = []
    for candidate in candidates:
        throughput = candidate.unit_count * candidate.serving_device.tasks_per_second
        if throughput <= 0:
            raise InvalidInputError(f"candidate {candidate.name!r} serves no tasks")
        servers = workload_tasks_per_s / throughput
        if integer_servers:
            servers = float(math.ceil(servers))
        embodied = candidate.embodied(coeffs, k6, chip_table)
        energy = annual_energy(candidate.system_profile(embodied, 1.0))
        operational = operational_carbon(energy, region, intensities) * lifetime_years
        results.append(
            FleetResult(
                name=candidate.name,
                servers_needed=servers,
                tasks_per_second_per_server=throughput,
                embodied_kg_per_server=embodied,
                annual_kwh_per_server=energy,
                operational_kg_per_server=operational,
                total_kg=servers * (embodied + operational),
            )
        )
    ranked = sorted(results, key=lambda result: result.total_kg)
    for result in ranked:
        logger.debug("%s: %.1f servers, %.1f kgCO2e", result.name, result.servers_needed, result.total_kg)
    return ranked


def load_upgrade_scenario(path: str | Path) -> UpgradeScenario:
    return UpgradeScenario.model_validate(read_config_file(Path(path)))


def load_fleet_scenario(path: str | Path) -> FleetScenario:
    return FleetScenario.model_validate(read_config_file(Path(path)))


def shipped_scenario(name: str) -> Path:
    return data_path(f"scenarios/{name}.toml")
