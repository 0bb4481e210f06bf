"""Vendor carbon-report records, embedded fixtures and the augmentation rules
that turn incomplete report rows into model inputs."""

from __future__ import annotations

import logging
from pathlib import Path
from typing import Iterable, Mapping

import pandas as pd
from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator, model_validator

from scarif.config import data_path, load_spec_sheets, normalize_server_name
from scarif.errors import (
    AugmentationError,
    InvalidInputError,
    ReportParseError,
    ReportValidationError,
)
from scarif.model import ServerConfig, Vendor

logger = logging.getLogger(__name__)

REPORT_COLUMNS = [
    "vendor",
    "server_name",
    "release_year",
    "cpu_count",
    "cpu_cores",
    "memory_gb",
    "ssd_gb",
    "hdd_gb",
    "embodied_kg",
    "sigma_kg",
]
DELL_FIXTURE_COLUMNS = ["index", "reported_kg", "halfwidth_kg", "predicted_kg"]
BREAKDOWN_COLUMNS = [
    "server_name",
    "total_embodied",
    "hdd",
    "ssd",
    "mainboard",
    "daughterboard",
    "others",
]
LIFECYCLE_PHASES = ("manufacturing", "transportation", "use", "eol")
PHASE_COLUMNS = ["server_name", *LIFECYCLE_PHASES]

# Dell error bars are drawn at 0.4 sigma
HALFWIDTH_SIGMA_FRACTION = 0.4
DELL_FIXTURE_ROWS = 37
BREAKDOWN_SLACK = 1.01


class VendorReportRecord(BaseModel):
    """One row of a vendor product carbon report. Missing cells stay ``None``."""

    model_config = ConfigDict(frozen=True)

    vendor: Vendor
    server_name: str = Field(..., min_length=1)
    release_year: int = Field(..., ge=2000)
    cpu_count: int | None = Field(None, ge=1)
    cpu_core_count: int | None = Field(None, ge=1)
    memory_gb: float | None = Field(None, ge=0)
    ssd_gb: float | None = Field(None, ge=0)
    hdd_gb: float | None = Field(None, ge=0)
    reported_embodied_kg: float = Field(..., gt=0)
    reported_sigma_kg: float | None = Field(None, ge=0)
    phase_breakdown: dict[str, float] | None = Field(
        None, description="Lifecycle phase -> kgCO2e, when the report gives one."
    )

    @field_validator("vendor", mode="before")
    @classmethod
    def _parse_vendor(cls, value):
        return Vendor.parse(value)

    @field_validator("phase_breakdown")
    @classmethod
    def _phases_within_total(cls, value: dict[str, float] | None) -> dict[str, float] | None:
        if value is None:
            return None
        unknown = sorted(set(value) - set(LIFECYCLE_PHASES))
        if unknown:
            raise ValueError(f"unknown lifecycle phase(s): {', '.join(unknown)}")
        if any(kg < 0 for kg in value.values()):
            raise ValueError("phase carbon must be >= 0")
        total = sum(value.values())
        if any(kg > total for kg in value.values()):
            raise ValueError("a phase exceeds the total lifecycle carbon")
        return value


class DellFixtureRow(BaseModel):
    model_config = ConfigDict(frozen=True)

    index: int = Field(..., ge=1, le=DELL_FIXTURE_ROWS)
    reported_kg: float = Field(..., gt=0)
    halfwidth_kg: float = Field(..., gt=0)
    predicted_kg: float = Field(..., gt=0)

    @model_validator(mode="after")
    def _halfwidth_below_reported(self) -> "DellFixtureRow":
        if self.halfwidth_kg >= self.reported_kg:
            raise ValueError(f"row {self.index}: error bar exceeds the reported value")
        return self

    @property
    def sigma_kg(self) -> float:
        return self.halfwidth_kg / HALFWIDTH_SIGMA_FRACTION


class BreakdownFixtureRow(BaseModel):
    model_config = ConfigDict(frozen=True)

    server_name: str
    total_embodied: float | None = None
    hdd: float | None = None
    ssd: float | None = None
    mainboard: float | None = None
    daughterboard: float | None = None
    others: float | None = None

    @model_validator(mode="after")
    def _parts_fit_total(self) -> "BreakdownFixtureRow":
        parts = self.parts()
        if self.total_embodied is not None and all(p is not None for p in parts):
            if sum(parts) > self.total_embodied * BREAKDOWN_SLACK:
                raise ValueError(
                    f"{self.server_name}: parts sum to {sum(parts)}, above total {self.total_embodied}"
                )
        return self

    def parts(self) -> list[float | None]:
        return [self.hdd, self.ssd, self.mainboard, self.daughterboard, self.others]


class AugmentationDefaults(BaseModel):
    """Values assumed for sizes a report leaves out."""

    model_config = ConfigDict(frozen=True)

    memory_gb: float = Field(64.0, ge=0, description="Lenovo reports omit memory size.")
    ssd_gb: float = Field(0.0, ge=0)
    hdd_gb: float = Field(0.0, ge=0)


def _read_frame(path: Path, columns: list[str]) -> pd.DataFrame:
    if not path.is_file():
        raise FileNotFoundError(f"report file not found: {path}")
    try:
        frame = pd.read_csv(path, dtype=str, keep_default_na=False, skipinitialspace=True)
    except pd.errors.EmptyDataError:
        raise ReportParseError(f"{path} is empty; expected a header row") from None
    except pd.errors.ParserError as exc:
        raise ReportParseError(f"{path}: {exc}") from None
    header = [str(name).strip() for name in frame.columns]
    if header != columns:
        raise ReportParseError(
            f"{path}: header must be exactly {','.join(columns)}; got {','.join(header)}"
        )
    frame.columns = header
    return frame


def _cell(raw, row: int, column: str) -> str | None:
    if not isinstance(raw, str):
        raise ReportParseError("row has too few fields", row=row, column=column)
    raw = raw.strip()
    return raw or None


def _parse_int(raw, row: int, column: str) -> int | None:
    value = _cell(raw, row, column)
    if value is None:
        return None
    try:
        return int(value)
    except ValueError:
        raise ReportParseError(f"expected an integer, got {value!r}", row=row, column=column) from None


def _parse_float(raw, row: int, column: str) -> float | None:
    value = _cell(raw, row, column)
    if value is None:
        return None
    try:
        return float(value)
    except ValueError:
        raise ReportParseError(f"expected a number, got {value!r}", row=row, column=column) from None


def _required(value, row: int, column: str):
    if value is None:
        raise ReportParseError("required cell is empty", row=row, column=column)
    return value


def _parse_report_row(values: Mapping[str, object], row: int) -> VendorReportRecord:
    vendor_raw = _required(_cell(values["vendor"], row, "vendor"), row, "vendor")
    try:
        vendor = Vendor.parse(vendor_raw)
    except ValueError as exc:
        raise ReportParseError(str(exc), row=row, column="vendor") from None
    fields = dict(
        vendor=vendor,
        server_name=_required(_cell(values["server_name"], row, "server_name"), row, "server_name"),
        release_year=_required(_parse_int(values["release_year"], row, "release_year"), row, "release_year"),
        cpu_count=_parse_int(values["cpu_count"], row, "cpu_count"),
        cpu_core_count=_parse_int(values["cpu_cores"], row, "cpu_cores"),
        memory_gb=_parse_float(values["memory_gb"], row, "memory_gb"),
        ssd_gb=_parse_float(values["ssd_gb"], row, "ssd_gb"),
        hdd_gb=_parse_float(values["hdd_gb"], row, "hdd_gb"),
        reported_embodied_kg=_required(_parse_float(values["embodied_kg"], row, "embodied_kg"), row, "embodied_kg"),
        reported_sigma_kg=_parse_float(values["sigma_kg"], row, "sigma_kg"),
    )
    try:
        return VendorReportRecord(**fields)
    except ValidationError as exc:
        problems = "; ".join(
            f"{'.'.join(str(p) for p in error['loc'])}: {error['msg']}" for error in exc.errors()
        )
        raise ReportValidationError(problems, row=row) from None


def load_phase_breakdowns(path: str | Path) -> dict[str, dict[str, float]]:
    """Lifecycle phase carbon per server, keyed by normalized server name.

    One row per server with a column per phase; an empty cell means the
    report leaves that phase out.
    """
    path = Path(path)
    frame = _read_frame(path, PHASE_COLUMNS)
    breakdowns: dict[str, dict[str, float]] = {}
    for row, values in enumerate(frame.to_dict("records"), start=1):
        name = _required(_cell(values["server_name"], row, "server_name"), row, "server_name")
        key = normalize_server_name(name)
        if key in breakdowns:
            raise ReportParseError(f"duplicate server {name!r}", row=row, column="server_name")
        phases = {
            phase: value
            for phase in LIFECYCLE_PHASES
            if (value := _parse_float(values[phase], row, phase)) is not None
        }
        if not phases:
            raise ReportParseError("no phase carbon given", row=row)
        breakdowns[key] = phases
    return breakdowns


def _attach_phases(
    records: list[VendorReportRecord],
    breakdowns: dict[str, dict[str, float]],
) -> list[VendorReportRecord]:
    names = {normalize_server_name(record.server_name) for record in records}
    unmatched = sorted(set(breakdowns) - names)
    if unmatched:
        raise ReportValidationError(
            f"phase breakdowns for servers not in the report: {', '.join(unmatched)}"
        )
    attached = []
    for row, record in enumerate(records, start=1):
        phases = breakdowns.get(normalize_server_name(record.server_name))
        if phases is None:
            attached.append(record)
            continue
        try:
            attached.append(VendorReportRecord(**{**record.model_dump(), "phase_breakdown": phases}))
        except ValidationError as exc:
            problems = "; ".join(error["msg"] for error in exc.errors())
            raise ReportValidationError(problems, row=row) from None
    return attached


def load_reports(path: str | Path, phases_path: str | Path | None = None) -> list[VendorReportRecord]:
    """Parse a report CSV. Rows are numbered from 1 after the header.

    ``phases_path`` names an optional CSV of lifecycle phase breakdowns
    (see ``load_phase_breakdowns``) merged into the records by server name.
    """
    path = Path(path)
    frame = _read_frame(path, REPORT_COLUMNS)
    records = [
        _parse_report_row(values, row)
        for row, values in enumerate(frame.to_dict("records"), start=1)
    ]
    if phases_path is not None:
        records = _attach_phases(records, load_phase_breakdowns(phases_path))
    logger.info("loaded %d report record(s) from %s", len(records), path)
    return records


def write_reports(
    records: Iterable[VendorReportRecord],
    path: str | Path,
    phases_path: str | Path | None = None,
) -> Path:
    """Write records in the report CSV layout, the inverse of ``load_reports``.

    Phase breakdowns do not fit the fixed report columns; they go to
    ``phases_path``, which is required when any record carries one.
    """
    path = Path(path)
    records = list(records)
    with_phases = [record for record in records if record.phase_breakdown]
    if with_phases and phases_path is None:
        raise InvalidInputError(
            f"{with_phases[0].server_name}: phase breakdowns need a phases_path to be written"
        )
    rows = [
        {
            "vendor": record.vendor.value,
            "server_name": record.server_name,
            "release_year": record.release_year,
            "cpu_count": record.cpu_count,
            "cpu_cores": record.cpu_core_count,
            "memory_gb": record.memory_gb,
            "ssd_gb": record.ssd_gb,
            "hdd_gb": record.hdd_gb,
            "embodied_kg": record.reported_embodied_kg,
            "sigma_kg": record.reported_sigma_kg,
        }
        for record in records
    ]
    path.parent.mkdir(parents=True, exist_ok=True)
    pd.DataFrame(rows, columns=REPORT_COLUMNS, dtype=object).to_csv(path, index=False)
    if phases_path is not None:
        _write_phases(with_phases, Path(phases_path))
    return path


def _write_phases(records: list[VendorReportRecord], path: Path) -> None:
    names = [normalize_server_name(record.server_name) for record in records]
    if len(set(names)) != len(names):
        raise InvalidInputError("phase breakdowns need unique server names")
    rows = [
        {"server_name": record.server_name, **record.phase_breakdown} for record in records
    ]
    path.parent.mkdir(parents=True, exist_ok=True)
    pd.DataFrame(rows, columns=PHASE_COLUMNS, dtype=object).to_csv(path, index=False)


def augment(
    record: VendorReportRecord,
    spec_db: Mapping[str, int] | None = None,
    defaults: AugmentationDefaults = AugmentationDefaults(),
) -> ServerConfig:
    """Fill the gaps a report leaves so the server model can be evaluated.

    Missing core counts come from the spec-sheet table (maximum compatible
    cores for the server model); missing sizes take ``defaults``. Every filled
    field is listed in ``augmented_fields``. Present values are never replaced.
    """
    if spec_db is None:
        spec_db = load_spec_sheets()
    augmented: set[str] = set()

    cores = record.cpu_core_count
    if cores is None:
        lookup = {normalize_server_name(name): value for name, value in spec_db.items()}
        cores = lookup.get(normalize_server_name(record.server_name))
        if cores is None:
            raise AugmentationError(
                record.server_name,
                "core count is neither reported nor in the spec-sheet table",
            )
        augmented.add("cpu_core_count")

    sizes = {}
    for field in ("memory_gb", "ssd_gb", "hdd_gb"):
        value = getattr(record, field)
        if value is None:
            value = getattr(defaults, field)
            augmented.add(field)
        sizes[field] = value

    if augmented:
        logger.debug("augmented %s: %s", record.server_name, ", ".join(sorted(augmented)))
    return ServerConfig(
        cpu_core_count=cores,
        release_year=record.release_year,
        vendor=record.vendor,
        augmented_fields=frozenset(augmented),
        **sizes,
    )


def load_dell_fixture() -> list[DellFixtureRow]:
    """The 37 Dell servers of the cross-vendor validation figure."""
    frame = _read_frame(data_path("dell_reports.csv"), DELL_FIXTURE_COLUMNS)
    rows = [
        DellFixtureRow(
            index=int(values["index"]),
            reported_kg=float(values["reported_kg"]),
            halfwidth_kg=float(values["halfwidth_kg"]),
            predicted_kg=float(values["predicted_kg"]),
        )
        for values in frame.to_dict("records")
    ]
    if len(rows) != DELL_FIXTURE_ROWS:
        raise ReportValidationError(
            f"Dell fixture has {len(rows)} rows, expected {DELL_FIXTURE_ROWS}"
        )
    return rows


def load_breakdown_fixture() -> list[BreakdownFixtureRow]:
    """Highest/lowest embodied servers per vendor with their part breakdowns."""
    frame = _read_frame(data_path("lenovo_breakdown.csv"), BREAKDOWN_COLUMNS)
    rows = []
    for row, values in enumerate(frame.to_dict("records"), start=1):
        rows.append(
            BreakdownFixtureRow(
                server_name=_required(_cell(values["server_name"], row, "server_name"), row, "server_name"),
                **{
                    column: _parse_float(values[column], row, column)
                    for column in BREAKDOWN_COLUMNS[1:]
                },
            )
        )
    return rows


def load_lenovo_reports() -> list[VendorReportRecord]:
    return load_reports(data_path("lenovo_reports.csv"))


def phase_shares(record: VendorReportRecord) -> dict[str, float]:
    """Fraction of lifecycle carbon per phase."""
    if not record.phase_breakdown:
        raise InvalidInputError(f"{record.server_name}: report has no phase breakdown")
    total = sum(record.phase_breakdown.values())
    if total <= 0:
        raise InvalidInputError(f"{record.server_name}: lifecycle carbon is zero")
    return {phase: kg / total for phase, kg in record.phase_breakdown.items()}


def export_fixtures(directory: str | Path) -> list[Path]:
    """Write every embedded fixture to ``directory`` as CSV."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)

    dell_path = directory / "dell_reports.csv"
    pd.DataFrame(
        [row.model_dump() for row in load_dell_fixture()], columns=DELL_FIXTURE_COLUMNS
    ).to_csv(dell_path, index=False)

    breakdown_path = directory / "lenovo_breakdown.csv"
    pd.DataFrame(
        [row.model_dump() for row in load_breakdown_fixture()],
        columns=BREAKDOWN_COLUMNS,
        dtype=object,
    ).to_csv(breakdown_path, index=False)

    reports_path = write_reports(load_lenovo_reports(), directory / "lenovo_reports.csv")

    spec_path = directory / "spec_sheets.csv"
    pd.DataFrame(
        sorted(load_spec_sheets().items()), columns=["server_name", "max_cores"]
    ).to_csv(spec_path, index=False)

    written = [dell_path, breakdown_path, reports_path, spec_path]
    logger.info("exported %d fixture file(s) to %s", len(written), directory)
    return written
