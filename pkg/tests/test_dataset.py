from pathlib import Path

import pytest

from scarif.dataset import (
    REPORT_COLUMNS,
    AugmentationDefaults,
    VendorReportRecord,
    augment,
    export_fixtures,
    load_breakdown_fixture,
    load_dell_fixture,
    load_reports,
    load_lenovo_reports,
    load_phase_breakdowns,
    phase_shares,
    write_reports,
)
from scarif.errors import AugmentationError, InvalidInputError, ReportParseError, ReportValidationError
from scarif.model import Vendor

HEADER = ",".join(REPORT_COLUMNS)


def _write(tmp_path: Path, *rows: str, header: str = HEADER) -> Path:
    path = tmp_path / "reports.csv"
    path.write_text("\n".join([header, *rows]) + "\n", encoding="utf-8")
    return path


def test_load_reports_keeps_missing_cells_missing(tmp_path: Path) -> None:
    path = _write(
        tmp_path,
        "HP,DL360,2019,2,40,256,960,,2100,150",
        "lenovo,SR650,2020,,,,,,1900,",
    )
    first, second = load_reports(path)
    assert first.vendor is Vendor.HP
    assert first.cpu_core_count == 40
    assert first.hdd_gb is None
    assert first.reported_sigma_kg == 150.0
    assert second.vendor is Vendor.LENOVO
    assert second.memory_gb is None
    assert second.cpu_count is None


def test_bad_header_rejected(tmp_path: Path) -> None:
    path = _write(tmp_path, "HP,DL360,2019", header="vendor,server_name,year")
    with pytest.raises(ReportParseError, match="header"):
        load_reports(path)


def test_parse_error_names_row_and_column(tmp_path: Path) -> None:
    path = _write(
        tmp_path,
        "HP,DL360,2019,2,40,256,960,,2100,",
        "Dell,R640,2019,2,forty,,,,1500,",
    )
    with pytest.raises(ReportParseError) as excinfo:
        load_reports(path)
    assert excinfo.value.row == 2
    assert excinfo.value.column == "cpu_cores"


def test_validation_error_names_row(tmp_path: Path) -> None:
    path = _write(tmp_path, "Dell,R640,1999,2,40,,,,1500,")
    with pytest.raises(ReportValidationError) as excinfo:
        load_reports(path)
    assert excinfo.value.row == 1


def test_missing_embodied_value_rejected(tmp_path: Path) -> None:
    path = _write(tmp_path, "Dell,R640,2019,2,40,,,,,")
    with pytest.raises(ReportParseError, match="required"):
        load_reports(path)


def test_written_reports_parse_back(tmp_path: Path) -> None:
    records = load_lenovo_reports()
    path = write_reports(records, tmp_path / "copy.csv")
    assert load_reports(path) == records


def test_augment_fills_cores_and_sizes() -> None:
    record = load_lenovo_reports()[4]
    assert record.server_name == "SR950"
    config = augment(record)
    assert config.cpu_core_count == 224
    assert config.memory_gb == 64.0
    assert config.ssd_gb == 0.0
    assert config.augmented_fields == {"cpu_core_count", "memory_gb", "ssd_gb", "hdd_gb"}


def test_augment_matches_names_ignoring_case_and_spaces() -> None:
    record = VendorReportRecord(
        vendor="Lenovo", server_name="sr250v2", release_year=2021, reported_embodied_kg=585
    )
    assert augment(record).cpu_core_count == 8


def test_augment_never_replaces_reported_values() -> None:
    record = VendorReportRecord(
        vendor="Dell",
        server_name="R740",
        release_year=2017,
        cpu_core_count=40,
        memory_gb=384,
        ssd_gb=0,
        hdd_gb=2000,
        reported_embodied_kg=1500,
    )
    config = augment(record, defaults=AugmentationDefaults(memory_gb=16))
    assert (config.cpu_core_count, config.memory_gb, config.hdd_gb) == (40, 384, 2000)
    assert config.augmented_fields == frozenset()


def test_augment_unknown_server() -> None:
    record = VendorReportRecord(
        vendor="HP", server_name="Moonshot", release_year=2016, reported_embodied_kg=900
    )
    with pytest.raises(AugmentationError, match="Moonshot"):
        augment(record, spec_db={})


def test_dell_fixture_statistics() -> None:
    rows = load_dell_fixture()
    assert len(rows) == 37
    assert sum(row.reported_kg for row in rows) == pytest.approx(49476.43, abs=1e-6)
    assert rows[0].sigma_kg == pytest.approx(577.22 / 0.4)


def test_breakdown_fixture() -> None:
    rows = {row.server_name: row for row in load_breakdown_fixture()}
    assert rows["SR950"].mainboard == 15167
    assert rows["R930"].mainboard is None
    dl20 = rows["DL20"]
    assert sum(dl20.parts()) <= dl20.total_embodied * 1.01


def test_phase_shares() -> None:
    record = VendorReportRecord(
        vendor="Dell",
        server_name="R640",
        release_year=2019,
        reported_embodied_kg=1500,
        phase_breakdown={"manufacturing": 1500, "transportation": 30, "use": 6000, "eol": 20},
    )
    shares = phase_shares(record)
    assert sum(shares.values()) == pytest.approx(1.0)
    assert shares["use"] == pytest.approx(6000 / 7550)


def test_phase_breakdown_rejects_unknown_phase() -> None:
    with pytest.raises(ValueError):
        VendorReportRecord(
            vendor="Dell",
            server_name="R640",
            release_year=2019,
            reported_embodied_kg=1500,
            phase_breakdown={"shipping": 30},
        )


def test_export_fixtures(tmp_path: Path) -> None:
    written = export_fixtures(tmp_path / "fixtures")
    assert sorted(path.name for path in written) == [
        "dell_reports.csv",
        "lenovo_breakdown.csv",
        "lenovo_reports.csv",
        "spec_sheets.csv",
    ]
    assert load_reports(tmp_path / "fixtures" / "lenovo_reports.csv") == load_lenovo_reports()


def _with_phases() -> list[VendorReportRecord]:
    records = load_lenovo_reports()
    first = VendorReportRecord(
        **{
            **records[0].model_dump(),
            "phase_breakdown": {"manufacturing": 1782.0, "transportation": 12.5, "use": 9000.25},
        }
    )
    return [first, *records[1:]]


def test_phase_breakdowns_round_trip(tmp_path: Path) -> None:
    records = _with_phases()
    reports = write_reports(records, tmp_path / "reports.csv", tmp_path / "phases.csv")
    assert load_reports(reports, tmp_path / "phases.csv") == records
    assert load_reports(reports)[0].phase_breakdown is None


def test_writing_phases_needs_a_phases_file(tmp_path: Path) -> None:
    with pytest.raises(InvalidInputError, match="phases_path"):
        write_reports(_with_phases(), tmp_path / "reports.csv")


def test_phase_file_rows_are_checked(tmp_path: Path) -> None:
    phases = tmp_path / "phases.csv"
    phases.write_text(
        "server_name,manufacturing,transportation,use,eol\nSR650,100,1,,\nSR 650,5,,,\n",
        encoding="utf-8",
    )
    with pytest.raises(ReportParseError, match="row 2"):
        load_phase_breakdowns(phases)
    phases.write_text("server_name,manufacturing,transportation,use,eol\nR930,-1,,,\n", encoding="utf-8")
    reports = write_reports(load_lenovo_reports(), tmp_path / "reports.csv")
    with pytest.raises(ReportValidationError, match="row 1"):
        load_reports(reports, phases)
