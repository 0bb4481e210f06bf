import json
from pathlib import Path

import pytest

from scarif.config import (
    ScarifSettings,
    available_profiles,
    load_calibration,
    load_spec_sheets,
    normalize_server_name,
    read_config_file,
    write_profile,
)
from scarif.errors import InvalidInputError, ProfileNotFoundError
from scarif.model import ModelCoefficients, Vendor


def test_shipped_profiles_are_listed() -> None:
    assert available_profiles() == ["paper-R740", "paper-eq3"]


def test_unknown_profile_lists_available() -> None:
    with pytest.raises(ProfileNotFoundError) as excinfo:
        load_calibration("no-such-profile")
    message = str(excinfo.value)
    assert "paper-eq3" in message
    assert "paper-R740" in message


def test_shipped_profiles_differ_only_in_intercepts() -> None:
    eq3 = load_calibration("paper-eq3").coefficients
    r740 = load_calibration("paper-R740").coefficients
    assert (eq3.k1, eq3.k2, eq3.k3, eq3.k4, eq3.k5) == (r740.k1, r740.k2, r740.k3, r740.k4, r740.k5)
    assert eq3.intercept_for(Vendor.DELL) == -1500.0
    assert r740.intercept_for(Vendor.DELL) == 200.0


def test_profile_defaults_from_environment(monkeypatch: pytest.MonkeyPatch) -> None:
    monkeypatch.setenv("SCARIF_PROFILE", "paper-R740")
    assert load_calibration().profile == "paper-R740"


def test_settings_ignore_unknown_log_level(monkeypatch: pytest.MonkeyPatch) -> None:
    monkeypatch.setenv("SCARIF_LOG_LEVEL", "chatty")
    monkeypatch.setenv("SCARIF_REGION", "ny")
    settings = ScarifSettings.from_env()
    assert settings.log_level == "INFO"
    assert settings.region == "ny"


def test_written_profile_loads_back(tmp_path: Path) -> None:
    coefficients = ModelCoefficients(
        name="custom",
        k1=6.0,
        k2=0.2,
        k3=0.05,
        k4=1.0,
        k5=80.0,
        d=-900.0,
        vendor_offsets={"Dell": -300.0},
    )
    path = write_profile(coefficients, tmp_path / "custom.json")
    calibration = load_calibration(path)
    assert calibration.profile == "custom"
    assert calibration.coefficients == coefficients
    # chip table inherited from the shipped profiles
    assert calibration.chip_table.per_area(14) == pytest.approx(0.03848703)
    assert calibration.k6 == pytest.approx(6.0 * 56 / 26.71)


def test_toml_profile_file(tmp_path: Path) -> None:
    path = tmp_path / "lab.toml"
    path.write_text(
        "[coefficients]\n"
        "k1 = 5.0\nk2 = 0.1\nk3 = 0.0\nk4 = 1.0\nk5 = 80.0\nd = 0.0\n"
        "[chip_carbon]\n"
        "5 = 0.05\n",
        encoding="utf-8",
    )
    calibration = load_calibration(str(path))
    assert calibration.profile == "lab"
    assert calibration.chip_table.entries == {5: 0.05}


def test_profiles_path_override(tmp_path: Path, monkeypatch: pytest.MonkeyPatch) -> None:
    path = tmp_path / "profiles.toml"
    path.write_text(
        "[profiles.site.coefficients]\n"
        "k1 = 1.0\nk2 = 0.0\nk3 = 0.0\nk4 = 0.0\nk5 = 0.0\nd = 0.0\n"
        "[chip_carbon]\n14 = 0.04\n"
        "[k6_anchor]\ncpu_cores = 10\nchip_carbon_kg = 5.0\n",
        encoding="utf-8",
    )
    monkeypatch.setenv("SCARIF_PROFILES_PATH", str(path))
    assert available_profiles() == ["site"]
    assert load_calibration("site").k6 == pytest.approx(2.0)


def test_profile_file_missing_coefficient(tmp_path: Path) -> None:
    path = tmp_path / "broken.json"
    path.write_text(json.dumps({"coefficients": {"k1": 1.0}}), encoding="utf-8")
    with pytest.raises(ValueError, match="missing coefficients"):
        load_calibration(path)


def test_spec_sheet_lookup_is_normalized() -> None:
    sheets = load_spec_sheets()
    assert sheets[normalize_server_name("SR250 V2")] == 8
    assert sheets[normalize_server_name("r740")] == 56


def test_config_documents_must_be_tables(tmp_path: Path) -> None:
    listed = tmp_path / "listed.json"
    listed.write_text(json.dumps([1, 2, 3]), encoding="utf-8")
    with pytest.raises(InvalidInputError, match="top level"):
        read_config_file(listed)


def test_profile_sections_must_be_tables(tmp_path: Path) -> None:
    profile = tmp_path / "odd.json"
    profile.write_text(json.dumps({"coefficients": [5.01, 0.16]}), encoding="utf-8")
    with pytest.raises(InvalidInputError, match="coefficients"):
        load_calibration(profile)


def test_settings_do_not_read_dotenv(tmp_path: Path, monkeypatch: pytest.MonkeyPatch) -> None:
    (tmp_path / ".env").write_text("SCARIF_REGION=NY\n", encoding="utf-8")
    monkeypatch.chdir(tmp_path)
    assert ScarifSettings.from_env().region == "TX"
