import json
import logging
import os
import tomllib
from importlib import resources
from pathlib import Path
from typing import Any

from pydantic import BaseModel, ConfigDict, Field, field_validator

from scarif.errors import InvalidInputError, ProfileNotFoundError
from scarif.model import (
    ChipCarbonTable,
    ModelCoefficients,
    cpu_part,
    k6_calibrate,
)

DEFAULT_PROFILE = "paper-eq3"
DEFAULT_REGION = "TX"
DEFAULT_OUTPUT_DIR = "scarif-out"
DEFAULT_LOG_LEVEL = "INFO"

PROFILE_SUFFIXES = (".toml", ".json")

logger = logging.getLogger(__name__)


def data_path(name: str) -> Path:
    """Path of a file shipped in ``scarif/data``."""
    return Path(str(resources.files("scarif").joinpath("data", name)))


class ScarifSettings(BaseModel):
    """Process-wide defaults, overridable through ``SCARIF_*`` environment variables."""

    profile: str = Field(DEFAULT_PROFILE, description="Calibration profile name or path.")
    region: str = Field(DEFAULT_REGION, description="Default grid region.")
    output_dir: str = Field(DEFAULT_OUTPUT_DIR, description="Directory for reports.")
    log_level: str = Field(DEFAULT_LOG_LEVEL, description="Root logging level.")
    profiles_path: str | None = Field(
        None, description="Replacement for the shipped profiles.toml."
    )

    @field_validator("log_level")
    @classmethod
    def _known_level(cls, value: str) -> str:
        value = value.strip().upper()
        if value not in logging.getLevelNamesMapping():
            logger.warning("ignoring unknown log level %r", value)
            return DEFAULT_LOG_LEVEL
        return value

    @classmethod
    def from_env(cls) -> "ScarifSettings":
        values: dict[str, Any] = {}
        for field, env_name in (
            ("profile", "SCARIF_PROFILE"),
            ("region", "SCARIF_REGION"),
            ("output_dir", "SCARIF_OUTPUT"),
            ("log_level", "SCARIF_LOG_LEVEL"),
            ("profiles_path", "SCARIF_PROFILES_PATH"),
        ):
            raw = os.environ.get(env_name)
            if raw is not None and raw.strip():
                values[field] = raw.strip()
        return cls(**values)


class Calibration(BaseModel):
    """Everything the embodied model needs: coefficients, chip table and k6."""

    model_config = ConfigDict(frozen=True)

    profile: str
    coefficients: ModelCoefficients
    chip_table: ChipCarbonTable
    k6: float = Field(..., gt=0)
    k6_anchor_cores: int
    k6_anchor_chip_kg: float


def read_config_file(path: Path) -> dict[str, Any]:
    if not path.is_file():
        raise FileNotFoundError(f"config file not found: {path}")
    if path.suffix.lower() == ".json":
        with open(path, "r", encoding="utf-8") as f:
            document = json.load(f)
    else:
        with open(path, "rb") as f:
            document = tomllib.load(f)
    if not isinstance(document, dict):
        raise InvalidInputError(
            f"{path}: expected a table of settings at the top level, got {type(document).__name__}"
        )
    return document


def profiles_file(profiles_path: str | Path | None) -> Path:
    if profiles_path is not None:
        return Path(profiles_path)
    override = ScarifSettings.from_env().profiles_path
    return Path(override) if override else data_path("profiles.toml")


def available_profiles(profiles_path: str | Path | None = None) -> list[str]:
    document = read_config_file(profiles_file(profiles_path))
    return sorted(document.get("profiles", {}))


def _table(document: dict[str, Any], key: str, where: str) -> dict[str, Any]:
    value = document.get(key) or {}
    if not isinstance(value, dict):
        raise InvalidInputError(f"{where}: [{key}] must be a table, got {type(value).__name__}")
    return value


def _coefficients_from(name: str, section: dict[str, Any]) -> ModelCoefficients:
    coefficients = _table(section, "coefficients", f"profile {name!r}")
    missing = [key for key in ("k1", "k2", "k3", "k4", "k5", "d") if key not in coefficients]
    if missing:
        raise InvalidInputError(
            f"profile {name!r} is missing coefficients: {', '.join(missing)}"
        )
    return ModelCoefficients(
        name=name,
        vendor_offsets=_table(section, "vendor_offsets", f"profile {name!r}"),
        **{key: coefficients[key] for key in ("k1", "k2", "k3", "k4", "k5", "d")},
    )


def _looks_like_path(profile: str) -> bool:
    return profile.lower().endswith(PROFILE_SUFFIXES) or os.sep in profile


def load_calibration(
    profile: str | Path | None = None,
    profiles_path: str | Path | None = None,
) -> Calibration:
    """Resolve a profile name (or a single-profile TOML/JSON file) into a ``Calibration``.

    A standalone profile file may omit ``chip_carbon`` and ``k6_anchor``; the
    shipped values fill in. k6 is always recomputed from the anchor under the
    profile's own k1.
    """
    if profile is None:
        profile = ScarifSettings.from_env().profile
    shared = read_config_file(profiles_file(profiles_path))

    if isinstance(profile, Path) or _looks_like_path(str(profile)):
        path = Path(profile)
        document = read_config_file(path)
        name = str(document.get("name") or path.stem)
        section = document
        logger.info("loaded calibration profile from %s", path)
    else:
        profiles = _table(shared, "profiles", "profiles file")
        if profile not in profiles:
            raise ProfileNotFoundError(str(profile), sorted(profiles))
        name = str(profile)
        section = _table(profiles, name, "profiles file")
        document = shared

    coefficients = _coefficients_from(name, section)
    chip_table = ChipCarbonTable(
        entries=_table(document, "chip_carbon", name) or _table(shared, "chip_carbon", "profiles file")
    )
    anchor = _table(document, "k6_anchor", name) or _table(shared, "k6_anchor", "profiles file")
    anchor_cores = int(anchor.get("cpu_cores", 56))
    anchor_chip = float(anchor.get("chip_carbon_kg", 26.71))
    k6 = k6_calibrate(cpu_part(anchor_cores, coefficients), anchor_chip)
    logger.debug("profile %s: k6 = %.6f", name, k6)
    return Calibration(
        profile=name,
        coefficients=coefficients,
        chip_table=chip_table,
        k6=k6,
        k6_anchor_cores=anchor_cores,
        k6_anchor_chip_kg=anchor_chip,
    )


def normalize_server_name(name: str) -> str:
    return "".join(name.split()).casefold()


def load_spec_sheets(path: str | Path | None = None) -> dict[str, int]:
    """Server model -> maximum compatible CPU cores, keyed by normalized name."""
    document = read_config_file(Path(path) if path else data_path("spec_sheets.toml"))
    return {
        normalize_server_name(name): int(cores)
        for name, cores in document.get("max_cores", {}).items()
    }


def profile_to_dict(coefficients: ModelCoefficients) -> dict[str, Any]:
    return {
        "name": coefficients.name,
        "coefficients": {
            "k1": coefficients.k1,
            "k2": coefficients.k2,
            "k3": coefficients.k3,
            "k4": coefficients.k4,
            "k5": coefficients.k5,
            "d": coefficients.d,
        },
        "vendor_offsets": {
            vendor.value.lower(): offset
            for vendor, offset in sorted(coefficients.vendor_offsets.items())
        },
    }


def write_profile(coefficients: ModelCoefficients, path: str | Path) -> Path:
    """Write a JSON profile that ``load_calibration(path)`` reads back."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8") as f:
        json.dump(profile_to_dict(coefficients), f, indent=2, sort_keys=True)
        f.write("\n")
    logger.info("wrote calibration profile %s", path)
    return path
