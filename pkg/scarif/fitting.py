"""Re-derive server model coefficients from report data and score predictions
against reported values."""

from __future__ import annotations

import logging
from typing import Mapping, Sequence

import numpy as np
import scipy.linalg
from pydantic import BaseModel, ConfigDict, Field

from scarif.dataset import (
    HALFWIDTH_SIGMA_FRACTION,
    AugmentationDefaults,
    DellFixtureRow,
    VendorReportRecord,
    augment,
)
from scarif.errors import (
    DegenerateFitError,
    InsufficientSamplesError,
    InvalidInputError,
)
from scarif.model import BASE_YEAR, ModelCoefficients, ServerConfig, Vendor, embodied_server

logger = logging.getLogger(__name__)

MAX_CONDITION = 1e10
NULL_SPACE_TOL = 1e-8
FREE_COLUMNS = ("k1", "k4", "k5", "d")
COLUMN_FEATURES = {
    "k1": "cpu_core_count",
    "k4": "memory_gb",
    "k5": "release_year",
    "d": "intercept",
}
PUBLISHED_FIXED = {"k2": 0.16, "k3": 0.04}


class FitResult(BaseModel):
    model_config = ConfigDict(frozen=True)

    coefficients: ModelCoefficients
    residuals: list[float] = Field(..., description="reported - predicted, input order.")
    rmse: float = Field(..., ge=0)
    n_samples: int
    condition: float = Field(..., description="Condition estimate of the scaled normal matrix.")


class ValidationSummary(BaseModel):
    model_config = ConfigDict(frozen=True)

    per_record_error_over_sigma: list[float]
    max_ratio: float = Field(..., ge=0)
    mean_ratio: float = Field(..., ge=0)
    mean_relative_error: float = Field(..., ge=0)
    rows_outside_band: list[int] = Field(
        default_factory=list,
        description="1-based rows whose error exceeds the plotted 0.4 sigma band.",
    )


def _design(
    records: Sequence[tuple[ServerConfig, float]],
    columns: Sequence[str],
) -> np.ndarray:
    features = {
        "k1": [config.cpu_core_count for config, _ in records],
        "k4": [config.memory_gb for config, _ in records],
        "k5": [config.release_year - BASE_YEAR for config, _ in records],
        "d": [1.0] * len(records),
    }
    return np.column_stack([np.asarray(features[c], dtype=float) for c in columns])


def _column_scale(design: np.ndarray) -> np.ndarray:
    scale = np.linalg.norm(design, axis=0)
    scale[scale == 0] = 1.0
    return scale


def _dependent_columns(scaled: np.ndarray, columns: Sequence[str]) -> list[str]:
    """Every column taking part in a linear dependency, in column order."""
    rank = np.linalg.matrix_rank(scaled)
    if rank == len(columns):
        return []
    _, _, vt = np.linalg.svd(scaled, full_matrices=True)
    null_space = vt[rank:]
    involved = np.any(np.abs(null_space) > NULL_SPACE_TOL, axis=0)
    return [COLUMN_FEATURES[name] for name, flag in zip(columns, involved) if flag]


def fit(
    records: Sequence[tuple[ServerConfig, float]],
    fixed: Mapping[str, float] = PUBLISHED_FIXED,
    intercept: float | None = None,
    *,
    vendor_offsets: Mapping[Vendor | str, float] | None = None,
    name: str = "fitted",
) -> FitResult:
    """Least-squares fit of k1, k4, k5 (and d unless ``intercept`` fixes it).

    k2 and k3 come from ``fixed``; their terms and any vendor offsets are taken
    off the targets before solving. Normal equations are solved on
    unit-norm columns with a pivoted LU factorization.
    """
    try:
        k2, k3 = float(fixed["k2"]), float(fixed["k3"])
    except KeyError as exc:
        raise InvalidInputError(f"fixed coefficient {exc.args[0]} is required") from None

    offsets = {Vendor.parse(key): float(value) for key, value in (vendor_offsets or {}).items()}
    columns = FREE_COLUMNS if intercept is None else FREE_COLUMNS[:3]
    if len(records) < len(columns):
        raise InsufficientSamplesError(len(records), len(columns))

    targets = np.array(
        [
            reported
            - k2 * config.ssd_gb
            - k3 * config.hdd_gb
            - offsets.get(config.vendor, 0.0)
            - (intercept or 0.0)
            for config, reported in records
        ]
    )
    design = _design(records, columns)
    scale = _column_scale(design)
    scaled = design / scale

    dependent = _dependent_columns(scaled, columns)
    if dependent:
        raise DegenerateFitError(dependent)

    normal = scaled.T @ scaled
    condition = float(np.linalg.cond(normal))
    if condition > MAX_CONDITION:
        raise DegenerateFitError([], condition)

    lu_piv = scipy.linalg.lu_factor(normal)
    solution = scipy.linalg.lu_solve(lu_piv, scaled.T @ targets) / scale
    values = dict(zip(columns, solution.tolist()))
    if intercept is not None:
        values["d"] = intercept

    negative = [key for key in ("k1", "k4", "k5") if values[key] < 0]
    if negative:
        raise InvalidInputError(
            "fit produced negative per-unit coefficients ("
            + ", ".join(f"{key}={values[key]:.4g}" for key in negative)
            + "); the data do not support a non-negative linear model"
        )

    residuals = targets - design @ solution
    rmse = float(np.sqrt(np.mean(residuals**2)))
    coefficients = ModelCoefficients(
        name=name,
        k1=values["k1"],
        k2=k2,
        k3=k3,
        k4=values["k4"],
        k5=values["k5"],
        d=values["d"],
        vendor_offsets=offsets,
    )
    logger.info(
        "fit on %d record(s): k1=%.4f k4=%.4f k5=%.4f d=%.2f rmse=%.2f (cond %.3g)",
        len(records),
        coefficients.k1,
        coefficients.k4,
        coefficients.k5,
        coefficients.d,
        rmse,
        condition,
    )
    return FitResult(
        coefficients=coefficients,
        residuals=residuals.tolist(),
        rmse=rmse,
        n_samples=len(records),
        condition=condition,
    )


def sum_of_squares(records: Sequence[tuple[ServerConfig, float]], coefficients: ModelCoefficients) -> float:
    predictions = predict([config for config, _ in records], coefficients)
    return float(sum((reported - p) ** 2 for (_, reported), p in zip(records, predictions)))


def predict(configs: Sequence[ServerConfig], coefficients: ModelCoefficients) -> list[float]:
    """Model totals, negative values included."""
    return [embodied_server(c, coefficients, check_range=False).total for c in configs]


def records_to_training_set(
    records: Sequence[VendorReportRecord],
    spec_db: Mapping[str, int] | None = None,
    defaults: AugmentationDefaults = AugmentationDefaults(),
) -> list[tuple[ServerConfig, float]]:
    return [(augment(record, spec_db, defaults), record.reported_embodied_kg) for record in records]


def mean_relative_error(predictions: Sequence[float], reported: Sequence[float]) -> float:
    if len(predictions) != len(reported):
        raise InvalidInputError(
            f"{len(predictions)} prediction(s) for {len(reported)} reported value(s)"
        )
    if not reported:
        raise InvalidInputError("no values to compare")
    reported_arr = np.asarray(reported, dtype=float)
    if np.any(reported_arr <= 0):
        raise InvalidInputError("reported values must be > 0")
    predicted_arr = np.asarray(predictions, dtype=float)
    return float(np.mean(np.abs(predicted_arr - reported_arr) / reported_arr))


def validate_against_fixture(
    predictions: Sequence[float],
    fixture: Sequence[DellFixtureRow],
) -> ValidationSummary:
    """Error of each prediction in units of the reported standard deviation."""
    if len(predictions) != len(fixture):
        raise InvalidInputError(
            f"{len(predictions)} prediction(s) for {len(fixture)} fixture row(s)"
        )
    if not fixture:
        raise InvalidInputError("fixture is empty")

    reported = np.array([row.reported_kg for row in fixture])
    sigma = np.array([row.sigma_kg for row in fixture])
    ratios = np.abs(np.asarray(predictions, dtype=float) - reported) / sigma

    outside = [
        row.index for row, ratio in zip(fixture, ratios) if ratio > HALFWIDTH_SIGMA_FRACTION
    ]
    for index in outside:
        logger.warning("fixture row %d lies outside the 0.4 sigma band", index)
    return ValidationSummary(
        per_record_error_over_sigma=ratios.tolist(),
        max_ratio=float(ratios.max()),
        mean_ratio=float(ratios.mean()),
        mean_relative_error=mean_relative_error(predictions, reported.tolist()),
        rows_outside_band=outside,
    )
