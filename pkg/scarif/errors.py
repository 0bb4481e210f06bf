from __future__ import annotations

from typing import TYPE_CHECKING, Sequence

if TYPE_CHECKING:
    from scarif.model import EmbodiedBreakdown


class ScarifError(Exception):
    """Base class for every error raised by the toolkit."""


class InvalidInputError(ScarifError, ValueError):
    """An argument value is outside the operation's domain."""


class InsufficientSamplesError(InvalidInputError):
    def __init__(self, n_samples: int, n_params: int):
        self.n_samples = n_samples
        self.n_params = n_params
        super().__init__(
            f"insufficient samples: {n_samples} record(s) for {n_params} free parameter(s)"
        )


class ModelOutOfRangeError(ScarifError):
    """The linear model produced a negative embodied total.

    The configuration sits below the regime the coefficients were calibrated on.
    The full breakdown is attached so callers can still show it.
    """

    def __init__(self, breakdown: "EmbodiedBreakdown"):
        self.breakdown = breakdown
        super().__init__(
            f"model output {breakdown.total:.2f} kgCO2e is negative; "
            "configuration is below the calibrated regime"
        )


class MissingCalibrationError(ScarifError, KeyError):
    def __init__(self, name: str, node_nm: int, known_nodes: Sequence[int]):
        self.name = name
        self.node_nm = node_nm
        self.known_nodes = list(known_nodes)
        known = ", ".join(str(n) for n in sorted(self.known_nodes)) or "none"
        super().__init__(
            f"no chip carbon for {name!r}: node {node_nm} nm is not in the chip table "
            f"(known nodes: {known}) and no explicit chip_carbon_kg was given"
        )

    def __str__(self) -> str:
        # KeyError would otherwise repr() the message
        return self.args[0]


class ProfileNotFoundError(ScarifError):
    def __init__(self, profile: str, available: Sequence[str]):
        self.profile = profile
        self.available = list(available)
        super().__init__(
            f"unknown calibration profile {profile!r}; available profiles: "
            + ", ".join(self.available)
        )


class ReportParseError(ScarifError):
    def __init__(self, message: str, row: int | None = None, column: str | None = None):
        self.row = row
        self.column = column
        where = []
        if row is not None:
            where.append(f"row {row}")
        if column is not None:
            where.append(f"column {column!r}")
        prefix = f"{', '.join(where)}: " if where else ""
        super().__init__(prefix + message)


class ReportValidationError(ScarifError):
    def __init__(self, message: str, row: int | None = None):
        self.row = row
        prefix = f"row {row}: " if row is not None else ""
        super().__init__(prefix + message)


class AugmentationError(ScarifError):
    def __init__(self, server_name: str, message: str):
        self.server_name = server_name
        super().__init__(f"{server_name}: {message}")


class DegenerateFitError(ScarifError):
    def __init__(
        self,
        dependent_columns: Sequence[str],
        condition: float | None = None,
    ):
        self.dependent_columns = list(dependent_columns)
        self.condition = condition
        if self.dependent_columns:
            detail = "linearly dependent columns: " + ", ".join(self.dependent_columns)
        else:
            detail = f"design is ill-conditioned (condition estimate {condition:.3g})"
        super().__init__(f"degenerate fit; {detail}")


class CapacityExceededError(ScarifError):
    def __init__(self, utilization: float):
        self.utilization = utilization
        super().__init__(
            f"normalized utilization {utilization:.4f} exceeds 1; one server cannot absorb "
            "the workload, scale the server count instead"
        )


class MissingRegionError(ScarifError, KeyError):
    def __init__(self, region: str, known: Sequence[str]):
        self.region = region
        self.known = list(known)
        super().__init__(
            f"unknown region {region!r}; known regions: {', '.join(self.known)}"
        )

    def __str__(self) -> str:
        return self.args[0]
