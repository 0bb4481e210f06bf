"""``scarif`` command line: estimate, fit, validate, breakeven, compare, export-fixtures.

Every command writes its reports (plus a run manifest) into ``--output`` and
prints a summary table. Exit codes: 0 success, 2 input or validation error,
3 model output out of range.
"""

import functools
import json
import logging
import tomllib
from pathlib import Path
from typing import Callable

import click
from dotenv import load_dotenv
import pandas as pd
from pydantic import BaseModel, ConfigDict, Field
from rich.console import Console
from rich.table import Table

from scarif import __version__
from scarif.config import (
    DEFAULT_OUTPUT_DIR,
    ScarifSettings,
    load_calibration,
    load_spec_sheets,
    read_config_file,
    write_profile,
)
from scarif.dataset import (
    AugmentationDefaults,
    export_fixtures,
    load_dell_fixture,
    load_reports,
    phase_shares,
)
from scarif.errors import InvalidInputError, ModelOutOfRangeError, ScarifError
from scarif.fitting import PUBLISHED_FIXED, fit, records_to_training_set, validate_against_fixture
from scarif.model import PUBLISHED_COEFFICIENTS, AcceleratorSpec, EmbodiedBreakdown, ServerConfig, embodied_system
from scarif.scenario import (
    HOURS_PER_YEAR,
    load_fleet_scenario,
    load_intensity_table,
    load_upgrade_scenario,
    fleet_compare,
    operational_carbon,
    shipped_scenario,
    upgrade_analysis,
)
from scarif.util.reporting import ReportWriter

ENV_PREFIX = "SCARIF"
EXIT_INPUT_ERROR = 2
EXIT_OUT_OF_RANGE = 3

logger = logging.getLogger(__name__)


class OperationSpec(BaseModel):
    model_config = ConfigDict(frozen=True)

    average_power_w: float = Field(..., ge=0, description="Average wall power of the system, W.")


class EstimateRequest(BaseModel):
    """Layout of an ``estimate`` config file."""

    model_config = ConfigDict(frozen=True)

    server: ServerConfig
    accelerators: list[AcceleratorSpec] = Field(default_factory=list)
    operation: OperationSpec | None = None


def _breakdown_table(breakdown: EmbodiedBreakdown, title: str) -> Table:
    table = Table(title=title, show_header=True, header_style="bold magenta")
    table.add_column("Term")
    table.add_column("kgCO2e", justify="right")
    for label, value in (
        ("CPU", breakdown.cpu_part),
        ("SSD", breakdown.ssd_part),
        ("HDD", breakdown.hdd_part),
        ("Memory", breakdown.memory_part),
        ("Year", breakdown.year_part),
        ("Intercept", breakdown.intercept),
    ):
        table.add_row(label, f"{value:.2f}")
    for part in breakdown.accelerator_parts:
        table.add_row(part.name, f"{part.kg:.2f}")
    table.add_row("Total", f"{breakdown.total:.2f}", style="bold")
    return table


def handle_errors(command: Callable) -> Callable:
    """Turn library errors into the CLI's exit codes."""

    @functools.wraps(command)
    def wrapper(*args, **kwargs):
        try:
            return command(*args, **kwargs)
        except ModelOutOfRangeError as exc:
            Console().print(_breakdown_table(exc.breakdown, "Embodied carbon (out of range)"))
            click.echo(f"Error: {exc}", err=True)
            raise click.exceptions.Exit(EXIT_OUT_OF_RANGE)
        except (
            ScarifError,
            ValueError,
            OSError,
            tomllib.TOMLDecodeError,
            json.JSONDecodeError,
        ) as exc:
            # pydantic.ValidationError is a ValueError
            click.echo(f"Error: {exc}", err=True)
            raise click.exceptions.Exit(EXIT_INPUT_ERROR)

    return wrapper


profile_option = click.option(
    "--profile",
    envvar="SCARIF_PROFILE",
    default=None,
    help="Calibration profile name or path to a profile file.",
)
output_option = click.option(
    "--output",
    "output_dir",
    default=lambda: ScarifSettings.from_env().output_dir,
    show_default=DEFAULT_OUTPUT_DIR,
    type=click.Path(file_okay=False, path_type=Path),
    help="Directory for reports and the run manifest.",
)
input_file = click.Path(dir_okay=False, path_type=Path)


@click.group(context_settings={"auto_envvar_prefix": ENV_PREFIX})
@click.version_option(__version__, prog_name="scarif")
@click.option("--verbose", "-v", is_flag=True, help="Enable debug logging.")
def cli(verbose: bool) -> None:
    """Embodied and operational carbon of servers with accelerators."""
    if verbose:
        logging.getLogger().setLevel(logging.DEBUG)


@cli.command()
@click.argument("config_file", type=input_file)
@profile_option
@click.option("--region", envvar="SCARIF_REGION", default=None, help="Grid region for operational carbon.")
@click.option(
    "--years",
    type=click.FloatRange(min=0, min_open=True),
    default=None,
    help="Lifetime in years; adds operational carbon for the config's average power.",
)
@output_option
@handle_errors
def estimate(
    config_file: Path,
    profile: str | None,
    region: str | None,
    years: float | None,
    output_dir: Path,
) -> None:
    """Embodied carbon of the server and accelerators in CONFIG_FILE."""
    request = EstimateRequest.model_validate(read_config_file(config_file))
    calibration = load_calibration(profile)
    breakdown = embodied_system(
        request.server,
        request.accelerators,
        calibration.coefficients,
        calibration.k6,
        calibration.chip_table,
    )
    console = Console()
    console.print(_breakdown_table(breakdown, f"Embodied carbon ({calibration.profile})"))

    payload = {
        "command": "estimate",
        "profile": calibration.profile,
        "k6": calibration.k6,
        "k6_anchor": {
            "cpu_cores": calibration.k6_anchor_cores,
            "chip_carbon_kg": calibration.k6_anchor_chip_kg,
        },
        "breakdown": breakdown.model_dump(mode="json"),
        "total_kg": breakdown.total,
    }
    if years is not None:
        if request.operation is None:
            raise InvalidInputError(
                "--years needs an [operation] table with average_power_w in the config file"
            )
        region = region or ScarifSettings.from_env().region
        energy = request.operation.average_power_w * HOURS_PER_YEAR / 1000.0
        operational = operational_carbon(energy, region, load_intensity_table()) * years
        payload["operation"] = {
            "region": region.strip().upper(),
            "years": years,
            "annual_kwh": energy,
            "operational_kg": operational,
            "lifecycle_kg": breakdown.total + operational,
        }
        console.print(
            f"Operational over {years:g} y in {region.upper()}: {operational:.2f} kgCO2e "
            f"(lifecycle {breakdown.total + operational:.2f})"
        )

    writer = ReportWriter(output_dir)
    writer.write_json("estimate.json", payload)
    writer.finalize("estimate", [config_file], calibration.profile)


@cli.command("fit")
@click.argument("reports_csv", type=input_file)
@click.option("--k2", type=float, default=PUBLISHED_FIXED["k2"], show_default=True, help="Fixed SSD coefficient.")
@click.option("--k3", type=float, default=PUBLISHED_FIXED["k3"], show_default=True, help="Fixed HDD coefficient.")
@click.option(
    "--intercept",
    "intercept_mode",
    type=click.Choice(["free", "fixed"]),
    default="free",
    show_default=True,
)
@click.option("--d", "intercept_value", type=float, default=None, help="Intercept for --intercept fixed.")
@click.option(
    "--vendor-offsets/--no-vendor-offsets",
    default=False,
    help="Take the shipped Dell and Lenovo offsets off the targets before fitting.",
)
@click.option("--spec-sheets", type=input_file, default=None, help="Max-core table for augmentation.")
@click.option(
    "--phases",
    "phases_csv",
    type=input_file,
    default=None,
    help="Lifecycle phase breakdowns per server, reported as shares in fit_report.json.",
)
@click.option("--name", default="fitted", show_default=True, help="Name of the fitted profile.")
@output_option
@handle_errors
def fit_command(
    reports_csv: Path,
    k2: float,
    k3: float,
    intercept_mode: str,
    intercept_value: float | None,
    vendor_offsets: bool,
    spec_sheets: Path | None,
    phases_csv: Path | None,
    name: str,
    output_dir: Path,
) -> None:
    """Fit k1, k4, k5 (and d) to REPORTS_CSV and write a calibration profile."""
    if intercept_mode == "free" and intercept_value is not None:
        raise click.UsageError("--d is only used with --intercept fixed")
    intercept = None
    if intercept_mode == "fixed":
        intercept = PUBLISHED_COEFFICIENTS.d if intercept_value is None else intercept_value

    records = load_reports(reports_csv, phases_csv)
    training = records_to_training_set(records, load_spec_sheets(spec_sheets), AugmentationDefaults())
    result = fit(
        training,
        {"k2": k2, "k3": k3},
        intercept,
        vendor_offsets=PUBLISHED_COEFFICIENTS.vendor_offsets if vendor_offsets else None,
        name=name,
    )

    coefficients = result.coefficients
    table = Table(title=f"Fitted profile {name}", show_header=True, header_style="bold magenta")
    table.add_column("Coefficient")
    table.add_column("Value", justify="right")
    for key in ("k1", "k2", "k3", "k4", "k5", "d"):
        table.add_row(key, f"{getattr(coefficients, key):.6g}")
    table.add_row("RMSE", f"{result.rmse:.2f}")
    Console().print(table)

    writer = ReportWriter(output_dir)
    profile_path = write_profile(coefficients, output_dir / f"{name}.json")
    writer.add_existing(profile_path)
    writer.write_json(
        "fit_report.json",
        {
            "command": "fit",
            "profile": name,
            "n_samples": result.n_samples,
            "rmse": result.rmse,
            "condition": result.condition,
            "intercept_mode": intercept_mode,
            "residuals": [
                {
                    "server_name": record.server_name,
                    "residual_kg": residual,
                    "phase_shares": phase_shares(record) if record.phase_breakdown else None,
                }
                for record, residual in zip(records, result.residuals)
            ],
        },
    )
    writer.finalize("fit", [reports_csv, phases_csv] if phases_csv else [reports_csv], name)


def _read_predictions(path: Path) -> list[float]:
    frame = pd.read_csv(path, float_precision="round_trip")
    if "predicted_kg" not in frame.columns:
        raise InvalidInputError(f"{path}: expected a predicted_kg column")
    return pd.to_numeric(frame["predicted_kg"], errors="raise").astype(float).tolist()


@cli.command()
@click.option(
    "--fixture",
    type=click.Choice(["dell-fig4"]),
    default="dell-fig4",
    show_default=True,
    help="Reported values to score against.",
)
@click.option(
    "--use-paper-predictions",
    is_flag=True,
    help="Score the published predictions shipped with the fixture.",
)
@click.option(
    "--predictions",
    "predictions_csv",
    type=input_file,
    default=None,
    help="CSV with a predicted_kg column, one row per fixture row.",
)
@output_option
@handle_errors
def validate(
    fixture: str,
    use_paper_predictions: bool,
    predictions_csv: Path | None,
    output_dir: Path,
) -> None:
    """Error of predictions against a reported-value fixture, in units of sigma."""
    if use_paper_predictions == (predictions_csv is not None):
        raise click.UsageError("give exactly one of --use-paper-predictions and --predictions")

    rows = load_dell_fixture()
    if use_paper_predictions:
        predictions = [row.predicted_kg for row in rows]
        source = "published"
    else:
        predictions = _read_predictions(predictions_csv)
        source = str(predictions_csv)
    summary = validate_against_fixture(predictions, rows)

    table = Table(title=f"Validation against {fixture}", show_header=True, header_style="bold magenta")
    table.add_column("Statistic")
    table.add_column("Value", justify="right")
    table.add_row("mean |error| / sigma", f"{summary.mean_ratio:.4f}")
    table.add_row("max |error| / sigma", f"{summary.max_ratio:.4f}")
    table.add_row("mean relative error", f"{summary.mean_relative_error:.4f}")
    table.add_row("rows outside 0.4 sigma", ", ".join(map(str, summary.rows_outside_band)) or "none")
    Console().print(table)

    writer = ReportWriter(output_dir)
    writer.write_json(
        "validation.json",
        {
            "command": "validate",
            "fixture": fixture,
            "predictions": source,
            **summary.model_dump(),
        },
    )
    writer.finalize("validate", [predictions_csv] if predictions_csv else [])


@cli.command()
@click.argument("scenario_file", type=input_file, required=False)
@profile_option
@click.option(
    "--basis",
    type=click.Choice(["system", "chip"]),
    default="system",
    show_default=True,
    help="Charge the new system's full embodied carbon or its chips only.",
)
@click.option("--horizon", type=click.FloatRange(min=0, min_open=True), default=None, help="Years to plot.")
@click.option("--region", "regions", multiple=True, help="Region to evaluate; repeatable.")
@output_option
@handle_errors
def breakeven(
    scenario_file: Path | None,
    profile: str | None,
    basis: str,
    horizon: float | None,
    regions: tuple[str, ...],
    output_dir: Path,
) -> None:
    """Years until upgrading pays back its embodied carbon, per region.

    SCENARIO_FILE defaults to the shipped R740 + V100 to R750 + A100 upgrade.
    """
    path = scenario_file or shipped_scenario("r750_upgrade")
    scenario = load_upgrade_scenario(path)
    updates = {}
    if horizon is not None:
        updates["horizon_years"] = horizon
    if regions:
        updates["regions"] = list(regions)
    if updates:
        scenario = scenario.model_copy(update=updates)

    calibration = load_calibration(profile or scenario.profile)
    report = upgrade_analysis(
        scenario,
        coeffs=calibration.coefficients,
        k6=calibration.k6,
        chip_table=calibration.chip_table,
        intensities=load_intensity_table(),
        basis=basis,
    )

    table = Table(
        title=f"Breakeven, {scenario.old.name} -> {scenario.new.name}",
        show_header=True,
        header_style="bold magenta",
    )
    table.add_column("Region")
    table.add_column("kgCO2e/kWh", justify="right")
    table.add_column("Saving kg/y", justify="right")
    table.add_column("Breakeven", justify="right")
    for curve in report.curves:
        value = curve.summary_value
        table.add_row(
            curve.region,
            f"{curve.intensity:.3f}",
            f"{curve.annual_saving_kg:.1f}",
            f"{value:.2f} y" if isinstance(value, float) else value,
        )
    console = Console()
    console.print(table)
    if report.new_peripheral_gap is not None:
        console.print(
            f"{scenario.new.name}: system-level carbon is {report.new_peripheral_gap:.1f}x its chips alone"
        )

    frame = pd.DataFrame({"year": [year for year, _ in report.curves[0].points]})
    for curve in report.curves:
        frame[f"{curve.region}_saving_kg"] = [saving for _, saving in curve.points]

    writer = ReportWriter(output_dir)
    writer.write_csv("breakeven_curves.csv", frame)
    writer.write_json(
        "breakeven_summary.json",
        {
            "command": "breakeven",
            "profile": calibration.profile,
            "basis": report.basis,
            "horizon_years": scenario.horizon_years,
            "old": {
                "name": scenario.old.name,
                "utilization": report.old_utilization,
                "annual_kwh": report.old_annual_kwh,
                "embodied_kg": report.old_embodied_kg,
            },
            "new": {
                "name": scenario.new.name,
                "utilization": report.new_utilization,
                "annual_kwh": report.new_annual_kwh,
                "embodied_kg": report.new_embodied_kg,
                "peripheral_gap": report.new_peripheral_gap,
            },
            "regions": {
                curve.region: {
                    "intensity": curve.intensity,
                    "annual_saving_kg": curve.annual_saving_kg,
                    "breakeven_years": curve.summary_value,
                    "status": curve.status,
                }
                for curve in report.curves
            },
        },
    )
    writer.finalize("breakeven", [path], calibration.profile)


@cli.command()
@click.argument("scenario_file", type=input_file, required=False)
@profile_option
@click.option("--region", envvar="SCARIF_REGION", default=None, help="Grid region of the fleet.")
@click.option("--years", type=click.FloatRange(min=0, min_open=True), default=None, help="Fleet lifetime.")
@click.option("--workload", type=click.FloatRange(min=0, min_open=True), default=None, help="Tasks per second.")
@click.option("--integer-servers", is_flag=True, help="Round server counts up to whole servers.")
@output_option
@handle_errors
def compare(
    scenario_file: Path | None,
    profile: str | None,
    region: str | None,
    years: float | None,
    workload: float | None,
    integer_servers: bool,
    output_dir: Path,
) -> None:
    """Rank fleet designs by lifetime carbon for the same workload.

    SCENARIO_FILE defaults to the shipped DeiT-T inference fleet.
    """
    path = scenario_file or shipped_scenario("accelerator_fleet")
    scenario = load_fleet_scenario(path)
    calibration = load_calibration(profile or scenario.profile)
    region = region or scenario.region
    lifetime = years or scenario.lifetime_years
    workload = workload or scenario.workload_tasks_per_s

    ranking = fleet_compare(
        workload,
        scenario.candidates,
        region,
        lifetime,
        coeffs=calibration.coefficients,
        k6=calibration.k6,
        chip_table=calibration.chip_table,
        intensities=load_intensity_table(),
        integer_servers=integer_servers or scenario.integer_servers,
    )

    table = Table(
        title=f"{scenario.workload}, {workload:g} tasks/s, {region.upper()}, {lifetime:g} y",
        show_header=True,
        header_style="bold magenta",
    )
    table.add_column("Rank", justify="right")
    table.add_column("Candidate")
    table.add_column("Servers", justify="right")
    table.add_column("kgCO2e", justify="right")
    for rank, result in enumerate(ranking, start=1):
        table.add_row(str(rank), result.name, f"{result.servers_needed:.2f}", f"{result.total_kg:.0f}")
    Console().print(table)

    rows = [
        {"rank": rank, **result.model_dump(), "kg_per_task_per_s": result.total_kg / workload}
        for rank, result in enumerate(ranking, start=1)
    ]
    writer = ReportWriter(output_dir)
    writer.write_csv("comparison.csv", pd.DataFrame(rows))
    writer.write_json(
        "comparison.json",
        {
            "command": "compare",
            "profile": calibration.profile,
            "workload": scenario.workload,
            "region": region.strip().upper(),
            "lifetime_years": lifetime,
            "workload_tasks_per_s": workload,
            "ranking": rows,
        },
    )
    writer.finalize("compare", [path], calibration.profile)


@cli.command("export-fixtures")
@output_option
@handle_errors
def export_fixtures_command(output_dir: Path) -> None:
    """Write the embedded fixtures as CSV."""
    writer = ReportWriter(output_dir)
    for path in export_fixtures(output_dir):
        writer.add_existing(path)
        click.echo(str(path))
    writer.finalize("export-fixtures")


def main() -> None:
    load_dotenv()
    settings = ScarifSettings.from_env()
    logging.basicConfig(
        level=settings.log_level,
        format="%(asctime)s - %(name)s - %(levelname)s - %(message)s",
    )
    cli()


if __name__ == "__main__":
    main()
