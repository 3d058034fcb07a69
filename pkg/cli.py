"""
rei-qnd command-line entry point.

    rei-qnd derive --preset nd_yvo4_demonstrated
    rei-qnd spectrum --out spectrum.csv
    rei-qnd dynamics --t-p 20 --out trace.csv --summary trace.json
    rei-qnd protocol --t-p-us 13
    rei-qnd readout --n-m 2 --p-det 0.9
    rei-qnd optimize --out fidelity.csv
    rei-qnd audit --no-timestamp

Curve commands write CSV; reports are JSON. Logs go to stderr.
Exit codes: 0 success, 2 invalid input, 3 numerical integrity, 4 output error.
"""

import json
import logging
import sys
import traceback
from typing import Any, Callable, Dict, Optional

import click

from rei_qnd.commands import COMMANDS, CURVE_COMMANDS, CommandOutput
from rei_qnd.config.run_config import OUTPUT_FORMATS, RunConfig
from rei_qnd.errors import ConfigValidationError, QndError
from rei_qnd.templates import CLI_ERROR_TEMPLATE, CLI_OUTPUT_TEMPLATE
from rei_qnd.utils.writers import to_serializable, write_csv, write_json


logger = logging.getLogger("rei_qnd.cli")


# Define custom formatter
class CustomFormatter(logging.Formatter):
    def format(self, record):
        if record.getMessage().strip() in ('', '\n'):
            return ''
        return super().format(record)


class StderrHandler(logging.StreamHandler):
    """Stream handler that always writes to the current sys.stderr."""

    def __init__(self) -> None:
        super().__init__(sys.stderr)

    @property
    def stream(self):
        return sys.stderr

    @stream.setter
    def stream(self, value) -> None:
        pass


def configure_logging(verbose: bool = False) -> None:
    """Install the stderr handler on the root logger once."""
    root = logging.getLogger()
    for handler in list(root.handlers):
        if isinstance(handler, StderrHandler):
            root.removeHandler(handler)

    handler = StderrHandler()
    handler.setFormatter(CustomFormatter('%(asctime)s [%(levelname)s] %(name)s: %(message)s'))
    root.addHandler(handler)
    root.setLevel(logging.DEBUG if verbose else logging.INFO)


# ==============================================================================
# Options
# ==============================================================================

def run_options(func: Callable) -> Callable:
    """Options shared by every subcommand."""
    decorators = [
        click.option("--preset", default=None, help="Preset name (nd_yvo4_demonstrated, nd_yvo4_subkelvin, nd_yvo4_theoretical_q)"),
        click.option("--config", "config_path", type=click.Path(dir_okay=False), default=None, help="JSON run config"),
        click.option("--out", "output", default=None, help="Output file (stdout when omitted)"),
        click.option("--format", "output_format", type=click.Choice(OUTPUT_FORMATS), default=None, help="Output format"),
        click.option("--alpha", type=float, default=None, help="Superposition time multiplier (>= 1)"),
        click.option("--t-p-us", "t_p_us", type=float, default=None, help="Pulse duration in microseconds"),
        click.option("--n-m", "n_m", type=int, default=None, help="Minimum detected photons"),
        click.option("--p-det", "p_det", type=float, default=None, help="Detector efficiency"),
        click.option("--no-timestamp", is_flag=True, default=False, help="Omit generated_at from JSON output"),
    ]
    for decorator in reversed(decorators):
        func = decorator(func)
    return func


def summary_option(func: Callable) -> Callable:
    return click.option("--summary", type=click.Path(dir_okay=False), default=None, help="Write the JSON summary here")(func)


# ==============================================================================
# Execution
# ==============================================================================

def _emit(name: str, config: RunConfig, output: CommandOutput, summary_path: Optional[str]) -> None:
    output_format = config.output_format or ("csv" if name in CURVE_COMMANDS else "json")

    if output_format == "json":
        payload = dict(output.report)
        if output.has_rows:
            payload["rows"] = output.rows
        write_json(payload, config.output, timestamp=config.timestamp)
        if config.output is not None:
            logger.info(CLI_OUTPUT_TEMPLATE.format(what=f"{name} report", path=config.output))
        return

    if not output.has_rows:
        raise ConfigValidationError("output_format", f"'{name}' produces a report only; use json")
    write_csv(output.rows, output.columns, config.output)
    if config.output is not None:
        logger.info(CLI_OUTPUT_TEMPLATE.format(what=f"{len(output.rows)} {name} rows", path=config.output))

    if summary_path is not None:
        write_json(output.report, summary_path, timestamp=config.timestamp)
        logger.info(CLI_OUTPUT_TEMPLATE.format(what=f"{name} summary", path=summary_path))
    elif config.output is not None:
        write_json(output.report, None, timestamp=config.timestamp)
    else:
        logger.info(f"Summary: {json.dumps(to_serializable(output.report), sort_keys=True)}")


def _execute(name: str, options: Dict[str, Any]) -> None:
    summary_path = options.pop("summary", None)
    config_path = options.pop("config_path", None)
    if options.pop("no_timestamp", False):
        options["timestamp"] = False

    try:
        config = RunConfig.load(config_path, options)
        logger.info("=" * 50)
        logger.info(f"rei-qnd {name} ({config.preset_name if name not in ('spectrum', 'dynamics') else 'normalized units'})")
        logger.info("=" * 50)
        output = COMMANDS[name](config)
        _emit(name, config, output, summary_path)
    except QndError as e:
        logger.error(CLI_ERROR_TEMPLATE.format(kind=type(e).__name__, error=e))
        logger.debug(traceback.format_exc())
        raise SystemExit(e.exit_code)


# ==============================================================================
# Commands
# ==============================================================================

@click.group()
@click.option("--verbose", "-v", is_flag=True, help="Debug logging")
def main(verbose: bool) -> None:
    """Single rare-earth ion cavity QND photon detection simulator."""
    configure_logging(verbose)


@main.command()
@run_options
def derive(**options: Any) -> None:
    """Derived cavity and coupling parameters with audit verdicts."""
    _execute("derive", options)


@main.command()
@run_options
@summary_option
@click.option("--delta-min-g", "delta_min_g", type=float, default=None, help="Lowest delta in units of g")
@click.option("--delta-max-g", "delta_max_g", type=float, default=None, help="Highest delta in units of g")
@click.option("--points", type=int, default=None, help="Samples per curve")
def spectrum(**options: Any) -> None:
    """Reflection spectra for a resonant and a detuned ion (normalized units)."""
    _execute("spectrum", options)


@main.command()
@run_options
@summary_option
@click.option("--t-p", "dynamics_t_p", type=float, default=None, help="Pulse duration in units of 1/g")
@click.option("--amplitude", "dynamics_amplitude", type=float, default=None, help="Peak input amplitude")
@click.option("--offstate-g", "dynamics_offstate_g", type=float, default=None, help="Ion detuning Delta in units of g")
@click.option("--carrier-g", "dynamics_carrier_g", type=float, default=None, help="Carrier detuning delta in units of g")
@click.option("--dt", "dynamics_dt", type=float, default=None, help="Step size in units of 1/g")
def dynamics(**options: Any) -> None:
    """Time-domain Langevin trace with a steady-state check."""
    _execute("dynamics", options)


@main.command()
@run_options
@click.option("--phi-p", "phi_p", type=float, default=None, help="Preparation rotation error (rad)")
@click.option("--phi-r", "phi_r", type=float, default=None, help="Readout rotation error (rad)")
def protocol(**options: Any) -> None:
    """Density matrices and fidelities of the detection protocol."""
    _execute("protocol", options)


@main.command()
@run_options
@click.option("--rabi-hz", "rabi_frequency_hz", type=float, default=None, help="Readout Rabi frequency Omega/2pi")
@click.option("--n-cyc", "n_cyc", type=float, default=None, help="Cycle-count override")
def readout(**options: Any) -> None:
    """Readout efficiency, cycle count and false positives."""
    _execute("readout", options)


@main.command()
@run_options
@summary_option
@click.option("--t-p-min-us", "t_p_min_us", type=float, default=None, help="Shortest scanned T_p")
@click.option("--t-p-max-us", "t_p_max_us", type=float, default=None, help="Longest scanned T_p")
@click.option("--grid-points", "grid_points", type=int, default=None, help="Number of scanned durations")
def optimize(**options: Any) -> None:
    """Fidelity against pulse duration and the optimal T_p."""
    _execute("optimize", options)


@main.command()
@run_options
def audit(**options: Any) -> None:
    """Compare every quoted figure with its recomputed value."""
    _execute("audit", options)


if __name__ == "__main__":
    main()
