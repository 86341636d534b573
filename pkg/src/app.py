"""
Curved Trajectory Detector - Main Application
Command-line entry point wiring scenarios through circuits, simulation, decoding and calibration.
"""

import json
import logging
import os
import sys
from pathlib import Path
from typing import Dict, List, Optional

import pandas as pd
import typer

# Add src directory to path for imports
sys.path.append(os.path.dirname(os.path.abspath(__file__)))

from circuits import CmdParams, build_circuit
from config.config_loader import get_config
from config.settings import SimSettings
from decode import check_trace_invariants, summarize
from reporting import ArtifactWriter
from scenario import Scenario, direction_regime, encode, load_scenario
from spike_core import (BindingError, CalibrationError, ConfigurationError,
                        ScenarioError, TopologyError, run)
from tuning import BandSpec, calibrate, verify_bands

logger = logging.getLogger(__name__)

app = typer.Typer(name=SimSettings.APP_NAME, help=SimSettings.APP_SUBTITLE, add_completion=False,
                  no_args_is_help=True)

INPUT_ERRORS = (ScenarioError, ConfigurationError, BindingError, TopologyError, ValueError)
PDD_CIRCUITS = ('ctd', 'ctd-ablated', 'pdd-only')


def setup_logging(verbose: bool = False):
    """Configure the root logger from config once per invocation."""
    logging_config = get_config().get_logging_config()
    level = 'DEBUG' if verbose else logging_config.get('level', SimSettings.LOG_LEVEL)
    logging.basicConfig(level=getattr(logging, str(level).upper(), logging.INFO),
                        format=logging_config.get('format', SimSettings.LOG_FORMAT),
                        force=True)


def _fail(message: str, code: int):
    logger.error(message)
    typer.echo(f"Error: {message}", err=True)
    raise typer.Exit(code)


def load_params_file(path: str) -> CmdParams:
    """Load CMD parameters written by ``tune`` (or by hand)."""
    params_path = Path(path)
    if not params_path.is_file():
        raise ConfigurationError(f"Parameter file not found: {params_path}")
    try:
        with open(params_path, 'r') as f:
            data = json.load(f)
    except json.JSONDecodeError as e:
        raise ConfigurationError(f"Parameter file {params_path} is not valid JSON: {e}")
    return CmdParams.from_dict(data).validate()


def resolve_params(params_file: Optional[str], params_source: str) -> CmdParams:
    """
    Pick CMD parameters from a file, the configured defaults, or a fresh calibration.

    Args:
        params_file: Optional path to a cmd_params.json
        params_source: 'default' or 'tune' when no file is given

    Returns:
        CmdParams: Parameters for the CTD variants
    """
    cfg = get_config()
    if params_file:
        return load_params_file(params_file)
    if params_source == 'default':
        return CmdParams.from_dict(cfg.get('cmd', CmdParams().to_dict())).validate()
    if params_source == 'tune':
        bands = cfg.get_band_config()
        scenario_cfg = cfg.get_scenario_config()
        spec = BandSpec(f1=bands.get('f1', SimSettings.BAND_F1_HZ),
                        f2=bands.get('f2', SimSettings.BAND_F2_HZ),
                        tolerance=bands.get('tolerance', SimSettings.BAND_TOLERANCE),
                        rate_min=scenario_cfg.get('rate_min', SimSettings.RATE_MIN_HZ),
                        rate_max=scenario_cfg.get('rate_max', SimSettings.RATE_MAX_HZ))
        engine = cfg.get_engine_config()
        return calibrate(spec, leak=engine.get('cmd_leak', SimSettings.CMD_LEAK),
                         dt=engine.get('dt', SimSettings.DT_SECONDS))
    raise ConfigurationError(f"Unknown params source '{params_source}'; use default or tune")


def simulate_circuit(scenario: Scenario, circuit: str, params: Optional[CmdParams],
                     branch_delay: int, proximity_window: int, seizure_threshold: float,
                     seizure_window: int):
    """Build ``circuit`` for the scenario, run it and decode the trace."""
    engine_cfg = get_config().get_engine_config()
    topology = build_circuit(circuit, num_sensors=scenario.layout.num_sensors, params=params,
                             branch_delay=branch_delay,
                             pdd_leak=engine_cfg.get('pdd_leak', SimSettings.PDD_LEAK),
                             cmd_leak=engine_cfg.get('cmd_leak', SimSettings.CMD_LEAK),
                             refractory=engine_cfg.get('refractory', SimSettings.DEFAULT_REFRACTORY))
    if circuit in PDD_CIRCUITS:
        regime = direction_regime(scenario)
        if not regime.valid:
            logger.warning(f"Direction of '{scenario.name}' may not decode: {regime.reason}")
    trace = run(topology, encode(scenario), scenario.horizon, scenario.seed)
    breaches = check_trace_invariants(trace, topology)
    summary = summarize(trace, topology, proximity_window=proximity_window,
                        seizure_threshold=seizure_threshold, seizure_window=seizure_window)
    return topology, trace, summary, breaches


def _needs_params(circuits: List[str]) -> bool:
    return any(name.startswith('ctd') for name in circuits)


def _decode_option(name: str, value, fallback):
    return value if value is not None else get_config().get_decode_config().get(name, fallback)


def _show_version(value: bool):
    if value:
        typer.echo(f"{SimSettings.APP_NAME} {SimSettings.VERSION}")
        raise typer.Exit(SimSettings.EXIT_OK)


@app.callback()
def main(verbose: bool = typer.Option(False, '--verbose', '-v', help="Log at DEBUG level"),
         version: bool = typer.Option(False, '--version', callback=_show_version, is_eager=True,
                                      help="Show the version and exit")):
    """Spiking curved trajectory detector simulator."""
    setup_logging(verbose)


@app.command()
def simulate(
    scenario: str = typer.Option(..., '--scenario', help="Scenario JSON file"),
    circuit: str = typer.Option('ctd', '--circuit', help="ctd | pdd-only | braitenberg-lr | ..."),
    params: Optional[str] = typer.Option(None, '--params', help="cmd_params.json to use"),
    params_source: str = typer.Option('tune', '--params-source', help="default | tune"),
    out: Optional[str] = typer.Option(None, '--out', help="Output directory"),
    emit: Optional[str] = typer.Option(None, '--emit', help="Comma list of trace, raster, report"),
    seizure_threshold: Optional[float] = typer.Option(None, '--seizure-threshold'),
    seizure_window: Optional[int] = typer.Option(None, '--seizure-window'),
    proximity_window: Optional[int] = typer.Option(None, '--proximity-window'),
    branch_delay: int = typer.Option(SimSettings.BRANCH_DELAY, '--branch-delay'),
):
    """Simulate one circuit on a scenario and write its artifacts."""
    cfg = get_config()
    try:
        if circuit not in SimSettings.CIRCUIT_CHOICES:
            raise ConfigurationError(f"Unknown circuit '{circuit}'; choose from {SimSettings.CIRCUIT_CHOICES}")
        emit_items = SimSettings.parse_emit(emit) if emit is not None else list(
            cfg.get('output.emit', SimSettings.DEFAULT_EMIT))
        loaded = load_scenario(scenario, cfg.get_scenario_config())
        cmd_params = resolve_params(params, params_source) if _needs_params([circuit]) else None
        topology, trace, summary, breaches = simulate_circuit(
            loaded, circuit, cmd_params, branch_delay,
            _decode_option('proximity_window', proximity_window, SimSettings.PROXIMITY_WINDOW),
            _decode_option('seizure_threshold', seizure_threshold, SimSettings.SEIZURE_THRESHOLD),
            _decode_option('seizure_window', seizure_window, SimSettings.SEIZURE_WINDOW))
    except CalibrationError as e:
        _fail(f"Calibration failed: {e}", SimSettings.EXIT_INFEASIBLE_TUNING)
    except INPUT_ERRORS as e:
        _fail(str(e), SimSettings.EXIT_INPUT_ERROR)

    try:
        writer = ArtifactWriter(out or cfg.get('output.directory', 'out'))
        writer.write_spikes(trace)
        writer.write_potential(trace)
        if 'trace' in emit_items:
            writer.write_trace(trace)
        if 'report' in emit_items:
            writer.write_detections(summary)
        if 'raster' in emit_items:
            writer.write_raster(trace, topology)
    except OSError as e:
        _fail(f"Cannot write artifacts: {e}", SimSettings.EXIT_INPUT_ERROR)

    if breaches:
        _fail(f"Simulation invariant breach: {breaches}", SimSettings.EXIT_INVARIANT_BREACH)
    typer.echo(f"{topology.name}: direction={summary.direction.value} "
               f"(confidence {summary.confidence:.2f}), proximity={summary.proximity.value}, "
               f"seizures={len(summary.seizures.events)}")
    for kind, path in writer.written.items():
        typer.echo(f"  {kind}: {path}")


@app.command()
def tune(
    f1: float = typer.Option(SimSettings.BAND_F1_HZ, '--f1', help="F/M boundary in spikes/s"),
    f2: float = typer.Option(SimSettings.BAND_F2_HZ, '--f2', help="M/N boundary in spikes/s"),
    tolerance: float = typer.Option(SimSettings.BAND_TOLERANCE, '--tolerance'),
    out: Optional[str] = typer.Option(None, '--out', help="Output parameter file"),
    points: Optional[int] = typer.Option(None, '--points', help="Sweep points for verification"),
):
    """Calibrate CMD weights for the given bands and verify them by sweep."""
    cfg = get_config()
    engine = cfg.get_engine_config()
    scenario_cfg = cfg.get_scenario_config()
    leak = engine.get('cmd_leak', SimSettings.CMD_LEAK)
    dt = engine.get('dt', SimSettings.DT_SECONDS)
    bands = BandSpec(f1=f1, f2=f2, tolerance=tolerance,
                     rate_min=scenario_cfg.get('rate_min', SimSettings.RATE_MIN_HZ),
                     rate_max=scenario_cfg.get('rate_max', SimSettings.RATE_MAX_HZ))
    try:
        params = calibrate(bands, leak=leak, dt=dt)
    except CalibrationError as e:
        _fail(f"Infeasible bands ({e.constraint}): {e}", SimSettings.EXIT_INFEASIBLE_TUNING)

    report = verify_bands(params, bands, leak=leak, dt=dt,
                          points=points or cfg.get('bands.sweep_points', SimSettings.SWEEP_POINTS),
                          horizon=engine.get('horizon', SimSettings.SWEEP_HORIZON),
                          include_uninhibited=False)
    target = Path(out) if out else Path(cfg.get('output.directory', 'out')) / SimSettings.ARTIFACT_FILES['params']
    try:
        writer = ArtifactWriter(target.parent)
        writer.write_params(params, measured=report.to_dict(), passed=report.passed, path=target)
    except OSError as e:
        _fail(f"Cannot write artifacts: {e}", SimSettings.EXIT_INPUT_ERROR)

    typer.echo(report.to_frame().to_string(index=False))
    typer.echo(f"W={params.weights} T={params.thresholds} "
               f"f1={report.measured_f1} f2={report.measured_f2} passed={report.passed}")
    if not report.passed:
        _fail("Calibrated parameters failed band verification", SimSettings.EXIT_INVARIANT_BREACH)


@app.command()
def compare(
    scenario: str = typer.Option(..., '--scenario', help="Scenario JSON file"),
    out: Optional[str] = typer.Option(None, '--out', help="Output directory"),
    params: Optional[str] = typer.Option(None, '--params', help="cmd_params.json to use"),
    params_source: str = typer.Option('tune', '--params-source', help="default | tune"),
    seizure_threshold: Optional[float] = typer.Option(None, '--seizure-threshold'),
    seizure_window: Optional[int] = typer.Option(None, '--seizure-window'),
    proximity_window: Optional[int] = typer.Option(None, '--proximity-window'),
    branch_delay: int = typer.Option(SimSettings.BRANCH_DELAY, '--branch-delay'),
):
    """Run the Braitenberg baselines and the CTD side by side on one scenario."""
    cfg = get_config()
    circuits = SimSettings.COMPARE_CIRCUITS
    rows: List[Dict] = []
    reports: Dict[str, Dict] = {}
    breaches: List[str] = []
    try:
        loaded = load_scenario(scenario, cfg.get_scenario_config())
        cmd_params = resolve_params(params, params_source) if _needs_params(circuits) else None
        for circuit in circuits:
            _, _, summary, circuit_breaches = simulate_circuit(
                loaded, circuit, cmd_params, branch_delay,
                _decode_option('proximity_window', proximity_window, SimSettings.PROXIMITY_WINDOW),
                _decode_option('seizure_threshold', seizure_threshold, SimSettings.SEIZURE_THRESHOLD),
                _decode_option('seizure_window', seizure_window, SimSettings.SEIZURE_WINDOW))
            breaches.extend(f"{circuit}: {b}" for b in circuit_breaches)
            reports[circuit] = summary.to_dict()
            peaks = [e.peak for e in summary.seizures.events]
            rows.append({
                'circuit': circuit,
                'direction': summary.direction.value,
                'confidence': round(summary.confidence, 3),
                'proximity': summary.proximity.value,
                'seizures': len(summary.seizures.events),
                'peak_activity': round(max(peaks), 3) if peaks else 0.0,
            })
    except CalibrationError as e:
        _fail(f"Calibration failed: {e}", SimSettings.EXIT_INFEASIBLE_TUNING)
    except INPUT_ERRORS as e:
        _fail(str(e), SimSettings.EXIT_INPUT_ERROR)

    try:
        writer = ArtifactWriter(out or cfg.get('output.directory', 'out'))
        writer.write_comparison({'scenario': loaded.name, 'table': rows, 'reports': reports})
    except OSError as e:
        _fail(f"Cannot write artifacts: {e}", SimSettings.EXIT_INPUT_ERROR)
    typer.echo(pd.DataFrame(rows).to_string(index=False))
    if breaches:
        _fail(f"Simulation invariant breach: {breaches}", SimSettings.EXIT_INVARIANT_BREACH)


if __name__ == "__main__":
    app()
