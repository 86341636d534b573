"""
Reporting module for the curved trajectory detector.
Handles trace, spike, potential, detection, raster and parameter artifacts.
"""

import io
import json
import logging
from pathlib import Path
from typing import Dict, List, Optional, Union

import numpy as np
import pandas as pd
from jsonschema import validate as validate_schema
from matplotlib import rc_context
from matplotlib.figure import Figure

from circuits import CmdParams
from config.constants import ArtifactSchemas, RasterConstants
from config.settings import SimSettings
from decode import DetectionSummary, aggregate_potential
from spike_core import CircuitTopology, SimTrace

# Set up logging
logger = logging.getLogger(__name__)

PRECISION = 12


def frame_record(trace: SimTrace, t: int) -> Dict:
    """JSON-ready form of one TraceFrame."""
    frame = trace[t]
    return {
        't': frame.t,
        'fired': sorted(frame.fired),
        'potentials': {str(nid): round(v, PRECISION) for nid, v in frame.potentials.items()},
        'aggregate_potential': round(frame.aggregate_potential, PRECISION),
    }


def spikes_frame(trace: SimTrace) -> pd.DataFrame:
    """One row per sensor spike: t, sensor, spike."""
    rows = [(t, sensor_id, 1)
            for t in range(trace.horizon)
            for k, sensor_id in enumerate(trace.sensor_ids)
            if trace.sensor_spikes[t, k]]
    return pd.DataFrame(rows, columns=['t', 'sensor', 'spike'])


class ArtifactWriter:
    """Writes simulation artifacts into one output directory."""

    def __init__(self, output_dir: Union[str, Path]):
        """
        Initialize the writer.

        Args:
            output_dir: Directory for the artifacts; created if missing
        """
        self.output_dir = Path(output_dir)
        self.output_dir.mkdir(parents=True, exist_ok=True)
        self.written: Dict[str, Path] = {}
        logger.info(f"Artifact writer initialized for {self.output_dir}")

    def _path(self, kind: str) -> Path:
        path = self.output_dir / SimSettings.ARTIFACT_FILES[kind]
        self.written[kind] = path
        return path

    @staticmethod
    def check(document: Dict, schema: Dict) -> Dict:
        """Validate ``document`` against ``schema`` and return it."""
        validate_schema(instance=document, schema=schema)
        return document

    def write_trace(self, trace: SimTrace) -> Path:
        """Write trace.jsonl, one TraceFrame per line."""
        path = self._path('trace')
        with open(path, 'w', newline='\n') as f:
            for t in range(trace.horizon):
                f.write(json.dumps(frame_record(trace, t), separators=(',', ':')))
                f.write('\n')
        logger.info(f"Wrote {trace.horizon} frames to {path}")
        return path

    def write_spikes(self, trace: SimTrace) -> Path:
        path = self._path('spikes')
        spikes_frame(trace).to_csv(path, index=False, lineterminator='\n')
        return path

    def write_potential(self, trace: SimTrace) -> Path:
        path = self._path('potential')
        series = aggregate_potential(trace).round(PRECISION)
        series.to_frame().to_csv(path, lineterminator='\n')
        return path

    def write_detections(self, summary: DetectionSummary) -> Path:
        """Write detections.json after checking it against the detections schema."""
        path = self._path('report')
        document = self.check(summary.to_dict(), ArtifactSchemas.DETECTIONS)
        self._dump(path, document)
        logger.info(f"Wrote detections for {summary.circuit} to {path}")
        return path

    def write_params(self, params: CmdParams, measured: Optional[Dict] = None,
                     passed: Optional[bool] = None, path: Optional[Union[str, Path]] = None) -> Path:
        """
        Write cmd_params.json.

        Args:
            params: Calibrated parameters
            measured: Measured band boundaries and sweep
            passed: Verification outcome
            path: Explicit file path instead of the output directory default

        Returns:
            Path: The written file
        """
        document = params.to_dict()
        if measured is not None:
            document['measured'] = measured
        if passed is not None:
            document['passed'] = bool(passed)
        self.check(document, ArtifactSchemas.CMD_PARAMS)
        target = Path(path) if path is not None else self._path('params')
        target.parent.mkdir(parents=True, exist_ok=True)
        self._dump(target, document)
        self.written['params'] = target
        logger.info(f"Wrote CMD parameters to {target}")
        return target

    def write_comparison(self, comparison: Dict) -> Path:
        path = self._path('compare')
        self._dump(path, comparison)
        return path

    def write_raster(self, trace: SimTrace, topology: CircuitTopology) -> Path:
        path = self._path('raster')
        with open(path, 'w', newline='\n') as f:
            f.write(render_raster(trace, topology))
        logger.info(f"Wrote raster to {path}")
        return path

    @staticmethod
    def _dump(path: Path, document: Dict):
        with open(path, 'w', newline='\n') as f:
            json.dump(document, f, indent=2)
            f.write('\n')


def _row_category(label: str) -> str:
    if label.startswith('PDD'):
        return 'pdd'
    if label.startswith('CMD'):
        return 'cmd'
    if label.startswith(('LR.', 'RL.')):
        return 'baseline'
    return 'other'


def render_raster(trace: SimTrace, topology: CircuitTopology) -> str:
    """
    Render a spike raster as SVG: one row per sensor then per neuron, time along x.

    Each row is drawn as one marker line whose SVG group id is
    ``<category>-<label>``; every spike is one ``use`` element inside it.

    Args:
        trace: Simulation trace
        topology: Topology supplying neuron labels

    Returns:
        str: SVG document
    """
    c = RasterConstants
    labels = {spec.id: spec.label or f"n{spec.id}" for spec in topology.neurons}
    rows: List = [(sid, 'sensor', trace.sensor_spikes[:, k]) for k, sid in enumerate(trace.sensor_ids)]
    rows += [(labels.get(nid, f"n{nid}"), _row_category(labels.get(nid, '')), trace.fired[:, i])
             for i, nid in enumerate(trace.neuron_ids)]

    width = min(c.MAX_WIDTH, max(c.MIN_WIDTH, trace.horizon / c.STEPS_PER_INCH))
    height = max(1.5, (len(rows) + 2) * c.ROW_HEIGHT)
    fig = Figure(figsize=(width, height))
    ax = fig.add_subplot()
    for r, (label, category, column) in enumerate(rows):
        times = np.flatnonzero(column)
        ax.axhline(r, color=c.COLORS['grid'], linewidth=0.5, zorder=0)
        ax.plot(times, np.full(len(times), r), linestyle='none', marker='|',
                markersize=c.MARKER_SIZE, markeredgewidth=c.MARKER_WIDTH,
                color=c.COLORS[category], gid=f"{category}-{label}")

    ax.set_xlim(-1, trace.horizon)
    ax.set_ylim(len(rows) - 0.5, -0.5)
    ax.set_yticks(range(len(rows)))
    ax.set_yticklabels([str(label) for label, _, _ in rows], fontsize=c.FONT_SIZE,
                       color=c.COLORS['text'])
    ax.tick_params(axis='x', labelsize=c.FONT_SIZE)
    ax.set_xlabel('t (steps)', fontsize=c.FONT_SIZE)
    ax.set_title(f"{topology.name} spike raster", fontsize=c.FONT_SIZE + 1)
    fig.tight_layout()

    buffer = io.StringIO()
    with rc_context({'svg.hashsalt': c.HASH_SALT, 'svg.fonttype': 'none'}):
        fig.savefig(buffer, format='svg', metadata={'Date': None})
    return buffer.getvalue()
