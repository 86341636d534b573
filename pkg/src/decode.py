"""
Decoding module for the curved trajectory detector.
Turns simulation traces into direction, proximity, aggregate potential and seizure reports.
"""

import logging
from collections import Counter
from dataclasses import dataclass, field
from enum import Enum
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd

from config.settings import SimSettings
from spike_core import AtomicUnit, CircuitTopology, ConfigurationError, SimTrace, UnitKind

# Set up logging
logger = logging.getLogger(__name__)

Window = Tuple[int, int]


class Direction(Enum):
    LR = "LR"
    RL = "RL"
    NONE = "none"


class Proximity(Enum):
    """Proximity states; ``rank`` orders them N > M > F > none."""
    N = "N"
    M = "M"
    F = "F"
    NONE = "none"

    @property
    def rank(self) -> int:
        return {'N': 3, 'M': 2, 'F': 1, 'none': 0}[self.value]


CMD_STATES: Tuple[Proximity, Proximity, Proximity] = (Proximity.N, Proximity.M, Proximity.F)


@dataclass(frozen=True)
class ActivationPattern:
    """Fired member index (0..2) per step of one atomic unit, silent steps omitted."""
    unit_id: int
    entries: Tuple[Tuple[int, int], ...]

    @property
    def indices(self) -> List[int]:
        return [index for _, index in self.entries]

    def within(self, window: Window) -> "ActivationPattern":
        start, end = window
        return ActivationPattern(self.unit_id,
                                 tuple(e for e in self.entries if start <= e[0] < end))


@dataclass(frozen=True)
class DetectionEvent:
    """Decoded direction and proximity over the half-open step window [t_start, t_end)."""
    window: Window
    direction: Direction
    proximity: Proximity
    confidence: float

    def to_dict(self) -> Dict:
        return {
            'window': [int(self.window[0]), int(self.window[1])],
            'direction': self.direction.value,
            'proximity': self.proximity.value,
            'confidence': round(float(self.confidence), 6),
        }


@dataclass(frozen=True)
class SeizureEvent:
    """Inclusive step interval whose windowed activity exceeded the threshold."""
    t_start: int
    t_end: int
    peak: float


@dataclass(frozen=True)
class SeizureReport:
    events: Tuple[SeizureEvent, ...]
    activity_threshold: float
    window: int

    @property
    def flagged(self) -> bool:
        return bool(self.events)

    def to_dict(self) -> Dict:
        return {
            'events': [{'t_start': e.t_start, 't_end': e.t_end, 'peak': round(e.peak, 6)}
                       for e in self.events],
            'activity_threshold': self.activity_threshold,
            'window': self.window,
        }


@dataclass
class DetectionSummary:
    """Everything the CLI reports for one simulated circuit."""
    circuit: str
    direction: Direction
    confidence: float
    proximity: Proximity
    events: List[DetectionEvent]
    seizures: SeizureReport
    patterns: Dict[int, List[int]] = field(default_factory=dict)

    def to_dict(self) -> Dict:
        return {
            'circuit': self.circuit,
            'overall': {
                'direction': self.direction.value,
                'confidence': round(float(self.confidence), 6),
                'proximity': self.proximity.value,
            },
            'events': [event.to_dict() for event in self.events],
            'seizures': self.seizures.to_dict(),
            'patterns': {str(unit): indices for unit, indices in self.patterns.items()},
        }


def _unit_of_kind(topology: CircuitTopology, unit: int, kind: UnitKind) -> AtomicUnit:
    try:
        found = topology.unit(unit)
    except KeyError:
        raise ConfigurationError(f"Unknown unit {unit} in '{topology.name}'")
    if found.kind != kind:
        raise ConfigurationError(f"Unit {unit} is a {found.kind.value} unit, expected {kind.value}")
    return found


def trace_pattern(trace: SimTrace, topology: CircuitTopology, unit: int) -> ActivationPattern:
    """
    Extract the activation pattern of one atomic unit.

    Args:
        trace: Simulation trace
        topology: Topology the trace was produced from
        unit: Atomic unit id

    Returns:
        ActivationPattern: (step, member index) for every step where a member fired

    Raises:
        ConfigurationError: If ``unit`` is unknown or not a PDD unit
    """
    members = _unit_of_kind(topology, unit, UnitKind.PDD).members
    columns = [trace.index_of(m) for m in members]
    fired = trace.fired[:, columns]
    entries = []
    for t in np.flatnonzero(fired.any(axis=1)):
        # Without lateral inhibition several members may fire; keep the first
        entries.append((int(t), int(np.argmax(fired[t]))))
    return ActivationPattern(unit_id=unit, entries=tuple(entries))


def _pair_signs(pattern: ActivationPattern) -> List[int]:
    signs = []
    for a, b in zip(pattern.indices, pattern.indices[1:]):
        delta = (b - a) % 3
        if delta == 1:
            signs.append(1)
        elif delta == 2:
            signs.append(-1)
    return signs


def _direction_from_signs(signs: Sequence[int]) -> Tuple[Direction, float]:
    if not signs:
        return Direction.NONE, 0.0
    mean = float(np.mean(signs))
    if mean > 0:
        return Direction.LR, abs(mean)
    if mean < 0:
        return Direction.RL, abs(mean)
    return Direction.NONE, 0.0


def classify_direction(pattern: ActivationPattern) -> Tuple[Direction, float]:
    """
    Direction from the mean sign of consecutive index steps modulo 3.

    Args:
        pattern: Activation pattern of one PDD unit

    Returns:
        Tuple[Direction, float]: Direction and confidence |mean sign|
    """
    return _direction_from_signs(_pair_signs(pattern))


def classify_patterns(patterns: Sequence[ActivationPattern]) -> Tuple[Direction, float]:
    """Direction over the pooled consecutive pairs of several units."""
    signs: List[int] = []
    for pattern in patterns:
        signs.extend(_pair_signs(pattern))
    return _direction_from_signs(signs)


def _windows(horizon: int, window: int) -> List[Window]:
    if window < 1:
        raise ConfigurationError(f"Window must be >= 1 step, got {window}")
    return [(start, min(start + window, horizon)) for start in range(0, horizon, window)]


def decode_proximity(trace: SimTrace, topology: CircuitTopology, unit: int,
                     window: int = SimSettings.PROXIMITY_WINDOW) -> List[Tuple[Window, Proximity]]:
    """
    Highest-priority CMD state that fired in each window.

    Args:
        trace: Simulation trace
        topology: Topology the trace was produced from
        unit: CMD unit id, members ordered (N, M, F)
        window: Window length in steps

    Returns:
        List[Tuple[Window, Proximity]]: One state per consecutive window
    """
    cmd_unit = _unit_of_kind(topology, unit, UnitKind.CMD)
    columns = [trace.index_of(m) for m in cmd_unit.members]
    states = []
    for start, end in _windows(trace.horizon, window):
        fired = trace.fired[start:end, columns].any(axis=0)
        state = next((CMD_STATES[k] for k in range(3) if fired[k]), Proximity.NONE)
        states.append(((start, end), state))
    return states


def aggregate_potential(trace: SimTrace) -> pd.Series:
    """Per-step sum of all neuron potentials."""
    return pd.Series(trace.aggregate, index=pd.RangeIndex(trace.horizon, name='t'),
                     name='aggregate_potential')


def activity_fraction(trace: SimTrace) -> np.ndarray:
    """
    Fraction of neurons occupied by a spike at each step.

    A fire at t occupies steps t..t+refractory, so a neuron firing as fast
    as its refractory period allows counts as fully active.
    """
    horizon, n = trace.fired.shape
    if n == 0:
        return np.zeros(horizon)
    occupied = trace.fired.copy()
    for lag in range(1, int(trace.refractory.max(initial=0)) + 1):
        shifted = np.zeros_like(occupied)
        shifted[lag:] = trace.fired[:-lag] & (trace.refractory >= lag)
        occupied |= shifted
    return occupied.sum(axis=1) / n


def detect_seizures(trace: SimTrace, activity_threshold: float = SimSettings.SEIZURE_THRESHOLD,
                    window: int = SimSettings.SEIZURE_WINDOW) -> SeizureReport:
    """
    Flag maximal intervals where windowed activity exceeds ``activity_threshold``.

    Args:
        trace: Simulation trace
        activity_threshold: Fraction in (0, 1]
        window: Rolling window length in steps; shorter traces use one whole-trace window

    Returns:
        SeizureReport: Merged events with their peak windowed activity
    """
    if window < 1:
        raise ConfigurationError(f"Seizure window must be >= 1 step, got {window}")
    if not 0 < activity_threshold <= 1:
        raise ConfigurationError(f"Activity threshold must be in (0, 1], got {activity_threshold}")
    activity = pd.Series(activity_fraction(trace))
    span = min(window, trace.horizon)
    rolling = activity.rolling(span).mean()

    events: List[SeizureEvent] = []
    current: Optional[List] = None
    for end in np.flatnonzero((rolling > activity_threshold).to_numpy()):
        start, peak = int(end) - span + 1, float(rolling.iloc[end])
        if current is not None and start <= current[1] + 1:
            current[1] = int(end)
            current[2] = max(current[2], peak)
        else:
            if current is not None:
                events.append(SeizureEvent(*current))
            current = [start, int(end), peak]
    if current is not None:
        events.append(SeizureEvent(*current))

    if events:
        logger.warning(f"{len(events)} seizure interval(s) above activity {activity_threshold}")
    return SeizureReport(events=tuple(events), activity_threshold=activity_threshold, window=span)


def decode_coincidence_direction(trace: SimTrace, topology: CircuitTopology,
                                 window: Optional[Window] = None) -> Tuple[Direction, float]:
    """
    Direction from the level-C fires of Braitenberg coincidence detectors.

    Args:
        trace: Simulation trace
        topology: Baseline topology with ``<tag>.C.<pair>`` labels
        window: Optional half-open step window

    Returns:
        Tuple[Direction, float]: Dominant tag and |LR - RL| / (LR + RL)
    """
    start, end = window if window is not None else (0, trace.horizon)
    counts = {Direction.LR: 0, Direction.RL: 0}
    for spec in topology.neurons:
        parts = spec.label.split('.')
        if len(parts) == 3 and parts[1] == 'C' and parts[0] in ('LR', 'RL'):
            column = trace.index_of(spec.id)
            counts[Direction(parts[0])] += int(trace.fired[start:end, column].sum())
    total = counts[Direction.LR] + counts[Direction.RL]
    if total == 0 or counts[Direction.LR] == counts[Direction.RL]:
        return Direction.NONE, 0.0
    winner = Direction.LR if counts[Direction.LR] > counts[Direction.RL] else Direction.RL
    return winner, abs(counts[Direction.LR] - counts[Direction.RL]) / total


def check_trace_invariants(trace: SimTrace, topology: CircuitTopology) -> List[str]:
    """
    Check winner-take-all and potential bookkeeping over a full trace.

    Args:
        trace: Simulation trace
        topology: Topology the trace was produced from

    Returns:
        List[str]: One message per breach; empty when the trace is sound
    """
    breaches: List[str] = []
    inhibited = {(s.pre, s.post) for s in topology.synapses if s.weight < 0 and not s.from_sensor}
    for unit in topology.atomic_units:
        # Only units with lateral inhibition promise a single winner
        if not any((a, b) in inhibited for a in unit.members for b in unit.members):
            continue
        columns = [trace.index_of(m) for m in unit.members]
        crowded = np.flatnonzero(trace.fired[:, columns].sum(axis=1) > 1)
        if len(crowded):
            breaches.append(f"unit {unit.unit_id} ({unit.kind.value}): "
                            f"{len(crowded)} steps with more than one winner, first at t={crowded[0]}")

    drift = np.abs(trace.aggregate - trace.potentials.sum(axis=1))
    if np.any(drift > SimSettings.AGGREGATE_TOLERANCE):
        breaches.append(f"aggregate potential drifts by up to {drift.max():.3g}")
    if np.any(trace.potentials < 0):
        breaches.append("negative potential")
    for breach in breaches:
        logger.error(f"Trace invariant breach: {breach}")
    return breaches


def _overall_proximity(events: Sequence[DetectionEvent]) -> Proximity:
    active = [e.proximity for e in events if e.proximity != Proximity.NONE]
    if not active:
        return Proximity.NONE
    counts = Counter(active)
    return max(counts, key=lambda state: (counts[state], state.rank))


def summarize(trace: SimTrace, topology: CircuitTopology,
              proximity_window: int = SimSettings.PROXIMITY_WINDOW,
              seizure_threshold: float = SimSettings.SEIZURE_THRESHOLD,
              seizure_window: int = SimSettings.SEIZURE_WINDOW) -> DetectionSummary:
    """
    Decode a trace into per-window detection events and a seizure report.

    Circuits with PDD units report the pooled sawtooth direction; coincidence
    baselines report the dominant level-C tag. Proximity is the highest-priority
    state over all CMD units in each window.

    Args:
        trace: Simulation trace
        topology: Topology the trace was produced from
        proximity_window: Window length in steps for events
        seizure_threshold: Activity fraction flagged as a seizure
        seizure_window: Rolling window for seizure detection

    Returns:
        DetectionSummary: Overall and per-window detections
    """
    pdd_units = topology.units_of_kind(UnitKind.PDD)
    cmd_units = topology.units_of_kind(UnitKind.CMD)
    patterns = [trace_pattern(trace, topology, u.unit_id) for u in pdd_units]
    proximity = {u.unit_id: decode_proximity(trace, topology, u.unit_id, proximity_window)
                 for u in cmd_units}

    def direction_in(window: Optional[Window]) -> Tuple[Direction, float]:
        if patterns:
            if window is None:
                return classify_patterns(patterns)
            return classify_patterns([p.within(window) for p in patterns])
        return decode_coincidence_direction(trace, topology, window)

    events = []
    for k, window in enumerate(_windows(trace.horizon, proximity_window)):
        states = [proximity[u.unit_id][k][1] for u in cmd_units]
        state = max(states, key=lambda s: s.rank, default=Proximity.NONE)
        direction, confidence = direction_in(window)
        events.append(DetectionEvent(window=window, direction=direction, proximity=state,
                                     confidence=confidence))

    direction, confidence = direction_in(None)
    summary = DetectionSummary(
        circuit=topology.name,
        direction=direction,
        confidence=confidence,
        proximity=_overall_proximity(events),
        events=events,
        seizures=detect_seizures(trace, seizure_threshold, seizure_window),
        patterns={p.unit_id: p.indices for p in patterns},
    )
    logger.info(f"{topology.name}: direction={direction.value} ({confidence:.2f}), "
                f"proximity={summary.proximity.value}, seizures={len(summary.seizures.events)}")
    return summary
