"""
Spiking core module for the curved trajectory detector.
Discrete-time engine for threshold/leaky neurons joined by signed, delayed synapses.
"""

import logging
import re
from collections import deque
from dataclasses import dataclass, field
from enum import Enum
from typing import Deque, Dict, FrozenSet, Iterable, Iterator, List, Optional, Sequence, Tuple, Union

import numpy as np

from config.settings import SimSettings

logger = logging.getLogger(__name__)

SourceId = Union[int, str]


class CircuitError(Exception):
    """Base class for simulator errors."""


class ConfigurationError(CircuitError):
    """Invalid parameters, coarse timestep, or state/topology mismatch."""


class BindingError(CircuitError):
    """A sensor id is unknown to the topology."""


class TopologyError(CircuitError):
    """A topology or circuit parameter set breaks its invariants."""


class CalibrationError(CircuitError):
    """No CMD parameter set satisfies the requested bands."""

    def __init__(self, message: str, constraint: str = ""):
        super().__init__(message)
        self.constraint = constraint


class ScenarioError(CircuitError):
    """A scenario file cannot be read or does not match the schema."""


class UnitKind(Enum):
    """Kinds of 3-neuron atomic units."""
    PDD = "PDD"
    CMD = "CMD"


@dataclass(frozen=True)
class NeuronSpec:
    """A threshold neuron with per-step leak and refractory period."""
    id: int
    threshold: float
    leak: float = 0.0
    refractory: int = SimSettings.DEFAULT_REFRACTORY
    reset_potential: float = 0.0
    label: str = ""


@dataclass(frozen=True)
class Synapse:
    """Signed, delayed connection. A string ``pre`` names a sensor, an int a neuron."""
    pre: SourceId
    post: int
    weight: float
    delay: int = 0

    @property
    def from_sensor(self) -> bool:
        return isinstance(self.pre, str)


@dataclass(frozen=True)
class SpikeTrain:
    """Ordered spike steps emitted by one source."""
    source: str
    times: Tuple[int, ...]
    horizon: int

    def __post_init__(self):
        times = tuple(int(t) for t in self.times)
        object.__setattr__(self, 'times', times)
        if any(b <= a for a, b in zip(times, times[1:])):
            raise ConfigurationError(f"Spike train {self.source}: times must be strictly increasing")
        if times and (times[0] < 0 or times[-1] >= self.horizon):
            raise ConfigurationError(f"Spike train {self.source}: times must lie in [0, {self.horizon})")

    def __len__(self) -> int:
        return len(self.times)

    def to_array(self, horizon: Optional[int] = None) -> np.ndarray:
        """Dense boolean vector of length ``horizon`` (defaults to the train's own)."""
        horizon = self.horizon if horizon is None else horizon
        dense = np.zeros(horizon, dtype=bool)
        times = [t for t in self.times if t < horizon]
        dense[times] = True
        return dense


@dataclass(frozen=True)
class AtomicUnit:
    """A 3-neuron building block; member order is significant."""
    unit_id: int
    kind: UnitKind
    members: Tuple[int, ...]


@dataclass(frozen=True)
class CircuitTopology:
    """Neurons, synapses, atomic units and sensor bindings of a circuit."""
    neurons: Tuple[NeuronSpec, ...]
    synapses: Tuple[Synapse, ...]
    atomic_units: Tuple[AtomicUnit, ...] = ()
    sensor_bindings: Dict[str, Tuple[int, ...]] = field(default_factory=dict)
    name: str = "custom"

    def neuron_ids(self) -> List[int]:
        return sorted(n.id for n in self.neurons)

    def neuron(self, neuron_id: int) -> NeuronSpec:
        for spec in self.neurons:
            if spec.id == neuron_id:
                return spec
        raise KeyError(neuron_id)

    def unit(self, unit_id: int) -> AtomicUnit:
        for unit in self.atomic_units:
            if unit.unit_id == unit_id:
                return unit
        raise KeyError(unit_id)

    def units_of_kind(self, kind: UnitKind) -> List[AtomicUnit]:
        return [u for u in self.atomic_units if u.kind == kind]

    def sensor_ids(self) -> List[str]:
        return sorted(self.sensor_bindings, key=sensor_sort_key)

    def summary(self) -> Dict[str, int]:
        return {
            'neurons': len(self.neurons),
            'synapses': len(self.synapses),
            'units': len(self.atomic_units),
            'sensors': len(self.sensor_bindings),
        }


@dataclass(frozen=True)
class TraceFrame:
    """State of the circuit after one synchronous update."""
    t: int
    fired: FrozenSet[int]
    potentials: Dict[int, float]
    aggregate_potential: float


@dataclass
class SimTrace:
    """Dense record of a run; indexing yields TraceFrames."""
    neuron_ids: Tuple[int, ...]
    fired: np.ndarray            # (horizon, neurons) bool
    potentials: np.ndarray       # (horizon, neurons) float
    aggregate: np.ndarray        # (horizon,) float
    refractory: np.ndarray       # (neurons,) int
    sensor_ids: Tuple[str, ...]
    sensor_spikes: np.ndarray    # (horizon, sensors) bool
    seed: int = 0

    def __len__(self) -> int:
        return self.fired.shape[0]

    def __getitem__(self, t: int) -> TraceFrame:
        if t < 0:
            t += len(self)
        row = self.potentials[t]
        return TraceFrame(
            t=int(t),
            fired=frozenset(self.neuron_ids[i] for i in np.flatnonzero(self.fired[t])),
            potentials={nid: float(row[i]) for i, nid in enumerate(self.neuron_ids)},
            aggregate_potential=float(self.aggregate[t]),
        )

    def __iter__(self) -> Iterator[TraceFrame]:
        for t in range(len(self)):
            yield self[t]

    @property
    def horizon(self) -> int:
        return len(self)

    def index_of(self, neuron_id: int) -> int:
        return self.neuron_ids.index(neuron_id)

    def fire_times(self, neuron_id: int) -> List[int]:
        """Steps at which ``neuron_id`` fired."""
        return [int(t) for t in np.flatnonzero(self.fired[:, self.index_of(neuron_id)])]


def sensor_sort_key(sensor_id: str) -> Tuple[str, int]:
    """Natural ordering so S2 sorts before S10."""
    match = re.match(r"^(.*?)(\d+)$", sensor_id)
    if match:
        return match.group(1), int(match.group(2))
    return sensor_id, -1


def validate(topology: CircuitTopology) -> List[str]:
    """
    Check a topology against the type invariants.

    Args:
        topology: Circuit to check

    Returns:
        List[str]: One message per violation; empty when the topology is well formed
    """
    violations: List[str] = []
    seen: Dict[int, int] = {}
    for spec in topology.neurons:
        seen[spec.id] = seen.get(spec.id, 0) + 1
        if not spec.threshold > 0:
            violations.append(f"neuron {spec.id}: threshold must be > 0")
        if not 0.0 <= spec.leak <= 1.0:
            violations.append(f"neuron {spec.id}: leak outside [0, 1]")
        if spec.refractory < 0:
            violations.append(f"neuron {spec.id}: negative refractory")
    for neuron_id, count in seen.items():
        if count > 1:
            violations.append(f"neuron {neuron_id}: duplicate id")

    known = set(seen)
    for syn in topology.synapses:
        name = f"synapse {syn.pre}->{syn.post}"
        if syn.weight == 0:
            violations.append(f"{name}: zero weight")
        if syn.delay < 0:
            violations.append(f"{name}: negative delay")
        if syn.post not in known:
            violations.append(f"{name}: unknown post neuron")
        if syn.from_sensor:
            if syn.pre not in topology.sensor_bindings:
                violations.append(f"{name}: unbound sensor")
            elif syn.post not in topology.sensor_bindings[syn.pre]:
                violations.append(f"{name}: post missing from sensor binding")
        elif syn.pre not in known:
            violations.append(f"{name}: unknown pre neuron")

    sensor_targets = {(s.pre, s.post) for s in topology.synapses if s.from_sensor}
    for sensor_id, targets in topology.sensor_bindings.items():
        for neuron_id in targets:
            if neuron_id not in known:
                violations.append(f"sensor {sensor_id}: bound to unknown neuron {neuron_id}")
            elif (sensor_id, neuron_id) not in sensor_targets:
                violations.append(f"sensor {sensor_id}: binding to {neuron_id} has no synapse")

    membership: Dict[int, int] = {}
    unit_ids = set()
    for unit in topology.atomic_units:
        if unit.unit_id in unit_ids:
            violations.append(f"unit {unit.unit_id}: duplicate unit id")
        unit_ids.add(unit.unit_id)
        if len(unit.members) != 3:
            violations.append(f"unit {unit.unit_id} ({unit.kind.value}): unit size ≠ 3")
        for member in unit.members:
            if member not in known:
                violations.append(f"unit {unit.unit_id}: unknown member {member}")
            if member in membership:
                violations.append(
                    f"unit {unit.unit_id}: neuron {member} already in unit {membership[member]}")
            else:
                membership[member] = unit.unit_id
    return violations


class SpikeEngine:
    """Compiled, synchronous discrete-time simulator for one topology."""

    def __init__(self, topology: CircuitTopology):
        """Compile the topology into dense per-delay weight matrices."""
        self.topology = topology
        self.neuron_ids: Tuple[int, ...] = tuple(topology.neuron_ids())
        self.sensor_ids: Tuple[str, ...] = tuple(topology.sensor_ids())
        self._index = {nid: i for i, nid in enumerate(self.neuron_ids)}
        self._sensor_index = {sid: i for i, sid in enumerate(self.sensor_ids)}

        if len(self._index) != len(topology.neurons):
            raise ConfigurationError("Duplicate neuron ids in topology")

        n = len(self.neuron_ids)
        specs = [topology.neuron(nid) for nid in self.neuron_ids]
        self.thresholds = np.array([s.threshold for s in specs], dtype=float)
        self.leaks = np.array([s.leak for s in specs], dtype=float)
        self.refractory = np.array([s.refractory for s in specs], dtype=int)
        self.reset = np.array([s.reset_potential for s in specs], dtype=float)

        self.neuron_weights: Dict[int, np.ndarray] = {}
        self.sensor_weights: Dict[int, np.ndarray] = {}
        for syn in topology.synapses:
            if syn.post not in self._index:
                raise ConfigurationError(f"Synapse targets unknown neuron {syn.post}")
            post = self._index[syn.post]
            if syn.from_sensor:
                if syn.pre not in self._sensor_index:
                    raise BindingError(f"Synapse source {syn.pre} is not a bound sensor")
                matrix = self.sensor_weights.setdefault(
                    syn.delay, np.zeros((n, len(self.sensor_ids))))
                matrix[post, self._sensor_index[syn.pre]] += syn.weight
            else:
                if syn.pre not in self._index:
                    raise ConfigurationError(f"Synapse source {syn.pre} is not a neuron")
                matrix = self.neuron_weights.setdefault(syn.delay, np.zeros((n, n)))
                matrix[post, self._index[syn.pre]] += syn.weight

        self._neuron_delays = sorted(self.neuron_weights)
        self._sensor_delays = sorted(self.sensor_weights)
        self.neuron_depth = (max(self._neuron_delays) + 1) if self._neuron_delays else 0
        self.sensor_depth = (max(self._sensor_delays) + 1) if self._sensor_delays else 0
        self._tie_groups = self._compile_tie_groups()

        logger.debug(f"Spike engine compiled for '{topology.name}': {n} neurons, "
                     f"{len(topology.synapses)} synapses")

    def _compile_tie_groups(self) -> List[Tuple[List[int], FrozenSet[Tuple[int, int]]]]:
        """Units whose members inhibit each other without delay, in member order."""
        inhibits = {(self._index[s.pre], self._index[s.post])
                    for s in self.topology.synapses
                    if not s.from_sensor and s.weight < 0 and s.delay == 0
                    and s.pre in self._index}
        groups = []
        for unit in self.topology.atomic_units:
            members = [self._index[m] for m in unit.members if m in self._index]
            pairs = frozenset((a, b) for a in members for b in members if (a, b) in inhibits)
            if pairs:
                groups.append((members, pairs))
        return groups

    def init_state(self) -> "EngineState":
        n = len(self.neuron_ids)
        return EngineState(
            engine=self,
            t=0,
            potentials=np.zeros(n),
            refractory_left=np.zeros(n, dtype=int),
            neuron_history=deque(maxlen=max(self.neuron_depth, 1)),
            sensor_history=deque(maxlen=max(self.sensor_depth, 1)),
        )

    def sensor_vector(self, external_inputs: Iterable[Tuple[str, bool]]) -> np.ndarray:
        vector = np.zeros(len(self.sensor_ids))
        for sensor_id, spike in external_inputs:
            if sensor_id not in self._sensor_index:
                raise BindingError(f"Unknown sensor id: {sensor_id}")
            if spike:
                vector[self._sensor_index[sensor_id]] = 1.0
        return vector

    def advance(self, state: "EngineState", sensor_vector: np.ndarray) -> np.ndarray:
        """
        Apply one synchronous update in place.

        Args:
            state: Engine state compiled from this engine
            sensor_vector: 0/1 spike vector over ``sensor_ids`` for the current step

        Returns:
            np.ndarray: Boolean fired vector for the step
        """
        state.sensor_history.appendleft(sensor_vector)
        drive = np.zeros(len(self.neuron_ids))
        for delay in self._neuron_delays:
            if delay < len(state.neuron_history):
                drive += self.neuron_weights[delay] @ state.neuron_history[delay]
        for delay in self._sensor_delays:
            if delay < len(state.sensor_history):
                drive += self.sensor_weights[delay] @ state.sensor_history[delay]

        v = self.leaks * state.potentials + drive
        np.maximum(v, 0.0, out=v)

        fired = (v >= self.thresholds - SimSettings.FIRE_EPSILON) & (state.refractory_left == 0)
        for members, pairs in self._tie_groups:
            winners: List[int] = []
            for member in members:
                if not fired[member]:
                    continue
                if any((w, member) in pairs for w in winners):
                    fired[member] = False
                else:
                    winners.append(member)

        v[fired] = self.reset[fired]
        np.maximum(v, 0.0, out=v)
        state.refractory_left = np.where(fired, self.refractory,
                                         np.maximum(state.refractory_left - 1, 0))
        state.potentials = v
        state.neuron_history.appendleft(fired.astype(float))
        state.t += 1
        return fired

    def run(self, inputs: Sequence[SpikeTrain], horizon: int, seed: int = 0) -> SimTrace:
        """
        Simulate ``horizon`` steps from rest.

        Args:
            inputs: Spike trains whose sources are bound sensors
            horizon: Number of steps, at least 1
            seed: Recorded with the trace; the dynamics are deterministic

        Returns:
            SimTrace: Frames for t = 0..horizon-1
        """
        if horizon < 1:
            raise ConfigurationError(f"Horizon must be >= 1, got {horizon}")
        sensor_matrix = np.zeros((horizon, len(self.sensor_ids)))
        for train in inputs:
            if train.source not in self._sensor_index:
                raise BindingError(f"Input source {train.source} is not bound in the topology")
            sensor_matrix[:, self._sensor_index[train.source]] = np.logical_or(
                sensor_matrix[:, self._sensor_index[train.source]] > 0, train.to_array(horizon))

        n = len(self.neuron_ids)
        fired = np.zeros((horizon, n), dtype=bool)
        potentials = np.zeros((horizon, n))
        state = self.init_state()
        for t in range(horizon):
            fired[t] = self.advance(state, sensor_matrix[t])
            potentials[t] = state.potentials

        logger.debug(f"Run of '{self.topology.name}' finished: {int(fired.sum())} fires "
                     f"over {horizon} steps")
        return SimTrace(
            neuron_ids=self.neuron_ids,
            fired=fired,
            potentials=potentials,
            aggregate=potentials.sum(axis=1),
            refractory=self.refractory.copy(),
            sensor_ids=self.sensor_ids,
            sensor_spikes=sensor_matrix > 0,
            seed=seed,
        )


@dataclass
class EngineState:
    """Mutable per-run state; confined to one simulation."""
    engine: SpikeEngine
    t: int
    potentials: np.ndarray
    refractory_left: np.ndarray
    neuron_history: Deque[np.ndarray]
    sensor_history: Deque[np.ndarray]


def init_state(topology: CircuitTopology) -> EngineState:
    """Compile ``topology`` and return its rest state."""
    return SpikeEngine(topology).init_state()


def step(topology: CircuitTopology, state: EngineState,
         external_inputs: Iterable[Tuple[str, bool]] = ()) -> TraceFrame:
    """
    Advance ``state`` by one step.

    Args:
        topology: The topology ``state`` was initialised for
        state: Engine state from ``init_state``
        external_inputs: (sensor id, spike) pairs for the current step

    Returns:
        TraceFrame: Firing and potentials after the update
    """
    engine = state.engine
    if engine.topology is not topology:
        raise ConfigurationError("Engine state was initialised for a different topology")
    t = state.t
    fired = engine.advance(state, engine.sensor_vector(external_inputs))
    return TraceFrame(
        t=t,
        fired=frozenset(engine.neuron_ids[i] for i in np.flatnonzero(fired)),
        potentials={nid: float(state.potentials[i]) for i, nid in enumerate(engine.neuron_ids)},
        aggregate_potential=float(state.potentials.sum()),
    )


def run(topology: CircuitTopology, inputs: Sequence[SpikeTrain], horizon: int,
        seed: int = 0) -> SimTrace:
    """Simulate ``topology`` driven by ``inputs``; pure in its arguments."""
    return SpikeEngine(topology).run(inputs, horizon, seed)
