"""
Circuit builders for the curved trajectory detector.
Builds PDD and CMD atomic units, the combined CTD and the Braitenberg coincidence baselines.
"""

import logging
from dataclasses import dataclass, field, replace
from typing import Dict, List, Optional, Sequence, Tuple

from config.settings import SimSettings
from spike_core import (AtomicUnit, CircuitTopology, ConfigurationError, NeuronSpec, Synapse,
                        TopologyError, UnitKind, validate)

# Set up logging
logger = logging.getLogger(__name__)

STATES: Tuple[str, str, str] = ('N', 'M', 'F')


@dataclass(frozen=True)
class CmdParams:
    """Weights and thresholds of the three CMD state neurons, ordered (N, M, F)."""
    weights: Tuple[float, float, float] = SimSettings.CMD_WEIGHTS
    thresholds: Tuple[float, float, float] = SimSettings.CMD_THRESHOLDS
    priority_inhibition_weight: float = SimSettings.PRIORITY_INHIBITION_WEIGHT

    def violations(self) -> List[str]:
        """Broken inequality constraints, empty when the parameters are usable."""
        problems = []
        if len(self.weights) != 3 or len(self.thresholds) != 3:
            problems.append("weights and thresholds need exactly 3 entries")
            return problems
        if min(self.weights) <= 0 or min(self.thresholds) <= 0:
            problems.append("weights and thresholds must be positive")
            return problems
        w_n, w_m, w_f = self.weights
        t_n, t_m, t_f = self.thresholds
        if not w_n < w_m < w_f:
            problems.append("W_N < W_M < W_F")
        if not t_n < t_m < t_f:
            problems.append("T_N < T_M < T_F")
        if not t_f / w_f < t_m / w_m < t_n / w_n:
            problems.append("T_F/W_F < T_M/W_M < T_N/W_N")
        if not self.priority_inhibition_weight < 0:
            problems.append("priority_inhibition_weight < 0")
        return problems

    def validate(self) -> "CmdParams":
        problems = self.violations()
        if problems:
            raise TopologyError(f"Invalid CMD parameters: {'; '.join(problems)}")
        return self

    def to_dict(self) -> Dict:
        return {
            'weights': dict(zip(STATES, map(float, self.weights))),
            'thresholds': dict(zip(STATES, map(float, self.thresholds))),
            'priority_inhibition_weight': float(self.priority_inhibition_weight),
        }

    @classmethod
    def from_dict(cls, data: Dict) -> "CmdParams":
        """Accept both the {N, M, F} mapping form and plain 3-element lists."""
        def ordered(value):
            if isinstance(value, dict):
                return tuple(float(value[state]) for state in STATES)
            return tuple(float(v) for v in value)

        try:
            return cls(weights=ordered(data['weights']),
                       thresholds=ordered(data['thresholds']),
                       priority_inhibition_weight=float(
                           data.get('priority_inhibition_weight',
                                    SimSettings.PRIORITY_INHIBITION_WEIGHT)))
        except (KeyError, TypeError, ValueError) as e:
            raise ConfigurationError(f"Malformed CMD parameters: {e}")


@dataclass(frozen=True)
class CtdConfig:
    """Configuration of a full curved trajectory detector."""
    num_sensors: int = SimSettings.DEFAULT_NUM_SENSORS
    cmd: CmdParams = field(default_factory=CmdParams)
    pdd_leak: float = SimSettings.PDD_LEAK
    cmd_leak: float = SimSettings.CMD_LEAK
    refractory: int = SimSettings.DEFAULT_REFRACTORY


@dataclass(frozen=True)
class CircuitFragment:
    """Neurons and synapses of one atomic unit, ready to be attached to a topology."""
    neurons: Tuple[NeuronSpec, ...]
    synapses: Tuple[Synapse, ...]
    unit: AtomicUnit


def sliding_windows(num_sensors: int) -> List[Tuple[str, str, str]]:
    """Overlapping 3-sensor windows: K sensors give K-2 windows."""
    if num_sensors < 3:
        raise ConfigurationError(f"At least 3 sensors are required, got {num_sensors}")
    ids = SimSettings.sensor_ids(num_sensors)
    return [tuple(ids[i:i + 3]) for i in range(num_sensors - 2)]


def _checked(topology: CircuitTopology) -> CircuitTopology:
    problems = validate(topology)
    if problems:
        raise TopologyError(f"Builder produced an invalid '{topology.name}' topology: {problems}")
    logger.info(f"Built {topology.name}: {topology.summary()}")
    return topology


def _bindings(synapses: Sequence[Synapse]) -> Dict[str, Tuple[int, ...]]:
    bindings: Dict[str, List[int]] = {}
    for syn in synapses:
        if syn.from_sensor:
            targets = bindings.setdefault(syn.pre, [])
            if syn.post not in targets:
                targets.append(syn.post)
    return {sensor: tuple(targets) for sensor, targets in bindings.items()}


def build_pdd(num_units: int, sensor_windows: Optional[Sequence[Sequence[str]]] = None,
              leak: float = SimSettings.PDD_LEAK,
              refractory: int = SimSettings.DEFAULT_REFRACTORY) -> CircuitTopology:
    """
    Build the pure direction detector.

    Each unit holds 3 threshold-1 neurons bound left to right to its sensor
    window, with every member inhibiting the other two.

    Args:
        num_units: Number of atomic units
        sensor_windows: One 3-sensor window per unit; disjoint windows by default
        leak: Leak of the PDD neurons
        refractory: Refractory steps of the PDD neurons

    Returns:
        CircuitTopology: Validated PDD topology
    """
    if num_units < 1:
        raise ConfigurationError(f"num_units must be >= 1, got {num_units}")
    if sensor_windows is None:
        ids = SimSettings.sensor_ids(3 * num_units)
        sensor_windows = [tuple(ids[3 * u:3 * u + 3]) for u in range(num_units)]
    if len(sensor_windows) != num_units or any(len(w) != 3 for w in sensor_windows):
        raise ConfigurationError("PDD needs exactly one 3-sensor window per unit")

    neurons, synapses, units = [], [], []
    for u, window in enumerate(sensor_windows):
        members = tuple(3 * u + k for k in range(3))
        for k, neuron_id in enumerate(members):
            neurons.append(NeuronSpec(id=neuron_id, threshold=SimSettings.PDD_THRESHOLD,
                                      leak=leak, refractory=refractory,
                                      label=f"PDD{u}.{k}"))
            synapses.append(Synapse(pre=window[k], post=neuron_id,
                                    weight=SimSettings.SENSOR_WEIGHT, delay=0))
        # Circular inhibition: each member weakens the other two
        for pre in members:
            for post in members:
                if pre != post:
                    synapses.append(Synapse(pre=pre, post=post,
                                            weight=SimSettings.PDD_INHIBITORY_WEIGHT, delay=0))
        units.append(AtomicUnit(unit_id=u, kind=UnitKind.PDD, members=members))

    return _checked(CircuitTopology(neurons=tuple(neurons), synapses=tuple(synapses),
                                    atomic_units=tuple(units),
                                    sensor_bindings=_bindings(synapses), name="pdd-only"))


def build_cmd_unit(params: CmdParams, pdd_unit: AtomicUnit, unit_id: int, first_neuron_id: int,
                   leak: float = SimSettings.CMD_LEAK,
                   refractory: int = SimSettings.DEFAULT_REFRACTORY,
                   priority_inhibition: bool = True, check: bool = True) -> CircuitFragment:
    """
    Build one CMD unit fed by every neuron of ``pdd_unit``.

    Args:
        params: CMD weights/thresholds
        pdd_unit: The PDD unit driving this CMD unit
        unit_id: Id of the new unit
        first_neuron_id: Id of the N neuron; M and F follow
        leak: Leak of the CMD neurons
        refractory: Refractory steps of the CMD neurons
        priority_inhibition: Add the N->M, N->F, M->F inhibition
        check: Reject parameters that break the inequality chains

    Returns:
        CircuitFragment: The 3 state neurons, their synapses and the unit
    """
    if check:
        params.validate()
    if pdd_unit.kind != UnitKind.PDD:
        raise ConfigurationError(f"Unit {pdd_unit.unit_id} is not a PDD unit")

    members = tuple(first_neuron_id + k for k in range(3))
    neurons = tuple(
        NeuronSpec(id=neuron_id, threshold=params.thresholds[k], leak=leak,
                   refractory=refractory, label=f"CMD{unit_id}.{STATES[k]}")
        for k, neuron_id in enumerate(members))
    synapses = [Synapse(pre=source, post=target, weight=params.weights[k], delay=0)
                for k, target in enumerate(members) for source in pdd_unit.members]
    if priority_inhibition:
        n, m, f = members
        for pre, post in ((n, m), (n, f), (m, f)):
            synapses.append(Synapse(pre=pre, post=post,
                                    weight=params.priority_inhibition_weight, delay=0))
    return CircuitFragment(neurons=neurons, synapses=tuple(synapses),
                           unit=AtomicUnit(unit_id=unit_id, kind=UnitKind.CMD, members=members))


def attach(topology: CircuitTopology, fragments: Sequence[CircuitFragment],
           name: Optional[str] = None) -> CircuitTopology:
    """Return ``topology`` extended with ``fragments``."""
    neurons = list(topology.neurons)
    synapses = list(topology.synapses)
    units = list(topology.atomic_units)
    for fragment in fragments:
        neurons.extend(fragment.neurons)
        synapses.extend(fragment.synapses)
        units.append(fragment.unit)
    return _checked(CircuitTopology(neurons=tuple(neurons), synapses=tuple(synapses),
                                    atomic_units=tuple(units),
                                    sensor_bindings=dict(topology.sensor_bindings),
                                    name=name or topology.name))


def build_ctd(config: CtdConfig = CtdConfig(), priority_inhibition: bool = True) -> CircuitTopology:
    """
    Compose the PDD over overlapping sensor windows with one CMD unit per PDD unit.

    Args:
        config: Sensor count, CMD parameters and engine defaults
        priority_inhibition: Keep the CMD priority inhibition

    Returns:
        CircuitTopology: Validated CTD with 6(K-2) neurons
    """
    windows = sliding_windows(config.num_sensors)
    pdd = build_pdd(len(windows), windows, leak=config.pdd_leak, refractory=config.refractory)
    num_units = len(windows)
    fragments = [
        build_cmd_unit(config.cmd, pdd.unit(u), unit_id=num_units + u,
                       first_neuron_id=3 * num_units + 3 * u, leak=config.cmd_leak,
                       refractory=config.refractory, priority_inhibition=priority_inhibition)
        for u in range(num_units)
    ]
    return attach(pdd, fragments, name="ctd")


def _coincidence_pairs(num_sensors: int, branch_delay: int, tag: str,
                       first_id: int) -> Tuple[List[NeuronSpec], List[Synapse]]:
    """Level D and C neurons for every adjacent sensor pair, delaying the leading branch."""
    if num_sensors < 2:
        raise ConfigurationError(f"At least 2 sensors are required, got {num_sensors}")
    if branch_delay < 0:
        raise ConfigurationError(f"branch_delay must be >= 0, got {branch_delay}")
    ids = SimSettings.sensor_ids(num_sensors)
    neurons, synapses = [], []
    for p in range(num_sensors - 1):
        left, right = ids[p], ids[p + 1]
        pair = f"{left}-{right}"
        d_left, d_right, coincidence = (first_id + 3 * p + k for k in range(3))
        neurons.extend([
            NeuronSpec(id=d_left, threshold=SimSettings.PDD_THRESHOLD, label=f"{tag}.D_L.{pair}"),
            NeuronSpec(id=d_right, threshold=SimSettings.PDD_THRESHOLD, label=f"{tag}.D_R.{pair}"),
            NeuronSpec(id=coincidence, threshold=SimSettings.BRAITENBERG_COINCIDENCE_THRESHOLD,
                       label=f"{tag}.C.{pair}"),
        ])
        left_delay, right_delay = (branch_delay, 0) if tag == 'LR' else (0, branch_delay)
        synapses.extend([
            Synapse(pre=left, post=d_left, weight=SimSettings.SENSOR_WEIGHT),
            Synapse(pre=right, post=d_right, weight=SimSettings.SENSOR_WEIGHT),
            Synapse(pre=d_left, post=coincidence, weight=1.0, delay=left_delay),
            Synapse(pre=d_right, post=coincidence, weight=1.0, delay=right_delay),
        ])
    return neurons, synapses


def build_braitenberg_lr(num_sensors: int = SimSettings.DEFAULT_NUM_SENSORS,
                         branch_delay: int = SimSettings.BRANCH_DELAY) -> CircuitTopology:
    """
    Build the left-to-right coincidence detector.

    Args:
        num_sensors: Number of sensors; one detector per adjacent pair
        branch_delay: Extra delay on the left branch, matching the expected inter-sensor lag

    Returns:
        CircuitTopology: Validated baseline with 3(K-1) neurons
    """
    neurons, synapses = _coincidence_pairs(num_sensors, branch_delay, 'LR', 0)
    return _checked(CircuitTopology(neurons=tuple(neurons), synapses=tuple(synapses),
                                    sensor_bindings=_bindings(synapses), name="braitenberg-lr"))


def build_braitenberg_rl(num_sensors: int = SimSettings.DEFAULT_NUM_SENSORS,
                         branch_delay: int = SimSettings.BRANCH_DELAY) -> CircuitTopology:
    """Mirror of the left-to-right detector with the delay on the right branch."""
    neurons, synapses = _coincidence_pairs(num_sensors, branch_delay, 'RL', 0)
    return _checked(CircuitTopology(neurons=tuple(neurons), synapses=tuple(synapses),
                                    sensor_bindings=_bindings(synapses), name="braitenberg-rl"))


def build_braitenberg_bidirectional(num_sensors: int = SimSettings.DEFAULT_NUM_SENSORS,
                                    branch_delay: int = SimSettings.BRANCH_DELAY) -> CircuitTopology:
    """Both coincidence sub-circuits side by side, purely excitatory."""
    lr_neurons, lr_synapses = _coincidence_pairs(num_sensors, branch_delay, 'LR', 0)
    rl_neurons, rl_synapses = _coincidence_pairs(num_sensors, branch_delay, 'RL',
                                                 3 * (num_sensors - 1))
    synapses = lr_synapses + rl_synapses
    return _checked(CircuitTopology(neurons=tuple(lr_neurons + rl_neurons),
                                    synapses=tuple(synapses),
                                    sensor_bindings=_bindings(synapses),
                                    name="braitenberg-bidirectional"))


def ablate_inhibition(topology: CircuitTopology) -> CircuitTopology:
    """
    Remove every inhibitory synapse between members of the same atomic unit.

    Args:
        topology: Circuit to ablate

    Returns:
        CircuitTopology: Copy without intra-unit inhibition, named ``<name>-ablated``
    """
    unit_of = {m: unit.unit_id for unit in topology.atomic_units for m in unit.members}
    kept = tuple(
        s for s in topology.synapses
        if not (s.weight < 0 and not s.from_sensor
                and s.pre in unit_of and unit_of.get(s.post) == unit_of[s.pre]))
    logger.info(f"Ablated {len(topology.synapses) - len(kept)} inhibitory synapses "
                f"from {topology.name}")
    return _checked(replace(topology, synapses=kept, name=f"{topology.name}-ablated"))


def build_circuit(name: str, num_sensors: int = SimSettings.DEFAULT_NUM_SENSORS,
                  params: Optional[CmdParams] = None, branch_delay: int = SimSettings.BRANCH_DELAY,
                  pdd_leak: float = SimSettings.PDD_LEAK, cmd_leak: float = SimSettings.CMD_LEAK,
                  refractory: int = SimSettings.DEFAULT_REFRACTORY) -> CircuitTopology:
    """
    Build a circuit by its command-line name.

    Args:
        name: One of SimSettings.CIRCUIT_CHOICES
        num_sensors: Sensor count of the scenario
        params: CMD parameters for the CTD variants
        branch_delay: Branch delay of the coincidence baselines
        pdd_leak: Leak of the PDD neurons
        cmd_leak: Leak of the CMD neurons
        refractory: Refractory steps of every detector neuron

    Returns:
        CircuitTopology: The requested circuit
    """
    if name in ('ctd', 'ctd-ablated'):
        config = CtdConfig(num_sensors=num_sensors, cmd=params or CmdParams(),
                           pdd_leak=pdd_leak, cmd_leak=cmd_leak, refractory=refractory)
        ctd = build_ctd(config)
        return ablate_inhibition(ctd) if name == 'ctd-ablated' else ctd
    if name == 'pdd-only':
        windows = sliding_windows(num_sensors)
        return build_pdd(len(windows), windows, leak=pdd_leak, refractory=refractory)
    if name == 'braitenberg-lr':
        return build_braitenberg_lr(num_sensors, branch_delay)
    if name == 'braitenberg-rl':
        return build_braitenberg_rl(num_sensors, branch_delay)
    if name == 'braitenberg-bidirectional':
        return build_braitenberg_bidirectional(num_sensors, branch_delay)
    raise ConfigurationError(f"Unknown circuit '{name}'; choose from {SimSettings.CIRCUIT_CHOICES}")
