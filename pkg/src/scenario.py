"""
Scenario module for the curved trajectory detector.
Handles object trajectories, sensor distances, rate coding and spike train encoding.
"""

import json
import logging
import math
from dataclasses import dataclass, replace
from enum import Enum
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple, Union

import numpy as np
from jsonschema import ValidationError, validate as validate_schema

from config.constants import ArtifactSchemas
from config.settings import SimSettings
from spike_core import ConfigurationError, ScenarioError, SpikeTrain

# Set up logging
logger = logging.getLogger(__name__)

Point = Tuple[float, float]


class TrajectoryKind(Enum):
    LINE = "line"
    ARC = "arc"
    WAYPOINTS = "waypoints"


class Encoding(Enum):
    REGULAR = "regular"
    POISSON = "poisson"


@dataclass(frozen=True)
class SensorLayout:
    """Sensor positions along the vehicle front, left to right, with the rate law."""
    positions: Tuple[Point, ...] = tuple(SimSettings.default_sensor_positions())
    range: float = SimSettings.SENSOR_RANGE_M
    rate_min: float = SimSettings.RATE_MIN_HZ
    rate_max: float = SimSettings.RATE_MAX_HZ

    def __post_init__(self):
        if len(self.positions) < 2:
            raise ConfigurationError("A sensor layout needs at least 2 sensors")
        if any(b[0] <= a[0] for a, b in zip(self.positions, self.positions[1:])):
            raise ConfigurationError("Sensor positions must be ordered left to right")
        if not self.range > 0:
            raise ConfigurationError(f"Sensor range must be > 0, got {self.range}")
        if not 0 < self.rate_min <= self.rate_max:
            raise ConfigurationError("Rates must satisfy 0 < rate_min <= rate_max")

    @property
    def num_sensors(self) -> int:
        return len(self.positions)

    @property
    def sensor_ids(self) -> List[str]:
        return SimSettings.sensor_ids(self.num_sensors)


@dataclass(frozen=True)
class Trajectory:
    """
    Parametric object path.

    line: ``start`` to ``end`` at ``speed`` (m/s), then held.
    arc: around ``center`` at ``radius``, from ``start_angle`` towards ``end_angle``
    at ``angular_speed`` (rad/s), then held; no ``end_angle`` keeps circling.
    waypoints: ``points`` as (time s, x, y), linearly interpolated and held at the ends.
    """
    kind: TrajectoryKind
    start: Optional[Point] = None
    end: Optional[Point] = None
    speed: float = 0.0
    center: Optional[Point] = None
    radius: float = 0.0
    start_angle: float = 0.0
    end_angle: Optional[float] = None
    angular_speed: float = 0.0
    points: Tuple[Tuple[float, float, float], ...] = ()

    @classmethod
    def line(cls, start: Point, end: Point, speed: float) -> "Trajectory":
        return cls(kind=TrajectoryKind.LINE, start=tuple(start), end=tuple(end), speed=speed)

    @classmethod
    def arc(cls, center: Point, radius: float, start_angle: float,
            end_angle: Optional[float], angular_speed: float) -> "Trajectory":
        return cls(kind=TrajectoryKind.ARC, center=tuple(center), radius=radius,
                   start_angle=start_angle, end_angle=end_angle, angular_speed=angular_speed)

    @classmethod
    def waypoints(cls, points: Sequence[Tuple[float, Point]]) -> "Trajectory":
        flat = tuple((float(t), float(p[0]), float(p[1])) for t, p in points)
        return cls(kind=TrajectoryKind.WAYPOINTS, points=flat)

    def check(self) -> "Trajectory":
        if self.kind == TrajectoryKind.LINE:
            if self.start is None or self.end is None or self.speed < 0:
                raise ConfigurationError("Line trajectory needs start, end and speed >= 0")
        elif self.kind == TrajectoryKind.ARC:
            if self.center is None or self.radius < 0 or self.angular_speed < 0:
                raise ConfigurationError("Arc trajectory needs center, radius >= 0 and angular_speed >= 0")
        elif not self.points:
            raise ConfigurationError("Waypoint trajectory needs at least one point")
        elif any(b[0] <= a[0] for a, b in zip(self.points, self.points[1:])):
            raise ConfigurationError("Waypoint times must be strictly increasing")
        return self


@dataclass(frozen=True)
class Scenario:
    """Sensor layout, moving objects and simulation clock."""
    layout: SensorLayout
    objects: Tuple[Trajectory, ...]
    duration: float
    dt: float = SimSettings.DT_SECONDS
    encoding: Encoding = Encoding.REGULAR
    seed: int = 0
    name: str = "scenario"

    @property
    def horizon(self) -> int:
        return int(round(self.duration / self.dt))


def position_at(traj: Trajectory, times: Union[float, np.ndarray]) -> np.ndarray:
    """
    Object position at the given time(s).

    Args:
        traj: Trajectory to evaluate
        times: Scalar or array of times in seconds

    Returns:
        np.ndarray: (..., 2) positions in meters
    """
    t = np.asarray(times, dtype=float)
    if traj.kind == TrajectoryKind.LINE:
        start, end = np.asarray(traj.start, dtype=float), np.asarray(traj.end, dtype=float)
        length = float(np.hypot(*(end - start)))
        if length == 0 or traj.speed == 0:
            frac = np.zeros_like(t)
        else:
            frac = np.minimum(1.0, traj.speed * t / length)
        return start + (end - start) * np.asarray(frac)[..., None]

    if traj.kind == TrajectoryKind.ARC:
        if traj.end_angle is None:
            theta = traj.start_angle + traj.angular_speed * t
        else:
            span = traj.end_angle - traj.start_angle
            theta = traj.start_angle + np.sign(span) * np.minimum(traj.angular_speed * t, abs(span))
        cx, cy = traj.center
        return np.stack([cx + traj.radius * np.cos(theta), cy + traj.radius * np.sin(theta)], axis=-1)

    stamps = np.array([p[0] for p in traj.points])
    xs = np.interp(t, stamps, [p[1] for p in traj.points])
    ys = np.interp(t, stamps, [p[2] for p in traj.points])
    return np.stack([xs, ys], axis=-1)


def sample_path(traj: Trajectory, duration: float, dt: float) -> np.ndarray:
    """
    Sample a trajectory at t = k*dt for k in 0..round(duration/dt)-1.

    Args:
        traj: Trajectory to sample
        duration: Length in seconds
        dt: Step in seconds

    Returns:
        np.ndarray: (steps, 2) positions
    """
    if dt <= 0 or duration <= 0:
        raise ConfigurationError("duration and dt must be > 0")
    steps = int(round(duration / dt))
    return position_at(traj.check(), np.arange(steps) * dt)


def spike_rate(distance: Union[float, np.ndarray], layout: SensorLayout) -> Union[float, np.ndarray]:
    """Linear rate law: rate_max at contact, rate_min at the range edge, 0 beyond it."""
    d = np.asarray(distance, dtype=float)
    rate = layout.rate_min + (layout.rate_max - layout.rate_min) * (1.0 - d / layout.range)
    rate = np.where(d <= layout.range, rate, 0.0)
    return float(rate) if rate.ndim == 0 else rate


def sensor_distances(scenario: Scenario) -> np.ndarray:
    """(objects, steps, sensors) distances from every object to every sensor."""
    sensors = np.asarray(scenario.layout.positions, dtype=float)
    paths = np.stack([sample_path(obj, scenario.duration, scenario.dt) for obj in scenario.objects])
    return np.linalg.norm(paths[:, :, None, :] - sensors[None, None, :, :], axis=-1)


def rate_map(scenario: Scenario) -> np.ndarray:
    """(steps, sensors) rates; overlapping objects combine by maximum."""
    return spike_rate(sensor_distances(scenario), scenario.layout).max(axis=0)


def regular_spike_steps(rates: np.ndarray, dt: float) -> np.ndarray:
    """
    Deterministic phase-accumulator encoder.

    Emits on the first in-range step, then every time the accumulated
    rate*dt reaches one; leaving the range resets the phase.

    Args:
        rates: Per-step rate in spikes/s
        dt: Step in seconds

    Returns:
        np.ndarray: Boolean spike vector
    """
    spikes = np.zeros(len(rates), dtype=bool)
    acc = 1.0
    for t, rate in enumerate(rates):
        if rate <= 0:
            acc = 1.0
            continue
        if acc >= 1.0 - SimSettings.FIRE_EPSILON:
            spikes[t] = True
            acc -= 1.0
        acc += rate * dt
    return spikes


def poisson_spike_steps(rates: np.ndarray, dt: float, seed: int, index: int) -> np.ndarray:
    """Bernoulli draws with probability rate*dt, seeded by (seed, sensor index)."""
    probability = np.asarray(rates, dtype=float) * dt
    if np.any(probability > 1.0):
        raise ConfigurationError(
            f"rate*dt exceeds 1 (max {probability.max():.3f}); dt is too coarse for poisson encoding")
    # Negative seeds wrap into the non-negative range SeedSequence accepts
    rng = np.random.default_rng([seed % 2 ** 64, index])
    return rng.random(len(probability)) < probability


def encode(scenario: Scenario) -> List[SpikeTrain]:
    """
    Encode a scenario into one spike train per sensor.

    Args:
        scenario: Layout, objects and clock

    Returns:
        List[SpikeTrain]: Trains S1..SK in layout order
    """
    rates = rate_map(scenario)
    horizon = rates.shape[0]
    trains = []
    for index, sensor_id in enumerate(scenario.layout.sensor_ids):
        if scenario.encoding == Encoding.POISSON:
            spikes = poisson_spike_steps(rates[:, index], scenario.dt, scenario.seed, index)
        else:
            spikes = regular_spike_steps(rates[:, index], scenario.dt)
        trains.append(SpikeTrain(source=sensor_id, times=tuple(np.flatnonzero(spikes)),
                                 horizon=horizon))
    counts = {t.source: len(t) for t in trains}
    logger.debug(f"Encoded '{scenario.name}': {counts} spikes over {horizon} steps")
    return trains


@dataclass(frozen=True)
class DirectionRegime:
    """Whether a scenario lies where the PDD sawtooth follows the motion direction."""
    valid: bool
    reason: str
    lag_steps: Optional[float] = None
    min_interval: Optional[int] = None


def direction_regime(scenario: Scenario) -> DirectionRegime:
    """
    Check a scenario against the conditions under which PDD direction decoding holds.

    A single line object moving parallel to an evenly spaced sensor row gives
    every sensor the same regular train, shifted by ``lag_steps`` per sensor.
    The winners then cycle through the unit in motion order provided the lag
    is a whole number of steps, at least 2 (a winner blocks the next step),
    and the three shifted spikes of one round land before the next round:
    ``min_interval >= 2 * lag_steps + 2``. Faster sweeps shrink the lag, slower
    sweeps alias the phase; poisson trains carry no phase relation at all.

    Args:
        scenario: Scenario to check

    Returns:
        DirectionRegime: Verdict, reason and the deciding quantities
    """
    if scenario.encoding != Encoding.REGULAR:
        return DirectionRegime(False, "poisson trains keep no phase relation between sensors")
    if len(scenario.objects) != 1 or scenario.objects[0].kind != TrajectoryKind.LINE:
        return DirectionRegime(False, "needs exactly one line object")
    traj = scenario.objects[0]
    layout = scenario.layout
    positions = np.asarray(layout.positions, dtype=float)
    gaps = np.diff(positions[:, 0])
    if not np.allclose(positions[:, 1], positions[0, 1]) or not np.allclose(gaps, gaps[0]):
        return DirectionRegime(False, "sensors must be evenly spaced on one row")
    if traj.speed <= 0 or traj.start == traj.end or not math.isclose(traj.start[1], traj.end[1]):
        return DirectionRegime(False, "object must move parallel to the sensor row")
    for endpoint in (traj.start, traj.end):
        if np.any(np.hypot(*(positions - np.asarray(endpoint)).T) <= layout.range):
            return DirectionRegime(False, "line must start and end outside every sensor's range")

    lag = float(gaps[0]) / (traj.speed * scenario.dt)
    if abs(lag - round(lag)) > 1e-6 or round(lag) < 2:
        return DirectionRegime(False, f"sensor lag of {lag:.3f} steps is not a whole number >= 2",
                               lag_steps=lag)
    offset = abs(traj.start[1] - positions[0, 1])
    if offset >= layout.range:
        return DirectionRegime(False, "object never enters sensor range", lag_steps=lag)
    peak = spike_rate(offset, layout)
    min_interval = math.ceil(1.0 / (peak * scenario.dt) - SimSettings.FIRE_EPSILON) - 1
    if min_interval < 2 * round(lag) + 2:
        return DirectionRegime(False, f"spike interval {min_interval} is too short for a "
                                      f"{round(lag)}-step sensor lag",
                               lag_steps=lag, min_interval=min_interval)
    return DirectionRegime(True, "sawtooth follows the motion", lag_steps=lag,
                           min_interval=min_interval)


def constant_rate_train(source: str, rate: float, horizon: int, dt: float) -> SpikeTrain:
    """Regular train at a fixed rate, as used by the band sweep."""
    spikes = regular_spike_steps(np.full(horizon, float(rate)), dt)
    return SpikeTrain(source=source, times=tuple(np.flatnonzero(spikes)), horizon=horizon)


def _mirror_point(point: Point) -> Point:
    return (-point[0], point[1])


def mirror_trajectory(traj: Trajectory) -> Trajectory:
    """Reflect a trajectory across the vehicle's centre line (x -> -x)."""
    if traj.kind == TrajectoryKind.LINE:
        return replace(traj, start=_mirror_point(traj.start), end=_mirror_point(traj.end))
    if traj.kind == TrajectoryKind.ARC:
        end_angle = None if traj.end_angle is None else math.pi - traj.end_angle
        return replace(traj, center=_mirror_point(traj.center),
                       start_angle=math.pi - traj.start_angle, end_angle=end_angle)
    return replace(traj, points=tuple((t, -x, y) for t, x, y in traj.points))


def mirror_scenario(scenario: Scenario) -> Scenario:
    """Mirror objects and layout; sensor S_i of the result sees what S_(K+1-i) saw."""
    positions = tuple(_mirror_point(p) for p in reversed(scenario.layout.positions))
    return replace(scenario,
                   layout=replace(scenario.layout, positions=positions),
                   objects=tuple(mirror_trajectory(o) for o in scenario.objects),
                   name=f"{scenario.name}-mirrored")


def _trajectory_from_dict(data: Dict) -> Trajectory:
    kind = TrajectoryKind(data['kind'])
    if kind == TrajectoryKind.LINE:
        return Trajectory.line(data['start'], data['end'], float(data['speed'])).check()
    if kind == TrajectoryKind.ARC:
        end_angle = data.get('end_angle')
        return Trajectory.arc(data['center'], float(data['radius']), float(data['start_angle']),
                              None if end_angle is None else float(end_angle),
                              float(data['angular_speed'])).check()
    return Trajectory.waypoints([(p[0], (p[1], p[2])) for p in data['points']]).check()


def _trajectory_to_dict(traj: Trajectory) -> Dict:
    if traj.kind == TrajectoryKind.LINE:
        return {'kind': 'line', 'start': list(traj.start), 'end': list(traj.end),
                'speed': traj.speed}
    if traj.kind == TrajectoryKind.ARC:
        return {'kind': 'arc', 'center': list(traj.center), 'radius': traj.radius,
                'start_angle': traj.start_angle, 'end_angle': traj.end_angle,
                'angular_speed': traj.angular_speed}
    return {'kind': 'waypoints', 'points': [list(p) for p in traj.points]}


def scenario_from_dict(data: Dict, defaults: Optional[Dict] = None) -> Scenario:
    """
    Build a Scenario from its JSON form.

    Layout fields missing from the document come from ``defaults`` (the
    ``scenario`` config section), then from settings.

    Args:
        data: Parsed scenario document
        defaults: Optional range/rate_min/rate_max fallbacks

    Returns:
        Scenario: Validated scenario
    """
    defaults = defaults or {}
    try:
        validate_schema(instance=data, schema=ArtifactSchemas.SCENARIO)
        layout_data = {'range': defaults.get('range', SimSettings.SENSOR_RANGE_M),
                       'rate_min': defaults.get('rate_min', SimSettings.RATE_MIN_HZ),
                       'rate_max': defaults.get('rate_max', SimSettings.RATE_MAX_HZ),
                       **data['layout']}
        layout = SensorLayout(
            positions=tuple((float(x), float(y)) for x, y in layout_data['positions']),
            range=float(layout_data['range']),
            rate_min=float(layout_data['rate_min']),
            rate_max=float(layout_data['rate_max']),
        )
        return Scenario(
            layout=layout,
            objects=tuple(_trajectory_from_dict(obj) for obj in data['objects']),
            duration=float(data['duration']),
            dt=float(data.get('dt', SimSettings.DT_SECONDS)),
            encoding=Encoding(data.get('encoding', Encoding.REGULAR.value)),
            seed=int(data.get('seed', 0)),
            name=data.get('name', 'scenario'),
        )
    except ValidationError as e:
        raise ScenarioError(f"Scenario does not match schema: {e.message}")
    except (ConfigurationError, KeyError, TypeError, ValueError) as e:
        raise ScenarioError(f"Invalid scenario: {e}")


def scenario_to_dict(scenario: Scenario) -> Dict:
    return {
        'name': scenario.name,
        'layout': {
            'positions': [list(p) for p in scenario.layout.positions],
            'range': scenario.layout.range,
            'rate_min': scenario.layout.rate_min,
            'rate_max': scenario.layout.rate_max,
        },
        'objects': [_trajectory_to_dict(o) for o in scenario.objects],
        'duration': scenario.duration,
        'dt': scenario.dt,
        'encoding': scenario.encoding.value,
        'seed': scenario.seed,
    }


def load_scenario(path: Union[str, Path], defaults: Optional[Dict] = None) -> Scenario:
    """
    Read and validate a scenario file.

    Args:
        path: JSON scenario file
        defaults: Optional layout fallbacks, see scenario_from_dict

    Returns:
        Scenario: Parsed scenario
    """
    path = Path(path)
    if not path.is_file():
        raise ScenarioError(f"Scenario file not found: {path}")
    try:
        with open(path, 'r') as f:
            data = json.load(f)
    except json.JSONDecodeError as e:
        raise ScenarioError(f"Scenario file {path} is not valid JSON: {e}")
    scenario = scenario_from_dict(data, defaults)
    logger.info(f"Loaded scenario '{scenario.name}' from {path} "
                f"({len(scenario.objects)} objects, {scenario.horizon} steps)")
    return scenario
