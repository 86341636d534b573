"""
Simulation Settings for the Curved Trajectory Detector
Centralized default values shared by the engine, builders, scenarios and CLI.
"""

from typing import Dict, List, Tuple


class SimSettings:
    """Centralized simulation settings and defaults."""

    # App Information
    APP_NAME: str = "ctd-sim"
    VERSION: str = "1.0.0"
    APP_SUBTITLE: str = "Spiking curved trajectory detector and Braitenberg baseline harness"

    # Engine defaults
    DT_SECONDS: float = 0.001  # 1 ms per step
    DEFAULT_HORIZON: int = 2000
    PDD_LEAK: float = 0.0
    CMD_LEAK: float = 0.9
    DEFAULT_REFRACTORY: int = 1
    FIRE_EPSILON: float = 1e-9
    AGGREGATE_TOLERANCE: float = 1e-9

    # Circuit defaults
    PDD_THRESHOLD: float = 1.0
    PDD_INHIBITORY_WEIGHT: float = -1.0
    SENSOR_WEIGHT: float = 1.0
    CMD_WEIGHTS: Tuple[float, float, float] = (0.2, 0.5, 1.0)
    CMD_THRESHOLDS: Tuple[float, float, float] = (2.0, 3.0, 4.0)
    PRIORITY_INHIBITION_WEIGHT: float = -10.0
    BRAITENBERG_COINCIDENCE_THRESHOLD: float = 2.0
    DEFAULT_NUM_SENSORS: int = 4

    # Scenario defaults (SI units)
    SENSOR_RANGE_M: float = 2.0
    RATE_MIN_HZ: float = 10.0
    RATE_MAX_HZ: float = 200.0
    SENSOR_SPACING_M: float = 0.2

    # Decoding defaults
    PROXIMITY_WINDOW: int = 50
    SEIZURE_THRESHOLD: float = 0.5
    SEIZURE_WINDOW: int = 50

    # Calibration defaults
    BAND_F1_HZ: float = 50.0
    BAND_F2_HZ: float = 120.0
    BAND_TOLERANCE: float = 0.1
    SWEEP_POINTS: int = 30
    SWEEP_HORIZON: int = 2000
    CALIBRATION_RETRIES: int = 5

    # Artifact file names
    ARTIFACT_FILES: Dict[str, str] = {
        'trace': 'trace.jsonl',
        'spikes': 'spikes.csv',
        'potential': 'potential.csv',
        'report': 'detections.json',
        'raster': 'raster.svg',
        'params': 'cmd_params.json',
        'compare': 'comparison.json',
    }
    EMIT_CHOICES: List[str] = ['trace', 'raster', 'report']
    DEFAULT_EMIT: List[str] = ['trace', 'report']
    CIRCUIT_CHOICES: List[str] = ['ctd', 'pdd-only', 'braitenberg-lr', 'braitenberg-rl',
                                  'braitenberg-bidirectional', 'ctd-ablated']
    COMPARE_CIRCUITS: List[str] = ['braitenberg-lr', 'braitenberg-bidirectional', 'ctd']
    BRANCH_DELAY: int = 2

    # Exit codes
    EXIT_OK: int = 0
    EXIT_INPUT_ERROR: int = 2
    EXIT_INVARIANT_BREACH: int = 3
    EXIT_INFEASIBLE_TUNING: int = 4

    # Logging settings
    LOG_LEVEL: str = 'INFO'
    LOG_FORMAT: str = '%(asctime)s - %(name)s - %(levelname)s - %(message)s'

    @classmethod
    def sensor_ids(cls, num_sensors: int) -> List[str]:
        """Sensor ids S1..SK, left to right."""
        return [f"S{i}" for i in range(1, num_sensors + 1)]

    @classmethod
    def default_sensor_positions(cls, num_sensors: int = DEFAULT_NUM_SENSORS,
                                 spacing: float = SENSOR_SPACING_M) -> List[Tuple[float, float]]:
        """Evenly spaced sensor positions on the x axis, centred on the vehicle."""
        offset = (num_sensors - 1) * spacing / 2.0
        return [(round(i * spacing - offset, 12), 0.0) for i in range(num_sensors)]

    @classmethod
    def parse_emit(cls, emit: str) -> List[str]:
        """Parse a comma separated emit list, rejecting unknown entries."""
        items = [item.strip() for item in emit.split(',') if item.strip()]
        unknown = [item for item in items if item not in cls.EMIT_CHOICES]
        if unknown:
            raise ValueError(f"Unknown emit flags: {unknown}")
        return items
