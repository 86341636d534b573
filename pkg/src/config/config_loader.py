"""
Configuration Loader for the Curved Trajectory Detector
Loads configuration from JSON files and environment variables.
"""

import json
import logging
import os
from pathlib import Path
from typing import Any, Dict, Optional

from dotenv import load_dotenv

from config.settings import SimSettings

logger = logging.getLogger(__name__)

DEFAULT_CONFIG_DIR = Path(__file__).resolve().parents[2] / "config"


class ConfigLoader:
    """Loads and manages simulator configuration."""

    def __init__(self, config_dir: Optional[str] = None):
        self.config_dir = Path(config_dir) if config_dir else DEFAULT_CONFIG_DIR
        self.config: Dict[str, Any] = {}
        self._load_config()

    def _load_config(self):
        """Load configuration from files and environment variables."""
        load_dotenv()
        environment = os.getenv('ENVIRONMENT', 'development')

        config_file = self.config_dir / f"{environment}.json"
        if config_file.exists():
            with open(config_file, 'r') as f:
                self.config = json.load(f)
        else:
            dev_config_file = self.config_dir / "development.json"
            if dev_config_file.exists():
                logger.warning(f"No config for environment '{environment}', using development.json")
                with open(dev_config_file, 'r') as f:
                    self.config = json.load(f)
            else:
                self.config = self._get_default_config()

        self._override_with_env()
        logger.debug(f"Loaded '{self.get('environment', environment)}' configuration")

    def _override_with_env(self):
        """Override configuration with environment variables."""
        if os.getenv('CTD_DT'):
            self.config.setdefault('engine', {})['dt'] = float(os.getenv('CTD_DT'))
        if os.getenv('CTD_HORIZON'):
            self.config.setdefault('engine', {})['horizon'] = int(os.getenv('CTD_HORIZON'))
        if os.getenv('CTD_OUTPUT_DIR'):
            self.config.setdefault('output', {})['directory'] = os.getenv('CTD_OUTPUT_DIR')
        if os.getenv('CTD_LOG_LEVEL'):
            self.config.setdefault('logging', {})['level'] = os.getenv('CTD_LOG_LEVEL')

    def _get_default_config(self) -> Dict[str, Any]:
        """Get default configuration."""
        return {
            "environment": "development",
            "engine": {
                "dt": SimSettings.DT_SECONDS,
                "horizon": SimSettings.DEFAULT_HORIZON,
                "pdd_leak": SimSettings.PDD_LEAK,
                "cmd_leak": SimSettings.CMD_LEAK,
                "refractory": SimSettings.DEFAULT_REFRACTORY
            },
            "scenario": {
                "range": SimSettings.SENSOR_RANGE_M,
                "rate_min": SimSettings.RATE_MIN_HZ,
                "rate_max": SimSettings.RATE_MAX_HZ
            },
            "cmd": {
                "weights": list(SimSettings.CMD_WEIGHTS),
                "thresholds": list(SimSettings.CMD_THRESHOLDS),
                "priority_inhibition_weight": SimSettings.PRIORITY_INHIBITION_WEIGHT
            },
            "bands": {
                "f1": SimSettings.BAND_F1_HZ,
                "f2": SimSettings.BAND_F2_HZ,
                "tolerance": SimSettings.BAND_TOLERANCE,
                "sweep_points": SimSettings.SWEEP_POINTS
            },
            "decode": {
                "proximity_window": SimSettings.PROXIMITY_WINDOW,
                "seizure_threshold": SimSettings.SEIZURE_THRESHOLD,
                "seizure_window": SimSettings.SEIZURE_WINDOW
            },
            "output": {
                "directory": "out",
                "emit": list(SimSettings.DEFAULT_EMIT)
            },
            "logging": {
                "level": SimSettings.LOG_LEVEL,
                "format": SimSettings.LOG_FORMAT
            }
        }

    def get(self, key: str, default: Any = None) -> Any:
        """Get configuration value by dotted key."""
        keys = key.split('.')
        value = self.config

        for k in keys:
            if isinstance(value, dict) and k in value:
                value = value[k]
            else:
                return default

        return value

    def get_engine_config(self) -> Dict[str, Any]:
        """Get engine configuration."""
        return self.get('engine', {})

    def get_scenario_config(self) -> Dict[str, Any]:
        """Get scenario layout defaults."""
        return self.get('scenario', {})

    def get_band_config(self) -> Dict[str, Any]:
        """Get calibration band defaults."""
        return self.get('bands', {})

    def get_decode_config(self) -> Dict[str, Any]:
        """Get decoder defaults."""
        return self.get('decode', {})

    def get_logging_config(self) -> Dict[str, Any]:
        """Get logging configuration."""
        return self.get('logging', {})


# Global configuration instance
config = ConfigLoader()


def get_config() -> ConfigLoader:
    """Get the global configuration instance."""
    return config
