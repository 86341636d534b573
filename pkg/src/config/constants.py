"""
Artifact Constants for the Curved Trajectory Detector
Raster geometry, colours and the JSON schemas of emitted files.
"""


class RasterConstants:
    """Figure geometry and colours of the SVG spike raster (inches, points)."""

    ROW_HEIGHT: float = 0.22
    STEPS_PER_INCH: float = 100.0
    MIN_WIDTH: float = 6.0
    MAX_WIDTH: float = 40.0
    MARKER_SIZE: float = 7.0
    MARKER_WIDTH: float = 0.8
    FONT_SIZE: float = 7.0
    HASH_SALT: str = "ctd-raster"

    COLORS: dict = {
        'sensor': '#1f77b4',
        'pdd': '#2ca02c',
        'cmd': '#d62728',
        'baseline': '#9467bd',
        'other': '#7f7f7f',
        'grid': '#dddddd',
        'text': '#333333',
    }


class ArtifactSchemas:
    """JSON schemas for emitted artifacts and scenario files."""

    SCENARIO: dict = {
        'type': 'object',
        'required': ['layout', 'objects', 'duration'],
        'properties': {
            'name': {'type': 'string'},
            'layout': {
                'type': 'object',
                'required': ['positions'],
                'properties': {
                    'positions': {
                        'type': 'array', 'minItems': 2,
                        'items': {'type': 'array', 'minItems': 2, 'maxItems': 2,
                                  'items': {'type': 'number'}},
                    },
                    'range': {'type': 'number', 'exclusiveMinimum': 0},
                    'rate_min': {'type': 'number', 'exclusiveMinimum': 0},
                    'rate_max': {'type': 'number', 'exclusiveMinimum': 0},
                },
            },
            'objects': {
                'type': 'array', 'minItems': 1,
                'items': {
                    'type': 'object',
                    'required': ['kind'],
                    'properties': {'kind': {'enum': ['line', 'arc', 'waypoints']}},
                },
            },
            'duration': {'type': 'number', 'exclusiveMinimum': 0},
            'dt': {'type': 'number', 'exclusiveMinimum': 0},
            'seed': {'type': 'integer'},
            'encoding': {'enum': ['regular', 'poisson']},
        },
    }

    TRACE_FRAME: dict = {
        'type': 'object',
        'required': ['t', 'fired', 'potentials', 'aggregate_potential'],
        'properties': {
            't': {'type': 'integer', 'minimum': 0},
            'fired': {'type': 'array', 'items': {'type': 'integer'}},
            'potentials': {'type': 'object', 'additionalProperties': {'type': 'number'}},
            'aggregate_potential': {'type': 'number'},
        },
    }

    DETECTIONS: dict = {
        'type': 'object',
        'required': ['circuit', 'overall', 'events', 'seizures'],
        'properties': {
            'circuit': {'type': 'string'},
            'overall': {
                'type': 'object',
                'required': ['direction', 'confidence', 'proximity'],
                'properties': {
                    'direction': {'enum': ['LR', 'RL', 'none']},
                    'confidence': {'type': 'number', 'minimum': 0, 'maximum': 1},
                    'proximity': {'enum': ['N', 'M', 'F', 'none']},
                },
            },
            'events': {
                'type': 'array',
                'items': {
                    'type': 'object',
                    'required': ['window', 'direction', 'proximity', 'confidence'],
                    'properties': {
                        'window': {'type': 'array', 'minItems': 2, 'maxItems': 2,
                                   'items': {'type': 'integer'}},
                        'direction': {'enum': ['LR', 'RL', 'none']},
                        'proximity': {'enum': ['N', 'M', 'F', 'none']},
                        'confidence': {'type': 'number', 'minimum': 0, 'maximum': 1},
                    },
                },
            },
            'seizures': {
                'type': 'object',
                'required': ['events', 'activity_threshold', 'window'],
                'properties': {
                    'events': {
                        'type': 'array',
                        'items': {
                            'type': 'object',
                            'required': ['t_start', 't_end', 'peak'],
                            'properties': {
                                'peak': {'type': 'number', 'minimum': 0, 'maximum': 1},
                            },
                        },
                    },
                    'activity_threshold': {'type': 'number'},
                    'window': {'type': 'integer', 'minimum': 1},
                },
            },
        },
    }

    CMD_PARAMS: dict = {
        'type': 'object',
        'required': ['weights', 'thresholds', 'priority_inhibition_weight'],
        'properties': {
            'weights': {
                'type': 'object', 'required': ['N', 'M', 'F'],
                'additionalProperties': {'type': 'number'},
            },
            'thresholds': {
                'type': 'object', 'required': ['N', 'M', 'F'],
                'additionalProperties': {'type': 'number'},
            },
            'priority_inhibition_weight': {'type': 'number', 'exclusiveMaximum': 0},
            'measured': {'type': 'object'},
            'passed': {'type': 'boolean'},
        },
    }
