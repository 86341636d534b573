#!/usr/bin/env python3
"""
Unit Tests for the Command-Line Interface
Tests the simulate, tune and compare commands end to end on the shipped scenarios.
"""

import json
import os
import shutil
import sys
import tempfile
import unittest
from pathlib import Path
from unittest import mock
from xml.etree import ElementTree

import pandas as pd
from jsonschema import validate as validate_schema
from typer.testing import CliRunner

# Add src directory to path
sys.path.insert(0, os.path.join(os.path.dirname(os.path.abspath(__file__)), '..', 'src'))

from app import app, load_params_file
from config.constants import ArtifactSchemas
from config.settings import SimSettings

SCENARIO_DIR = Path(__file__).resolve().parent.parent / 'scenarios'
SVG_NS = '{http://www.w3.org/2000/svg}'


def scenario_path(name):
    return str(SCENARIO_DIR / f"{name}.json")


class CliTestCase(unittest.TestCase):
    """Shared runner and scratch directory."""

    def setUp(self):
        """Set up test fixtures."""
        self.runner = CliRunner()
        self.tmp = Path(tempfile.mkdtemp())

    def tearDown(self):
        """Remove the scratch directory."""
        shutil.rmtree(self.tmp, ignore_errors=True)

    def invoke(self, *args):
        return self.runner.invoke(app, [str(a) for a in args])


class TestSimulateCommand(CliTestCase):
    """Test the simulate command."""

    def simulate_lr(self, out, emit='trace,report,raster'):
        return self.invoke('simulate', '--scenario', scenario_path('lr_sweep'), '--circuit', 'ctd',
                           '--params-source', 'default', '--out', out, '--emit', emit)

    def test_left_to_right_detection(self):
        """Test the LR sweep is reported as LR with schema-valid artifacts."""
        result = self.simulate_lr(self.tmp)
        self.assertEqual(result.exit_code, 0, result.output)

        with open(self.tmp / 'detections.json') as f:
            detections = json.load(f)
        validate_schema(instance=detections, schema=ArtifactSchemas.DETECTIONS)
        self.assertEqual(detections['overall']['direction'], 'LR')
        self.assertEqual(detections['circuit'], 'ctd')

        lines = (self.tmp / 'trace.jsonl').read_text().splitlines()
        self.assertEqual(len(lines), 80)
        for line in lines:
            validate_schema(instance=json.loads(line), schema=ArtifactSchemas.TRACE_FRAME)
        self.assertEqual([json.loads(line)['t'] for line in lines], list(range(80)))

    def test_raster_marks_match_spikes(self):
        """Test one sensor mark in the raster per row of spikes.csv."""
        result = self.simulate_lr(self.tmp)
        self.assertEqual(result.exit_code, 0, result.output)
        spikes = pd.read_csv(self.tmp / 'spikes.csv')
        self.assertEqual(list(spikes.columns), ['t', 'sensor', 'spike'])
        root = ElementTree.parse(self.tmp / 'raster.svg').getroot()
        self.assertEqual(root.tag, f"{SVG_NS}svg")
        sensor_rows = [g for g in root.iter(f"{SVG_NS}g") if g.get('id', '').startswith('sensor-')]
        self.assertEqual([g.get('id') for g in sensor_rows], ['sensor-S1', 'sensor-S2', 'sensor-S3', 'sensor-S4'])
        marks = sum(len(g.findall(f".//{SVG_NS}use")) for g in sensor_rows)
        self.assertEqual(marks, len(spikes))
        self.assertEqual(len(spikes), int(spikes['spike'].sum()))

    def test_potential_csv(self):
        """Test the aggregate potential file has one row per step."""
        result = self.simulate_lr(self.tmp, emit='report')
        self.assertEqual(result.exit_code, 0, result.output)
        potential = pd.read_csv(self.tmp / 'potential.csv')
        self.assertEqual(list(potential.columns), ['t', 'aggregate_potential'])
        self.assertEqual(len(potential), 80)
        self.assertFalse((self.tmp / 'trace.jsonl').exists())

    def test_byte_identical_reruns(self):
        """Test two runs of the same scenario write identical traces."""
        first, second = self.tmp / 'a', self.tmp / 'b'
        self.assertEqual(self.simulate_lr(first).exit_code, 0)
        self.assertEqual(self.simulate_lr(second).exit_code, 0)
        for name in ('trace.jsonl', 'spikes.csv', 'potential.csv', 'detections.json', 'raster.svg'):
            self.assertEqual((first / name).read_bytes(), (second / name).read_bytes(), name)

    def test_baseline_circuit(self):
        """Test baselines run without CMD parameters."""
        result = self.invoke('simulate', '--scenario', scenario_path('lr_sweep'),
                             '--circuit', 'braitenberg-lr', '--out', self.tmp)
        self.assertEqual(result.exit_code, 0, result.output)
        with open(self.tmp / 'detections.json') as f:
            self.assertEqual(json.load(f)['overall']['direction'], 'LR')

    def test_input_errors(self):
        """Test bad inputs exit with the input-error code."""
        cases = [
            ('--scenario', str(self.tmp / 'missing.json')),
            ('--scenario', scenario_path('lr_sweep'), '--circuit', 'reichardt'),
            ('--scenario', scenario_path('lr_sweep'), '--emit', 'trace,movie'),
            ('--scenario', scenario_path('lr_sweep'), '--params', str(self.tmp / 'none.json')),
        ]
        for args in cases:
            result = self.invoke('simulate', *args, '--out', self.tmp / 'out')
            self.assertEqual(result.exit_code, SimSettings.EXIT_INPUT_ERROR, args)

    def test_invalid_params_file(self):
        """Test parameters breaking the inequality chains are rejected."""
        bad = self.tmp / 'bad_params.json'
        bad.write_text(json.dumps({'weights': [1.0, 0.5, 2.0], 'thresholds': [2, 3, 4],
                                   'priority_inhibition_weight': -10.0}))
        result = self.invoke('simulate', '--scenario', scenario_path('lr_sweep'),
                             '--params', bad, '--out', self.tmp / 'out')
        self.assertEqual(result.exit_code, SimSettings.EXIT_INPUT_ERROR)

    def test_invariant_breach_exit_code(self):
        """Test a breached trace invariant still writes artifacts, then exits 3."""
        breach = ['unit 0 (pdd): 1 steps with more than one winner, first at t=5']
        with mock.patch('app.check_trace_invariants', return_value=breach):
            result = self.simulate_lr(self.tmp, emit='report')
        self.assertEqual(result.exit_code, SimSettings.EXIT_INVARIANT_BREACH)
        self.assertTrue((self.tmp / 'detections.json').exists())

    def test_unwritable_output(self):
        """Test an output directory that cannot be created is an input error."""
        blocker = self.tmp / 'blocker'
        blocker.write_text('not a directory')
        result = self.simulate_lr(blocker / 'out', emit='report')
        self.assertEqual(result.exit_code, SimSettings.EXIT_INPUT_ERROR)
        result = self.invoke('compare', '--scenario', scenario_path('lr_sweep'),
                             '--params-source', 'default', '--out', blocker / 'out')
        self.assertEqual(result.exit_code, SimSettings.EXIT_INPUT_ERROR)

    def test_version(self):
        """Test --version prints the name and version and exits cleanly."""
        result = self.invoke('--version')
        self.assertEqual(result.exit_code, SimSettings.EXIT_OK)
        self.assertIn(f"{SimSettings.APP_NAME} {SimSettings.VERSION}", result.output)


class TestTuneAndCompare(CliTestCase):
    """Test calibration output and the side-by-side comparison."""

    @classmethod
    def setUpClass(cls):
        """Calibrate once into a shared parameter file."""
        cls.shared = Path(tempfile.mkdtemp())
        cls.params_file = cls.shared / 'cmd_params.json'
        cls.tune_result = CliRunner().invoke(app, ['tune', '--out', str(cls.params_file)])

    @classmethod
    def tearDownClass(cls):
        """Remove the shared directory."""
        shutil.rmtree(cls.shared, ignore_errors=True)

    def test_tune_writes_reloadable_params(self):
        """Test the parameter file is schema-valid, verified and loadable."""
        self.assertEqual(self.tune_result.exit_code, 0, self.tune_result.output)
        with open(self.params_file) as f:
            document = json.load(f)
        validate_schema(instance=document, schema=ArtifactSchemas.CMD_PARAMS)
        self.assertTrue(document['passed'])
        self.assertEqual(len(document['measured']['sweep']), 30)
        params = load_params_file(str(self.params_file))
        self.assertEqual(params.thresholds, (2.0, 3.0, 4.0))
        self.assertEqual(params.violations(), [])

    def test_tune_infeasible(self):
        """Test equal band boundaries exit with the infeasible-tuning code."""
        result = self.invoke('tune', '--f1', 80, '--f2', 80, '--out', self.tmp / 'p.json')
        self.assertEqual(result.exit_code, SimSettings.EXIT_INFEASIBLE_TUNING)
        self.assertFalse((self.tmp / 'p.json').exists())

    def test_tune_unwritable_output(self):
        """Test a parameter path under a plain file is an input error."""
        blocker = self.tmp / 'blocker'
        blocker.write_text('not a directory')
        result = self.invoke('tune', '--out', blocker / 'cmd_params.json')
        self.assertEqual(result.exit_code, SimSettings.EXIT_INPUT_ERROR)

    def test_simulate_with_tuned_params(self):
        """Test an approaching object is reported as near with the tuned parameters."""
        result = self.invoke('simulate', '--scenario', scenario_path('approaching_arc'),
                             '--params', self.params_file, '--out', self.tmp, '--emit', 'report')
        self.assertEqual(result.exit_code, 0, result.output)
        with open(self.tmp / 'detections.json') as f:
            self.assertEqual(json.load(f)['overall']['proximity'], 'N')

    def test_compare_two_objects(self):
        """Test only the CTD avoids seizures on two converging objects."""
        result = self.invoke('compare', '--scenario', scenario_path('two_objects'),
                             '--params', self.params_file, '--out', self.tmp)
        self.assertEqual(result.exit_code, 0, result.output)
        with open(self.tmp / 'comparison.json') as f:
            comparison = json.load(f)
        self.assertEqual(comparison['scenario'], 'two_objects')
        table = {row['circuit']: row for row in comparison['table']}
        self.assertEqual(list(table), SimSettings.COMPARE_CIRCUITS)
        self.assertEqual(table['ctd']['seizures'], 0)
        self.assertGreater(table['braitenberg-bidirectional']['seizures'], 0)
        for report in comparison['reports'].values():
            validate_schema(instance=report, schema=ArtifactSchemas.DETECTIONS)

    def test_compare_right_to_left(self):
        """Test the LR baseline is blind to RL motion while the others see it."""
        result = self.invoke('compare', '--scenario', scenario_path('rl_sweep'),
                             '--params', self.params_file, '--out', self.tmp)
        self.assertEqual(result.exit_code, 0, result.output)
        with open(self.tmp / 'comparison.json') as f:
            table = {row['circuit']: row for row in json.load(f)['table']}
        self.assertEqual(table['braitenberg-lr']['direction'], 'none')
        self.assertEqual(table['braitenberg-bidirectional']['direction'], 'RL')
        self.assertEqual(table['ctd']['direction'], 'RL')


if __name__ == "__main__":
    unittest.main(verbosity=2)
