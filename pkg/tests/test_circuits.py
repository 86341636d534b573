#!/usr/bin/env python3
"""
Unit Tests for Circuit Builders
Tests PDD, CMD, CTD and Braitenberg topologies, ablation and winner-take-all behaviour.
"""

import math
import os
import random
import sys
import unittest

import numpy as np

# Add src directory to path
sys.path.insert(0, os.path.join(os.path.dirname(os.path.abspath(__file__)), '..', 'src'))

from circuits import (CmdParams, CtdConfig, ablate_inhibition, attach, build_braitenberg_bidirectional,
                      build_braitenberg_lr, build_braitenberg_rl, build_circuit, build_cmd_unit,
                      build_ctd, build_pdd, sliding_windows)
from decode import check_trace_invariants
from scenario import Encoding, Scenario, SensorLayout, Trajectory, constant_rate_train, encode
from spike_core import ConfigurationError, TopologyError, UnitKind, run, validate

TEST_PARAMS = CmdParams(weights=(1.2, 2.7, 4.0), thresholds=(2.0, 3.0, 4.0))


def inhibitory(topology):
    return [s for s in topology.synapses if s.weight < 0]


class TestPddBuilder(unittest.TestCase):
    """Test the pure direction detector builder."""

    def test_single_unit(self):
        """Test one unit: 3 neurons, 6 inhibitory synapses, unit thresholds."""
        pdd = build_pdd(1)
        self.assertEqual(len(pdd.neurons), 3)
        self.assertEqual(len(inhibitory(pdd)), 6)
        self.assertTrue(all(n.threshold == 1.0 for n in pdd.neurons))
        self.assertTrue(all(s.weight == -1.0 for s in inhibitory(pdd)))
        self.assertEqual(pdd.sensor_bindings, {'S1': (0,), 'S2': (1,), 'S3': (2,)})

    def test_two_units(self):
        """Test modular replication."""
        pdd = build_pdd(2)
        self.assertEqual(len(pdd.neurons), 6)
        self.assertEqual(len(inhibitory(pdd)), 12)
        self.assertEqual(len(pdd.units_of_kind(UnitKind.PDD)), 2)

    def test_builder_outputs_validate(self):
        """Test every size up to 8 units is well formed."""
        for k in range(1, 9):
            self.assertEqual(validate(build_pdd(k)), [])

    def test_rejects_bad_windows(self):
        """Test unit count and window checks."""
        with self.assertRaises(ConfigurationError):
            build_pdd(0)
        with self.assertRaises(ConfigurationError):
            build_pdd(1, [('S1', 'S2')])


class TestCmdUnit(unittest.TestCase):
    """Test the curved motion detector unit."""

    def setUp(self):
        """Set up test fixtures."""
        self.pdd = build_pdd(1)

    def test_fragment_structure(self):
        """Test every state neuron hears all 3 PDD members with its own weight."""
        fragment = build_cmd_unit(TEST_PARAMS, self.pdd.unit(0), unit_id=1, first_neuron_id=3)
        self.assertEqual(fragment.unit.members, (3, 4, 5))
        self.assertEqual([n.threshold for n in fragment.neurons], [2.0, 3.0, 4.0])
        excitatory = [s for s in fragment.synapses if s.weight > 0]
        self.assertEqual(len(excitatory), 9)
        for state, weight in zip((3, 4, 5), TEST_PARAMS.weights):
            incoming = [s for s in excitatory if s.post == state]
            self.assertEqual(sorted(s.pre for s in incoming), [0, 1, 2])
            self.assertTrue(all(s.weight == weight for s in incoming))
        priority = {(s.pre, s.post) for s in fragment.synapses if s.weight < 0}
        self.assertEqual(priority, {(3, 4), (3, 5), (4, 5)})

    def test_priority_inhibition_can_be_disabled(self):
        """Test the uninhibited unit has no inhibitory synapses."""
        fragment = build_cmd_unit(TEST_PARAMS, self.pdd.unit(0), 1, 3, priority_inhibition=False)
        self.assertFalse(any(s.weight < 0 for s in fragment.synapses))

    def test_invalid_params_rejected(self):
        """Test broken inequality chains raise TopologyError."""
        bad = CmdParams(weights=(1.0, 0.5, 2.0), thresholds=(2.0, 3.0, 4.0))
        self.assertIn("W_N < W_M < W_F", bad.violations())
        with self.assertRaises(TopologyError):
            build_cmd_unit(bad, self.pdd.unit(0), 1, 3)

    def test_unchecked_build_accepts_invalid_params(self):
        """Test check=False builds the fragment for parameters that break the chains."""
        swapped = CmdParams(weights=(4.0, 1.84, 1.15), thresholds=(2.0, 3.0, 4.0))
        self.assertNotEqual(swapped.violations(), [])
        fragment = build_cmd_unit(swapped, self.pdd.unit(0), 1, 3, check=False)
        self.assertEqual([n.threshold for n in fragment.neurons], [2.0, 3.0, 4.0])
        self.assertEqual(validate(attach(self.pdd, [fragment])), [])

    def test_default_params_satisfy_constraints(self):
        """Test the placeholder defaults satisfy both chains and the onset ordering."""
        self.assertEqual(CmdParams().violations(), [])
        ordering = CmdParams(weights=(0.5, 0.6, 1.0), thresholds=(1.0, 2.0, 4.0))
        self.assertIn("T_F/W_F < T_M/W_M < T_N/W_N", ordering.violations())

    def test_params_dict_forms(self):
        """Test mapping and list forms load to the same parameters."""
        mapping = CmdParams.from_dict(TEST_PARAMS.to_dict())
        listed = CmdParams.from_dict({'weights': [1.2, 2.7, 4.0], 'thresholds': [2, 3, 4],
                                      'priority_inhibition_weight': -10.0})
        self.assertEqual(mapping, TEST_PARAMS)
        self.assertEqual(listed, TEST_PARAMS)
        with self.assertRaises(ConfigurationError):
            CmdParams.from_dict({'weights': [1, 2, 3]})

    def test_below_m_onset_only_far_fires(self):
        """Test a 30 Hz train below the M onset fires only F in steady state."""
        leak, dt, rate = 0.9, 0.001, 30.0
        # Mean steady-state potentials w*f*dt/(1-leak) stay under T_M and T_N
        for weight, threshold in zip(TEST_PARAMS.weights[:2], TEST_PARAMS.thresholds[:2]):
            self.assertLess(weight * rate * dt / (1 - leak), threshold)
        topology = attach(self.pdd, [build_cmd_unit(TEST_PARAMS, self.pdd.unit(0), 1, 3, leak=leak)])
        trace = run(topology, [constant_rate_train('S1', rate, 2000, dt)], 2000)
        steady = trace.fired[1000:]
        n, m, f = (trace.index_of(i) for i in (3, 4, 5))
        self.assertTrue(steady[:, f].any())
        self.assertFalse(steady[:, m].any())
        self.assertFalse(steady[:, n].any())


class TestCtdBuilder(unittest.TestCase):
    """Test the composed curved trajectory detector."""

    def test_four_sensors(self):
        """Test overlapping windows give 2 PDD and 2 CMD units."""
        ctd = build_ctd(CtdConfig(num_sensors=4, cmd=TEST_PARAMS))
        self.assertEqual(len(ctd.neurons), 12)
        self.assertEqual(len(ctd.units_of_kind(UnitKind.PDD)), 2)
        self.assertEqual(len(ctd.units_of_kind(UnitKind.CMD)), 2)
        self.assertEqual(sliding_windows(4), [('S1', 'S2', 'S3'), ('S2', 'S3', 'S4')])
        self.assertEqual(ctd.sensor_bindings['S1'], (0,))
        self.assertEqual(ctd.sensor_bindings['S2'], (1, 3))
        self.assertEqual(ctd.sensor_bindings['S4'], (5,))

    def test_three_sensors(self):
        """Test the minimal instance."""
        self.assertEqual(len(build_ctd(CtdConfig(num_sensors=3)).neurons), 6)

    def test_linear_scaling(self):
        """Test neuron and synapse counts grow exactly linearly in the sensor count."""
        neurons, synapses = [], []
        for k in range(3, 10):
            ctd = build_ctd(CtdConfig(num_sensors=k, cmd=TEST_PARAMS))
            self.assertEqual(validate(ctd), [])
            neurons.append(len(ctd.neurons))
            synapses.append(len(ctd.synapses))
        self.assertEqual(neurons, [6 * (k - 2) for k in range(3, 10)])
        self.assertEqual(synapses, [21 * (k - 2) for k in range(3, 10)])
        self.assertEqual(len(set(np.diff(neurons))), 1)
        self.assertEqual(len(set(np.diff(synapses))), 1)

    def test_too_few_sensors(self):
        """Test fewer than 3 sensors are rejected."""
        with self.assertRaises(ConfigurationError):
            build_ctd(CtdConfig(num_sensors=2))

    def test_ablation_removes_intra_unit_inhibition(self):
        """Test ablation drops the PDD ring and CMD priority synapses only."""
        ctd = build_ctd(CtdConfig(cmd=TEST_PARAMS))
        ablated = ablate_inhibition(ctd)
        self.assertEqual(len(ctd.synapses) - len(ablated.synapses), 2 * 6 + 2 * 3)
        self.assertEqual(inhibitory(ablated), [])
        self.assertEqual(ablated.name, 'ctd-ablated')
        self.assertEqual(validate(ablated), [])


class TestBraitenbergBuilders(unittest.TestCase):
    """Test the coincidence-detector baselines."""

    def test_left_to_right_structure(self):
        """Test per-pair D_L, D_R and C neurons with the delay on the left branch."""
        circuit = build_braitenberg_lr(4, branch_delay=3)
        self.assertEqual(len(circuit.neurons), 9)
        coincidence = [n for n in circuit.neurons if '.C.' in n.label]
        self.assertEqual(len(coincidence), 3)
        self.assertTrue(all(n.threshold == 2.0 for n in coincidence))
        into_c = [s for s in circuit.synapses if s.post == coincidence[0].id]
        delays = {circuit.neuron(s.pre).label.split('.')[1]: s.delay for s in into_c}
        self.assertEqual(delays, {'D_L': 3, 'D_R': 0})
        self.assertTrue(all(s.weight == 1.0 for s in into_c))

    def test_right_to_left_mirror(self):
        """Test the mirrored detector delays the right branch."""
        circuit = build_braitenberg_rl(4, branch_delay=3)
        c_id = next(n.id for n in circuit.neurons if n.label == 'RL.C.S1-S2')
        delays = {circuit.neuron(s.pre).label.split('.')[1]: s.delay
                  for s in circuit.synapses if s.post == c_id}
        self.assertEqual(delays, {'D_L': 0, 'D_R': 3})

    def test_bidirectional(self):
        """Test both sub-circuits are present and purely excitatory."""
        circuit = build_braitenberg_bidirectional(4)
        self.assertEqual(len(circuit.neurons), 18)
        self.assertEqual(inhibitory(circuit), [])
        self.assertEqual(validate(circuit), [])

    def test_build_circuit_names(self):
        """Test every command-line circuit name builds, unknown names fail."""
        for name in ('ctd', 'pdd-only', 'braitenberg-lr', 'braitenberg-rl',
                     'braitenberg-bidirectional', 'ctd-ablated'):
            self.assertEqual(validate(build_circuit(name, 4, TEST_PARAMS)), [])
        with self.assertRaises(ConfigurationError):
            build_circuit('reichardt', 4)

    def test_build_circuit_passes_leaks(self):
        """Test the PDD and CMD leaks reach the right neurons."""
        ctd = build_circuit('ctd', 4, TEST_PARAMS, pdd_leak=0.25, cmd_leak=0.8)
        pdd_ids = {m for u in ctd.units_of_kind(UnitKind.PDD) for m in u.members}
        for neuron in ctd.neurons:
            self.assertEqual(neuron.leak, 0.25 if neuron.id in pdd_ids else 0.8)
        pdd_only = build_circuit('pdd-only', 5, pdd_leak=0.25)
        self.assertTrue(all(n.leak == 0.25 for n in pdd_only.neurons))


class TestWinnerTakeAll(unittest.TestCase):
    """Test PDD winner-take-all over a randomized scenario suite."""

    def random_scenario(self, rng, index):
        layout = SensorLayout(range=rng.uniform(0.5, 2.5), rate_min=10.0,
                              rate_max=rng.uniform(150.0, 900.0))
        objects = []
        for _ in range(rng.randint(1, 3)):
            if rng.random() < 0.5:
                objects.append(Trajectory.line((rng.uniform(-2, 2), rng.uniform(0.05, 1.5)),
                                               (rng.uniform(-2, 2), rng.uniform(0.05, 1.5)),
                                               rng.uniform(0.5, 60.0)))
            else:
                start = rng.uniform(0, math.pi)
                objects.append(Trajectory.arc((rng.uniform(-1, 1), rng.uniform(0.0, 1.0)),
                                              rng.uniform(0.05, 1.0), start,
                                              start + rng.uniform(-3, 3), rng.uniform(0.5, 20.0)))
        encoding = Encoding.POISSON if rng.random() < 0.5 else Encoding.REGULAR
        return Scenario(layout=layout, objects=tuple(objects), duration=0.12,
                        encoding=encoding, seed=index, name=f"random-{index}")

    def test_randomized_suite_has_no_double_winners(self):
        """Test 200 seeded scenarios never fire two members of one PDD unit together."""
        rng = random.Random(7)
        ctd = build_ctd(CtdConfig(cmd=TEST_PARAMS))
        pdd_columns = None
        for index in range(200):
            scenario = self.random_scenario(rng, index)
            trace = run(ctd, encode(scenario), scenario.horizon, scenario.seed)
            if pdd_columns is None:
                pdd_columns = [[trace.index_of(m) for m in unit.members]
                               for unit in ctd.units_of_kind(UnitKind.PDD)]
            for columns in pdd_columns:
                self.assertLessEqual(int(trace.fired[:, columns].sum(axis=1).max()), 1)
            self.assertEqual(check_trace_invariants(trace, ctd), [])


if __name__ == "__main__":
    unittest.main(verbosity=2)
