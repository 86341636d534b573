"""
Tuning module for the curved trajectory detector.
Calibrates CMD weights against frequency bands and verifies them by simulation.
"""

import logging
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Tuple

import numpy as np
import pandas as pd
from scipy.optimize import bisect, brentq
from scipy.signal import lfilter

from circuits import CmdParams, attach, build_cmd_unit, build_pdd
from config.settings import SimSettings
from decode import Proximity
from scenario import constant_rate_train, regular_spike_steps
from spike_core import (CalibrationError, CircuitTopology, ConfigurationError, SpikeEngine,
                        TopologyError)

# Set up logging
logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class BandSpec:
    """F/M boundary ``f1`` and M/N boundary ``f2`` in spikes/s, swept over [rate_min, rate_max]."""
    f1: float = SimSettings.BAND_F1_HZ
    f2: float = SimSettings.BAND_F2_HZ
    tolerance: float = SimSettings.BAND_TOLERANCE
    rate_min: float = SimSettings.RATE_MIN_HZ
    rate_max: float = SimSettings.RATE_MAX_HZ

    def violations(self) -> List[str]:
        problems = []
        if not 0 < self.f1 < self.f2:
            problems.append("0 < f1 < f2")
        if not 0 < self.tolerance < 0.5:
            problems.append("0 < tolerance < 0.5")
        if not self.rate_min < self.f1 or not self.f2 < self.rate_max:
            problems.append("rate_min < f1 and f2 < rate_max")
        return problems


@dataclass
class BandReport:
    """Outcome of a constant-rate sweep through one CMD unit."""
    rates: List[float]
    states: List[str]
    fired_sets: List[List[str]] = field(default_factory=list)
    measured_f1: Optional[float] = None
    measured_f2: Optional[float] = None
    monotone: bool = False
    passed: bool = False

    def to_frame(self) -> pd.DataFrame:
        frame = pd.DataFrame({'rate': self.rates, 'state': self.states})
        if self.fired_sets:
            frame['uninhibited'] = [''.join(s) for s in self.fired_sets]
        return frame

    def to_dict(self) -> Dict:
        return {
            'f1': self.measured_f1,
            'f2': self.measured_f2,
            'monotone': self.monotone,
            'sweep': [{'rate': round(r, 6), 'state': s} for r, s in zip(self.rates, self.states)],
        }


def onset_rate(weight: float, threshold: float, leak: float, dt: float) -> float:
    """
    Minimal constant rate whose mean steady-state potential reaches ``threshold``.

    Args:
        weight: Synaptic weight
        threshold: Firing threshold
        leak: Per-step retention in [0, 1)
        dt: Step in seconds

    Returns:
        float: threshold * (1 - leak) / (weight * dt) in spikes/s
    """
    if leak >= 1.0:
        raise ConfigurationError("Onset rate is undefined for leak = 1 (unbounded integration)")
    if weight <= 0 or dt <= 0:
        raise ConfigurationError("weight and dt must be > 0")
    return threshold * (1.0 - leak) / (weight * dt)


def steady_fires(weight: float, threshold: float, leak: float, spikes: np.ndarray,
                 settle: int = 0, refractory: int = SimSettings.DEFAULT_REFRACTORY) -> bool:
    """
    Whether a lone leaky neuron driven by ``spikes`` fires at or after step ``settle``.

    Args:
        weight: Input weight
        threshold: Firing threshold
        leak: Per-step retention
        spikes: Boolean input per step
        settle: First step that counts
        refractory: Refractory steps after a fire

    Returns:
        bool: True if the neuron fires in the counted span
    """
    v, blocked = 0.0, 0
    for t, spike in enumerate(spikes.tolist()):
        v = leak * v + (weight if spike else 0.0)
        if v >= threshold - SimSettings.FIRE_EPSILON and blocked == 0:
            if t >= settle:
                return True
            v, blocked = 0.0, refractory
        else:
            blocked = max(blocked - 1, 0)
    return False


class BandCalibrator:
    """Finds CMD weights whose simulated onsets match a BandSpec."""

    def __init__(self, bands: BandSpec, leak: float = SimSettings.CMD_LEAK,
                 dt: float = SimSettings.DT_SECONDS, horizon: int = SimSettings.SWEEP_HORIZON,
                 retries: int = SimSettings.CALIBRATION_RETRIES,
                 priority_inhibition_weight: float = SimSettings.PRIORITY_INHIBITION_WEIGHT):
        """
        Initialize the calibrator.

        Args:
            bands: Target band boundaries
            leak: CMD neuron leak
            dt: Step in seconds
            horizon: Sweep length in steps; the second half is the steady portion
            retries: Threshold rescales tried after the first attempt
            priority_inhibition_weight: Weight stored in the resulting CmdParams
        """
        self.bands = bands
        self.leak = leak
        self.dt = dt
        self.horizon = horizon
        self.retries = retries
        self.priority_inhibition_weight = priority_inhibition_weight
        logger.info(f"Band calibrator initialized (f1={bands.f1}, f2={bands.f2}, leak={leak})")

    def _spikes(self, rate: float) -> np.ndarray:
        return regular_spike_steps(np.full(self.horizon, float(rate)), self.dt)

    def _fires(self, weight: float, threshold: float, rate: float) -> bool:
        return steady_fires(weight, threshold, self.leak, self._spikes(rate), settle=self.horizon // 2)

    def steady_peak(self, rate: float) -> float:
        """Peak potential over the steady portion of a unit-weight neuron that never fires."""
        potential = lfilter([1.0], [1.0, -self.leak], self._spikes(rate).astype(float))
        return float(potential[self.horizon // 2:].max())

    def minimal_weight(self, threshold: float, rate: float) -> float:
        """
        Smallest weight whose steady-state peak potential reaches ``threshold`` at ``rate``.

        Args:
            threshold: Firing threshold of the state neuron
            rate: Band boundary in spikes/s

        Returns:
            float: Root of weight * peak - threshold
        """
        peak = self.steady_peak(rate)
        if peak <= 0:
            raise CalibrationError(f"No input spikes reach the neuron at {rate} spikes/s",
                                   constraint="rate_min < f1 and f2 < rate_max")
        # A single spike already gives peak >= 1, so [0, threshold] brackets the root
        return brentq(lambda weight: weight * peak - threshold, 0.0, threshold, xtol=1e-12)

    def simulated_onset(self, weight: float, threshold: float, xtol: float = 1e-3) -> Optional[float]:
        """Lowest rate in [rate_min, rate_max] at which the neuron fires; None if it never does."""
        lo, hi = self.bands.rate_min, self.bands.rate_max
        if self._fires(weight, threshold, lo):
            return lo
        if not self._fires(weight, threshold, hi):
            return None
        return bisect(lambda rate: 1.0 if self._fires(weight, threshold, rate) else -1.0,
                      lo, hi, xtol=xtol)

    def _attempt(self, thresholds: Tuple[float, float, float]) -> Tuple[CmdParams, List[str]]:
        t_n, t_m, t_f = thresholds
        # A lone spike must reach T_F so F fires whenever anything is sensed
        w_f = t_f
        w_m = self.minimal_weight(t_m, self.bands.f1)
        w_n = self.minimal_weight(t_n, self.bands.f2)
        params = CmdParams(weights=(w_n, w_m, w_f), thresholds=thresholds,
                           priority_inhibition_weight=self.priority_inhibition_weight)
        problems = params.violations()

        onsets = {
            'F': self.simulated_onset(w_f, t_f),
            'M': self.simulated_onset(w_m, t_m),
            'N': self.simulated_onset(w_n, t_n),
        }
        if onsets['F'] is None or onsets['F'] > self.bands.rate_min:
            problems.append("onset(F) <= rate_min")
        for state, target in (('M', self.bands.f1), ('N', self.bands.f2)):
            onset = onsets[state]
            if onset is None or abs(onset - target) > self.bands.tolerance * target:
                problems.append(f"onset({state}) = {target} within tolerance")
        estimates = {state: round(onset_rate(w, t, self.leak, self.dt), 3)
                     for state, w, t in zip(('N', 'M', 'F'), params.weights, thresholds)}
        logger.debug(f"Calibration attempt T={thresholds}: W={params.weights}, "
                     f"onsets={onsets}, formula onsets={estimates}, problems={problems}")
        return params, problems

    def calibrate(self) -> CmdParams:
        """
        Pin the threshold scale, solve the weights and check both inequality chains.

        Returns:
            CmdParams: Calibrated parameters

        Raises:
            CalibrationError: When no threshold scale within the retry limit works
        """
        problems = self.bands.violations()
        if problems:
            raise CalibrationError(f"Infeasible bands: {problems[0]}", constraint=problems[0])

        base_n, base_m, base_f = SimSettings.CMD_THRESHOLDS
        for attempt in range(self.retries + 1):
            thresholds = (base_n, base_m + attempt, base_f + 2 * attempt)
            params, problems = self._attempt(thresholds)
            if not problems:
                logger.info(f"Calibrated CMD params: W={tuple(round(w, 4) for w in params.weights)}, "
                            f"T={params.thresholds}")
                return params
            logger.warning(f"Calibration attempt {attempt + 1} failed: {problems[0]}")
        raise CalibrationError(f"No feasible CMD parameters after {self.retries} retries: "
                               f"{problems[0]}", constraint=problems[0])


def calibrate(bands: BandSpec, leak: float = SimSettings.CMD_LEAK,
              dt: float = SimSettings.DT_SECONDS) -> CmdParams:
    """Calibrate CMD parameters for ``bands``."""
    return BandCalibrator(bands, leak, dt).calibrate()


def band_sweep_topology(params: CmdParams, leak: float,
                        priority_inhibition: bool = True) -> CircuitTopology:
    """Single sensor relayed by one PDD unit into one CMD unit, built even for invalid params."""
    pdd = build_pdd(1)
    fragment = build_cmd_unit(params, pdd.unit(0), unit_id=1, first_neuron_id=3, leak=leak,
                              priority_inhibition=priority_inhibition, check=False)
    return attach(pdd, [fragment], name="band-sweep")


def _steady_fired(engine: SpikeEngine, rate: float, horizon: int, dt: float) -> List[str]:
    trace = engine.run([constant_rate_train('S1', rate, horizon, dt)], horizon)
    columns = [trace.index_of(m) for m in engine.topology.unit(1).members]
    fired = trace.fired[horizon // 2:, columns].any(axis=0)
    return [state for state, hit in zip(('N', 'M', 'F'), fired) if hit]


def verify_bands(params: CmdParams, bands: BandSpec, leak: float = SimSettings.CMD_LEAK,
                 dt: float = SimSettings.DT_SECONDS, points: int = SimSettings.SWEEP_POINTS,
                 horizon: int = SimSettings.SWEEP_HORIZON,
                 include_uninhibited: bool = True) -> BandReport:
    """
    Sweep constant-rate trains through a CMD unit and measure the band boundaries.

    Parameters breaking the inequality chains are still swept; the report
    then fails instead of raising.

    Args:
        params: CMD parameters under test
        bands: Expected boundaries and sweep range
        leak: CMD neuron leak
        dt: Step in seconds
        points: Number of sweep rates, at least 30
        horizon: Steps per rate; the second half is decoded
        include_uninhibited: Also record the fired sets without priority inhibition

    Returns:
        BandReport: Decoded state per rate, measured boundaries and pass/fail
    """
    if points < 2:
        raise ConfigurationError(f"Sweep needs at least 2 points, got {points}")
    rates = np.linspace(bands.rate_min, bands.rate_max, points)
    step = float(rates[1] - rates[0])
    problems = params.violations()
    if problems:
        logger.warning(f"Sweeping CMD parameters that break {problems}")
    try:
        engine = SpikeEngine(band_sweep_topology(params, leak, priority_inhibition=True))
        open_engine = (SpikeEngine(band_sweep_topology(params, leak, priority_inhibition=False))
                       if include_uninhibited else None)
    except TopologyError as e:
        logger.warning(f"Band sweep skipped: {e}")
        return BandReport(rates=[float(r) for r in rates],
                          states=[Proximity.NONE.value] * len(rates))

    states, fired_sets = [], []
    for rate in rates:
        fired = _steady_fired(engine, rate, horizon, dt)
        states.append(fired[0] if fired else Proximity.NONE.value)
        if open_engine is not None:
            fired_sets.append(_steady_fired(open_engine, rate, horizon, dt))

    ranks = [Proximity(s).rank for s in states]
    active = [r for r in ranks if r > Proximity.NONE.rank]
    # Bands must open in F and only climb towards N
    monotone = (bool(active) and active[0] == Proximity.F.rank
                and all(b >= a for a, b in zip(ranks, ranks[1:])))
    measured_f1 = measured_f2 = None
    for k in range(1, len(rates)):
        midpoint = float(0.5 * (rates[k - 1] + rates[k]))
        if measured_f1 is None and ranks[k - 1] <= Proximity.F.rank < ranks[k]:
            measured_f1 = midpoint
        if measured_f2 is None and ranks[k - 1] < Proximity.N.rank <= ranks[k]:
            measured_f2 = midpoint

    passed = (not problems and monotone
              and measured_f1 is not None and measured_f2 is not None
              and Proximity.NONE.rank not in ranks
              and abs(measured_f1 - bands.f1) <= bands.tolerance * bands.f1 + step
              and abs(measured_f2 - bands.f2) <= bands.tolerance * bands.f2 + step)
    report = BandReport(rates=[float(r) for r in rates], states=states, fired_sets=fired_sets,
                        measured_f1=measured_f1, measured_f2=measured_f2,
                        monotone=monotone, passed=passed)
    logger.info(f"Band sweep: f1={measured_f1}, f2={measured_f2}, passed={passed}")
    return report
