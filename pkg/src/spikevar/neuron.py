"""Integrate-and-fire neuron variants.

A neuron accumulates synapse-injected charge until its membrane voltage
reaches a threshold, emits a spike, and resets to exactly zero.  Four
variants are covered by one parameter set:

    perfect      no leak, no noise; the voltage is a weighted spike count
    leaky        charge decays exponentially between spikes
    noisy        continuous additive white noise on the membrane
    leaky_noisy  both non-idealities combined

Continuous-time simulation integrates

    C dV = (-g_L V + I(t)) dt + sigma dW

with synaptic Dirac impulses applied as instantaneous voltage jumps of the
synapse weight (the integration grid is split at spike times, so the
noise-free limits reproduce the closed forms exactly).  The noise term is
state-independent, so the Milstein correction vanishes and the scheme
coincides with Euler-Maruyama; the correction hook is kept in the kernels so
state-dependent noise stays possible.

Clocked simulation advances one network cycle at a time.  Deterministic
neurons fire on a threshold crossing; stochastic clocked neurons fire with an
Arrhenius-style escape probability

    P(fire | v) = min(1, exp(-(tau - v) / (tau sigma_a^2)))

evaluated once per cycle, and only on cycles where the potential changed.

Threshold comparisons use a 1e-12 relative slack so that a weight sitting
exactly on a critical value (e.g. tau/3) fires on the analytically predicted
spike count even though the accumulated float sum may round a hair below the
threshold.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from . import backends
from .errors import InvalidInputError, NonExcitatoryError
from .rng import Stream

#: Relative slack applied to every threshold comparison.
THRESHOLD_RTOL = 1e-12


def reaches_threshold(voltage: float, threshold: float) -> bool:
    """Threshold test shared by every simulation path."""
    return voltage >= threshold * (1.0 - THRESHOLD_RTOL)


@dataclass(frozen=True)
class NeuronParams:
    """Full parameterization of one integrate-and-fire neuron.

    ``leak`` is the leak rate g_L.  Its unit follows the simulation mode:
    1/ms in continuous time, 1/cycle in clocked mode (a clocked time constant
    of T cycles means leak = 1/T).  ``noise_sigma`` (mV/sqrt(ms)) drives the
    continuous SDE; ``escape_sigma`` (dimensionless) drives the clocked
    escape rule.  At most one of the two may be nonzero.
    """

    threshold: float
    leak: float = 0.0
    noise_sigma: float = 0.0
    escape_sigma: float = 0.0
    capacitance: float = 1.0  # fixed scale; weights are in voltage units

    def __post_init__(self):
        for name in ("threshold", "leak", "noise_sigma", "escape_sigma", "capacitance"):
            v = getattr(self, name)
            if not math.isfinite(v):
                raise InvalidInputError(f"{name} must be finite, got {v!r}")
        if self.threshold <= 0:
            raise InvalidInputError(f"threshold must be > 0, got {self.threshold}")
        if self.leak < 0 or self.noise_sigma < 0 or self.escape_sigma < 0:
            raise InvalidInputError("leak, noise_sigma and escape_sigma must be >= 0")
        if self.capacitance != 1.0:
            raise InvalidInputError("capacitance is fixed to 1.0 in this model")
        if self.noise_sigma > 0 and self.escape_sigma > 0:
            raise InvalidInputError(
                "noise_sigma (continuous mode) and escape_sigma (clocked mode) "
                "cannot both be nonzero"
            )


class SpikeTrain:
    """Per-synapse ascending spike times.

    ``times`` is one sequence of spike times (ms) per synapse.  Times must be
    finite and strictly ascending within a synapse; different synapses may
    spike simultaneously.
    """

    __slots__ = ("times",)

    def __init__(self, times: Sequence[Sequence[float]]):
        clean = []
        for i, ts in enumerate(times):
            arr = tuple(float(t) for t in ts)
            for t in arr:
                if not math.isfinite(t):
                    raise InvalidInputError(f"synapse {i}: spike time {t!r} not finite")
            if any(b <= a for a, b in zip(arr, arr[1:])):
                raise InvalidInputError(f"synapse {i}: spike times must strictly ascend")
            clean.append(arr)
        object.__setattr__(self, "times", tuple(clean))

    def __setattr__(self, *a):  # immutable value object
        raise AttributeError("SpikeTrain is immutable")

    @property
    def n_synapses(self) -> int:
        return len(self.times)

    @property
    def counts(self) -> tuple[int, ...]:
        return tuple(len(ts) for ts in self.times)

    @property
    def total_spikes(self) -> int:
        return sum(self.counts)

    def last_time(self) -> float:
        return max((ts[-1] for ts in self.times if ts), default=0.0)

    def merged(self) -> list[tuple[float, int]]:
        """All spikes as (time, synapse) sorted by time, ties by synapse index."""
        events = [(t, i) for i, ts in enumerate(self.times) for t in ts]
        events.sort()
        return events

    def __eq__(self, other):
        return isinstance(other, SpikeTrain) and self.times == other.times

    def __hash__(self):
        return hash(self.times)

    def __repr__(self):
        return f"SpikeTrain({[list(ts) for ts in self.times]})"


@dataclass(frozen=True)
class SimTrace:
    """Record of one membrane simulation.

    ``voltages[k]`` is the membrane voltage just after everything that
    happens at ``times[k]`` (jumps, threshold test, reset).  A reset
    accompanies every emitted spike, so ``resets`` equals ``spike_times``.
    """

    times: np.ndarray
    voltages: np.ndarray
    spike_times: np.ndarray
    params: NeuronParams | None = field(default=None, compare=False)

    @property
    def resets(self) -> np.ndarray:
        return self.spike_times

    @property
    def fired(self) -> bool:
        return len(self.spike_times) > 0


def _check_weights(weights, train: SpikeTrain) -> list[float]:
    w = [float(x) for x in weights]
    if len(w) == 0:
        raise InvalidInputError("weight vector is empty")
    if len(w) != train.n_synapses:
        raise InvalidInputError(
            f"{len(w)} weights for {train.n_synapses} synapses"
        )
    for x in w:
        if not math.isfinite(x):
            raise InvalidInputError(f"weight {x!r} not finite")
    return w


def integrate_perfect(weights, train: SpikeTrain, threshold: float) -> SimTrace:
    """Simulate a perfect (no leak, no noise) neuron on a spike train.

    Between resets the voltage is the weighted count of spikes received so
    far.  Simultaneous spikes are summed before the threshold test; charge in
    excess of the threshold is discarded on reset.
    """
    if threshold <= 0 or not math.isfinite(threshold):
        raise InvalidInputError(f"threshold must be finite and > 0, got {threshold}")
    w = _check_weights(weights, train)

    events = train.merged()
    times = [0.0]
    volts = [0.0]
    spikes: list[float] = []
    v = 0.0
    i = 0
    while i < len(events):
        t = events[i][0]
        jump = 0.0
        while i < len(events) and events[i][0] == t:
            jump += w[events[i][1]]
            i += 1
        v += jump
        if reaches_threshold(v, threshold):
            spikes.append(t)
            v = 0.0
        if times and times[-1] == t:
            volts[-1] = v
        else:
            times.append(t)
            volts.append(v)
    return SimTrace(
        times=np.asarray(times, dtype=np.float64),
        voltages=np.asarray(volts, dtype=np.float64),
        spike_times=np.asarray(spikes, dtype=np.float64),
        params=NeuronParams(threshold=threshold),
    )


def fire_count_single(threshold: float, w1: float) -> int:
    """Number of input spikes at which a single-input perfect neuron fires.

    Equals ceil(threshold / w1), with the same relative slack as the
    simulator so exactly-critical weights (w1 = threshold/f) give f.
    """
    if threshold <= 0 or not math.isfinite(threshold):
        raise InvalidInputError(f"threshold must be finite and > 0, got {threshold}")
    if not math.isfinite(w1):
        raise InvalidInputError(f"w1 must be finite, got {w1!r}")
    if w1 <= 0:
        raise NonExcitatoryError(
            f"single-input neuron with weight {w1} can never fire"
        )
    q = threshold / w1
    return max(1, math.ceil(q * (1.0 - THRESHOLD_RTOL)))


def voltage_leaky(weights, train: SpikeTrain, leak: float, t):
    """Sub-threshold closed form of the leaky neuron voltage (no reset).

    V(t) = sum_i w_i sum_j exp(-leak (t - t_ij)) * H(t - t_ij), with the
    Heaviside step H(0) = 1.  With leak = 0 this is the perfect-neuron
    voltage.  ``t`` may be a scalar or an array.
    """
    if leak < 0 or not math.isfinite(leak):
        raise InvalidInputError(f"leak must be finite and >= 0, got {leak}")
    w = _check_weights(weights, train)
    t_arr = np.asarray(t, dtype=np.float64)
    v = np.zeros_like(t_arr, dtype=np.float64)
    for wi, ts in zip(w, train.times):
        for tij in ts:
            lag = t_arr - tij
            live = lag >= 0.0
            if leak > 0.0:
                v = v + wi * np.exp(-leak * np.where(live, lag, 0.0)) * live
            else:
                v = v + wi * live
    return float(v) if np.isscalar(t) or t_arr.ndim == 0 else v


def simulate_sde(
    params: NeuronParams,
    weights,
    train: SpikeTrain,
    dt: float,
    horizon: float,
    seed: int,
) -> SimTrace:
    """Integrate the continuous-time neuron with threshold-and-reset.

    Milstein step with additive noise (the state-independent sigma makes the
    correction term vanish, so this coincides with Euler-Maruyama).  Synaptic
    impulses are applied as voltage jumps at their exact times by splitting
    the integration grid.  Fixed ``seed`` gives a bit-identical trace on
    either backend.
    """
    if not isinstance(params, NeuronParams):
        raise InvalidInputError("params must be a NeuronParams")
    if params.escape_sigma > 0:
        raise InvalidInputError("escape_sigma is a clocked-mode parameter; use step_clocked")
    if not (math.isfinite(dt) and dt > 0):
        raise InvalidInputError(f"dt must be finite and > 0, got {dt}")
    if not (math.isfinite(horizon) and horizon >= 0):
        raise InvalidInputError(f"horizon must be finite and >= 0, got {horizon}")
    w = _check_weights(weights, train) if train.n_synapses else []
    if train.last_time() > horizon:
        raise InvalidInputError("horizon must cover the latest input spike")

    events = train.merged()
    ev_t = np.asarray([e[0] for e in events], dtype=np.float64)
    ev_w = np.asarray([w[e[1]] for e in events], dtype=np.float64)

    n_steps = int(math.floor(horizon / dt + 1e-9))
    sample_t = np.arange(n_steps + 1, dtype=np.float64) * dt
    if horizon - sample_t[-1] > 1e-9 * dt:
        sample_t = np.append(sample_t, horizon)

    volts, spike_times = backends.get().sde_trace(
        params.threshold, params.leak, params.noise_sigma,
        ev_t, ev_w, sample_t, seed & ((1 << 64) - 1),
    )
    return SimTrace(
        times=sample_t,
        voltages=volts,
        spike_times=spike_times,
        params=params,
    )


def escape_fire_prob(v: float, threshold: float, sigma_a: float) -> float:
    """Clocked escape-rate firing probability, clamped to 1 at threshold.

    Strictly increasing in v below the threshold; exactly 1 for v >= tau.
    """
    if threshold <= 0 or not math.isfinite(threshold):
        raise InvalidInputError(f"threshold must be finite and > 0, got {threshold}")
    if sigma_a <= 0:
        raise InvalidInputError(
            "escape_fire_prob needs sigma_a > 0; "
            "use the deterministic threshold test instead"
        )
    if v >= threshold:
        return 1.0
    p = math.exp(-(threshold - v) / (threshold * sigma_a * sigma_a))
    return p if p < 1.0 else 1.0


def step_clocked(
    voltage: float,
    incoming_charge: float,
    params: NeuronParams,
    stream: Stream | None = None,
) -> tuple[float, bool]:
    """Advance a clocked neuron one cycle; returns (new voltage, fired).

    The old voltage decays by exp(-leak) (leak in 1/cycles), the summed
    incoming charge is added, then the firing test runs: a deterministic
    threshold crossing when escape_sigma = 0, otherwise one escape draw from
    ``stream`` -- taken only when the potential changed this cycle.  Firing
    resets the voltage to exactly 0.
    """
    if params.noise_sigma > 0:
        raise InvalidInputError("noise_sigma is a continuous-mode parameter; use simulate_sde")
    leaky = params.leak > 0.0
    v = voltage * math.exp(-params.leak) if leaky else voltage
    v += incoming_charge
    if params.escape_sigma == 0.0:
        fired = reaches_threshold(v, params.threshold)
    else:
        fired = False
        changed = incoming_charge != 0.0 or (leaky and voltage != 0.0)
        if changed:
            if stream is None:
                raise InvalidInputError("stochastic step_clocked needs a random stream")
            fired = stream.uniform() < escape_fire_prob(
                v, params.threshold, params.escape_sigma
            )
    return (0.0, True) if fired else (v, False)
