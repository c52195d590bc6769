"""Pole balancing: physics, spike encoding/decoding, fitness accounting.

Classic inverted pendulum on a cart (cart 1.0 kg, pole 0.1 kg with 0.5 m
half-length, g = 9.8, bang-bang force of +-10 N), advanced with a
semi-implicit Euler step every 20 ms decision period.  An episode fails when
the pole angle leaves +-12 degrees or the cart leaves +-2.4 m; fitness is
the number of completed decision cycles before failure, capped at 15,000.

All traffic between environment and network is spikes.  Each of the four
state variables is clipped to its limit range and quantized onto 8 bins; the
port of the occupied bin receives one spike per decision period (4 spikes
per cycle across 32 input ports, named like ``theta_5``).  Two output
neurons vote left/right each period; the majority picks the force sign and
ties repeat the previous action (first tie: ``tie_default``).

The closed loop runs in the selected backend kernel; ``physics_step``,
``encode_inputs`` and ``decode_action`` are the same semantics piecewise for
composition and tests.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import backends
from .backends import pykernels as _pk
from .errors import InvalidInputError
from .network import FlatNet, NetworkGraph, flatten
from .rng import derive_seed

STATE_VARS = ("x", "xdot", "theta", "thetadot")


@dataclass(frozen=True)
class CartPoleState:
    x: float = 0.0
    x_dot: float = 0.0
    theta: float = 0.0
    theta_dot: float = 0.0

    def as_tuple(self) -> tuple[float, float, float, float]:
        return (self.x, self.x_dot, self.theta, self.theta_dot)


@dataclass(frozen=True)
class EpisodeConfig:
    """Task constants.  The defaults are the conventional benchmark values.

    ``x_dot_limit`` / ``theta_dot_limit`` only bound the input encoding (the
    velocities have no failure limit).  ``jitter`` scales the uniform
    initial-state draw: each variable starts within +-jitter * its limit.
    """

    dt: float = 0.02  # s per decision period (20 ms of simulated time)
    max_cycles: int = 15_000
    force_mag: float = 10.0  # N
    theta_limit: float = 12 * 2 * math.pi / 360  # rad
    x_limit: float = 2.4  # m
    x_dot_limit: float = 3.0  # m/s, encoding range only
    theta_dot_limit: float = 3.5  # rad/s, encoding range only
    n_bins: int = 8
    jitter: float = 0.05
    initial_x: float = 0.0  # episode start, before the jitter draw
    initial_x_dot: float = 0.0
    initial_theta: float = 0.0
    initial_theta_dot: float = 0.0
    sub_cycles: int = 1  # network cycles per decision period
    tie_default: int = -1  # vote tie on the first cycle pushes left
    gravity: float = 9.8
    cart_mass: float = 1.0
    pole_mass: float = 0.1
    pole_half_length: float = 0.5

    def __post_init__(self):
        if self.dt <= 0 or self.max_cycles <= 0:
            raise InvalidInputError("dt and max_cycles must be > 0")
        if self.n_bins < 2 or self.sub_cycles < 1:
            raise InvalidInputError("need n_bins >= 2 and sub_cycles >= 1")
        if self.tie_default not in (-1, 1):
            raise InvalidInputError("tie_default must be -1 or +1")

    def limit_of(self, var: str) -> float:
        return {"x": self.x_limit, "xdot": self.x_dot_limit,
                "theta": self.theta_limit, "thetadot": self.theta_dot_limit}[var]

    def failed(self, state: CartPoleState) -> bool:
        return (abs(state.theta) > self.theta_limit
                or abs(state.x) > self.x_limit)


def input_ports(config: EpisodeConfig | None = None) -> list[str]:
    """Canonical input port names, variable-major: x_0..x_7, xdot_0.. etc."""
    config = config or EpisodeConfig()
    return [f"{var}_{b}" for var in STATE_VARS for b in range(config.n_bins)]


def balance_task_config(sub_cycles: int = 2, max_cycles: int = 15_000,
                        **overrides) -> EpisodeConfig:
    """The deterministic balancing task driving the evolution, perturbation
    and variability experiments: a fixed three-degree initial tilt, no start
    jitter (fitness of a deterministic network is then a single number), and
    two network cycles per decision period.  The tilt is large enough that
    open-loop strategies fail and genuine feedback control must evolve.
    """
    defaults = dict(jitter=0.0, initial_theta=math.radians(3.0),
                    sub_cycles=sub_cycles, max_cycles=max_cycles)
    defaults.update(overrides)
    return EpisodeConfig(**defaults)


def physics_step(state: CartPoleState, force: float, dt: float,
                 config: EpisodeConfig | None = None) -> CartPoleState:
    """One semi-implicit Euler step of the cart-pole dynamics.

    Velocities update from the accelerations first, then positions update
    from the new velocities.  Matches the episode kernels bit for bit.
    """
    config = config or EpisodeConfig()
    for v in (*state.as_tuple(), force, dt):
        if not math.isfinite(v):
            raise InvalidInputError(f"non-finite physics input {v!r}")
    total_mass = config.cart_mass + config.pole_mass
    pml = config.pole_mass * config.pole_half_length
    x, xdot, theta, thetadot = state.as_tuple()
    costheta = math.cos(theta)
    sintheta = math.sin(theta)
    tmp = (force + pml * thetadot * thetadot * sintheta) / total_mass
    thetaacc = (config.gravity * sintheta - costheta * tmp) / (
        config.pole_half_length
        * (4.0 / 3.0 - config.pole_mass * costheta * costheta / total_mass))
    xacc = tmp - pml * thetaacc * costheta / total_mass
    xdot = xdot + dt * xacc
    x = x + dt * xdot
    thetadot = thetadot + dt * thetaacc
    theta = theta + dt * thetadot
    return CartPoleState(x, xdot, theta, thetadot)


def state_bins(state: CartPoleState, config: EpisodeConfig) -> tuple[int, ...]:
    """Occupied bin per state variable (clipped threshold-bin code)."""
    out = []
    for var, value in zip(STATE_VARS, state.as_tuple()):
        nrm = value / config.limit_of(var)
        if nrm > 1.0:
            nrm = 1.0
        elif nrm < -1.0:
            nrm = -1.0
        b = int((nrm + 1.0) * 0.5 * config.n_bins)
        out.append(min(b, config.n_bins - 1))
    return tuple(out)


def encode_inputs(state: CartPoleState, config: EpisodeConfig | None = None) -> list[str]:
    """Input ports spiking this cycle: one per state variable."""
    config = config or EpisodeConfig()
    bins = state_bins(state, config)
    return [f"{var}_{b}" for var, b in zip(STATE_VARS, bins)]


def decode_action(left_votes: int, right_votes: int, previous: int = -1) -> int:
    """Bang-bang force sign from the two output-port vote counts.

    Returns +1 (right) or -1 (left); a tie repeats the previous action
    (``previous`` defaults to the documented first-cycle value of -1).
    """
    if right_votes > left_votes:
        return 1
    if left_votes > right_votes:
        return -1
    if previous not in (-1, 1):
        raise InvalidInputError("previous action must be -1 or +1")
    return previous


def _env_vector(config: EpisodeConfig) -> np.ndarray:
    env = np.zeros(_pk.ENV_SIZE, dtype=np.float64)
    env[_pk.ENV_DT] = config.dt
    env[_pk.ENV_FORCE_MAG] = config.force_mag
    env[_pk.ENV_THETA_LIMIT] = config.theta_limit
    env[_pk.ENV_X_LIMIT] = config.x_limit
    env[_pk.ENV_XDOT_LIMIT] = config.x_dot_limit
    env[_pk.ENV_THETADOT_LIMIT] = config.theta_dot_limit
    env[_pk.ENV_JITTER] = config.jitter
    env[_pk.ENV_GRAVITY] = config.gravity
    env[_pk.ENV_CART_MASS] = config.cart_mass
    env[_pk.ENV_POLE_MASS] = config.pole_mass
    env[_pk.ENV_HALF_LENGTH] = config.pole_half_length
    env[_pk.ENV_TIE_DEFAULT] = config.tie_default
    env[_pk.ENV_INIT_X] = config.initial_x
    env[_pk.ENV_INIT_XDOT] = config.initial_x_dot
    env[_pk.ENV_INIT_THETA] = config.initial_theta
    env[_pk.ENV_INIT_THETADOT] = config.initial_theta_dot
    return env


def _enc_ports(flat: FlatNet, config: EpisodeConfig) -> np.ndarray:
    enc = np.full(4 * config.n_bins, -1, dtype=np.int32)
    for vi, var in enumerate(STATE_VARS):
        for b in range(config.n_bins):
            idx = flat.input_index.get(f"{var}_{b}")
            if idx is not None:
                enc[vi * config.n_bins + b] = idx
    return enc


def _episode_args(graph: NetworkGraph, config: EpisodeConfig):
    flat = flatten(graph)
    if len(graph.outputs) != 2:
        raise InvalidInputError(
            f"pole balancing needs exactly 2 output ports (left, right), "
            f"got {len(graph.outputs)}")
    out_left = flat.neuron_index[graph.outputs[0]]
    out_right = flat.neuron_index[graph.outputs[1]]
    return flat, out_left, out_right, _enc_ports(flat, config), _env_vector(config)


def run_single_episode(graph: NetworkGraph, config: EpisodeConfig, seed: int,
                       max_cycles: int | None = None,
                       record: np.ndarray | None = None) -> tuple[int, int]:
    """One closed-loop episode; returns (fitness, rows recorded)."""
    flat, out_left, out_right, enc, env = _episode_args(graph, config)
    cap = config.max_cycles if max_cycles is None else max_cycles
    return backends.get().episode(
        flat.thresholds, flat.decay, flat.sigma_a,
        flat.src_off, flat.syn_post, flat.syn_weight, flat.syn_delay,
        flat.n_inputs, out_left, out_right, flat.max_delay,
        enc, config.n_bins, env, cap, config.sub_cycles,
        seed & ((1 << 64) - 1), record)


def evaluate_fitness(graph: NetworkGraph, config: EpisodeConfig | None = None,
                     trials: int = 1, seed: int = 0,
                     max_cycles: int | None = None, jobs: int = 1) -> list[int]:
    """Per-trial balancing times for jittered initial states.

    Trial t runs with derive_seed(seed, t), so results do not depend on
    evaluation order or parallelism.
    """
    config = config or EpisodeConfig()
    if trials < 1:
        raise InvalidInputError("trials must be >= 1")
    flat, out_left, out_right, enc, env = _episode_args(graph, config)
    cap = config.max_cycles if max_cycles is None else max_cycles
    kern = backends.get()

    def one(t: int) -> int:
        fit, _ = kern.episode(
            flat.thresholds, flat.decay, flat.sigma_a,
            flat.src_off, flat.syn_post, flat.syn_weight, flat.syn_delay,
            flat.n_inputs, out_left, out_right, flat.max_delay,
            enc, config.n_bins, env, cap, config.sub_cycles,
            derive_seed(seed, t), None)
        return fit

    if jobs > 1 and trials > 1:
        from ._parallel import pmap

        return pmap(_trial_worker,
                    [(graph, config, seed, t, cap) for t in range(trials)],
                    jobs)
    return [one(t) for t in range(trials)]


def _trial_worker(args) -> int:
    graph, config, seed, t, cap = args
    fit, _ = run_single_episode(graph, config, derive_seed(seed, t),
                                max_cycles=cap)
    return fit


def median_fitness(graph: NetworkGraph, config: EpisodeConfig | None = None,
                   trials: int = 1, seed: int = 0, jobs: int = 1) -> float:
    return float(np.median(evaluate_fitness(graph, config, trials, seed, jobs=jobs)))


def trajectory(graph: NetworkGraph, config: EpisodeConfig | None = None,
               seed: int = 0) -> tuple[int, np.ndarray]:
    """Fitness plus the per-cycle record [cycle, x, xdot, theta, thetadot, action].

    Each row is the state seen by the controller and the action it chose,
    written before the physics step of that cycle.
    """
    config = config or EpisodeConfig()
    record = np.zeros((config.max_cycles, 6), dtype=np.float64)
    fitness, rows = run_single_episode(graph, config, seed, record=record)
    return fitness, record[:rows]
