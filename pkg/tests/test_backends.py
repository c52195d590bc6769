"""Compiled and pure-Python kernels must agree bit for bit."""

import numpy as np
import pytest

from spikevar import backends
from spikevar.cartpole import EpisodeConfig, input_ports, trajectory
from spikevar.network import NetworkGraph, Neuron, Synapse
from spikevar.neuron import NeuronParams, SpikeTrain, simulate_sde
from spikevar.weightspace import ProbeBattery, map_behavior_boundaries

HAVE_COMPILED = "compiled" in backends.available()

pytestmark = pytest.mark.skipif(
    not HAVE_COMPILED, reason="compiled extension not built; fallback active")


@pytest.fixture
def both_backends():
    previous = backends.name()
    yield
    backends.use(previous)


def run_on(backend, fn):
    backends.use(backend)
    try:
        return fn()
    finally:
        pass


def test_python_backend_always_available():
    assert "python" in backends.available()


def test_unknown_backend_rejected():
    with pytest.raises(ValueError):
        backends.use("fortran")


def test_sde_traces_bit_identical(both_backends):
    cases = [
        (NeuronParams(threshold=1.0), [0.5, 0.25], SpikeTrain([[1.0, 2.0], [2.0]])),
        (NeuronParams(threshold=5.0, leak=0.05), [2.0, 1.0],
         SpikeTrain([[0.5, 3.3], [1.0]])),
        (NeuronParams(threshold=2.0, noise_sigma=0.8), [0.9], SpikeTrain([[1.0]])),
        (NeuronParams(threshold=3.0, leak=0.1, noise_sigma=1.5), [1.0, -0.5],
         SpikeTrain([[0.25, 0.5, 4.999], [0.5]])),
    ]
    for params, w, train in cases:
        for seed in (0, 1, 123456789):
            results = {}
            for b in ("compiled", "python"):
                backends.use(b)
                tr = simulate_sde(params, w, train, dt=0.173, horizon=5.0, seed=seed)
                results[b] = tr
            assert np.array_equal(results["compiled"].voltages,
                                  results["python"].voltages)
            assert np.array_equal(results["compiled"].spike_times,
                                  results["python"].spike_times)


def _demo_graph(kind, sigma_a=0.0, t_cycles=0.0):
    ports = input_ports()
    neurons = [Neuron("out_l", 1.0), Neuron("out_r", 1.0), Neuron("h0", 1.0)]
    syn = []
    for b in range(4):
        syn.append(Synapse(f"theta_{b}", "out_l", 0.75, 1))
        syn.append(Synapse(f"thetadot_{b}", "out_l", 0.5, 2))
    for b in range(4, 8):
        syn.append(Synapse(f"theta_{b}", "out_r", 0.75, 1))
        syn.append(Synapse(f"thetadot_{b}", "out_r", 0.5, 2))
    syn.append(Synapse("x_7", "h0", 1.0, 1))
    syn.append(Synapse("h0", "out_l", 0.6, 3))
    syn.append(Synapse("out_l", "out_r", -0.4, 1))
    return NetworkGraph(neurons, syn, ports, ["out_l", "out_r"], kind=kind,
                        sigma_a=sigma_a, t_cycles=t_cycles)


def test_episodes_bit_identical(both_backends):
    graphs = [
        _demo_graph("perfect"),
        _demo_graph("leaky", t_cycles=50.0),
        _demo_graph("noisy", sigma_a=0.6),
        _demo_graph("leaky_noisy", sigma_a=0.6, t_cycles=50.0),
    ]
    cfg = EpisodeConfig(max_cycles=2000, sub_cycles=2)
    for g in graphs:
        for seed in (0, 7):
            results = {}
            for b in ("compiled", "python"):
                backends.use(b)
                results[b] = trajectory(g, cfg, seed=seed)
            f_c, rec_c = results["compiled"]
            f_p, rec_p = results["python"]
            assert f_c == f_p
            assert np.array_equal(rec_c, rec_p)


def test_probe_maps_bit_identical(both_backends):
    battery = ProbeBattery.generate(n_probes=12, spikes_min=1, spikes_max=4,
                                    window=60.0, seed=3)
    for params in (NeuronParams(threshold=50.0),
                   NeuronParams(threshold=50.0, leak=0.02),
                   NeuronParams(threshold=50.0, noise_sigma=9.0)):
        results = {}
        for b in ("compiled", "python"):
            backends.use(b)
            results[b] = map_behavior_boundaries(params, grid_cells=12,
                                                 battery=battery, seed=5,
                                                 sde_dt=0.7)
        assert np.array_equal(results["compiled"].signatures,
                              results["python"].signatures)
        assert np.array_equal(results["compiled"].boundary,
                              results["python"].boundary)


def test_composed_step_api_matches_kernel(both_backends):
    # the readable step-by-step loop reproduces the kernel's episode exactly
    from spikevar.cartpole import CartPoleState, decode_action, encode_inputs, physics_step
    from spikevar.network import ClockedState, step_network
    from spikevar.rng import Stream

    cfg = EpisodeConfig(max_cycles=600)
    g = _demo_graph("noisy", sigma_a=0.6)
    seed = 11
    fit_kernel, rec = trajectory(g, cfg, seed=seed)

    stream = Stream(seed)
    s = CartPoleState(
        cfg.initial_x + stream.uniform_signed() * (cfg.jitter * cfg.x_limit),
        cfg.initial_x_dot + stream.uniform_signed() * (cfg.jitter * cfg.x_dot_limit),
        cfg.initial_theta + stream.uniform_signed() * (cfg.jitter * cfg.theta_limit),
        cfg.initial_theta_dot + stream.uniform_signed() * (cfg.jitter * cfg.theta_dot_limit),
    )
    state = ClockedState.initial(g)
    prev = cfg.tie_default
    fit = 0
    for cycle in range(cfg.max_cycles):
        fired = step_network(g, state, encode_inputs(s, cfg), stream)
        action = decode_action(fired.count("out_l"), fired.count("out_r"), prev)
        prev = action
        assert rec[cycle, 5] == action
        assert rec[cycle, 1] == s.x and rec[cycle, 3] == s.theta
        s = physics_step(s, action * cfg.force_mag, cfg.dt, cfg)
        if cfg.failed(s):
            break
        fit += 1
    assert fit == fit_kernel
