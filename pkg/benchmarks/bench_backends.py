"""Benchmark: compiled kernels vs the pure-Python fallback.

Times the three hot paths (closed-loop episodes, SDE integration, boundary
probe batteries) on both backends and prints the speedups.  Results are
verified to be bit-identical before timing -- the fallback is the semantics
of record, the extension is just fast.

Run:  python benchmarks/bench_backends.py [--repeat N]
"""

from __future__ import annotations

import argparse
import time

import numpy as np

from spikevar import backends
from spikevar.cartpole import EpisodeConfig, evaluate_fitness, input_ports
from spikevar.network import NetworkGraph, Neuron, Synapse
from spikevar.neuron import NeuronParams, SpikeTrain, simulate_sde
from spikevar.weightspace import ProbeBattery, map_behavior_boundaries


def demo_graph(kind="noisy", sigma_a=0.6):
    ports = input_ports()
    neurons = [Neuron("out_l", 1.0), Neuron("out_r", 1.0)]
    gains = {"x": 0.107, "xdot": 0.366, "theta": 0.774, "thetadot": 1.177}
    syn = []
    for var, gain in gains.items():
        for b in range(8):
            ramp = 0.2 * gain * (b - 3.5) / 3.5
            syn.append(Synapse(f"{var}_{b}", "out_r", 0.25 + ramp, 1))
            syn.append(Synapse(f"{var}_{b}", "out_l", 0.25 - ramp, 1))
    return NetworkGraph(neurons, syn, ports, ["out_l", "out_r"],
                        kind=kind, sigma_a=sigma_a)


def time_case(fn, repeat):
    best = float("inf")
    for _ in range(repeat):
        t0 = time.perf_counter()
        result = fn()
        best = min(best, time.perf_counter() - t0)
    return best, result


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--repeat", type=int, default=3)
    args = parser.parse_args()

    if "compiled" not in backends.available():
        raise SystemExit("compiled backend not built; run pip install -e . first")

    episode_graph = demo_graph()
    episode_cfg = EpisodeConfig(max_cycles=15_000)
    sde_params = NeuronParams(threshold=50.0, leak=0.02, noise_sigma=3.0)
    sde_train = SpikeTrain([[float(t) for t in range(5, 500, 7)],
                            [float(t) for t in range(3, 500, 11)]])
    battery = ProbeBattery.generate(n_probes=16, spikes_min=1, spikes_max=4,
                                    window=100.0, seed=1)

    cases = {
        "episode (noisy net, 20 trials)": lambda: evaluate_fitness(
            episode_graph, episode_cfg, trials=20, seed=3),
        "sde trace (500 ms, dt 0.05)": lambda: simulate_sde(
            sde_params, [8.0, 5.0], sde_train, dt=0.05, horizon=500.0,
            seed=7).voltages,
        "boundary probes (40x40 grid, sigma=0.1 tau)": lambda: map_behavior_boundaries(
            NeuronParams(threshold=50.0, noise_sigma=5.0), grid_cells=40,
            battery=battery, seed=5, sde_dt=1.0).signatures,
    }

    print(f"backends: {backends.available()}")
    width = max(len(k) for k in cases)
    for name, fn in cases.items():
        results = {}
        timings = {}
        for backend in ("python", "compiled"):
            backends.use(backend)
            timings[backend], results[backend] = time_case(fn, args.repeat)
        same = np.array_equal(np.asarray(results["python"], dtype=float),
                              np.asarray(results["compiled"], dtype=float))
        speedup = timings["python"] / timings["compiled"]
        print(f"{name:<{width}}  python {timings['python']*1e3:9.1f} ms"
              f"  compiled {timings['compiled']*1e3:8.1f} ms"
              f"  speedup {speedup:7.1f}x  bit-identical {same}")
    backends.use("compiled")


if __name__ == "__main__":
    main()
