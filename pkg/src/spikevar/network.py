"""Clocked spiking-network graphs and their cycle-level simulation.

A network is a directed graph of clocked integrate-and-fire neurons joined
by weighted synapses with integer cycle delays (>= 1).  Named input ports
inject external spikes; output ports are designated neurons whose firings
are reported to the caller.  All neurons of a network share one kind
(perfect / leaky / noisy / leaky_noisy) with kind-level parameters: a leak
time constant in cycles and an escape-noise deviation.

One cycle runs in a fixed order: deliver every spike arriving this cycle
(charges summed per neuron), update each neuron (leak, charge, firing test),
then enqueue the outgoing spikes of neurons that fired at cycle + delay.
Delays of at least one cycle plus this ordering make same-cycle feedback
impossible.

``step_network`` is the readable cycle-by-cycle API; closed-loop episodes
run in the selected backend kernel via the flattened array form
(``flatten``), which produces bit-identical spike sequences.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field, replace
from typing import Iterable, Sequence

import numpy as np

from .errors import InvalidInputError, NetworkFormatError
from .neuron import NeuronParams, step_clocked
from .rng import Stream

FILE_VERSION = 1
KINDS = ("perfect", "leaky", "noisy", "leaky_noisy")


@dataclass(frozen=True)
class Neuron:
    id: str
    threshold: float = 1.0


@dataclass(frozen=True)
class Synapse:
    pre: str  # neuron id or input port
    post: str  # neuron id
    weight: float
    delay: int = 1


@dataclass(frozen=True)
class NetworkGraph:
    """Immutable network description; the evolvable genome."""

    neurons: tuple[Neuron, ...]
    synapses: tuple[Synapse, ...]
    inputs: tuple[str, ...]
    outputs: tuple[str, ...]
    kind: str = "perfect"
    t_cycles: float = 0.0  # leak time constant in cycles; 0 = no leak
    sigma_a: float = 0.0  # escape-noise deviation; 0 = deterministic

    def __init__(self, neurons, synapses, inputs, outputs,
                 kind="perfect", t_cycles=0.0, sigma_a=0.0):
        object.__setattr__(self, "neurons", tuple(neurons))
        object.__setattr__(self, "synapses", tuple(synapses))
        object.__setattr__(self, "inputs", tuple(inputs))
        object.__setattr__(self, "outputs", tuple(outputs))
        object.__setattr__(self, "kind", kind)
        object.__setattr__(self, "t_cycles", float(t_cycles))
        object.__setattr__(self, "sigma_a", float(sigma_a))

    # -- derived values -------------------------------------------------

    @property
    def leak_per_cycle(self) -> float:
        return 1.0 / self.t_cycles if self.t_cycles > 0 else 0.0

    @property
    def decay_per_cycle(self) -> float:
        """Exact exponential per-cycle decay factor (1.0 when non-leaky)."""
        return math.exp(-self.leak_per_cycle) if self.t_cycles > 0 else 1.0

    def neuron_params(self, neuron: Neuron) -> NeuronParams:
        return NeuronParams(threshold=neuron.threshold,
                            leak=self.leak_per_cycle,
                            escape_sigma=self.sigma_a)

    def neuron_ids(self) -> tuple[str, ...]:
        return tuple(n.id for n in self.neurons)

    def weights(self) -> list[float]:
        return [s.weight for s in self.synapses]

    def with_weights(self, weights: Sequence[float]) -> "NetworkGraph":
        """Same topology with replaced synapse weights (order preserved)."""
        if len(weights) != len(self.synapses):
            raise InvalidInputError(
                f"{len(weights)} weights for {len(self.synapses)} synapses")
        syn = tuple(replace(s, weight=float(w))
                    for s, w in zip(self.synapses, weights))
        return NetworkGraph(self.neurons, syn, self.inputs, self.outputs,
                            self.kind, self.t_cycles, self.sigma_a)

    # -- validation ------------------------------------------------------

    def validate(self, require_connected: bool = True) -> None:
        """Raise NetworkFormatError on any structural defect."""
        ids = [n.id for n in self.neurons]
        id_set = set(ids)
        if len(ids) != len(id_set):
            raise NetworkFormatError("duplicate neuron ids")
        if not all(isinstance(i, str) and i for i in ids):
            raise NetworkFormatError("neuron ids must be non-empty strings")
        in_set = set(self.inputs)
        if len(in_set) != len(self.inputs):
            raise NetworkFormatError("duplicate input ports")
        if in_set & id_set:
            raise NetworkFormatError(
                f"names used as both input port and neuron id: {sorted(in_set & id_set)}")
        for n in self.neurons:
            if not (math.isfinite(n.threshold) and n.threshold > 0):
                raise NetworkFormatError(f"neuron {n.id}: threshold must be > 0")
        for k, s in enumerate(self.synapses):
            if s.pre not in in_set and s.pre not in id_set:
                raise NetworkFormatError(f"synapse {k}: unknown source {s.pre!r}")
            if s.post not in id_set:
                raise NetworkFormatError(f"synapse {k}: unknown target {s.post!r}")
            if not isinstance(s.delay, int) or s.delay < 1:
                raise NetworkFormatError(
                    f"synapse {k}: delay must be an integer >= 1, got {s.delay!r}")
            if not math.isfinite(s.weight):
                raise NetworkFormatError(f"synapse {k}: weight not finite")
        for o in self.outputs:
            if o not in id_set:
                raise NetworkFormatError(f"output port {o!r} is not a neuron id")
        if len(set(self.outputs)) != len(self.outputs):
            raise NetworkFormatError("duplicate output ports")
        if self.kind not in KINDS:
            raise NetworkFormatError(f"unknown neuron kind {self.kind!r}")
        wants_leak = self.kind in ("leaky", "leaky_noisy")
        wants_noise = self.kind in ("noisy", "leaky_noisy")
        if wants_leak != (self.t_cycles > 0):
            raise NetworkFormatError(
                f"kind {self.kind!r} inconsistent with T_cycles={self.t_cycles}")
        if wants_noise != (self.sigma_a > 0):
            raise NetworkFormatError(
                f"kind {self.kind!r} inconsistent with sigma_a={self.sigma_a}")
        if require_connected:
            reachable = self._reachable_from_inputs()
            for o in self.outputs:
                if o not in reachable:
                    raise NetworkFormatError(
                        f"output {o!r} is unreachable from every input port")

    def _reachable_from_inputs(self) -> set[str]:
        adj: dict[str, list[str]] = {}
        for s in self.synapses:
            adj.setdefault(s.pre, []).append(s.post)
        seen: set[str] = set()
        frontier = [p for p in self.inputs]
        while frontier:
            node = frontier.pop()
            for nxt in adj.get(node, ()):
                if nxt not in seen:
                    seen.add(nxt)
                    frontier.append(nxt)
        return seen

    def is_valid(self, require_connected: bool = True) -> bool:
        try:
            self.validate(require_connected)
            return True
        except NetworkFormatError:
            return False

    # -- serialization ----------------------------------------------------

    def to_dict(self) -> dict:
        return {
            "version": FILE_VERSION,
            "neuron_kind": self.kind,
            "params": {"T_cycles": self.t_cycles, "sigma_a": self.sigma_a},
            "neurons": [{"id": n.id, "threshold": n.threshold} for n in self.neurons],
            "synapses": [
                {"pre": s.pre, "post": s.post, "weight": s.weight, "delay": s.delay}
                for s in self.synapses
            ],
            "inputs": list(self.inputs),
            "outputs": list(self.outputs),
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=False)

    @classmethod
    def from_dict(cls, doc: dict) -> "NetworkGraph":
        graph = _parse_network_doc(doc)
        graph.validate(require_connected=True)
        return graph

    @classmethod
    def from_json(cls, text: str) -> "NetworkGraph":
        try:
            doc = json.loads(text)
        except json.JSONDecodeError as exc:
            raise NetworkFormatError(f"not valid JSON: {exc}") from exc
        return cls.from_dict(doc)

    def save(self, path) -> None:
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(self.to_json())
            fh.write("\n")

    @classmethod
    def load(cls, path) -> "NetworkGraph":
        with open(path, "r", encoding="utf-8") as fh:
            return cls.from_json(fh.read())


def _require_fields(doc: dict, fields: dict, where: str):
    unknown = set(doc) - set(fields)
    if unknown:
        raise NetworkFormatError(f"{where}: unknown field(s) {sorted(unknown)}")
    missing = [k for k, required in fields.items() if required and k not in doc]
    if missing:
        raise NetworkFormatError(f"{where}: missing field(s) {missing}")


def _parse_network_doc(doc) -> NetworkGraph:
    if not isinstance(doc, dict):
        raise NetworkFormatError("network document must be a JSON object")
    _require_fields(doc, {"version": True, "neuron_kind": True, "params": True,
                          "neurons": True, "synapses": True,
                          "inputs": True, "outputs": True}, "network")
    if doc["version"] != FILE_VERSION:
        raise NetworkFormatError(f"unsupported version {doc['version']!r}")
    params = doc["params"]
    if not isinstance(params, dict):
        raise NetworkFormatError("params: must be an object")
    _require_fields(params, {"T_cycles": True, "sigma_a": True}, "params")
    neurons = []
    for k, nd in enumerate(doc["neurons"]):
        if not isinstance(nd, dict):
            raise NetworkFormatError(f"neurons[{k}]: must be an object")
        _require_fields(nd, {"id": True, "threshold": True}, f"neurons[{k}]")
        neurons.append(Neuron(id=nd["id"], threshold=float(nd["threshold"])))
    synapses = []
    for k, sd in enumerate(doc["synapses"]):
        if not isinstance(sd, dict):
            raise NetworkFormatError(f"synapses[{k}]: must be an object")
        _require_fields(sd, {"pre": True, "post": True, "weight": True,
                             "delay": True}, f"synapses[{k}]")
        delay = sd["delay"]
        if not isinstance(delay, int) or isinstance(delay, bool):
            raise NetworkFormatError(f"synapses[{k}]: delay must be an integer")
        synapses.append(Synapse(pre=sd["pre"], post=sd["post"],
                                weight=float(sd["weight"]), delay=delay))
    return NetworkGraph(
        neurons=neurons,
        synapses=synapses,
        inputs=doc["inputs"],
        outputs=doc["outputs"],
        kind=doc["neuron_kind"],
        t_cycles=float(params["T_cycles"]),
        sigma_a=float(params["sigma_a"]),
    )


# -- cycle-by-cycle simulation ---------------------------------------------


@dataclass
class ClockedState:
    """Mutable simulation state of one network instance.

    Besides the dynamical state (voltages, in-flight spike queue, cycle
    counter) it keeps per-neuron charge accounting: total charge delivered,
    fire counts, and the super-threshold excess discarded at each reset.
    With no leak, injected = threshold * fires + excess + voltage holds for
    every neuron (exactly so when the weights are exactly representable).
    """

    voltages: dict[str, float]
    pending: dict[int, dict[str, float]] = field(default_factory=dict)
    cycle: int = 0
    fire_counts: dict[str, int] = field(default_factory=dict)
    injected: dict[str, float] = field(default_factory=dict)
    discarded_excess: dict[str, float] = field(default_factory=dict)

    @classmethod
    def initial(cls, graph: NetworkGraph) -> "ClockedState":
        ids = [n.id for n in graph.neurons]
        return cls(voltages={i: 0.0 for i in ids},
                   fire_counts={i: 0 for i in ids},
                   injected={i: 0.0 for i in ids},
                   discarded_excess={i: 0.0 for i in ids})


def step_network(
    graph: NetworkGraph,
    state: ClockedState,
    input_spikes: Iterable[str] = (),
    stream: Stream | None = None,
) -> list[str]:
    """Advance one cycle in place; returns the output ports that fired.

    ``input_spikes`` names the input ports receiving an external spike this
    cycle.  Spikes travel their synapse's delay before delivery, so an input
    at cycle c first affects a neuron at cycle c + 1 at the earliest.
    """
    spikes = set(input_spikes)
    unknown = spikes - set(graph.inputs)
    if unknown:
        raise InvalidInputError(f"unknown input port(s) {sorted(unknown)}")
    c = state.cycle
    # enqueue external spikes (inputs in declaration order, then synapse order)
    by_pre: dict[str, list[Synapse]] = {}
    for s in graph.synapses:
        by_pre.setdefault(s.pre, []).append(s)
    for port in graph.inputs:
        if port in spikes:
            for s in by_pre.get(port, ()):
                slot = state.pending.setdefault(c + s.delay, {})
                slot[s.post] = slot.get(s.post, 0.0) + s.weight
    arrivals = state.pending.pop(c, {})
    fired: list[str] = []
    for neuron in graph.neurons:
        charge = arrivals.get(neuron.id, 0.0)
        v_before = state.voltages[neuron.id]
        if charge != 0.0:
            state.injected[neuron.id] += charge
        v_after, did_fire = step_clocked(
            v_before, charge, graph.neuron_params(neuron), stream)
        if did_fire:
            # reconstruct the pre-reset potential to account for the discard
            pre = v_before * graph.decay_per_cycle + charge
            state.discarded_excess[neuron.id] += pre - neuron.threshold
            state.fire_counts[neuron.id] += 1
            fired.append(neuron.id)
        state.voltages[neuron.id] = v_after
    fired_set = set(fired)
    for neuron in graph.neurons:
        if neuron.id in fired_set:
            for s in by_pre.get(neuron.id, ()):
                slot = state.pending.setdefault(c + s.delay, {})
                slot[s.post] = slot.get(s.post, 0.0) + s.weight
    state.cycle = c + 1
    return [o for o in graph.outputs if o in fired_set]


def run_network(
    graph: NetworkGraph,
    input_schedule: dict[int, Iterable[str]],
    n_cycles: int,
    seed: int = 0,
) -> list[tuple[int, str]]:
    """Run ``n_cycles`` with a cycle-indexed input schedule.

    Returns (cycle, output port) for every output firing; a convenience
    wrapper around ``step_network`` for tests and traces.
    """
    graph.validate(require_connected=False)
    state = ClockedState.initial(graph)
    stream = Stream(seed)
    events: list[tuple[int, str]] = []
    for c in range(n_cycles):
        fired = step_network(graph, state, input_schedule.get(c, ()), stream)
        events.extend((c, o) for o in fired)
    return events


def run_episode(graph: NetworkGraph, config, trials: int = 1, seed: int = 0,
                max_cycles: int | None = None, jobs: int = 1) -> list[int]:
    """Closed-loop pole-balancing episode(s); returns per-trial cycle counts.

    Callers take the median for stochastic networks.  Delegates to
    cartpole.evaluate_fitness (same contract).
    """
    from .cartpole import evaluate_fitness

    return evaluate_fitness(graph, config, trials=trials, seed=seed,
                            max_cycles=max_cycles, jobs=jobs)


# -- flattened form consumed by the backend kernels -------------------------


@dataclass(frozen=True)
class FlatNet:
    """Array form of a NetworkGraph for the episode/step kernels.

    Sources are indexed input ports first (graph.inputs order), then neurons
    (graph.neurons order).  ``src_off`` is a CSR offset table into the
    synapse arrays; within one source, synapses keep their graph order so
    charge summation order is reproducible.
    """

    n_neurons: int
    n_inputs: int
    thresholds: np.ndarray
    decay: float
    sigma_a: float
    src_off: np.ndarray
    syn_post: np.ndarray
    syn_weight: np.ndarray
    syn_delay: np.ndarray
    max_delay: int
    input_index: dict[str, int]
    neuron_index: dict[str, int]


def flatten(graph: NetworkGraph) -> FlatNet:
    n_inputs = len(graph.inputs)
    input_index = {p: k for k, p in enumerate(graph.inputs)}
    neuron_index = {n.id: k for k, n in enumerate(graph.neurons)}
    n_sources = n_inputs + len(graph.neurons)
    per_source: list[list[Synapse]] = [[] for _ in range(n_sources)]
    for s in graph.synapses:
        if s.pre in input_index:
            per_source[input_index[s.pre]].append(s)
        else:
            per_source[n_inputs + neuron_index[s.pre]].append(s)
    src_off = np.zeros(n_sources + 1, dtype=np.int32)
    post, weight, delay = [], [], []
    for k, lst in enumerate(per_source):
        src_off[k + 1] = src_off[k] + len(lst)
        for s in lst:
            post.append(neuron_index[s.post])
            weight.append(s.weight)
            delay.append(s.delay)
    return FlatNet(
        n_neurons=len(graph.neurons),
        n_inputs=n_inputs,
        thresholds=np.asarray([n.threshold for n in graph.neurons], dtype=np.float64),
        decay=graph.decay_per_cycle,
        sigma_a=graph.sigma_a,
        src_off=src_off,
        syn_post=np.asarray(post, dtype=np.int32),
        syn_weight=np.asarray(weight, dtype=np.float64),
        syn_delay=np.asarray(delay, dtype=np.int32),
        max_delay=int(max((s.delay for s in graph.synapses), default=1)),
        input_index=input_index,
        neuron_index=neuron_index,
    )
