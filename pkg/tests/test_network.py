"""Network graphs: validation, serialization, cycle semantics, bookkeeping."""

import json

import pytest

from spikevar.errors import InvalidInputError, NetworkFormatError
from spikevar.network import (
    ClockedState,
    NetworkGraph,
    Neuron,
    Synapse,
    flatten,
    run_network,
    step_network,
)
from spikevar.rng import Stream


def single_neuron_graph(weight=1.0, delay=1, kind="perfect", **kw):
    return NetworkGraph(
        neurons=[Neuron("n0", 1.0)],
        synapses=[Synapse("in0", "n0", weight, delay)],
        inputs=["in0"],
        outputs=["n0"],
        kind=kind,
        **kw,
    )


def chain_graph(n=3):
    neurons = [Neuron(f"n{i}", 1.0) for i in range(n)]
    synapses = [Synapse("in0", "n0", 1.0, 1)]
    synapses += [Synapse(f"n{i}", f"n{i+1}", 1.0, 1) for i in range(n - 1)]
    return NetworkGraph(neurons, synapses, ["in0"], [f"n{n-1}"])


class TestStepSemantics:
    def test_immediate_threshold_after_delay(self):
        g = single_neuron_graph()
        events = run_network(g, {0: ["in0"]}, 4)
        assert events == [(1, "n0")]

    def test_three_neuron_chain(self):
        g = chain_graph(3)
        events = run_network(g, {0: ["in0"]}, 6)
        assert events == [(3, "n2")]

    def test_quiescent_without_input(self):
        g = chain_graph(3)
        assert run_network(g, {}, 50) == []

    def test_delay_correctness(self):
        for d in (1, 2, 5):
            g = single_neuron_graph(delay=d)
            events = run_network(g, {0: ["in0"]}, d + 2)
            assert events == [(d, "n0")]

    def test_simultaneous_arrivals_sum(self):
        g = NetworkGraph(
            neurons=[Neuron("n0", 1.0)],
            synapses=[Synapse("a", "n0", 0.5, 1), Synapse("b", "n0", 0.5, 1)],
            inputs=["a", "b"],
            outputs=["n0"],
        )
        assert run_network(g, {0: ["a", "b"]}, 3) == [(1, "n0")]
        assert run_network(g, {0: ["a"]}, 3) == []

    def test_unknown_input_port(self):
        g = single_neuron_graph()
        state = ClockedState.initial(g)
        with pytest.raises(InvalidInputError):
            step_network(g, state, ["nope"])

    def test_charge_bookkeeping_exact(self):
        # dyadic weights keep float sums exact: injected = tau*fires + excess + v
        stream = Stream(77)
        neurons = [Neuron(f"n{i}", 1.0) for i in range(4)]
        synapses = []
        sources = ["a", "b"] + [n.id for n in neurons]
        for k in range(14):
            w = (stream.randrange(256) - 128) / 64.0
            synapses.append(Synapse(stream.choice(sources),
                                    stream.choice(neurons).id,
                                    w, 1 + stream.randrange(3)))
        g = NetworkGraph(neurons, synapses, ["a", "b"], ["n0"])
        state = ClockedState.initial(g)
        for c in range(200):
            spikes = [p for p in ("a", "b") if stream.uniform() < 0.4]
            step_network(g, state, spikes)
        for n in neurons:
            balance = (state.injected[n.id]
                       - n.threshold * state.fire_counts[n.id]
                       - state.discarded_excess[n.id]
                       - state.voltages[n.id])
            assert balance == 0.0

    def test_noisy_step_consumes_stream(self):
        g = single_neuron_graph(weight=0.5, kind="noisy", sigma_a=0.6)
        state = ClockedState.initial(g)
        stream = Stream(5)
        before = stream._state
        step_network(g, state, ["in0"], stream)  # no arrivals yet: no draw
        assert stream._state == before
        step_network(g, state, [], stream)  # the charge arrives: one draw
        assert stream._state != before


class TestValidation:
    def test_duplicate_ids(self):
        g = NetworkGraph([Neuron("x"), Neuron("x")], [], ["i"], ["x"])
        with pytest.raises(NetworkFormatError):
            g.validate(require_connected=False)

    def test_dangling_synapse_named(self):
        g = NetworkGraph([Neuron("n0")], [Synapse("ghost", "n0", 1.0, 1)],
                         ["i"], ["n0"])
        with pytest.raises(NetworkFormatError, match="ghost"):
            g.validate(require_connected=False)

    def test_delay_zero_rejected(self):
        g = single_neuron_graph(delay=0)
        with pytest.raises(NetworkFormatError, match="delay"):
            g.validate()

    def test_unreachable_output(self):
        g = NetworkGraph([Neuron("n0"), Neuron("n1")],
                         [Synapse("i", "n0", 1.0, 1)], ["i"], ["n0", "n1"])
        with pytest.raises(NetworkFormatError, match="n1"):
            g.validate()
        g.validate(require_connected=False)

    def test_kind_parameter_consistency(self):
        with pytest.raises(NetworkFormatError):
            single_neuron_graph(kind="leaky").validate()  # t_cycles missing
        with pytest.raises(NetworkFormatError):
            single_neuron_graph(kind="perfect", sigma_a=0.6).validate()
        single_neuron_graph(kind="leaky", t_cycles=50.0).validate()
        single_neuron_graph(kind="noisy", sigma_a=0.6).validate()

    def test_input_port_name_clash(self):
        g = NetworkGraph([Neuron("x")], [Synapse("x", "x", 1.0, 1)], ["x"], ["x"])
        with pytest.raises(NetworkFormatError):
            g.validate()


class TestSerialization:
    def test_round_trip(self, tmp_path):
        g = NetworkGraph(
            neurons=[Neuron("n0", 1.0), Neuron("n1", 2.0)],
            synapses=[Synapse("in0", "n0", 0.5, 1), Synapse("n0", "n1", -0.25, 3)],
            inputs=["in0"],
            outputs=["n1"],
            kind="leaky_noisy", t_cycles=50.0, sigma_a=0.6,
        )
        path = tmp_path / "net.json"
        g.save(path)
        assert NetworkGraph.load(path) == g

    def test_unknown_field_rejected(self):
        doc = single_neuron_graph().to_dict()
        doc["placement"] = [1, 2, 3]
        with pytest.raises(NetworkFormatError, match="placement"):
            NetworkGraph.from_dict(doc)

    def test_missing_field_rejected(self):
        doc = single_neuron_graph().to_dict()
        del doc["outputs"]
        with pytest.raises(NetworkFormatError, match="outputs"):
            NetworkGraph.from_dict(doc)

    def test_dangling_endpoint_rejected_with_index(self):
        doc = single_neuron_graph().to_dict()
        doc["synapses"].append({"pre": "in0", "post": "missing", "weight": 1.0,
                                "delay": 1})
        with pytest.raises(NetworkFormatError, match=r"synapse 1"):
            NetworkGraph.from_dict(doc)

    def test_delay_zero_file_rejected(self):
        doc = single_neuron_graph().to_dict()
        doc["synapses"][0]["delay"] = 0
        with pytest.raises(NetworkFormatError, match="delay"):
            NetworkGraph.from_dict(doc)

    def test_fractional_delay_rejected(self):
        doc = single_neuron_graph().to_dict()
        doc["synapses"][0]["delay"] = 1.5
        with pytest.raises(NetworkFormatError):
            NetworkGraph.from_dict(doc)

    def test_bad_version(self):
        doc = single_neuron_graph().to_dict()
        doc["version"] = 99
        with pytest.raises(NetworkFormatError, match="version"):
            NetworkGraph.from_dict(doc)

    def test_not_json(self):
        with pytest.raises(NetworkFormatError):
            NetworkGraph.from_json("{nope")

    def test_field_names_exact(self):
        doc = single_neuron_graph().to_dict()
        assert set(doc) == {"version", "neuron_kind", "params", "neurons",
                            "synapses", "inputs", "outputs"}
        assert set(doc["params"]) == {"T_cycles", "sigma_a"}
        text = single_neuron_graph().to_json()
        assert json.loads(text) == doc


class TestFlatten:
    def test_flatten_orders_sources(self):
        g = NetworkGraph(
            neurons=[Neuron("n0"), Neuron("n1")],
            synapses=[Synapse("n0", "n1", 0.5, 2), Synapse("b", "n0", 1.0, 1),
                      Synapse("a", "n1", 0.25, 1)],
            inputs=["a", "b"],
            outputs=["n1"],
        )
        flat = flatten(g)
        assert flat.n_inputs == 2 and flat.n_neurons == 2
        # source order: a, b, n0, n1
        assert list(flat.src_off) == [0, 1, 2, 3, 3]
        assert list(flat.syn_post) == [1, 0, 1]
        assert list(flat.syn_weight) == [0.25, 1.0, 0.5]
        assert flat.max_delay == 2

    def test_run_network_deterministic(self):
        g = single_neuron_graph(weight=0.7, kind="noisy", sigma_a=0.6)
        schedule = {c: ["in0"] for c in range(0, 40, 2)}
        a = run_network(g, schedule, 50, seed=4)
        b = run_network(g, schedule, 50, seed=4)
        assert a == b
        c = run_network(g, schedule, 50, seed=5)
        assert isinstance(c, list)
