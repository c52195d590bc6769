"""Critical weights, hyperplane enumeration, and empirical boundary maps."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from spikevar.errors import InvalidInputError, SingularSystemError
from spikevar.neuron import NeuronParams, SpikeTrain
from spikevar.rng import Stream
from spikevar.weightspace import (
    ProbeBattery,
    boundary_plane_agreement,
    critical_weights,
    enumerate_hyperplanes,
    harmonic_boundaries,
    map_behavior_boundaries,
    plane_distances,
)


class TestCriticalWeights:
    def test_two_condition_example(self):
        w = critical_weights([[2, 0], [1, 2]], 1.0)
        assert np.allclose(w, [0.5, 0.25], atol=1e-15)
        residual = np.asarray([[2, 0], [1, 2]]) @ w - 1.0
        assert np.max(np.abs(residual)) < 1e-12

    def test_identity_conditions(self):
        w = critical_weights(np.eye(4, dtype=int), 1.0)
        assert np.allclose(w, np.ones(4))

    def test_singular_matrix(self):
        with pytest.raises(SingularSystemError):
            critical_weights([[1, 1], [1, 1]], 1.0)

    def test_non_square_rejected(self):
        with pytest.raises(InvalidInputError):
            critical_weights([[1, 0, 2], [0, 1, 1]], 1.0)

    def test_negative_counts_rejected(self):
        with pytest.raises(InvalidInputError):
            critical_weights([[1, -1], [0, 1]], 1.0)

    def test_zero_row_rejected(self):
        with pytest.raises(InvalidInputError):
            critical_weights([[0, 0], [1, 1]], 1.0)

    @given(st.integers(1, 5),
           st.integers(0, 10_000),
           st.floats(0.5, 100.0))
    @settings(max_examples=80, deadline=None)
    def test_solver_round_trip(self, s, matrix_seed, tau):
        stream = Stream(matrix_seed)
        F = np.array([[stream.randrange(6) for _ in range(s)] for _ in range(s)])
        for row in F:
            if not row.any():
                row[stream.randrange(s)] = 1 + stream.randrange(5)
        try:
            w = critical_weights(F, tau)
        except SingularSystemError:
            return
        assert np.max(np.abs(F @ w - tau)) <= 1e-10 * max(1.0, tau)


class TestHarmonicBoundaries:
    def test_first_three(self):
        assert harmonic_boundaries(1.0, 3) == [1.0, 0.5, 1.0 / 3.0]

    def test_single(self):
        assert harmonic_boundaries(50.0, 1) == [50.0]

    def test_five(self):
        assert harmonic_boundaries(50.0, 5) == [50.0, 25.0, 50.0 / 3.0, 12.5, 10.0]

    def test_descending(self):
        b = harmonic_boundaries(7.0, 20)
        assert all(x > y for x, y in zip(b, b[1:]))


class TestEnumerateHyperplanes:
    def test_single_synapse_matches_harmonics(self):
        normals = enumerate_hyperplanes(1, 3, 1.0)
        assert sorted(normals) == [(1,), (2,), (3,)]
        boundaries = sorted((1.0 / f[0] for f in normals), reverse=True)
        assert boundaries == harmonic_boundaries(1.0, 3)

    def test_two_synapses_single_spike(self):
        assert sorted(enumerate_hyperplanes(2, 1)) == [(0, 1), (1, 0), (1, 1)]

    def test_count_two_synapses(self):
        assert len(enumerate_hyperplanes(2, 2)) == 8  # {0,1,2}^2 minus origin

    def test_scaled_conditions_are_distinct(self):
        normals = enumerate_hyperplanes(2, 4)
        assert (1, 1) in normals and (2, 2) in normals

    def test_bad_args(self):
        with pytest.raises(InvalidInputError):
            enumerate_hyperplanes(0, 3)


def small_map(sigma=0.0, leak=0.0, cells=40, probes=24, seed=11, **kw):
    params = NeuronParams(threshold=50.0, leak=leak, noise_sigma=sigma)
    battery = ProbeBattery.generate(n_probes=probes, spikes_min=1, spikes_max=4,
                                    window=100.0, seed=seed)
    return map_behavior_boundaries(params, grid_cells=cells, battery=battery,
                                   seed=seed, sde_dt=1.0, **kw), battery


class TestBoundaryMap:
    def test_deterministic_boundaries_lie_on_planes(self):
        bmap, battery = small_map()
        assert bmap.boundary_count() > 0
        planes = enumerate_hyperplanes(2, battery.max_spike_count(), 50.0)
        near = boundary_plane_agreement(bmap, planes, 1.0)
        assert near.all()

    def test_single_probe_single_spike_boundary_at_threshold(self):
        params = NeuronParams(threshold=50.0)
        battery = ProbeBattery(trains=(SpikeTrain([[10.0], []]),), window=100.0,
                               seed=0)
        bmap = map_behavior_boundaries(params, grid_cells=50, battery=battery,
                                       seed=0)
        w1_flagged = sorted(set(bmap.boundary_points()[0]))
        # only the fire/no-fire edge at w1 = threshold shows up
        assert w1_flagged == [49.0, 50.0]

    def test_signatures_constant_inside_polytope(self):
        bmap, battery = small_map()
        # the open region above w1 + w2 = tau and below the axes' planes:
        # every train fires once one spike arrived on each synapse
        axis = bmap.axis
        picks = [(i, j) for i in range(len(axis)) for j in range(len(axis))
                 if axis[i] + axis[j] > 52.0 and axis[i] < 48.0 and axis[j] < 48.0]
        sigs = {tuple(bmap.signatures[i, j]) for i, j in picks}
        assert len(sigs) == 1

    def test_signature_changes_across_plane(self):
        params = NeuronParams(threshold=50.0)
        battery = ProbeBattery(trains=(SpikeTrain([[5.0], [5.0]]),), window=50.0,
                               seed=0)
        bmap = map_behavior_boundaries(params, grid_cells=50, battery=battery,
                                       seed=0)
        i_lo = 20  # w = 21: 21+21 < 50 -> silent
        i_hi = 30  # w = 31: 31+31 > 50 -> fires
        assert bmap.signatures[i_lo, i_lo, 0] == 0
        assert bmap.signatures[i_hi, i_hi, 0] == 1

    def test_noise_produces_distinct_signatures(self):
        params = NeuronParams(threshold=50.0, noise_sigma=5.0)
        battery = ProbeBattery.generate(n_probes=16, spikes_min=1, spikes_max=4,
                                        window=100.0, seed=3)
        distinct = set()
        for seed in range(100):
            bmap = map_behavior_boundaries(params, grid_cells=2, battery=battery,
                                           seed=seed, sde_dt=1.0, grid_max=26.0)
            distinct.add(tuple(bmap.signatures[1, 1]))
            if len(distinct) >= 2:
                break
        assert len(distinct) >= 2

    def test_noisy_map_has_more_boundary(self):
        bmap0, _ = small_map(sigma=0.0, cells=30, probes=16)
        bmap1, _ = small_map(sigma=25.0, cells=30, probes=16)
        assert bmap1.boundary_count() > bmap0.boundary_count()

    def test_grid_above_threshold_rejected(self):
        params = NeuronParams(threshold=50.0)
        with pytest.raises(InvalidInputError):
            map_behavior_boundaries(params, grid_cells=10, grid_max=51.0, seed=0)

    def test_boundary_flags_symmetric(self):
        bmap, _ = small_map(cells=25, probes=12)
        sig = bmap.signatures
        flag = bmap.boundary
        n = sig.shape[0]
        for i in range(n):
            for j in range(n):
                if i + 1 < n and (sig[i, j] != sig[i + 1, j]).any():
                    assert flag[i, j] and flag[i + 1, j]

    def test_map_reproducible(self):
        a, _ = small_map(cells=20, probes=8, sigma=10.0)
        b, _ = small_map(cells=20, probes=8, sigma=10.0)
        assert np.array_equal(a.signatures, b.signatures)


class TestBatteryAndHelpers:
    def test_battery_shapes(self):
        bat = ProbeBattery.generate(n_probes=32, spikes_min=1, spikes_max=6,
                                    window=200.0, seed=1)
        assert bat.size == 32
        for t in bat.trains:
            assert t.n_synapses == 2
            assert all(1 <= c <= 6 for c in t.counts)
            assert t.last_time() <= 200.0
        assert 1 <= bat.max_spike_count() <= 6

    def test_battery_deterministic(self):
        a = ProbeBattery.generate(seed=9)
        b = ProbeBattery.generate(seed=9)
        assert a.trains == b.trains

    def test_plane_distances(self):
        d = plane_distances(np.array([25.0]), np.array([25.0]), [(1, 1)], 50.0)
        assert d[0] == pytest.approx(0.0, abs=1e-12)
        d = plane_distances(np.array([30.0]), np.array([30.0]), [(1, 1)], 50.0)
        assert d[0] == pytest.approx(10.0 / np.sqrt(2.0), rel=1e-12)

    def test_signature_hex(self):
        bmap, _ = small_map(cells=20, probes=8)
        hexstr = bmap.signature_hex(19, 19)
        assert len(hexstr) == 2
        bits = bmap.signatures[19, 19]
        assert int(hexstr, 16) == sum(1 << p for p, b in enumerate(bits) if b)
