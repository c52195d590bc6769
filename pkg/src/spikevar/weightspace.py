"""Weight-space geometry of perfect-neuron behaviors and empirical boundary maps.

For a deterministic neuron, every integer vector of per-synapse spike counts
whose weighted sum reaches the threshold defines a firing condition, i.e. a
hyperplane f . w = tau in weight space.  The planes partition the space into
convex polytopes of identical behavior.  ``critical_weights`` solves a
square system of firing conditions exactly; ``enumerate_hyperplanes`` lists
the condition normals up to a spike-count bound.

``map_behavior_boundaries`` is the empirical counterpart: a fixed battery of
random spike trains probes a two-synapse neuron at every point of a weight
grid, and cells whose fire/no-fire signature differs from an axis neighbor
are flagged as boundaries.  With noise, each probe runs one stochastic trial
(per-cell seeds derived from the master seed, so the map does not depend on
evaluation order).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from itertools import product

import numpy as np

from . import backends
from .errors import InvalidInputError, SingularSystemError
from .neuron import NeuronParams, SpikeTrain
from .rng import Stream, derive_seed


def critical_weights(firing_conditions, threshold: float) -> np.ndarray:
    """Solve F . w = tau for the critical weight vector.

    ``firing_conditions`` is a square matrix of nonnegative spike counts, one
    row per condition.  The solve is exact (rational arithmetic), so the
    returned floats satisfy F . w = tau to rounding error.
    """
    F = np.asarray(firing_conditions)
    if F.ndim != 2 or F.shape[0] != F.shape[1]:
        raise InvalidInputError(f"firing-condition matrix must be square, got {F.shape}")
    if F.size == 0:
        raise InvalidInputError("firing-condition matrix is empty")
    if not np.all(F == np.floor(F)) or np.any(F < 0):
        raise InvalidInputError("firing conditions must be nonnegative integers")
    if not np.any(F > 0, axis=1).all():
        raise InvalidInputError("every firing condition needs a positive spike count")
    if not (math.isfinite(threshold) and threshold > 0):
        raise InvalidInputError(f"threshold must be finite and > 0, got {threshold}")
    n = F.shape[0]
    # Gauss-Jordan over exact rationals
    aug = [[Fraction(int(F[i, j])) for j in range(n)] + [Fraction(1)]
           for i in range(n)]
    for col in range(n):
        pivot = next((r for r in range(col, n) if aug[r][col] != 0), None)
        if pivot is None:
            raise SingularSystemError("firing-condition matrix is singular")
        aug[col], aug[pivot] = aug[pivot], aug[col]
        pv = aug[col][col]
        aug[col] = [x / pv for x in aug[col]]
        for r in range(n):
            if r != col and aug[r][col] != 0:
                factor = aug[r][col]
                aug[r] = [x - factor * y for x, y in zip(aug[r], aug[col])]
    # solution of F.w = 1-vector, scaled by the threshold
    return np.asarray([float(aug[i][n]) for i in range(n)]) * threshold


def harmonic_boundaries(threshold: float, f_max: int) -> list[float]:
    """Critical weights of a single-input neuron: tau/f for f = 1..f_max."""
    if not (math.isfinite(threshold) and threshold > 0):
        raise InvalidInputError(f"threshold must be finite and > 0, got {threshold}")
    if f_max < 1:
        raise InvalidInputError(f"f_max must be >= 1, got {f_max}")
    return [threshold / f for f in range(1, f_max + 1)]


def enumerate_hyperplanes(n_synapses: int, max_spikes: int, threshold: float = 1.0
                          ) -> list[tuple[int, ...]]:
    """All firing-condition normals f with entries in 0..max_spikes, f != 0.

    A plane and its integer multiple (e.g. f and 2f) encode different spike
    conditions against the same threshold, hence different planes; only exact
    duplicates are dropped (none arise from the plain enumeration).  The
    plane of a normal f is sum_i f_i w_i = threshold.
    """
    if n_synapses < 1 or max_spikes < 1:
        raise InvalidInputError("need n_synapses >= 1 and max_spikes >= 1")
    seen = set()
    out = []
    for f in product(range(max_spikes + 1), repeat=n_synapses):
        if any(f) and f not in seen:
            seen.add(f)
            out.append(f)
    return out


def plane_distances(w1, w2, normals, threshold: float) -> np.ndarray:
    """Pointwise Euclidean distance from (w1, w2) to the nearest plane."""
    w1 = np.asarray(w1, dtype=np.float64)
    w2 = np.asarray(w2, dtype=np.float64)
    best = np.full(np.broadcast(w1, w2).shape, np.inf)
    for f in normals:
        norm = math.hypot(f[0], f[1])
        d = np.abs(f[0] * w1 + f[1] * w2 - threshold) / norm
        best = np.minimum(best, d)
    return best


@dataclass(frozen=True)
class ProbeBattery:
    """A fixed battery of random two-synapse spike trains.

    The same battery is applied at every grid point.  Each train carries
    spikes_min..spikes_max spikes per synapse at sorted uniform times inside
    the window (a Poisson process conditioned on its count).
    """

    trains: tuple[SpikeTrain, ...]
    window: float
    seed: int

    @classmethod
    def generate(cls, n_probes: int = 64, spikes_min: int = 1, spikes_max: int = 6,
                 window: float = 200.0, seed: int = 0) -> "ProbeBattery":
        if n_probes < 1:
            raise InvalidInputError("need at least one probe")
        if not (1 <= spikes_min <= spikes_max):
            raise InvalidInputError("need 1 <= spikes_min <= spikes_max")
        if window <= 0:
            raise InvalidInputError("window must be > 0")
        stream = Stream(derive_seed(seed, 0xBA77E4))
        trains = []
        for _ in range(n_probes):
            per_syn = []
            for _syn in range(2):
                count = spikes_min + stream.randrange(spikes_max - spikes_min + 1)
                while True:
                    times = sorted(stream.uniform() * window for _ in range(count))
                    if all(b > a for a, b in zip(times, times[1:])):
                        break
                per_syn.append(times)
            trains.append(SpikeTrain(per_syn))
        return cls(trains=tuple(trains), window=window, seed=seed)

    @property
    def size(self) -> int:
        return len(self.trains)

    def max_spike_count(self) -> int:
        """Largest per-synapse spike count realized in the battery."""
        return max(max(t.counts) for t in self.trains)

    def flat_events(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """(probe offsets, event times, synapse indices) for the kernels."""
        off = np.zeros(len(self.trains) + 1, dtype=np.int32)
        times: list[float] = []
        syn: list[int] = []
        for k, train in enumerate(self.trains):
            events = train.merged()
            off[k + 1] = off[k] + len(events)
            times.extend(t for t, _ in events)
            syn.extend(s for _, s in events)
        return off, np.asarray(times, dtype=np.float64), np.asarray(syn, dtype=np.int32)


@dataclass(frozen=True)
class BoundaryMap:
    """Grid of probe signatures with boundary flags.

    ``signatures[i, j, p]`` is 1 if the neuron with weights
    (axis[i], axis[j]) fired on probe p.  ``boundary[i, j]`` is True when the
    signature differs from at least one 4-neighborhood axis neighbor (a
    symmetric relation).
    """

    axis: np.ndarray
    signatures: np.ndarray
    boundary: np.ndarray
    params: NeuronParams
    battery: ProbeBattery

    @property
    def cell_size(self) -> float:
        return float(self.axis[1] - self.axis[0]) if len(self.axis) > 1 else float(self.axis[0])

    def boundary_count(self) -> int:
        return int(self.boundary.sum())

    def boundary_points(self) -> tuple[np.ndarray, np.ndarray]:
        """(w1, w2) coordinates of the flagged cells."""
        ii, jj = np.nonzero(self.boundary)
        return self.axis[ii], self.axis[jj]

    def signature_hex(self, i: int, j: int) -> str:
        bits = self.signatures[i, j]
        value = 0
        for p, b in enumerate(bits):
            if b:
                value |= 1 << p
        width = max(1, (len(bits) + 3) // 4)
        return f"{value:0{width}x}"


def map_behavior_boundaries(
    params: NeuronParams,
    grid_cells: int = 100,
    battery: ProbeBattery | None = None,
    seed: int = 0,
    sde_dt: float = 0.5,
    grid_max: float | None = None,
) -> BoundaryMap:
    """Empirical behavior-boundary map of a two-synapse neuron.

    The grid spans (0, tau] per axis with ``grid_cells`` points (the upper
    bound may be lowered via ``grid_max``, never raised above tau).  Every
    cell runs the whole battery once -- deterministically when noise is off,
    one stochastic trial per probe otherwise -- and is flagged when its
    signature differs from an axis neighbor.
    """
    if params.escape_sigma > 0:
        raise InvalidInputError("boundary maps use continuous-time neurons")
    if grid_cells < 2:
        raise InvalidInputError("grid needs at least 2 cells per axis")
    top = params.threshold if grid_max is None else float(grid_max)
    if top > params.threshold * (1 + 1e-12):
        raise InvalidInputError(
            f"grid upper bound {top} exceeds the threshold {params.threshold}")
    if top <= 0:
        raise InvalidInputError("grid upper bound must be > 0")
    battery = battery or ProbeBattery.generate(seed=seed)
    axis = np.arange(1, grid_cells + 1, dtype=np.float64) * (top / grid_cells)
    off, ev_t, ev_syn = battery.flat_events()
    horizon = battery.window
    if len(ev_t) and ev_t.max() > horizon:
        raise InvalidInputError("battery window shorter than its latest spike")
    signatures = backends.get().probe_map(
        params.threshold, params.leak, params.noise_sigma,
        axis, off, ev_t, ev_syn, sde_dt, horizon,
        derive_seed(seed, 0x9A9) & ((1 << 64) - 1))
    boundary = _neighbor_differs(signatures)
    return BoundaryMap(axis=axis, signatures=signatures, boundary=boundary,
                       params=params, battery=battery)


def _neighbor_differs(signatures: np.ndarray) -> np.ndarray:
    diff = np.zeros(signatures.shape[:2], dtype=bool)
    ne = (signatures[1:, :, :] != signatures[:-1, :, :]).any(axis=2)
    diff[1:, :] |= ne
    diff[:-1, :] |= ne
    ne = (signatures[:, 1:, :] != signatures[:, :-1, :]).any(axis=2)
    diff[:, 1:] |= ne
    diff[:, :-1] |= ne
    return diff


def boundary_plane_agreement(bmap: BoundaryMap, normals, tolerance_cells: float = 1.0
                             ) -> np.ndarray:
    """Per flagged cell: is it within ``tolerance_cells`` of an analytic plane?

    Distance is perpendicular point-to-plane distance in units of the grid
    cell size.
    """
    w1, w2 = bmap.boundary_points()
    if len(w1) == 0:
        return np.zeros(0, dtype=bool)
    dist = plane_distances(w1, w2, normals, bmap.params.threshold)
    return dist <= tolerance_cells * bmap.cell_size * (1 + 1e-9)
