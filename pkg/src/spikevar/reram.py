"""Twin-memristor synapses: measured resistance-state statistics, weight-level
representations, sampling, quantization, and the variability-ramp experiment.

A synapse is a pair of resistive devices, one excitatory (M+) and one
inhibitory (M-), each programmable to one of n resistance levels (level 1 is
the low-resistance / high-conductance state).  The signed weight is the
conductance difference normalized by the conductance span of the extreme
level means, so the strongest positive representation maps to exactly +1.
With n levels per device the pair realizes 2n-1 weight levels
k = l(-) - l(+) in -(n-1)..(n-1), and a level generally has several device
representations (n - |k| of them), sampled with equal probability.

Each programmed device draws its resistance from the measured per-level
normal distribution; the ``variability`` scale multiplies the measured
standard deviations, interpolating between ideal devices (0) and the full
measured spread (1).  The ramp experiment re-programs every synapse of a
quantized network per sample and tracks the fitness distribution as
variability rises.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ._parallel import pmap
from .cartpole import EpisodeConfig, evaluate_fitness
from .errors import InvalidInputError
from .network import NetworkGraph
from .rng import Stream, derive_seed

#: Measured per-level resistance statistics of the reference 1T1R cell:
#: (target ohm, mean programmed ohm, sd programmed ohm), level 1 first.
REFERENCE_LEVELS = (
    (2750.0, 2790.0, 41.3),
    (5000.0, 5610.0, 425.0),
    (7750.0, 8380.0, 479.0),
    (10500.0, 11300.0, 617.0),
)


@dataclass(frozen=True)
class ResistanceLevel:
    target: float
    mean: float
    sd: float


@dataclass(frozen=True)
class ResistanceLevelTable:
    """Per-level programmed-resistance distributions of one device type."""

    levels: tuple[ResistanceLevel, ...]

    def __post_init__(self):
        if len(self.levels) < 2:
            raise InvalidInputError("need at least 2 resistance levels")
        means = [lv.mean for lv in self.levels]
        if any(b <= a for a, b in zip(means, means[1:])):
            raise InvalidInputError("level means must strictly ascend")
        if any(lv.sd <= 0 for lv in self.levels):
            raise InvalidInputError("level standard deviations must be > 0")
        if any(lv.mean <= 0 or lv.target <= 0 for lv in self.levels):
            raise InvalidInputError("resistances must be positive")

    @classmethod
    def default(cls) -> "ResistanceLevelTable":
        return cls(tuple(ResistanceLevel(*row) for row in REFERENCE_LEVELS))

    @property
    def n(self) -> int:
        return len(self.levels)

    def level(self, index: int) -> ResistanceLevel:
        """1-based device level."""
        if not 1 <= index <= self.n:
            raise InvalidInputError(f"device level {index} outside 1..{self.n}")
        return self.levels[index - 1]

    def conductance_span(self) -> float:
        """1/R_mean(level 1) - 1/R_mean(level n): the lambda=0 normalizer."""
        return 1.0 / self.levels[0].mean - 1.0 / self.levels[-1].mean

    @classmethod
    def from_csv(cls, path) -> "ResistanceLevelTable":
        rows = []
        with open(path, "r", encoding="utf-8") as fh:
            header = None
            for line in fh:
                line = line.strip()
                if not line or line.startswith("#"):
                    continue
                if header is None:
                    header = [c.strip() for c in line.split(",")]
                    expected = ["level", "target_ohm", "mean_ohm", "sd_ohm"]
                    if header != expected:
                        raise InvalidInputError(
                            f"resistance table header must be {expected}, got {header}")
                    continue
                cells = [c.strip() for c in line.split(",")]
                if len(cells) != 4:
                    raise InvalidInputError(f"bad resistance table row: {line!r}")
                rows.append((int(cells[0]), float(cells[1]), float(cells[2]),
                             float(cells[3])))
        rows.sort()
        if [r[0] for r in rows] != list(range(1, len(rows) + 1)):
            raise InvalidInputError("levels must be 1..n without gaps")
        return cls(tuple(ResistanceLevel(t, m, s) for _, t, m, s in rows))

    def to_csv(self, path) -> None:
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            fh.write("level,target_ohm,mean_ohm,sd_ohm\n")
            for k, lv in enumerate(self.levels, start=1):
                fh.write(f"{k},{lv.target!r},{lv.mean!r},{lv.sd!r}\n")


@dataclass(frozen=True)
class TwinRepresentation:
    """Device-level pair (excitatory, inhibitory) realizing one weight level."""

    excitatory: int  # M+ level, 1..n
    inhibitory: int  # M- level, 1..n

    @property
    def weight_level(self) -> int:
        return self.inhibitory - self.excitatory


def representations_for_level(k: int, n: int = 4) -> list[TwinRepresentation]:
    """All twin-device representations of weight level k; count is n - |k|."""
    if n < 2:
        raise InvalidInputError("need at least 2 device levels")
    if abs(k) > n - 1:
        raise InvalidInputError(f"weight level {k} outside +-{n - 1}")
    out = []
    for exc in range(1, n + 1):
        inh = exc + k
        if 1 <= inh <= n:
            out.append(TwinRepresentation(excitatory=exc, inhibitory=inh))
    return out


def sample_device_resistance(level: int, table: ResistanceLevelTable,
                             variability: float, stream: Stream) -> float:
    """One programmed resistance draw at the given variability scale.

    Normal(mean, (variability * sd)^2) truncated at +-4 sd and floored at
    1 ohm; variability 0 returns the mean exactly.
    """
    if not 0.0 <= variability <= 1.0:
        raise InvalidInputError(f"variability must be in [0, 1], got {variability}")
    lv = table.level(level)
    if variability == 0.0:
        return lv.mean
    while True:
        z = stream.normal()
        if abs(z) <= 4.0:
            break
    r = lv.mean + variability * lv.sd * z
    return r if r > 1.0 else 1.0


def ideal_weight(rep: TwinRepresentation, table: ResistanceLevelTable) -> float:
    """Normalized conductance difference of a representation at variability 0."""
    g_pos = 1.0 / table.level(rep.excitatory).mean
    g_neg = 1.0 / table.level(rep.inhibitory).mean
    return (g_pos - g_neg) / table.conductance_span()


def sample_weight(k: int, table: ResistanceLevelTable, variability: float,
                  stream: Stream) -> float:
    """One normalized weight draw for level k.

    Chooses one of the level's representations uniformly, programs both
    devices, and returns the normalized conductance difference; the
    strongest positive level at variability 0 is exactly +1.
    """
    rep = stream.choice(representations_for_level(k, table.n))
    r_pos = sample_device_resistance(rep.excitatory, table, variability, stream)
    r_neg = sample_device_resistance(rep.inhibitory, table, variability, stream)
    return (1.0 / r_pos - 1.0 / r_neg) / table.conductance_span()


def _sample_weight_with_rep(k, table, variability, stream):
    rep = stream.choice(representations_for_level(k, table.n))
    r_pos = sample_device_resistance(rep.excitatory, table, variability, stream)
    r_neg = sample_device_resistance(rep.inhibitory, table, variability, stream)
    value = (1.0 / r_pos - 1.0 / r_neg) / table.conductance_span()
    return value, rep


@dataclass(frozen=True)
class WeightLevelSample:
    """Draws of one weight level plus summary statistics."""

    level: int
    values: np.ndarray
    mean: float
    sd: float
    hist_counts: np.ndarray
    hist_edges: np.ndarray


def weight_value_distribution(k: int, table: ResistanceLevelTable,
                              variability: float, draws: int,
                              seed: int = 0, bins: int = 40) -> WeightLevelSample:
    """Repeated ``sample_weight`` draws with mean/sd/histogram summary."""
    if draws < 1:
        raise InvalidInputError("draws must be >= 1")
    stream = Stream(derive_seed(seed, 0x4E, k & 0xFFFF))
    values = np.asarray([sample_weight(k, table, variability, stream)
                         for _ in range(draws)])
    counts, edges = np.histogram(values, bins=bins)
    return WeightLevelSample(
        level=k, values=values,
        mean=float(values.mean()),
        sd=float(values.std(ddof=1)) if draws > 1 else 0.0,
        hist_counts=counts, hist_edges=edges,
    )


# -- network quantization ------------------------------------------------------


@dataclass(frozen=True)
class QuantizationScheme:
    """Uniform symmetric weight grid: representable values are step * k."""

    step: float
    max_level: int = 3  # 4 device levels -> weight levels -3..+3

    def __post_init__(self):
        if self.step <= 0 or not math.isfinite(self.step):
            raise InvalidInputError(f"step must be finite and > 0, got {self.step}")
        if self.max_level < 1:
            raise InvalidInputError("max_level must be >= 1")

    @classmethod
    def for_graph(cls, graph: NetworkGraph, max_level: int = 3,
                  scale: float = 1.0) -> "QuantizationScheme":
        """Default scale: the largest |weight| maps onto the extreme level.

        ``scale`` multiplies the step (a calibration knob when programming a
        specific network onto devices).
        """
        top = max((abs(s.weight) for s in graph.synapses), default=0.0)
        if top == 0.0:
            top = 1.0  # all-zero weights quantize to level 0 under any step
        return cls(step=top / max_level * scale, max_level=max_level)

    def level_of(self, weight: float) -> int:
        """Nearest representable level; ties round away from zero."""
        k = int(math.floor(abs(weight) / self.step + 0.5))
        k = min(k, self.max_level)
        return k if weight >= 0 else -k

    def value_of(self, level: int) -> float:
        return self.step * level


def quantize_network(graph: NetworkGraph, scheme: QuantizationScheme) -> NetworkGraph:
    """Round every synapse weight to the nearest representable level."""
    return graph.with_weights(
        [scheme.value_of(scheme.level_of(w)) for w in graph.weights()])


def synapse_levels(graph: NetworkGraph, scheme: QuantizationScheme) -> list[int]:
    return [scheme.level_of(w) for w in graph.weights()]


def program_network(graph: NetworkGraph, scheme: QuantizationScheme,
                    table: ResistanceLevelTable, variability: float,
                    stream: Stream) -> NetworkGraph:
    """One simulated device programming of a quantized network.

    Every synapse's weight is re-drawn through its level's twin-device
    model.  Nonzero levels rescale the draw so its variability-0 value lands
    exactly on the network's grid point (value / ideal * step * k); level-0
    synapses take an additive draw of sample_weight(0) * step.  At
    variability 0 this reproduces the quantized network exactly.
    """
    new_weights = []
    for w in graph.weights():
        k = scheme.level_of(w)
        if k == 0:
            value = sample_weight(0, table, variability, stream)
            new_weights.append(scheme.step * value)
        else:
            value, rep = _sample_weight_with_rep(k, table, variability, stream)
            ideal = ideal_weight(rep, table)
            new_weights.append(scheme.step * k * (value / ideal))
    return graph.with_weights(new_weights)


@dataclass(frozen=True)
class RampResult:
    """Fitness distributions over the variability grid."""

    variability: np.ndarray
    fitness: np.ndarray  # shape (n_lambda, samples); each entry a trial median

    def medians(self) -> np.ndarray:
        return np.median(self.fitness, axis=1)

    def iqr(self) -> np.ndarray:
        q1, q3 = np.percentile(self.fitness, [25.0, 75.0], axis=1)
        return q3 - q1


def variability_ramp(graph: NetworkGraph, scheme: QuantizationScheme,
                     table: ResistanceLevelTable, variability_grid=None,
                     samples: int = 100, config: EpisodeConfig | None = None,
                     trials: int = 1, seed: int = 0, jobs: int = 1) -> RampResult:
    """Fitness distribution of a quantized network as variability rises.

    Per (variability, sample): one independent device programming of the
    whole network (static weights for that sample's episodes), scored by the
    median of ``trials`` episodes over seeds shared across all samples.
    """
    config = config or EpisodeConfig()
    if variability_grid is None:
        variability_grid = default_variability_grid()
    grid = np.asarray([float(v) for v in variability_grid], dtype=np.float64)
    if np.any((grid < 0) | (grid > 1)):
        raise InvalidInputError("variability values must lie in [0, 1]")
    if samples < 1 or trials < 1:
        raise InvalidInputError("samples and trials must be >= 1")
    tasks = []
    for li in range(len(grid)):
        for si in range(samples):
            tasks.append((graph, scheme, table, float(grid[li]), config, trials,
                          derive_seed(seed, 0xD7A3, li, si), seed))
    scores = pmap(_ramp_worker, tasks, jobs)
    fitness = np.asarray(scores, dtype=np.float64).reshape(len(grid), samples)
    return RampResult(variability=grid, fitness=fitness)


def _ramp_worker(args) -> float:
    graph, scheme, table, lam, config, trials, draw_seed, master_seed = args
    programmed = program_network(graph, scheme, table, lam, Stream(draw_seed))
    counts = evaluate_fitness(programmed, config, trials=trials,
                              seed=derive_seed(master_seed, 0x7215))
    return float(np.median(counts))


def default_variability_grid(steps: int = 11) -> np.ndarray:
    return np.round(np.linspace(0.0, 1.0, steps), 10)
