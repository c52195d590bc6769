"""Weight-perturbation robustness: decay curves, half-fitness magnitude, t-test.

The perturbation protocol treats the synapse weights incident on each neuron
as one point in that neuron's threshold-normalized weight space.  A
perturbation of magnitude m moves every neuron's point by an independent
uniformly random direction of exactly length m (random sign in one
dimension); topology, delays and thresholds never change.

A robustness curve samples several independent perturbations per magnitude,
scores each with the kind's trial protocol (one trial for deterministic
networks, median of 20 for noisy ones), and keeps the per-magnitude median.
Fitness trials share one common set of derived seeds across all magnitudes
and samples, so the zero-magnitude entry reproduces the unperturbed fitness
exactly and curves are paired comparisons.

``half_fitness_magnitude`` reads off where the median first drops below
half of the maximum fitness; ``welch_t_test`` compares two samples of that
metric without assuming equal variances (Welch/Satterthwaite, two-sided
Student-t p-value computed via the regularized incomplete beta function).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ._parallel import pmap
from .cartpole import EpisodeConfig, evaluate_fitness
from .errors import InvalidInputError, UndefinedMetricError, UndefinedStatisticError
from .network import NetworkGraph
from .rng import Stream, derive_seed


def _unit_direction(dim: int, stream: Stream) -> list[float]:
    if dim == 1:
        return [stream.sign()]
    while True:
        g = [stream.normal() for _ in range(dim)]
        norm = math.sqrt(sum(x * x for x in g))
        if norm > 0.0:
            return [x / norm for x in g]


def perturb_weights(graph: NetworkGraph, magnitude: float,
                    stream: Stream) -> NetworkGraph:
    """Move each neuron's incident weight vector by ``magnitude`` (normalized).

    Weights are divided by the postsynaptic neuron's threshold, shifted by a
    random direction of exact length ``magnitude``, and scaled back.  Neurons
    without incident synapses are untouched.  Only weights change.
    """
    if magnitude < 0 or not math.isfinite(magnitude):
        raise InvalidInputError(f"magnitude must be finite and >= 0, got {magnitude}")
    incident: dict[str, list[int]] = {}
    for k, s in enumerate(graph.synapses):
        incident.setdefault(s.post, []).append(k)
    new_weights = list(graph.weights())
    thresholds = {n.id: n.threshold for n in graph.neurons}
    for neuron in graph.neurons:  # fixed draw order
        idxs = incident.get(neuron.id)
        if not idxs:
            continue
        tau = thresholds[neuron.id]
        delta = _unit_direction(len(idxs), stream)
        for d, k in zip(delta, idxs):
            new_weights[k] = (new_weights[k] / tau + magnitude * d) * tau
    return graph.with_weights(new_weights)


@dataclass(frozen=True)
class PerturbationCurve:
    """Fitness-vs-perturbation data: all samples plus per-magnitude medians."""

    magnitudes: np.ndarray  # ascending, starting at 0
    fitness: np.ndarray  # shape (n_magnitudes, n_samples)
    medians: np.ndarray

    @property
    def n_samples(self) -> int:
        return self.fitness.shape[1]


def robustness_curve(graph: NetworkGraph, config: EpisodeConfig | None = None,
                     magnitudes=None, samples: int = 10, trials: int = 1,
                     seed: int = 0, jobs: int = 1) -> PerturbationCurve:
    """Sample the fitness decay of a network under growing perturbation.

    At each magnitude, ``samples`` independent perturbations are drawn and
    each perturbed network is scored by the median of ``trials`` episodes.
    """
    config = config or EpisodeConfig()
    if magnitudes is None:
        magnitudes = default_magnitudes()
    mags = np.asarray(sorted(float(m) for m in magnitudes), dtype=np.float64)
    if len(mags) == 0 or mags[0] < 0:
        raise InvalidInputError("magnitudes must be nonnegative")
    if samples < 1 or trials < 1:
        raise InvalidInputError("samples and trials must be >= 1")
    tasks = []
    for mi in range(len(mags)):
        for si in range(samples):
            tasks.append((graph, config, float(mags[mi]), trials,
                          derive_seed(seed, 0x9E27, mi, si), seed))
    scores = pmap(_curve_worker, tasks, jobs)
    fitness = np.asarray(scores, dtype=np.float64).reshape(len(mags), samples)
    return PerturbationCurve(
        magnitudes=mags,
        fitness=fitness,
        medians=np.median(fitness, axis=1),
    )


def _curve_worker(args) -> float:
    graph, config, magnitude, trials, perturb_seed, master_seed = args
    perturbed = perturb_weights(graph, magnitude, Stream(perturb_seed))
    # trial seeds shared across every (magnitude, sample) cell: paired design
    counts = evaluate_fitness(perturbed, config, trials=trials,
                              seed=derive_seed(master_seed, 0x7215))
    return float(np.median(counts))


def default_magnitudes(stop: float = 0.40, step: float = 0.02) -> np.ndarray:
    return np.round(np.arange(0.0, stop + step / 2, step), 10)


@dataclass(frozen=True)
class HalfFitnessPoint:
    magnitude: float
    censored: bool  # True when the curve never fell below half fitness


def half_fitness_magnitude(curve: PerturbationCurve,
                           max_fitness: float) -> HalfFitnessPoint:
    """First magnitude where the median crosses 50% of ``max_fitness``.

    Linear interpolation between the bracketing grid points; curves that
    never cross return the largest tested magnitude flagged as censored.
    """
    half = 0.5 * max_fitness
    med = curve.medians
    if med[0] < half:
        raise UndefinedMetricError(
            f"median at magnitude 0 ({med[0]:.0f}) already below half fitness")
    for i in range(1, len(med)):
        if med[i] < half:
            lo, hi = curve.magnitudes[i - 1], curve.magnitudes[i]
            f_lo, f_hi = med[i - 1], med[i]
            frac = (f_lo - half) / (f_lo - f_hi)
            return HalfFitnessPoint(float(lo + frac * (hi - lo)), False)
    return HalfFitnessPoint(float(curve.magnitudes[-1]), True)


# -- Welch's unequal-variances t-test ----------------------------------------


@dataclass(frozen=True)
class TTestResult:
    t: float
    dof: float
    p_value: float


def welch_t_test(sample_a, sample_b) -> TTestResult:
    """Two-sided Welch t-test with Satterthwaite degrees of freedom."""
    a = np.asarray(sample_a, dtype=np.float64)
    b = np.asarray(sample_b, dtype=np.float64)
    if a.size < 2 or b.size < 2:
        raise InvalidInputError("both samples need at least 2 observations")
    va = a.var(ddof=1)
    vb = b.var(ddof=1)
    if va == 0.0 and vb == 0.0:
        raise UndefinedStatisticError(
            "both samples have zero variance; the statistic is undefined")
    sa = va / a.size
    sb = vb / b.size
    se = math.sqrt(sa + sb)
    t = (a.mean() - b.mean()) / se
    dof = (sa + sb) ** 2 / (
        (sa * sa / (a.size - 1)) + (sb * sb / (b.size - 1)))
    p = student_t_two_sided_p(t, dof)
    return TTestResult(t=float(t), dof=float(dof), p_value=float(p))


def student_t_two_sided_p(t: float, dof: float) -> float:
    """P(|T| >= |t|) for Student's t via the regularized incomplete beta."""
    if dof <= 0:
        raise InvalidInputError(f"degrees of freedom must be > 0, got {dof}")
    if t == 0.0:
        return 1.0
    x = dof / (dof + t * t)
    return _betainc_reg(0.5 * dof, 0.5, x)


def _betainc_reg(a: float, b: float, x: float) -> float:
    """Regularized incomplete beta I_x(a, b) by Lentz continued fraction."""
    if x <= 0.0:
        return 0.0
    if x >= 1.0:
        return 1.0
    ln_front = (math.lgamma(a + b) - math.lgamma(a) - math.lgamma(b)
                + a * math.log(x) + b * math.log1p(-x))
    front = math.exp(ln_front)
    if x < (a + 1.0) / (a + b + 2.0):
        return front * _beta_cf(a, b, x) / a
    return 1.0 - front * _beta_cf(b, a, 1.0 - x) / b


def _beta_cf(a: float, b: float, x: float, max_iter: int = 300,
             eps: float = 3e-15) -> float:
    tiny = 1e-300
    qab = a + b
    qap = a + 1.0
    qam = a - 1.0
    c = 1.0
    d = 1.0 - qab * x / qap
    if abs(d) < tiny:
        d = tiny
    d = 1.0 / d
    h = d
    for m in range(1, max_iter + 1):
        m2 = 2 * m
        aa = m * (b - m) * x / ((qam + m2) * (a + m2))
        d = 1.0 + aa * d
        if abs(d) < tiny:
            d = tiny
        c = 1.0 + aa / c
        if abs(c) < tiny:
            c = tiny
        d = 1.0 / d
        h *= d * c
        aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2))
        d = 1.0 + aa * d
        if abs(d) < tiny:
            d = tiny
        c = 1.0 + aa / c
        if abs(c) < tiny:
            c = tiny
        d = 1.0 / d
        delta = d * c
        h *= delta
        if abs(delta - 1.0) < eps:
            return h
    return h  # converged enough for the tails used here
