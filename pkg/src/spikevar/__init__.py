"""spikevar: stochastic integrate-and-fire neurons, weight-space geometry,
evolved spiking pole balancers, and synaptic-variability robustness
experiments.

The hot loops run in a compiled extension when it built, with a pure-Python
fallback selected automatically at import; see ``spikevar.backends``.
"""

from . import backends
from .errors import (
    ConfigError,
    InvalidInputError,
    NetworkFormatError,
    NonExcitatoryError,
    SingularSystemError,
    SpikevarError,
    UndefinedMetricError,
    UndefinedStatisticError,
)
from .neuron import (
    NeuronParams,
    SimTrace,
    SpikeTrain,
    escape_fire_prob,
    fire_count_single,
    integrate_perfect,
    simulate_sde,
    step_clocked,
    voltage_leaky,
)
from .network import ClockedState, NetworkGraph, Neuron, Synapse, step_network
from .rng import Stream, derive_seed

__version__ = "0.1.0"

__all__ = [
    "backends",
    "ConfigError",
    "InvalidInputError",
    "NetworkFormatError",
    "NonExcitatoryError",
    "SingularSystemError",
    "SpikevarError",
    "UndefinedMetricError",
    "UndefinedStatisticError",
    "NeuronParams",
    "SimTrace",
    "SpikeTrain",
    "escape_fire_prob",
    "fire_count_single",
    "integrate_perfect",
    "simulate_sde",
    "step_clocked",
    "voltage_leaky",
    "ClockedState",
    "NetworkGraph",
    "Neuron",
    "Synapse",
    "step_network",
    "Stream",
    "derive_seed",
    "__version__",
]
