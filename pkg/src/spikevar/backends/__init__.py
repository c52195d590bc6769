"""Simulation backend selection.

The hot loops (clocked network episodes, SDE integration, weight-grid probe
batteries) exist twice: a compiled Cython extension (``spikevar._ckernels``)
and a pure-Python reference (``pykernels``).  Both produce bit-identical
results for the same arguments; the compiled one is just fast.

The compiled backend is picked automatically when the extension built.
Set SPIKEVAR_BACKEND=python (or =compiled) to force a choice, or call
``use()`` at runtime (the benchmark suite does).
"""

from __future__ import annotations

import os

from . import pykernels

try:
    from .. import _ckernels
except ImportError:
    _ckernels = None

_BY_NAME = {"python": pykernels}
if _ckernels is not None:
    _BY_NAME["compiled"] = _ckernels


def _initial():
    forced = os.environ.get("SPIKEVAR_BACKEND")
    if forced:
        if forced not in _BY_NAME:
            raise RuntimeError(
                f"SPIKEVAR_BACKEND={forced!r} but available backends are "
                f"{sorted(_BY_NAME)}; build the extension (pip install -e .) "
                "or unset the variable"
            )
        return _BY_NAME[forced]
    return _BY_NAME.get("compiled", pykernels)


_active = _initial()


def get():
    """The active kernel module."""
    return _active


def name() -> str:
    return _active.NAME


def available() -> tuple[str, ...]:
    return tuple(sorted(_BY_NAME))


def use(backend_name: str):
    """Switch backends (mainly for tests and benchmarks); returns the module."""
    global _active
    if backend_name not in _BY_NAME:
        raise ValueError(f"unknown backend {backend_name!r}; have {sorted(_BY_NAME)}")
    _active = _BY_NAME[backend_name]
    return _active
