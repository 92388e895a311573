"""Characteristic-function tomography of a thermalizing oscillator through a pulsed two-level probe."""

__version__ = "0.1.0"

from .model import (  # noqa: E402
    Equidistant,
    Linear,
    OscillatorParams,
    ProbeAmplitudes,
    PulseSequence,
    Random,
    expand_family,
)
from .states import Cat, Coherent, FockPair  # noqa: E402

__all__ = [
    "__version__",
    "OscillatorParams",
    "ProbeAmplitudes",
    "PulseSequence",
    "Equidistant",
    "Linear",
    "Random",
    "expand_family",
    "FockPair",
    "Coherent",
    "Cat",
]
