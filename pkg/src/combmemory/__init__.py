"""Raman quantum memory driven by a pulse train: kernels, Schmidt modes, efficiency and noise spectra."""
from .kernels import MediumParams, MemoryConfig
from .profiles import PulseTrainProfile

__version__ = "0.1.0"

__all__ = ["MediumParams", "MemoryConfig", "PulseTrainProfile", "__version__"]
