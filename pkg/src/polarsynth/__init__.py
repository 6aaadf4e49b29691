"""Polarization image formation, encoding, metrics and a toy conditional diffusion model."""

from .errors import FormatError, NumericalError, PolarError, PreconditionError, ShapeError
from .stokes import (
    EncodedPolarMap,
    PolarizationStack,
    PolarStateMap,
    consistency_residual,
    decode,
    decompose_stack,
    encode,
    malus_intensity,
    synthesize_stack,
    to_grayscale,
    unpolarized_intensity,
    wrap_aolp,
)

__version__ = "0.1.0"
