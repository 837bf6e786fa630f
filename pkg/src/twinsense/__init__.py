"""Quantum-enhanced cantilever displacement readout with twin beams."""
from .quanta import (
    LossChannel,
    TwinBeamState,
    amplify,
    apply_loss,
    coherent_state,
    convert_squeezing,
    intensity_difference_noise,
)
from .mechanics import CantileverParams, noise_budget
from .spatial import ModeLayout, SplitMode, split_detector_noise

__version__ = "0.1.0"

__all__ = [
    "CantileverParams", "LossChannel", "ModeLayout", "SplitMode", "TwinBeamState", "amplify",
    "apply_loss", "coherent_state", "convert_squeezing", "intensity_difference_noise",
    "noise_budget", "split_detector_noise", "__version__",
]
