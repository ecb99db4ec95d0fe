"""Auditory attention decoding from EEG: linear decoders, AADNet and evaluation."""
from .const import VERSION
from .dataset import Dataset, Trial, load_dataset, save_dataset
from .exceptions import AadkitError
from .synth import SynthConfig, synth_generate

__version__ = VERSION

__all__ = [
    "AadkitError",
    "Dataset",
    "SynthConfig",
    "Trial",
    "load_dataset",
    "save_dataset",
    "synth_generate",
    "__version__",
]
