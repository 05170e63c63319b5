"""Frequency-adaptive multi-scale neural networks for multi-scale PDEs.

The pieces, bottom up: a reverse-mode tape with second-order input jets
(:mod:`.autodiff`), multi-scale networks with hybrid feature embeddings
(:mod:`.network`), Adam training (:mod:`.optim`), DFT-based frequency capture
(:mod:`.spectral`), benchmark problems (:mod:`.problems`) and the adaptive
driver (:mod:`.adaptive`).
"""
from .adaptive import (AdaptConfig, AdaptiveState, checkpoint, compare_sets, restore,
                       run_adaptive)
from .errors import (AdaptError, ConfigError, FormatError, FreqAdaptError, InternalError,
                     NumericalError, ShapeError)
from .network import Embedding, ScaleNetwork, feature_network, initial_network, rebuild
from .optim import LrSchedule, TrainConfig, train
from .problems import PdeProblem, loss
from .spectral import FrequencySet, GridField, dft, even_extend, sample_grid, select_frequencies

__version__ = "0.1.0"

__all__ = [
    "AdaptConfig", "AdaptiveState", "checkpoint", "compare_sets", "restore", "run_adaptive",
    "AdaptError", "ConfigError", "FormatError", "FreqAdaptError", "InternalError",
    "NumericalError", "ShapeError", "Embedding", "ScaleNetwork", "feature_network",
    "initial_network", "rebuild", "LrSchedule", "TrainConfig", "train", "PdeProblem", "loss",
    "FrequencySet", "GridField", "dft", "even_extend", "sample_grid", "select_frequencies",
]
