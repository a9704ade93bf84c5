"""Desk-scale preference-alignment lab.

Three stages over a synthetic video world with a ground-truth preference
oracle: (1) rule-reward GRPO training of a tabular reasoning reward model on
single-dimension ratings, (2) the same machinery on pairwise comparisons with
hierarchical format rewards, (3) preference alignment of a toy generator with
motion-weighted DPO that counteracts the world's motion-quality coupling.
"""

from .errors import (
    ConfigurationError,
    FormatError,
    InputError,
    PrefalignError,
    TrainingError,
    UndefinedResultError,
)
from .kernels import BACKEND_NAME
from .tokens import Verdict, Vocab
from .world import DimInstance, SyntheticVideo, WorldConfig

__version__ = "0.1.0"

__all__ = [
    "BACKEND_NAME",
    "ConfigurationError",
    "DimInstance",
    "FormatError",
    "InputError",
    "PrefalignError",
    "SyntheticVideo",
    "TrainingError",
    "UndefinedResultError",
    "Verdict",
    "Vocab",
    "WorldConfig",
    "__version__",
]
