"""Text classification as matching: Siamese encoders scored against
natural-language class descriptions.

Configs are plain dicts with the same schema as the JSON files under
``configs/``; see ``Model.train`` and ``run_experiment``.
"""

from ._core import (
    Model,
    accuracy,
    macro_f1,
    make_synthetic,
    matching_loss,
    micro_f1,
    regularization_loss,
    run_experiment,
    similarity_matrix,
)

__all__ = [
    "Model",
    "accuracy",
    "macro_f1",
    "make_synthetic",
    "matching_loss",
    "micro_f1",
    "regularization_loss",
    "run_experiment",
    "similarity_matrix",
]

__version__ = "0.1.0"
