"""Deep dependency networks over precomputed features: CPLL training and MPE inference."""

from .dataio import Dataset, gen_synth, load_dataset, save_dataset
from .gibbs import GibbsConfig, gibbs_marginals, gibbs_mpe
from .local_search import LocalSearchConfig, greedy_mpe, random_walk_mpe
from .metrics import EvalReport, evaluate
from .model import (
    DdnModel,
    DimensionError,
    InferenceResult,
    Instance,
    ModelFormatError,
    compute_logits,
    conditional_probability,
    score,
)
from .oracle import brute_force_mpe, gibbs_stationary
from .trainer import TrainConfig, cpll_gradient, cpll_loss, train

__all__ = [
    "Dataset",
    "DdnModel",
    "DimensionError",
    "EvalReport",
    "GibbsConfig",
    "InferenceResult",
    "Instance",
    "LocalSearchConfig",
    "ModelFormatError",
    "TrainConfig",
    "brute_force_mpe",
    "compute_logits",
    "conditional_probability",
    "cpll_gradient",
    "cpll_loss",
    "evaluate",
    "gen_synth",
    "gibbs_marginals",
    "gibbs_mpe",
    "gibbs_stationary",
    "greedy_mpe",
    "load_dataset",
    "random_walk_mpe",
    "save_dataset",
    "score",
    "train",
]
