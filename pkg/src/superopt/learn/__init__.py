from .adam import AdamState, adam_step
from .models import (BiasModel, BowFeature, MlpModel, Model, featurize, forward, load_model,
                     save_model, softmax, zero_model)
from .reinforce import GradEstimate, logit_grads, reinforce_grad, returns
from .train import DEFAULT_LR, TrainConfig, TrainResult, collect, derive_seed, mean_score, train

__all__ = [
    "AdamState", "adam_step", "BiasModel", "BowFeature", "MlpModel", "Model", "featurize",
    "forward", "load_model", "save_model", "softmax", "zero_model", "GradEstimate",
    "logit_grads", "reinforce_grad", "returns", "DEFAULT_LR", "TrainConfig", "TrainResult",
    "collect", "derive_seed", "mean_score", "train",
]
