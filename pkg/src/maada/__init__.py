"""Manifold-aware adversarial data augmentation for domain transfer.

Local-PCA tangent charts split loss gradients into on- and off-manifold
perturbations; a small MLP is trained on the combined objective and the
terms of the geometric transfer bound are measured empirically.
"""

__version__ = "0.1.0"

from .data import Dataset, gen_circle, gen_two_moons, load_csv, rotate, save_csv
from .losses import LossBreakdown, LossWeights
from .manifold import GeoDBreakdown, build_graph, geo_discrepancy, tangent_basis
from .model import ModelParams, init_mlp, predict_proba
from .trainer import MetricsLog, TrainConfig, evaluate, train, train_erm

__all__ = [
    "Dataset", "gen_circle", "gen_two_moons", "load_csv", "rotate", "save_csv",
    "LossBreakdown", "LossWeights",
    "GeoDBreakdown", "build_graph", "geo_discrepancy", "tangent_basis",
    "ModelParams", "init_mlp", "predict_proba",
    "MetricsLog", "TrainConfig", "evaluate", "train", "train_erm",
]
