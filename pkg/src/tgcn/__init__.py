"""Graph-convolutional gated-recurrent traffic speed forecasting, built on a
small from-scratch reverse-mode autodiff engine."""

from .graph import RoadNetwork, build_propagation, load_adjacency
from .metrics import MetricsReport, compute_metrics
from .models import SequenceModel, ha_predict, load_checkpoint, save_checkpoint
from .training import TrainConfig, train

__all__ = [
    "RoadNetwork", "build_propagation", "load_adjacency",
    "MetricsReport", "compute_metrics",
    "SequenceModel", "ha_predict", "load_checkpoint", "save_checkpoint",
    "TrainConfig", "train",
]
