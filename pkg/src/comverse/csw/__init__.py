"""Community Safety Watch demo: federated averaging on the fedlet platform."""

from comverse.csw.data import SampleBatch, anomaly_threshold, filter_frames, make_batch, make_ground_truth
from comverse.csw.training import Gradient, Model, local_train, loss, pooled

__all__ = [
    "SampleBatch",
    "anomaly_threshold",
    "filter_frames",
    "make_batch",
    "make_ground_truth",
    "Gradient",
    "Model",
    "local_train",
    "loss",
    "pooled",
]
