"""Linear least-squares training pieces for the safety-watch demo.

Per-sample loss is (y - w.x)^2 / 2; a local training step returns the batch
mean gradient at the current weights, deterministic given (model, batch).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from comverse.csw.data import SampleBatch
from comverse.errors import InvalidArgument


@dataclass
class Model:
    weights: np.ndarray
    round: int = 0

    def __post_init__(self):
        if not np.all(np.isfinite(self.weights)):
            raise InvalidArgument("model weights must be finite")


@dataclass(frozen=True)
class Gradient:
    values: np.ndarray
    contributor: str
    round: int


def local_train(model: Model, batch: SampleBatch, contributor: str = "") -> Gradient:
    if len(batch) == 0:
        raise InvalidArgument("cannot train on an empty batch")
    if batch.dim != model.weights.shape[0]:
        raise InvalidArgument(
            f"batch dimension {batch.dim} does not match model dimension {model.weights.shape[0]}"
        )
    residual = batch.labels - batch.features @ model.weights
    grad = -(batch.features.T @ residual) / len(batch)
    return Gradient(values=grad, contributor=contributor, round=model.round)


def loss(weights: np.ndarray, batch: SampleBatch) -> float:
    residual = batch.labels - batch.features @ weights
    return float(np.mean(residual**2) / 2.0)


def pooled(batches: list[SampleBatch]) -> SampleBatch:
    return SampleBatch(
        features=np.concatenate([b.features for b in batches]),
        labels=np.concatenate([b.labels for b in batches]),
    )
