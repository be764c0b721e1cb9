"""Synthetic stand-in for camera key frames: seeded linear ground truth.

Each child fedlet holds a batch of feature/label pairs generated from one
shared ground-truth weight vector, so a centralized least-squares oracle
exists in closed form and runs are reproducible from the seed alone.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from comverse.errors import InvalidArgument


@dataclass(frozen=True)
class SampleBatch:
    features: np.ndarray  # shape (n, d)
    labels: np.ndarray  # shape (n,)

    def __post_init__(self):
        if self.features.ndim != 2 or self.labels.shape != (self.features.shape[0],):
            raise InvalidArgument("features must be (n, d) with labels (n,)")

    def __len__(self) -> int:
        return self.features.shape[0]

    @property
    def dim(self) -> int:
        return self.features.shape[1]


def make_ground_truth(dim: int, seed: int) -> np.ndarray:
    rng = np.random.default_rng(seed)
    return rng.normal(size=dim)


def make_batch(ground_truth: np.ndarray, n: int, seed: int, noise: float = 0.0) -> SampleBatch:
    rng = np.random.default_rng(seed)
    features = rng.normal(size=(n, ground_truth.shape[0]))
    labels = features @ ground_truth
    if noise > 0:
        labels = labels + noise * rng.normal(size=n)
    return SampleBatch(features=features, labels=labels)


def filter_frames(raw: SampleBatch, predicate: Callable[[np.ndarray, float], bool]) -> SampleBatch:
    """Keep samples the predicate accepts. Runs on the child fedcore, so raw
    frames never leave the member even when everything is filtered out."""
    keep = [i for i in range(len(raw)) if predicate(raw.features[i], float(raw.labels[i]))]
    return SampleBatch(features=raw.features[keep], labels=raw.labels[keep])


def anomaly_threshold(threshold: float) -> Callable[[np.ndarray, float], bool]:
    """Demo predicate: a frame is interesting when its label magnitude exceeds
    the threshold (the synthetic analogue of an anomaly score)."""
    return lambda features, label: abs(label) > threshold
