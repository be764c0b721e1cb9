"""Data plane package: storage, views, sync, rounds, and the daemon toolkit."""

from comverse.fedcore.core import (
    FedCore,
    Notifier,
    RoundConfig,
    RoundState,
    SyncBinding,
    ViewSpec,
    VIEW_TRANSFORMS,
)
from comverse.fedcore.store import DataObject, DataTable, ObjectStore
from comverse.fedcore.toolkit import (
    SparseVector,
    mask_vector,
    sum_masked,
    topk_sparsify,
    unmask_sum,
)

__all__ = [
    "FedCore",
    "Notifier",
    "RoundConfig",
    "RoundState",
    "SyncBinding",
    "ViewSpec",
    "VIEW_TRANSFORMS",
    "DataObject",
    "DataTable",
    "ObjectStore",
    "SparseVector",
    "mask_vector",
    "sum_masked",
    "topk_sparsify",
    "unmask_sum",
]
