"""Daemon toolkit: gradient compression and pairwise additive masking.

Masking runs in a fixed-point integer domain so the pairwise terms cancel
exactly at the aggregator: member i submits

    enc(v_i) + sum_{j > i} prg(s_ij) - sum_{j < i} prg(s_ij)   (mod 2^64)

with i/j ordered by fedID and s_ij the seed shared by the pair, so the sum
over all participants equals enc(sum v_i) exactly. Integer vectors use scale
1 and survive bit-exact; float vectors are quantized at 2^-44 per element.
A missing contribution leaves the pair terms uncancelled, which is why a
round with a dropout must abort rather than release a partial aggregate.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass
from typing import Callable, Protocol, Sequence

from comverse.errors import InvalidArgument
from comverse.identity import FedId

MASK_MOD = 2**64
FLOAT_SCALE = 2**44


# ---------------------------------------------------------------------------
# fixed-point codec
# ---------------------------------------------------------------------------


def encode_fixed(values: Sequence[float | int], scale: int) -> list[int]:
    if scale == 1:
        return [int(v) % MASK_MOD for v in values]
    return [round(v * scale) % MASK_MOD for v in values]


def decode_fixed(words: Sequence[int], scale: int) -> list:
    out = []
    for w in words:
        w %= MASK_MOD
        if w >= MASK_MOD // 2:
            w -= MASK_MOD
        out.append(w if scale == 1 else w / scale)
    return out


def pick_scale(values: Sequence[float | int]) -> int:
    return 1 if all(isinstance(v, int) for v in values) else FLOAT_SCALE


# ---------------------------------------------------------------------------
# deterministic PRG (SHA-256 in counter mode; stable across platforms)
# ---------------------------------------------------------------------------


def prg_words(seed: bytes, n: int) -> list[int]:
    words: list[int] = []
    counter = 0
    while len(words) < n:
        block = hashlib.sha256(seed + counter.to_bytes(8, "big")).digest()
        for i in range(0, 32, 8):
            words.append(int.from_bytes(block[i : i + 8], "big"))
        counter += 1
    return words[:n]


def pair_seed(shared_secret: bytes, community_id: FedId, round_id: int, salt: bytes) -> bytes:
    material = b"comverse-mask-v1" + shared_secret + community_id.value.encode() + round_id.to_bytes(8, "big") + salt
    return hashlib.sha256(material).digest()


# ---------------------------------------------------------------------------
# top-K sparsification
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class SparseVector:
    dim: int
    items: tuple[tuple[int, float], ...]  # (index, value), ascending index

    def densify(self) -> list[float]:
        dense = [0.0] * self.dim
        for idx, val in self.items:
            dense[idx] = val
        return dense


def topk_sparsify(values: Sequence[float], k: int) -> SparseVector:
    """Keep the k largest-magnitude entries; ties go to the lowest index."""
    dim = len(values)
    if not 1 <= k <= dim:
        raise InvalidArgument(f"top-k K={k} out of range for dimension {dim}")
    order = sorted(range(dim), key=lambda i: (-abs(values[i]), i))[:k]
    items = tuple((i, values[i]) for i in sorted(order))
    return SparseVector(dim=dim, items=items)


# ---------------------------------------------------------------------------
# pairwise additive masking
# ---------------------------------------------------------------------------


def mask_vector(
    values: Sequence[float | int],
    peer_seeds: Sequence[tuple[FedId, bytes]],
    self_id: FedId,
    scale: int,
) -> list[int]:
    masked = encode_fixed(values, scale)
    dim = len(masked)
    for peer, seed in peer_seeds:
        if peer.value == self_id.value:
            raise InvalidArgument("peer seeds must not include self")
        stream = prg_words(seed, dim)
        if peer.value > self_id.value:
            masked = [(m + w) % MASK_MOD for m, w in zip(masked, stream)]
        else:
            masked = [(m - w) % MASK_MOD for m, w in zip(masked, stream)]
    return masked


def sum_masked(contributions: Sequence[Sequence[int]]) -> list[int]:
    if not contributions:
        raise InvalidArgument("nothing to sum")
    dim = len(contributions[0])
    total = [0] * dim
    for contrib in contributions:
        if len(contrib) != dim:
            raise InvalidArgument("masked contributions disagree on dimension")
        total = [(t + c) % MASK_MOD for t, c in zip(total, contrib)]
    return total


def unmask_sum(total: Sequence[int], scale: int) -> list:
    """Decode the modular sum of a full round (masks already cancelled)."""
    return decode_fixed(total, scale)


# ---------------------------------------------------------------------------
# transform pipeline: payload dicts flowing through named toolkit stages
# ---------------------------------------------------------------------------


@dataclass
class TransformContext:
    community_id: FedId
    self_id: FedId
    round_id: int
    salt: bytes
    participants: list[FedId]
    shared_secret_with: Callable[[FedId], bytes]


def dense_payload(values: Sequence[float | int]) -> dict:
    return {"kind": "dense", "dim": len(values), "values": list(values)}


class Transform(Protocol):
    name: str

    def apply(self, payload: dict, ctx: TransformContext) -> dict: ...


class TopKTransform:
    name = "topk"

    def __init__(self, k: int):
        if k < 1:
            raise InvalidArgument("topk transform requires k >= 1")
        self.k = k

    def apply(self, payload: dict, ctx: TransformContext) -> dict:
        if payload["kind"] != "dense":
            raise InvalidArgument("topk expects a dense payload")
        sparse = topk_sparsify(payload["values"], min(self.k, payload["dim"]))
        return {"kind": "sparse", "dim": sparse.dim, "items": [[i, v] for i, v in sparse.items]}


class MaskTransform:
    name = "mask"

    def apply(self, payload: dict, ctx: TransformContext) -> dict:
        if payload["kind"] == "sparse":
            values = SparseVector(
                dim=payload["dim"], items=tuple((i, v) for i, v in payload["items"])
            ).densify()
        elif payload["kind"] == "dense":
            values = payload["values"]
        else:
            raise InvalidArgument(f"mask cannot follow payload kind {payload['kind']!r}")
        scale = pick_scale(values)
        peers = [p for p in ctx.participants if p.value != ctx.self_id.value]
        seeds = [
            (p, pair_seed(ctx.shared_secret_with(p), ctx.community_id, ctx.round_id, ctx.salt))
            for p in peers
        ]
        masked = mask_vector(values, seeds, ctx.self_id, scale)
        return {"kind": "masked", "dim": len(masked), "values": masked, "scale": scale}


_REGISTRY: dict[str, Callable[[dict], Transform]] = {}


def register_transform(name: str, factory: Callable[[dict], Transform]) -> None:
    _REGISTRY[name] = factory


def transform_known(name: str) -> bool:
    return name in _REGISTRY


def make_transform(spec: dict | str) -> Transform:
    doc = {"name": spec} if isinstance(spec, str) else dict(spec)
    name = doc.get("name")
    factory = _REGISTRY.get(name or "")
    if factory is None:
        raise InvalidArgument(f"unknown toolkit transform {name!r}")
    return factory(doc)


register_transform("topk", lambda doc: TopKTransform(k=int(doc.get("k", 1))))
register_transform("mask", lambda doc: MaskTransform())
