"""Deterministic in-process network: virtual clock, seeded loss/delay, partitions.

The sim is single-threaded and event-stepped. Every queued delivery carries an
insertion number so runs with the same seed replay the exact same order; node
ticks fire in sorted fedID order. One-way sends are fire-and-forget (drops are
silent, protocols re-send on their own schedule); read-style RPCs raise
DeliveryFailure to the caller when the link is down.
"""

from __future__ import annotations

import heapq
import random
from collections import Counter
from dataclasses import dataclass
from typing import Protocol

from comverse.clock import SimClock
from comverse.errors import DeliveryFailure, NotFound
from comverse.identity import FedId
from comverse.transport import (
    Address,
    Envelope,
    KeyDirectory,
    ReplayGuard,
    authenticate,
)

SIM_HOST = "sim"


def sim_address(fed_id: FedId) -> Address:
    return Address(host=SIM_HOST, port=None, fed_id=fed_id)


@dataclass
class LinkPolicy:
    loss_rate: float = 0.0
    delay: int = 0


class SimNode(Protocol):
    fed_id: FedId

    def handle_envelope(self, env: Envelope) -> None: ...
    def handle_request(self, env: Envelope) -> dict: ...
    def tick(self, now: int) -> None: ...


class SimNet:
    def __init__(self, seed: int, directory: KeyDirectory | None = None, start_time: int = 0):
        self.seed = seed
        self.clock = SimClock(start_time)
        self.directory = directory if directory is not None else KeyDirectory()
        self.rng = random.Random(seed)
        self.metrics: Counter[str] = Counter()
        self._nodes: dict[str, SimNode] = {}
        self._owners: dict[str, str] = {}  # any fedID -> owning host fedID
        self._queue: list[tuple[int, int, Envelope]] = []
        self._order = 0
        self._default_policy = LinkPolicy()
        self._pair_policy: dict[frozenset[str], LinkPolicy] = {}
        self._partitions: set[frozenset[str]] = set()
        self._stopped: set[str] = set()
        self._replay = ReplayGuard()
        self._seq: dict[tuple[str, str], int] = {}

    # -- topology -------------------------------------------------------

    def attach(self, node: SimNode) -> None:
        host = node.fed_id.value
        self._nodes[host] = node
        self._owners[host] = host

    def bind_identity(self, fed_id: FedId, host: FedId) -> None:
        """Route envelopes for a per-community fedID to its owning fedlet."""
        self._owners[fed_id.value] = host.value

    def node_of(self, fed_id: FedId) -> SimNode:
        host = self._owners.get(fed_id.value)
        if host is None or host not in self._nodes:
            raise NotFound(f"no sim node owns fedID {fed_id}")
        return self._nodes[host]

    def stop_node(self, host: FedId | str) -> None:
        self._stopped.add(str(host))

    def start_node(self, host: FedId | str) -> None:
        self._stopped.discard(str(host))

    def is_stopped(self, host: FedId | str) -> bool:
        return str(host) in self._stopped

    # -- fault injection --------------------------------------------------

    def set_policy(
        self,
        loss_rate: float = 0.0,
        delay: int = 0,
        between: tuple[str, str] | None = None,
    ) -> None:
        policy = LinkPolicy(loss_rate=loss_rate, delay=delay)
        if between is None:
            self._default_policy = policy
        else:
            self._pair_policy[frozenset(between)] = policy

    def partition(self, a: FedId | str, b: FedId | str) -> None:
        self._partitions.add(frozenset({str(a), str(b)}))

    def heal(self, a: FedId | str, b: FedId | str) -> None:
        self._partitions.discard(frozenset({str(a), str(b)}))

    def _hosts(self, env: Envelope) -> tuple[str, str]:
        src = self._owners.get(env.sender.value, env.sender.value)
        dst_fed = Address.parse(env.to).fed_id.value
        dst = self._owners.get(dst_fed, dst_fed)
        return src, dst

    def _partitioned(self, src_host: str, dst_host: str) -> bool:
        return frozenset({src_host, dst_host}) in self._partitions

    def _policy_for(self, src_host: str, dst_host: str) -> LinkPolicy:
        return self._pair_policy.get(frozenset({src_host, dst_host}), self._default_policy)

    # -- transport interface ----------------------------------------------

    def next_seq(self, sender: FedId, to: Address | str) -> int:
        key = (sender.value, str(to))
        self._seq[key] = self._seq.get(key, 0) + 1
        return self._seq[key]

    def send(self, env: Envelope) -> str:
        src, dst = self._hosts(env)
        if dst not in self._nodes:
            raise DeliveryFailure(f"unresolvable destination {env.to}")
        if self._partitioned(src, dst) or dst in self._stopped or src in self._stopped:
            self.metrics["partition_dropped"] += 1
            return "dropped"
        policy = self._policy_for(src, dst)
        if policy.loss_rate > 0 and self.rng.random() < policy.loss_rate:
            self.metrics["loss_dropped"] += 1
            return "dropped"
        at = self.clock.now() + policy.delay
        heapq.heappush(self._queue, (at, self._order, env))
        self._order += 1
        return "delayed" if policy.delay > 0 else "delivered"

    def request(self, env: Envelope) -> dict:
        src, dst = self._hosts(env)
        if dst not in self._nodes:
            raise DeliveryFailure(f"unresolvable destination {env.to}")
        if self._partitioned(src, dst) or dst in self._stopped or src in self._stopped:
            raise DeliveryFailure(f"no route between {src} and {dst}")
        if not authenticate(self.directory, env):
            self.metrics["auth_dropped"] += 1
            raise DeliveryFailure("request rejected: bad envelope signature")
        return self._nodes[dst].handle_request(env)

    # -- event loop --------------------------------------------------------

    def in_flight(self) -> int:
        return len(self._queue)

    def _deliver(self, env: Envelope) -> None:
        _, dst = self._hosts(env)
        node = self._nodes.get(dst)
        if node is None or dst in self._stopped:
            self.metrics["undeliverable_dropped"] += 1
            return
        if not authenticate(self.directory, env):
            self.metrics["auth_dropped"] += 1
            return
        if not self._replay.admit(env):
            self.metrics["replay_dropped"] += 1
            return
        self.metrics["delivered"] += 1
        node.handle_envelope(env)

    def run_until(self, t: int) -> None:
        """Deliver every queued envelope due at or before virtual time t."""
        while self._queue and self._queue[0][0] <= t:
            at, _, env = heapq.heappop(self._queue)
            if at > self.clock.now():
                self.clock.advance_to(at)
            self._deliver(env)
        if t > self.clock.now():
            self.clock.advance_to(t)

    def settle(self, max_events: int = 100_000) -> None:
        """Process deliveries (including ones they trigger) until none remain."""
        processed = 0
        while self._queue:
            at, _, env = heapq.heappop(self._queue)
            if at > self.clock.now():
                self.clock.advance_to(at)
            self._deliver(env)
            processed += 1
            if processed > max_events:
                raise RuntimeError("simnet did not quiesce (message storm?)")

    def run_for(self, duration: int, tick_every: int = 60) -> None:
        """Advance virtual time, firing node ticks every tick_every seconds."""
        end = self.clock.now() + duration
        t = self.clock.now()
        while t < end:
            t = min(t + tick_every, end)
            self.run_until(t)
            for host in sorted(self._nodes):
                if host not in self._stopped:
                    self._nodes[host].tick(t)
        self.run_until(end)
