"""Multi-node simulation harness: scripted scenarios, fault schedules from
scenario files, the membership-consensus checker, and canned topologies
(flat community, two-level hierarchy) used by the acceptance suite.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import yaml

from comverse.appspec import instantiate, load_spec
from comverse.errors import InvalidArgument
from comverse.fedlet import Fedlet
from comverse.fedctl import MemberStatus, ShareStatus
from comverse.identity import FedId, member_fed_id
from comverse.transport.simnet import SimNet


# ---------------------------------------------------------------------------
# scenario files: a list of (time, event) entries
# ---------------------------------------------------------------------------


def load_scenario(path: str | Path) -> list[dict]:
    events = yaml.safe_load(Path(path).read_text())
    if not isinstance(events, list):
        raise InvalidArgument("scenario file must be a list of events")
    return events


def apply_event(net: SimNet, event: dict) -> None:
    kind = event.get("event")
    if kind == "partition":
        a, b = event["between"]
        net.partition(a, b)
    elif kind == "heal":
        a, b = event["between"]
        net.heal(a, b)
    elif kind == "stop_node":
        net.stop_node(event["node"])
    elif kind == "start_node":
        net.start_node(event["node"])
    elif kind == "policy":
        between = tuple(event["between"]) if "between" in event else None
        net.set_policy(
            loss_rate=float(event.get("loss_rate", 0.0)),
            delay=int(event.get("delay", 0)),
            between=between,
        )
    else:
        raise InvalidArgument(f"unknown scenario event {kind!r}")


def run_scenario(net: SimNet, events: list[dict], until: int, tick_every: int = 60) -> None:
    """Advance the sim to `until`, applying scheduled events on the way."""
    for event in sorted(events, key=lambda e: int(e["at"])):
        at = int(event["at"])
        if at > net.clock.now():
            net.run_for(at - net.clock.now(), tick_every)
        apply_event(net, event)
    if until > net.clock.now():
        net.run_for(until - net.clock.now(), tick_every)


# ---------------------------------------------------------------------------
# membership consensus checker
# ---------------------------------------------------------------------------


def check_consensus(community: Fedlet, members: list[Fedlet]) -> list[str]:
    """Cross-check both ledgers at a quiescent point; returns discrepancies.

    For every member-side CommunityEntry there must be a community-side
    MemberEntry agreeing on status mapping, token value, and address.
    """
    problems: list[str] = []
    cid = community.fed_id.value
    for member in members:
        entry = member.fedctl.communities.get(cid)
        if entry is None:
            continue
        c_entry = community.fedctl.members.get(entry.member_fed_id.value)
        if c_entry is None:
            problems.append(f"{entry.member_fed_id}: missing from community membersList")
            continue
        if entry.share_status is ShareStatus.REVOKED:
            if c_entry.status is not MemberStatus.LEFT:
                problems.append(
                    f"{entry.member_fed_id}: member revoked but community status {c_entry.status.value}"
                )
            continue
        if c_entry.sharing is not entry.share_status:
            problems.append(
                f"{entry.member_fed_id}: sharing mismatch "
                f"({entry.share_status.value} vs {c_entry.sharing.value})"
            )
        if c_entry.status is MemberStatus.ACTIVE:
            if c_entry.received_token is None or (
                c_entry.received_token.token != entry.issued_token.token
            ):
                problems.append(f"{entry.member_fed_id}: token values disagree")
        if c_entry.address != member.address_for(entry.member_fed_id):
            problems.append(f"{entry.member_fed_id}: address mismatch in membersList")
        if entry.address != community.address:
            problems.append(f"{entry.member_fed_id}: community address mismatch")
    return problems


# ---------------------------------------------------------------------------
# canned topologies
# ---------------------------------------------------------------------------


@dataclass
class FlatCommunity:
    net: SimNet
    community: Fedlet
    members: list[Fedlet]

    def member_id(self, member: Fedlet) -> FedId:
        return member_fed_id(member.fed_id, self.community.fed_id)


def build_flat_community(
    seed: int,
    member_names: list[str],
    community_name: str = "com-hq",
    allowlist: list[str] | None = None,
    join: bool = True,
) -> FlatCommunity:
    net = SimNet(seed=seed)
    community = Fedlet.sim(net, community_name, hosts_community=True)
    members = [Fedlet.sim(net, name) for name in member_names]
    if allowlist is not None:
        community.fedctl.join_policy.allowlist = {
            member_fed_id(FedId(name), community.fed_id).value for name in allowlist
        }
    if join:
        for member in members:
            member.join_community(community.fed_id)
        net.settle()
    return FlatCommunity(net=net, community=community, members=members)


def aggregation_spec_doc(app_id: str = "community-sum") -> dict:
    """Minimal masked-sum app: children push one shared vector upward."""
    return {
        "app": app_id,
        "version": "1.0.0",
        "objects": [
            {"id": "sum_accumulator", "role": "aggregate", "node": "parent"},
            {"id": "sum_result", "role": "aggregate", "node": "parent"},
            {"id": "local_share", "role": "raw", "node": "child"},
        ],
        "bindings": [
            {
                "local": "local_share",
                "remote": {"community": "$community", "object": "sum_accumulator"},
                "direction": "push",
                "interval": 60,
            }
        ],
        "transforms": {"local_share": [{"name": "mask"}]},
        "policy": {"round": {"accumulator": "sum_accumulator", "result": "sum_result", "timeout": 600}},
    }


def drive_aggregation_round(net: SimNet, parent: Fedlet, children: list[Fedlet]) -> list | None:
    """Open a round at the parent and push every child's local_share into it."""
    state = parent.fedcore.open_round()
    if state is None:
        return None
    net.settle()
    for _ in range(4):
        now = net.clock.now()
        for child in children:
            for binding_state in child.fedcore.bindings:
                if binding_state.binding.remote[0].value == parent.fed_id.value:
                    child.fedcore.sync_tick(binding_state, now)
        net.settle()
        if parent.fedcore.current_round is None:
            break
    if parent.fedcore.current_round is not None:
        parent.fedcore._abort_round("aggregation round did not complete")
        return None
    return parent.fedcore.last_round_result


@dataclass
class Hierarchy:
    """Two-level tree: root community <- mid communities <- leaves."""

    net: SimNet
    root: Fedlet
    mids: list[Fedlet]
    leaves: dict[str, list[Fedlet]]  # mid fedID -> its leaf fedlets


def build_hierarchy(seed: int, mid_count: int = 2, leaves_per_mid: int = 2) -> Hierarchy:
    net = SimNet(seed=seed)
    root = Fedlet.sim(net, "root-hq", hosts_community=True)
    mids = [Fedlet.sim(net, f"mid-{i}", hosts_community=True) for i in range(mid_count)]
    leaves: dict[str, list[Fedlet]] = {}
    root.fedctl.join_policy.allowlist = {
        member_fed_id(mid.fed_id, root.fed_id).value for mid in mids
    }
    for mid in mids:
        mid.join_community(root.fed_id)
        kids = [Fedlet.sim(net, f"leaf-{mid.fed_id.value}-{j}") for j in range(leaves_per_mid)]
        mid.fedctl.join_policy.allowlist = {
            member_fed_id(kid.fed_id, mid.fed_id).value for kid in kids
        }
        for kid in kids:
            kid.join_community(mid.fed_id)
        leaves[mid.fed_id.value] = kids
    net.settle()

    spec = load_spec(aggregation_spec_doc())
    instantiate(spec, root.fedcore, node="parent")
    for mid in mids:
        instantiate(spec, mid.fedcore, node="parent")
        instantiate(spec, mid.fedcore, node="child", community=root.fed_id)
        for kid in leaves[mid.fed_id.value]:
            instantiate(spec, kid.fedcore, node="child", community=mid.fed_id)
    return Hierarchy(net=net, root=root, mids=mids, leaves=leaves)


def run_hierarchical_aggregation(tree: Hierarchy, leaf_values: dict[str, list]) -> list | None:
    """Aggregate leaf vectors up both levels; returns the root's decoded sum."""
    for kids in tree.leaves.values():
        for kid in kids:
            kid.fedcore.put_object("local_share", {"values": leaf_values[kid.fed_id.value]}, kind="raw")
    for mid in tree.mids:
        result = drive_aggregation_round(tree.net, mid, tree.leaves[mid.fed_id.value])
        if result is None:
            return None
        mid.fedcore.put_object("local_share", {"values": result}, kind="raw")
    return drive_aggregation_round(tree.net, tree.root, tree.mids)


# ---------------------------------------------------------------------------
# determinism: a digest of every ledger and model the suite produces
# ---------------------------------------------------------------------------


def suite_digest(seed: int) -> bytes:
    """Run a representative scenario set and serialize all end state.

    Two calls with the same seed must produce byte-identical output: ledgers
    from the membership scenario, the hierarchy's aggregate, and the final
    model from a short training run.
    """
    from comverse.csw.demo import build_deployment, run_training

    chunks: list[bytes] = []

    flat = build_flat_community(
        seed,
        member_names=[f"m{i}" for i in range(5)],
        allowlist=["m0", "m1"],
    )
    for queued in list(flat.community.fedctl.pending_requests()):
        if queued.member_id.value.startswith("m4"):
            flat.community.deny(queued.member_id)
        else:
            flat.community.approve(queued.member_id)
    flat.net.run_for(3600, tick_every=60)
    chunks.append(flat.community.ledger_bytes())
    for member in flat.members:
        chunks.append(member.ledger_bytes())

    tree = build_hierarchy(seed + 1)
    values = {
        kid.fed_id.value: [float(i + 1), float(i + 2)]
        for i, kid in enumerate(k for kids in tree.leaves.values() for k in kids)
    }
    total = run_hierarchical_aggregation(tree, values)
    chunks.append(json.dumps(total).encode())
    chunks.append(tree.root.ledger_bytes())

    dep = build_deployment(children=3, dim=8, samples=50, seed=seed + 2, topk=4)
    run_training(dep, rounds=5)
    chunks.append(json.dumps(dep.model().weights.tolist()).encode())
    chunks.append(json.dumps(dep.loss_history).encode())
    chunks.append(dep.parent.ledger_bytes())

    return b"\x00".join(chunks)
