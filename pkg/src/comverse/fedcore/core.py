"""Data plane: object/table storage behind access enforcement, materialized
views over member data, cross-fedcore sync bindings, and aggregation rounds.

Enforcement re-consults the control plane on every access; nothing is cached
across ACL or membership changes. Objects flagged `raw` are never served to a
remote principal on any path, which is what keeps member data interposed
between apps and the platform.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field
from itertools import zip_longest
from pathlib import Path
from typing import TYPE_CHECKING, Callable

from comverse.errors import AccessDenied, DeliveryFailure, InvalidArgument, NotFound
from comverse.fedcore.store import (
    DataObject,
    DataTable,
    ObjectStore,
    Value,
    entries_from_wire,
    entries_to_wire,
)
from comverse.fedcore.toolkit import (
    TransformContext,
    dense_payload,
    make_transform,
    sum_masked,
    unmask_sum,
)
from comverse.fedctl import Authz, MemberEntry, MemberStatus, ShareStatus
from comverse.identity import FedId, TokenStatus, validate_token
from comverse.transport import MsgType

if TYPE_CHECKING:
    from comverse.fedlet import Fedlet


# ---------------------------------------------------------------------------
# declarative pieces shared with the app spec
# ---------------------------------------------------------------------------

VIEW_TRANSFORMS: dict[str, Callable[[list[float]], float | int]] = {
    "sum": lambda xs: float(sum(xs)),
    "mean": lambda xs: float(sum(xs) / len(xs)),
    "count": lambda xs: len(xs),
    "min": lambda xs: float(min(xs)),
    "max": lambda xs: float(max(xs)),
}

_FILTER_OPS: dict[str, Callable] = {
    "==": lambda a, b: a == b,
    "!=": lambda a, b: a != b,
    "<": lambda a, b: a < b,
    "<=": lambda a, b: a <= b,
    ">": lambda a, b: a > b,
    ">=": lambda a, b: a >= b,
}


@dataclass(frozen=True)
class ViewSpec:
    """Materialized view over member data: collect `source_ref` from every
    eligible member, filter, then fold with the named transform."""

    view_id: str
    purpose: str
    source_refs: tuple[str, ...]
    transform: str
    output_schema: tuple[tuple[str, str], ...]
    refresh_interval: int
    filter: dict | None = None

    def validate(self) -> list[str]:
        problems = []
        if self.refresh_interval <= 0:
            problems.append(f"view {self.view_id}: refresh_interval must be positive")
        if not self.source_refs:
            problems.append(f"view {self.view_id}: needs at least one source ref")
        if self.transform not in VIEW_TRANSFORMS:
            problems.append(f"view {self.view_id}: unknown transform {self.transform!r}")
        if len(self.output_schema) != 1:
            problems.append(f"view {self.view_id}: output schema must have exactly one column")
        elif self.transform == "count" and self.output_schema[0][1] != "int":
            problems.append(f"view {self.view_id}: count output column must be int")
        elif self.transform in ("sum", "mean", "min", "max") and self.output_schema[0][1] != "float":
            problems.append(f"view {self.view_id}: {self.transform} output column must be float")
        if self.filter is not None and self.filter.get("op") not in _FILTER_OPS:
            problems.append(f"view {self.view_id}: unknown filter op {self.filter.get('op')!r}")
        return problems


@dataclass(frozen=True)
class SyncBinding:
    """Replication link between a local object and a remote fedcore's object.

    pull: fetch the remote object and replace the local copy when it moved.
    push: if the remote object is the community's round accumulator, run the
    declared transforms and contribute to the open round; if the remote is a
    member of the community this fedlet hosts, push with their access token
    (applied as replace on their side).
    """

    local_object: str
    remote: tuple[FedId, str]
    direction: str  # "pull" | "push"
    interval: int
    transforms: tuple = ()

    def validate(self) -> list[str]:
        problems = []
        if self.direction not in ("pull", "push"):
            problems.append(f"binding {self.local_object}: direction must be pull or push")
        if self.interval <= 0:
            problems.append(f"binding {self.local_object}: interval must be positive")
        return problems


@dataclass
class _ViewState:
    spec: ViewSpec
    rows: list[tuple] = field(default_factory=list)
    version: int = 0
    last_warning: str = ""
    next_due: int = 0


@dataclass
class _BindingState:
    binding: SyncBinding
    transforms: list = field(default_factory=list)
    last_pull: int = 0
    last_push: tuple | None = None
    next_due: int = 0


@dataclass
class _MemberRoundCtx:
    community_id: FedId
    round_id: int
    salt: bytes
    participants: list[FedId]
    accumulator: str


@dataclass
class RoundConfig:
    accumulator: str
    result: str
    timeout: int
    interval: int | None = None


@dataclass
class RoundState:
    round_id: int
    attempt: int
    salt: bytes
    participants: list[FedId]
    opened_at: int
    timeout_at: int
    contributions: dict[str, dict] = field(default_factory=dict)

    def missing(self) -> list[FedId]:
        return [p for p in self.participants if p.value not in self.contributions]


# ---------------------------------------------------------------------------
# change notifications
# ---------------------------------------------------------------------------


@dataclass
class _Subscription:
    app_id: str
    ids: set[str]
    callback: Callable[[dict], None]
    online: bool = True
    buffer: deque = field(default_factory=deque)
    dropped: int = 0


class Notifier:
    """At-least-once change events, in version order per id. Events for an
    unreachable app are buffered (bounded, oldest dropped); the flush after
    reconnect starts with a gap marker if anything was lost."""

    def __init__(self, buffer_cap: int = 64):
        self._cap = buffer_cap
        self._subs: dict[str, _Subscription] = {}

    def subscribe(self, app_id: str, ids: set[str], callback: Callable[[dict], None]) -> None:
        sub = self._subs.get(app_id)
        if sub is None:
            self._subs[app_id] = _Subscription(app_id=app_id, ids=set(ids), callback=callback)
        else:
            sub.ids |= set(ids)
            sub.callback = callback

    def publish(self, channel_id: str, version: int) -> None:
        event = {"id": channel_id, "version": version}
        for app_id in sorted(self._subs):
            sub = self._subs[app_id]
            if channel_id not in sub.ids:
                continue
            if sub.online:
                sub.callback(dict(event))
            else:
                if len(sub.buffer) >= self._cap:
                    sub.buffer.popleft()
                    sub.dropped += 1
                sub.buffer.append(dict(event))

    def set_online(self, app_id: str, online: bool) -> None:
        sub = self._subs.get(app_id)
        if sub is None:
            raise NotFound(f"no subscription for app {app_id!r}")
        was_online = sub.online
        sub.online = online
        if online and not was_online:
            if sub.dropped:
                sub.callback({"gap": True, "dropped": sub.dropped})
                sub.dropped = 0
            while sub.buffer:
                sub.callback(sub.buffer.popleft())


# ---------------------------------------------------------------------------
# the data plane proper
# ---------------------------------------------------------------------------


class FedCore:
    def __init__(self, fedlet: "Fedlet", data_dir: Path | None = None):
        self.fedlet = fedlet
        self.store = ObjectStore(data_dir / "objects" if data_dir else None)
        self.tables: dict[str, DataTable] = {}
        self.views: dict[str, _ViewState] = {}
        self.bindings: list[_BindingState] = []
        self.notifier = Notifier(buffer_cap=fedlet.config.notify_buffer)
        self.round_config: RoundConfig | None = None
        self.current_round: RoundState | None = None
        self.completed_rounds: int = 0
        self.last_round_result: list | None = None
        self._next_round_id = 1
        self._next_round_open = 0
        self._remote_rounds: dict[str, _MemberRoundCtx] = {}
        self.registrations: set[tuple[str, str]] = set()
        # Every non-self access decision, for interposition audits.
        self.access_log: list[dict] = []

    # -- storage ------------------------------------------------------------

    def create_object(self, object_id: str, kind: str = "raw") -> DataObject:
        return self.store.create(object_id, self.fedlet.fed_id, kind)

    def put_object(self, object_id: str, entries: dict[str, Value], kind: str = "raw") -> int:
        version = self.store.put(object_id, entries, self.fedlet.fed_id, kind)
        self.notifier.publish(object_id, version)
        return version

    def _replace_object(self, object_id: str, entries: dict[str, Value], kind: str = "raw") -> int:
        version = self.store.replace(object_id, entries, self.fedlet.fed_id, kind)
        self.notifier.publish(object_id, version)
        return version

    def get_object(
        self, object_id: str, requester: FedId | None = None, token: bytes | None = None
    ) -> tuple[int, dict[str, Value]]:
        obj = self.store.get(object_id)
        if requester is None or self.fedlet.owns_identity(requester):
            return obj.version, obj.snapshot().entries
        self._enforce_remote_read(requester, token, obj)
        return obj.version, obj.snapshot().entries

    def _enforce_remote_read(self, requester: FedId, token: bytes | None, obj: DataObject) -> None:
        try:
            self._check_remote_read(requester, token, obj)
        except AccessDenied as denial:
            self._log_access(requester, obj.object_id, "deny", denial.reason)
            raise
        self._log_access(requester, obj.object_id, "allow", "")

    def _check_remote_read(self, requester: FedId, token: bytes | None, obj: DataObject) -> None:
        if token is not None:
            # A community presenting the token this member issued for it.
            decision = self.fedlet.fedctl.authorize(requester, obj.object_id, token)
            if not decision.allowed:
                raise AccessDenied(decision.reason)
            if obj.kind == "raw":
                raise AccessDenied("raw", "raw member data never leaves this fedcore")
            if decision.outcome is Authz.ALLOW_AGGREGATE_ONLY and obj.kind != "aggregate":
                raise AccessDenied("aggregate-only", f"object {obj.object_id} is {obj.kind}")
            return
        # A member of the community this fedlet hosts, reading shared state.
        entry = self.fedlet.fedctl.members.get(requester.value)
        if entry is None or entry.status is not MemberStatus.ACTIVE:
            raise AccessDenied("membership")
        if obj.kind != "state":
            raise AccessDenied("kind", f"members may only read state objects, not {obj.kind}")

    def _log_access(self, requester: FedId, object_id: str, outcome: str, reason: str) -> None:
        self.access_log.append(
            {
                "at": self.fedlet.clock.now(),
                "requester": requester.value,
                "object_id": object_id,
                "outcome": outcome,
                "reason": reason,
            }
        )

    def create_table(self, table_id: str, schema: list[tuple[str, str]]) -> DataTable:
        if table_id not in self.tables:
            self.tables[table_id] = DataTable(table_id=table_id, schema=schema)
        return self.tables[table_id]

    # -- aggregation --------------------------------------------------------

    def aggregate(
        self, target_object: str, contributions: list[tuple[str, list]], op: str = "sum"
    ) -> list:
        """Element-wise sum of contributed vectors, committed as one version bump."""
        if op != "sum":
            raise InvalidArgument(f"unsupported aggregation op {op!r}")
        if not contributions:
            raise InvalidArgument("no contributions to aggregate")
        ordered = sorted(contributions, key=lambda c: str(c[0]))
        dim = len(ordered[0][1])
        for name, vec in ordered:
            if len(vec) != dim:
                raise InvalidArgument(
                    f"contribution from {name} has dimension {len(vec)}, expected {dim}"
                )
        total = [0] * dim
        for _, vec in ordered:
            total = [t + v for t, v in zip(total, vec)]
        self.put_object(
            target_object,
            {"values": total, "contributors": len(ordered)},
            kind="aggregate",
        )
        return total

    # -- materialized views ---------------------------------------------------

    def define_view(self, spec: ViewSpec) -> None:
        problems = spec.validate()
        if problems:
            raise InvalidArgument("; ".join(problems))
        state = self.views.get(spec.view_id)
        if state is None:
            self.views[spec.view_id] = _ViewState(spec=spec, next_due=self.fedlet.clock.now())
        else:
            state.spec = spec

    def get_view(self, view_id: str) -> tuple[int, list[tuple]]:
        state = self.views.get(view_id)
        if state is None:
            raise NotFound(f"view {view_id!r} not defined")
        return state.version, list(state.rows)

    def _fetch_member_value(self, member: MemberEntry, source_ref: str) -> float | None:
        token = member.received_token
        if token is None:
            return None
        doc = {"object_id": source_ref, "token": token.token_hex}
        try:
            resp = self.fedlet.request(
                self.fedlet.fed_id, member.address, MsgType.DATA_REQUEST, doc
            )
        except DeliveryFailure:
            return None
        if not resp.get("ok"):
            return None
        value = entries_from_wire(resp["entries"]).get("value")
        return float(value) if isinstance(value, (int, float)) else None

    def refresh_view(self, view_id: str, now: int) -> int:
        """Recompute a view from currently authorized member data.

        Members whose authorization lapsed (paused, stale, left, denied) are
        excluded. Returns the number of changed rows; subscribers hear about
        the view only when something actually changed.
        """
        state = self.views.get(view_id)
        if state is None:
            raise NotFound(f"view {view_id!r} not defined")
        spec = state.spec
        samples: list[tuple[str, float]] = []
        excluded = 0
        for member in self.fedlet.fedctl.active_members():
            for ref in spec.source_refs:
                value = self._fetch_member_value(member, ref)
                if value is None:
                    excluded += 1
                else:
                    samples.append((member.member_id.value, value))
        kept = [v for m, v in samples if self._keep(spec.filter, m, v)]
        if kept:
            rows = [(VIEW_TRANSFORMS[spec.transform](kept),)]
        else:
            rows = []
        state.last_warning = "" if samples else "no authorized sources"
        changed = sum(1 for a, b in zip_longest(state.rows, rows) if a != b)
        if changed:
            state.rows = rows
            state.version += 1
            self.notifier.publish(view_id, state.version)
        return changed

    @staticmethod
    def _keep(filter_doc: dict | None, member: str, value: float) -> bool:
        if filter_doc is None:
            return True
        column = filter_doc.get("column", "value")
        subject = member if column == "member" else value
        return _FILTER_OPS[filter_doc["op"]](subject, filter_doc["operand"])

    # -- sync bindings ---------------------------------------------------------

    def add_binding(self, binding: SyncBinding) -> _BindingState:
        problems = binding.validate()
        if problems:
            raise InvalidArgument("; ".join(problems))
        state = _BindingState(
            binding=binding,
            transforms=[make_transform(t) for t in binding.transforms],
            next_due=self.fedlet.clock.now(),
        )
        self.bindings.append(state)
        return state

    def drop_app_state(self, object_ids: list[str]) -> None:
        """Rollback helper for failed instantiation."""
        for object_id in object_ids:
            self.store.drop(object_id)
        self.bindings = [b for b in self.bindings if b.binding.local_object not in object_ids]

    def sync_tick(self, state: _BindingState, now: int) -> str:
        binding = state.binding
        if binding.direction == "pull":
            return self._pull_tick(state)
        return self._push_tick(state, now)

    def _pull_tick(self, state: _BindingState) -> str:
        community, remote_obj = state.binding.remote
        entry = self.fedlet.fedctl.communities.get(community.value)
        if entry is None or entry.share_status is ShareStatus.REVOKED:
            return "skipped"
        try:
            resp = self.fedlet.request(
                entry.member_fed_id, entry.address, MsgType.DATA_REQUEST, {"object_id": remote_obj}
            )
        except DeliveryFailure:
            return "skipped"
        if not resp.get("ok"):
            self.fedlet.fedctl._audit(
                "data-access-incident",
                binding=state.binding.local_object,
                remote=remote_obj,
                reason=resp.get("reason", resp.get("error", "")),
            )
            return "denied"
        version = int(resp["version"])
        if version <= state.last_pull:
            return "skipped"
        local_kind = (
            self.store.get(state.binding.local_object).kind
            if self.store.exists(state.binding.local_object)
            else "state"
        )
        self._replace_object(
            state.binding.local_object, entries_from_wire(resp["entries"]), kind=local_kind
        )
        state.last_pull = version
        return "sent"

    def _push_tick(self, state: _BindingState, now: int) -> str:
        community, remote_obj = state.binding.remote
        if not self.store.exists(state.binding.local_object):
            return "skipped"
        obj = self.store.get(state.binding.local_object)

        member = self.fedlet.fedctl.members.get(community.value)
        if member is not None:
            return self._push_to_member(state, member, remote_obj, obj)

        entry = self.fedlet.fedctl.communities.get(community.value)
        if entry is None:
            return "skipped"
        if entry.share_status is not ShareStatus.ACTIVE:
            return "skipped"
        ctx = self._remote_rounds.get(community.value)
        if ctx is None or ctx.accumulator != remote_obj:
            return "skipped"
        values = obj.entries.get("values")
        if not isinstance(values, list) or obj.version == 0:
            return "skipped"
        key = (ctx.round_id, ctx.salt, obj.version)
        if state.last_push == key:
            return "skipped"
        payload = dense_payload(values)
        tctx = TransformContext(
            community_id=ctx.community_id,
            self_id=entry.member_fed_id,
            round_id=ctx.round_id,
            salt=ctx.salt,
            participants=ctx.participants,
            shared_secret_with=self.fedlet.shared_secret_with,
        )
        for transform in state.transforms:
            payload = transform.apply(payload, tctx)
        self.fedlet.send(
            entry.member_fed_id,
            entry.address,
            MsgType.AGGREGATE_CONTRIBUTION,
            {
                "object_id": remote_obj,
                "round_id": ctx.round_id,
                "salt": ctx.salt.hex(),
                "body": payload,
            },
        )
        state.last_push = key
        return "sent"

    def _push_to_member(
        self, state: _BindingState, member: MemberEntry, remote_obj: str, obj: DataObject
    ) -> str:
        if member.status is not MemberStatus.ACTIVE or member.received_token is None:
            return "skipped"
        key = ("member-push", obj.version, member.received_token.token_hex)
        if state.last_push == key:
            return "skipped"
        self.fedlet.send(
            self.fedlet.fed_id,
            member.address,
            MsgType.SYNC,
            {
                "object_id": remote_obj,
                "token": member.received_token.token_hex,
                "version": obj.version,
                "entries": entries_to_wire(obj.entries),
            },
        )
        state.last_push = key
        return "sent"

    # -- aggregation rounds -------------------------------------------------

    def configure_rounds(
        self, accumulator: str, result: str, timeout: int, interval: int | None = None
    ) -> None:
        self.round_config = RoundConfig(
            accumulator=accumulator, result=result, timeout=timeout, interval=interval
        )
        self._next_round_open = self.fedlet.clock.now()

    def open_round(self, round_id: int | None = None) -> RoundState | None:
        """Open an aggregation round over the currently eligible members."""
        if self.round_config is None:
            raise InvalidArgument("rounds not configured on this fedcore")
        participants = [m.member_id for m in self.fedlet.fedctl.active_members()]
        if not participants:
            return None
        now = self.fedlet.clock.now()
        if round_id is None:
            round_id = self._next_round_id
        self._next_round_id = round_id + 1
        state = RoundState(
            round_id=round_id,
            attempt=1,
            salt=self.fedlet.rng.randbytes(16),
            participants=participants,
            opened_at=now,
            timeout_at=now + self.round_config.timeout,
        )
        self.current_round = state
        self._broadcast_round_open(state)
        return state

    def _broadcast_round_open(self, state: RoundState) -> None:
        assert self.round_config is not None
        doc = {
            "kind": "round-open",
            "community_id": self.fedlet.fed_id.value,
            "round_id": state.round_id,
            "salt": state.salt.hex(),
            "participants": [p.value for p in state.participants],
            "accumulator": self.round_config.accumulator,
        }
        for member_id in state.participants:
            entry = self.fedlet.fedctl.members[member_id.value]
            self.fedlet.send(self.fedlet.fed_id, entry.address, MsgType.NOTIFY, doc)

    def handle_round_open(self, sender: FedId, doc: dict) -> None:
        entry = self.fedlet.fedctl.communities.get(sender.value)
        if entry is None:
            return
        self._remote_rounds[sender.value] = _MemberRoundCtx(
            community_id=sender,
            round_id=int(doc["round_id"]),
            salt=bytes.fromhex(doc["salt"]),
            participants=[FedId(p) for p in doc["participants"]],
            accumulator=doc["accumulator"],
        )

    def handle_contribution(self, sender: FedId, doc: dict) -> None:
        state = self.current_round
        if state is None or self.round_config is None:
            self._log_access(sender, doc.get("object_id", ""), "deny", "no-open-round")
            return
        if doc.get("round_id") != state.round_id or bytes.fromhex(doc.get("salt", "")) != state.salt:
            return  # contribution for a superseded attempt
        member = self.fedlet.fedctl.members.get(sender.value)
        eligible = (
            member is not None
            and member.status is MemberStatus.ACTIVE
            and member.sharing is ShareStatus.ACTIVE
            and any(p.value == sender.value for p in state.participants)
        )
        if not eligible:
            self._log_access(sender, doc.get("object_id", ""), "deny", "membership")
            self.fedlet.fedctl._audit("data-access-incident", member=sender.value, kind="contribution")
            return
        self._log_access(sender, doc.get("object_id", ""), "allow", "")
        state.contributions[sender.value] = doc["body"]
        self._maybe_close_round()

    def _maybe_close_round(self) -> None:
        state = self.current_round
        if state is None or state.missing():
            return
        assert self.round_config is not None
        bodies = [state.contributions[p.value] for p in sorted(state.participants)]
        kinds = {b["kind"] for b in bodies}
        if kinds == {"masked"}:
            scales = {b["scale"] for b in bodies}
            if len(scales) != 1:
                self._abort_round("mixed fixed-point scales")
                return
            scale = scales.pop()
            total = sum_masked([b["values"] for b in bodies])
            self.put_object(
                self.round_config.accumulator,
                {"values": total, "scale": scale, "round": state.round_id},
                kind="aggregate",
            )
            decoded = unmask_sum(total, scale)
        else:
            vectors = []
            for body in bodies:
                if body["kind"] == "dense":
                    vectors.append(list(body["values"]))
                elif body["kind"] == "sparse":
                    dense = [0.0] * body["dim"]
                    for i, v in body["items"]:
                        dense[i] = v
                    vectors.append(dense)
                else:
                    self._abort_round("mixed masked and plaintext contributions")
                    return
            decoded = [sum(col) for col in zip(*vectors)]
            self.put_object(
                self.round_config.accumulator,
                {"values": decoded, "round": state.round_id},
                kind="aggregate",
            )
        self.put_object(
            self.round_config.result,
            {"values": decoded, "round": state.round_id, "contributors": len(bodies)},
            kind="aggregate",
        )
        self.completed_rounds += 1
        self.last_round_result = decoded
        self.current_round = None
        if self.round_config.interval is not None:
            self._next_round_open = self.fedlet.clock.now() + self.round_config.interval

    def _abort_round(self, reason: str) -> RoundState | None:
        """Drop the round attempt without releasing any partial aggregate."""
        state = self.current_round
        self.current_round = None
        if state is not None:
            self.fedlet.fedctl._audit(
                "round-aborted", round=state.round_id, attempt=state.attempt, reason=reason
            )
        return state

    def _reopen_round(self, previous: RoundState) -> None:
        """Retry the same round over the members that are still eligible."""
        assert self.round_config is not None
        eligible = {m.member_id.value for m in self.fedlet.fedctl.active_members()}
        participants = [p for p in previous.participants if p.value in eligible]
        if not participants:
            return
        now = self.fedlet.clock.now()
        state = RoundState(
            round_id=previous.round_id,
            attempt=previous.attempt + 1,
            salt=self.fedlet.rng.randbytes(16),
            participants=participants,
            opened_at=now,
            timeout_at=now + self.round_config.timeout,
        )
        self.current_round = state
        self._broadcast_round_open(state)

    def on_membership_update(self, entry: MemberEntry) -> None:
        state = self.current_round
        if state is None:
            return
        in_round = any(p.value == entry.member_id.value for p in state.participants)
        eligible = entry.status is MemberStatus.ACTIVE and entry.sharing is ShareStatus.ACTIVE
        if in_round and not eligible:
            previous = self._abort_round(f"participant {entry.member_id} became ineligible")
            if previous is not None:
                self._reopen_round(previous)

    def on_acl_update(self, community_id: FedId) -> None:
        # Authorization is re-checked on every access; nothing cached to flush.
        pass

    # -- inbound wire handlers -------------------------------------------------

    def handle_data_request(self, sender: FedId, doc: dict) -> dict:
        object_id = doc.get("object_id", "")
        token = bytes.fromhex(doc["token"]) if "token" in doc else None
        try:
            version, entries = self.get_object(object_id, requester=sender, token=token)
        except NotFound:
            return {"ok": False, "error": "not-found"}
        except AccessDenied as denial:
            return {"ok": False, "error": "access-denied", "reason": denial.reason}
        obj = self.store.get(object_id)
        return {
            "ok": True,
            "version": version,
            "kind": obj.kind,
            "entries": entries_to_wire(entries),
        }

    def handle_sync_push(self, sender: FedId, doc: dict) -> None:
        """A community replacing a member-local replica, authenticated by the
        very token this member issued to it."""
        entry = self.fedlet.fedctl.communities.get(sender.value)
        if entry is None:
            return
        try:
            token = bytes.fromhex(doc["token"])
        except (KeyError, ValueError):
            return
        if validate_token(token, entry.issued_token, self.fedlet.clock.now()) is not TokenStatus.VALID:
            self.fedlet.fedctl._audit("sync-push-bad-token", community=sender.value)
            return
        if entry.share_status is not ShareStatus.ACTIVE:
            return
        remote_obj = doc.get("object_id", "")
        for state in self.bindings:
            if state.binding.direction == "pull" and state.binding.remote == (sender, remote_obj):
                self._replace_object(
                    state.binding.local_object, entries_from_wire(doc["entries"]), kind="state"
                )
                state.last_pull = max(state.last_pull, int(doc.get("version", 0)))
                return
        self.fedlet.fedctl._audit("sync-push-unbound", community=sender.value, object=remote_obj)

    # -- periodic work ----------------------------------------------------------

    def tick(self, now: int) -> None:
        for state in self.bindings:
            if now >= state.next_due:
                self.sync_tick(state, now)
                state.next_due = now + state.binding.interval
        for view_id in sorted(self.views):
            state = self.views[view_id]
            if now >= state.next_due:
                self.refresh_view(view_id, now)
                state.next_due = now + state.spec.refresh_interval
        if self.round_config is not None:
            if self.current_round is not None and now >= self.current_round.timeout_at:
                if self.current_round.missing():
                    previous = self._abort_round(
                        f"timeout waiting for {[p.value for p in self.current_round.missing()]}"
                    )
                    if previous is not None:
                        self._reopen_round(previous)
            if (
                self.current_round is None
                and self.round_config.interval is not None
                and now >= self._next_round_open
            ):
                self.open_round()
