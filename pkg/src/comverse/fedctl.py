"""Control plane: membership ledgers, join/leave flow, token lifecycle, RBAC.

One fedlet keeps two ledgers (the shapes persisted to the ledger file):

* communityList -- communities this fedlet has joined, including the access
  token it issued for each and the per-community identity it uses there.
* membersList -- every member ever admitted to the community this fedlet
  hosts. Entries are never removed; leaving flips status to `left` so the
  history is retained.

Tokens flow member -> community: the member generates the community's access
token, re-issues it at half the TTL, and the community presents it back when
requesting that member's data. A community that stops receiving fresh tokens
marks the member stale one grace interval after expiry.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from enum import Enum
from typing import TYPE_CHECKING

from comverse.errors import (
    AlreadyMember,
    DeliveryFailure,
    InvalidArgument,
    NotFound,
)
from comverse.identity import (
    AccessToken,
    FedId,
    TokenStatus,
    generate_token,
    member_fed_id,
    sign,
    token_value,
    validate_token,
    verify,
)
from comverse.transport import MsgType, canonical_json

if TYPE_CHECKING:
    from comverse.fedlet import Fedlet


class ShareStatus(str, Enum):
    ACTIVE = "active"
    PAUSED = "paused"
    REVOKED = "revoked"


# Legal share_status transitions; revoked is terminal until re-join.
_SHARE_TRANSITIONS = {
    (ShareStatus.ACTIVE, ShareStatus.PAUSED),
    (ShareStatus.PAUSED, ShareStatus.ACTIVE),
    (ShareStatus.ACTIVE, ShareStatus.REVOKED),
    (ShareStatus.PAUSED, ShareStatus.REVOKED),
}


class MemberStatus(str, Enum):
    PENDING = "pending"
    ACTIVE = "active"
    STALE = "stale"
    LEFT = "left"


class Permission(str, Enum):
    READ = "read"
    AGGREGATE_ONLY = "aggregate-only"
    NONE = "none"


class Authz(str, Enum):
    ALLOW = "allow"
    ALLOW_AGGREGATE_ONLY = "allow-aggregate-only"
    DENY = "deny"


@dataclass(frozen=True)
class AuthzDecision:
    outcome: Authz
    reason: str = ""

    @property
    def allowed(self) -> bool:
        return self.outcome is not Authz.DENY


_SEGMENT_RE = re.compile(r"^[A-Za-z0-9._~-]+$")


@dataclass(frozen=True)
class AclRule:
    """One ACL entry: slash-separated data_ref pattern, optionally ending in `*`
    to cover the whole subtree (`a/*` matches `a` and `a/anything/below`)."""

    pattern: str
    permission: Permission

    def __post_init__(self):
        segments = self.pattern.split("/")
        for i, seg in enumerate(segments):
            if seg == "*":
                if i != len(segments) - 1:
                    raise InvalidArgument(f"pattern {self.pattern!r}: * only allowed as last segment")
            elif not _SEGMENT_RE.match(seg):
                raise InvalidArgument(f"pattern {self.pattern!r}: bad segment {seg!r}")

    def match_rank(self, data_ref: str) -> tuple[int, int] | None:
        """(literal segment count, exactness) when matching, None otherwise.
        Higher rank wins; an exact pattern outranks a wildcard of equal depth."""
        psegs = self.pattern.split("/")
        dsegs = data_ref.split("/")
        if psegs[-1] == "*":
            lits = psegs[:-1]
            if len(dsegs) >= len(lits) and dsegs[: len(lits)] == lits:
                return (len(lits), 0)
            return None
        return (len(psegs), 1) if psegs == dsegs else None


@dataclass
class Role:
    role_name: str
    acl: list[AclRule] = field(default_factory=list)

    def permission_for(self, data_ref: str) -> Permission:
        best: tuple[tuple[int, int], Permission] | None = None
        for rule in self.acl:
            rank = rule.match_rank(data_ref)
            if rank is not None and (best is None or rank > best[0]):
                best = (rank, rule.permission)
        return best[1] if best else Permission.NONE


@dataclass
class CommunityEntry:
    """communityList row: one per joined community."""

    community_id: FedId
    name: str
    address: str
    share_status: ShareStatus
    role: Role
    issued_token: AccessToken
    member_fed_id: FedId


@dataclass
class MemberEntry:
    """membersList row: one per member ever admitted. `sharing` mirrors the
    member-side data access permission state so both ledgers carry the same
    information."""

    member_id: FedId
    name: str
    address: str
    status: MemberStatus
    received_token: AccessToken | None
    joined_at: int
    sharing: ShareStatus = ShareStatus.ACTIVE


@dataclass
class QueuedJoin:
    member_id: FedId
    name: str
    address: str
    key_ref: FedId
    received_at: int


@dataclass
class OutstandingJoin:
    community_id: FedId
    community_address: str
    member_id: FedId
    sent_at: int
    last_sent: int


@dataclass
class JoinPolicy:
    """Admission policy: denylisted requesters are refused outright,
    allowlisted ones admitted without an admin, everyone else queued."""

    allowlist: set[str] = field(default_factory=set)
    denylist: set[str] = field(default_factory=set)


def _join_request_doc(requester: FedId, key_ref: FedId, community_id: FedId, name: str, address: str) -> dict:
    return {
        "requester": requester.value,
        "key_ref": key_ref.value,
        "community_id": community_id.value,
        "name": name,
        "address": address,
    }


class FedCtl:
    """Per-fedlet control plane. All transitions run under the fedlet's
    serialization lock; no transition blocks on network I/O (sends are
    fire-and-record, re-driven by the tick loop)."""

    def __init__(self, fedlet: "Fedlet"):
        self.fedlet = fedlet
        self.communities: dict[str, CommunityEntry] = {}
        self.members: dict[str, MemberEntry] = {}
        self.join_queue: dict[str, QueuedJoin] = {}
        self.outstanding: dict[str, OutstandingJoin] = {}
        self.join_policy = JoinPolicy()
        self.audit_log: list[dict] = []

    # ------------------------------------------------------------------
    # member side: joining, tokens, sharing controls
    # ------------------------------------------------------------------

    def request_join(self, community_id: FedId, community_address: str) -> OutstandingJoin:
        entry = self.communities.get(community_id.value)
        if entry is not None and entry.share_status is not ShareStatus.REVOKED:
            raise AlreadyMember(f"already a member of {community_id}")
        try:
            self.fedlet.directory.resolve(community_address)
        except NotFound as exc:
            raise DeliveryFailure(f"cannot resolve community address {community_address}") from exc

        mid = member_fed_id(self.fedlet.fed_id, community_id)
        self.fedlet.register_identity(mid)
        now = self.fedlet.clock.now()
        doc = _join_request_doc(mid, mid, community_id, self.fedlet.name, self.fedlet.address_for(mid))
        doc["signature"] = sign(canonical_json(doc), self.fedlet.keys).hex()
        self.fedlet.send(mid, community_address, MsgType.JOIN_REQUEST, doc)
        handle = OutstandingJoin(
            community_id=community_id,
            community_address=community_address,
            member_id=mid,
            sent_at=now,
            last_sent=now,
        )
        self.outstanding[community_id.value] = handle
        return handle

    def handle_join_response(self, doc: dict) -> None:
        cid = doc.get("community_id", "")
        pending = self.outstanding.pop(cid, None)
        if pending is None:
            self._audit("join-response-unsolicited", community=cid)
            return
        if doc.get("decision") != "approved":
            self._audit("join-denied", community=cid)
            return
        community_id = FedId(cid)
        existing = self.communities.get(cid)
        token = self._new_token(community_id)
        if existing is not None:
            # Re-join after revoke: reactivate, keep the operator's ACL.
            existing.share_status = ShareStatus.ACTIVE
            existing.issued_token = token
            existing.name = doc.get("name", existing.name)
            existing.address = doc.get("address", existing.address)
        else:
            self.communities[cid] = CommunityEntry(
                community_id=community_id,
                name=doc.get("name", cid),
                address=doc.get("address", pending.community_address),
                share_status=ShareStatus.ACTIVE,
                role=Role(role_name=f"community:{cid}"),
                issued_token=token,
                member_fed_id=pending.member_id,
            )
        self._send_token(self.communities[cid])

    def _new_token(self, community_id: FedId) -> AccessToken:
        nonce = self.fedlet.rng.randbytes(16)
        return generate_token(
            community_id, nonce, self.fedlet.clock.now(), self.fedlet.config.ttl
        )

    def _send_token(self, entry: CommunityEntry) -> None:
        token = entry.issued_token
        self.fedlet.send(
            entry.member_fed_id,
            entry.address,
            MsgType.TOKEN_UPDATE,
            {
                "community_id": entry.community_id.value,
                "member_id": entry.member_fed_id.value,
                "token": token.token_hex,
                "nonce": token.nonce.hex(),
                "issued_at": token.issued_at,
                "expires_at": token.expires_at,
            },
        )

    def refresh_tokens(self, now: int) -> list[FedId]:
        """Re-issue and resend tokens that have reached half their TTL.
        Paused and revoked communities are skipped entirely."""
        refreshed = []
        for entry in self.communities.values():
            if entry.share_status is not ShareStatus.ACTIVE:
                continue
            age = now - entry.issued_token.issued_at
            if age >= self.fedlet.config.ttl * self.fedlet.config.refresh_fraction:
                entry.issued_token = self._new_token(entry.community_id)
                try:
                    self._send_token(entry)
                except DeliveryFailure:
                    pass  # token kept locally, resent next tick
                refreshed.append(entry.community_id)
        return refreshed

    def retry_outstanding(self, now: int) -> None:
        for pending in self.outstanding.values():
            if now - pending.last_sent < self.fedlet.config.join_retry_interval:
                continue
            doc = _join_request_doc(
                pending.member_id,
                pending.member_id,
                pending.community_id,
                self.fedlet.name,
                self.fedlet.address_for(pending.member_id),
            )
            doc["signature"] = sign(canonical_json(doc), self.fedlet.keys).hex()
            try:
                self.fedlet.send(
                    pending.member_id, pending.community_address, MsgType.JOIN_REQUEST, doc
                )
            except DeliveryFailure:
                continue
            pending.last_sent = now

    def leave(self, community_id: FedId) -> None:
        entry = self.communities.get(community_id.value)
        if entry is None:
            raise NotFound(f"not a member of {community_id}")
        if entry.share_status is not ShareStatus.REVOKED:
            entry.share_status = ShareStatus.REVOKED
        self.fedlet.send(
            entry.member_fed_id,
            entry.address,
            MsgType.LEAVE,
            {"community_id": community_id.value, "member_id": entry.member_fed_id.value},
        )

    def set_acl(self, community_id: FedId, rules: list[AclRule]) -> None:
        entry = self.communities.get(community_id.value)
        if entry is None:
            raise NotFound(f"not a member of {community_id}")
        patterns = [r.pattern for r in rules]
        if len(set(patterns)) != len(patterns):
            raise InvalidArgument("duplicate ACL patterns")
        entry.role = Role(role_name=entry.role.role_name, acl=list(rules))
        self.fedlet.fedcore.on_acl_update(community_id)

    def set_share_status(self, community_id: FedId, status: ShareStatus) -> None:
        entry = self.communities.get(community_id.value)
        if entry is None:
            raise NotFound(f"not a member of {community_id}")
        if entry.share_status is status:
            return
        if (entry.share_status, status) not in _SHARE_TRANSITIONS:
            raise InvalidArgument(
                f"illegal share transition {entry.share_status.value} -> {status.value}"
            )
        entry.share_status = status
        self.fedlet.send(
            entry.member_fed_id,
            entry.address,
            MsgType.NOTIFY,
            {
                "kind": "share-status",
                "community_id": community_id.value,
                "member_id": entry.member_fed_id.value,
                "sharing": status.value,
            },
        )
        if status is ShareStatus.ACTIVE:
            # Resuming: re-token immediately so the community can restore us.
            entry.issued_token = self._new_token(community_id)
            try:
                self._send_token(entry)
            except DeliveryFailure:
                pass

    def authorize(self, community_id: FedId, data_ref: str, token_value: bytes) -> AuthzDecision:
        """Gate a community's access to one of this member's data refs.
        Token authentication precedes share state, which precedes the ACL."""
        entry = self.communities.get(community_id.value)
        if entry is None:
            return AuthzDecision(Authz.DENY, "auth")
        status = validate_token(token_value, entry.issued_token, self.fedlet.clock.now())
        if status is not TokenStatus.VALID:
            return AuthzDecision(Authz.DENY, "auth")
        if entry.share_status is not ShareStatus.ACTIVE:
            return AuthzDecision(Authz.DENY, entry.share_status.value)
        permission = entry.role.permission_for(data_ref)
        if permission is Permission.READ:
            return AuthzDecision(Authz.ALLOW)
        if permission is Permission.AGGREGATE_ONLY:
            return AuthzDecision(Authz.ALLOW_AGGREGATE_ONLY)
        return AuthzDecision(Authz.DENY, "acl")

    # ------------------------------------------------------------------
    # community side: admission, staleness, member state
    # ------------------------------------------------------------------

    def handle_join_request(self, doc: dict) -> str:
        if not self.fedlet.hosts_community:
            self._audit("join-request-not-hosting", requester=doc.get("requester"))
            return "dropped"
        if not self._verify_join_request(doc):
            self._audit("join-request-bad-signature", requester=doc.get("requester"))
            return "dropped"
        requester = FedId(doc["requester"])
        existing = self.members.get(requester.value)
        if existing is not None and existing.status in (MemberStatus.ACTIVE, MemberStatus.STALE):
            self._audit("join-request-already-member", requester=requester.value)
            return "dropped"
        queued = QueuedJoin(
            member_id=requester,
            name=doc.get("name", requester.value),
            address=doc["address"],
            key_ref=FedId(doc["key_ref"]),
            received_at=self.fedlet.clock.now(),
        )
        if requester.value in self.join_policy.denylist:
            self._send_join_response(queued, approved=False)
            self._audit("join-auto-denied", requester=requester.value)
            return "auto-denied"
        if requester.value in self.join_policy.allowlist:
            self._admit(queued)
            self._audit("join-auto-approved", requester=requester.value)
            return "auto-approved"
        self.join_queue[requester.value] = queued
        return "queued"

    def _verify_join_request(self, doc: dict) -> bool:
        try:
            sig = bytes.fromhex(doc["signature"])
            body = {k: doc[k] for k in ("requester", "key_ref", "community_id", "name", "address")}
            key = self.fedlet.directory.lookup(FedId(doc["key_ref"])).public_key
        except (KeyError, ValueError, NotFound, InvalidArgument):
            return False
        if doc["community_id"] != self.fedlet.fed_id.value:
            return False
        return verify(canonical_json(body), sig, key)

    def pending_requests(self) -> list[QueuedJoin]:
        return sorted(self.join_queue.values(), key=lambda q: q.member_id.value)

    def approve_join(self, member_id: FedId) -> MemberEntry:
        queued = self.join_queue.pop(member_id.value, None)
        if queued is None:
            raise NotFound(f"no queued join request for {member_id}")
        return self._admit(queued)

    def deny_join(self, member_id: FedId) -> None:
        queued = self.join_queue.pop(member_id.value, None)
        if queued is None:
            raise NotFound(f"no queued join request for {member_id}")
        self._send_join_response(queued, approved=False)
        self._audit("join-denied-by-admin", requester=member_id.value)

    def _admit(self, queued: QueuedJoin) -> MemberEntry:
        existing = self.members.get(queued.member_id.value)
        if existing is not None:
            # Re-join: reuse the entry, preserving joined_at history.
            existing.status = MemberStatus.PENDING
            existing.sharing = ShareStatus.ACTIVE
            existing.received_token = None
            existing.name = queued.name
            existing.address = queued.address
            entry = existing
        else:
            entry = MemberEntry(
                member_id=queued.member_id,
                name=queued.name,
                address=queued.address,
                status=MemberStatus.PENDING,
                received_token=None,
                joined_at=self.fedlet.clock.now(),
            )
            self.members[queued.member_id.value] = entry
        self._send_join_response(queued, approved=True)
        self._member_changed(entry)
        return entry

    def _send_join_response(self, queued: QueuedJoin, approved: bool) -> None:
        doc = {
            "community_id": self.fedlet.fed_id.value,
            "decision": "approved" if approved else "denied",
        }
        if approved:
            doc["name"] = self.fedlet.name
            doc["address"] = self.fedlet.address_for(self.fedlet.fed_id)
        self.fedlet.send(self.fedlet.fed_id, queued.address, MsgType.JOIN_RESPONSE, doc)

    def handle_token_update(self, doc: dict) -> None:
        entry = self.members.get(doc.get("member_id", ""))
        if entry is None:
            self._audit("token-from-unknown-member", member=doc.get("member_id"))
            return
        if entry.status is MemberStatus.LEFT:
            self._audit("token-from-left-member", member=entry.member_id.value)
            return
        try:
            token = AccessToken(
                token=bytes.fromhex(doc["token"]),
                community_id=FedId(doc["community_id"]),
                nonce=bytes.fromhex(doc["nonce"]),
                issued_at=int(doc["issued_at"]),
                expires_at=int(doc["expires_at"]),
            )
        except (KeyError, ValueError) as exc:
            self._audit("token-malformed", member=entry.member_id.value, error=str(exc))
            return
        # The construction is public, so the community can check integrity.
        if token_value(token.community_id, token.nonce, token.issued_at) != token.token:
            self._audit("token-integrity-failure", member=entry.member_id.value)
            return
        entry.received_token = token
        if entry.status in (MemberStatus.PENDING, MemberStatus.STALE):
            entry.status = MemberStatus.ACTIVE
            self._member_changed(entry)

    def detect_stale(self, now: int) -> list[FedId]:
        """Move members whose token expired a full grace interval ago to stale."""
        newly_stale = []
        for entry in self.members.values():
            if entry.status is not MemberStatus.ACTIVE or entry.received_token is None:
                continue
            if now >= entry.received_token.expires_at + self.fedlet.config.grace:
                entry.status = MemberStatus.STALE
                newly_stale.append(entry.member_id)
                self._member_changed(entry)
        return newly_stale

    def handle_leave(self, doc: dict) -> None:
        entry = self.members.get(doc.get("member_id", ""))
        if entry is None:
            self._audit("leave-from-unknown-member", member=doc.get("member_id"))
            return
        entry.status = MemberStatus.LEFT
        self._member_changed(entry)
        self.fedlet.send(
            self.fedlet.fed_id,
            entry.address,
            MsgType.LEAVE_ACK,
            {"community_id": self.fedlet.fed_id.value, "member_id": entry.member_id.value},
        )

    def handle_share_status(self, doc: dict) -> None:
        entry = self.members.get(doc.get("member_id", ""))
        if entry is None:
            return
        try:
            entry.sharing = ShareStatus(doc["sharing"])
        except (KeyError, ValueError):
            return
        self._member_changed(entry)

    def active_members(self) -> list[MemberEntry]:
        """Members eligible for data rounds: admitted, live, and sharing."""
        return sorted(
            (
                m
                for m in self.members.values()
                if m.status is MemberStatus.ACTIVE and m.sharing is ShareStatus.ACTIVE
            ),
            key=lambda m: m.member_id.value,
        )

    def _member_changed(self, entry: MemberEntry) -> None:
        self.fedlet.fedcore.on_membership_update(entry)
        self.fedlet.notify_membership_listeners(entry)

    def _audit(self, event: str, **detail) -> None:
        self.audit_log.append({"at": self.fedlet.clock.now(), "event": event, **detail})

    # ------------------------------------------------------------------
    # ledger persistence (Fig. 2 shape: communities / members)
    # ------------------------------------------------------------------

    def ledger_doc(self) -> dict:
        def token_doc(tok: AccessToken | None) -> dict | None:
            if tok is None:
                return None
            return {
                "value": tok.token_hex,
                "nonce": tok.nonce.hex(),
                "issued_at": tok.issued_at,
                "expires_at": tok.expires_at,
            }

        communities = [
            {
                "community_id": e.community_id.value,
                "name": e.name,
                "address": e.address,
                "share_status": e.share_status.value,
                "member_fed_id": e.member_fed_id.value,
                "role": {
                    "role_name": e.role.role_name,
                    "acl": [
                        {"pattern": r.pattern, "permission": r.permission.value} for r in e.role.acl
                    ],
                },
                "token": token_doc(e.issued_token),
            }
            for e in sorted(self.communities.values(), key=lambda e: e.community_id.value)
        ]
        members = [
            {
                "member_id": e.member_id.value,
                "name": e.name,
                "address": e.address,
                "status": e.status.value,
                "sharing": e.sharing.value,
                "joined_at": e.joined_at,
                "token": token_doc(e.received_token),
            }
            for e in sorted(self.members.values(), key=lambda e: e.member_id.value)
        ]
        return {"communities": communities, "members": members}

    def load_ledger_doc(self, doc: dict) -> None:
        def token_from(d: dict | None, community_id: FedId) -> AccessToken | None:
            if d is None:
                return None
            return AccessToken(
                token=bytes.fromhex(d["value"]),
                community_id=community_id,
                nonce=bytes.fromhex(d["nonce"]),
                issued_at=int(d["issued_at"]),
                expires_at=int(d["expires_at"]),
            )

        self.communities.clear()
        for c in doc.get("communities") or []:
            cid = FedId(c["community_id"])
            tok = token_from(c["token"], cid)
            if tok is None:
                continue
            self.communities[cid.value] = CommunityEntry(
                community_id=cid,
                name=c["name"],
                address=c["address"],
                share_status=ShareStatus(c["share_status"]),
                role=Role(
                    role_name=c["role"]["role_name"],
                    acl=[
                        AclRule(r["pattern"], Permission(r["permission"]))
                        for r in c["role"]["acl"]
                    ],
                ),
                issued_token=tok,
                member_fed_id=FedId(c["member_fed_id"]),
            )
        self.members.clear()
        for m in doc.get("members") or []:
            mid = FedId(m["member_id"])
            self.members[mid.value] = MemberEntry(
                member_id=mid,
                name=m["name"],
                address=m["address"],
                status=MemberStatus(m["status"]),
                received_token=token_from(m["token"], self.fedlet.fed_id),
                joined_at=int(m["joined_at"]),
                sharing=ShareStatus(m["sharing"]),
            )
