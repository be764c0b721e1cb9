"""The fedlet: one node of the federation, composing control and data planes.

A fedlet owns one host fedID (which doubles as its community's fedID when it
hosts one) plus one derived fedID per community it joins. Every inbound
message, API call, and timer tick is applied as a single serialized
transition under the fedlet lock; sends are fire-and-record and re-driven by
the tick loop, so no transition blocks on the network.
"""

from __future__ import annotations

import hashlib
import random
import threading
from dataclasses import dataclass
from pathlib import Path

import yaml

from comverse.clock import Clock
from comverse.errors import InvalidArgument
from comverse.fedcore.core import FedCore
from comverse.fedctl import AclRule, FedCtl, MemberEntry, Permission, ShareStatus
from comverse.identity import DEFAULT_TTL, REFRESH_FRACTION, FedId, KeyPair, agree
from comverse.transport import Address, Envelope, KeyDirectory, MsgType, make_envelope
from comverse.transport.simnet import SIM_HOST, SimNet


@dataclass
class FedletConfig:
    ttl: int = DEFAULT_TTL
    refresh_fraction: float = REFRESH_FRACTION
    grace: int | None = None  # defaults to one refresh period past expiry
    tick_interval: int = 60
    join_retry_interval: int = 120
    notify_buffer: int = 64
    round_timeout: int = 300

    def __post_init__(self):
        if self.grace is None:
            self.grace = int(self.ttl * self.refresh_fraction)


class Fedlet:
    def __init__(
        self,
        fed_id: FedId | str,
        *,
        name: str | None = None,
        transport,
        directory: KeyDirectory,
        clock: Clock,
        keys: KeyPair,
        rng: random.Random,
        host: str = SIM_HOST,
        port: int | None = None,
        hosts_community: bool = False,
        config: FedletConfig | None = None,
        data_dir: Path | None = None,
    ):
        self.fed_id = fed_id if isinstance(fed_id, FedId) else FedId(fed_id)
        self.name = name or self.fed_id.value
        self.keys = keys
        self.rng = rng
        self.clock = clock
        self.config = config or FedletConfig()
        self.directory = directory
        self.transport = transport
        self.host = host
        self.port = port
        self.hosts_community = hosts_community
        self.data_dir = data_dir
        self.lock = threading.RLock()
        self.identities: set[str] = set()
        self.membership_listeners: list = []
        self.fedctl = FedCtl(self)
        self.fedcore = FedCore(self, data_dir=data_dir)
        if data_dir is not None:
            data_dir.mkdir(parents=True, exist_ok=True)
            ledger = data_dir / "ledger.yaml"
            if ledger.exists():
                self.fedctl.load_ledger_doc(yaml.safe_load(ledger.read_text()) or {})
        self.register_identity(self.fed_id)

    # -- construction helpers -------------------------------------------------

    @classmethod
    def sim(
        cls,
        net: SimNet,
        fed_id: str,
        *,
        name: str | None = None,
        hosts_community: bool = False,
        config: FedletConfig | None = None,
        data_dir: Path | None = None,
    ) -> "Fedlet":
        """Deterministic sim node: keys and nonces derive from the net seed."""
        material = f"fedlet:{net.seed}:{fed_id}".encode()
        key_seed = hashlib.sha256(b"keys:" + material).digest()
        rng = random.Random(int.from_bytes(hashlib.sha256(b"rng:" + material).digest()[:8], "big"))
        fedlet = cls(
            fed_id,
            name=name,
            transport=net,
            directory=net.directory,
            clock=net.clock,
            keys=KeyPair.generate(key_seed),
            rng=rng,
            hosts_community=hosts_community,
            config=config,
            data_dir=data_dir,
        )
        net.attach(fedlet)
        return fedlet

    # -- identity and addressing ------------------------------------------------

    def address_for(self, fed_id: FedId) -> str:
        return str(Address(host=self.host, port=self.port, fed_id=fed_id))

    @property
    def address(self) -> str:
        return self.address_for(self.fed_id)

    def register_identity(self, fed_id: FedId) -> None:
        self.directory.register(
            fed_id, self.keys.public_key, self.address_for(fed_id), self.keys.agreement_public_bytes()
        )
        self.identities.add(fed_id.value)
        if isinstance(self.transport, SimNet) and fed_id.value != self.fed_id.value:
            self.transport.bind_identity(fed_id, self.fed_id)

    def owns_identity(self, fed_id: FedId) -> bool:
        return fed_id.value in self.identities

    def shared_secret_with(self, peer: FedId) -> bytes:
        return agree(self.keys, self.directory.lookup(peer).agreement_key)

    # -- wire I/O ---------------------------------------------------------------

    def send(self, sender: FedId, to: str, msg_type: MsgType, doc: dict) -> str:
        env = make_envelope(sender, to, msg_type, doc, self.transport.next_seq(sender, to), self.keys)
        return self.transport.send(env)

    def request(self, sender: FedId, to: str, msg_type: MsgType, doc: dict) -> dict:
        env = make_envelope(sender, to, msg_type, doc, self.transport.next_seq(sender, to), self.keys)
        return self.transport.request(env)

    def handle_envelope(self, env: Envelope) -> None:
        with self.lock:
            doc = env.payload_doc()
            if env.msg_type is MsgType.JOIN_REQUEST:
                self.fedctl.handle_join_request(doc)
            elif env.msg_type is MsgType.JOIN_RESPONSE:
                self.fedctl.handle_join_response(doc)
            elif env.msg_type is MsgType.TOKEN_UPDATE:
                self.fedctl.handle_token_update(doc)
            elif env.msg_type is MsgType.LEAVE:
                self.fedctl.handle_leave(doc)
            elif env.msg_type is MsgType.LEAVE_ACK:
                self.fedctl._audit("leave-acknowledged", community=doc.get("community_id"))
            elif env.msg_type is MsgType.SYNC:
                self.fedcore.handle_sync_push(env.sender, doc)
            elif env.msg_type is MsgType.AGGREGATE_CONTRIBUTION:
                self.fedcore.handle_contribution(env.sender, doc)
            elif env.msg_type is MsgType.NOTIFY:
                kind = doc.get("kind")
                if kind == "share-status":
                    self.fedctl.handle_share_status(doc)
                elif kind == "round-open":
                    self.fedcore.handle_round_open(env.sender, doc)

    def handle_request(self, env: Envelope) -> dict:
        with self.lock:
            if env.msg_type is MsgType.DATA_REQUEST:
                return self.fedcore.handle_data_request(env.sender, env.payload_doc())
            return {"ok": False, "error": "unsupported-request"}

    def tick(self, now: int) -> None:
        with self.lock:
            self.fedctl.refresh_tokens(now)
            self.fedctl.retry_outstanding(now)
            self.fedctl.detect_stale(now)
            self.fedcore.tick(now)
            if self.data_dir is not None:
                self.save_ledger()

    # -- operator surface (shared by CLI, HTTP API, console) ---------------------

    def join_community(self, community_id: FedId | str, address: str | None = None):
        cid = community_id if isinstance(community_id, FedId) else FedId(community_id)
        with self.lock:
            if address is None:
                address = self.directory.lookup(cid).address
            return self.fedctl.request_join(cid, address)

    def leave_community(self, community_id: FedId | str) -> None:
        cid = community_id if isinstance(community_id, FedId) else FedId(community_id)
        with self.lock:
            self.fedctl.leave(cid)

    def share(self, community_id: FedId | str, datasets: list[str], revoke: bool = False) -> None:
        """Operator sharing controls: datasets grant read on those subtrees,
        an empty list pauses, revoke ends the membership's data access."""
        cid = community_id if isinstance(community_id, FedId) else FedId(community_id)
        with self.lock:
            if revoke:
                self.fedctl.set_share_status(cid, ShareStatus.REVOKED)
                return
            if not datasets:
                self.fedctl.set_share_status(cid, ShareStatus.PAUSED)
                return
            rules = [AclRule(pattern=f"{d}/*", permission=Permission.READ) for d in datasets]
            self.fedctl.set_acl(cid, rules)
            entry = self.fedctl.communities[cid.value]
            if entry.share_status is ShareStatus.PAUSED:
                self.fedctl.set_share_status(cid, ShareStatus.ACTIVE)

    def approve(self, member_id: FedId | str) -> MemberEntry:
        mid = member_id if isinstance(member_id, FedId) else FedId(member_id)
        with self.lock:
            return self.fedctl.approve_join(mid)

    def deny(self, member_id: FedId | str) -> None:
        mid = member_id if isinstance(member_id, FedId) else FedId(member_id)
        with self.lock:
            self.fedctl.deny_join(mid)

    def notify_membership_listeners(self, entry: MemberEntry) -> None:
        for listener in list(self.membership_listeners):
            listener(entry)

    # -- persistence ---------------------------------------------------------------

    def ledger_bytes(self) -> bytes:
        return yaml.safe_dump(self.fedctl.ledger_doc(), sort_keys=False).encode()

    def save_ledger(self) -> None:
        if self.data_dir is None:
            raise InvalidArgument("fedlet has no data directory")
        (self.data_dir / "ledger.yaml").write_bytes(self.ledger_bytes())
