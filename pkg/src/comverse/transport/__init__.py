"""Signed message envelopes, fedlet addressing, and the public key directory.

Every message between fedlets travels as an Envelope: a signed document with
a per-(sender, destination) sequence number. Delivery admits an envelope only
if its signature verifies under the directory key of its sender and its seq
is strictly newer than the last one seen for that pair; everything else is
dropped before any control-plane handler runs.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from enum import Enum

from comverse.errors import InvalidArgument, KeyConflict, NotFound
from comverse.identity import FedId, KeyPair, sign, verify


class MsgType(str, Enum):
    JOIN_REQUEST = "join-request"
    JOIN_RESPONSE = "join-response"
    TOKEN_UPDATE = "token-update"
    LEAVE = "leave"
    LEAVE_ACK = "leave-ack"
    DATA_REQUEST = "data-request"
    SYNC = "sync"
    AGGREGATE_CONTRIBUTION = "aggregate-contribution"
    NOTIFY = "notify"


@dataclass(frozen=True)
class Address:
    """Fedlet address, rendered as comverse://host[:port]/fed_id."""

    host: str
    port: int | None
    fed_id: FedId

    def __str__(self) -> str:
        hostpart = self.host if self.port is None else f"{self.host}:{self.port}"
        return f"comverse://{hostpart}/{self.fed_id.value}"

    @classmethod
    def parse(cls, raw: str) -> "Address":
        prefix = "comverse://"
        if not raw.startswith(prefix):
            raise InvalidArgument(f"address {raw!r} must use the comverse:// scheme")
        rest = raw[len(prefix):]
        if "/" not in rest:
            raise InvalidArgument(f"address {raw!r} missing fed_id component")
        hostpart, fed = rest.split("/", 1)
        port: int | None = None
        host = hostpart
        if ":" in hostpart:
            host, portstr = hostpart.rsplit(":", 1)
            try:
                port = int(portstr)
            except ValueError as exc:
                raise InvalidArgument(f"address {raw!r} has a non-numeric port") from exc
        if not host:
            raise InvalidArgument(f"address {raw!r} has an empty host")
        return cls(host=host, port=port, fed_id=FedId(fed))


def canonical_json(doc: dict) -> bytes:
    """Canonical encoding used for all signatures (also fixed in WIRE.md)."""
    return json.dumps(doc, sort_keys=True, separators=(",", ":")).encode("utf-8")


@dataclass(frozen=True)
class Envelope:
    sender: FedId
    to: str  # address string of the destination
    msg_type: MsgType
    payload: bytes
    seq: int
    signature: bytes = b""

    def signing_bytes(self) -> bytes:
        return canonical_json(
            {
                "from": self.sender.value,
                "to": self.to,
                "msg_type": self.msg_type.value,
                "payload": self.payload.hex(),
                "seq": self.seq,
            }
        )

    def signed(self, key: KeyPair) -> "Envelope":
        return Envelope(
            sender=self.sender,
            to=self.to,
            msg_type=self.msg_type,
            payload=self.payload,
            seq=self.seq,
            signature=sign(self.signing_bytes(), key),
        )

    def payload_doc(self) -> dict:
        return json.loads(self.payload.decode("utf-8"))

    def to_wire(self) -> dict:
        return {
            "from": self.sender.value,
            "to": self.to,
            "msg_type": self.msg_type.value,
            "payload": self.payload.hex(),
            "seq": self.seq,
            "signature": self.signature.hex(),
        }

    @classmethod
    def from_wire(cls, doc: dict) -> "Envelope":
        try:
            return cls(
                sender=FedId(doc["from"]),
                to=doc["to"],
                msg_type=MsgType(doc["msg_type"]),
                payload=bytes.fromhex(doc["payload"]),
                seq=int(doc["seq"]),
                signature=bytes.fromhex(doc["signature"]),
            )
        except (KeyError, ValueError, TypeError) as exc:
            raise InvalidArgument(f"malformed envelope document: {exc}") from exc


def make_envelope(
    sender: FedId, to: Address | str, msg_type: MsgType, doc: dict, seq: int, key: KeyPair
) -> Envelope:
    env = Envelope(
        sender=sender,
        to=str(to),
        msg_type=msg_type,
        payload=canonical_json(doc),
        seq=seq,
    )
    return env.signed(key)


@dataclass(frozen=True)
class DirectoryEntry:
    fed_id: FedId
    public_key: bytes
    agreement_key: bytes
    address: str


class KeyDirectory:
    """Publicly readable fedID -> (verification key, agreement key, address) registry.

    Entries must be registered before a fedlet first sends. Re-registering is
    idempotent for identical key material and refused otherwise.
    """

    def __init__(self):
        self._entries: dict[str, DirectoryEntry] = {}

    def register(
        self, fed_id: FedId, public_key: bytes, address: Address | str, agreement_key: bytes = b""
    ) -> None:
        entry = DirectoryEntry(
            fed_id=fed_id,
            public_key=public_key,
            agreement_key=agreement_key,
            address=str(address),
        )
        existing = self._entries.get(fed_id.value)
        if existing is not None:
            if existing.public_key != public_key or (
                agreement_key and existing.agreement_key and existing.agreement_key != agreement_key
            ):
                raise KeyConflict(f"fedID {fed_id} already registered with different key material")
            # Idempotent re-register; allow the address to move.
            entry = DirectoryEntry(
                fed_id=fed_id,
                public_key=public_key,
                agreement_key=agreement_key or existing.agreement_key,
                address=str(address),
            )
        self._entries[fed_id.value] = entry

    def lookup(self, fed_id: FedId) -> DirectoryEntry:
        entry = self._entries.get(fed_id.value)
        if entry is None:
            raise NotFound(f"fedID {fed_id} not in key directory")
        return entry

    def resolve(self, address: Address | str) -> DirectoryEntry:
        addr = Address.parse(str(address)) if not isinstance(address, Address) else address
        return self.lookup(addr.fed_id)

    def known(self, fed_id: FedId) -> bool:
        return fed_id.value in self._entries


class ReplayGuard:
    """Per-(from, to) strictly-increasing seq admission; replays are dropped."""

    def __init__(self):
        self._last: dict[tuple[str, str], int] = {}

    def admit(self, env: Envelope) -> bool:
        key = (env.sender.value, env.to)
        if env.seq <= self._last.get(key, 0):
            return False
        self._last[key] = env.seq
        return True


def authenticate(directory: KeyDirectory, env: Envelope) -> bool:
    """True iff the envelope verifies under the directory key of its sender."""
    try:
        entry = directory.lookup(env.sender)
    except NotFound:
        return False
    return verify(env.signing_bytes(), env.signature, entry.public_key)
