"""Identity material for federation: fedIDs, keypairs, and community access tokens.

Tokens are the member-issued capability a community must present when it
requests that member's data. A token value is a pure function of
(community id, nonce, issue time), so a member can regenerate and resend
tokens on a schedule while fresh nonces keep values collision-free.
"""

from __future__ import annotations

import hashlib
import re
from dataclasses import dataclass
from enum import Enum

from cryptography.exceptions import InvalidSignature
from cryptography.hazmat.primitives.asymmetric.ed25519 import (
    Ed25519PrivateKey,
    Ed25519PublicKey,
)
from cryptography.hazmat.primitives.asymmetric.x25519 import (
    X25519PrivateKey,
    X25519PublicKey,
)
from cryptography.hazmat.primitives import serialization

from comverse.errors import InvalidArgument, InvalidKey

_FED_ID_RE = re.compile(r"^[A-Za-z0-9._~-]{1,128}$")

NONCE_BYTES = 16
TOKEN_BYTES = 32

# Default token time-to-live; members re-issue at half of it.
DEFAULT_TTL = 3600
REFRESH_FRACTION = 0.5


@dataclass(frozen=True)
class FedId:
    """Opaque fedlet identifier. URL-safe, non-empty, at most 128 chars."""

    value: str

    def __post_init__(self):
        if not _FED_ID_RE.match(self.value):
            raise InvalidArgument(f"invalid fedID {self.value!r}: must be 1-128 URL-safe chars")

    def __str__(self) -> str:
        return self.value

    def __lt__(self, other: "FedId") -> bool:
        return self.value < other.value


def member_fed_id(host: FedId, community: FedId) -> FedId:
    """Identity a fedlet uses inside a joined community (one per membership)."""
    return FedId(f"{host.value}.{community.value}")


@dataclass(frozen=True)
class KeyPair:
    """Ed25519 keypair as raw bytes. The 32-byte private seed also deterministically
    derives the X25519 agreement key used for pairwise mask seeds."""

    public_key: bytes
    private_key: bytes

    @classmethod
    def generate(cls, seed: bytes | None = None) -> "KeyPair":
        if seed is None:
            priv = Ed25519PrivateKey.generate()
        else:
            if len(seed) != 32:
                raise InvalidKey("keypair seed must be 32 bytes")
            priv = Ed25519PrivateKey.from_private_bytes(seed)
        pub = priv.public_key().public_bytes(
            serialization.Encoding.Raw, serialization.PublicFormat.Raw
        )
        raw = priv.private_bytes(
            serialization.Encoding.Raw,
            serialization.PrivateFormat.Raw,
            serialization.NoEncryption(),
        )
        return cls(public_key=pub, private_key=raw)

    def agreement_private(self) -> X25519PrivateKey:
        seed = hashlib.sha256(b"comverse-agreement-v1" + self.private_key).digest()
        return X25519PrivateKey.from_private_bytes(seed)

    def agreement_public_bytes(self) -> bytes:
        return self.agreement_private().public_key().public_bytes(
            serialization.Encoding.Raw, serialization.PublicFormat.Raw
        )


def sign(message: bytes, key: KeyPair) -> bytes:
    try:
        priv = Ed25519PrivateKey.from_private_bytes(key.private_key)
    except (ValueError, TypeError) as exc:
        raise InvalidKey(f"malformed signing key: {exc}") from exc
    return priv.sign(message)


def verify(message: bytes, signature: bytes, public_key: bytes) -> bool:
    try:
        pub = Ed25519PublicKey.from_public_bytes(public_key)
    except (ValueError, TypeError) as exc:
        raise InvalidKey(f"malformed verification key: {exc}") from exc
    try:
        pub.verify(signature, message)
        return True
    except InvalidSignature:
        return False


def agree(own: KeyPair, peer_agreement_public: bytes) -> bytes:
    """Shared secret between two fedlets' agreement keys (same on both sides)."""
    try:
        peer = X25519PublicKey.from_public_bytes(peer_agreement_public)
    except (ValueError, TypeError) as exc:
        raise InvalidKey(f"malformed agreement key: {exc}") from exc
    return own.agreement_private().exchange(peer)


class TokenStatus(Enum):
    VALID = "valid"
    EXPIRED = "expired"
    MISMATCH = "mismatch"


@dataclass(frozen=True)
class AccessToken:
    """Member-issued capability for one community.

    token == sha256(community_id | nonce | issued_at), so identical inputs
    regenerate the identical value and distinct nonces give distinct values.
    """

    token: bytes
    community_id: FedId
    nonce: bytes
    issued_at: int
    expires_at: int

    @property
    def token_hex(self) -> str:
        return self.token.hex()


def token_value(community_id: FedId, nonce: bytes, issued_at: int) -> bytes:
    """The 256-bit token value for the given inputs (pure function)."""
    # FedId charset excludes NUL, so the separator is unambiguous.
    material = community_id.value.encode() + b"\x00" + nonce + issued_at.to_bytes(8, "big")
    return hashlib.sha256(material).digest()


def generate_token(community_id: FedId, nonce: bytes, issued_at: int, ttl: int) -> AccessToken:
    if ttl <= 0:
        raise InvalidArgument(f"token ttl must be positive, got {ttl}")
    if len(nonce) != NONCE_BYTES:
        raise InvalidArgument(f"nonce must be {NONCE_BYTES} bytes, got {len(nonce)}")
    return AccessToken(
        token=token_value(community_id, nonce, issued_at),
        community_id=community_id,
        nonce=nonce,
        issued_at=issued_at,
        expires_at=issued_at + ttl,
    )


def validate_token(presented: bytes, stored: AccessToken, now: int) -> TokenStatus:
    if presented != stored.token:
        return TokenStatus.MISMATCH
    if now >= stored.expires_at:
        return TokenStatus.EXPIRED
    return TokenStatus.VALID
