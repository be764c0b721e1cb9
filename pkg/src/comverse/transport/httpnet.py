"""Real-mode transport binding: envelopes ride HTTP POSTs between fedlet web services.

One-way sends are fire-and-record: they queue onto a background sender thread
(control-plane transitions must never block on network I/O), which posts with
exponential backoff up to a cap. Read RPCs are synchronous. The key directory
is a flat signed file so fedlets can verify who produced it.
"""

from __future__ import annotations

import queue
import threading
import time

import httpx
import yaml

from comverse.errors import DeliveryFailure, InvalidKey
from comverse.identity import FedId, KeyPair, sign, verify
from comverse.transport import Address, Envelope, KeyDirectory, MsgType, canonical_json

PATH_BY_TYPE = {
    MsgType.JOIN_REQUEST: "/join",
    MsgType.JOIN_RESPONSE: "/join",
    MsgType.TOKEN_UPDATE: "/token",
    MsgType.LEAVE: "/leave",
    MsgType.LEAVE_ACK: "/leave",
    MsgType.DATA_REQUEST: "/data-request",
    MsgType.SYNC: "/sync",
    MsgType.AGGREGATE_CONTRIBUTION: "/aggregate-contribution",
    MsgType.NOTIFY: "/notify",
}


def http_base(address: Address | str) -> str:
    addr = Address.parse(str(address)) if not isinstance(address, Address) else address
    port = addr.port if addr.port is not None else 80
    return f"http://{addr.host}:{port}"


class HttpTransport:
    def __init__(
        self,
        directory: KeyDirectory,
        client: httpx.Client | None = None,
        max_retries: int = 3,
        backoff: float = 0.2,
    ):
        self.directory = directory
        self._client = client or httpx.Client(timeout=10.0)
        self._max_retries = max_retries
        self._backoff = backoff
        self._seq: dict[tuple[str, str], int] = {}
        self._outbox: queue.Queue[Envelope | None] = queue.Queue()
        self.send_failures = 0
        self._sender = threading.Thread(target=self._drain_outbox, daemon=True)
        self._sender.start()

    def next_seq(self, sender: FedId, to: Address | str) -> int:
        key = (sender.value, str(to))
        self._seq[key] = self._seq.get(key, 0) + 1
        return self._seq[key]

    def _post(self, env: Envelope) -> httpx.Response:
        url = http_base(env.to) + PATH_BY_TYPE[env.msg_type]
        last_exc: Exception | None = None
        for attempt in range(self._max_retries + 1):
            try:
                return self._client.post(url, json=env.to_wire())
            except httpx.HTTPError as exc:
                last_exc = exc
                if attempt < self._max_retries:
                    time.sleep(self._backoff * (2**attempt))
        raise DeliveryFailure(f"could not reach {url}: {last_exc}")

    def _drain_outbox(self) -> None:
        while True:
            env = self._outbox.get()
            if env is None:
                return
            try:
                self._post(env)
            except DeliveryFailure:
                # Lost sends are recovered by the protocols' own re-send ticks.
                self.send_failures += 1

    def send(self, env: Envelope) -> str:
        self._outbox.put(env)
        return "delayed"

    def flush(self, timeout: float = 10.0) -> None:
        deadline = time.monotonic() + timeout
        while not self._outbox.empty() and time.monotonic() < deadline:
            time.sleep(0.01)

    def close(self) -> None:
        self._outbox.put(None)

    def request(self, env: Envelope) -> dict:
        resp = self._post(env)
        if resp.status_code >= 400:
            raise DeliveryFailure(f"request to {env.to} failed: HTTP {resp.status_code}")
        return resp.json()


def save_directory_file(directory: KeyDirectory, path: str, signing_key: KeyPair) -> None:
    entries = [
        {
            "fed_id": e.fed_id.value,
            "public_key": e.public_key.hex(),
            "agreement_key": e.agreement_key.hex(),
            "address": e.address,
        }
        for e in sorted(directory._entries.values(), key=lambda e: e.fed_id.value)
    ]
    body = canonical_json({"entries": entries})
    doc = {
        "entries": entries,
        "signed_by": signing_key.public_key.hex(),
        "signature": sign(body, signing_key).hex(),
    }
    with open(path, "w") as fh:
        yaml.safe_dump(doc, fh, sort_keys=False)


def load_directory_file(path: str, trusted_key: bytes | None = None) -> KeyDirectory:
    with open(path) as fh:
        doc = yaml.safe_load(fh)
    body = canonical_json({"entries": doc["entries"]})
    signer = bytes.fromhex(doc["signed_by"])
    if trusted_key is not None and signer != trusted_key:
        raise InvalidKey("directory file signed by an untrusted key")
    if not verify(body, bytes.fromhex(doc["signature"]), signer):
        raise InvalidKey("directory file signature does not verify")
    directory = KeyDirectory()
    for entry in doc["entries"]:
        directory.register(
            FedId(entry["fed_id"]),
            bytes.fromhex(entry["public_key"]),
            entry["address"],
            bytes.fromhex(entry["agreement_key"]),
        )
    return directory
