"""comctl: operator CLI over the fedlet HTTP API.

Each verb is a thin, stateless mapping onto exactly one endpoint. Mutating
verbs send command documents carrying the envelope signature fields, signed
with the operator's identity key (the fedlet's own key).

Exit codes: 0 success, 2 usage, 3 connection failure, 4 denied/not-found,
5 validation error.
"""

from __future__ import annotations

import json
import sys
import time
from pathlib import Path

import click
import httpx
import yaml

from comverse.identity import KeyPair, sign
from comverse.transport import Address, canonical_json
from comverse.transport.httpnet import http_base

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_CONNECTION = 3
EXIT_DENIED = 4
EXIT_VALIDATION = 5

_EXIT_BY_STATUS = {401: EXIT_DENIED, 403: EXIT_DENIED, 404: EXIT_DENIED, 409: EXIT_DENIED, 422: EXIT_VALIDATION}


def _config_path() -> Path:
    return Path(click.get_app_dir("comverse")) / "comctl.yaml"


def _load_config() -> dict:
    path = _config_path()
    if path.exists():
        return yaml.safe_load(path.read_text()) or {}
    return {}


class Session:
    def __init__(self, fedlet_address: str, key_path: str | None, json_mode: bool):
        self.address = Address.parse(fedlet_address)
        self.base = http_base(self.address)
        self.key_path = key_path
        self.json_mode = json_mode
        self.http = httpx.Client(timeout=10.0)

    def _key(self) -> KeyPair:
        if not self.key_path:
            raise click.UsageError("no identity key configured (--key or COMVERSE_IDENTITY)")
        seed = bytes.fromhex(Path(self.key_path).read_text().strip())
        return KeyPair.generate(seed)

    def fail(self, error: str, detail: str, code: int) -> "click.exceptions.Exit":
        if self.json_mode:
            click.echo(json.dumps({"ok": False, "error": error, "detail": detail}, sort_keys=True))
        else:
            click.echo(f"error: {error}: {detail}", err=True)
        sys.exit(code)

    def _handle(self, resp: httpx.Response) -> dict:
        if resp.status_code >= 400:
            try:
                body = resp.json()
            except json.JSONDecodeError:
                body = {"error": "http-error", "detail": f"HTTP {resp.status_code}"}
            self.fail(
                body.get("error", "http-error"),
                body.get("detail", ""),
                _EXIT_BY_STATUS.get(resp.status_code, 1),
            )
        return resp.json()

    def get(self, path: str) -> dict:
        try:
            return self._handle(self.http.get(self.base + path))
        except httpx.HTTPError as exc:
            self.fail("connection-failure", str(exc), EXIT_CONNECTION)
            raise  # unreachable

    def command(self, path: str, msg_type: str, payload: dict) -> dict:
        key = self._key()
        doc = {
            "from": self.address.fed_id.value,
            "to": str(self.address),
            "msg_type": msg_type,
            "payload": canonical_json(payload).hex(),
            "seq": time.time_ns(),
        }
        doc["signature"] = sign(canonical_json(doc), key).hex()
        try:
            return self._handle(self.http.post(self.base + path, json=doc))
        except httpx.HTTPError as exc:
            self.fail("connection-failure", str(exc), EXIT_CONNECTION)
            raise  # unreachable

    def emit(self, doc: dict, text: str) -> None:
        if self.json_mode:
            click.echo(json.dumps(doc, sort_keys=True))
        else:
            click.echo(text)


@click.group()
@click.option("--fedlet", envvar="COMVERSE_FEDLET", default=None, help="fedlet address (comverse://host:port/fed_id)")
@click.option("--key", envvar="COMVERSE_IDENTITY", default=None, help="path to the operator identity key (hex seed)")
@click.option("--json", "json_mode", is_flag=True, help="machine-readable output")
@click.pass_context
def main(ctx, fedlet, key, json_mode):
    """Operate a fedlet: memberships, sharing, and the admission queue."""
    config = _load_config()
    fedlet = fedlet or config.get("fedlet")
    key = key or config.get("identity_key")
    if not fedlet:
        raise click.UsageError("no fedlet address (use --fedlet, COMVERSE_FEDLET, or the config file)")
    ctx.obj = Session(fedlet, key, json_mode)


@main.command("list")
@click.pass_obj
def list_communities(session: Session):
    """List community memberships."""
    doc = session.get("/communities")
    lines = [
        f"{c['community_id']}\t{c['share_status']}\t{c['name']}\texpires={c['token_expires_at']}"
        for c in doc["communities"]
    ]
    session.emit(doc, "\n".join(lines) if lines else "(no community memberships)")


@main.command()
@click.argument("fed_id")
@click.option("--address", default=None, help="community address if not in the key directory")
@click.pass_obj
def join(session: Session, fed_id, address):
    """Request to join a community."""
    payload = {"community_id": fed_id}
    if address:
        payload["address"] = address
    doc = session.command("/join", "cmd-join", payload)
    session.emit(doc, f"join requested as {doc.get('requested_as', '')}")


@main.command()
@click.argument("fed_id")
@click.pass_obj
def leave(session: Session, fed_id):
    """Leave a community (the entry is retained, marked revoked)."""
    doc = session.command("/leave", "cmd-leave", {"community_id": fed_id})
    session.emit(doc, f"left {fed_id}")


@main.command()
@click.argument("fed_id")
@click.argument("datasets", nargs=-1)
@click.option("--revoke", is_flag=True, help="revoke data access entirely")
@click.pass_obj
def share(session: Session, fed_id, datasets, revoke):
    """Share datasets with a community; no datasets pauses sharing."""
    doc = session.command(
        "/share", "cmd-share", {"community_id": fed_id, "datasets": list(datasets), "revoke": revoke}
    )
    if revoke:
        text = f"revoked sharing with {fed_id}"
    elif datasets:
        text = f"sharing {', '.join(datasets)} with {fed_id}"
    else:
        text = f"paused sharing with {fed_id}"
    session.emit(doc, text)


@main.command()
@click.pass_obj
def requests(session: Session):
    """Show the pending admission queue."""
    doc = session.get("/requests")
    lines = [f"{r['member_id']}\t{r['name']}\treceived_at={r['received_at']}" for r in doc["requests"]]
    session.emit(doc, "\n".join(lines) if lines else "(no pending requests)")


@main.command()
@click.argument("fed_id")
@click.pass_obj
def approve(session: Session, fed_id):
    """Approve a queued join request."""
    doc = session.command(f"/requests/{fed_id}/approve", "cmd-approve", {"member_id": fed_id})
    session.emit(doc, f"approved {fed_id} ({doc.get('status', '')})")


@main.command()
@click.argument("fed_id")
@click.pass_obj
def deny(session: Session, fed_id):
    """Deny a queued join request (no member state is created)."""
    doc = session.command(f"/requests/{fed_id}/deny", "cmd-deny", {"member_id": fed_id})
    session.emit(doc, f"denied {fed_id}")


@main.command()
@click.pass_obj
def status(session: Session):
    """Fedlet status summary."""
    doc = session.get("/status")
    session.emit(
        doc,
        f"{doc['fed_id']} ({doc['name']}) at {doc['address']}\n"
        f"hosts_community={doc['hosts_community']} members={doc['members']} "
        f"communities={doc['communities']} pending={doc['pending_requests']} now={doc['now']}",
    )


if __name__ == "__main__":
    main()
