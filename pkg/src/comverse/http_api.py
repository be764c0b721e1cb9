"""The fedlet web service: one HTTP surface for peer envelopes and operator
commands.

Every POST body carries the envelope signature fields (from, to, msg_type,
payload, seq, signature). Peer messages verify against the key directory and
pass the replay guard; operator commands (msg_type cmd-*) must be signed by
the fedlet's own host key. Field names and canonical signing bytes are fixed
in WIRE.md.

Handlers are synchronous on purpose: FastAPI runs them on its threadpool, so
an inbound message whose processing triggers further fedlet traffic cannot
starve the event loop, and each call funnels into the fedlet's serialized
transition lock.
"""

from __future__ import annotations

import json

from fastapi import Body, FastAPI, Request
from fastapi.middleware.cors import CORSMiddleware
from fastapi.responses import JSONResponse

from comverse.errors import (
    AccessDenied,
    AlreadyMember,
    AuthError,
    ComverseError,
    DeliveryFailure,
    InvalidArgument,
    NotFound,
    SpecValidationError,
)
from comverse.fedlet import Fedlet
from comverse.identity import FedId, verify
from comverse.transport import Envelope, MsgType, ReplayGuard, authenticate, canonical_json
from comverse.transport.simnet import SimNet

COMMAND_TYPES = ("cmd-join", "cmd-leave", "cmd-share", "cmd-approve", "cmd-deny")

_STATUS_BY_ERROR = {
    NotFound: 404,
    AlreadyMember: 409,
    InvalidArgument: 422,
    SpecValidationError: 422,
    AccessDenied: 403,
    AuthError: 401,
    DeliveryFailure: 502,
}


def _error_response(exc: ComverseError) -> JSONResponse:
    status = _STATUS_BY_ERROR.get(type(exc), 500)
    body = {"ok": False, "error": exc.code, "detail": str(exc)}
    if isinstance(exc, AccessDenied):
        body["reason"] = exc.reason
    return JSONResponse(status_code=status, content=body)


def command_signing_bytes(doc: dict) -> bytes:
    return canonical_json(
        {
            "from": doc["from"],
            "to": doc["to"],
            "msg_type": doc["msg_type"],
            "payload": doc["payload"],
            "seq": doc["seq"],
        }
    )


def _verify_command(fedlet: Fedlet, doc: dict) -> dict:
    """Admit an operator command: signed by this fedlet's own host key."""
    try:
        msg_type = doc["msg_type"]
        sender = doc["from"]
        signature = bytes.fromhex(doc["signature"])
        payload = json.loads(bytes.fromhex(doc["payload"]).decode("utf-8"))
    except (KeyError, ValueError) as exc:
        raise InvalidArgument(f"malformed command document: {exc}") from exc
    if msg_type not in COMMAND_TYPES:
        raise InvalidArgument(f"unknown command {msg_type!r}")
    if sender != fedlet.fed_id.value:
        raise AuthError("commands must come from the fedlet's own identity")
    if not verify(command_signing_bytes(doc), signature, fedlet.keys.public_key):
        raise AuthError("command signature does not verify")
    return payload


def build_app(fedlet: Fedlet, auto_advance: bool = False) -> FastAPI:
    """HTTP app over one fedlet. With auto_advance (sim-backed fedlets), the
    simnet settles after every mutating request so flows complete in-line."""
    app = FastAPI(title=f"fedlet {fedlet.fed_id.value}")
    app.add_middleware(
        CORSMiddleware, allow_origins=["*"], allow_methods=["*"], allow_headers=["*"]
    )
    replay = ReplayGuard()

    def settle() -> None:
        if auto_advance and isinstance(fedlet.transport, SimNet):
            fedlet.transport.settle()

    @app.exception_handler(ComverseError)
    async def on_comverse_error(request: Request, exc: ComverseError):
        return _error_response(exc)

    def admit_peer(doc: dict, expected: tuple[MsgType, ...]) -> Envelope:
        env = Envelope.from_wire(doc)
        if env.msg_type not in expected:
            raise InvalidArgument(f"{env.msg_type.value} not accepted on this path")
        if not authenticate(fedlet.directory, env):
            raise AuthError("envelope signature does not verify against the directory")
        if not replay.admit(env):
            raise AuthError("replayed envelope (stale seq)")
        return env

    def dispatch_peer(doc: dict, expected: tuple[MsgType, ...]) -> dict:
        env = admit_peer(doc, expected)
        fedlet.handle_envelope(env)
        settle()
        return {"ok": True}

    # -- mixed peer/operator endpoints ---------------------------------------

    @app.post("/join")
    def post_join(doc: dict = Body(...)):
        if doc.get("msg_type") == "cmd-join":
            payload = _verify_command(fedlet, doc)
            handle = fedlet.join_community(
                FedId(payload["community_id"]), payload.get("address")
            )
            settle()
            return {"ok": True, "requested_as": handle.member_id.value}
        return dispatch_peer(doc, (MsgType.JOIN_REQUEST, MsgType.JOIN_RESPONSE))

    @app.post("/leave")
    def post_leave(doc: dict = Body(...)):
        if doc.get("msg_type") == "cmd-leave":
            payload = _verify_command(fedlet, doc)
            fedlet.leave_community(FedId(payload["community_id"]))
            settle()
            return {"ok": True}
        return dispatch_peer(doc, (MsgType.LEAVE, MsgType.LEAVE_ACK))

    @app.post("/share")
    def post_share(doc: dict = Body(...)):
        payload = _verify_command(fedlet, doc)
        if doc["msg_type"] != "cmd-share":
            raise InvalidArgument("expected cmd-share")
        fedlet.share(
            FedId(payload["community_id"]),
            list(payload.get("datasets") or []),
            revoke=bool(payload.get("revoke", False)),
        )
        settle()
        return {"ok": True}

    @app.post("/requests/{member_id}/approve")
    def post_approve(member_id: str, doc: dict = Body(...)):
        payload = _verify_command(fedlet, doc)
        if doc["msg_type"] != "cmd-approve" or payload.get("member_id") != member_id:
            raise InvalidArgument("command does not match the request path")
        entry = fedlet.approve(FedId(member_id))
        settle()
        return {"ok": True, "member_id": entry.member_id.value, "status": entry.status.value}

    @app.post("/requests/{member_id}/deny")
    def post_deny(member_id: str, doc: dict = Body(...)):
        payload = _verify_command(fedlet, doc)
        if doc["msg_type"] != "cmd-deny" or payload.get("member_id") != member_id:
            raise InvalidArgument("command does not match the request path")
        fedlet.deny(FedId(member_id))
        settle()
        return {"ok": True}

    # -- peer-only endpoints ----------------------------------------------------

    @app.post("/token")
    def post_token(doc: dict = Body(...)):
        return dispatch_peer(doc, (MsgType.TOKEN_UPDATE,))

    @app.post("/sync")
    def post_sync(doc: dict = Body(...)):
        return dispatch_peer(doc, (MsgType.SYNC,))

    @app.post("/aggregate-contribution")
    def post_contribution(doc: dict = Body(...)):
        return dispatch_peer(doc, (MsgType.AGGREGATE_CONTRIBUTION,))

    @app.post("/notify")
    def post_notify(doc: dict = Body(...)):
        return dispatch_peer(doc, (MsgType.NOTIFY,))

    @app.post("/data-request")
    def post_data_request(doc: dict = Body(...)):
        env = admit_peer(doc, (MsgType.DATA_REQUEST,))
        return fedlet.handle_request(env)

    # -- reads --------------------------------------------------------------------

    @app.get("/members")
    def get_members():
        now = fedlet.clock.now()
        members = []
        for entry in sorted(fedlet.fedctl.members.values(), key=lambda e: e.member_id.value):
            token = entry.received_token
            members.append(
                {
                    "member_id": entry.member_id.value,
                    "name": entry.name,
                    "address": entry.address,
                    "status": entry.status.value,
                    "sharing": entry.sharing.value,
                    "joined_at": entry.joined_at,
                    "token_expires_at": token.expires_at if token else None,
                    "token_fresh": bool(token and now < token.expires_at),
                }
            )
        return {"members": members, "now": now}

    @app.get("/communities")
    def get_communities():
        communities = []
        for entry in sorted(fedlet.fedctl.communities.values(), key=lambda e: e.community_id.value):
            communities.append(
                {
                    "community_id": entry.community_id.value,
                    "name": entry.name,
                    "address": entry.address,
                    "share_status": entry.share_status.value,
                    "member_fed_id": entry.member_fed_id.value,
                    "token_issued_at": entry.issued_token.issued_at,
                    "token_expires_at": entry.issued_token.expires_at,
                    "acl": [
                        {"pattern": rule.pattern, "permission": rule.permission.value}
                        for rule in entry.role.acl
                    ],
                }
            )
        return {"communities": communities, "now": fedlet.clock.now()}

    @app.get("/requests")
    def get_requests():
        return {
            "requests": [
                {
                    "member_id": queued.member_id.value,
                    "name": queued.name,
                    "address": queued.address,
                    "received_at": queued.received_at,
                }
                for queued in fedlet.fedctl.pending_requests()
            ]
        }

    @app.get("/status")
    def get_status():
        return {
            "fed_id": fedlet.fed_id.value,
            "name": fedlet.name,
            "address": fedlet.address,
            "hosts_community": fedlet.hosts_community,
            "now": fedlet.clock.now(),
            "members": len(fedlet.fedctl.members),
            "communities": len(fedlet.fedctl.communities),
            "pending_requests": len(fedlet.fedctl.join_queue),
        }

    @app.get("/object/{object_id:path}")
    def get_object(object_id: str, requester: str | None = None, token: str | None = None):
        from comverse.fedcore.store import entries_to_wire

        version, entries = fedlet.fedcore.get_object(
            object_id,
            requester=FedId(requester) if requester else None,
            token=bytes.fromhex(token) if token else None,
        )
        return {"ok": True, "version": version, "entries": entries_to_wire(entries)}

    return app
