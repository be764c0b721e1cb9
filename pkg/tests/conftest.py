"""Shared fixtures: serving a sim-backed fedlet over real HTTP."""

import socket
import threading
import time
from dataclasses import dataclass

import pytest
import uvicorn

from comverse.fedlet import Fedlet
from comverse.http_api import build_app


@dataclass
class ServedFedlet:
    fedlet: Fedlet
    port: int
    server: uvicorn.Server
    key_file: str

    @property
    def address(self) -> str:
        return f"comverse://127.0.0.1:{self.port}/{self.fedlet.fed_id.value}"

    @property
    def base_url(self) -> str:
        return f"http://127.0.0.1:{self.port}"


def free_port() -> int:
    with socket.socket() as sock:
        sock.bind(("127.0.0.1", 0))
        return sock.getsockname()[1]


@pytest.fixture
def serve_fedlet(tmp_path):
    """Serve sim-backed fedlets over uvicorn threads for CLI/API tests."""
    running: list[ServedFedlet] = []

    def _serve(fedlet: Fedlet, auto_advance: bool = True) -> ServedFedlet:
        # Fedlets constructed with a routable host:port keep it; sim-addressed
        # ones get moved onto a fresh local port.
        if fedlet.host == "127.0.0.1" and fedlet.port:
            port = fedlet.port
        else:
            port = free_port()
            fedlet.host, fedlet.port = "127.0.0.1", port
        fedlet.register_identity(fedlet.fed_id)
        app = build_app(fedlet, auto_advance=auto_advance)
        server = uvicorn.Server(
            uvicorn.Config(app, host="127.0.0.1", port=port, log_level="error")
        )
        thread = threading.Thread(target=server.run, daemon=True)
        thread.start()
        deadline = time.monotonic() + 10
        while not server.started:
            if time.monotonic() > deadline:
                raise RuntimeError("uvicorn did not start in time")
            time.sleep(0.01)
        key_file = tmp_path / f"{fedlet.fed_id.value}.key"
        key_file.write_text(fedlet.keys.private_key.hex())
        served = ServedFedlet(fedlet=fedlet, port=port, server=server, key_file=str(key_file))
        running.append(served)
        return served

    yield _serve
    for served in running:
        served.server.should_exit = True
