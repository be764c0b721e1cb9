"""comverse-fedlet: serve one fedlet's web service over HTTP.

Real mode runs a wall-clock fedlet with the HTTP transport binding and a
background tick loop. --demo serves a simnet-backed fedlet preloaded with a
small community (active members, queued join requests, one joined community)
so operator tools have something to drive; the sim settles after each request.
"""

from __future__ import annotations

import json
import random
import socket
import threading
import time
from pathlib import Path

import click
import uvicorn

from comverse.clock import WallClock
from comverse.fedlet import Fedlet
from comverse.http_api import build_app
from comverse.identity import KeyPair, member_fed_id
from comverse.transport import KeyDirectory
from comverse.transport.httpnet import HttpTransport, load_directory_file
from comverse.transport.simnet import SimNet


def _load_or_create_key(path: Path) -> KeyPair:
    if path.exists():
        return KeyPair.generate(bytes.fromhex(path.read_text().strip()))
    seed = random.SystemRandom().randbytes(32)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(seed.hex() + "\n")
    return KeyPair.generate(seed)


def _build_real_fedlet(fed_id, name, host, port, key_path, data_dir, directory_file) -> Fedlet:
    directory = (
        load_directory_file(directory_file) if directory_file else KeyDirectory()
    )
    return Fedlet(
        fed_id,
        name=name,
        transport=HttpTransport(directory),
        directory=directory,
        clock=WallClock(),
        keys=_load_or_create_key(Path(key_path)),
        rng=random.SystemRandom(),
        host=host,
        port=port,
        hosts_community=True,
        data_dir=Path(data_dir) if data_dir else None,
    )


def _build_demo_fedlet(seed: int, host: str, port: int, key_path: Path) -> Fedlet:
    """A sim-backed fedlet with live-looking state for consoles and CLIs."""
    net = SimNet(seed=seed)
    hq = Fedlet.sim(net, "demo-hq", name="Demo HQ", hosts_community=True)
    # Serve over real HTTP: advertise the routable address, keep sim transport.
    hq.host, hq.port = host, port
    Path(key_path).parent.mkdir(parents=True, exist_ok=True)
    Path(key_path).write_text(hq.keys.private_key.hex() + "\n")
    hq.register_identity(hq.fed_id)

    members = [Fedlet.sim(net, name) for name in ("porch-cam", "garden-cam")]
    hq.fedctl.join_policy.allowlist = {
        member_fed_id(m.fed_id, hq.fed_id).value for m in members
    }
    for member in members:
        member.join_community(hq.fed_id)
    for pending_name in ("gate-cam", "street-cam"):
        Fedlet.sim(net, pending_name).join_community(hq.fed_id)

    city = Fedlet.sim(net, "city-net", name="City Network", hosts_community=True)
    city.fedctl.join_policy.allowlist = {member_fed_id(hq.fed_id, city.fed_id).value}
    hq.join_community(city.fed_id)
    net.settle()
    net.run_for(300, tick_every=60)
    return hq


def _pick_port(host: str, port: int) -> int:
    if port != 0:
        return port
    with socket.socket() as sock:
        sock.bind((host, 0))
        return sock.getsockname()[1]


@click.command()
@click.option("--fed-id", default="fedlet-01", show_default=True)
@click.option("--name", default=None)
@click.option("--host", default="127.0.0.1", show_default=True)
@click.option("--port", default=8300, show_default=True, help="0 picks a free port")
@click.option("--key", "key_path", default=None, help="identity key file (hex seed); created if missing")
@click.option("--data-dir", default=None, help="persist ledgers and objects here")
@click.option("--directory-file", default=None, help="signed key directory file")
@click.option("--demo", is_flag=True, help="serve a preloaded sim-backed fedlet")
@click.option("--seed", default=11, show_default=True, help="demo scenario seed")
@click.option("--ready-file", default=None, help="write connection info here once serving")
def main(fed_id, name, host, port, key_path, data_dir, directory_file, demo, seed, ready_file):
    """Run a fedlet web service."""
    port = _pick_port(host, port)
    key_path = key_path or (data_dir or ".") + "/identity.key"
    if demo:
        fedlet = _build_demo_fedlet(seed, host, port, Path(key_path))
    else:
        fedlet = _build_real_fedlet(fed_id, name, host, port, key_path, data_dir, directory_file)
        fedlet.register_identity(fedlet.fed_id)

        def tick_loop():
            while True:
                time.sleep(max(1, fedlet.config.tick_interval // 6))
                try:
                    fedlet.tick(fedlet.clock.now())
                except Exception:
                    pass  # keep serving; next tick retries

        threading.Thread(target=tick_loop, daemon=True).start()

    app = build_app(fedlet, auto_advance=demo)
    if ready_file:
        Path(ready_file).write_text(
            json.dumps(
                {
                    "base_url": f"http://{host}:{port}",
                    "address": fedlet.address,
                    "fed_id": fedlet.fed_id.value,
                    "key_file": str(key_path),
                }
            )
        )
    uvicorn.run(app, host=host, port=port, log_level="warning")


if __name__ == "__main__":
    main()
