"""Transport: addressing, envelopes, the key directory, and simnet behavior."""

import json

import pytest

from comverse.errors import DeliveryFailure, InvalidArgument, KeyConflict, NotFound
from comverse.identity import FedId, KeyPair
from comverse.transport import (
    Address,
    Envelope,
    KeyDirectory,
    MsgType,
    authenticate,
    make_envelope,
)
from comverse.transport.simnet import SimNet, sim_address


class TestAddress:
    def test_round_trip(self):
        addr = Address.parse("comverse://hub.example:8300/com-42")
        assert (addr.host, addr.port, addr.fed_id.value) == ("hub.example", 8300, "com-42")
        assert str(addr) == "comverse://hub.example:8300/com-42"

    def test_port_is_optional(self):
        addr = Address.parse("comverse://sim/alice")
        assert addr.port is None
        assert str(addr) == "comverse://sim/alice"

    @pytest.mark.parametrize(
        "bad",
        ["http://x/y", "comverse://hostonly", "comverse://host:nan/x", "comverse:///noname"],
    )
    def test_malformed_addresses(self, bad):
        with pytest.raises(InvalidArgument):
            Address.parse(bad)


class TestKeyDirectory:
    def test_register_resolve_round_trip(self):
        directory = KeyDirectory()
        kp = KeyPair.generate()
        directory.register(FedId("alice"), kp.public_key, "comverse://sim/alice")
        entry = directory.resolve("comverse://sim/alice")
        assert entry.public_key == kp.public_key

    def test_resolve_unknown_not_found(self):
        with pytest.raises(NotFound):
            KeyDirectory().resolve("comverse://sim/ghost")

    def test_identical_reregister_is_idempotent(self):
        directory = KeyDirectory()
        kp = KeyPair.generate()
        directory.register(FedId("a"), kp.public_key, "comverse://sim/a")
        directory.register(FedId("a"), kp.public_key, "comverse://other/a")
        assert directory.lookup(FedId("a")).address == "comverse://other/a"

    def test_conflicting_key_refused(self):
        directory = KeyDirectory()
        directory.register(FedId("a"), KeyPair.generate().public_key, "comverse://sim/a")
        with pytest.raises(KeyConflict):
            directory.register(FedId("a"), KeyPair.generate().public_key, "comverse://sim/a")


class TestEnvelope:
    def test_wire_round_trip(self):
        kp = KeyPair.generate()
        env = make_envelope(
            FedId("alice"), "comverse://sim/bob", MsgType.NOTIFY, {"kind": "x"}, 1, kp
        )
        again = Envelope.from_wire(json.loads(json.dumps(env.to_wire())))
        assert again == env

    def test_signature_covers_every_field(self):
        kp = KeyPair.generate()
        directory = KeyDirectory()
        directory.register(FedId("alice"), kp.public_key, "comverse://sim/alice")
        env = make_envelope(
            FedId("alice"), "comverse://sim/bob", MsgType.NOTIFY, {"kind": "x"}, 1, kp
        )
        assert authenticate(directory, env)
        tampered = Envelope(
            sender=env.sender, to=env.to, msg_type=env.msg_type,
            payload=env.payload, seq=env.seq + 1, signature=env.signature,
        )
        assert not authenticate(directory, tampered)


class _EchoNode:
    """Minimal sim node recording deliveries."""

    def __init__(self, net, fed_id):
        self.fed_id = FedId(fed_id)
        self.keys = KeyPair.generate(fed_id.encode().ljust(32, b"\x00"))
        self.inbox = []
        net.attach(self)
        net.directory.register(self.fed_id, self.keys.public_key, str(sim_address(self.fed_id)))

    def handle_envelope(self, env):
        self.inbox.append(env)

    def handle_request(self, env):
        return {"ok": True, "echo": env.payload_doc()}

    def tick(self, now):
        pass

    def send_to(self, net, other, doc, seq=None):
        to = str(sim_address(other.fed_id))
        seq = seq if seq is not None else net.next_seq(self.fed_id, to)
        env = make_envelope(self.fed_id, to, MsgType.NOTIFY, doc, seq, self.keys)
        return net.send(env), env


class TestSimNet:
    def test_zero_loss_in_order_exactly_once(self):
        net = SimNet(seed=1)
        a, b = _EchoNode(net, "a"), _EchoNode(net, "b")
        for i in range(5):
            a.send_to(net, b, {"i": i})
        net.settle()
        assert [env.payload_doc()["i"] for env in b.inbox] == [0, 1, 2, 3, 4]
        assert net.metrics["delivered"] == 5

    def test_replayed_seq_dropped_and_counted(self):
        net = SimNet(seed=1)
        a, b = _EchoNode(net, "a"), _EchoNode(net, "b")
        _, env = a.send_to(net, b, {"i": 0})
        net.settle()
        net.send(env)  # byte-identical replay
        net.settle()
        assert len(b.inbox) == 1
        assert net.metrics["replay_dropped"] == 1

    def test_forged_sender_never_delivered(self):
        net = SimNet(seed=1)
        a, b = _EchoNode(net, "a"), _EchoNode(net, "b")
        mallory = KeyPair.generate()
        to = str(sim_address(b.fed_id))
        forged = make_envelope(a.fed_id, to, MsgType.NOTIFY, {"i": 1}, 1, mallory)
        net.send(forged)
        net.settle()
        assert b.inbox == []
        assert net.metrics["auth_dropped"] == 1

    def test_partition_drops_and_heals(self):
        net = SimNet(seed=1)
        a, b = _EchoNode(net, "a"), _EchoNode(net, "b")
        net.partition("a", "b")
        status, _ = a.send_to(net, b, {"i": 0})
        assert status == "dropped"
        with pytest.raises(DeliveryFailure):
            net.request(
                make_envelope(a.fed_id, str(sim_address(b.fed_id)), MsgType.DATA_REQUEST,
                              {"object_id": "x"}, net.next_seq(a.fed_id, str(sim_address(b.fed_id))),
                              a.keys)
            )
        net.heal("a", "b")
        a.send_to(net, b, {"i": 1})
        net.settle()
        assert [env.payload_doc()["i"] for env in b.inbox] == [1]

    def test_seeded_loss_is_reproducible(self):
        outcomes = []
        for _ in range(2):
            net = SimNet(seed=77)
            a, b = _EchoNode(net, "a"), _EchoNode(net, "b")
            net.set_policy(loss_rate=0.5)
            outcomes.append([a.send_to(net, b, {"i": i})[0] for i in range(20)])
        assert outcomes[0] == outcomes[1]
        assert "dropped" in outcomes[0] and "delivered" in outcomes[0]

    def test_delay_defers_delivery_until_run(self):
        net = SimNet(seed=1)
        a, b = _EchoNode(net, "a"), _EchoNode(net, "b")
        net.set_policy(delay=30)
        status, _ = a.send_to(net, b, {"i": 0})
        assert status == "delayed"
        net.run_until(29)
        assert b.inbox == []
        net.run_until(30)
        assert len(b.inbox) == 1

    def test_stopped_node_receives_nothing(self):
        net = SimNet(seed=1)
        a, b = _EchoNode(net, "a"), _EchoNode(net, "b")
        net.stop_node("b")
        a.send_to(net, b, {"i": 0})
        net.settle()
        assert b.inbox == []

    def test_unresolvable_destination(self):
        net = SimNet(seed=1)
        a = _EchoNode(net, "a")
        ghost = FedId("ghost")
        net.directory.register(ghost, KeyPair.generate().public_key, str(sim_address(ghost)))
        env = make_envelope(a.fed_id, str(sim_address(ghost)), MsgType.NOTIFY, {}, 1, a.keys)
        with pytest.raises(DeliveryFailure):
            net.send(env)

    def test_request_round_trip(self):
        net = SimNet(seed=1)
        a, b = _EchoNode(net, "a"), _EchoNode(net, "b")
        to = str(sim_address(b.fed_id))
        resp = net.request(
            make_envelope(a.fed_id, to, MsgType.DATA_REQUEST, {"q": 1},
                          net.next_seq(a.fed_id, to), a.keys)
        )
        assert resp == {"ok": True, "echo": {"q": 1}}


class TestScenarioFiles:
    def test_partition_scenario_from_file(self, tmp_path):
        from comverse.harness import build_flat_community, load_scenario, run_scenario
        from comverse.fedctl import MemberStatus

        scenario = tmp_path / "partition.yaml"
        scenario.write_text(
            "- {at: 100, event: partition, between: [alice, com-hq]}\n"
            "- {at: 9000, event: heal, between: [alice, com-hq]}\n"
        )
        flat = build_flat_community(13, ["alice"], allowlist=["alice"])
        member_id = flat.member_id(flat.members[0]).value
        run_scenario(flat.net, load_scenario(scenario), until=8000, tick_every=60)
        # Token refreshes were cut off for a full refresh window and more.
        assert flat.community.fedctl.members[member_id].status is MemberStatus.STALE
        run_scenario(flat.net, [], until=12000, tick_every=60)
        assert flat.community.fedctl.members[member_id].status is MemberStatus.ACTIVE

    def test_unknown_event_rejected(self):
        from comverse.harness import apply_event

        with pytest.raises(InvalidArgument):
            apply_event(SimNet(seed=1), {"at": 0, "event": "meteor"})
