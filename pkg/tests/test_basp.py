import random
import socket
import time

import pytest

from cafx import (ADDR, ActorSystem, Behavior, DownMsg, HandshakeError, I32, InterfaceMismatch,
                  UNREACHABLE, user_reason)
from cafx.behavior import derive_interface
from cafx.errors import CodecError
from cafx.middleman import BaspFrame, Op, PipeNetwork, decode_header
from cafx.middleman.basp import HEADER_SIZE, handshake_payload

from _helpers import MINUS, PLUS, RESULT, adder_actor, math_actor

CALC = derive_interface(math_actor(None))
ADDER = derive_interface(adder_actor(None))


def random_frame(rng: random.Random) -> BaspFrame:
    return BaspFrame(
        operation=rng.randrange(256), source_node=rng.randbytes(16), dest_node=rng.randbytes(16),
        source_actor=rng.randrange(2**32), dest_actor=rng.randrange(2**32),
        message_id=rng.randrange(2**64), payload=rng.randbytes(rng.choice((0, 1, 7, 300))),
        flags=rng.randrange(256), version=rng.randrange(2**16))


def manual_encode(f: BaspFrame) -> bytes:
    """Independent layout: field by field with int.to_bytes, no struct."""
    be = lambda v, n: v.to_bytes(n, "big")  # noqa: E731
    return (f.magic + be(f.version, 2) + be(f.operation, 1) + be(f.flags, 1) + f.source_node
            + f.dest_node + be(f.source_actor, 4) + be(f.dest_actor, 4) + be(f.message_id, 8)
            + be(len(f.payload), 4) + f.payload)


def frame_roundtrip_failures(count: int, seed: int = 1) -> int:
    rng = random.Random(seed)
    bad = 0
    for _ in range(count):
        f = random_frame(rng)
        wire = f.encode()
        if wire != manual_encode(f) or BaspFrame.decode(wire) != f or BaspFrame.decode(wire).encode() != wire:
            bad += 1
    return bad


def test_frame_codec_roundtrip():
    assert frame_roundtrip_failures(2000) == 0


def test_header_is_sixty_bytes():
    assert HEADER_SIZE == 60
    wire = BaspFrame(Op.DISPATCH, payload=b"abc").encode()
    frame, n = decode_header(wire[:60])
    assert n == 3 and frame.magic == b"CAFX" and frame.version == 1


def test_decode_rejects_bad_lengths():
    wire = BaspFrame(Op.DISPATCH, payload=b"abc").encode()
    with pytest.raises(CodecError):
        BaspFrame.decode(wire[:-1])
    with pytest.raises(CodecError):
        BaspFrame.decode(wire[:30])
    with pytest.raises(CodecError):
        decode_header(wire[:59])


class Pair:
    def __init__(self):
        self.net = PipeNetwork()
        self.a = ActorSystem(workers=2).start()
        self.b = ActorSystem(workers=2).start()

    def publish(self, handle):
        return self.a.middleman.publish(handle, 0, transport=self.net)

    def connect(self, port, expected=None, timeout=5.0):
        return self.b.middleman.remote_actor("pipe", port, expected, timeout, transport=self.net)

    def close(self):
        self.a.shutdown()
        self.b.shutdown()


@pytest.fixture
def pair():
    p = Pair()
    yield p
    p.close()


def test_subset_interface_accepted_superset_rejected(pair):
    calc_port = pair.publish(pair.a.spawn_typed(CALC, math_actor))
    add_port = pair.publish(pair.a.spawn_typed(ADDER, adder_actor))
    h = pair.connect(calc_port, ADDER)
    assert h.iface == ADDER
    with pytest.raises(InterfaceMismatch):
        pair.connect(add_port, CALC)
    with pytest.raises(InterfaceMismatch):
        pair.connect(pair.publish(pair.a.spawn(math_actor)), ADDER)  # untyped publish
    assert pair.connect(add_port, None).iface is None


def test_cross_node_request(pair):
    h = pair.connect(pair.publish(pair.a.spawn_typed(CALC, math_actor)), CALC)
    with pair.b.scoped() as me:
        t0 = time.perf_counter()
        resp = me.request(h, PLUS, 1, 2, timeout=1)
        elapsed = time.perf_counter() - t0
        assert list(resp) == [RESULT, 3]
        assert list(me.request(h, MINUS, 1, 2, timeout=1)) == [RESULT, -1]
    assert elapsed < 1.0


def test_remote_monitor_sees_user_reason(pair):
    def quitter(self):
        def q(x: I32):
            self.quit(user_reason(16))
        return Behavior(q)
    h = pair.connect(pair.publish(pair.a.spawn(quitter)))
    with pair.b.scoped() as me:
        me.monitor(h)
        pair.b.send(h, 1)
        down = me.receive(5).get(0)
    assert isinstance(down, DownMsg) and down.reason == user_reason(16)


def test_addresses_travel_both_ways(pair):
    def relay(self):
        def fwd(target: ADDR, x: I32):
            self.send(target, x * 2)
        return Behavior(fwd)
    h = pair.connect(pair.publish(pair.a.spawn(relay)))
    with pair.b.scoped() as me:
        pair.b.send(h, me.addr, 21)
        assert me.receive(5).get(0) == 42


def test_lost_connection_kills_proxies(pair):
    h = pair.connect(pair.publish(pair.a.spawn(math_actor)))
    with pair.b.scoped() as me:
        me.monitor(h)
        pair.a.middleman.stop()
        down = me.receive(5).get(0)
    assert down.reason == UNREACHABLE


def test_bad_magic_closes_only_that_connection(pair):
    port = pair.publish(pair.a.spawn(math_actor))
    s = pair.net.connect("pipe", port)
    s.setblocking(True)
    s.settimeout(5)
    greeting = s.recv(4096)
    assert greeting[:4] == b"CAFX"
    s.sendall(b"XXXX" + bytes(56))
    while s.recv(4096):
        pass  # drained until the server hangs up
    h = pair.connect(port)
    with pair.b.scoped() as me:
        assert list(me.request(h, PLUS, 2, 2, timeout=2)) == [RESULT, 4]


def test_version_mismatch_raises_handshake_error(pair):
    def fake_server(sock: socket.socket):
        payload = handshake_payload(bytes(range(16)), 1, None)
        sock.setblocking(True)
        sock.sendall(BaspFrame(Op.SERVER_HANDSHAKE, bytes(range(16)), payload=payload,
                               version=2).encode())
        fake_server.keep = sock
    _, port = pair.net.listen("pipe", 0, fake_server)
    with pytest.raises(HandshakeError):
        pair.connect(port, timeout=2)


def test_server_rejects_client_with_wrong_version(pair):
    port = pair.publish(pair.a.spawn(math_actor))
    s = pair.net.connect("pipe", port)
    s.setblocking(True)
    s.settimeout(5)
    s.recv(4096)
    s.sendall(BaspFrame(Op.CLIENT_HANDSHAKE, bytes(16), payload=handshake_payload(bytes(16), 0, None),
                        version=9).encode())
    while s.recv(4096):
        pass
