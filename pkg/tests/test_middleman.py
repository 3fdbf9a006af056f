import random
import socket
import threading
import time

import pytest
from hypothesis import given, settings, strategies as st

from cafx import Behavior, ErrorMsg, ErrorKind, I32, copy_stats
from cafx.middleman import (AcceptorClosedMsg, ConnectionClosedMsg, NewConnectionMsg, NewDataMsg,
                            at_least, at_most, exactly)

from _helpers import exactly_oracle, feed, mirror_broker, record


def echo_roundtrip(port, payload: bytes) -> bytes:
    with socket.create_connection(("127.0.0.1", port)) as c:
        c.sendall(payload)
        got = bytearray()
        while len(got) < len(payload):
            part = c.recv(65536)
            assert part, "mirror closed early"
            got += part
    return bytes(got)


def test_mirror_echoes_byte_exact(system):
    mm = system.middleman
    rng = random.Random(7)
    for size in (1, 17, 4096, 70_000):
        h = mm.spawn_server(mirror_broker, 0)
        payload = rng.randbytes(size)
        assert echo_roundtrip(mm.ports(h)[0], payload) == payload


@settings(max_examples=25, deadline=None)
@given(st.binary(min_size=1, max_size=5000))
def test_mirror_arbitrary_payloads(payload):
    from cafx import ActorSystem
    with ActorSystem(workers=1) as s:
        h = s.middleman.spawn_server(mirror_broker, 0)
        assert echo_roundtrip(s.middleman.ports(h)[0], payload) == payload


def test_exactly_matches_byte_accounting(system):
    rng = random.Random(3)
    pieces = [rng.randbytes(rng.randint(1, 300)) for _ in range(40)]
    stream = b"".join(pieces)
    chunks, closed = record(system, exactly(4), pieces, pause=0.001)
    assert chunks == exactly_oracle(4, stream)
    assert len(closed) == 1


def test_at_most_and_at_least_preserve_stream(system):
    rng = random.Random(5)
    pieces = [rng.randbytes(rng.randint(1, 2000)) for _ in range(20)]
    stream = b"".join(pieces)
    chunks, _ = record(system, at_most(100), pieces)
    assert all(1 <= len(c) <= 100 for c in chunks)
    assert b"".join(chunks) == stream
    chunks, _ = record(system, at_least(500), pieces, pause=0.002)
    assert all(len(c) >= 500 for c in chunks)
    assert stream.startswith(b"".join(chunks))
    assert len(stream) - len(b"".join(chunks)) < 500


def test_no_deep_copies_for_non_retaining_broker(system):
    before = copy_stats.deep_copies
    chunks, _ = record(system, exactly(4), [b"abcd" * 1000], pause=0.0)
    assert len(chunks) == 1000
    assert copy_stats.deep_copies - before == 0


def test_retaining_broker_detaches(system):
    kept, done = [], threading.Event()

    def hoarder(self):
        def on_conn(m: NewConnectionMsg):
            self.configure_read(m.handle, exactly(2))

        def on_data(m: NewDataMsg):
            kept.append(self.current_message)

        def on_closed(m: ConnectionClosedMsg):
            done.set()
            self.quit()
        return Behavior(on_conn, on_data, on_closed)

    mm = system.middleman
    h = mm.spawn_server(hoarder, 0)
    before = copy_stats.deep_copies
    feed(mm.ports(h)[0], [b"aabbcc"])
    assert done.wait(5)
    assert [bytes(m.get(0).buf) for m in kept] == [b"aa", b"bb", b"cc"]
    assert copy_stats.deep_copies - before >= 2


def test_write_on_closed_handle_reports_error(system):
    errors, done = [], threading.Event()

    def sloppy(self):
        def on_conn(m: NewConnectionMsg):
            pass

        def on_data(m: NewDataMsg):
            pass

        def on_closed(m: ConnectionClosedMsg):
            self.write(m.handle, b"too late")

        def on_error(e: ErrorMsg):
            errors.append(e.kind)
            done.set()
            self.quit()
        return Behavior(on_conn, on_data, on_closed, on_error)

    mm = system.middleman
    h = mm.spawn_server(sloppy, 0)
    feed(mm.ports(h)[0], [b"x"])
    assert done.wait(5)
    assert errors == [ErrorKind.HANDLE]


def test_client_broker_and_acceptor_close(system):
    mm = system.middleman
    server = mm.spawn_server(mirror_broker, 0)
    port = mm.ports(server)[0]
    got, done = bytearray(), threading.Event()

    def client(self, handle):
        self.configure_read(handle, at_least(1))
        self.write(handle, b"hello")

        def on_data(m: NewDataMsg):
            got.extend(m.buf)
            if len(got) == 5:
                self.close(handle)

        def on_closed(m: ConnectionClosedMsg):
            done.set()
            self.quit()
        return Behavior(on_data, on_closed)

    mm.spawn_client(client, "127.0.0.1", port)
    assert done.wait(5)
    assert bytes(got) == b"hello"

    closed = threading.Event()

    def listener(self):
        def on_conn(m: NewConnectionMsg):
            pass

        def on_acc(m: AcceptorClosedMsg):
            closed.set()
            self.quit()

        def shut(i: I32):
            for acc in list(self.acceptors):
                self.close(acc)
        return Behavior(on_conn, on_acc, shut)
    h = mm.spawn_server(listener, 0)
    system.send(h, 1)
    assert closed.wait(5)


def test_blocking_handler_is_counted(system):
    mm = system.middleman

    def slow(self):
        def f(i: I32):
            time.sleep(0.25)
            self.quit()
        return Behavior(f)
    h = mm.spawn_broker(slow)
    system.send(h, 1)
    assert system.await_all_actors_done(5)
    time.sleep(0.05)
    assert mm.slow_handlers >= 1
