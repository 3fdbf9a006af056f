"""Node-to-node actor transport.

Every frame starts with a fixed 60-byte header (all integers big-endian)::

    magic "CAFX" | version u16 | operation u8 | flags u8 |
    source node (16) | dest node (16) | source actor u32 | dest actor u32 |
    message id u64 | payload length u32

followed by the payload. A connection opens with the server announcing the
published actor (node id, actor id, interface) and the client answering with
its own node id. Afterwards either side may send

* ``dispatch``: a serialized message for ``dest_actor``, carrying the sender
  and the message id, so requests and responses work across nodes;
* ``monitor``: ask to be told when ``dest_actor`` terminates;
* ``kill_proxy``: ``source_actor`` terminated with the exit reason in the
  payload (or never existed).

Remote actors are represented locally by one :class:`ProxyActor` per
address. Losing the connection kills all proxies of that node with reason
``unreachable``. Frames in flight when a connection drops are lost.
"""
from __future__ import annotations

import logging
import struct
import threading
from concurrent.futures import Future
from concurrent.futures import TimeoutError as FutureTimeout
from dataclasses import dataclass
from enum import IntEnum

from ..addr import NODE_ID_SIZE, ActorAddr
from ..errors import CodecError, HandshakeError, InterfaceMismatch
from ..interface import ActorHandle, TypedHandle, decode_interface, encode_interface, is_subset
from ..message import ADDR, deserialize, serialize
from ..runtime import AbstractActor, Envelope, _DeadActor
from ..sysmsg import (DOWN_MSG, UNKNOWN_ACTOR, UNREACHABLE, DownMsg, decode_reason,
                      encode_reason)
from .broker import Broker
from .events import (AcceptorClosedMsg, ConnectionClosedMsg, NewConnectionMsg, NewDataMsg,
                     exactly)
from .transport import TCP

log = logging.getLogger("cafx.basp")

MAGIC = b"CAFX"
VERSION = 1
HEADER = struct.Struct(">4sHBB16s16sIIQI")
HEADER_SIZE = HEADER.size  # 60
_NO_NODE = bytes(NODE_ID_SIZE)
_HS = struct.Struct(f">{NODE_ID_SIZE}sI")


class Op(IntEnum):
    SERVER_HANDSHAKE = 1
    CLIENT_HANDSHAKE = 2
    DISPATCH = 3
    MONITOR = 4
    KILL_PROXY = 5


@dataclass(frozen=True)
class BaspFrame:
    operation: int
    source_node: bytes = _NO_NODE
    dest_node: bytes = _NO_NODE
    source_actor: int = 0
    dest_actor: int = 0
    message_id: int = 0
    payload: bytes = b""
    flags: int = 0
    version: int = VERSION
    magic: bytes = MAGIC

    def encode(self) -> bytes:
        return HEADER.pack(self.magic, self.version, self.operation, self.flags,
                           self.source_node, self.dest_node, self.source_actor,
                           self.dest_actor, self.message_id, len(self.payload)) + self.payload

    @classmethod
    def decode(cls, data) -> "BaspFrame":
        data = bytes(data)
        if len(data) < HEADER_SIZE:
            raise CodecError("truncated frame header")
        frame, n = decode_header(data[:HEADER_SIZE])
        if len(data) - HEADER_SIZE != n:
            raise CodecError(f"payload length {n} does not match {len(data) - HEADER_SIZE} bytes")
        return frame.with_payload(data[HEADER_SIZE:])

    def with_payload(self, payload: bytes) -> "BaspFrame":
        return BaspFrame(self.operation, self.source_node, self.dest_node, self.source_actor,
                         self.dest_actor, self.message_id, bytes(payload), self.flags,
                         self.version, self.magic)


def decode_header(data) -> tuple[BaspFrame, int]:
    """Parse a header; returns the frame (without payload) and the payload length."""
    try:
        magic, ver, op, flags, snode, dnode, sact, dact, mid, n = HEADER.unpack(bytes(data))
    except struct.error as exc:
        raise CodecError(f"bad frame header: {exc}") from None
    return BaspFrame(op, snode, dnode, sact, dact, mid, b"", flags, ver, magic), n


def handshake_payload(node: bytes, actor_id: int, iface) -> bytes:
    return _HS.pack(node, actor_id) + encode_interface(iface)


def parse_handshake(payload: bytes, registry):
    if len(payload) < _HS.size + 2:
        raise CodecError("truncated handshake payload")
    node, aid = _HS.unpack(payload[:_HS.size])
    return node, aid, decode_interface(payload[_HS.size:], registry)


class ProxyActor(AbstractActor):
    """Local stand-in for a remote actor; forwards envelopes as dispatch frames."""

    __slots__ = ("_basp",)

    def __init__(self, system, addr, basp):
        AbstractActor.__init__(self, system, addr)
        self._basp = basp

    def _enqueue(self, env: Envelope) -> None:
        if self._exit_reason is not None:
            self._bounce(env)
            return
        system = self.system
        try:
            payload = serialize(env.content, system.registry)
        except CodecError as exc:
            log.warning("cannot forward %r to %r: %s", env.content, self.addr, exc)
            self._bounce(env, UNKNOWN_ACTOR)
            return
        src = env.sender
        if src is not None and src.node == system.node:
            _expose(system, src)
        p = env.content._p
        if ADDR in p.types:
            for t, v in zip(p.types, p.values):
                if t is ADDR and v.node == system.node:
                    _expose(system, v)
        frame = HEADER.pack(MAGIC, VERSION, Op.DISPATCH, 0, system.node, self.addr.node,
                            src.id if src is not None else 0, self.addr.id, env.mid,
                            len(payload)) + payload
        self._basp.mm.post(lambda: self._basp._send(self.addr.node, frame))

    def _kill(self, reason) -> None:
        sealed = self._seal(reason)
        if sealed is not None:
            self._notify(*sealed, reason)


def _expose(system, addr: ActorAddr) -> None:
    ref = addr._ref if addr._ref is not None else system._actors.get(addr.id)
    if isinstance(ref, AbstractActor) and not isinstance(ref, ProxyActor):
        system.expose(ref)


class _RemoteObserver:
    """Monitor entry on a local actor that reports its death to one peer node."""

    __slots__ = ("basp", "node")

    def __init__(self, basp, node):
        self.basp = basp
        self.node = node

    def _enqueue(self, env: Envelope) -> None:
        p = env.content._p
        if len(p.types) == 1 and p.types[0] is DOWN_MSG:
            down: DownMsg = p.values[0]
            self.basp.mm.post(lambda: self.basp._kill_remote(self.node, down.source.id, down.reason))


class _Peer:
    __slots__ = ("handle", "node", "header", "waiter", "expected", "server")

    def __init__(self, handle, server: bool):
        self.handle = handle
        self.node: bytes | None = None
        self.header: tuple | None = None  # parsed header awaiting its payload
        self.waiter: Future | None = None
        self.expected = None
        self.server = server


class BaspBroker(Broker):
    """Broker speaking the frame protocol on every node-to-node connection."""

    counted = False

    __slots__ = ("peers", "routes", "published", "proxies", "observed", "_plock")

    @classmethod
    def create(cls, mm) -> "BaspBroker":
        b = mm._new_broker(None, (), cls)
        mm._start(b)
        return b

    def __init__(self, mm, addr, factory, args):
        Broker.__init__(self, mm, addr, factory, args)
        self.peers: dict = {}            # connection handle -> _Peer
        self.routes: dict[bytes, object] = {}  # node id -> connection handle
        self.published: dict = {}        # accept handle -> (actor, interface)
        self.proxies: dict[tuple, ProxyActor] = {}
        self.observed: set = set()       # (actor id, node) with a remote observer
        self._plock = threading.Lock()

    # -- API used from any thread ------------------------------------------
    def publish(self, handle, port: int, host: str, transport=TCP) -> int:
        system = self.system
        actor = system._ref_for(handle)
        if actor._exit_reason is not None or actor.addr.node != system.node:
            raise ValueError(f"cannot publish {handle!r}: not a live local actor")
        iface = handle.iface if isinstance(handle, TypedHandle) else getattr(actor, "_iface", None)
        system.expose(actor)

        def setup():
            acc = self.mm._listen(self, host, port, transport)
            self.published[acc.handle] = (actor, iface)
            return acc.port
        return self.mm.call(setup)

    def remote_actor(self, host: str, port: int, expected=None, timeout: float = 5.0,
                     transport=TCP):
        """Connect to a published actor. ``expected`` None accepts any interface."""
        if self.mm.on_loop:
            raise RuntimeError("remote_actor blocks and cannot run on the middleman thread")
        sock = transport.connect(host, port, timeout)
        fut: Future = Future()

        def setup():
            conn = self.mm._add_conn(self, sock)
            peer = _Peer(conn.handle, server=False)
            peer.waiter = fut
            peer.expected = expected
            self.peers[conn.handle] = peer
            self.configure_read(conn.handle, exactly(HEADER_SIZE))
        self.mm.call(setup)
        try:
            return fut.result(timeout)
        except FutureTimeout:
            raise TimeoutError(f"no handshake from {host}:{port} within {timeout}s") from None

    def proxy_for(self, addr: ActorAddr):
        key = (addr.node, addr.id)
        with self._plock:
            proxy = self.proxies.get(key)
            if proxy is not None:
                return proxy
            if addr.node not in self.routes:
                return None
            proxy = ProxyActor(self.system, ActorAddr(addr.node, addr.id), self)
            self.proxies[key] = proxy
        frame = BaspFrame(Op.MONITOR, self.system.node, addr.node, 0, addr.id).encode()
        self.mm.post(lambda: self._send(addr.node, frame))
        return proxy

    # -- loop side -----------------------------------------------------------
    def _handle(self, env: Envelope) -> None:
        v = env.content._p.values
        msg = v[0] if len(v) == 1 else None
        tp = type(msg)
        if tp is NewDataMsg:
            self._on_data(msg.handle, msg.buf)
        elif tp is NewConnectionMsg:
            self._on_connection(msg)
        elif tp is ConnectionClosedMsg:
            self._on_closed(msg.handle)
        elif tp is AcceptorClosedMsg:
            self.published.pop(msg.handle, None)
        else:
            log.debug("basp broker ignores %r", env.content)

    def _on_connection(self, msg: NewConnectionMsg) -> None:
        pub = self.published.get(msg.source)
        if pub is None:
            self.close(msg.handle)
            return
        actor, iface = pub
        peer = _Peer(msg.handle, server=True)
        self.peers[msg.handle] = peer
        self.configure_read(msg.handle, exactly(HEADER_SIZE))
        payload = handshake_payload(self.system.node, actor.addr.id, iface)
        self.write(msg.handle, BaspFrame(Op.SERVER_HANDSHAKE, self.system.node, _NO_NODE,
                                         actor.addr.id, 0, 0, payload).encode())

    def _on_data(self, handle, buf: bytearray) -> None:
        peer = self.peers.get(handle)
        if peer is None:
            return
        if peer.header is None:
            try:
                frame, n = decode_header(buf)
            except CodecError as exc:
                self._teardown(peer, f"malformed header: {exc}")
                return
            if frame.magic != MAGIC:
                self._teardown(peer, f"bad magic {frame.magic!r}")
                return
            if n:
                peer.header = frame
                self.configure_read(handle, exactly(n))
                return
            self._on_frame(peer, frame)
        else:
            frame = peer.header.with_payload(buf)
            peer.header = None
            self.configure_read(handle, exactly(HEADER_SIZE))
            self._on_frame(peer, frame)

    def _on_frame(self, peer: _Peer, frame: BaspFrame) -> None:
        op = frame.operation
        if frame.version != VERSION:
            self._teardown(peer, f"protocol version {frame.version}, expected {VERSION}",
                           HandshakeError)
            return
        try:
            if op == Op.SERVER_HANDSHAKE and not peer.server and peer.node is None:
                self._on_server_handshake(peer, frame)
            elif op == Op.CLIENT_HANDSHAKE and peer.server and peer.node is None:
                node, _, _ = parse_handshake(frame.payload, self.system.registry)
                self._add_route(peer, node)
            elif peer.node is None:
                self._teardown(peer, f"operation {op} before handshake")
            elif op == Op.DISPATCH:
                self._on_dispatch(peer, frame)
            elif op == Op.MONITOR:
                self._on_monitor(peer, frame.dest_actor)
            elif op == Op.KILL_PROXY:
                self._on_kill(peer, frame.source_actor, decode_reason(frame.payload))
            else:
                self._teardown(peer, f"unknown operation {op}")
        except CodecError as exc:
            self._teardown(peer, f"malformed frame: {exc}")

    def _on_server_handshake(self, peer: _Peer, frame: BaspFrame) -> None:
        node, aid, published = parse_handshake(frame.payload, self.system.registry)
        fut = peer.waiter
        expected = peer.expected
        if expected is not None and (published is None or not is_subset(expected, published)):
            peer.waiter = None
            self._teardown(peer, "interface mismatch", None)
            fut.set_exception(InterfaceMismatch(
                f"expected interface {expected} is not a subset of published {published}"))
            return
        self.write(peer.handle, BaspFrame(Op.CLIENT_HANDSHAKE, self.system.node, node, 0, aid, 0,
                                          handshake_payload(self.system.node, 0, None)).encode())
        self._add_route(peer, node)
        addr = ActorAddr(node, aid)
        addr._ref = self.proxy_for(addr)
        peer.waiter = None
        fut.set_result(ActorHandle(addr) if expected is None else TypedHandle(addr, expected))

    def _add_route(self, peer: _Peer, node: bytes) -> None:
        peer.node = node
        with self._plock:
            self.routes.setdefault(node, peer.handle)

    def _on_dispatch(self, peer: _Peer, frame: BaspFrame) -> None:
        system = self.system
        msg = deserialize(frame.payload, system.registry)
        sender = None
        if frame.source_actor:
            sender = ActorAddr(frame.source_node, frame.source_actor)
            system._resolve(sender)
        target = system._actors.get(frame.dest_actor)
        env = Envelope(msg, sender, frame.message_id)
        if target is None or target._exit_reason is not None:
            reason = target._exit_reason if target is not None else UNKNOWN_ACTOR
            _DeadActor(system, ActorAddr(system.node, frame.dest_actor), reason)._enqueue(env)
            self._kill_remote(peer.node, frame.dest_actor, reason)
            return
        target._enqueue(env)

    def _on_monitor(self, peer: _Peer, actor_id: int) -> None:
        key = (actor_id, peer.node)
        if key in self.observed:
            return
        target = self.system._actors.get(actor_id)
        if target is None:
            self._kill_remote(peer.node, actor_id, UNKNOWN_ACTOR)
            return
        if target._attach_monitor(_RemoteObserver(self, peer.node)):
            self.observed.add(key)
        else:
            self._kill_remote(peer.node, actor_id, target._exit_reason)

    def _on_kill(self, peer: _Peer, actor_id: int, reason) -> None:
        with self._plock:
            proxy = self.proxies.pop((peer.node, actor_id), None)
        if proxy is not None:
            proxy._kill(reason)

    def _kill_remote(self, node: bytes, actor_id: int, reason) -> None:
        self.observed.discard((actor_id, node))
        frame = BaspFrame(Op.KILL_PROXY, self.system.node, node, actor_id, 0, 0,
                          encode_reason(reason)).encode()
        self._send(node, frame)

    def _send(self, node: bytes, frame: bytes) -> None:
        handle = self.routes.get(node)
        if handle is None:
            return  # connection gone: frame dropped, monitors report the loss
        self.write(handle, frame)

    def _teardown(self, peer: _Peer, why: str, exc_type=HandshakeError) -> None:
        log.warning("closing node connection %r: %s", peer.handle, why)
        if peer.waiter is not None and exc_type is not None:
            peer.waiter.set_exception(exc_type(why))
            peer.waiter = None
        if peer.handle in self.connections:
            self.close(peer.handle)

    def _on_closed(self, handle) -> None:
        peer = self.peers.pop(handle, None)
        if peer is None:
            return
        if peer.waiter is not None:
            peer.waiter.set_exception(HandshakeError("connection closed during handshake"))
        node = peer.node
        if node is None or self.routes.get(node) != handle:
            return
        with self._plock:
            del self.routes[node]
            dead = [k for k in self.proxies if k[0] == node]
            proxies = [self.proxies.pop(k) for k in dead]
        self.observed = {k for k in self.observed if k[1] != node}
        for p in proxies:
            p._kill(UNREACHABLE)
