"""The middleman: one selector loop thread hosting brokers.

A broker is an actor whose callbacks all run on the loop thread. Besides
ordinary messages it receives IO events (new connection, new data,
connection closed, acceptor closed). It writes through :meth:`Broker.write`
into a per-connection output buffer that the loop flushes when the socket is
writable.

Received bytes are handed out in one reused message per connection. When
the broker does not keep a reference to the event message, the buffer is
refilled in place; otherwise the copy-on-write rule detaches a copy first.
"""
from __future__ import annotations

import logging
import selectors
import socket
import threading
import time
from collections import deque

from ..errors import SpawnError
from ..message import make_message
from ..runtime import Envelope, LocalActor, _FINISHED
from ..scheduler import UNLIMITED
from ..sysmsg import ErrorKind, ErrorMsg
from .events import (AcceptHandle, AcceptorClosedMsg, ConnectionClosedMsg, ConnectionHandle,
                     NewConnectionMsg, NewDataMsg, ReadMode, ReceivePolicy, at_most)
from .transport import TCP

log = logging.getLogger("cafx.middleman")

DEFAULT_POLICY = at_most(4096)
_RECV_SIZE = 65536


class Connection:
    __slots__ = ("handle", "sock", "broker", "policy", "inbuf", "outbuf", "msg", "closed",
                 "writing", "mm")

    def __init__(self, mm, handle, sock, broker):
        self.mm = mm
        self.handle = handle
        self.sock = sock
        self.broker = broker
        self.policy: ReceivePolicy = DEFAULT_POLICY
        self.inbuf = bytearray()
        self.outbuf = bytearray()
        self.msg = make_message(NewDataMsg(handle, bytearray()))
        self.closed = False
        self.writing = False

    def on_event(self, mask):
        if mask & selectors.EVENT_READ:
            self.mm._read(self)
        if mask & selectors.EVENT_WRITE and not self.closed:
            self.mm._flush(self)


class Acceptor:
    __slots__ = ("handle", "sock", "broker", "port", "transport", "mm")

    def __init__(self, mm, handle, sock, broker, port, transport):
        self.mm = mm
        self.handle = handle
        self.sock = sock
        self.broker = broker
        self.port = port
        self.transport = transport

    def on_event(self, mask):
        try:
            conn_sock, _ = self.sock.accept()
        except (BlockingIOError, InterruptedError):
            return
        except OSError as exc:
            log.warning("accept failed on port %s: %s", self.port, exc)
            return
        conn_sock.setblocking(False)
        if conn_sock.family in (socket.AF_INET, socket.AF_INET6):
            conn_sock.setsockopt(socket.IPPROTO_TCP, socket.TCP_NODELAY, 1)
        self.mm._adopt(self, conn_sock)


class Broker(LocalActor):
    """Actor running inside the middleman loop."""

    __slots__ = ("mm", "connections", "acceptors")

    def __init__(self, mm, addr, factory, args):
        LocalActor.__init__(self, mm.system, addr, factory, args)
        self.mm = mm
        self.connections: dict[ConnectionHandle, Connection] = {}
        self.acceptors: dict[AcceptHandle, Acceptor] = {}

    # -- scheduling: always on the loop thread ----------------------------
    def _wake(self) -> None:
        self.mm.post(self._resume_here)

    def _resume_here(self) -> None:
        if self._exit_reason is not None:
            return
        t0 = time.perf_counter()
        res = self.resume(None, UNLIMITED)
        self.mm._watch(self, t0)
        if res is _FINISHED:
            self.mm._broker_done(self)

    def _event(self, msg) -> None:
        """Deliver an IO event directly, bypassing the mailbox."""
        if self._exit_reason is not None:
            return
        if self._running:
            # raised from inside one of our own callbacks: queue behind it
            self._enqueue(Envelope(msg, None))
            return
        self._running = True
        env = Envelope(msg, None)
        t0 = time.perf_counter()
        try:
            self._handle(env)
        except Exception as exc:
            self._fail(exc)
        finally:
            self._current = None
            self._running = False
        del env, msg
        self.mm._watch(self, t0)
        if self._quit_reason is not None:
            self._terminate(self._quit_reason)
            self.mm._broker_done(self)

    # -- IO API for callbacks ----------------------------------------------
    def write(self, handle: ConnectionHandle, data) -> None:
        conn = self.connections.get(handle)
        if conn is None or conn.closed:
            self._handle_error(handle, "write")
            return
        conn.outbuf += data
        self.mm._want_write(conn)

    def configure_read(self, handle: ConnectionHandle, policy: ReceivePolicy) -> None:
        conn = self.connections.get(handle)
        if conn is None or conn.closed:
            self._handle_error(handle, "configure_read")
            return
        conn.policy = policy

    def flush(self, handle: ConnectionHandle) -> None:
        conn = self.connections.get(handle)
        if conn is not None and not conn.closed:
            self.mm._flush(conn)

    def close(self, handle) -> None:
        """Close a connection or acceptor; the closed event is delivered as usual."""
        if isinstance(handle, AcceptHandle):
            acc = self.acceptors.get(handle)
            if acc is None:
                self._handle_error(handle, "close")
                return
            self.mm._close_acceptor(acc, notify=True)
            return
        conn = self.connections.get(handle)
        if conn is None or conn.closed:
            self._handle_error(handle, "close")
            return
        self.mm._flush(conn)
        self.mm._close_conn(conn, notify=True)

    def add_connection(self, sock: socket.socket) -> ConnectionHandle:
        """Adopt an already connected socket."""
        sock.setblocking(False)
        return self.mm._add_conn(self, sock).handle

    def _handle_error(self, handle, op: str) -> None:
        err = ErrorMsg(ErrorKind.HANDLE, detail=f"{op}: unknown or closed handle {handle!r}")
        self._enqueue(Envelope(make_message(err), None))


class Middleman:
    """Selector loop plus the broker and connection tables of one actor system."""

    def __init__(self, system, watchdog_ms: float = 100.0):
        self.system = system
        self.watchdog_s = watchdog_ms / 1000.0
        self.slow_handlers = 0
        self._sel = selectors.DefaultSelector()
        self._wake_r, self._wake_w = socket.socketpair()
        self._wake_r.setblocking(False)
        self._wake_w.setblocking(False)
        self._sel.register(self._wake_r, selectors.EVENT_READ, None)
        self._tasks: deque = deque()
        self._ids = iter(range(1, 2**63))
        self._stopped = False
        self._brokers: set[Broker] = set()
        self._basp = None
        self._thread = threading.Thread(target=self._run, name="cafx-middleman", daemon=True)
        self._thread.start()

    # -- cross-thread entry ------------------------------------------------
    def post(self, fn) -> None:
        self._tasks.append(fn)
        if threading.current_thread() is not self._thread:
            try:
                self._wake_w.send(b"\0")
            except (BlockingIOError, OSError):
                pass  # a wakeup is already pending, or the loop is gone

    def call(self, fn, timeout: float = 5.0):
        """Run ``fn`` on the loop and return its result (blocking)."""
        if threading.current_thread() is self._thread:
            return fn()
        box: dict = {}
        done = threading.Event()

        def task():
            try:
                box["v"] = fn()
            except BaseException as exc:  # re-raised on the calling thread
                box["e"] = exc
            done.set()
        self.post(task)
        if not done.wait(timeout):
            raise TimeoutError("middleman did not answer")
        if "e" in box:
            raise box["e"]
        return box.get("v")

    @property
    def on_loop(self) -> bool:
        return threading.current_thread() is self._thread

    # -- loop --------------------------------------------------------------
    def _run(self) -> None:
        sel = self._sel
        tasks = self._tasks
        while not self._stopped:
            timeout = 0 if tasks else None
            for key, mask in sel.select(timeout):
                if key.data is None:
                    try:
                        while self._wake_r.recv(4096):
                            pass
                    except (BlockingIOError, OSError):
                        pass
                    continue
                try:
                    key.data.on_event(mask)
                except Exception:
                    log.exception("IO handler failed")
            while tasks:
                fn = tasks.popleft()
                try:
                    fn()
                except Exception:
                    log.exception("middleman task failed")
        for b in list(self._brokers):
            self._drop_io(b)
        sel.close()
        self._wake_r.close()
        self._wake_w.close()

    def stop(self) -> None:
        if self._stopped:
            return

        def halt():
            self._stopped = True
        self.post(halt)
        if threading.current_thread() is not self._thread:
            self._thread.join(5.0)

    def _watch(self, broker, t0: float) -> None:
        dt = time.perf_counter() - t0
        if dt > self.watchdog_s:
            self.slow_handlers += 1
            log.warning("broker %s blocked the middleman for %.0f ms", broker.addr.id, dt * 1000)

    # -- spawning brokers ----------------------------------------------------
    def _new_broker(self, fn, args, cls=Broker):
        addr = self.system._new_addr()
        b = cls(self, addr, fn, args)
        if b.counted:
            self.system._register(b)
        return b

    def spawn_broker(self, fn, *args):
        """Spawn a broker without IO resources."""
        b = self._new_broker(fn, args)
        self.post(lambda: self._start(b))
        return b.handle()

    def spawn_server(self, fn, port: int = 0, *args, host: str = "127.0.0.1", transport=TCP):
        """Spawn a broker owning a listener; ``fn(self, *args)`` is its factory.

        The bound port is available via :meth:`ports`.
        """
        b = self._new_broker(fn, args)

        def setup():
            self._listen(b, host, port, transport)
            self._start(b)
        try:
            self.call(setup)
        except SpawnError:
            b.mailbox.close()
            b._exit_reason = b._quit_reason = _spawn_failed()
            if b.counted:
                self.system._on_terminated(b)
            raise
        return b.handle()

    def spawn_client(self, fn, host: str, port: int, *args, transport=TCP):
        """Spawn a broker for an outgoing connection; ``fn(self, handle, *args)``."""
        sock = transport.connect(host, port)
        b = self._new_broker(fn, ())

        def setup():
            conn = self._add_conn(b, sock)
            b._args = (conn.handle,) + args
            self._start(b)
        self.call(setup)
        return b.handle()

    def ports(self, handle) -> list[int]:
        b = self.system._ref_for(handle)
        return self.call(lambda: [a.port for a in b.acceptors.values()])

    def _start(self, b: Broker) -> None:
        self._brokers.add(b)
        b._resume_here()

    # -- resources -------------------------------------------------------------
    def _next_id(self) -> int:
        return next(self._ids)

    def _listen(self, b: Broker, host: str, port: int, transport) -> Acceptor:
        holder: list = []

        def on_socket(sock):
            self.post(lambda: self._adopt(holder[0], sock))
        sock, bound = transport.listen(host, port, on_socket)
        acc = Acceptor(self, AcceptHandle(self._next_id()), sock, b, bound, transport)
        holder.append(acc)
        b.acceptors[acc.handle] = acc
        if sock is not None:
            self._sel.register(sock, selectors.EVENT_READ, acc)
        return acc

    def _adopt(self, acc: Acceptor, sock) -> None:
        b = acc.broker
        if b._exit_reason is not None or acc.handle not in b.acceptors:
            sock.close()
            return
        conn = self._add_conn(b, sock)
        b._event(make_message(NewConnectionMsg(acc.handle, conn.handle)))

    def _add_conn(self, b: Broker, sock) -> Connection:
        conn = Connection(self, ConnectionHandle(self._next_id()), sock, b)
        b.connections[conn.handle] = conn
        self._sel.register(sock, selectors.EVENT_READ, conn)
        return conn

    def _want_write(self, conn: Connection) -> None:
        if not conn.writing and not conn.closed:
            conn.writing = True
            self._sel.modify(conn.sock, selectors.EVENT_READ | selectors.EVENT_WRITE, conn)

    def _flush(self, conn: Connection) -> None:
        out = conn.outbuf
        while out:
            try:
                n = conn.sock.send(out)
            except (BlockingIOError, InterruptedError):
                break
            except OSError:
                self._close_conn(conn, notify=True)
                return
            del out[:n]
        if not out and conn.writing:
            conn.writing = False
            self._sel.modify(conn.sock, selectors.EVENT_READ, conn)
        elif out:
            self._want_write(conn)

    def _read(self, conn: Connection) -> None:
        try:
            data = conn.sock.recv(_RECV_SIZE)
        except (BlockingIOError, InterruptedError):
            return
        except OSError:
            data = b""
        if not data:
            self._close_conn(conn, notify=True)
            return
        conn.inbuf += data
        self._consume(conn)

    def _consume(self, conn: Connection) -> None:
        inbuf = conn.inbuf
        b = conn.broker
        while inbuf and not conn.closed and b._exit_reason is None:
            mode, n = conn.policy.mode, conn.policy.n
            if mode is ReadMode.EXACTLY:
                if len(inbuf) < n:
                    return
                chunk = inbuf[:n]
                del inbuf[:n]
            elif mode is ReadMode.AT_LEAST:
                if len(inbuf) < n:
                    return
                chunk = inbuf[:]
                inbuf.clear()
            else:
                chunk = inbuf[:n]
                del inbuf[:n]
            msg = conn.msg
            data_msg = msg.get_mutable(0)  # detaches only if the broker kept the last one
            data_msg.buf[:] = chunk
            b._event(msg.clone())

    def _close_conn(self, conn: Connection, notify: bool) -> None:
        if conn.closed:
            return
        conn.closed = True
        try:
            self._sel.unregister(conn.sock)
        except (KeyError, ValueError):
            pass
        conn.sock.close()
        b = conn.broker
        b.connections.pop(conn.handle, None)
        if notify:
            b._event(make_message(ConnectionClosedMsg(conn.handle)))

    def _close_acceptor(self, acc: Acceptor, notify: bool) -> None:
        b = acc.broker
        if b.acceptors.pop(acc.handle, None) is None:
            return
        acc.transport.unlisten(acc.port)
        if acc.sock is not None:
            try:
                self._sel.unregister(acc.sock)
            except (KeyError, ValueError):
                pass
            acc.sock.close()
        if notify:
            b._event(make_message(AcceptorClosedMsg(acc.handle)))

    def _drop_io(self, b: Broker) -> None:
        for conn in list(b.connections.values()):
            self._flush(conn)
            self._close_conn(conn, notify=False)
        for acc in list(b.acceptors.values()):
            self._close_acceptor(acc, notify=False)

    def _broker_done(self, b: Broker) -> None:
        self._brokers.discard(b)
        self._drop_io(b)

    # -- node-to-node transport ------------------------------------------------
    @property
    def basp(self):
        if self._basp is None:
            from .basp import BaspBroker
            self._basp = self.call(lambda: self._basp or BaspBroker.create(self))
        return self._basp

    def publish(self, handle, port: int = 0, host: str = "127.0.0.1", transport=TCP) -> int:
        return self.basp.publish(handle, port, host, transport)

    def remote_actor(self, host: str, port: int, expected=None, timeout: float = 5.0,
                     transport=TCP):
        return self.basp.remote_actor(host, port, expected, timeout, transport)

    def proxy_for(self, addr):
        if self._basp is None:
            return None
        return self._basp.proxy_for(addr)


def _spawn_failed():
    from ..sysmsg import UNHANDLED_ERROR
    return UNHANDLED_ERROR
