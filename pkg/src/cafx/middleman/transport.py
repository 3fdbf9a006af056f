"""Stream transports: TCP and an in-process pipe network for deterministic tests.

A transport opens listeners and outgoing connections. Both hand out plain
non-blocking stream sockets, so the event loop treats them identically.
"""
from __future__ import annotations

import itertools
import socket
import threading

from ..errors import SpawnError


class TcpTransport:
    name = "tcp"

    def listen(self, host: str, port: int, on_socket) -> tuple[socket.socket | None, int]:
        """Bind a listener. Returns (listening socket, bound port)."""
        try:
            sock = socket.create_server((host, port), reuse_port=False)
        except OSError as exc:
            raise SpawnError(exc.errno, f"cannot listen on {host}:{port}: {exc.strerror}") from exc
        sock.setblocking(False)
        return sock, sock.getsockname()[1]

    def unlisten(self, port: int) -> None:
        pass

    def connect(self, host: str, port: int, timeout: float = 5.0) -> socket.socket:
        try:
            sock = socket.create_connection((host, port), timeout=timeout)
        except OSError as exc:
            raise SpawnError(exc.errno, f"cannot connect to {host}:{port}: {exc}") from exc
        sock.setsockopt(socket.IPPROTO_TCP, socket.TCP_NODELAY, 1)
        sock.setblocking(False)
        return sock


TCP = TcpTransport()


class PipeNetwork:
    """Virtual network of in-process listeners connected through socket pairs.

    Several runtimes in one process can share a network instance; ports are
    plain integers with no relation to the host's TCP ports.
    """

    name = "pipe"

    def __init__(self):
        self._listeners: dict[int, object] = {}
        self._ports = itertools.count(1)
        self._lock = threading.Lock()

    def listen(self, host: str, port: int, on_socket):
        """``on_socket(sock)`` runs on the connecting thread for each new peer."""
        with self._lock:
            if port == 0:
                port = next(self._ports)
                while port in self._listeners:
                    port = next(self._ports)
            elif port in self._listeners:
                raise SpawnError(98, f"pipe port {port} already in use")
            self._listeners[port] = on_socket
        return None, port

    def unlisten(self, port: int) -> None:
        with self._lock:
            self._listeners.pop(port, None)

    def connect(self, host: str, port: int, timeout: float = 5.0) -> socket.socket:
        with self._lock:
            on_socket = self._listeners.get(port)
        if on_socket is None:
            raise SpawnError(111, f"nothing listens on pipe port {port}")
        ours, theirs = socket.socketpair()
        ours.setblocking(False)
        theirs.setblocking(False)
        on_socket(theirs)
        return ours
