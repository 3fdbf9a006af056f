"""Handles and the four IO event messages a broker receives, plus receive policies."""
from __future__ import annotations

import struct
from dataclasses import dataclass
from enum import IntEnum

from ..errors import CodecError
from ..message import default_registry

_U64 = struct.Struct(">Q")
_U64x2 = struct.Struct(">QQ")


@dataclass(frozen=True)
class AcceptHandle:
    id: int

    def __repr__(self):
        return f"accept#{self.id}"


@dataclass(frozen=True)
class ConnectionHandle:
    id: int

    def __repr__(self):
        return f"conn#{self.id}"


@dataclass(frozen=True)
class NewConnectionMsg:
    source: AcceptHandle
    handle: ConnectionHandle


@dataclass
class NewDataMsg:
    """Received bytes. The buffer is reused for the next event on the same
    connection unless the message was retained; copy it to keep it."""
    handle: ConnectionHandle
    buf: bytearray


@dataclass(frozen=True)
class ConnectionClosedMsg:
    handle: ConnectionHandle


@dataclass(frozen=True)
class AcceptorClosedMsg:
    handle: AcceptHandle


class ReadMode(IntEnum):
    AT_LEAST = 1
    EXACTLY = 2
    AT_MOST = 3


@dataclass(frozen=True)
class ReceivePolicy:
    mode: ReadMode
    n: int

    def __post_init__(self):
        if self.n < 1:
            raise ValueError("receive policy size must be at least 1")


def at_least(n: int) -> ReceivePolicy:
    return ReceivePolicy(ReadMode.AT_LEAST, n)


def exactly(n: int) -> ReceivePolicy:
    return ReceivePolicy(ReadMode.EXACTLY, n)


def at_most(n: int) -> ReceivePolicy:
    return ReceivePolicy(ReadMode.AT_MOST, n)


def _u64_codec(cls):
    def dec(b):
        if len(b) != 8:
            raise CodecError(f"{cls.__name__} payload must be 8 bytes")
        return cls(_U64.unpack(b)[0])
    return (lambda h: _U64.pack(h.id)), dec


def _pair_codec():
    def enc(m):
        return _U64x2.pack(m.source.id, m.handle.id)

    def dec(b):
        if len(b) != 16:
            raise CodecError("new_connection payload must be 16 bytes")
        a, c = _U64x2.unpack(b)
        return NewConnectionMsg(AcceptHandle(a), ConnectionHandle(c))
    return enc, dec


def _enc_data(m: NewDataMsg) -> bytes:
    return _U64.pack(m.handle.id) + bytes(m.buf)


def _dec_data(b: bytes) -> NewDataMsg:
    if len(b) < 8:
        raise CodecError("truncated new_data payload")
    return NewDataMsg(ConnectionHandle(_U64.unpack(b[:8])[0]), bytearray(b[8:]))


def _copy_data(m: NewDataMsg) -> NewDataMsg:
    return NewDataMsg(m.handle, bytearray(m.buf))


def _same(v):
    return v


ACCEPT_HANDLE = default_registry.register(
    "accept_handle", AcceptHandle, *_u64_codec(AcceptHandle), _same, type_id=20)
CONNECTION_HANDLE = default_registry.register(
    "connection_handle", ConnectionHandle, *_u64_codec(ConnectionHandle), _same, type_id=21)
NEW_CONNECTION_MSG = default_registry.register(
    "new_connection_msg", NewConnectionMsg, *_pair_codec(), _same, type_id=22)
NEW_DATA_MSG = default_registry.register(
    "new_data_msg", NewDataMsg, _enc_data, _dec_data, _copy_data, type_id=23)
CONNECTION_CLOSED_MSG = default_registry.register(
    "connection_closed_msg", ConnectionClosedMsg,
    lambda m: _U64.pack(m.handle.id),
    lambda b: ConnectionClosedMsg(_u64_codec(ConnectionHandle)[1](b)), _same, type_id=24)
ACCEPTOR_CLOSED_MSG = default_registry.register(
    "acceptor_closed_msg", AcceptorClosedMsg,
    lambda m: _U64.pack(m.handle.id),
    lambda b: AcceptorClosedMsg(_u64_codec(AcceptHandle)[1](b)), _same, type_id=25)
