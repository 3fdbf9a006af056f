"""System message types: exit reasons, down/exit notifications, request errors."""
from __future__ import annotations

import struct
from dataclasses import dataclass
from enum import IntEnum

from .addr import ActorAddr
from .errors import CodecError
from .message import _ADDR, _decode_addr, default_registry

_U32 = struct.Struct(">I")


class ExitCode(IntEnum):
    NORMAL = 1
    UNHANDLED_ERROR = 2
    LINK_PROPAGATED = 3
    UNKNOWN_ACTOR = 4
    UNREACHABLE = 5
    USER = 16  # first user-defined code


@dataclass(frozen=True)
class ExitReason:
    code: int
    wrapped: "ExitReason | None" = None

    def __post_init__(self):
        if self.code == ExitCode.LINK_PROPAGATED:
            if self.wrapped is None:
                raise ValueError("link_propagated needs a wrapped reason")
        elif self.wrapped is not None:
            raise ValueError("only link_propagated wraps another reason")
        if not 0 < self.code < 2**32:
            raise ValueError("exit code must fit into 32 bits and be nonzero")

    @property
    def is_normal(self) -> bool:
        return self.code == ExitCode.NORMAL

    @property
    def root(self) -> "ExitReason":
        """The innermost reason after unwrapping link propagation."""
        r = self
        while r.wrapped is not None:
            r = r.wrapped
        return r

    def __repr__(self):
        if self.wrapped is not None:
            return f"link_propagated({self.wrapped!r})"
        if self.code >= ExitCode.USER:
            return f"user({self.code})"
        try:
            return ExitCode(self.code).name.lower()
        except ValueError:
            return f"reserved({self.code})"


NORMAL = ExitReason(ExitCode.NORMAL)
UNHANDLED_ERROR = ExitReason(ExitCode.UNHANDLED_ERROR)
UNKNOWN_ACTOR = ExitReason(ExitCode.UNKNOWN_ACTOR)
UNREACHABLE = ExitReason(ExitCode.UNREACHABLE)


def user_reason(code: int) -> ExitReason:
    if code < ExitCode.USER:
        raise ValueError(f"user exit codes start at {int(ExitCode.USER)}")
    return ExitReason(code)


def link_propagated(reason: ExitReason) -> ExitReason:
    return ExitReason(ExitCode.LINK_PROPAGATED, reason)


def encode_reason(reason: ExitReason) -> bytes:
    out = []
    while reason is not None:
        out.append(_U32.pack(reason.code))
        reason = reason.wrapped
    return b"".join(out)


def decode_reason(data: bytes) -> ExitReason:
    if not data or len(data) % 4:
        raise CodecError("exit reason payload must be a nonempty multiple of 4 bytes")
    codes = [c for (c,) in _U32.iter_unpack(data)]
    try:
        reason = ExitReason(codes[-1])
        for code in reversed(codes[:-1]):
            reason = ExitReason(code, reason)
    except ValueError as exc:
        raise CodecError(str(exc)) from None
    return reason


@dataclass(frozen=True)
class DownMsg:
    """Sent to monitors when the observed actor terminates."""
    source: ActorAddr
    reason: ExitReason


@dataclass(frozen=True)
class ExitMsg:
    """Exit signal sent along links."""
    source: ActorAddr
    reason: ExitReason


class ErrorKind(IntEnum):
    TIMEOUT = 1
    DOWN = 2
    HANDLE = 3


@dataclass(frozen=True)
class ErrorMsg:
    kind: ErrorKind
    reason: ExitReason | None = None
    detail: str = ""


def _enc_addr_reason(m):
    return _ADDR.pack(m.source.node, m.source.id) + encode_reason(m.reason)


def _dec_addr_reason(cls):
    def dec(b):
        if len(b) < _ADDR.size + 4:
            raise CodecError(f"truncated {cls.__name__}")
        return cls(_decode_addr(b[:_ADDR.size]), decode_reason(b[_ADDR.size:]))
    return dec


def _enc_error(e: ErrorMsg) -> bytes:
    reason = encode_reason(e.reason) if e.reason is not None else b""
    return bytes([e.kind, len(reason) // 4]) + reason + e.detail.encode("utf-8")


def _dec_error(b: bytes) -> ErrorMsg:
    if len(b) < 2:
        raise CodecError("truncated error message")
    try:
        kind = ErrorKind(b[0])
    except ValueError:
        raise CodecError(f"unknown error kind {b[0]}") from None
    n = b[1] * 4
    if len(b) < 2 + n:
        raise CodecError("truncated error reason")
    reason = decode_reason(b[2:2 + n]) if n else None
    try:
        detail = b[2 + n:].decode("utf-8")
    except UnicodeDecodeError as exc:
        raise CodecError(str(exc)) from None
    return ErrorMsg(kind, reason, detail)


_immutable = lambda v: v  # noqa: E731  frozen dataclasses never need a deep copy

EXIT_REASON = default_registry.register(
    "exit_reason", ExitReason, encode_reason, decode_reason, _immutable, type_id=16)
DOWN_MSG = default_registry.register(
    "down_msg", DownMsg, _enc_addr_reason, _dec_addr_reason(DownMsg), _immutable, type_id=17)
EXIT_MSG = default_registry.register(
    "exit_msg", ExitMsg, _enc_addr_reason, _dec_addr_reason(ExitMsg), _immutable, type_id=18)
ERROR_MSG = default_registry.register(
    "error", ErrorMsg, _enc_error, _dec_error, _immutable, type_id=19)
