"""Typed, reference-counted, copy-on-write message tuples and their codec.

A :class:`Message` is a handle onto a shared payload. Handles created with
:meth:`Message.clone` share the payload; the first write through a handle
whose payload is shared detaches a private deep copy first. Reads never copy.

Wire layout of a serialized message::

    u16 arity, then per element: u16 type id | u32 length | payload bytes

All integers are big-endian, text is UTF-8, floats are IEEE-754.
"""
from __future__ import annotations

import copy
import struct
import threading
from typing import Any, Callable, Iterable, Sequence

from .addr import ActorAddr, NODE_ID_SIZE
from .atom import AtomValue
from .errors import AccessError, CodecError, RegistryError

__all__ = [
    "TypeId", "TypeRegistry", "default_registry", "Message", "make_message",
    "serialize", "deserialize", "copy_stats", "CopyStats",
    "BOOL", "I8", "I16", "I32", "I64", "U8", "U16", "U32", "U64",
    "F32", "F64", "TEXT", "BYTES", "ATOM", "ADDR",
]


class TypeId:
    """A registered element type: stable small id plus stable name."""

    __slots__ = ("id", "name", "py_type", "check", "encode", "decode", "copy")

    def __init__(self, type_id, name, py_type, check, encode, decode, copy_fn):
        self.id = type_id
        self.name = name
        self.py_type = py_type
        self.check = check
        self.encode = encode
        self.decode = decode
        self.copy = copy_fn

    def __eq__(self, other):
        if self is other:
            return True
        if not isinstance(other, TypeId):
            return NotImplemented
        return self.id == other.id and self.name == other.name

    def __hash__(self):
        return hash((self.id, self.name))

    def __call__(self, value):
        """Validate ``value`` against this type and return it unchanged."""
        if not self.check(value):
            raise RegistryError(f"{value!r} is not a valid {self.name}")
        return value

    def __repr__(self):
        return self.name.upper() if self.id <= _LAST_BUILTIN else f"TypeId({self.id}, {self.name!r})"


def _int_type(fmt: str, bits: int, signed: bool):
    st = struct.Struct(">" + fmt)
    lo, hi = (-(1 << (bits - 1)), (1 << (bits - 1)) - 1) if signed else (0, (1 << bits) - 1)

    def check(v):
        return type(v) is int and lo <= v <= hi

    def decode(b):
        try:
            return st.unpack(b)[0]
        except struct.error as exc:
            raise CodecError(str(exc)) from None

    return check, st.pack, decode


def _float_type(fmt: str):
    st = struct.Struct(">" + fmt)

    def check(v):
        return type(v) is float

    def decode(b):
        try:
            return st.unpack(b)[0]
        except struct.error as exc:
            raise CodecError(str(exc)) from None

    return check, st.pack, decode


def _decode_text(b):
    try:
        return bytes(b).decode("utf-8")
    except UnicodeDecodeError as exc:
        raise CodecError(str(exc)) from None


_U64 = struct.Struct(">Q")
_ADDR = struct.Struct(f">{NODE_ID_SIZE}sI")


def _decode_atom(b):
    if len(b) != 8:
        raise CodecError("atom payload must be 8 bytes")
    return AtomValue(_U64.unpack(b)[0])


def _decode_addr(b):
    if len(b) != _ADDR.size:
        raise CodecError("actor address payload must be 20 bytes")
    node, aid = _ADDR.unpack(b)
    return ActorAddr(node, aid)


def _identity(v):
    return v


class TypeRegistry:
    """Bijective name <-> id table with per-type codecs."""

    def __init__(self, builtins: bool = True):
        self._by_id: dict[int, TypeId] = {}
        self._by_name: dict[str, TypeId] = {}
        self._by_py: dict[type, TypeId] = {}
        self._lock = threading.Lock()
        if builtins:
            for spec in _BUILTIN_SPECS:
                self._add(TypeId(*spec))
            self._by_py[bool] = self._by_id[1]
            self._by_py[float] = self._by_id[11]
            self._by_py[str] = self._by_id[12]
            self._by_py[bytes] = self._by_id[13]
            self._by_py[bytearray] = self._by_id[13]
            self._by_py[AtomValue] = self._by_id[14]
            self._by_py[ActorAddr] = self._by_id[15]

    def _add(self, tid: TypeId) -> TypeId:
        if tid.id in self._by_id or tid.name in self._by_name:
            raise RegistryError(f"type id {tid.id} or name {tid.name!r} already registered")
        self._by_id[tid.id] = tid
        self._by_name[tid.name] = tid
        return tid

    def register(
        self,
        name: str,
        py_type: type,
        encode: Callable[[Any], bytes] | None = None,
        decode: Callable[[bytes], Any] | None = None,
        copy_fn: Callable[[Any], Any] = copy.deepcopy,
        type_id: int | None = None,
    ) -> TypeId:
        """Register a user type. Types without codecs cannot cross the wire."""
        with self._lock:
            existing = self._by_name.get(name)
            if existing is not None and existing.py_type is py_type and type_id in (None, existing.id):
                return existing
            if type_id is None:
                type_id = max(self._by_id, default=0) + 1
            if not 0 < type_id < 0x8000:
                raise RegistryError("type ids must lie in 1..0x7FFF")

            def check(v, _t=py_type):
                return isinstance(v, _t)

            tid = self._add(TypeId(type_id, name, py_type, check, encode, decode, copy_fn))
            self._by_py.setdefault(py_type, tid)
            return tid

    def by_id(self, type_id: int) -> TypeId:
        try:
            return self._by_id[type_id]
        except KeyError:
            raise CodecError(f"unknown type id {type_id:#06x}") from None

    def by_name(self, name: str) -> TypeId:
        return self._by_name[name]

    def type_of(self, value) -> TypeId:
        """Infer the TypeId for a plain Python value.

        ``int`` maps to the narrowest of i32, i64, u64 that holds the value;
        other widths need explicit ``types=`` at message construction.
        """
        tp = type(value)
        if tp is int and -2147483648 <= value <= 2147483647:
            return I32
        tid = self._by_py.get(tp)
        if tid is not None:
            return tid
        if tp is int:
            if -(1 << 63) <= value < (1 << 63):
                return I64
            if 0 <= value < (1 << 64):
                return U64
            raise RegistryError(f"integer {value} does not fit any builtin integer type")
        for py, tid in self._by_py.items():
            if isinstance(value, py):
                return tid
        raise RegistryError(f"type {tp.__name__} is not registered")

    def py_type_id(self, tp: type) -> TypeId | None:
        if tp is int:
            return I32
        return self._by_py.get(tp)

    def __contains__(self, tid: TypeId) -> bool:
        return self._by_id.get(tid.id) == tid

    def __iter__(self):
        return iter(sorted(self._by_id.values(), key=lambda t: t.id))


_BUILTIN_SPECS = [
    (1, "bool", bool, lambda v: type(v) is bool, struct.Struct(">?").pack,
     lambda b: _decode_bool(b), _identity),
    (2, "i8", int, *_int_type("b", 8, True), _identity),
    (3, "i16", int, *_int_type("h", 16, True), _identity),
    (4, "i32", int, *_int_type("i", 32, True), _identity),
    (5, "i64", int, *_int_type("q", 64, True), _identity),
    (6, "u8", int, *_int_type("B", 8, False), _identity),
    (7, "u16", int, *_int_type("H", 16, False), _identity),
    (8, "u32", int, *_int_type("I", 32, False), _identity),
    (9, "u64", int, *_int_type("Q", 64, False), _identity),
    (10, "f32", float, *_float_type("f"), _identity),
    (11, "f64", float, *_float_type("d"), _identity),
    (12, "text", str, lambda v: type(v) is str, lambda v: v.encode("utf-8"), _decode_text, _identity),
    (13, "bytes", bytes, lambda v: isinstance(v, (bytes, bytearray)), bytes, bytes,
     lambda v: bytearray(v) if isinstance(v, bytearray) else v),
    (14, "atom", AtomValue, lambda v: type(v) is AtomValue, _U64.pack, _decode_atom, _identity),
    (15, "actor_addr", ActorAddr, lambda v: type(v) is ActorAddr,
     lambda a: _ADDR.pack(a.node, a.id), _decode_addr, _identity),
]
_LAST_BUILTIN = len(_BUILTIN_SPECS)


def _decode_bool(b):
    if len(b) != 1 or b[0] > 1:
        raise CodecError("bool payload must be one byte 0 or 1")
    return bool(b[0])


default_registry = TypeRegistry()
(BOOL, I8, I16, I32, I64, U8, U16, U32, U64,
 F32, F64, TEXT, BYTES, ATOM, ADDR) = (default_registry.by_id(i) for i in range(1, _LAST_BUILTIN + 1))


class CopyStats:
    """Process-wide counters for handle sharing and copy-on-write detaches."""

    __slots__ = ("deep_copies", "shares")

    def __init__(self):
        self.deep_copies = 0
        self.shares = 0

    def snapshot(self) -> tuple[int, int]:
        return self.deep_copies, self.shares


copy_stats = CopyStats()

# Reentrant: a finalizer may run while the same thread is inside the critical section.
_REF_LOCK = threading.RLock()


class _Payload:
    __slots__ = ("types", "values", "refs")

    def __init__(self, types: tuple, values: list):
        self.types = types
        self.values = values
        self.refs = 1


class Message:
    """Handle onto a shared, copy-on-write tuple of typed values."""

    __slots__ = ("_p",)

    def __init__(self, payload: _Payload):
        self._p = payload

    def __del__(self):
        with _REF_LOCK:
            self._p.refs -= 1

    # -- shape -----------------------------------------------------------
    @property
    def types(self) -> tuple:
        return self._p.types

    signature = types

    @property
    def refcount(self) -> int:
        return self._p.refs

    def __len__(self):
        return len(self._p.types)

    # -- sharing ---------------------------------------------------------
    def clone(self) -> "Message":
        p = self._p
        with _REF_LOCK:
            p.refs += 1
            copy_stats.shares += 1
        return Message(p)

    def _detach(self) -> None:
        p = self._p
        with _REF_LOCK:
            if p.refs > 1:
                values = [t.copy(v) for t, v in zip(p.types, p.values)]
                p.refs -= 1
                self._p = _Payload(p.types, values)
                copy_stats.deep_copies += 1

    # -- access ----------------------------------------------------------
    def get(self, index: int):
        """Read-only access; never copies."""
        try:
            return self._p.values[index]
        except IndexError:
            raise AccessError(f"index {index} out of range for arity {len(self)}") from None

    __getitem__ = get

    def get_mutable(self, index: int):
        """Exclusive access: detaches a private copy first if the payload is shared.

        Byte-sequence elements are converted to ``bytearray`` so they can be
        modified in place.
        """
        if not 0 <= index < len(self._p.values):
            raise AccessError(f"index {index} out of range for arity {len(self)}")
        self._detach()
        values = self._p.values
        v = values[index]
        if type(v) is bytes:
            v = values[index] = bytearray(v)
        return v

    def set(self, index: int, value) -> None:
        if not 0 <= index < len(self._p.values):
            raise AccessError(f"index {index} out of range for arity {len(self)}")
        tid = self._p.types[index]
        if not tid.check(value):
            raise RegistryError(f"{value!r} is not a valid {tid.name}")
        self._detach()
        self._p.values[index] = value

    def values(self) -> tuple:
        return tuple(self._p.values)

    def __iter__(self):
        return iter(self._p.values)

    def __eq__(self, other):
        if not isinstance(other, Message):
            return NotImplemented
        return self._p.types == other._p.types and self._p.values == other._p.values

    __hash__ = None

    def __repr__(self):
        return f"Message({', '.join(repr(v) for v in self._p.values)})"


def make_message(*values, types: Sequence[TypeId] | None = None,
                 registry: TypeRegistry = default_registry) -> Message:
    """Build a fresh message (refcount 1).

    Without ``types`` every element's type is inferred from its Python type.
    With ``types`` each value is checked against the declared type.
    """
    if types is None:
        return Message(_Payload(tuple(map(registry.type_of, values)), list(values)))
    types = tuple(types)
    if len(types) != len(values):
        raise RegistryError(f"{len(values)} values but {len(types)} types")
    for t, v in zip(types, values):
        if not t.check(v):
            raise RegistryError(f"{v!r} is not a valid {t.name}")
    return Message(_Payload(types, list(values)))


def message_from(types: tuple, values: Iterable) -> Message:
    """Unchecked constructor for callers that already validated the values."""
    return Message(_Payload(types, list(values)))


_ARITY = struct.Struct(">H")
_ELEM = struct.Struct(">HI")


def serialize(msg: Message, registry: TypeRegistry = default_registry) -> bytes:
    p = msg._p
    out = [_ARITY.pack(len(p.types))]
    for tid, value in zip(p.types, p.values):
        if tid not in registry or tid.encode is None:
            raise CodecError(f"type {tid.name!r} has no codec in this registry")
        body = tid.encode(value)
        out.append(_ELEM.pack(tid.id, len(body)))
        out.append(body)
    return b"".join(out)


def deserialize(data, registry: TypeRegistry = default_registry) -> Message:
    view = memoryview(data)
    if len(view) < 2:
        raise CodecError("truncated message: missing arity")
    (arity,) = _ARITY.unpack_from(view, 0)
    pos = 2
    types, values = [], []
    for _ in range(arity):
        if pos + _ELEM.size > len(view):
            raise CodecError("truncated message: element header")
        type_id, length = _ELEM.unpack_from(view, pos)
        pos += _ELEM.size
        tid = registry.by_id(type_id)
        if tid.decode is None:
            raise CodecError(f"type {tid.name!r} has no decoder")
        if pos + length > len(view):
            raise CodecError("truncated message: element payload")
        values.append(tid.decode(view[pos:pos + length].tobytes()))
        types.append(tid)
        pos += length
    if pos != len(view):
        raise CodecError(f"{len(view) - pos} trailing bytes after message")
    return Message(_Payload(tuple(types), values))
