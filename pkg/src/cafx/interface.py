"""Messaging interfaces, subset checks, and actor handles.

An interface is a set of rules mapping a unique input signature to an output
signature. Handles are assignable along the subset order: a handle typed
with interface Y can be narrowed to X whenever X is a subset of Y.

Signature elements are either a :class:`~cafx.message.TypeId` or an
:class:`AtomConst`, which matches one specific atom value.
"""
from __future__ import annotations

import struct
from dataclasses import dataclass
from typing import Iterable

from .addr import ActorAddr
from .atom import AtomValue
from .errors import CodecError, InterfaceMismatch
from .message import ATOM, Message, TypeId, TypeRegistry, default_registry


@dataclass(frozen=True, order=False)
class AtomConst:
    """Signature element matching exactly one atom value."""
    value: AtomValue

    def __repr__(self):
        return f"{self.value.text}_atom"


def sig_elem(x, registry: TypeRegistry = default_registry):
    """Normalize a signature descriptor: TypeId, AtomConst, atom value, or Python type."""
    if isinstance(x, (TypeId, AtomConst)):
        return x
    if isinstance(x, AtomValue):
        return AtomConst(x)
    if isinstance(x, type):
        tid = registry.py_type_id(x)
        if tid is not None:
            return tid
    raise TypeError(f"{x!r} is not a signature element")


def reduce_elem(e) -> TypeId:
    return ATOM if isinstance(e, AtomConst) else e


def _elem_key(e):
    return (ATOM.id, 1, int(e.value)) if isinstance(e, AtomConst) else (e.id, 0, 0)


@dataclass(frozen=True)
class Rule:
    inputs: tuple
    outputs: tuple = ()
    alt_outputs: tuple | None = None

    def __post_init__(self):
        if not self.inputs:
            raise ValueError("a rule needs at least one input element")
        object.__setattr__(self, "inputs", tuple(sig_elem(e) for e in self.inputs))
        object.__setattr__(self, "outputs", tuple(sig_elem(e) for e in self.outputs))
        if self.alt_outputs is not None:
            object.__setattr__(self, "alt_outputs", tuple(sig_elem(e) for e in self.alt_outputs))

    def matches(self, msg: Message) -> bool:
        return signature_matches(self.inputs, msg)

    def __repr__(self):
        alt = f" | {list(self.alt_outputs)}" if self.alt_outputs is not None else ""
        return f"{list(self.inputs)} -> {list(self.outputs)}{alt}"


def signature_matches(sig: tuple, msg: Message) -> bool:
    types = msg.types
    if len(types) != len(sig):
        return False
    for e, t, v in zip(sig, types, msg):
        if isinstance(e, AtomConst):
            if t is not ATOM or v != e.value:
                return False
        elif e != t:
            return False
    return True


class _RuleBuilder:
    def __init__(self, inputs):
        self.inputs = inputs

    def with_(self, *outputs) -> Rule:
        return Rule(self.inputs, outputs)

    def with_either(self, *outputs) -> "_EitherBuilder":
        return _EitherBuilder(self.inputs, outputs)


class _EitherBuilder:
    def __init__(self, inputs, outputs):
        self.inputs, self.outputs = inputs, outputs

    def or_else(self, *alt) -> Rule:
        return Rule(self.inputs, self.outputs, alt)


def replies_to(*inputs) -> _RuleBuilder:
    return _RuleBuilder(inputs)


def reacts_to(*inputs) -> Rule:
    return Rule(inputs, ())


class MessagingInterface:
    """Immutable set of rules with unique input signatures."""

    __slots__ = ("rules", "_by_arity")

    def __init__(self, rules: Iterable[Rule] = ()):
        by_input: dict[tuple, Rule] = {}
        for r in rules:
            prev = by_input.get(r.inputs)
            if prev is not None and prev != r:
                raise ValueError(f"conflicting rules for input {list(r.inputs)}: {prev} vs {r}")
            by_input[r.inputs] = r
        self.rules = frozenset(by_input.values())
        by_arity: dict[int, list] = {}
        for r in self.rules:
            by_arity.setdefault(len(r.inputs), []).append(r)
        self._by_arity = by_arity

    def accepts(self, msg: Message) -> Rule | None:
        """Return the rule whose inputs match ``msg``, or None."""
        for r in self._by_arity.get(len(msg.types), ()):
            if signature_matches(r.inputs, msg):
                return r
        return None

    def rule_for(self, inputs) -> Rule | None:
        inputs = tuple(sig_elem(e) for e in inputs)
        for r in self.rules:
            if r.inputs == inputs:
                return r
        return None

    def __eq__(self, other):
        if not isinstance(other, MessagingInterface):
            return NotImplemented
        return self.rules == other.rules

    def __hash__(self):
        return hash(self.rules)

    def __le__(self, other):
        return is_subset(self, other)

    def __len__(self):
        return len(self.rules)

    def __iter__(self):
        return iter(self.rules)

    def __repr__(self):
        return f"MessagingInterface({sorted(self.rules, key=_rule_key)})"


def typed_actor(*rules: Rule) -> MessagingInterface:
    return MessagingInterface(rules)


def is_subset(x: MessagingInterface, y: MessagingInterface) -> bool:
    """True iff every rule of x appears in y with identical inputs and outputs."""
    return x.rules <= y.rules


# -- canonical wire encoding ----------------------------------------------
# u16 rule count (0xFFFF = dynamic), then per rule:
#   u16 n_in, elems, u16 n_out, elems, u8 alt flag, [u16 n_alt, elems]
# elem: u16 type id; atom constants use (0x8000 | atom type id) followed by u64.
DYNAMIC_MARKER = 0xFFFF
ATOM_CONST_FLAG = 0x8000
_U16 = struct.Struct(">H")
_U64 = struct.Struct(">Q")


def _rule_key(r: Rule):
    return tuple(_elem_key(e) for e in r.inputs)


def _encode_elems(elems, out):
    out.append(_U16.pack(len(elems)))
    for e in elems:
        if isinstance(e, AtomConst):
            out.append(_U16.pack(ATOM_CONST_FLAG | ATOM.id))
            out.append(_U64.pack(e.value))
        else:
            out.append(_U16.pack(e.id))


def encode_interface(iface: MessagingInterface | None) -> bytes:
    if iface is None:
        return _U16.pack(DYNAMIC_MARKER)
    out = [_U16.pack(len(iface.rules))]
    for r in sorted(iface.rules, key=_rule_key):
        _encode_elems(r.inputs, out)
        _encode_elems(r.outputs, out)
        if r.alt_outputs is None:
            out.append(b"\x00")
        else:
            out.append(b"\x01")
            _encode_elems(r.alt_outputs, out)
    return b"".join(out)


class _Reader:
    def __init__(self, data):
        self.data = bytes(data)
        self.pos = 0

    def take(self, n) -> bytes:
        if self.pos + n > len(self.data):
            raise CodecError("truncated interface encoding")
        b = self.data[self.pos:self.pos + n]
        self.pos += n
        return b

    def u16(self) -> int:
        return _U16.unpack(self.take(2))[0]


def _decode_elems(rd: _Reader, registry):
    elems = []
    for _ in range(rd.u16()):
        tid = rd.u16()
        if tid & ATOM_CONST_FLAG:
            if tid & ~ATOM_CONST_FLAG != ATOM.id:
                raise CodecError(f"bad atom-constant element {tid:#06x}")
            elems.append(AtomConst(AtomValue(_U64.unpack(rd.take(8))[0])))
        else:
            elems.append(registry.by_id(tid))
    return tuple(elems)


def decode_interface(data, registry: TypeRegistry = default_registry,
                     with_size: bool = False):
    rd = _Reader(data)
    count = rd.u16()
    if count == DYNAMIC_MARKER:
        result = None
    else:
        rules = []
        for _ in range(count):
            ins = _decode_elems(rd, registry)
            outs = _decode_elems(rd, registry)
            flag = rd.take(1)[0]
            if flag > 1:
                raise CodecError("bad alternative-output flag")
            alt = _decode_elems(rd, registry) if flag else None
            try:
                rules.append(Rule(ins, outs, alt))
            except ValueError as exc:
                raise CodecError(str(exc)) from None
        try:
            result = MessagingInterface(rules)
        except ValueError as exc:
            raise CodecError(str(exc)) from None
    if with_size:
        return result, rd.pos
    if rd.pos != len(rd.data):
        raise CodecError("trailing bytes after interface encoding")
    return result


# -- handles ----------------------------------------------------------------
class ActorHandle:
    """Dynamically typed handle (wildcard interface)."""

    __slots__ = ("addr",)
    iface = None

    def __init__(self, addr: ActorAddr):
        self.addr = addr

    def __eq__(self, other):
        return type(other) is ActorHandle and other.addr == self.addr

    def __hash__(self):
        return hash(self.addr)

    def __repr__(self):
        return f"actor({self.addr!r})"


class TypedHandle:
    """Handle carrying a messaging interface. Not interchangeable with ActorHandle."""

    __slots__ = ("addr", "iface")

    def __init__(self, addr: ActorAddr, iface: MessagingInterface):
        self.addr = addr
        self.iface = iface

    def __eq__(self, other):
        return type(other) is TypedHandle and other.addr == self.addr and other.iface == self.iface

    def __hash__(self):
        return hash(self.addr)

    def __repr__(self):
        return f"typed_actor({self.addr!r}, {len(self.iface)} rules)"


def narrow(handle: TypedHandle, target: MessagingInterface) -> TypedHandle:
    if not isinstance(handle, TypedHandle):
        raise InterfaceMismatch("only typed handles can be narrowed; dynamic handles are not assignable")
    if handle.iface is target or handle.iface == target:
        return handle
    if not is_subset(target, handle.iface):
        missing = target.rules - handle.iface.rules
        raise InterfaceMismatch(f"interface is not a subset of the handle's interface; missing {sorted(missing, key=_rule_key)}")
    return TypedHandle(handle.addr, target)


def to_dynamic(handle) -> ActorHandle:
    """Explicitly erase a handle's interface."""
    return handle if type(handle) is ActorHandle else ActorHandle(handle.addr)


def handle_addr(handle) -> ActorAddr:
    return handle.addr


__all__ = [
    "AtomConst", "Rule", "MessagingInterface", "replies_to", "reacts_to", "typed_actor",
    "is_subset", "narrow", "to_dynamic", "handle_addr", "ActorHandle", "TypedHandle",
    "encode_interface", "decode_interface", "sig_elem", "reduce_elem", "signature_matches",
]
