import struct

import pytest
from hypothesis import given, strategies as st

from cafx import (ADDR, ATOM, BOOL, BYTES, F32, F64, I8, I16, I32, I64, TEXT, U8, U16, U32,
                  U64, AccessError, ActorAddr, CodecError, RegistryError, atom, copy_stats,
                  default_registry, deserialize, make_message, serialize)
from cafx.sysmsg import (NORMAL, DownMsg, ErrorKind, ErrorMsg, ExitMsg, link_propagated,
                         user_reason)

NODE = bytes(range(16))


def test_builtin_ids_are_stable():
    ids = [t.id for t in (BOOL, I8, I16, I32, I64, U8, U16, U32, U64, F32, F64, TEXT, BYTES,
                          ATOM, ADDR)]
    assert ids == list(range(1, 16))
    assert default_registry.by_name("i32") is I32


def test_type_inference():
    m = make_message(True, 5, 2**40, 1.5, "s", b"b", atom("x"), ActorAddr(NODE, 3))
    assert m.types == (BOOL, I32, I64, F64, TEXT, BYTES, ATOM, ADDR)


def test_declared_types_are_checked():
    make_message(300, types=[U16])
    with pytest.raises(RegistryError):
        make_message(300, types=[U8])
    with pytest.raises(RegistryError):
        make_message(1, 2, types=[I32])


def test_serialize_layout_is_bit_exact():
    data = serialize(make_message(7, "hi", types=[U16, TEXT]))
    assert data == struct.pack(">H", 2) + struct.pack(">HI", U16.id, 2) + b"\x00\x07" + \
        struct.pack(">HI", TEXT.id, 2) + b"hi"


def test_system_messages_round_trip():
    addr = ActorAddr(NODE, 9)
    msg = make_message(DownMsg(addr, user_reason(16)), ExitMsg(addr, link_propagated(NORMAL)),
                       ErrorMsg(ErrorKind.TIMEOUT, None, "0.1s"))
    back = deserialize(serialize(msg))
    assert back == msg


@pytest.mark.parametrize("data", [b"", b"\x00", b"\x00\x01\x00\x04\x00\x00\x00\x09abc",
                                  b"\x00\x01\x7f\x00\x00\x00\x00\x00", b"\x00\x00junk"])
def test_malformed_input_raises_codec_error(data):
    with pytest.raises((CodecError, RegistryError)):
        deserialize(data)


values = st.one_of(
    st.booleans(), st.integers(-2**31, 2**31 - 1), st.integers(2**31, 2**63 - 1),
    st.floats(allow_nan=False), st.text(max_size=20), st.binary(max_size=20),
)


@given(st.lists(values, max_size=6))
def test_codec_round_trip(vals):
    msg = make_message(*vals)
    assert deserialize(serialize(msg)) == msg


def test_clone_shares_and_mutation_detaches_once():
    before = copy_stats.snapshot()
    a = make_message(bytearray(b"abc"))
    b = a.clone()
    assert a.refcount == b.refcount == 2
    b.get_mutable(0)[0] = ord("x")
    assert a.get(0) == bytearray(b"abc")
    assert b.get(0) == bytearray(b"xbc")
    assert a.refcount == b.refcount == 1
    b.get_mutable(0)  # sole owner now: no further copy
    assert copy_stats.deep_copies - before[0] == 1


def test_released_handles_drop_the_count():
    a = make_message(1)
    b = a.clone()
    del b
    assert a.refcount == 1


def test_index_errors():
    m = make_message(1)
    with pytest.raises(AccessError):
        m.get(1)
    with pytest.raises(AccessError):
        m.get_mutable(-1)


def test_set_checks_type():
    m = make_message(1)
    m.set(0, 5)
    assert m.get(0) == 5
    with pytest.raises(RegistryError):
        m.set(0, "x")
