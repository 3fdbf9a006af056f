import random

import pytest
from hypothesis import given, settings, strategies as st

from cafx import (F32, I32, TEXT, ActorHandle, ActorAddr, InterfaceMismatch, MessagingInterface,
                  TypedHandle, is_subset, make_message, narrow, reacts_to, replies_to,
                  to_dynamic, typed_actor)
from cafx.errors import CodecError
from cafx.interface import decode_interface, encode_interface

from _helpers import MINUS, PLUS, RESULT, random_interface, random_rule, subset_oracle

NODE = bytes(16)
ADDER = typed_actor(replies_to(PLUS, I32, I32).with_(I32))
CALCULATOR = typed_actor(replies_to(PLUS, I32, I32).with_(I32),
                         replies_to(MINUS, I32, I32).with_(I32))


def test_adder_is_subset_of_calculator():
    assert is_subset(ADDER, CALCULATOR)
    assert not is_subset(CALCULATOR, ADDER)
    assert ADDER <= CALCULATOR


def test_outputs_must_match_exactly():
    other = typed_actor(replies_to(PLUS, I32, I32).with_(F32))
    assert not is_subset(other, CALCULATOR)


def test_conflicting_inputs_rejected():
    with pytest.raises(ValueError):
        typed_actor(replies_to(I32).with_(I32), replies_to(I32).with_(TEXT))


def test_either_and_reacts_rules():
    r = replies_to(TEXT).with_either(RESULT, TEXT).or_else(MINUS)
    assert r.alt_outputs is not None
    assert reacts_to(I32).outputs == ()


def test_accepts_uses_atom_values():
    assert CALCULATOR.accepts(make_message(MINUS, 1, 2)) is not None
    assert CALCULATOR.accepts(make_message(RESULT, 1, 2)) is None


def test_narrow_and_dynamic_handles():
    h = TypedHandle(ActorAddr(NODE, 1), CALCULATOR)
    a = narrow(h, ADDER)
    assert a.iface == ADDER and a.addr == h.addr
    with pytest.raises(InterfaceMismatch):
        narrow(a, CALCULATOR)
    with pytest.raises(InterfaceMismatch):
        narrow(ActorHandle(h.addr), ADDER)
    assert to_dynamic(h) == ActorHandle(h.addr)
    assert to_dynamic(h) != h


def test_encoding_is_canonical():
    a = typed_actor(replies_to(MINUS, I32, I32).with_(I32), replies_to(PLUS, I32, I32).with_(I32))
    assert encode_interface(a) == encode_interface(CALCULATOR)
    assert decode_interface(encode_interface(CALCULATOR)) == CALCULATOR
    assert decode_interface(encode_interface(None)) is None
    with pytest.raises(CodecError):
        decode_interface(encode_interface(CALCULATOR)[:-1])


@settings(max_examples=300)
@given(st.integers(0, 2**32))
def test_subset_partial_order(seed):
    rng = random.Random(seed)
    pool = [random_rule(rng) for _ in range(6)]
    x, y, z = (random_interface(rng, pool) for _ in range(3))
    assert is_subset(x, x)
    assert is_subset(MessagingInterface(), x)
    if is_subset(x, y) and is_subset(y, z):
        assert is_subset(x, z)
    if is_subset(x, y) and is_subset(y, x):
        assert x == y
    assert is_subset(x, y) == subset_oracle(x, y)
    assert decode_interface(encode_interface(x)) == x
