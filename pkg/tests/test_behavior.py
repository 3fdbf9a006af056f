import pytest

from cafx import (BYTES, F32, I32, I64, TEXT, Behavior, Mutable, atom, copy_stats, guard,
                  make_message, on, others, project, replies_to, typed_actor)
from cafx.behavior import NO_MATCH, case, derive_interface

from _helpers import MINUS, PLUS, RESULT, math_actor, routing_behavior


def route(values):
    log = []
    b = routing_behavior(log)
    for v in values:
        assert b.dispatch(make_message(v)) is None
    return log


def test_five_case_routing():
    assert route([42, 7, 8, "3.5", "abc"]) == [
        ("42", 42), ("odd", 7), ("int", 8), ("float", 3.5), ("str", "abc")]


def test_first_match_wins_in_declaration_order():
    hits = []
    b = Behavior(on(I32) >> (lambda i: hits.append("first")), on(42) >> (lambda i: hits.append("never")))
    b.dispatch(make_message(42))
    assert hits == ["first"]


def test_no_numeric_widening():
    b = Behavior(on(I64) >> (lambda i: "wide"))
    assert b.dispatch(make_message(1)) is NO_MATCH
    assert b.dispatch(make_message(1, types=[I64])).get(0) == "wide"


def test_guard_and_projection_constructors():
    even = guard(lambda i: i if i % 2 == 0 else None, I32)
    length = project(lambda s: len(s) or None, TEXT, I32)
    seen = []
    b = Behavior(on(even) >> (lambda i: seen.append(("even", i))),
                 on(length) >> (lambda n: seen.append(("len", n))))
    for v in (4, 5, "abc", ""):
        b.dispatch(make_message(v))
    assert seen == [("even", 4), ("len", 3)]


def test_guards_short_circuit_left_to_right():
    calls = []

    def g1(i: I32) -> I32:
        calls.append("g1")
        return None

    def g2(i: I32) -> I32:
        calls.append("g2")
        return i
    Behavior(on(g1, g2) >> (lambda a, b: None)).dispatch(make_message(1, 2))
    assert calls == ["g1"]


def test_catch_all_and_dynamic_interface():
    hit = []
    b = Behavior(on(I32) >> (lambda i: None), others >> (lambda: hit.append(True)))
    assert b.dispatch(make_message("x")) is None and hit == [True]
    assert b.has_catch_all
    assert derive_interface(b) is None


def test_response_from_return_value():
    b = Behavior(case(math_actor(None).cases[0].callback))
    resp = b.dispatch(make_message(PLUS, 2, 3))
    assert resp.values() == (RESULT, 5)


def test_declared_outputs_are_enforced():
    def bad(_: PLUS, a: I32, b: I32) -> (RESULT, I32):
        return MINUS, a
    with pytest.raises(Exception):
        Behavior(bad).dispatch(make_message(PLUS, 1, 2))


def test_derived_interface_matches_declaration():
    expected = typed_actor(replies_to(PLUS, I32, I32).with_(RESULT, I32),
                           replies_to(MINUS, I32, I32).with_(RESULT, I32))
    assert derive_interface(math_actor(None)) == expected


def test_read_only_handler_never_copies():
    msg = make_message(b"payload")
    other = msg.clone()
    before = copy_stats.deep_copies
    Behavior(on(BYTES) >> (lambda b: None)).dispatch(msg)
    assert copy_stats.deep_copies == before
    del other


def test_mutable_handler_detaches_shared_message():
    msg = make_message(b"payload")
    other = msg.clone()
    before = copy_stats.deep_copies

    def scribble(buf: Mutable[BYTES]):
        buf[0] = ord("P")
    Behavior(scribble).dispatch(msg)
    assert copy_stats.deep_copies == before + 1
    assert other.get(0) == b"payload"
    assert msg.get(0) == bytearray(b"Payload")


def test_large_behaviors_use_the_type_index():
    cases = [on(atom(f"op{i}"), I32) >> (lambda _, x, i=i: i * 100 + x) for i in range(8)]
    b = Behavior(*cases, on(F32) >> (lambda f: -1))
    assert b.dispatch(make_message(atom("op5"), 7)).get(0) == 507
    assert b.dispatch(make_message(1.0, types=[F32])).get(0) == -1
    assert b.dispatch(make_message("nope")) is NO_MATCH


def test_unannotated_callback_is_rejected():
    with pytest.raises(TypeError):
        Behavior(lambda x: x)
