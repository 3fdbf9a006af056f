"""Pattern-matching message dispatch.

A :class:`Behavior` is an ordered list of match cases; the first case whose
pattern accepts a message runs, and its return value becomes the response.

Three kinds of case exist::

    on(42) >> (lambda i: ...)                 # advanced: value guard
    on(odd_val) >> (lambda i: ...)            # advanced: predicate guard
    on(str_float) >> (lambda f: ...)          # advanced: projection
    def handler(i: I32): ...                  # trivial: pattern from annotations
    others >> (lambda: ...)                   # catch-all

Guards and projections are functions ``value -> value | None``; ``None``
means "no match". A guard returns its input, a projection may return a
different representation. Matching checks element types exactly (no
numeric widening) and evaluates guards left to right, stopping at the first
``None``.
"""
from __future__ import annotations

import inspect
import typing
from dataclasses import dataclass
from typing import Any, Callable

from .atom import AtomValue
from .interface import AtomConst, MessagingInterface, Rule, reduce_elem, sig_elem
from .message import ATOM, Message, TypeId, default_registry, make_message


class Mutable:
    """Marks a handler argument as needing write access (``Mutable[BYTES]``).

    Only such arguments trigger the copy-on-write detach of a shared message.
    """

    __slots__ = ("inner",)

    def __init__(self, inner):
        self.inner = inner

    def __class_getitem__(cls, inner):
        return cls(inner)

    def __repr__(self):
        return f"Mutable[{self.inner!r}]"


_TYPE, _VALUE, _GUARD, _PROJECTION = "type", "value", "guard", "projection"


class Matcher:
    __slots__ = ("kind", "in_type", "value", "fn", "out_type", "mutable")

    def __init__(self, kind, in_type: TypeId, value=None, fn=None, out_type=None, mutable=False):
        self.kind = kind
        self.in_type = in_type
        self.value = value
        self.fn = fn
        self.out_type = out_type if out_type is not None else in_type
        self.mutable = mutable

    def __call__(self, v):
        """Apply the matcher: the (possibly projected) value, or None."""
        if self.kind is _TYPE:
            return v
        return self.fn(v)

    @property
    def sig(self):
        if self.kind is _VALUE and self.in_type is ATOM:
            return AtomConst(self.value)
        return self.in_type

    def __repr__(self):
        if self.kind is _VALUE:
            return f"on({self.value!r})"
        if self.kind is _TYPE:
            return f"{self.in_type!r}"
        return f"{self.kind}({getattr(self.fn, '__name__', self.fn)}: {self.in_type!r}->{self.out_type!r})"


def type_only(t) -> Matcher:
    return Matcher(_TYPE, reduce_elem(sig_elem(t)))


def value_guard(t, expected) -> Matcher:
    def check(v):
        return v if v == expected else None
    return Matcher(_VALUE, reduce_elem(sig_elem(t)), value=expected, fn=check)


def to_guard(value) -> Matcher:
    """Lift a value into a guard that accepts only equal values."""
    return value_guard(default_registry.type_of(value), value)


def guard(fn: Callable[[Any], Any], t) -> Matcher:
    """Predicate guard: ``fn`` returns its argument to accept, None to reject."""
    return Matcher(_GUARD, reduce_elem(sig_elem(t)), fn=fn)


def project(fn: Callable[[Any], Any], in_t, out_t) -> Matcher:
    """Projection: ``fn`` converts an ``in_t`` value to ``out_t`` or returns None."""
    return Matcher(_PROJECTION, reduce_elem(sig_elem(in_t)), fn=fn, out_type=reduce_elem(sig_elem(out_t)))


def _annotations(fn) -> dict:
    try:
        return inspect.get_annotations(fn, eval_str=True)
    except (TypeError, NameError):
        return getattr(fn, "__annotations__", {}) or {}


def _strip_optional(ann):
    if typing.get_origin(ann) in (typing.Union, getattr(__import__("types"), "UnionType", None)):
        args = [a for a in typing.get_args(ann) if a is not type(None)]
        if len(args) == 1:
            return args[0]
    return ann


def _matcher_from_function(fn) -> Matcher:
    ann = _annotations(fn)
    params = [p for p in inspect.signature(fn).parameters.values()]
    if len(params) != 1 or params[0].name not in ann or "return" not in ann:
        raise TypeError(
            f"cannot derive a guard from {fn!r}: annotate one parameter and the return "
            "type, or use guard(fn, T) / project(fn, T, U)")
    in_t = reduce_elem(sig_elem(ann[params[0].name]))
    out_t = reduce_elem(sig_elem(_strip_optional(ann["return"])))
    if in_t == out_t:
        return Matcher(_GUARD, in_t, fn=fn)
    return Matcher(_PROJECTION, in_t, fn=fn, out_type=out_t)


def as_matcher(x) -> Matcher:
    if isinstance(x, Matcher):
        return x
    if isinstance(x, Mutable):
        m = as_matcher(x.inner)
        if m.kind is not _TYPE:
            raise TypeError("only plain type matchers can be mutable")
        return Matcher(_TYPE, m.in_type, mutable=True)
    if isinstance(x, AtomConst):
        return value_guard(ATOM, x.value)
    if isinstance(x, TypeId) or isinstance(x, type):
        return type_only(x)
    if isinstance(x, AtomValue):
        return value_guard(ATOM, x)
    if callable(x):
        return _matcher_from_function(x)
    return to_guard(x)


def _outputs(returns):
    if returns is None:
        return None
    if isinstance(returns, (tuple, list)):
        return tuple(sig_elem(e) for e in returns)
    return (sig_elem(returns),)


_TRIVIAL, _ADVANCED, _CATCH_ALL = "trivial", "advanced", "catch_all"


class MatchCase:
    __slots__ = ("kind", "matchers", "callback", "outputs", "types", "checks",
                 "mutable_idx", "out_types", "atom_checks")

    def __init__(self, kind, matchers, callback, outputs=None):
        self._setup(kind, matchers, callback, outputs)

    def _setup(self, kind, matchers, callback, outputs):
        self.kind = kind
        self.matchers = tuple(matchers)
        self.callback = callback
        self.outputs = outputs
        self.types = tuple(m.in_type for m in self.matchers)
        self.checks = tuple((i, m) for i, m in enumerate(self.matchers) if m.kind is not _TYPE)
        self.mutable_idx = tuple(i for i, m in enumerate(self.matchers) if m.mutable)
        self.out_types = tuple(reduce_elem(e) for e in outputs) if outputs is not None else None
        self.atom_checks = tuple(
            (i, e.value) for i, e in enumerate(outputs or ()) if isinstance(e, AtomConst))

    @property
    def arg_intents(self) -> tuple:
        return tuple("mutable" if m.mutable else "read_only" for m in self.matchers)

    @property
    def rule(self) -> Rule | None:
        if self.kind is _CATCH_ALL:
            return None
        return Rule(tuple(m.sig for m in self.matchers), self.outputs or ())

    def respond(self, result):
        """Turn a callback result into a response message (or None)."""
        if result is None:
            return None
        if isinstance(result, Message):
            return result
        if not isinstance(result, tuple):
            result = (result,)
        elif not result:
            return None
        if self.out_types is None:
            return make_message(*result)
        msg = make_message(*result, types=self.out_types)
        for i, expected in self.atom_checks:
            if result[i] != expected:
                raise TypeError(f"response element {i} must be {expected!r}, got {result[i]!r}")
        return msg

    def with_callback(self, callback) -> "MatchCase":
        """Same pattern, different callback; skips recomputing the pattern tables."""
        c = MatchCase.__new__(MatchCase)
        for name in MatchCase.__slots__:
            setattr(c, name, getattr(self, name))
        c.callback = callback
        return c

    def __repr__(self):
        return f"MatchCase({self.kind}, {list(self.matchers)})"


class _On:
    __slots__ = ("template",)

    def __init__(self, matchers, outputs):
        self.template = MatchCase(_ADVANCED, matchers, None, outputs)

    def __call__(self, callback) -> MatchCase:
        t = self.template
        c = MatchCase.__new__(MatchCase)
        c.kind = t.kind
        c.matchers = t.matchers
        c.callback = callback
        c.outputs = t.outputs
        c.types = t.types
        c.checks = t.checks
        c.mutable_idx = t.mutable_idx
        c.out_types = t.out_types
        c.atom_checks = t.atom_checks
        return c

    __rshift__ = __call__


def on(*patterns, returns=None) -> _On:
    """Start an advanced case; finish it with ``>> callback`` or ``(callback)``."""
    return _On([as_matcher(p) for p in patterns], _outputs(returns))


def case(callback, returns=None) -> MatchCase:
    """Trivial case: the pattern comes from the callback's parameter annotations.

    The return annotation (a descriptor or tuple of descriptors) declares the
    response signature unless ``returns`` overrides it.
    """
    ann = _annotations(callback)
    matchers = []
    for p in inspect.signature(callback).parameters.values():
        if p.name not in ann:
            raise TypeError(f"parameter {p.name!r} of {callback!r} needs a type annotation")
        matchers.append(as_matcher(ann[p.name]))
    if returns is None and "return" in ann and ann["return"] is not None:
        returns = ann["return"]
    return MatchCase(_TRIVIAL, matchers, callback, _outputs(returns))


class _Others:
    def __call__(self, callback) -> MatchCase:
        return MatchCase(_CATCH_ALL, (), callback)

    __rshift__ = __call__

    def __repr__(self):
        return "others"


others = _Others()


@dataclass(frozen=True)
class MatchOutcome:
    matched: bool
    response: Message | None = None


NO_MATCH = object()
# behaviors with at most this many cases are scanned instead of indexed
_SCAN_LIMIT = 4
_NO_MATCH_OUTCOME = MatchOutcome(False)


class Behavior:
    """Immutable ordered list of match cases."""

    __slots__ = ("cases", "_index")

    def __init__(self, *cases):
        for c in cases:
            if type(c) is not MatchCase:
                break
        else:
            self.cases = cases
            self._index: dict[tuple, tuple] | None = {} if len(cases) > _SCAN_LIMIT else None
            return
        norm = []
        for c in cases:
            if isinstance(c, MatchCase):
                norm.append(c)
            elif callable(c):
                norm.append(case(c))
            else:
                raise TypeError(f"{c!r} is not a match case")
        self.cases = tuple(norm)
        self._index = {} if len(norm) > _SCAN_LIMIT else None

    def _candidates(self, types: tuple) -> tuple:
        cands = tuple(c for c in self.cases if c.kind is _CATCH_ALL or c.types == types)
        self._index[types] = cands
        return cands

    def dispatch(self, msg: Message):
        """Run the first matching case. Returns ``NO_MATCH`` or the response (maybe None)."""
        p = msg._p
        types = p.types
        index = self._index
        if index is None:
            cands = self.cases
        else:
            cands = index.get(types)
            if cands is None:
                cands = self._candidates(types)
        for c in cands:
            if c.types != types or c.kind is _CATCH_ALL:
                if c.kind is not _CATCH_ALL:
                    continue
                c.callback()
                return None
            checks = c.checks
            if checks:
                args = list(p.values)
                for i, m in checks:
                    r = m.fn(args[i])
                    if r is None:
                        break
                    args[i] = r
                else:
                    if c.mutable_idx:
                        return self._invoke(c, msg, args)
                    r = c.callback(*args)
                    return None if r is None else c.respond(r)
                continue
            if c.mutable_idx:
                return self._invoke(c, msg, p.values)
            r = c.callback(*p.values)
            return None if r is None else c.respond(r)
        return NO_MATCH

    @staticmethod
    def _invoke(c: MatchCase, msg: Message, args):
        if c.mutable_idx:
            args = list(args)
            for i in c.mutable_idx:
                args[i] = msg.get_mutable(i)
        return c.respond(c.callback(*args))

    def match(self, msg: Message) -> MatchOutcome:
        res = self.dispatch(msg)
        if res is NO_MATCH:
            return _NO_MATCH_OUTCOME
        return MatchOutcome(True, res)

    @property
    def has_catch_all(self) -> bool:
        return any(c.kind is _CATCH_ALL for c in self.cases)

    def __len__(self):
        return len(self.cases)

    def __repr__(self):
        return f"Behavior({list(self.cases)})"


def match(behavior: Behavior, msg: Message) -> MatchOutcome:
    return behavior.match(msg)


def derive_interface(behavior: Behavior) -> MessagingInterface | None:
    """Interface implied by the cases; None (dynamic) if a catch-all is present."""
    if behavior.has_catch_all:
        return None
    return MessagingInterface(c.rule for c in behavior.cases)
