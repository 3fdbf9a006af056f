"""Atom constants: short operation names packed into a 64-bit integer.

Each character maps to a 6-bit code (1-63, 0 is "no character"), folded
left to right. Ten characters fill 60 bits; the top four bits stay zero.
"""
from __future__ import annotations

from functools import lru_cache

from .errors import AtomError

ALPHABET = "_0123456789ABCDEFGHIJKLMNOPQRSTUVWXYZabcdefghijklmnopqrstuvwxyz"
MAX_LENGTH = 10

_ENCODE = {ch: code for code, ch in enumerate(ALPHABET, start=1)}
_DECODE = {code: ch for ch, code in _ENCODE.items()}
_VALUE_BITS = 6 * MAX_LENGTH


class AtomValue(int):
    """An encoded atom. Behaves as an ``int`` but prints as ``atom('name')``."""

    __slots__ = ()

    @property
    def text(self) -> str:
        return atom_decode(self)

    def __repr__(self) -> str:
        return f"atom({atom_decode(self)!r})"

    __str__ = __repr__


def is_valid_atom_text(text) -> bool:
    return (
        isinstance(text, str)
        and len(text) <= MAX_LENGTH
        and all(ch in _ENCODE for ch in text)
    )


def atom_encode(text: str) -> AtomValue:
    if not isinstance(text, str):
        raise AtomError(f"atom text must be str, got {type(text).__name__}")
    if len(text) > MAX_LENGTH:
        raise AtomError(f"atom text {text!r} exceeds {MAX_LENGTH} characters")
    value = 0
    for ch in text:
        code = _ENCODE.get(ch)
        if code is None:
            raise AtomError(f"character {ch!r} in {text!r} is outside the atom alphabet")
        value = (value << 6) | code
    return AtomValue(value)


def atom_decode(value: int) -> str:
    value = int(value)
    if value < 0 or value >> _VALUE_BITS:
        raise AtomError(f"{value:#x} is not a valid atom value")
    chars = []
    while value:
        code = value & 0x3F
        if code == 0:
            raise AtomError("atom value contains an empty 6-bit group")
        chars.append(_DECODE[code])
        value >>= 6
    return "".join(reversed(chars))


@lru_cache(maxsize=4096)
def atom(text: str) -> AtomValue:
    """Cached :func:`atom_encode`, for use at module level and in hot paths."""
    return atom_encode(text)
