import pytest
from hypothesis import given, strategies as st

from cafx import AtomError, AtomValue, atom, atom_decode, atom_encode
from cafx.atom import ALPHABET, MAX_LENGTH, is_valid_atom_text

atom_text = st.text(alphabet=ALPHABET, max_size=MAX_LENGTH)


def test_known_encodings():
    assert atom_encode("") == 0
    assert atom_encode("A") == 12
    assert atom_encode("AB") == (12 << 6) | 13 == 781
    assert atom_encode("_") == 1
    assert atom_encode("z") == 63


def test_single_characters_round_trip():
    for ch in ALPHABET:
        assert atom_decode(atom_encode(ch)) == ch


def test_ten_characters_fit_sixty_bits():
    v = atom_encode("zzzzzzzzzz")
    assert v == 2**60 - 1
    assert v.bit_length() <= 60


@pytest.mark.parametrize("bad", ["elevenchars", "a-b", "ä", "with space"])
def test_invalid_text_rejected(bad):
    assert not is_valid_atom_text(bad)
    with pytest.raises(AtomError):
        atom_encode(bad)


@pytest.mark.parametrize("bad", [-1, 2**60, 0b000001_000000])
def test_invalid_values_rejected(bad):
    with pytest.raises(AtomError):
        atom_decode(bad)


def test_atom_value_is_int_and_prints_name():
    v = atom("plus")
    assert isinstance(v, AtomValue) and isinstance(v, int)
    assert repr(v) == "atom('plus')"
    assert v.text == "plus"
    assert atom("plus") is v  # cached


@given(atom_text)
def test_round_trip(text):
    assert atom_decode(atom_encode(text)) == text


@given(atom_text, atom_text)
def test_injective(a, b):
    assert (atom_encode(a) == atom_encode(b)) == (a == b)
