import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from oracles import all_reduced_words, brute_root_exponent, reduce_word
from pgradient import (Alphabet, AlphabetMismatchError, MalformedInputError, UndefinedRootError, Word,
                       commutator, cyclic_reduce, e_p, format_word, p_root_decomposition, parse_word)

A2 = Alphabet(("x", "y"))
A3 = Alphabet(("x", "y", "z"))

letters2 = st.lists(st.sampled_from([1, -1, 2, -2]), max_size=14)


def W(text, a=A2):
    return parse_word(text, a)


@given(letters2)
def test_reduction_matches_stack_reduction(ls):
    assert Word(A2, ls).letters == reduce_word(ls)


@given(letters2, letters2, letters2)
def test_group_axioms(a, b, c):
    x, y, z = Word(A2, a), Word(A2, b), Word(A2, c)
    assert (x * y) * z == x * (y * z)
    assert (x * x.inverse()).is_identity()
    assert x * Word.identity(A2) == x
    assert (x * y).inverse() == y.inverse() * x.inverse()


@given(letters2)
def test_format_parse_roundtrip(ls):
    w = Word(A2, ls)
    assert parse_word(format_word(w), A2) == w


@given(letters2, st.integers(-4, 4))
def test_powers(ls, k):
    w = Word(A2, ls)
    expect = Word.identity(A2)
    base = w if k >= 0 else w.inverse()
    for _ in range(abs(k)):
        expect = expect * base
    assert w ** k == expect


def test_parser_syntax():
    assert W("x^2*y^-1").letters == (1, 1, -2)
    assert W("xy").letters == (1, 2)
    assert W("[x,y]") == commutator(W("x"), W("y"))
    assert W("(x*y)^-2").letters == (-2, -1, -2, -1)
    assert W("1").is_identity()
    assert W("x*x^-1").is_identity()


@pytest.mark.parametrize("bad", ["x^", "x*", "(x", "[x,y", "z", "x^a", "x y )"])
def test_parser_errors_have_positions(bad):
    with pytest.raises(MalformedInputError) as info:
        parse_word(bad, A2)
    assert info.value.column is not None


def test_alphabet_mismatch():
    with pytest.raises(AlphabetMismatchError):
        W("x") * W("x", A3)


def test_cyclic_reduce():
    core, conj = cyclic_reduce(W("y*x^2*y^-1"))
    assert core == W("x^2") and conj == W("y")


def test_root_of_identity_is_undefined():
    with pytest.raises(UndefinedRootError):
        e_p(Word.identity(A2), 2)


def test_root_decomposition_examples():
    assert e_p(W("x^8"), 2) == 3
    assert e_p(W("x^6"), 2) == 1
    assert e_p(W("x^6"), 3) == 1
    assert e_p(W("[x,y]^4"), 2) == 2
    assert e_p(W("y*(x*y)^4*y^-1"), 2) == 2
    assert e_p(W("x*y"), 2) == 0
    dec = p_root_decomposition(W("y*(x*y)^4*y^-1"), 2)
    assert dec.reassemble() == W("y*(x*y)^4*y^-1")
    assert dec.root(1) ** 2 == W("y*(x*y)^4*y^-1")
    with pytest.raises(UndefinedRootError):
        dec.root(3)


@pytest.mark.parametrize("p", [2, 3])
def test_root_exponent_matches_exhaustive_search(p):
    # every reduced word of length <= 6 over two letters, plus some powers
    words = list(all_reduced_words(2, 4))
    words += [reduce_word(w * p) for w in list(all_reduced_words(2, 2))]
    words += [reduce_word(w * (p * p)) for w in list(all_reduced_words(2, 1))]
    for w in words:
        if not w:
            continue
        assert e_p(Word(A2, w), p) == brute_root_exponent(w, p, 2), w


@settings(max_examples=60)
@given(st.lists(st.sampled_from([1, -1, 2, -2]), min_size=1, max_size=5),
       st.lists(st.sampled_from([1, -1, 2, -2]), max_size=3), st.integers(0, 2))
def test_root_of_conjugated_power(base, conj, e):
    u = Word(A2, base)
    if u.is_identity():
        return
    t = Word(A2, conj)
    w = t * u ** (2 ** e) * t.inverse()
    assert e_p(w, 2) >= e
    dec = p_root_decomposition(w, 2)
    assert dec.reassemble() == w
