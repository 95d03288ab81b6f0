from fractions import Fraction

import pytest
from hypothesis import assume, given, settings
from hypothesis import strategies as st

from oracles import reduce_word
from pgradient import (Alphabet, MalformedInputError, Presentation, Word, p_deficiency, parse_presentation,
                       small_cancellation_check)

A3 = Alphabet(("x", "y", "z"))


def test_parse_and_format():
    P = parse_presentation("< x, y | x^4, (x*y)^2 >")
    assert P.generators == 2 and len(P.relators) == 2
    assert str(P) == "< x, y | x^4, x*y*x*y >"
    assert parse_presentation(str(P)) == P
    assert parse_presentation("< a, b | >").relators == ()


def test_record_roundtrip():
    P = parse_presentation("< x, y | x^4, [x,y]^2 >")
    assert Presentation.from_record(P.to_record()) == P


@pytest.mark.parametrize("text,line,col", [
    ("< x, y |\n x^4, z >", 2, 7),
    ("< x, x | >", 1, 6),
    ("< x | x*x^-1 >", 1, 7),
    ("< x, y | x^4,, >", 1, 14),
])
def test_errors_point_at_the_problem(text, line, col):
    with pytest.raises(MalformedInputError) as info:
        parse_presentation(text)
    assert (info.value.line, info.value.column) == (line, col)


@pytest.mark.parametrize("text", ["x, y | x >", "< | x >", "< x | x", "< x | x > extra"])
def test_malformed(text):
    with pytest.raises(MalformedInputError):
        parse_presentation(text)


def test_deficiencies():
    P = parse_presentation("< x, y | x^4, [x,y]^2, x*y >")
    assert P.deficiency == -1
    assert p_deficiency(P, 2) == Fraction(1) - Fraction(1, 4) - Fraction(1, 2) - 1
    assert p_deficiency(P, 3) == Fraction(1) - 3
    assert Presentation.free(3).p_deficiency(5) == 2


def test_small_cancellation_examples():
    assert small_cancellation_check(parse_presentation("< a, b, c, d | [a,b]*[c,d] >")).satisfied
    r = small_cancellation_check(parse_presentation("< x, y | [x,y] >"))
    assert not r.satisfied and r.worst_piece_ratio == Fraction(1, 4)
    # a proper power overlaps itself in all but one letter
    r = small_cancellation_check(parse_presentation("< x, y | x^4 >"))
    assert r.worst_piece_ratio == Fraction(3, 4)
    assert small_cancellation_check(parse_presentation("< x, y | [x,y] >"), 1, 3).satisfied


def _cyclic_words(r):
    out = []
    for w in (r, tuple(-a for a in reversed(r))):
        out += [w[k:] + w[:k] for k in range(len(w))]
    return out


def _brute_worst(rels):
    entries = [(w, len(r)) for r in rels for w in _cyclic_words(r)]
    worst = Fraction(0)
    for i, (a, la) in enumerate(entries):
        for b, lb in entries[i + 1:]:
            k = 0
            while k < min(len(a), len(b)) and a[k] == b[k]:
                k += 1
            worst = max(worst, Fraction(k, la), Fraction(k, lb))
    return worst


def _cyclically_reduced(ls):
    w = reduce_word(ls)
    while len(w) > 1 and w[0] == -w[-1]:
        w = w[1:-1]
    return w


@settings(max_examples=80)
@given(st.lists(st.lists(st.sampled_from([1, -1, 2, -2, 3, -3]), min_size=3, max_size=12),
                min_size=1, max_size=3))
def test_piece_ratio_matches_pairwise_comparison(raw):
    rels = [_cyclically_reduced(r) for r in raw]
    assume(all(len(r) >= 2 for r in rels))
    words = [w for r in rels for w in _cyclic_words(r)]
    # the oracle compares words, so every position must spell a different word
    assume(len(set(words)) == len(words))
    P = Presentation(A3, [Word(A3, r) for r in rels])
    res = small_cancellation_check(P)
    assert res.worst_piece_ratio == _brute_worst(rels)
    assert res.satisfied == (res.worst_piece_ratio < Fraction(1, 6))
