"""Finite presentations: parsing, deficiencies and small cancellation."""
from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable, Sequence

from .errors import AlphabetMismatchError, MalformedInputError
from .words import (Alphabet, Word, _Parser, cyclic_core, format_word, invert_letters,
                    parse_word, root_letters)


@dataclass(frozen=True)
class PresentationStats:
    generators: int
    relator_count: int
    deficiency: int
    p_deficiency: Fraction
    p: int


class Presentation:
    """Generators plus a multiset of non-trivial reduced relators."""

    __slots__ = ("alphabet", "relators")

    def __init__(self, alphabet: Alphabet, relators: Iterable[Word] = ()):
        rels = tuple(relators)
        for i, r in enumerate(rels):
            if not isinstance(r, Word):
                raise TypeError(f"relator {i} is not a Word")
            if r.alphabet != alphabet:
                raise AlphabetMismatchError(f"relator {i} uses a different alphabet")
            if r.is_identity():
                raise MalformedInputError(
                    f"relator {i} reduces to the identity; trivial relators are not allowed")
        object.__setattr__(self, "alphabet", alphabet)
        object.__setattr__(self, "relators", rels)

    def __setattr__(self, key, value):
        raise AttributeError("Presentation is immutable")

    @classmethod
    def free(cls, d_or_alphabet) -> "Presentation":
        a = d_or_alphabet if isinstance(d_or_alphabet, Alphabet) else Alphabet.of_size(d_or_alphabet)
        return cls(a, ())

    @classmethod
    def from_strings(cls, names: Sequence[str], relators: Sequence[str]) -> "Presentation":
        a = Alphabet(tuple(names))
        return cls(a, [parse_word(r, a) for r in relators])

    @property
    def generators(self) -> int:
        return self.alphabet.size

    @property
    def deficiency(self) -> int:
        return self.generators - len(self.relators)

    def p_deficiency(self, p: int) -> Fraction:
        return p_deficiency(self, p)

    def stats(self, p: int) -> PresentationStats:
        return PresentationStats(self.generators, len(self.relators), self.deficiency,
                                 p_deficiency(self, p), p)

    def with_relators(self, extra: Iterable[Word]) -> "Presentation":
        return Presentation(self.alphabet, self.relators + tuple(extra))

    def word(self, text: str) -> Word:
        return parse_word(text, self.alphabet)

    def __eq__(self, other):
        if not isinstance(other, Presentation):
            return NotImplemented
        return self.alphabet == other.alphabet and self.relators == other.relators

    def __hash__(self):
        return hash((self.alphabet, self.relators))

    def __repr__(self):
        return f"Presentation({format_presentation(self)!r})"

    def __str__(self):
        return format_presentation(self)

    def to_record(self) -> dict:
        return {"generators": list(self.alphabet.names),
                "relators": [format_word(r) for r in self.relators]}

    @classmethod
    def from_record(cls, record: dict) -> "Presentation":
        try:
            names = record["generators"]
            rels = record.get("relators", [])
        except (KeyError, TypeError, AttributeError):
            raise MalformedInputError("presentation record needs 'generators' and 'relators'") from None
        return cls.from_strings(names, rels)


def parse_presentation(text: str) -> Presentation:
    """Parse ``< x, y | x^4, [x,y] >``."""
    p = _Parser(text, None)
    p.expect("<")
    names = []
    starts = []
    if p.peek() != "|":
        while True:
            name, start = p.name()
            names.append(name)
            starts.append(start)
            if p.peek() == ",":
                p.pos += 1
                continue
            break
    p.expect("|")
    seen = set()
    for n, s in zip(names, starts):
        if n in seen:
            raise p.error(f"duplicate generator {n!r}", s)
        seen.add(n)
    if not names:
        raise p.error("a presentation needs at least one generator")
    alphabet = Alphabet(tuple(names))
    p.alphabet = alphabet
    relators = []
    if p.peek() != ">":
        while True:
            start = p.pos
            p.skip_ws()
            start = p.pos
            letters = p.word()
            if not letters:
                raise p.error("relator reduces to the identity; trivial relators are not allowed", start)
            relators.append(Word(alphabet, letters, reduced=True))
            if p.peek() == ",":
                p.pos += 1
                continue
            break
    p.expect(">")
    if p.peek():
        raise p.error(f"trailing input {p.peek()!r}")
    return Presentation(alphabet, relators)


def format_presentation(P: Presentation) -> str:
    rels = ", ".join(format_word(r) for r in P.relators)
    gens = ", ".join(P.alphabet.names)
    return f"< {gens} | {rels} >" if rels else f"< {gens} | >"


def p_deficiency(P: Presentation, p: int) -> Fraction:
    """|X| - 1 - sum over relators of p^(-e_p(r))."""
    total = Fraction(P.generators - 1)
    for r in P.relators:
        _, e, _ = root_letters(r.letters, p)
        total -= Fraction(1, p ** e)
    return total


def abelianized_relator_matrix(P: Presentation) -> list[list[int]]:
    """Exponent-sum matrix, one row per relator and one column per generator."""
    return [r.exponent_sums() for r in P.relators]


# ------------------------------------------------------------ small cancellation

@dataclass(frozen=True)
class PieceWitness:
    piece: Word
    first: tuple[int, int, int]     # (relator index, orientation +1/-1, cyclic shift)
    second: tuple[int, int, int]
    ratio: Fraction


@dataclass(frozen=True)
class SmallCancellationResult:
    satisfied: bool
    worst_piece_ratio: Fraction
    witness: PieceWitness | None
    lam: Fraction


def _symmetrized(P: Presentation):
    entries = []
    for i, r in enumerate(P.relators):
        core, _ = cyclic_core(r.letters)
        for sign, w in ((1, core), (-1, invert_letters(core))):
            n = len(w)
            for k in range(n):
                entries.append((w[k:] + w[:k], (i, sign, k)))
    return entries


def _lcp(a, b):
    n = min(len(a), len(b))
    k = 0
    while k < n and a[k] == b[k]:
        k += 1
    return k


def small_cancellation_check(P: Presentation, lambda_num: int = 1, lambda_den: int = 6) -> SmallCancellationResult:
    """Metric C'(lambda) test over the symmetrized closure of the relators.

    Entries of the closure are positions (relator, orientation, shift); two
    different positions of the same cyclic word may spell the same word when
    the relator is a proper power, in which case their common piece is capped
    at one letter short of the whole relator.
    """
    lam = Fraction(lambda_num, lambda_den)
    entries = _symmetrized(P)
    entries.sort(key=lambda e: e[0])
    worst = Fraction(0)
    witness = None
    n = len(entries)
    for idx, (w, pos) in enumerate(entries):
        best = 0
        best_other = None
        for step in (-1, 1):
            run = len(w)
            j = idx + step
            while 0 <= j < n and run > best:
                other, opos = entries[j]
                run = min(run, _lcp(w, other))
                piece = run
                if opos[0] == pos[0] and opos[1] == pos[1] and piece >= len(w):
                    piece = len(w) - 1
                if piece > best:
                    best, best_other = piece, opos
                j += step
        if best_other is None:
            continue
        ratio = Fraction(best, len(w))
        if ratio > worst:
            worst = ratio
            witness = PieceWitness(Word(P.alphabet, w[:best], reduced=True), pos, best_other, ratio)
    return SmallCancellationResult(worst < lam, worst, witness, lam)
