"""Free-group words: reduction, products, cyclic reduction and p-power roots.

A word is stored as a tuple of non-zero integers; ``k`` stands for the k-th
generator (1-based) and ``-k`` for its inverse.  Most heavy code in the
package works on these raw tuples and only wraps them in :class:`Word` at
the API boundary.
"""
from __future__ import annotations

import re
from dataclasses import dataclass
from typing import Iterable, Sequence

from .errors import AlphabetMismatchError, MalformedInputError, UndefinedRootError

_NAME_RE = re.compile(r"[A-Za-z][A-Za-z0-9_]*\Z")


def free_reduce(letters: Iterable[int]) -> tuple[int, ...]:
    """Freely reduce a sequence of signed generator indices."""
    out: list[int] = []
    for a in letters:
        if out and out[-1] == -a:
            out.pop()
        else:
            out.append(a)
    return tuple(out)


def invert_letters(letters: Sequence[int]) -> tuple[int, ...]:
    return tuple(-a for a in reversed(letters))


def cyclic_core(letters: Sequence[int]) -> tuple[tuple[int, ...], tuple[int, ...]]:
    """Split a reduced word as conjugator * core * conjugator^-1."""
    i, j = 0, len(letters) - 1
    while i < j and letters[i] == -letters[j]:
        i += 1
        j -= 1
    return tuple(letters[i:j + 1]), tuple(letters[:i])


def _smallest_period(core: Sequence[int], p: int) -> tuple[int, ...] | None:
    """Return u with u^p == core, or None if core is not a p-th power."""
    n = len(core)
    if n == 0 or n % p:
        return None
    m = n // p
    u = tuple(core[:m])
    if all(core[k] == u[k % m] for k in range(m, n)):
        return u
    return None


def root_letters(letters: Sequence[int], p: int) -> tuple[tuple[int, ...], int, tuple[int, ...]]:
    """(base, e, conjugator) with letters = conj * base^(p^e) * conj^-1.

    ``letters`` must be reduced and non-empty.
    """
    core, conj = cyclic_core(letters)
    e = 0
    while True:
        u = _smallest_period(core, p)
        if u is None:
            return core, e, conj
        core = u
        e += 1


@dataclass(frozen=True)
class Alphabet:
    """Ordered generator names of a free group."""

    names: tuple[str, ...]

    def __post_init__(self):
        names = tuple(self.names)
        object.__setattr__(self, "names", names)
        if not names:
            raise MalformedInputError("an alphabet needs at least one generator")
        if len(set(names)) != len(names):
            raise MalformedInputError(f"duplicate generator names in {names}")
        for n in names:
            if not _NAME_RE.match(n):
                raise MalformedInputError(f"invalid generator name {n!r}")
        object.__setattr__(self, "_index", {n: i + 1 for i, n in enumerate(names)})

    @classmethod
    def of_size(cls, d: int, prefix: str = "x") -> "Alphabet":
        if d <= 4 and prefix == "x":
            return cls(("x", "y", "z", "t")[:d])
        return cls(tuple(f"{prefix}{i}" for i in range(1, d + 1)))

    @property
    def size(self) -> int:
        return len(self.names)

    def __len__(self):
        return len(self.names)

    def index(self, name: str) -> int:
        try:
            return self._index[name]
        except KeyError:
            raise MalformedInputError(f"unknown generator {name!r}") from None

    def __contains__(self, name):
        return name in self._index

    def __hash__(self):
        return hash(self.names)

    def __eq__(self, other):
        return self is other or (isinstance(other, Alphabet) and self.names == other.names)


class Word:
    """A freely reduced element of the free group on ``alphabet``."""

    __slots__ = ("alphabet", "letters")

    def __init__(self, alphabet: Alphabet, letters: Iterable[int] = (), *, reduced: bool = False):
        letters = tuple(letters)
        if not reduced:
            d = alphabet.size
            for a in letters:
                if not isinstance(a, int) or a == 0 or abs(a) > d:
                    raise MalformedInputError(f"invalid generator index {a!r} for alphabet of size {d}")
            letters = free_reduce(letters)
        object.__setattr__(self, "alphabet", alphabet)
        object.__setattr__(self, "letters", letters)

    def __setattr__(self, key, value):
        raise AttributeError("Word is immutable")

    @classmethod
    def identity(cls, alphabet: Alphabet) -> "Word":
        return cls(alphabet, (), reduced=True)

    @classmethod
    def generator(cls, alphabet: Alphabet, name: str) -> "Word":
        return cls(alphabet, (alphabet.index(name),), reduced=True)

    def __len__(self):
        return len(self.letters)

    def __bool__(self):
        return bool(self.letters)

    def is_identity(self) -> bool:
        return not self.letters

    def __eq__(self, other):
        if not isinstance(other, Word):
            return NotImplemented
        return self.letters == other.letters and self.alphabet == other.alphabet

    def __hash__(self):
        return hash(self.letters)

    def __repr__(self):
        return f"Word({format_word(self)!r})"

    def __str__(self):
        return format_word(self)

    def _check(self, other: "Word"):
        if not isinstance(other, Word):
            raise TypeError(f"expected Word, got {type(other).__name__}")
        if other.alphabet != self.alphabet:
            raise AlphabetMismatchError(
                f"alphabets differ: {self.alphabet.names} vs {other.alphabet.names}")

    def __mul__(self, other: "Word") -> "Word":
        self._check(other)
        a, b = self.letters, other.letters
        k = 0
        while k < len(a) and k < len(b) and a[-1 - k] == -b[k]:
            k += 1
        return Word(self.alphabet, a[:len(a) - k] + b[k:], reduced=True)

    def inverse(self) -> "Word":
        return Word(self.alphabet, invert_letters(self.letters), reduced=True)

    def __pow__(self, n: int) -> "Word":
        if n < 0:
            return self.inverse() ** (-n)
        core, conj = cyclic_core(self.letters)
        letters = conj + core * n + invert_letters(conj) if n else ()
        return Word(self.alphabet, letters, reduced=True)

    def conjugate(self, t: "Word") -> "Word":
        """t^-1 * self * t."""
        return t.inverse() * self * t

    def exponent_sums(self) -> list[int]:
        sums = [0] * self.alphabet.size
        for a in self.letters:
            sums[abs(a) - 1] += 1 if a > 0 else -1
        return sums


def reduce(alphabet: Alphabet, raw: Iterable[int]) -> Word:
    return Word(alphabet, raw)


def multiply(a: Word, b: Word) -> Word:
    return a * b


def invert(a: Word) -> Word:
    return a.inverse()


def conjugate(a: Word, t: Word) -> Word:
    return a.conjugate(t)


def commutator(a: Word, b: Word) -> Word:
    """[a, b] = a b a^-1 b^-1."""
    return a * b * a.inverse() * b.inverse()


def cyclic_reduce(w: Word) -> tuple[Word, Word]:
    """Return (core, conjugator) with conjugator * core * conjugator^-1 == w."""
    core, conj = cyclic_core(w.letters)
    return Word(w.alphabet, core, reduced=True), Word(w.alphabet, conj, reduced=True)


@dataclass(frozen=True)
class RootDecomposition:
    """w == conjugator * base^(p^exponent) * conjugator^-1, base not a p-th power."""

    base: Word
    exponent: int
    conjugator: Word
    p: int

    def reassemble(self) -> Word:
        return self.conjugator * self.base ** (self.p ** self.exponent) * self.conjugator.inverse()

    def root(self, j: int) -> Word:
        """The unique p^j-th root of the decomposed word (0 <= j <= exponent)."""
        if not 0 <= j <= self.exponent:
            raise UndefinedRootError(f"p^{j}-th root does not exist (e_p = {self.exponent})")
        return self.conjugator * self.base ** (self.p ** (self.exponent - j)) * self.conjugator.inverse()


def p_root_decomposition(w: Word, p: int) -> RootDecomposition:
    """Maximal p-power root of a non-identity word.

    Roots in free groups are unique, so the result is canonical: the base is
    cyclically reduced and is not itself a p-th power.
    """
    if p < 2:
        raise ValueError(f"p must be a prime, got {p}")
    if w.is_identity():
        raise UndefinedRootError("e_p is undefined for the identity")
    base, e, conj = root_letters(w.letters, p)
    a = w.alphabet
    return RootDecomposition(Word(a, base, reduced=True), e, Word(a, conj, reduced=True), p)


def e_p(w: Word, p: int) -> int:
    return p_root_decomposition(w, p).exponent


# ---------------------------------------------------------------- text syntax

_TOKEN_RE = re.compile(r"\s*(?:([A-Za-z][A-Za-z0-9_]*)|(\d+)|(\^|\*|\(|\)|\[|\]|,|-))")


class _Parser:
    """Recursive-descent parser for words; shared with the presentation parser."""

    def __init__(self, text: str, alphabet: Alphabet | None, offset: int = 0):
        self.text = text
        self.alphabet = alphabet
        self.pos = offset

    def location(self, pos=None):
        pos = self.pos if pos is None else pos
        line = self.text.count("\n", 0, pos) + 1
        col = pos - (self.text.rfind("\n", 0, pos) + 1) + 1
        return line, col

    def error(self, message, pos=None):
        line, col = self.location(pos)
        return MalformedInputError(message, line, col)

    def skip_ws(self):
        while self.pos < len(self.text) and self.text[self.pos].isspace():
            self.pos += 1

    def peek(self):
        self.skip_ws()
        return self.text[self.pos] if self.pos < len(self.text) else ""

    def expect(self, ch):
        if self.peek() != ch:
            got = self.peek() or "end of input"
            raise self.error(f"expected {ch!r}, got {got!r}")
        self.pos += 1

    def name(self):
        self.skip_ws()
        m = re.compile(r"[A-Za-z][A-Za-z0-9_]*").match(self.text, self.pos)
        if not m:
            raise self.error("expected a generator name")
        self.pos = m.end()
        return m.group(0), m.start()

    def integer(self):
        self.skip_ws()
        paren = False
        if self.peek() == "(":
            paren = True
            self.pos += 1
            self.skip_ws()
        sign = 1
        if self.peek() == "-":
            sign = -1
            self.pos += 1
            self.skip_ws()
        m = re.compile(r"\d+").match(self.text, self.pos)
        if not m:
            raise self.error("expected an integer exponent")
        self.pos = m.end()
        if paren:
            self.expect(")")
        return sign * int(m.group(0))

    def resolve(self, ident, start):
        a = self.alphabet
        if ident in a:
            return (a.index(ident),)
        # juxtaposed single-letter generators, e.g. "xy"
        if all(len(n) == 1 for n in a.names) and all(c in a for c in ident):
            return tuple(a.index(c) for c in ident)
        raise self.error(f"unknown generator {ident!r}", start)

    def atom(self):
        ch = self.peek()
        if ch == "(":
            self.pos += 1
            w = self.word()
            self.expect(")")
            return w
        if ch == "[":
            self.pos += 1
            a = self.word()
            self.expect(",")
            b = self.word()
            self.expect("]")
            ai, bi = invert_letters(a), invert_letters(b)
            return free_reduce(a + b + ai + bi)
        if ch == "1":
            self.pos += 1
            return ()
        if ch.isalpha():
            ident, start = self.name()
            return self.resolve(ident, start)
        raise self.error(f"unexpected {ch or 'end of input'!r}")

    def factor(self):
        w = self.atom()
        while self.peek() == "^":
            self.pos += 1
            k = self.integer()
            base = w if k >= 0 else invert_letters(w)
            w = free_reduce(base * abs(k))
        return w

    def word(self):
        parts = [self.factor()]
        while True:
            ch = self.peek()
            if ch == "*":
                self.pos += 1
                parts.append(self.factor())
            elif ch and (ch.isalpha() or ch in "([1"):
                parts.append(self.factor())
            else:
                break
        return free_reduce(x for part in parts for x in part)


def parse_word(text: str, alphabet: Alphabet) -> Word:
    """Parse ``x^2*[y,z]^-1``-style text; ``*`` is optional, ``1`` is the identity."""
    p = _Parser(text, alphabet)
    letters = p.word()
    if p.peek():
        raise p.error(f"trailing input {p.peek()!r}")
    return Word(alphabet, letters, reduced=True)


def format_letters(letters: Sequence[int], names: Sequence[str]) -> str:
    if not letters:
        return "1"
    parts = []
    i = 0
    while i < len(letters):
        a = letters[i]
        j = i
        while j < len(letters) and letters[j] == a:
            j += 1
        k = (j - i) * (1 if a > 0 else -1)
        name = names[abs(a) - 1]
        parts.append(name if k == 1 else f"{name}^{k}")
        i = j
    return "*".join(parts)


def format_word(w: Word) -> str:
    return format_letters(w.letters, w.alphabet.names)
