"""Brute-force reference computations used to check the package.

Nothing here imports the algorithms under test; each oracle is the slow,
obviously-correct version of a fast routine.
"""
from __future__ import annotations

from collections import deque
from fractions import Fraction
from itertools import combinations, product
from math import gcd


# ------------------------------------------------------------------ words

def reduce_word(w):
    out = []
    for a in w:
        if out and out[-1] == -a:
            out.pop()
        else:
            out.append(a)
    return tuple(out)


def all_reduced_words(d, max_len):
    """Every reduced word over d generators of length 1..max_len."""
    letters = [g for g in range(1, d + 1)] + [-g for g in range(1, d + 1)]
    frontier = [()]
    for _ in range(max_len):
        nxt = []
        for w in frontier:
            for a in letters:
                if w and w[-1] == -a:
                    continue
                nxt.append(w + (a,))
        yield from nxt
        frontier = nxt


def brute_root_exponent(w, p, d):
    """Largest e with u^(p^e) == w for some word u, by trying every shorter word."""
    w = reduce_word(w)
    best = 0
    e = 1
    while len(w) >= p ** e:
        k = p ** e
        found = any(reduce_word(u * k) == w for u in all_reduced_words(d, len(w)))
        if not found:
            break
        best = e
        e += 1
    return best


# ------------------------------------------------------ integer matrices

def det(M):
    """Exact determinant by Fraction elimination."""
    A = [[Fraction(x) for x in row] for row in M]
    n = len(A)
    sign, out = 1, Fraction(1)
    for c in range(n):
        piv = next((r for r in range(c, n) if A[r][c] != 0), None)
        if piv is None:
            return 0
        if piv != c:
            A[c], A[piv] = A[piv], A[c]
            sign = -sign
        out *= A[c][c]
        for r in range(c + 1, n):
            f = A[r][c] / A[c][c]
            A[r] = [x - f * y for x, y in zip(A[r], A[c])]
    return int(sign * out)


def rational_rank(M, ncols):
    A = [[Fraction(x) for x in row] for row in M]
    rank = 0
    for c in range(ncols):
        piv = next((r for r in range(rank, len(A)) if A[r][c] != 0), None)
        if piv is None:
            continue
        A[rank], A[piv] = A[piv], A[rank]
        for r in range(len(A)):
            if r != rank and A[r][c] != 0:
                f = A[r][c] / A[rank][c]
                A[r] = [x - f * y for x, y in zip(A[r], A[rank])]
        rank += 1
    return rank


def _solve_row(v, B):
    """y with y B = v, over Q (B square, invertible)."""
    n = len(B)
    # transpose: B^T y^T = v^T
    A = [[Fraction(B[j][i]) for j in range(n)] + [Fraction(v[i])] for i in range(n)]
    for c in range(n):
        piv = next(r for r in range(c, n) if A[r][c] != 0)
        A[c], A[piv] = A[piv], A[c]
        A[c] = [x / A[c][c] for x in A[c]]
        for r in range(n):
            if r != c and A[r][c] != 0:
                f = A[r][c]
                A[r] = [x - f * y for x, y in zip(A[r], A[c])]
    return [A[i][n] for i in range(n)]


class EnumeratedCokernel:
    """Z^n / rowspace(M) for a full-rank M, built element by element.

    A nonsingular n x n block B of rows gives canonical coset labels
    (fractional parts of v B^-1); the remaining rows are then quotiented
    out by a second breadth-first closure.
    """

    def __init__(self, M, ncols, cap=50000):
        rows = [list(r) for r in M]
        best = None
        for idx in combinations(range(len(rows)), ncols):
            D = abs(det([rows[i] for i in idx]))
            if D and (best is None or D < best[0]):
                best = (D, idx)
        if best is None:
            raise ValueError("cokernel is infinite")
        if best[0] > cap:
            raise OverflowError("block determinant too large to enumerate")
        self.n = ncols
        self.B = [rows[i] for i in best[1]]
        self.extra = [rows[i] for i in range(len(rows)) if i not in best[1]]
        elems = self._closure([self._unit(j) for j in range(ncols)], self._label([0] * ncols))
        sub = self._closure([self._label(r) for r in self.extra], self._label([0] * ncols))
        sub_set = set(sub)
        # cosets of sub in elems
        coset_of = {}
        reps = []
        for x in elems:
            if x in coset_of:
                continue
            k = len(reps)
            reps.append(x)
            for s in sub:
                coset_of[self._add(x, s)] = k
        self.elements = reps
        self.coset_of = coset_of
        self.order = len(reps)
        self._sub = sub_set

    def _label(self, v):
        y = _solve_row(v, self.B)
        return tuple(x - (x.numerator // x.denominator) for x in y)

    def _unit(self, j):
        v = [0] * self.n
        v[j] = 1
        return self._label(v)

    @staticmethod
    def _add(a, b):
        return tuple((x + y) - ((x + y).numerator // (x + y).denominator) for x, y in zip(a, b))

    def _closure(self, gens, zero):
        seen = {zero}
        dq = deque([zero])
        while dq:
            x = dq.popleft()
            for g in gens:
                y = self._add(x, g)
                if y not in seen:
                    seen.add(y)
                    dq.append(y)
        return list(seen)

    def count_killed_by(self, k):
        """#{x in the cokernel : k x = 0}."""
        n = 0
        for x in self.elements:
            y = tuple(v * k - ((v * k).numerator // (v * k).denominator) for v in x)
            if self.coset_of[y] == self.coset_of[tuple(Fraction(0) for _ in x)]:
                n += 1
        return n


def predicted_count(factors, k):
    out = 1
    for f in factors:
        out *= gcd(f, k)
    return out


def divisors(n):
    return [k for k in range(1, n + 1) if n % k == 0]


# ------------------------------------------------------------- mod p rank

def rank_mod_p_brute(M, p):
    """Rank over F_p by plain Gaussian elimination on Python ints."""
    A = [[x % p for x in row] for row in M]
    if not A:
        return 0
    ncols = len(A[0])
    rank = 0
    for c in range(ncols):
        piv = next((r for r in range(rank, len(A)) if A[r][c]), None)
        if piv is None:
            continue
        A[rank], A[piv] = A[piv], A[rank]
        inv = pow(A[rank][c], -1, p)
        A[rank] = [(x * inv) % p for x in A[rank]]
        for r in range(len(A)):
            if r != rank and A[r][c]:
                f = A[r][c]
                A[r] = [(x - f * y) % p for x, y in zip(A[r], A[rank])]
        rank += 1
    return rank


# ------------------------------------------------------------- group rings

def group_ring_product(mult, a, b, p):
    n = len(a)
    out = [0] * n
    for i in range(n):
        for j in range(n):
            out[mult[i][j]] = (out[mult[i][j]] + a[i] * b[j]) % p
    return out


def all_vectors(p, n):
    return product(range(p), repeat=n)
