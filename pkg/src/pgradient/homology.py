"""Exact first homology: Smith normal form, ranks over F_p, abelian invariants.

Matrices coming out of Reidemeister-Schreier rewriting are large and very
sparse with mostly unit entries, so all eliminations here run on sparse
rows (``dict`` column -> value) and only fall back to a dense pass for the
small residue that has no unit pivots left.
"""
from __future__ import annotations

import heapq
from dataclasses import dataclass, field
from math import gcd
from typing import Iterable, Mapping, Sequence

import numpy as np

from .presentations import Presentation


class IntMatrix:
    """Sparse integer matrix with arbitrary-precision entries."""

    __slots__ = ("rows", "cols", "data")

    def __init__(self, rows: int, cols: int, data: Iterable[Mapping[int, int]] | None = None):
        self.rows = rows
        self.cols = cols
        if data is None:
            self.data = [dict() for _ in range(rows)]
        else:
            self.data = [{c: int(v) for c, v in r.items() if v} for r in data]
            if len(self.data) != rows:
                raise ValueError(f"expected {rows} rows, got {len(self.data)}")
        for r in self.data:
            for c in r:
                if not 0 <= c < cols:
                    raise ValueError(f"column {c} out of range for {cols} columns")

    @classmethod
    def from_dense(cls, dense: Sequence[Sequence[int]], cols: int | None = None) -> "IntMatrix":
        dense = [list(r) for r in dense]
        if cols is None:
            cols = len(dense[0]) if dense else 0
        for r in dense:
            if len(r) != cols:
                raise ValueError("ragged matrix")
        return cls(len(dense), cols, [{j: int(v) for j, v in enumerate(r) if v} for r in dense])

    def to_dense(self) -> list[list[int]]:
        out = [[0] * self.cols for _ in range(self.rows)]
        for i, r in enumerate(self.data):
            for c, v in r.items():
                out[i][c] = v
        return out

    def to_record(self) -> dict:
        return {"rows": self.rows, "cols": self.cols, "entries": self.to_dense()}

    @classmethod
    def from_record(cls, record: dict) -> "IntMatrix":
        return cls.from_dense(record["entries"], record["cols"])

    def __eq__(self, other):
        if not isinstance(other, IntMatrix):
            return NotImplemented
        return (self.rows, self.cols, self.data) == (other.rows, other.cols, other.data)

    def __repr__(self):
        return f"IntMatrix({self.rows}x{self.cols}, nnz={sum(len(r) for r in self.data)})"


def as_matrix(M) -> IntMatrix:
    if isinstance(M, IntMatrix):
        return M
    if isinstance(M, np.ndarray):
        if M.ndim != 2:
            raise ValueError("expected a 2-d array")
        return IntMatrix.from_dense(M.tolist(), M.shape[1])
    return IntMatrix.from_dense(M)


# ----------------------------------------------------------- sparse elimination

class _Eliminator:
    """Sparse Gaussian elimination driven by unit pivots.

    ``is_unit`` decides which entries may pivot; ``normalize`` reduces entries
    (identity over Z, ``% m`` over Z/m).  Each pivot removes one row and one
    column; when ``record`` is set the pivot rows are kept so callers can
    back-substitute eliminated columns.
    """

    def __init__(self, rows, is_unit, inverse, normalize, record=False):
        self.rows = {i: r for i, r in enumerate(rows) if r}
        self.is_unit = is_unit
        self.inverse = inverse
        self.normalize = normalize
        self.col_rows: dict[int, set] = {}
        for i, r in self.rows.items():
            for c in r:
                self.col_rows.setdefault(c, set()).add(i)
        self.pivots = 0
        self.record = record
        self.eliminated: list[tuple[int, dict]] = []

    def _heap(self):
        h = [(len(r), i) for i, r in self.rows.items() if any(self.is_unit(v) for v in r.values())]
        heapq.heapify(h)
        return h

    def run(self):
        heap = self._heap()
        while heap:
            length, i = heapq.heappop(heap)
            r = self.rows.get(i)
            if r is None or len(r) != length:
                if r is not None and any(self.is_unit(v) for v in r.values()):
                    heapq.heappush(heap, (len(r), i))
                continue
            units = [c for c, v in r.items() if self.is_unit(v)]
            if not units:
                continue
            c = min(units, key=lambda c: (len(self.col_rows[c]), c))
            self._pivot(i, c, heap)

    def _pivot(self, i, c, heap):
        r = self.rows.pop(i)
        for col in r:
            self.col_rows[col].discard(i)
        inv = self.inverse(r[c])
        for k in list(self.col_rows.get(c, ())):
            rk = self.rows[k]
            f = self.normalize(rk[c] * inv)
            for col, v in r.items():
                nv = self.normalize(rk.get(col, 0) - f * v)
                if nv:
                    if col not in rk:
                        self.col_rows.setdefault(col, set()).add(k)
                    rk[col] = nv
                elif col in rk:
                    del rk[col]
                    self.col_rows[col].discard(k)
            if not rk:
                del self.rows[k]
            elif any(self.is_unit(v) for v in rk.values()):
                heapq.heappush(heap, (len(rk), k))
        self.col_rows.pop(c, None)
        self.pivots += 1
        if self.record:
            self.eliminated.append((c, r))


def _dense_diagonal(rows: list[list[int]]) -> list[int]:
    """Diagonalize an integer matrix by smallest-pivot row/column moves."""
    A = [list(r) for r in rows if any(r)]
    diag = []
    while A:
        ncols = len(A[0])
        best = None
        for i, r in enumerate(A):
            for j, v in enumerate(r):
                if v and (best is None or abs(v) < best[0]):
                    best = (abs(v), i, j)
        if best is None:
            break
        _, pi, pj = best
        while True:
            piv = A[pi][pj]
            changed = False
            for i, r in enumerate(A):
                if i != pi and r[pj]:
                    q = r[pj] // piv
                    if q:
                        pr = A[pi]
                        for j in range(ncols):
                            r[j] -= q * pr[j]
                    if r[pj]:
                        changed = True
            pr = A[pi]
            for j in range(ncols):
                if j != pj and pr[j]:
                    q = pr[j] // piv
                    if q:
                        for r in A:
                            r[j] -= q * r[pj]
                    if pr[j]:
                        changed = True
            if not changed:
                break
            best = None
            for i, r in enumerate(A):
                if i != pi and r[pj] and (best is None or abs(r[pj]) < best[0]):
                    best = (abs(r[pj]), i, pj)
            for j, v in enumerate(A[pi]):
                if j != pj and v and (best is None or abs(v) < best[0]):
                    best = (abs(v), pi, j)
            _, pi, pj = best
        diag.append(abs(A[pi][pj]))
        A = [r[:pj] + r[pj + 1:] for i, r in enumerate(A) if i != pi]
        A = [r for r in A if any(r)]
    return diag


def _divisibility_chain(diag: list[int]) -> list[int]:
    ones = sum(1 for x in diag if x == 1)
    d = sorted(x for x in diag if x != 1)
    n = len(d)
    for i in range(n):
        for j in range(i + 1, n):
            a, b = d[i], d[j]
            g = gcd(a, b)
            d[i], d[j] = g, a // g * b
    return [1] * ones + d


@dataclass(frozen=True)
class SmithForm:
    diagonal: tuple[int, ...]
    rank: int


def smith_normal_form(M) -> SmithForm:
    """Diagonal d1 | d2 | ... | dr of the Smith normal form (positive entries only)."""
    M = as_matrix(M)
    el = _Eliminator([dict(r) for r in M.data], lambda v: v in (1, -1), lambda v: v, lambda v: v)
    el.run()
    rest = list(el.rows.values())
    cols = sorted({c for r in rest for c in r})
    pos = {c: k for k, c in enumerate(cols)}
    dense = []
    for r in rest:
        row = [0] * len(cols)
        for c, v in r.items():
            row[pos[c]] = v
        dense.append(row)
    diag = [1] * el.pivots + _dense_diagonal(dense)
    diag = _divisibility_chain(diag)
    return SmithForm(tuple(diag), len(diag))


def rank_mod_p(M, p: int) -> int:
    """Rank of M reduced modulo the prime p."""
    M = as_matrix(M)
    if M.rows * M.cols <= 40000:
        return _dense_rank_mod_p(M, p)
    return _sparse_rank_mod_p(M, p)


def _sparse_rank_mod_p(M: IntMatrix, p: int) -> int:
    rows = []
    for r in M.data:
        rr = {c: v % p for c, v in r.items() if v % p}
        if rr:
            rows.append(rr)
    el = _Eliminator(rows, lambda v: v % p != 0, lambda v: pow(v, -1, p), lambda v: v % p)
    el.run()
    return el.pivots


def _dense_rank_mod_p(M: IntMatrix, p: int) -> int:
    if M.rows == 0 or M.cols == 0:
        return 0
    if p > 3_000_000_000:
        return _sparse_rank_mod_p(M, p)
    A = np.zeros((M.rows, M.cols), dtype=np.int64)
    for i, r in enumerate(M.data):
        for c, v in r.items():
            A[i, c] = v % p
    return dense_rank_mod_p(A, p)


def dense_rank_mod_p(A: np.ndarray, p: int) -> int:
    """Rank of a dense int64 array over F_p (entries assumed in 0..p-1)."""
    A = A.copy() % p
    rows, cols = A.shape
    rank = 0
    for c in range(cols):
        if rank == rows:
            break
        nz = np.nonzero(A[rank:, c])[0]
        if nz.size == 0:
            continue
        piv = rank + nz[0]
        if piv != rank:
            A[[rank, piv]] = A[[piv, rank]]
        inv = pow(int(A[rank, c]), -1, p)
        A[rank] = (A[rank] * inv) % p
        col = A[:, c].copy()
        col[rank] = 0
        nzr = np.nonzero(col)[0]
        if nzr.size:
            A[nzr] = (A[nzr] - np.outer(col[nzr], A[rank])) % p
        rank += 1
    return rank


def rank_rational(M) -> int:
    return smith_normal_form(M).rank


# ------------------------------------------------------ cokernels mod p^e

@dataclass(frozen=True)
class ModularCokernel:
    """Z^cols / (row space + m Z^cols) written as a product of cyclic groups.

    ``images[j]`` is the coordinate vector of the j-th standard basis vector.
    """

    moduli: tuple[int, ...]
    images: tuple[tuple[int, ...], ...]

    @property
    def order(self) -> int:
        out = 1
        for m in self.moduli:
            out *= m
        return out

    def project(self, vector: Mapping[int, int] | Sequence[int]) -> tuple[int, ...]:
        items = vector.items() if isinstance(vector, Mapping) else enumerate(vector)
        acc = [0] * len(self.moduli)
        for j, v in items:
            if v:
                img = self.images[j]
                for k in range(len(acc)):
                    acc[k] += v * img[k]
        return tuple(a % m for a, m in zip(acc, self.moduli))


def _valuation(v: int, p: int, e: int) -> int:
    if v == 0:
        return e
    k = 0
    while v % p == 0:
        v //= p
        k += 1
    return k


def cokernel_mod_prime_power(M, p: int, e: int = 1) -> ModularCokernel:
    """Cokernel of the row space of M over Z/p^e with an explicit projection."""
    M = as_matrix(M)
    m = p ** e
    ncols = M.cols
    rows = []
    for r in M.data:
        rr = {c: v % m for c, v in r.items() if v % m}
        if rr:
            rows.append(rr)
    el = _Eliminator(rows, lambda v: v % p != 0, lambda v: pow(v, -1, m), lambda v: v % m, record=True)
    el.run()
    eliminated_cols = {c for c, _ in el.eliminated}
    rest_cols = [c for c in range(ncols) if c not in eliminated_cols]
    pos = {c: k for k, c in enumerate(rest_cols)}
    A = [[0] * len(rest_cols) for _ in el.rows]
    for i, r in enumerate(el.rows.values()):
        for c, v in r.items():
            A[i][pos[c]] = v
    # column transform C (tracked so that image(e_j) = row j of C, reduced)
    nrest = len(rest_cols)
    C = [[int(i == j) for j in range(nrest)] for i in range(nrest)]
    vals = []
    A = [r for r in A if any(r)]
    k = 0
    while A and k < nrest:
        best = None
        for i, r in enumerate(A):
            for j in range(k, nrest):
                v = r[j]
                if v:
                    val = _valuation(v, p, e)
                    if best is None or val < best[0]:
                        best = (val, i, j)
        if best is None:
            break
        val, pi, pj = best
        # move pivot column to position k
        for r in A:
            r[k], r[pj] = r[pj], r[k]
        for row in C:
            row[k], row[pj] = row[pj], row[k]
        pr = A.pop(pi)
        piv = pr[k]
        unit = piv // p ** val
        uinv = pow(unit, -1, m)
        pr = [(x * uinv) % m for x in pr]  # pivot now p^val
        pv = p ** val
        for r in A:
            if r[k]:
                f = (r[k] // pv) % m
                for j in range(k, nrest):
                    r[j] = (r[j] - f * pr[j]) % m
        for j in range(k + 1, nrest):
            if pr[j]:
                f = (pr[j] // pv) % m
                for row in C:
                    row[j] = (row[j] - f * row[k]) % m
                for r in A:
                    r[j] = (r[j] - f * r[k]) % m
        vals.append(val)
        A = [r for r in A if any(r)]
        k += 1
    # coordinates: columns 0..k-1 have modulus p^vals, the rest p^e
    col_mods = [p ** v for v in vals] + [m] * (nrest - k)
    keep = [j for j in range(nrest) if col_mods[j] > 1]
    moduli = tuple(col_mods[j] for j in keep)
    images: dict[int, list[int]] = {}
    for c in rest_cols:
        row = C[pos[c]]
        images[c] = [row[j] % col_mods[j] for j in keep]
    for c, r in reversed(el.eliminated):
        inv = pow(r[c], -1, m)
        acc = [0] * len(keep)
        for col, v in r.items():
            if col == c:
                continue
            img = images[col]
            for t in range(len(keep)):
                acc[t] -= v * inv * img[t]
        images[c] = [a % md for a, md in zip(acc, moduli)]
    return ModularCokernel(moduli, tuple(tuple(images[c]) for c in range(ncols)))


# ------------------------------------------------------------ abelian invariants

@dataclass(frozen=True)
class AbelianInvariants:
    free_rank: int
    invariant_factors: tuple[int, ...]
    betti_mod: dict = field(default_factory=dict)

    @property
    def d_H1(self) -> int:
        return self.free_rank + len(self.invariant_factors)

    def betti(self, p: int) -> int:
        """b1 with F_p coefficients, for any prime p (not only the stored ones)."""
        return self.free_rank + sum(1 for f in self.invariant_factors if f % p == 0)

    def to_record(self) -> dict:
        return {"free_rank": self.free_rank,
                "invariant_factors": list(self.invariant_factors),
                "d_H1": self.d_H1,
                "betti_mod": {str(p): b for p, b in sorted(self.betti_mod.items())}}

    def __str__(self):
        parts = ["Z"] * (self.free_rank > 0)
        if self.free_rank > 1:
            parts = [f"Z^{self.free_rank}"]
        parts += [f"Z/{f}" for f in self.invariant_factors]
        return " + ".join(parts) or "0"


def invariants_from_matrix(M, ncols: int, primes: Sequence[int] = ()) -> AbelianInvariants:
    snf = smith_normal_form(M)
    free_rank = ncols - snf.rank
    factors = tuple(d for d in snf.diagonal if d > 1)
    inv = AbelianInvariants(free_rank, factors, {})
    inv.betti_mod.update({p: inv.betti(p) for p in primes})
    return inv


def relator_matrix(P: Presentation) -> IntMatrix:
    d = P.generators
    data = []
    for r in P.relators:
        row: dict[int, int] = {}
        for a in r.letters:
            c = abs(a) - 1
            row[c] = row.get(c, 0) + (1 if a > 0 else -1)
        data.append(row)
    return IntMatrix(len(data), d, data)


def abelian_invariants(P: Presentation, primes: Sequence[int] = ()) -> AbelianInvariants:
    """H_1 of the presented group: free rank, invariant factors and mod-p Betti numbers."""
    return invariants_from_matrix(relator_matrix(P), P.generators, primes)


def betti_number(P: Presentation, field: int | None = None) -> int:
    """b1 over Q (field=None) or over F_p (field=p)."""
    M = relator_matrix(P)
    if field is None:
        return P.generators - rank_rational(M)
    return P.generators - rank_mod_p(M, field)
