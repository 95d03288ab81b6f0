"""Matrices over F_p[H] for finite groups H and the dimension inequality
dim im(alpha) >= |H| dim im(alpha-bar) for p-groups."""
from __future__ import annotations

import json
from dataclasses import dataclass
from importlib import resources
from itertools import product
from typing import Sequence

import numpy as np

from .errors import DomainError, MalformedInputError
from .homology import dense_rank_mod_p
from .quotients import is_prime_power

MAX_TABLE_ORDER = 64


class GroupTable:
    """A finite group given by its multiplication table, mult[a, b] = a*b."""

    def __init__(self, mult, identity: int = 0, name: str = ""):
        T = np.asarray(mult, dtype=np.int64)
        if T.ndim != 2 or T.shape[0] != T.shape[1] or T.shape[0] == 0:
            raise MalformedInputError("multiplication table must be a non-empty square array")
        n = T.shape[0]
        if n > MAX_TABLE_ORDER:
            raise DomainError(f"group order {n} exceeds {MAX_TABLE_ORDER}")
        if T.min() < 0 or T.max() >= n:
            raise MalformedInputError("table entries must be element indices")
        for row in T:
            if len(set(row.tolist())) != n:
                raise MalformedInputError("table rows must be permutations (cancellation fails)")
        if not (np.array_equal(T[identity], np.arange(n)) and np.array_equal(T[:, identity], np.arange(n))):
            raise MalformedInputError(f"element {identity} is not an identity")
        # (ab)c == a(bc) for all triples
        ab_c = T[T.reshape(-1)].reshape(n, n, n)
        a_bc = T[np.arange(n)[:, None, None], T[None, :, :]]
        if not np.array_equal(ab_c, a_bc):
            raise MalformedInputError("multiplication is not associative")
        self.mult = T
        self.identity = identity
        self.order = n
        self.name = name
        self.inverse = np.array([int(np.nonzero(T[a] == identity)[0][0]) for a in range(n)])

    def is_p_group(self, p: int) -> bool:
        return is_prime_power(self.order, p)

    def to_record(self) -> dict:
        return {"name": self.name, "identity": self.identity, "mult": self.mult.tolist()}

    @classmethod
    def from_record(cls, record: dict) -> "GroupTable":
        if "kind" in record:
            return named_group(record)
        try:
            return cls(record["mult"], record.get("identity", 0), record.get("name", ""))
        except (KeyError, TypeError):
            raise MalformedInputError("group record needs 'mult' or 'kind'") from None

    def __repr__(self):
        return f"GroupTable({self.name or self.order})"


class PGroupTable(GroupTable):
    """A GroupTable whose order is a power of the prime p."""

    def __init__(self, mult, p: int, identity: int = 0, name: str = ""):
        super().__init__(mult, identity, name)
        if not is_prime_power(self.order, p):
            raise DomainError(f"group of order {self.order} is not a {p}-group")
        self.p = p

    @classmethod
    def of(cls, g: GroupTable, p: int) -> "PGroupTable":
        return cls(g.mult, p, g.identity, g.name)


def _from_elements(elements: Sequence, mul, name: str) -> GroupTable:
    index = {e: i for i, e in enumerate(elements)}
    T = [[index[mul(a, b)] for b in elements] for a in elements]
    return GroupTable(T, 0, name)


def cyclic_group(n: int) -> GroupTable:
    return _from_elements(list(range(n)), lambda a, b: (a + b) % n, f"C{n}")


def direct_product(A: GroupTable, B: GroupTable) -> GroupTable:
    els = [(a, b) for a in range(A.order) for b in range(B.order)]
    els.sort(key=lambda e: (e[0] != A.identity or e[1] != B.identity, e))
    return _from_elements(els, lambda x, y: (int(A.mult[x[0], y[0]]), int(B.mult[x[1], y[1]])),
                          f"{A.name}x{B.name}")


def dihedral_group(n: int) -> GroupTable:
    """Symmetries of the n-gon (order 2n) as pairs (rotation, flip)."""
    els = [(r, f) for f in (0, 1) for r in range(n)]

    def mul(a, b):
        r1, f1 = a
        r2, f2 = b
        return ((r1 + (-r2 if f1 else r2)) % n, f1 ^ f2)

    return _from_elements(els, mul, f"D{n}")


_QUAT = {  # unit products i*j = k etc, as (sign, unit)
    ("1", "1"): (1, "1"), ("1", "i"): (1, "i"), ("1", "j"): (1, "j"), ("1", "k"): (1, "k"),
    ("i", "1"): (1, "i"), ("i", "i"): (-1, "1"), ("i", "j"): (1, "k"), ("i", "k"): (-1, "j"),
    ("j", "1"): (1, "j"), ("j", "i"): (-1, "k"), ("j", "j"): (-1, "1"), ("j", "k"): (1, "i"),
    ("k", "1"): (1, "k"), ("k", "i"): (1, "j"), ("k", "j"): (-1, "i"), ("k", "k"): (-1, "1"),
}


def quaternion_group() -> GroupTable:
    els = [(s, u) for s in (1, -1) for u in "1ijk"]

    def mul(a, b):
        s, u = _QUAT[(a[1], b[1])]
        return (a[0] * b[0] * s, u)

    return _from_elements(els, mul, "Q8")


def named_group(spec: dict) -> GroupTable:
    kind = spec.get("kind")
    if kind == "cyclic":
        return cyclic_group(int(spec["n"]))
    if kind == "dihedral":
        return dihedral_group(int(spec["n"]))
    if kind == "quaternion":
        return quaternion_group()
    if kind == "product":
        return direct_product(named_group(spec["factors"][0]), named_group(spec["factors"][1]))
    raise MalformedInputError(f"unknown group kind {kind!r}")


def group_by_name(name: str) -> GroupTable:
    """C<n>, D4 (order 8), Q8, and products written A*B or AxB such as C2xC2."""
    name = name.strip()
    for sep in ("x", "*"):
        if sep in name[1:]:
            a, b = name.split(sep, 1)
            return direct_product(group_by_name(a), group_by_name(b))
    if name == "Q8":
        return quaternion_group()
    if name[:1] in "CD" and name[1:].isdigit():
        n = int(name[1:])
        return cyclic_group(n) if name[0] == "C" else dihedral_group(n)
    raise MalformedInputError(f"unknown group name {name!r}")


# ----------------------------------------------------------------- matrices

class GroupRingMatrix:
    """An m x n matrix with entries in F_p[H], stored as an (m, n, |H|) array."""

    def __init__(self, group: GroupTable, p: int, entries):
        E = np.asarray(entries, dtype=np.int64)
        if E.ndim != 3 or E.shape[2] != group.order:
            raise MalformedInputError(f"entries must have shape (m, n, {group.order})")
        if E.min(initial=0) < 0 or E.max(initial=0) >= p:
            raise MalformedInputError(f"coefficients must lie in 0..{p - 1}")
        self.group = group
        self.p = p
        self.entries = E

    @property
    def shape(self) -> tuple[int, int]:
        return self.entries.shape[0], self.entries.shape[1]

    @classmethod
    def random(cls, group: GroupTable, p: int, m: int, n: int, rng: np.random.Generator):
        return cls(group, p, rng.integers(0, p, size=(m, n, group.order)))

    def to_record(self) -> dict:
        return {"p": self.p, "group": self.group.to_record(), "entries": self.entries.tolist()}

    @classmethod
    def from_record(cls, record: dict) -> "GroupRingMatrix":
        return cls(GroupTable.from_record(record["group"]), int(record["p"]), record["entries"])


def element_rep(group: GroupTable, p: int, coeffs) -> np.ndarray:
    """Right-regular matrix: row g is the coefficient vector of g * a."""
    n = group.order
    R = np.zeros((n, n), dtype=np.int64)
    for k, a in enumerate(np.asarray(coeffs) % p):
        if a:
            R[np.arange(n), group.mult[:, k]] += a
    return R % p


def regular_rep(M: GroupRingMatrix) -> np.ndarray:
    m, n = M.shape
    h = M.group.order
    out = np.zeros((m * h, n * h), dtype=np.int64)
    for i in range(m):
        for j in range(n):
            out[i * h:(i + 1) * h, j * h:(j + 1) * h] = element_rep(M.group, M.p, M.entries[i, j])
    return out


def augmentation(M: GroupRingMatrix) -> np.ndarray:
    return M.entries.sum(axis=2) % M.p


def ring_multiply(group: GroupTable, p: int, a, b) -> np.ndarray:
    out = np.zeros(group.order, dtype=np.int64)
    for i, x in enumerate(a):
        if x:
            for j, y in enumerate(b):
                if y:
                    out[group.mult[i, j]] += x * y
    return out % p


@dataclass(frozen=True)
class DimInequality:
    holds: bool
    lhs: int
    rhs: int


def _dims(M: GroupRingMatrix) -> DimInequality:
    lhs = dense_rank_mod_p(regular_rep(M), M.p)
    rhs = M.group.order * dense_rank_mod_p(augmentation(M), M.p)
    return DimInequality(lhs >= rhs, lhs, rhs)


def check_dim_inequality(M: GroupRingMatrix) -> DimInequality:
    """lhs = dim im(alpha), rhs = |H| dim im(alpha-bar); holds whenever H is a p-group."""
    if not M.group.is_p_group(M.p):
        raise DomainError(f"group of order {M.group.order} is not a {M.p}-group; "
                          "use non_p_group_demo for the unrestricted comparison")
    return _dims(M)


def non_p_group_demo(M: GroupRingMatrix) -> DimInequality:
    """Same comparison with no p-group requirement; it can fail here."""
    return _dims(M)


# ----------------------------------------------------------------- suites

DEFAULT_SUITE = (("C2", 2), ("C4", 2), ("C2xC2", 2), ("D4", 2), ("Q8", 2),
                 ("C3", 3), ("C9", 3), ("C3xC3", 3))


@dataclass
class SuiteResult:
    group: str
    p: int
    samples: int
    violations: int
    equalities: int
    first_violation: dict | None = None


def random_suite(groups=DEFAULT_SUITE, samples: int = 500, max_dim: int = 3,
                 seed: int = 0) -> list[SuiteResult]:
    rng = np.random.default_rng(seed)
    results = []
    for name, p in groups:
        G = PGroupTable.of(group_by_name(name), p)
        G.name = name
        bad = eq = 0
        first = None
        for _ in range(samples):
            m, n = (int(v) for v in rng.integers(1, max_dim + 1, size=2))
            M = GroupRingMatrix.random(G, p, m, n, rng)
            r = check_dim_inequality(M)
            if not r.holds:
                bad += 1
                if first is None:
                    first = M.to_record()
            elif r.lhs == r.rhs:
                eq += 1
        results.append(SuiteResult(name, p, samples, bad, eq, first))
    return results


def load_demo_catalog() -> list[dict]:
    text = resources.files("pgradient").joinpath("data/groupring_demos.json").read_text()
    return json.loads(text)["demos"]


def run_demo(entry: dict) -> DimInequality:
    G = group_by_name(entry["group"])
    M = GroupRingMatrix(G, int(entry["p"]), entry["entries"])
    return non_p_group_demo(M)


def all_coefficient_vectors(group: GroupTable, p: int):
    """Every element of F_p[H]; only for tiny groups."""
    return (np.array(v) for v in product(range(p), repeat=group.order))
