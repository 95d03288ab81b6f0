"""Finite-index normal subgroups as kernels of maps onto finite groups.

A :class:`FiniteQuotientMap` stores, for every generator, the permutation it
induces on the cosets of the kernel (right action, coset 0 is the kernel).
Because the kernel is normal the action is the right-regular action of the
image group; this is checked on construction.

:class:`AbelianExtension` is the lazy counterpart used when the index is too
large to enumerate: points are pairs ``(coset, vector)`` and a generator acts
by ``(c, v) -> (c.g, v + cocycle[g][c])``.
"""
from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field
from functools import cached_property
from itertools import product
from math import gcd, lcm, prod
from typing import Sequence

import numpy as np

from .errors import (DomainError, MalformedInputError, NestingError, NotAHomomorphismError,
                     NotSurjectiveError, ResourceLimitError)
from .homology import IntMatrix, cokernel_mod_prime_power, rank_mod_p
from .presentations import Presentation
from .words import Alphabet, Word, format_word, root_letters

DEFAULT_INDEX_BUDGET = 5000


def is_prime_power(n: int, p: int) -> bool:
    if n < 1:
        return False
    while n % p == 0:
        n //= p
    return n == 1


def _p_log(n: int, p: int) -> int:
    k = 0
    while n > 1:
        n //= p
        k += 1
    return k


class FiniteQuotientMap:
    """Homomorphism F(X) -> Q (factoring through the source presentation).

    ``images[g][c]`` is the coset reached from coset ``c`` by generator g+1.
    """

    def __init__(self, source: Presentation, images: Sequence[Sequence[int]], *,
                 element_labels: Sequence | None = None, description: dict | None = None,
                 check: bool = True):
        self.source = source
        self.images = tuple(tuple(int(x) for x in perm) for perm in images)
        self.order = len(self.images[0]) if self.images else 1
        self.element_labels = tuple(element_labels) if element_labels is not None else None
        self.description = description
        if check:
            self._validate()

    # -- construction checks

    def _validate(self):
        d = self.source.generators
        n = self.order
        if len(self.images) != d:
            raise MalformedInputError(f"expected {d} generator images, got {len(self.images)}")
        for g, perm in enumerate(self.images):
            if len(perm) != n or sorted(perm) != list(range(n)):
                raise MalformedInputError(f"image of generator {g + 1} is not a permutation of 0..{n - 1}")
        parent = self._bfs[0]
        reached = sum(1 for x in parent if x is not None)
        if reached != n:
            raise NotSurjectiveError(
                f"generator images act intransitively (orbit of coset 0 has size {reached} of {n})",
                generated_order=None)
        if not self._regular():
            raise MalformedInputError("action is not regular: the stabilizer of coset 0 is not normal")
        for i, r in enumerate(self.source.relators):
            if self.act(r.letters) != 0:
                raise NotAHomomorphismError(
                    f"relator {i} ({format_word(r)}) does not act trivially", relator=r)

    def _regular(self) -> bool:
        # a transitive group is regular iff its centralizer is transitive;
        # L_g(c) = coset of g.t_c commutes with the action for every g
        for g in range(len(self.images)):
            L = self.left_multiplication((g + 1,))
            for h, perm in enumerate(self.images):
                for c in range(self.order):
                    if L[perm[c]] != perm[L[c]]:
                        return False
        return True

    # -- basic action

    @cached_property
    def inverse_images(self):
        out = []
        for perm in self.images:
            inv = [0] * self.order
            for c, x in enumerate(perm):
                inv[x] = c
            out.append(tuple(inv))
        return tuple(out)

    def step(self, c: int, a: int) -> int:
        return self.images[a - 1][c] if a > 0 else self.inverse_images[-a - 1][c]

    def act(self, letters: Sequence[int], start: int = 0) -> int:
        c = start
        imgs, invs = self.images, self.inverse_images
        for a in letters:
            c = imgs[a - 1][c] if a > 0 else invs[-a - 1][c]
        return c

    def membership(self, w) -> bool:
        letters = w.letters if isinstance(w, Word) else w
        return self.act(letters) == 0

    def element_order(self, w) -> int:
        letters = w.letters if isinstance(w, Word) else tuple(w)
        c = self.act(letters)
        k = 1
        while c != 0:
            c = self.act(letters, c)
            k += 1
        return k

    @property
    def alphabet(self) -> Alphabet:
        return self.source.alphabet

    def is_p_power_index(self, p: int) -> bool:
        return is_prime_power(self.order, p)

    # -- transversal

    @cached_property
    def _bfs(self):
        """(parent, visit order): parent[c] = (previous coset, letter)."""
        n = self.order
        d = len(self.images)
        parent: list = [None] * n
        parent[0] = (-1, 0)
        order = [0]
        letters = [x for g in range(1, d + 1) for x in (g, -g)]
        q = deque([0])
        while q:
            c = q.popleft()
            for a in letters:
                nc = self.step(c, a)
                if parent[nc] is None:
                    parent[nc] = (c, a)
                    order.append(nc)
                    q.append(nc)
        return parent, order

    def transversal_letters(self, c: int) -> tuple[int, ...]:
        parent = self._bfs[0]
        out = []
        while c != 0:
            prev, a = parent[c]
            out.append(a)
            c = prev
        return tuple(reversed(out))

    @cached_property
    def transversal(self) -> tuple[Word, ...]:
        """Schreier transversal, prefix closed, built breadth-first; entry c maps 0 to c."""
        a = self.alphabet
        return tuple(Word(a, self.transversal_letters(c), reduced=True) for c in range(self.order))

    def left_multiplication(self, letters: Sequence[int]) -> list[int]:
        """Permutation c -> coset of (w . t_c); commutes with the right action."""
        parent, order = self._bfs
        L = [0] * self.order
        L[0] = self.act(letters)
        for c in order[1:]:
            prev, a = parent[c]
            L[c] = self.step(L[prev], a)
        return L

    # -- Schreier generators and rewriting

    @cached_property
    def _schreier(self):
        """Index of each non-trivial Schreier generator (c, g), 0-based or -1."""
        parent = self._bfs[0]
        n, d = self.order, len(self.images)
        tree = set()
        for c in range(1, n):
            prev, a = parent[c]
            if a > 0:
                tree.add((prev, a))
            else:
                tree.add((c, -a))
        index = {}
        pairs = []
        for c in range(n):
            for g in range(1, d + 1):
                if (c, g) not in tree:
                    index[(c, g)] = len(pairs)
                    pairs.append((c, g))
        return index, pairs

    @property
    def schreier_pairs(self) -> list[tuple[int, int]]:
        return self._schreier[1]

    @property
    def schreier_rank(self) -> int:
        return len(self._schreier[1])

    def rewrite(self, letters: Sequence[int], start: int = 0) -> tuple[list[int], int]:
        """Rewrite a word read from coset ``start`` into signed Schreier generators (1-based)."""
        index = self._schreier[0]
        out = []
        c = start
        for a in letters:
            if a > 0:
                k = index.get((c, a))
                if k is not None:
                    out.append(k + 1)
                c = self.images[a - 1][c]
            else:
                c2 = self.inverse_images[-a - 1][c]
                k = index.get((c2, -a))
                if k is not None:
                    out.append(-(k + 1))
                c = c2
        return out, c

    def rewrite_abelian(self, letters: Sequence[int], start: int = 0) -> dict[int, int]:
        """Exponent sums (0-based Schreier index -> count) of the rewritten word."""
        row: dict[int, int] = {}
        index = self._schreier[0]
        c = start
        for a in letters:
            if a > 0:
                k = index.get((c, a))
                if k is not None:
                    row[k] = row.get(k, 0) + 1
                c = self.images[a - 1][c]
            else:
                c2 = self.inverse_images[-a - 1][c]
                k = index.get((c2, -a))
                if k is not None:
                    row[k] = row.get(k, 0) - 1
                c = c2
        return {k: v for k, v in row.items() if v}

    def schreier_word(self, k: int) -> Word:
        """The ambient word t_c g t_(c.g)^-1 of Schreier generator k (0-based)."""
        c, g = self._schreier[1][k]
        t = self.transversal_letters(c)
        u = self.transversal_letters(self.images[g - 1][c])
        return Word(self.alphabet, t + (g,) + tuple(-x for x in reversed(u)))

    def kernel_relator_matrix(self) -> IntMatrix:
        """Abelianized Reidemeister-Schreier relator matrix of the kernel."""
        rows = []
        for r in self.source.relators:
            for c in range(self.order):
                rows.append(self.rewrite_abelian(r.letters, c))
        return IntMatrix(len(rows), self.schreier_rank, rows)

    # -- records

    def to_record(self) -> dict:
        desc = self.description or {}
        return {"target_kind": desc.get("target_kind", "permutation"),
                "parameters": desc.get("parameters", {}),
                "order": self.order,
                "permutations": [list(p) for p in self.images]}

    @classmethod
    def from_record(cls, source: Presentation, record: dict) -> "FiniteQuotientMap":
        kind = record.get("target_kind", "permutation")
        if "permutations" in record:
            return cls(source, record["permutations"],
                       description={"target_kind": kind, "parameters": record.get("parameters", {})})
        return quotient_from_images(source, kind, record.get("generator_images"),
                                    **record.get("parameters", {}))

    def __repr__(self):
        return f"FiniteQuotientMap(order={self.order}, source={self.source})"


def trivial_quotient(P: Presentation) -> FiniteQuotientMap:
    return FiniteQuotientMap(P, [(0,)] * P.generators,
                             description={"target_kind": "cyclic", "parameters": {"n": 1}})


def _regular_from_group(P, gens_as_elements, mul, identity, budget, labels_ok=True):
    """Enumerate the group generated by the images and build its right-regular action."""
    elements = [identity]
    pos = {identity: 0}
    q = deque([identity])
    while q:
        x = q.popleft()
        for g in gens_as_elements:
            y = mul(x, g)
            if y not in pos:
                pos[y] = len(elements)
                elements.append(y)
                if len(elements) > budget:
                    raise ResourceLimitError("image group exceeds the index budget",
                                             required=None, budget=budget)
                q.append(y)
    images = [[pos[mul(x, g)] for x in elements] for g in gens_as_elements]
    return images, elements


def quotient_from_images(P: Presentation, target_kind: str, generator_images, *,
                         index_budget: int = DEFAULT_INDEX_BUDGET, **parameters) -> FiniteQuotientMap:
    """Build a quotient map from a target description.

    * ``cyclic``: parameter ``n``; images are residues mod n.
    * ``elementary_abelian``: parameters ``p`` and ``k``; images are vectors.
    * ``permutation``: images are permutations of a common degree; the target
      is the group they generate, or ``group_generators`` when given.
    * ``extension``: images are already the regular coset action.
    """
    d = P.generators
    if generator_images is None or len(generator_images) != d:
        raise MalformedInputError(f"need exactly {d} generator images")
    desc = {"target_kind": target_kind, "parameters": dict(parameters)}
    if target_kind == "cyclic":
        n = int(parameters["n"])
        res = [int(a) % n for a in generator_images]
        g = n
        for a in res:
            g = gcd(g, a)
        if g != 1 and n > 1:
            raise NotSurjectiveError(f"images generate a subgroup of order {n // g} in Z/{n}",
                                     generated_order=n // g)
        for i, r in enumerate(P.relators):
            s = sum(res[abs(a) - 1] * (1 if a > 0 else -1) for a in r.letters) % n
            if s:
                raise NotAHomomorphismError(f"relator {i} ({format_word(r)}) maps to {s} in Z/{n}", r)
        images = [[(c + a) % n for c in range(n)] for a in res]
        return FiniteQuotientMap(P, images, element_labels=list(range(n)), description=desc)
    if target_kind == "elementary_abelian":
        p, k = int(parameters["p"]), int(parameters["k"])
        vecs = [tuple(int(x) % p for x in v) for v in generator_images]
        if any(len(v) != k for v in vecs):
            raise MalformedInputError(f"elementary abelian images must have length {k}")
        for i, r in enumerate(P.relators):
            s = [0] * k
            for a in r.letters:
                v = vecs[abs(a) - 1]
                sg = 1 if a > 0 else -1
                for j in range(k):
                    s[j] += sg * v[j]
            if any(x % p for x in s):
                raise NotAHomomorphismError(f"relator {i} ({format_word(r)}) does not vanish", r)
        rk = rank_mod_p([list(v) for v in vecs], p) if vecs else 0
        if rk != k:
            raise NotSurjectiveError(f"images span a subgroup of order {p ** rk} in (Z/{p})^{k}",
                                     generated_order=p ** rk)
        n = p ** k
        weights = [p ** (k - 1 - j) for j in range(k)]

        def enc(v):
            return sum(x * w for x, w in zip(v, weights))

        allv = list(product(range(p), repeat=k))
        images = [[enc(tuple((x + y) % p for x, y in zip(u, v))) for u in allv] for v in vecs]
        return FiniteQuotientMap(P, images, element_labels=allv, description=desc)
    if target_kind == "permutation":
        perms = [tuple(int(x) for x in g) for g in generator_images]
        deg = len(perms[0]) if perms else 0
        ident = tuple(range(deg))

        def mul(a, b):  # apply a then b
            return tuple(b[x] for x in a)

        for i, r in enumerate(P.relators):
            x = ident
            for a in r.letters:
                g = perms[abs(a) - 1]
                if a < 0:
                    inv = [0] * deg
                    for s, t in enumerate(g):
                        inv[t] = s
                    g = tuple(inv)
                x = mul(x, g)
            if x != ident:
                raise NotAHomomorphismError(f"relator {i} ({format_word(r)}) is not killed", r)
        images, elements = _regular_from_group(P, perms, mul, ident, index_budget)
        target_gens = parameters.get("group_generators")
        if target_gens:
            _, tel = _regular_from_group(P, [tuple(g) for g in target_gens], mul, ident, index_budget)
            if len(tel) != len(elements):
                raise NotSurjectiveError(
                    f"images generate a subgroup of order {len(elements)} of a group of order {len(tel)}",
                    generated_order=len(elements))
        return FiniteQuotientMap(P, images, element_labels=elements, description=desc)
    if target_kind == "extension":
        return FiniteQuotientMap(P, generator_images, description=desc)
    raise MalformedInputError(f"unknown target kind {target_kind!r}")


def membership(q, w) -> bool:
    return q.membership(w)


# ------------------------------------------------------------- lazy extensions

class AbelianExtension:
    """Quotient F -> Q~ with kernel [K,K]K^m (times relators), K = ker(base).

    Points are ``(coset, vector)``; nothing is enumerated unless
    :meth:`materialize` is called.
    """

    def __init__(self, base: FiniteQuotientMap, moduli: Sequence[int], cocycle, modulus: int):
        self.base = base
        self.source = base.source
        self.moduli = tuple(moduli)
        self.cocycle = cocycle  # cocycle[g][c] -> tuple vector
        self.modulus = modulus
        self.order = base.order * prod(self.moduli)

    @property
    def alphabet(self):
        return self.source.alphabet

    def act(self, letters: Sequence[int], start=None):
        base = self.base
        c, v = (0, [0] * len(self.moduli)) if start is None else (start[0], list(start[1]))
        k = len(v)
        for a in letters:
            if a > 0:
                w = self.cocycle[a - 1][c]
                for j in range(k):
                    v[j] += w[j]
                c = base.images[a - 1][c]
            else:
                c = base.inverse_images[-a - 1][c]
                w = self.cocycle[-a - 1][c]
                for j in range(k):
                    v[j] -= w[j]
        return c, tuple(x % m for x, m in zip(v, self.moduli))

    def membership(self, w) -> bool:
        letters = w.letters if isinstance(w, Word) else w
        c, v = self.act(letters)
        return c == 0 and not any(v)

    def element_order(self, w) -> int:
        letters = w.letters if isinstance(w, Word) else tuple(w)
        point = self.act(letters)
        k = 1
        while point[0] != 0:
            point = self.act(letters, point)
            k += 1
        # now w^k lies in the base kernel; its vector part has additive order
        order = 1
        for x, m in zip(point[1], self.moduli):
            order = lcm(order, m // gcd(x, m))
        return k * order

    def is_p_power_index(self, p: int) -> bool:
        return is_prime_power(self.order, p)

    def materialize(self, index_budget: int = DEFAULT_INDEX_BUDGET) -> FiniteQuotientMap:
        n = self.base.order
        A = prod(self.moduli)
        if n * A > index_budget:
            raise ResourceLimitError(f"quotient of order {n * A} exceeds index budget {index_budget}",
                                     required=n * A, budget=index_budget)
        k = len(self.moduli)
        mods = np.array(self.moduli, dtype=np.int64)
        if k:
            grids = np.indices(self.moduli).reshape(k, -1).T  # row r = digits of vector r
            weights = np.array([prod(self.moduli[j + 1:]) for j in range(k)], dtype=np.int64)
        images = []
        for g in range(self.source.generators):
            perm = np.empty(n * A, dtype=np.int64)
            for c in range(n):
                nc = self.base.images[g][c]
                if k:
                    shift = np.array(self.cocycle[g][c], dtype=np.int64)
                    enc = (((grids + shift) % mods) * weights).sum(axis=1)
                else:
                    enc = np.zeros(1, dtype=np.int64)
                perm[c * A:(c + 1) * A] = nc * A + enc
            images.append(perm.tolist())
        desc = {"target_kind": "extension",
                "parameters": {"base_order": n, "moduli": list(self.moduli), "modulus": self.modulus}}
        return FiniteQuotientMap(self.source, images, description=desc, check=True)

    def to_record(self) -> dict:
        return {"target_kind": "lazy_extension",
                "order": self.order,
                "base": self.base.to_record(),
                "moduli": list(self.moduli),
                "modulus": self.modulus,
                "cocycle": [[list(v) for v in row] for row in self.cocycle]}

    @classmethod
    def from_record(cls, source: Presentation, record: dict) -> "AbelianExtension":
        base = FiniteQuotientMap.from_record(source, record["base"])
        cocycle = [[tuple(v) for v in row] for row in record["cocycle"]]
        return cls(base, record["moduli"], cocycle, record["modulus"])

    def __repr__(self):
        return f"AbelianExtension(base_order={self.base.order}, moduli={self.moduli})"


def quotient_from_record(source: Presentation, record: dict):
    if record.get("target_kind") == "lazy_extension":
        return AbelianExtension.from_record(source, record)
    return FiniteQuotientMap.from_record(source, record)


def extension_size(q: FiniteQuotientMap, p: int, e: int = 1) -> int:
    """|H_1(ker q; Z/p^e)|, the index [K : [K,K]K^(p^e)] without building anything."""
    return cokernel_mod_prime_power(q.kernel_relator_matrix(), p, e).order


def abelian_extension(q: FiniteQuotientMap, p: int, e: int = 1) -> AbelianExtension:
    """Lazy quotient with kernel [K,K]K^(p^e), K = ker q (relators of the source respected)."""
    cok = cokernel_mod_prime_power(q.kernel_relator_matrix(), p, e)
    index = q._schreier[0]
    zero = tuple(0 for _ in cok.moduli)
    cocycle = []
    for g in range(1, q.source.generators + 1):
        row = []
        for c in range(q.order):
            k = index.get((c, g))
            row.append(zero if k is None else cok.images[k])
        cocycle.append(row)
    return AbelianExtension(q, cok.moduli, cocycle, p ** e)


def impose_relators(q: FiniteQuotientMap, P: Presentation) -> FiniteQuotientMap:
    """Push a quotient of F(X) down to the group presented by P.

    The result has kernel ker(q) * <<R>>: cosets c and c.r are identified for
    every relator r, then the identification is closed under the action.
    """
    if P.alphabet != q.alphabet:
        raise MalformedInputError("presentation alphabet differs from the quotient's")
    n = q.order
    uf = list(range(n))

    def find(x):
        while uf[x] != x:
            uf[x] = uf[uf[x]]
            x = uf[x]
        return x

    def union(a, b):
        a, b = find(a), find(b)
        if a == b:
            return False
        if a > b:
            a, b = b, a
        uf[b] = a
        return True

    for r in P.relators:
        for c in range(n):
            union(c, q.act(r.letters, c))
    changed = True
    while changed:
        changed = False
        for perm in q.images:
            target: dict[int, int] = {}
            for c in range(n):
                rc = find(c)
                img = find(perm[c])
                t = target.get(rc)
                if t is None:
                    target[rc] = img
                elif find(t) != img:
                    union(t, img)
                    changed = True
    reps = sorted({find(c) for c in range(n)})
    # relabel classes breadth-first from the class of 0
    rep_images = [{find(c): find(perm[c]) for c in range(n)} for perm in q.images]
    label = {find(0): 0}
    order = [find(0)]
    dq = deque(order)
    while dq:
        x = dq.popleft()
        for m in rep_images:
            y = m[x]
            if y not in label:
                label[y] = len(order)
                order.append(y)
                dq.append(y)
    assert len(order) == len(reps)
    images = [[label[m[x]] for x in order] for m in rep_images]
    return FiniteQuotientMap(P, images, description={"target_kind": "permutation", "parameters": {}})


def rebase(q: FiniteQuotientMap, P: Presentation) -> FiniteQuotientMap:
    """Same permutations viewed as a quotient of P (relators must already die)."""
    return FiniteQuotientMap(P, q.images, description=q.description)


def intersect(q1: FiniteQuotientMap, q2: FiniteQuotientMap,
              index_budget: int = DEFAULT_INDEX_BUDGET) -> FiniteQuotientMap:
    """Quotient whose kernel is ker(q1) & ker(q2) (diagonal action on pairs)."""
    if q1.alphabet != q2.alphabet:
        raise MalformedInputError("quotients live over different alphabets")
    d = len(q1.images)
    pos = {(0, 0): 0}
    pts = [(0, 0)]
    dq = deque(pts)
    while dq:
        a, b = dq.popleft()
        for g in range(d):
            for (x, y) in ((q1.images[g][a], q2.images[g][b]),
                           (q1.inverse_images[g][a], q2.inverse_images[g][b])):
                if (x, y) not in pos:
                    pos[(x, y)] = len(pts)
                    pts.append((x, y))
                    if len(pts) > index_budget:
                        raise ResourceLimitError("intersection exceeds the index budget",
                                                 required=None, budget=index_budget)
                    dq.append((x, y))
    images = [[pos[(q1.images[g][a], q2.images[g][b])] for a, b in pts] for g in range(d)]
    return FiniteQuotientMap(q1.source, images, description={"target_kind": "permutation", "parameters": {}})


def factor_map(fine, coarse) -> list[int]:
    """psi with psi(c.g) = psi(c).g, proving ker(fine) <= ker(coarse)."""
    parent, order = fine._bfs
    psi = [0] * fine.order
    for c in order[1:]:
        prev, a = parent[c]
        psi[c] = coarse.step(psi[prev], a)
    for g in range(len(fine.images)):
        for c in range(fine.order):
            if psi[fine.images[g][c]] != coarse.images[g][psi[c]]:
                raise NestingError("kernel of the finer quotient is not contained in the coarser one")
    return psi


# ----------------------------------------------------- subgroup presentations

@dataclass
class SubgroupPresentation:
    """Presentation of ker(q) on Schreier generators."""

    presentation: Presentation
    quotient: FiniteQuotientMap
    relator_origin: list = field(default_factory=list)  # (ambient relator index, conjugator letters)

    @property
    def transversal(self):
        return self.quotient.transversal

    def inclusion(self, k: int) -> Word:
        return self.quotient.schreier_word(k)

    @property
    def inclusions(self) -> list[Word]:
        return [self.inclusion(k) for k in range(self.presentation.generators)]


def _schreier_alphabet(q: FiniteQuotientMap) -> Alphabet | None:
    pairs = q.schreier_pairs
    if not pairs:
        return None
    names = q.alphabet.names
    return Alphabet(tuple(f"s{c}_{names[g - 1]}" for c, g in pairs))


def reidemeister_schreier(q: FiniteQuotientMap) -> SubgroupPresentation:
    """Kernel presentation: Schreier generators and rewritten t_c r t_c^-1."""
    alpha = _schreier_alphabet(q)
    rels, origin = [], []
    if alpha is None:
        # kernel of a finite quotient of a free group is never trivial unless
        # the source itself is; keep a placeholder generator-free record
        alpha = Alphabet(("s_empty",))
        return SubgroupPresentation(Presentation(alpha, []), q, origin)
    for i, r in enumerate(q.source.relators):
        for c in range(q.order):
            w, _ = q.rewrite(r.letters, c)
            word = Word(alpha, w)
            if not word.is_identity():
                rels.append(word)
                origin.append((i, q.transversal_letters(c)))
    return SubgroupPresentation(Presentation(alpha, rels), q, origin)


def schreier_rank(q) -> int:
    return q.schreier_rank


# ------------------------------------------------------------- p-power roots

def e_p_in_subgroup(q, r: Word, p: int) -> int:
    """e_p(r, F_H) for r in the kernel F_H of q, by walking the root chain."""
    if not q.membership(r):
        raise DomainError("relator does not lie in the kernel")
    base, e, _ = root_letters(r.letters, p)
    # p^j-th root of r is conj * base^(p^(e-j)) * conj^-1; normality lets us drop conj
    for j in range(e, -1, -1):
        if q.membership(base * (p ** (e - j))):
            return j
    return 0  # unreachable: j = 0 is r itself


@dataclass(frozen=True)
class RelatorCount:
    relator: int
    e_outer: int
    e_inner: int
    count: int
    conjugators: tuple = ()


@dataclass(frozen=True)
class RelatorCountCertificate:
    index: int
    p: int
    entries: tuple[RelatorCount, ...]

    @property
    def total(self) -> int:
        return sum(e.count for e in self.entries)

    def to_record(self) -> dict:
        return {"index": self.index, "p": self.p,
                "entries": [{"relator": e.relator, "e_outer": e.e_outer, "e_inner": e.e_inner,
                             "count": e.count} for e in self.entries]}


def _orbit_representatives(q: FiniteQuotientMap, w_letters) -> list[int]:
    L = q.left_multiplication(w_letters)
    seen = [False] * q.order
    reps = []
    for c in range(q.order):
        if not seen[c]:
            reps.append(c)
            x = c
            while not seen[x]:
                seen[x] = True
                x = L[x]
    return reps


def relator_count_certificate(q, p: int, with_conjugators: bool = False) -> RelatorCountCertificate:
    """Relator counts of the refined kernel presentation.

    For each ambient relator r = w^(p^e), the count is the number of right
    cosets of <w> F_H in F, measured by the orbits of left multiplication by
    w (or by the order of w when the quotient is lazy).
    """
    if not is_prime_power(q.order, p):
        raise DomainError(f"index {q.order} is not a power of {p}")
    entries = []
    for i, r in enumerate(q.source.relators):
        base, e, conj = root_letters(r.letters, p)
        e_in = e_p_in_subgroup(q, r, p)
        w = conj + base + tuple(-a for a in reversed(conj))
        conjugators: tuple = ()
        if isinstance(q, FiniteQuotientMap):
            reps = _orbit_representatives(q, w)
            count = len(reps)
            if with_conjugators:
                conjugators = tuple(q.transversal_letters(c) for c in reps)
        else:
            count = q.order // q.element_order(w)
        entries.append(RelatorCount(i, e, e_in, count, conjugators))
    return RelatorCountCertificate(q.order, p, tuple(entries))


def refined_presentation(q: FiniteQuotientMap, p: int) -> tuple[SubgroupPresentation, RelatorCountCertificate]:
    """Kernel presentation with [G:H]/p^(e(r,F)-e(r,F_H)) conjugates t^-1 r t per relator."""
    cert = relator_count_certificate(q, p, with_conjugators=True)
    alpha = _schreier_alphabet(q) or Alphabet(("s_empty",))
    rels, origin = [], []
    for entry in cert.entries:
        r = q.source.relators[entry.relator].letters
        for t in entry.conjugators:
            ti = tuple(-a for a in reversed(t))
            w, end = q.rewrite(ti + r + t, 0)
            assert end == 0
            rels.append(Word(alpha, w))
            origin.append((entry.relator, t))
    return SubgroupPresentation(Presentation(alpha, rels), q, origin), cert


def refined_deficiency(q, p: int) -> int:
    """Deficiency of the refined kernel presentation, from counts alone."""
    cert = relator_count_certificate(q, p)
    gens = 1 + q.order * (q.source.generators - 1)
    return gens - cert.total


# interface names used by earlier callers
PuchtaCertificate = RelatorCountCertificate
puchta_presentation = refined_presentation
