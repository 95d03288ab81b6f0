"""Independent checkers for the six stage conditions of the staged construction.

Everything here works from the JSON record of a ConstructionState alone and
uses its own word parsing, coset action, rewriting and rank code, so a bug in
the builder cannot silently confirm itself.
"""
from __future__ import annotations

import json
import re
from collections import deque
from dataclasses import dataclass
from fractions import Fraction
from math import gcd

_TOKEN = re.compile(r"\s*([A-Za-z][A-Za-z0-9_]*)(?:\^(-?\d+))?\s*")


def _parse(text: str, names: list[str]) -> list[int]:
    """Words as printed by the package: name, name^k, joined by '*'."""
    index = {n: i + 1 for i, n in enumerate(names)}
    out: list[int] = []
    if text.strip() == "1":
        return out
    for part in text.split("*"):
        m = _TOKEN.fullmatch(part)
        if not m or m.group(1) not in index:
            raise ValueError(f"cannot read word {text!r}")
        g = index[m.group(1)]
        k = int(m.group(2) or 1)
        out.extend([g if k > 0 else -g] * abs(k))
    return _reduce(out)


def _reduce(w) -> list[int]:
    out: list[int] = []
    for a in w:
        if out and out[-1] == -a:
            out.pop()
        else:
            out.append(a)
    return out


def _inverse(w):
    return [-a for a in reversed(w)]


def _frac(r) -> Fraction:
    return Fraction(r["num"], r["den"])


# --------------------------------------------------------------- actions

class _Perm:
    def __init__(self, perms):
        self.f = [list(p) for p in perms]
        self.n = len(self.f[0]) if self.f else 1
        self.b = []
        for p in self.f:
            inv = [0] * self.n
            for c, x in enumerate(p):
                inv[x] = c
            self.b.append(inv)

    def act(self, w, c=0):
        for a in w:
            c = self.f[a - 1][c] if a > 0 else self.b[-a - 1][c]
        return c

    def trivial(self, w):
        return self.act(w) == 0

    def order_of(self, w):
        # right-regular action: the orbit of coset 0 under w has length ord(w)
        c, k = self.act(w), 1
        while c != 0:
            c, k = self.act(w, c), k + 1
        return k


class _Lazy:
    def __init__(self, rec):
        self.base = _Perm(rec["base"]["permutations"])
        self.mods = list(rec["moduli"])
        self.coc = rec["cocycle"]
        self.n = self.base.n
        for m in self.mods:
            self.n *= m

    def point(self, w, start=None):
        c, v = (0, [0] * len(self.mods)) if start is None else (start[0], list(start[1]))
        for a in w:
            if a > 0:
                v = [x + y for x, y in zip(v, self.coc[a - 1][c])]
                c = self.base.f[a - 1][c]
            else:
                c = self.base.b[-a - 1][c]
                v = [x - y for x, y in zip(v, self.coc[-a - 1][c])]
        return c, [x % m for x, m in zip(v, self.mods)]

    def trivial(self, w):
        c, v = self.point(w)
        return c == 0 and not any(v)

    def order_of(self, w):
        pt, k = self.point(w), 1
        while pt[0] != 0:
            pt, k = self.point(w, pt), k + 1
        o = 1
        for x, m in zip(pt[1], self.mods):
            o = o * (m // gcd(x, m)) // gcd(o, m // gcd(x, m))
        return k * o


def _action(rec):
    if rec.get("target_kind") == "lazy_extension":
        return _Lazy(rec)
    return _Perm(rec["permutations"])


# ----------------------------------------------------------- Schreier data

class _Schreier:
    """Spanning tree of the coset graph and abelianized rewriting."""

    def __init__(self, act: _Perm, d: int):
        self.a, self.d = act, d
        parent = {0: None}
        dq = deque([0])
        order = [0]
        while dq:
            c = dq.popleft()
            for g in range(1, d + 1):
                for s in (g, -g):
                    x = act.act([s], c)
                    if x not in parent:
                        parent[x] = (c, s)
                        order.append(x)
                        dq.append(x)
        if len(order) != act.n:
            raise ValueError("action is not transitive")
        tree = set()
        for c, pr in parent.items():
            if pr is None:
                continue
            prev, s = pr
            tree.add((prev, s) if s > 0 else (c, -s))
        self.cols = {}
        for c in range(act.n):
            for g in range(1, d + 1):
                if (c, g) not in tree:
                    self.cols[(c, g)] = len(self.cols)
        self.parent = parent

    @property
    def rank(self):
        return len(self.cols)

    def row(self, w, c=0):
        out: dict[int, int] = {}
        for a in w:
            if a > 0:
                k = self.cols.get((c, a))
                if k is not None:
                    out[k] = out.get(k, 0) + 1
                c = self.a.f[a - 1][c]
            else:
                c = self.a.b[-a - 1][c]
                k = self.cols.get((c, -a))
                if k is not None:
                    out[k] = out.get(k, 0) - 1
        return {k: v for k, v in out.items() if v}

    def path(self, c):
        w = []
        while self.parent[c] is not None:
            prev, s = self.parent[c]
            w.append(s)
            c = prev
        return list(reversed(w))

    def generator_words(self):
        out = []
        for (c, g) in self.cols:
            t = self.path(c)
            u = self.path(self.a.f[g - 1][c])
            out.append(_reduce(t + [g] + _inverse(u)))
        return out


def _rank(rows, ncols, field):
    """Exact rank over Q (fraction-free elimination) or over F_field."""
    M = [[r.get(j, 0) for j in range(ncols)] for r in rows]
    if field != "rational":
        M = [[x % field for x in r] for r in M]
    rank = 0
    for col in range(ncols):
        piv = next((i for i in range(rank, len(M)) if M[i][col]), None)
        if piv is None:
            continue
        M[rank], M[piv] = M[piv], M[rank]
        pv = M[rank][col]
        for i in range(rank + 1, len(M)):
            if M[i][col]:
                if field == "rational":
                    f = M[i][col]
                    row = [pv * x - f * y for x, y in zip(M[i], M[rank])]
                    g = 0
                    for x in row:
                        g = gcd(g, x)
                    M[i] = [x // g for x in row] if g > 1 else row
                else:
                    f = M[i][col] * pow(pv, -1, field) % field
                    M[i] = [(x - f * y) % field for x, y in zip(M[i], M[rank])]
        rank += 1
    return rank


def _image_action(act: _Perm, relators, d):
    """Quotient action of act by the normal closure of the relators (congruence closure)."""
    n = act.n
    uf = list(range(n))

    def find(x):
        while uf[x] != x:
            uf[x] = uf[uf[x]]
            x = uf[x]
        return x

    for r in relators:
        for c in range(n):
            a, b = find(c), find(act.act(r, c))
            if a != b:
                uf[max(a, b)] = min(a, b)
    changed = True
    while changed:
        changed = False
        for g in range(d):
            seen = {}
            for c in range(n):
                k, v = find(c), find(act.f[g][c])
                if k in seen and find(seen[k]) != v:
                    a, b = find(seen[k]), v
                    uf[max(a, b)] = min(a, b)
                    changed = True
                seen.setdefault(k, v)
    classes = sorted({find(c) for c in range(n)})
    label = {c: i for i, c in enumerate(classes)}
    perms = []
    for g in range(d):
        p = [0] * len(classes)
        for c in range(n):
            p[label[find(c)]] = label[find(act.f[g][c])]
        perms.append(p)
    # keep coset 0 at label 0 (class of 0 is the smallest representative, so label 0)
    return _Perm(perms)


def _root(w, p):
    """(cyclic core base, exponent e, conjugator) with w = conj base^(p^e) conj^-1."""
    w = list(w)
    conj = []
    while len(w) > 1 and w[0] == -w[-1]:
        conj.append(w[0])
        w = w[1:-1]
    e = 0
    while len(w) % p == 0 and w:
        m = len(w) // p
        if w[:m] * p == w:
            w = w[:m]
            e += 1
        else:
            break
    return w, e, conj


# ------------------------------------------------------------- conditions

@dataclass
class Verdict:
    condition: str
    stage: int
    ok: bool
    detail: str

    def to_record(self) -> dict:
        return {"condition": self.condition, "stage": self.stage, "ok": self.ok, "detail": self.detail}


def _stage_presentation(state, upto):
    names = state["generators"]
    rels = []
    for s in state["stages"][:upto]:
        rels += [_parse(r, names) for r in s["relators"]]
    return names, rels


def check_i(state, k) -> Verdict:
    """(def - 1)/index of the refined presentation of the even level exceeds d-1-eps."""
    st = state["stages"][k - 1]
    d, p = state["d"], state["p"]
    eps = _frac(state["epsilon"])
    names, rels = _stage_presentation(state, k)
    act = _image_action(_Perm(st["even_quotient"]["permutations"]), rels, d)
    n = act.n
    if _ppow(n, p) is None:
        return Verdict("i", k, False, f"index {n} is not a power of {p}")
    gens = 1 + n * (d - 1)
    count = 0
    for r in rels:
        base, e, conj = _root(r, p)
        w = conj + base + _inverse(conj)
        c = n // act.order_of(w)
        # consistency: c * p^(e - e_inner) must equal n
        e_in = max(j for j in range(e + 1) if act.trivial(conj + base * p ** (e - j) + _inverse(conj)))
        if c * p ** (e - e_in) != n:
            return Verdict("i", k, False, f"relator count mismatch for {r}")
        count += c
    deficiency = gens - count
    ratio = Fraction(deficiency - 1, n)
    bound = d - 1 - eps
    return Verdict("i", k, ratio > bound,
                   f"(def-1)/index = {deficiency - 1}/{n} = {ratio}; b1 >= def gives b1/index > {bound}")


def _ppow(n, p):
    k = 0
    while n > 1 and n % p == 0:
        n //= p
        k += 1
    return k if n == 1 else None


def check_ii(state, k) -> Verdict:
    st = state["stages"][k - 1]
    d = state["d"]
    field = state["field_mode"]
    delta = _frac(st["delta"])
    names, rels = _stage_presentation(state, k)
    act = _image_action(_Perm(st["odd_quotient"]["permutations"]), rels, d)
    sch = _Schreier(act, d)
    rows = [sch.row(r, c) for r in rels for c in range(act.n)]
    b1 = sch.rank - _rank(rows, sch.rank, field)
    ratio = Fraction(b1, act.n)
    fname = "Q" if field == "rational" else f"F_{field}"
    return Verdict("ii", k, ratio < delta, f"b1(.;{fname})/index = {b1}/{act.n} = {ratio} < {delta}")


def check_iii(state, k) -> Verdict:
    d = state["d"]
    names = state["generators"]
    st = state["stages"][k - 1]
    if k == 1:
        prev = _Perm([[0]] * d)
    else:
        prev = _Perm(state["stages"][k - 2]["even_quotient"]["permutations"])
    sch = _Schreier(prev, d)
    for r in st["relators"]:
        w = _parse(r, names)
        if not prev.trivial(w) or sch.row(w):
            return Verdict("iii", k, False, f"{r} is not in the commutator subgroup of level {2 * k - 2}")
    n = len(st["relators"])
    noun = "relator has" if n == 1 else "relators have"
    return Verdict("iii", k, True, f"{n} {noun} zero image in H_1 of level {2 * k - 2}")


def check_iv(state, k) -> Verdict:
    d, p = state["d"], state["p"]
    st = state["stages"][k - 1]
    fine = _Perm(st["even_quotient"]["permutations"])
    phi = _Perm(st["phi_quotient"]["permutations"])
    # nesting: a well-defined map fine-cosets -> phi-cosets commuting with generators
    sch = _Schreier(fine, d)
    psi = {c: phi.act(sch.path(c)) for c in range(fine.n)}
    for g in range(d):
        for c in range(fine.n):
            if psi[fine.f[g][c]] != phi.f[g][psi[c]]:
                return Verdict("iv", k, False, "even level is not contained in Phi")
    # Phi_k is the k-th derived p-series level of F
    prev = _Perm([[0]] * d) if k == 1 else _Perm(state["stages"][k - 2]["phi_quotient"]["permutations"])
    ps = _Schreier(prev, d)
    if phi.n != prev.n * p ** ps.rank:
        return Verdict("iv", k, False, f"Phi index {phi.n} != {prev.n} * {p}^{ps.rank}")
    gensw = ps.generator_words()
    for i, s in enumerate(gensw):
        if not phi.trivial(s * p):
            return Verdict("iv", k, False, "Phi quotient of the previous level is not of exponent p")
        for t in gensw[i + 1:]:
            if not phi.trivial(_reduce(s + t + _inverse(s) + _inverse(t))):
                return Verdict("iv", k, False, "Phi quotient of the previous level is not abelian")
    return Verdict("iv", k, True, f"index {fine.n} level maps onto Phi (index {phi.n})")


def check_v(state, k) -> Verdict:
    d, p = state["d"], state["p"]
    eps = _frac(state["epsilon"])
    names, rels = _stage_presentation(state, k)
    total = Fraction(d - 1)
    for r in rels:
        total -= Fraction(1, p ** _root(r, p)[1])
    return Verdict("v", k, total > d - 1 - eps, f"def_p = {total} > {d - 1 - eps}")


def check_vi(state, k) -> Verdict:
    p = state["p"]
    cert = state.get("certificate")
    if k != len(state["stages"]):
        return Verdict("vi", k, True, "certificate replayed at the final stage only")
    if not cert or cert.get("status") != "Certified":
        return Verdict("vi", k, False, "no certified witness")
    names, rels = _stage_presentation(state, k)
    act = _action(cert["witness"])
    if _ppow(act.n, p) is None:
        return Verdict("vi", k, False, f"witness index {act.n} is not a power of {p}")
    for r in rels:
        if not act.trivial(r):
            return Verdict("vi", k, False, "a relator survives in the witness")
    for r in rels:
        base, e, conj = _root(r, p)
        if e >= 1 and act.trivial(conj + base * p ** (e - 1) + _inverse(conj)):
            return Verdict("vi", k, False, "a p-th root dies in the witness")
    return Verdict("vi", k, True, f"all p-th roots survive in a quotient of order {act.n}")


CHECKS = {"i": check_i, "ii": check_ii, "iii": check_iii, "iv": check_iv, "v": check_v, "vi": check_vi}


def verify_state(state) -> list[Verdict]:
    """Check every condition at every completed stage of a serialized state."""
    if isinstance(state, str):
        state = json.loads(state)
    out = []
    for k in range(1, len(state["stages"]) + 1):
        for name, fn in CHECKS.items():
            try:
                out.append(fn(state, k))
            except Exception as exc:  # a crash is a failed verification, not a pass
                out.append(Verdict(name, k, False, f"verifier error: {exc}"))
    return out
