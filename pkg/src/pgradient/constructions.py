"""Explicit group constructions: the free-product family with distinct Q- and
F_p-approximations, small-cancellation variants, p-regularity witnesses, and
the staged construction of a group whose Betti ratios oscillate."""
from __future__ import annotations

import json
import random
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, Sequence

from .chains import Chain, cyclic_chain, derived_p_step, describe_index
from .errors import (DomainError, InvariantViolation, MalformedInputError, NotAHomomorphismError,
                     ResourceLimitError)
from .homology import IntMatrix, rank_mod_p, smith_normal_form
from .presentations import Presentation, SmallCancellationResult, small_cancellation_check
from .quotients import (DEFAULT_INDEX_BUDGET, AbelianExtension, FiniteQuotientMap,
                        abelian_extension, e_p_in_subgroup, extension_size, factor_map,
                        impose_relators, intersect, is_prime_power, relator_count_certificate,
                        refined_deficiency, quotient_from_record, trivial_quotient)
from .words import Alphabet, Word, format_word, root_letters

CERTIFIED = "Certified"
UNKNOWN = "Unknown"


def _is_prime(n: int) -> bool:
    if n < 2:
        return False
    k = 2
    while k * k <= n:
        if n % k == 0:
            return False
        k += 1
    return True


def _check_prime(p: int, what: str = "p"):
    if not _is_prime(p):
        raise DomainError(f"{what} = {p} is not prime")


def _inv(letters):
    return tuple(-a for a in reversed(letters))


def _letter_key(a: int):
    return (abs(a), a < 0)


def _word_key(w: Word):
    return (len(w), tuple(_letter_key(a) for a in w.letters))


# ------------------------------------------------------ free-product family

def free_product_counterexample(p: int, q: int, moduli: Sequence[int]) -> tuple[Presentation, Chain]:
    """< x, y, z, t | x^p, y^q, z^q > with the cyclic chain on t."""
    _check_prime(p)
    _check_prime(q, "q")
    if p == q:
        raise DomainError("p and q must be distinct primes")
    P = Presentation.from_strings(["x", "y", "z", "t"], [f"x^{p}", f"y^{q}", f"z^{q}"])
    return P, cyclic_chain(P, [0, 0, 0, 1], moduli)


@dataclass(frozen=True)
class ClosedForms:
    b1: int
    b1_p: int
    b1_q: int
    d_H1: int
    rank_upper: int


def counterexample_closed_forms(n: int) -> ClosedForms:
    """Values at the index-n level: H_1 = Z + (Z/p)^n + (Z/q)^(2n), Schreier rank 1 + 3n."""
    return ClosedForms(1, 1 + n, 1 + 2 * n, 1 + 2 * n, 1 + 3 * n)


# ------------------------------------------------ small-cancellation search

@dataclass
class SmallCancellationSearch:
    status: str
    u: Word | None
    v: Word | None
    w: Word | None
    presentation: Presentation | None
    check: SmallCancellationResult | None
    best_ratio: Fraction
    attempts: int
    length: int

    def to_record(self) -> dict:
        return {"status": self.status,
                "words": None if self.u is None else [format_word(x) for x in (self.u, self.v, self.w)],
                "presentation": None if self.presentation is None else self.presentation.to_record(),
                "worst_piece_ratio": {"num": self.best_ratio.numerator, "den": self.best_ratio.denominator},
                "attempts": self.attempts, "length": self.length}


def _balanced_word(rng: random.Random, length: int, d: int, avoid_first: int = 0, avoid_last: int = 0):
    """Random reduced word of even length with all exponent sums zero."""
    for _ in range(1000):
        half = length // 2
        counts: dict[int, int] = {}
        for _ in range(half):
            g = rng.randrange(1, d + 1)
            counts[g] = counts.get(g, 0) + 1
            counts[-g] = counts.get(-g, 0) + 1
        out: list[int] = []
        ok = True
        for i in range(length):
            cands = [a for a, k in counts.items() if k and (not out or a != -out[-1])]
            if i == 0 and avoid_first:
                cands = [a for a in cands if a != avoid_first]
            if i == length - 1:
                cands = [a for a in cands if a != -out[0] and a != avoid_last]
            if not cands:
                ok = False
                break
            cands.sort(key=_letter_key)
            a = rng.choices(cands, weights=[counts[c] for c in cands])[0]
            counts[a] -= 1
            out.append(a)
        if ok:
            return tuple(out)
    raise ResourceLimitError("could not sample a balanced reduced word")


def find_small_cancellation_words(seed: int, min_length: int = 24, p: int = 2, q: int = 3,
                                  attempts: int = 400, growth: int = 6,
                                  max_length: int | None = None) -> SmallCancellationSearch:
    """Search for u, v, w in [F, F] making < x, y, z | x^p u^-1, y^q v^-1, z^q w^-1 > C'(1/6).

    Words of length ``min_length`` are tried first; after every ``attempts``
    failures the length grows by ``growth`` until ``max_length``.
    """
    if min_length < 24:
        raise DomainError("min_length must be at least 24")
    max_length = max_length if max_length is not None else min_length + 8 * growth
    rng = random.Random(seed)
    a = Alphabet(("x", "y", "z"))
    best = Fraction(1)
    tried = 0
    length = min_length + (min_length % 2)
    while length <= max_length:
        for _ in range(attempts):
            tried += 1
            words = []
            for g, k in ((1, p), (2, q), (3, q)):
                # g^k u^-1 stays cyclically reduced when u neither starts nor ends with g
                words.append(Word(a, _balanced_word(rng, length, 3, avoid_first=g, avoid_last=g),
                                  reduced=True))
            rels = [Word(a, (g,) * k) * words[i].inverse() for i, (g, k) in enumerate(((1, p), (2, q), (3, q)))]
            if any(len(r) != len(words[i]) + k for i, (r, k) in enumerate(zip(rels, (p, q, q)))):
                continue
            P = Presentation(a, rels)
            res = small_cancellation_check(P, 1, 6)
            if res.worst_piece_ratio < best:
                best = res.worst_piece_ratio
            if res.satisfied:
                return SmallCancellationSearch(CERTIFIED, *words, P, res, res.worst_piece_ratio, tried, length)
        length += growth + (growth % 2)
    return SmallCancellationSearch(UNKNOWN, None, None, None, None, None, best, tried, length - growth)


# ------------------------------------------------------------ p-regularity

def _p_roots(P: Presentation, p: int) -> list[tuple[int, Word]]:
    """(relator index, p-th root) for every relator that is a proper p-th power."""
    out = []
    for i, r in enumerate(P.relators):
        base, e, conj = root_letters(r.letters, p)
        if e >= 1:
            body = base * (p ** (e - 1))
            out.append((i, Word(P.alphabet, conj + body + _inv(conj))))
    return out


@dataclass
class RegularityCertificate:
    status: str
    p: int
    witness: object | None = None  # FiniteQuotientMap or AbelianExtension
    survivors: list = field(default_factory=list)
    searched: list = field(default_factory=list)
    note: str = ""

    @property
    def certified(self) -> bool:
        return self.status == CERTIFIED

    @property
    def witness_index(self) -> int | None:
        return None if self.witness is None else self.witness.order

    def to_record(self) -> dict:
        return {"status": self.status, "p": self.p,
                "witness": None if self.witness is None else self.witness.to_record(),
                "witness_index": self.witness_index,
                "survivors": self.survivors, "searched": self.searched, "note": self.note}

    @classmethod
    def from_record(cls, P: Presentation, record: dict) -> "RegularityCertificate":
        w = record.get("witness")
        witness = None if w is None else quotient_from_record(P, w)
        return cls(record["status"], record["p"], witness, record.get("survivors", []),
                   record.get("searched", []), record.get("note", ""))


def _survivors(P: Presentation, p: int, q) -> list[dict] | None:
    out = []
    for i, root in _p_roots(P, p):
        if q.membership(root):
            return None
        out.append({"relator": i, "root": format_word(root), "order": q.element_order(root)})
    return out


def _relators_die(q, P: Presentation) -> bool:
    return all(q.membership(r) for r in P.relators)


def is_p_regular(P: Presentation, p: int, depth_budget: int = 3, e_max: int = 3,
                 index_budget: int = DEFAULT_INDEX_BUDGET,
                 extra_candidates: Sequence = ()) -> RegularityCertificate:
    """Semi-decide p-regularity: search quotients for one where every p-th root survives.

    Candidates are ``extra_candidates`` first, then for each derived p-series
    level L_k (k < depth_budget) the quotients with kernel [K,K]K^(p^e),
    K = ker L_k, for e = 1..e_max.
    """
    _check_prime(p)
    roots = _p_roots(P, p)
    if not roots:
        return RegularityCertificate(CERTIFIED, p, trivial_quotient(P), [],
                                     note="no relator is a proper p-th power")
    searched = []
    for q in extra_candidates:
        if q.source == P and is_prime_power(q.order, p) and _relators_die(q, P):
            s = _survivors(P, p, q)
            searched.append({"candidate": "supplied", "index": q.order, "ok": s is not None})
            if s is not None:
                return RegularityCertificate(CERTIFIED, p, q, s, searched)
    level = trivial_quotient(P)
    for k in range(depth_budget):
        for e in range(1, e_max + 1):
            try:
                ext = abelian_extension(level, p, e)
            except ResourceLimitError:
                break
            s = _survivors(P, p, ext)
            searched.append({"level": k, "e": e, "index": ext.order, "ok": s is not None})
            if s is not None:
                witness = ext.materialize(index_budget) if ext.order <= index_budget else ext
                return RegularityCertificate(CERTIFIED, p, witness, s, searched)
        try:
            level = derived_p_step(P, level, p, index_budget)
        except ResourceLimitError as exc:
            return RegularityCertificate(UNKNOWN, p, None, [], searched,
                                         note=f"derived series left the index budget: {exc}")
    return RegularityCertificate(UNKNOWN, p, None, [], searched,
                                 note=f"no witness within depth {depth_budget} and exponent {e_max}")


def verify_certificate(P: Presentation, cert: RegularityCertificate) -> bool:
    """Replay a certificate: p-power index, relators die, every p-th root survives."""
    if not cert.certified or cert.witness is None:
        return False
    q = cert.witness
    if not is_prime_power(q.order, cert.p) or not _relators_die(q, P):
        return False
    return _survivors(P, cert.p, q) is not None


def rebase_quotient(q, P: Presentation):
    """View a quotient of some presentation over the same alphabet as a quotient of P."""
    if q.alphabet != P.alphabet:
        raise MalformedInputError("alphabet mismatch")
    if isinstance(q, AbelianExtension):
        base = rebase_quotient(q.base, P)
        out = AbelianExtension(base, q.moduli, q.cocycle, q.modulus)
    else:
        for r in P.relators:
            if q.act(r.letters) != 0:
                raise NotAHomomorphismError(f"relator {format_word(r)} survives in the quotient", r)
        return FiniteQuotientMap(P, q.images, description=q.description, check=False)
    for r in P.relators:
        if not out.membership(r):
            raise NotAHomomorphismError(f"relator {format_word(r)} survives in the quotient", r)
    return out


def refined_count_check(P: Presentation, q, p: int) -> bool:
    """Certificate counts equal [G:H] / p^(e(r,F) - e(r,F_H)) for every relator."""
    if q.source != P:
        q = rebase_quotient(q, P)
    cert = relator_count_certificate(q, p)
    for entry in cert.entries:
        r = P.relators[entry.relator]
        if entry.e_outer != root_letters(r.letters, p)[1]:
            return False
        if entry.e_inner != e_p_in_subgroup(q, r, p):
            return False
        if entry.count * p ** (entry.e_outer - entry.e_inner) != q.order:
            return False
    return True


def supermultiplicativity_holds(P: Presentation, q, p: int) -> bool:
    """def(H) - 1 >= [G:H] (def(P) - 1) for the refined presentation of H = ker q."""
    return refined_deficiency(q, p) - 1 >= q.order * (P.deficiency - 1)


@dataclass
class PRegularSubgroup:
    status: str
    quotient: object | None
    index: int | None
    deficiency: int | None
    ratio: Fraction | None
    bound: Fraction
    holds: bool
    counts: object | None = None

    def to_record(self) -> dict:
        fr = lambda x: None if x is None else {"num": x.numerator, "den": x.denominator}
        return {"status": self.status, "index": self.index, "deficiency": self.deficiency,
                "ratio": fr(self.ratio), "bound": fr(self.bound), "holds": self.holds,
                "counts": None if self.counts is None else self.counts.to_record()}


def pregular_subgroup(P: Presentation, p: int, cert: RegularityCertificate,
                      depth_budget: int = 3) -> PRegularSubgroup:
    """Normal p-power-index H with (def(H) - 1)/[G:H] >= def_p, using the witness kernel."""
    if not cert.certified:
        raise DomainError("a Certified regularity certificate is required")
    bound = P.p_deficiency(p)
    q = cert.witness
    if q.source != P:
        q = rebase_quotient(q, P)
    if _survivors(P, p, q) is None:
        again = is_p_regular(P, p, depth_budget)
        if not again.certified:
            return PRegularSubgroup(UNKNOWN, None, None, None, None, bound, False)
        q = again.witness
    pc = relator_count_certificate(q, p)
    gens = 1 + q.order * (P.generators - 1)
    deficiency = gens - pc.total
    ratio = Fraction(deficiency - 1, q.order)
    return PRegularSubgroup(CERTIFIED, q, q.order, deficiency, ratio, bound, ratio >= bound, pc)


@dataclass
class AdjoinResult:
    status: str
    presentation: Presentation
    n_used: int | None
    certificate: RegularityCertificate
    relator: Word | None = None


def _order_exponent(q, w: Word, p: int) -> int:
    k = q.element_order(w)
    n = 0
    while k > 1:
        if k % p:
            raise InvariantViolation(f"element order {q.element_order(w)} in a {p}-group quotient")
        k //= p
        n += 1
    return n


def adjoin_power(P: Presentation, f: Word, p: int, start_n: int, cert: RegularityCertificate,
                 depth_budget: int = 3, e_max: int = 3, index_budget: int = DEFAULT_INDEX_BUDGET,
                 max_extra: int = 4) -> AdjoinResult:
    """Find n >= start_n with (X, R + {f^(p^n)}) certified p-regular.

    n starts at max(start_n, N) where p^N is the order of f in the current
    witness; with n = N that witness already certifies the new presentation.
    """
    if not cert.certified:
        raise DomainError("a Certified regularity certificate is required")
    if f.is_identity():
        raise DomainError("f must be a non-identity word")
    W = cert.witness
    N = _order_exponent(W, f, p)
    n = max(start_n, N)
    for n_try in range(n, n + max_extra + 1):
        rel = f ** (p ** n_try)
        P2 = P.with_relators([rel])
        extra = []
        try:
            extra.append(rebase_quotient(W, P2))
        except NotAHomomorphismError:
            pass
        # the new root has order p^(n + e_p(f)) at best, so look at least that deep
        e_need = max(e_max, n_try + root_letters(f.letters, p)[1])
        c2 = is_p_regular(P2, p, depth_budget, e_need, index_budget, extra_candidates=extra)
        if c2.certified:
            return AdjoinResult(CERTIFIED, P2, n_try, c2, rel)
    return AdjoinResult(UNKNOWN, P, None, RegularityCertificate(UNKNOWN, p, note="re-certification failed"))


# ---------------------------------------------------- killing excess homology

def free_level(q: FiniteQuotientMap) -> FiniteQuotientMap:
    """The same permutation action as a quotient of the free group."""
    F = Presentation.free(q.alphabet)
    return FiniteQuotientMap(F, q.images, description=q.description, check=False)


def split_basis(H_free: FiniteQuotientMap, K_free: FiniteQuotientMap) -> tuple[list[Word], list[Word]]:
    """Nielsen-transform the Schreier basis Y of ker(H) into Y1 + Y2 with Y2 in [K, K].

    Rows are images in ker(K)^ab; integer row reduction acts on the words.
    """
    rows = []
    for k in range(H_free.schreier_rank):
        y = H_free.schreier_word(k)
        vec = K_free.rewrite_abelian(y.letters)
        rows.append([y, dict(vec)])
    ncols = K_free.schreier_rank
    pivots = []
    active = list(range(len(rows)))
    for col in range(ncols):
        while True:
            nz = [i for i in active if rows[i][1].get(col, 0)]
            if not nz:
                break
            piv = min(nz, key=lambda i: (abs(rows[i][1][col]), i))
            if len(nz) == 1:
                active.remove(piv)
                pivots.append(piv)
                break
            pv = rows[piv][1][col]
            for i in nz:
                if i == piv:
                    continue
                k = rows[i][1][col] // pv
                if k == 0:
                    continue
                # row_i <- row_i - k row_piv ; word_i <- word_i * word_piv^-k
                rows[i][0] = rows[i][0] * (rows[piv][0] ** (-k))
                vec = rows[i][1]
                for c, v in rows[piv][1].items():
                    x = vec.get(c, 0) - k * v
                    if x:
                        vec[c] = x
                    else:
                        vec.pop(c, None)
    if any(rows[i][1] for i in active):
        raise InvariantViolation("Y2 element with non-zero image in K^ab")
    Y1 = [rows[i][0] for i in pivots]
    Y2 = [rows[i][0] for i in active]
    return Y1, sorted(Y2, key=_word_key)


def _field_rank(M: IntMatrix, field_mode) -> int:
    if field_mode == "rational":
        return smith_normal_form(M).rank
    return rank_mod_p(M, int(field_mode))


def betti_of_kernel(q: FiniteQuotientMap, field_mode="rational") -> int:
    M = q.kernel_relator_matrix()
    return M.cols - _field_rank(M, field_mode)


def _survives_in_h1(q: FiniteQuotientMap, f: Word, field_mode) -> bool:
    M = q.kernel_relator_matrix()
    v = q.rewrite_abelian(f.letters)
    M2 = IntMatrix(M.rows + 1, M.cols, list(M.data) + [v])
    return _field_rank(M2, field_mode) > _field_rank(M, field_mode)


@dataclass
class KillStep:
    f: str
    n: int
    e_p: int
    weight: Fraction
    b1_after: int
    witness_index: int


@dataclass
class KillReport:
    status: str  # "complete" or "partial"
    b1_initial: int
    b1_final: int
    d_K: int
    delta: Fraction
    spent: Fraction
    steps: list[KillStep]
    field_mode: object
    note: str = ""

    def to_record(self) -> dict:
        fr = lambda x: {"num": x.numerator, "den": x.denominator}
        return {"status": self.status, "b1_initial": self.b1_initial, "b1_final": self.b1_final,
                "d_K": self.d_K, "delta": fr(self.delta), "spent": fr(self.spent),
                "field_mode": self.field_mode, "note": self.note,
                "steps": [{"f": s.f, "n": s.n, "e_p": s.e_p, "weight": fr(s.weight),
                           "b1_after": s.b1_after, "witness_index": s.witness_index} for s in self.steps]}


def kill_excess_homology(P: Presentation, cert: RegularityCertificate, K_level: FiniteQuotientMap,
                         H_level: FiniteQuotientMap, delta, field_mode="rational", p: int | None = None,
                         depth_budget: int = 3, e_max: int = 3,
                         index_budget: int = DEFAULT_INDEX_BUDGET,
                         on_step: Callable | None = None):
    """Adjoin powers f^(p^n), f in [K, K], until b1 of the image of H is at most d(K).

    Returns (new relators, new presentation, final certificate, report).
    """
    p = p or cert.p
    delta = Fraction(delta)
    if delta <= 0:
        raise DomainError("delta must be positive")
    if not cert.certified:
        raise DomainError("a Certified regularity certificate is required")
    if field_mode != "rational":
        field_mode = int(field_mode)
        _check_prime(field_mode, "q")
        if field_mode == p:
            raise DomainError("the field characteristic must differ from p")
    Kf, Hf = free_level(K_level), free_level(H_level)
    if not (is_prime_power(Kf.order, p) and is_prime_power(Hf.order, p)):
        raise DomainError("both levels need p-power index")
    factor_map(Hf, Kf)  # raises NestingError unless ker H <= ker K
    d_K = Kf.schreier_rank
    H_cur = impose_relators(Hf, P)
    if H_cur.order != Hf.order:
        raise DomainError("relators of P do not lie in the kernel of H_level")
    b1 = b1_initial = betti_of_kernel(H_cur, field_mode)
    steps: list[KillStep] = []
    new_rels: list[Word] = []
    spent = Fraction(0)
    if b1 <= d_K:
        return [], P, cert, KillReport("complete", b1, b1, d_K, delta, spent, steps, field_mode)
    delta_step = delta / (b1_initial - d_K)
    _, Y2 = split_basis(Hf, Kf)
    P_cur, cert_cur = P, cert
    while b1 > d_K:
        f = next((y for y in Y2 if _survives_in_h1(H_cur, y, field_mode)), None)
        if f is None:
            raise InvariantViolation("b1 exceeds d(K) but every Y2 element dies in H_1")
        e_f = root_letters(f.letters, p)[1]
        n_min = 0
        while Fraction(1, p ** (n_min + e_f)) >= delta_step:
            n_min += 1
        res = adjoin_power(P_cur, f, p, max(n_min, 1), cert_cur, depth_budget, e_max, index_budget)
        if res.status != CERTIFIED:
            return new_rels, P_cur, cert_cur, KillReport(
                "partial", b1_initial, b1, d_K, delta, spent, steps, field_mode,
                note=f"p-regularity could not be re-certified after adjoining a power of {format_word(f)}")
        rel = res.relator
        weight = Fraction(1, p ** root_letters(rel.letters, p)[1])
        P_cur, cert_cur = res.presentation, res.certificate
        new_rels.append(rel)
        spent += weight
        H_cur = impose_relators(Hf, P_cur)
        if H_cur.order != Hf.order:
            raise InvariantViolation("adjoined relator left the kernel of H")
        b1_new = betti_of_kernel(H_cur, field_mode)
        if b1_new >= b1:
            raise InvariantViolation(f"b1 did not drop after adjoining {format_word(rel)}")
        b1 = b1_new
        step = KillStep(format_word(f), res.n_used, e_f, weight, b1, cert_cur.witness_index)
        steps.append(step)
        if on_step:
            on_step(step)
    if spent >= delta:
        raise InvariantViolation("spent budget reached delta")
    return new_rels, P_cur, cert_cur, KillReport("complete", b1_initial, b1, d_K, delta, spent,
                                                 steps, field_mode)


# ------------------------------------------------------------ staged driver

def default_delta_schedule(n: int) -> Fraction:
    """delta_n = (3/4) 2^(1-n)."""
    return Fraction(3, 4) / 2 ** (n - 1)


@dataclass
class Budgets:
    index_budget: int = DEFAULT_INDEX_BUDGET
    matrix_budget: int = 4000
    depth_budget: int = 3
    e_max: int = 3
    max_e_step: int = 6

    def to_record(self) -> dict:
        return dict(self.__dict__)


def _frac(x) -> dict:
    x = Fraction(x)
    return {"num": x.numerator, "den": x.denominator}


def _unfrac(r) -> Fraction:
    return Fraction(r["num"], r["den"])


@dataclass
class StageRecord:
    n: int
    delta: Fraction
    e: int
    relators: list[str]
    odd_quotient: dict
    even_quotient: dict
    phi_quotient: dict
    measurements: dict
    checks: dict

    def to_record(self) -> dict:
        return {"n": self.n, "delta": _frac(self.delta), "e": self.e, "relators": self.relators,
                "odd_quotient": self.odd_quotient, "even_quotient": self.even_quotient,
                "phi_quotient": self.phi_quotient, "measurements": self.measurements,
                "checks": self.checks}

    @classmethod
    def from_record(cls, r: dict) -> "StageRecord":
        return cls(r["n"], _unfrac(r["delta"]), r["e"], r["relators"], r["odd_quotient"],
                   r["even_quotient"], r["phi_quotient"], r["measurements"], r["checks"])


@dataclass
class ConstructionState:
    d: int
    p: int
    epsilon: Fraction
    field_mode: object
    seed: int
    budgets: Budgets
    stages: list[StageRecord] = field(default_factory=list)
    certificate: dict | None = None
    status: str = "running"
    failure: str | None = None

    @property
    def stage(self) -> int:
        return len(self.stages)

    @property
    def alphabet(self) -> Alphabet:
        return Alphabet.of_size(self.d)

    def relators(self) -> list[str]:
        return [r for s in self.stages for r in s.relators]

    def presentation(self) -> Presentation:
        a = self.alphabet
        return Presentation.from_strings(a.names, self.relators())

    def to_record(self) -> dict:
        return {"d": self.d, "p": self.p, "epsilon": _frac(self.epsilon),
                "field_mode": self.field_mode, "seed": self.seed,
                "budgets": self.budgets.to_record(),
                "generators": list(self.alphabet.names),
                "stages": [s.to_record() for s in self.stages],
                "certificate": self.certificate, "status": self.status, "failure": self.failure}

    def to_json(self) -> str:
        return json.dumps(self.to_record(), sort_keys=True)

    @classmethod
    def from_record(cls, r: dict) -> "ConstructionState":
        return cls(r["d"], r["p"], _unfrac(r["epsilon"]), r["field_mode"], r["seed"],
                   Budgets(**r["budgets"]), [StageRecord.from_record(s) for s in r["stages"]],
                   r.get("certificate"), r.get("status", "running"), r.get("failure"))


@dataclass
class DriverResult:
    state: ConstructionState
    log: list[dict]

    def log_lines(self) -> str:
        return "".join(json.dumps(rec, sort_keys=True) + "\n" for rec in self.log)


def _b1_ratio(q_free: FiniteQuotientMap, P: Presentation, field_mode, matrix_budget: int):
    q = impose_relators(q_free, P)
    M = q.kernel_relator_matrix()
    if M.cols > matrix_budget or M.rows > matrix_budget:
        raise ResourceLimitError(f"relator matrix {M.rows}x{M.cols} exceeds {matrix_budget}",
                                 required=max(M.rows, M.cols), budget=matrix_budget)
    b1 = M.cols - _field_rank(M, field_mode)
    return b1, q.order


def staged_driver(d: int, p: int, epsilon, delta_schedule: Callable[[int], Fraction] | Sequence | None = None,
                     stages: int = 1, budgets: Budgets | None = None, seed: int = 0,
                     field_mode="rational", state: ConstructionState | None = None,
                     log_sink: Callable[[dict], None] | None = None) -> DriverResult:
    """Run the staged construction; every stage records the six conditions it establishes.

    Level 2N+1 is [F_2N, F_2N] F_2N^(p^e) with the least e making d(F_2N)/index < delta;
    R_(N+1) kills excess homology there; level 2N+2 is the kernel of a regularity
    witness intersected with level 2N+1 and Phi_(N+1), the (N+1)-th derived p-series
    level of F.  Budget exhaustion ends the run with a partial state naming the cause.
    """
    _check_prime(p)
    epsilon = Fraction(epsilon)
    if d < 2:
        raise DomainError("d must be at least 2")
    if not 0 < epsilon < 1:
        raise DomainError("epsilon must lie strictly between 0 and 1")
    if stages < 1:
        raise DomainError("stages must be at least 1")
    if field_mode != "rational":
        field_mode = int(field_mode)
        _check_prime(field_mode, "q")
        if field_mode == p:
            raise DomainError("field characteristic must differ from p")
    budgets = budgets or Budgets()
    if delta_schedule is None:
        delta_of = default_delta_schedule
    elif callable(delta_schedule):
        delta_of = lambda n: Fraction(delta_schedule(n))
    else:
        seq = [Fraction(x) for x in delta_schedule]
        delta_of = lambda n: seq[n - 1]
    log: list[dict] = []

    def emit(action, affects=(), **data):
        rec = {"seq": len(log), "action": action, "affects": list(affects)}
        rec.update(data)
        log.append(rec)
        if log_sink:
            log_sink(rec)

    st = state or ConstructionState(d, p, epsilon, field_mode, seed, budgets)
    F = Presentation.free(d)
    emit("start", d=d, p=p, epsilon=_frac(epsilon), field_mode=field_mode, seed=seed,
         resume_from=st.stage, budgets=budgets.to_record())

    # tower state
    P = st.presentation()
    if st.stages:
        even = FiniteQuotientMap.from_record(F, st.stages[-1].even_quotient)
        cert = RegularityCertificate.from_record(P, st.certificate)
    else:
        even = trivial_quotient(F)
        cert = is_p_regular(P, p)
    phi = trivial_quotient(F)
    for _ in range(st.stage):
        phi = derived_p_step(F, phi, p, budgets.index_budget)

    def fail(msg):
        st.status = "partial"
        st.failure = msg
        emit("stop", failure=msg)
        return DriverResult(st, log)

    target = st.stage + stages
    while st.stage < target:
        N = st.stage
        n = N + 1
        delta_n = delta_of(n)
        meas: dict = {}
        d_even = even.schreier_rank  # d(F_2N) for the free kernel
        # -- level 2N+1
        e = None
        odd = None
        for e_try in range(1, budgets.max_e_step + 1):
            try:
                size = extension_size(even, p, e_try)
                if even.order * size > budgets.index_budget:
                    return fail(f"stage {n}: level {2 * N + 1} index {describe_index(even.order * size, p)}"
                                f" exceeds budget {budgets.index_budget}")
                cand = abelian_extension(even, p, e_try).materialize(budgets.index_budget)
                img = impose_relators(cand, P)
            except ResourceLimitError as exc:
                return fail(f"stage {n}: level {2 * N + 1}: {exc}")
            if Fraction(d_even, img.order) < delta_n:
                e, odd = e_try, cand
                break
        if odd is None:
            return fail(f"stage {n}: no exponent e <= {budgets.max_e_step} meets delta")
        meas["d_F_even"] = d_even
        meas["odd_index"] = odd.order
        emit("odd_level", affects=["ii"], stage=n, e=e, index=odd.order, d_F_even=d_even,
             bound=_frac(Fraction(d_even, odd.order)), delta=_frac(delta_n))
        # -- relators R_(N+1)
        delta_kill = P.p_deficiency(p) - (d - 1 - epsilon)
        if delta_kill <= 0:
            return fail(f"stage {n}: p-deficiency already at or below d-1-epsilon")

        def step_log(s: KillStep):
            emit("adjoin", affects=["iii", "v", "vi"], stage=n, f=s.f, n=s.n,
                 weight=_frac(s.weight), b1_after=s.b1_after, witness_index=s.witness_index)

        try:
            new_rels, P_next, cert_next, kr = kill_excess_homology(
                P, cert, even, odd, delta_kill, field_mode, p, budgets.depth_budget, budgets.e_max,
                budgets.index_budget, on_step=step_log)
        except ResourceLimitError as exc:
            return fail(f"stage {n}: killing homology: {exc}")
        meas["kill"] = kr.to_record()
        if kr.status != "complete":
            return fail(f"stage {n}: {kr.note}")
        P, cert = P_next, cert_next
        emit("relators", affects=["iii", "v"], stage=n, relators=[format_word(r) for r in new_rels],
             p_deficiency=_frac(P.p_deficiency(p)))
        # -- level 2N+2
        pr = pregular_subgroup(P, p, cert, budgets.depth_budget)
        if pr.status != CERTIFIED or not pr.holds:
            return fail(f"stage {n}: no p-power subgroup with the deficiency bound")
        W = pr.quotient
        if isinstance(W, AbelianExtension):
            try:
                W = W.materialize(budgets.index_budget)
            except ResourceLimitError as exc:
                return fail(f"stage {n}: witness: {exc}")
        emit("witness", affects=["i", "vi"], stage=n, index=W.order, deficiency=pr.deficiency,
             ratio=_frac(pr.ratio))
        try:
            phi = derived_p_step(F, phi, p, budgets.index_budget)
            q_even = intersect(intersect(free_level(W), odd, budgets.index_budget), phi,
                               budgets.index_budget)
        except ResourceLimitError as exc:
            return fail(f"stage {n}: level {2 * N + 2}: {exc}")
        G_even = impose_relators(q_even, P)
        if not is_prime_power(G_even.order, p):
            raise InvariantViolation("even level index is not a p-power")
        def_even = refined_deficiency(G_even, p)
        meas["even_index_free"] = q_even.order
        meas["even_index"] = G_even.order
        meas["even_deficiency"] = def_even
        meas["even_ratio_lower"] = _frac(Fraction(def_even - 1, G_even.order))
        emit("even_level", affects=["i", "iv"], stage=n, index=G_even.order,
             deficiency=def_even, ratio_lower=_frac(Fraction(def_even - 1, G_even.order)),
             phi_index=phi.order)
        # -- builder-side checks (independent re-checks live in verifiers)
        b1_odd, idx_odd = _b1_ratio(odd, P, field_mode, budgets.matrix_budget)
        meas["odd_b1"] = b1_odd
        meas["odd_index_in_G"] = idx_odd
        checks = {
            "i": Fraction(def_even - 1, G_even.order) > d - 1 - epsilon,
            "ii": Fraction(b1_odd, idx_odd) < delta_n,
            "iii": all(not free_level(even).rewrite_abelian(r.letters) for r in new_rels),
            "iv": _nested(q_even, phi),
            "v": P.p_deficiency(p) > d - 1 - epsilon,
            "vi": verify_certificate(P, cert),
        }
        st.stages.append(StageRecord(n, delta_n, e, [format_word(r) for r in new_rels],
                                     odd.to_record(), q_even.to_record(), phi.to_record(),
                                     meas, checks))
        st.certificate = cert.to_record()
        emit("stage_complete", affects=list(checks), stage=n, checks=checks)
        if not all(checks.values()):
            bad = [k for k, v in checks.items() if not v]
            raise InvariantViolation(f"stage {n}: conditions {bad} failed after construction")
        even = q_even
    st.status = "complete"
    st.failure = None
    emit("done", stages=st.stage)
    return DriverResult(st, log)


def _nested(fine, coarse) -> bool:
    try:
        factor_map(fine, coarse)
        return True
    except Exception:
        return False


# interface names used by earlier callers
puchta_count_check = refined_count_check
theorem51_driver = staged_driver
