"""Descending finite-index normal chains and their normalized Betti numbers."""
from __future__ import annotations

import csv
import io
import json
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Sequence

from .errors import DomainError, MalformedInputError, NestingError, ResourceLimitError
from .homology import invariants_from_matrix
from .presentations import Presentation
from .quotients import (DEFAULT_INDEX_BUDGET, FiniteQuotientMap, abelian_extension, extension_size,
                        factor_map, is_prime_power, quotient_from_images, trivial_quotient)
from .words import format_word

DEFAULT_MATRIX_BUDGET = 4000


@dataclass
class Chain:
    base: Presentation
    levels: list[FiniteQuotientMap]
    nesting_proofs: list[list[int]] = field(default_factory=list)
    truncated: bool = False
    truncation: str | None = None
    kind: str = "custom"
    parameters: dict = field(default_factory=dict)

    @classmethod
    def from_levels(cls, base, levels, **kw) -> "Chain":
        proofs = []
        for a, b in zip(levels, levels[1:]):
            if b.order % a.order:
                raise NestingError(f"index {a.order} does not divide {b.order}")
            proofs.append(factor_map(b, a))
        return cls(base, list(levels), proofs, **kw)

    @property
    def indices(self) -> list[int]:
        return [q.order for q in self.levels]

    def is_p_chain(self, p: int) -> bool:
        return all(is_prime_power(n, p) for n in self.indices)

    def to_record(self) -> dict:
        return {"kind": self.kind, "parameters": self.parameters,
                "presentation": self.base.to_record(),
                "indices": self.indices, "truncated": self.truncated,
                "truncation": self.truncation}


def cyclic_chain(P: Presentation, weights: Sequence[int], moduli: Sequence[int]) -> Chain:
    """Preimages of n_i Z under the homomorphism generator -> weight."""
    if len(weights) != P.generators:
        raise MalformedInputError(f"need {P.generators} weights, got {len(weights)}")
    for i, r in enumerate(P.relators):
        s = sum(weights[abs(a) - 1] * (1 if a > 0 else -1) for a in r.letters)
        if s:
            raise DomainError(f"weights do not kill relator {i} ({format_word(r)}): exponent sum {s}")
    moduli = [int(n) for n in moduli]
    for a, b in zip(moduli, moduli[1:]):
        if b % a:
            raise DomainError(f"moduli must form a divisibility chain; {a} does not divide {b}")
    levels = [trivial_quotient(P)]
    for n in moduli:
        levels.append(quotient_from_images(P, "cyclic", list(weights), n=n))
    return Chain.from_levels(P, levels, kind="cyclic",
                             parameters={"weights": list(weights), "moduli": moduli})


def derived_p_step(P: Presentation, q: FiniteQuotientMap, p: int,
                   index_budget: int = DEFAULT_INDEX_BUDGET) -> FiniteQuotientMap:
    """Quotient with kernel [G_i, G_i] G_i^p where G_i = ker q.

    Points are pairs (coset of G_i, vector of H_1(G_i; F_p)); generator g maps
    (c, v) to (c.g, v + image of the Schreier element t_c g t_(c.g)^-1).
    """
    if q.source != P:
        raise MalformedInputError("quotient is not a quotient of this presentation")
    if q.order > 1 and not is_prime_power(q.order, p):
        raise DomainError(f"index {q.order} is not a power of {p}")
    size = extension_size(q, p, 1)
    if q.order * size > index_budget:
        raise ResourceLimitError(
            f"next derived {p}-series level has index {q.order * size} > budget {index_budget}",
            required=q.order * size, budget=index_budget)
    return abelian_extension(q, p, 1).materialize(index_budget)


def derived_p_series(P: Presentation, p: int, depth: int,
                     index_budget: int = DEFAULT_INDEX_BUDGET) -> Chain:
    if depth < 1:
        raise DomainError("depth must be at least 1")
    levels = [trivial_quotient(P)]
    truncated, note = False, None
    for _ in range(depth):
        try:
            levels.append(derived_p_step(P, levels[-1], p, index_budget))
        except ResourceLimitError as exc:
            truncated = True
            note = (f"stopped after index {levels[-1].order}: next index "
                    f"{describe_index(exc.required, p)} exceeds {index_budget}")
            break
    chain = Chain.from_levels(P, levels, truncated=truncated, truncation=note, kind="derived_p",
                              parameters={"p": p, "depth": depth, "index_budget": index_budget})
    return chain


def describe_index(n: int, p: int) -> str:
    """Exact text for an index, as a power of p when it is one and too long to print."""
    if n < 10 ** 12 or not is_prime_power(n, p):
        return str(n)
    k = 0
    while n > 1:
        n //= p
        k += 1
    return f"{p}^{k}"


# ----------------------------------------------------------------- reports

@dataclass(frozen=True)
class ReferenceConstants:
    b1_l2: Fraction | None = None

    def __post_init__(self):
        if self.b1_l2 is not None:
            object.__setattr__(self, "b1_l2", Fraction(self.b1_l2))
            if self.b1_l2 < 0:
                raise DomainError("an L2-Betti number is non-negative")


@dataclass
class ReportRow:
    i: int
    index: int
    b1_rational: int
    b1_mod: dict
    d_H1: int
    rank_upper: int
    rank_lower: int
    ratios: dict
    rg_upper: Fraction
    ref_gap: dict = field(default_factory=dict)


@dataclass
class ChainReport:
    rows: list[ReportRow]
    primes: list[int]
    refs: ReferenceConstants
    truncated: bool = False
    truncation: str | None = None
    chain_kind: str = "custom"
    note: str = ("finite prefix only; trivial intersection of the chain is not verified "
                 "(for a derived p-series it holds exactly when the group is residually p)")

    def column(self, name: str, p: int | None = None) -> list:
        if name == "b1_mod":
            return [r.b1_mod[p] for r in self.rows]
        return [getattr(r, name) for r in self.rows]

    def to_json_record(self) -> dict:
        def frac(x):
            x = Fraction(x)
            return {"num": x.numerator, "den": x.denominator}

        rows = []
        for r in self.rows:
            rows.append({
                "i": r.i, "index": r.index, "b1_rational": r.b1_rational,
                "b1_mod": {str(p): v for p, v in sorted(r.b1_mod.items())},
                "d_H1": r.d_H1, "rank_upper": r.rank_upper, "rank_lower": r.rank_lower,
                "ratios": {k: frac(v) for k, v in r.ratios.items()},
                "rg_upper": frac(r.rg_upper),
                "ref_gap": {k: frac(v) for k, v in r.ref_gap.items()},
            })
        return {"chain_kind": self.chain_kind, "primes": self.primes,
                "b1_l2_reference": None if self.refs.b1_l2 is None else frac(self.refs.b1_l2),
                "truncated": self.truncated, "truncation": self.truncation,
                "note": self.note, "rows": rows}

    def to_json(self) -> str:
        return json.dumps(self.to_json_record(), sort_keys=True, indent=2)

    def to_csv(self) -> str:
        """Decimal rendering (12 digits); display only, the JSON form is exact."""
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        ratio_keys = list(self.rows[0].ratios) if self.rows else []
        w.writerow(["i", "index", "b1_rational"] + [f"b1_mod_{p}" for p in self.primes]
                   + ["d_H1", "rank_lower", "rank_upper"] + [f"ratio_{k}" for k in ratio_keys]
                   + ["rg_upper", "display_only"])
        for r in self.rows:
            w.writerow([r.i, r.index, r.b1_rational] + [r.b1_mod[p] for p in self.primes]
                       + [r.d_H1, r.rank_lower, r.rank_upper]
                       + [f"{float(r.ratios[k]):.12g}" for k in ratio_keys]
                       + [f"{float(r.rg_upper):.12g}", "yes"])
        return buf.getvalue()

    def to_text(self) -> str:
        lines = []
        for r in self.rows:
            mods = " ".join(f"b1(F_{p})={v}" for p, v in sorted(r.b1_mod.items()))
            lines.append(f"level {r.i}: index {r.index}  b1={r.b1_rational}  {mods}  d(H1)={r.d_H1}"
                         f"  rank in [{r.rank_lower}, {r.rank_upper}]")
        if self.truncated:
            lines.append(f"truncated: {self.truncation}")
        return "\n".join(lines)


def level_invariants(q: FiniteQuotientMap, primes: Sequence[int],
                     matrix_budget: int = DEFAULT_MATRIX_BUDGET):
    M = q.kernel_relator_matrix()
    if M.rows > matrix_budget or M.cols > matrix_budget:
        raise ResourceLimitError(
            f"relator matrix {M.rows}x{M.cols} exceeds matrix budget {matrix_budget}",
            required=max(M.rows, M.cols), budget=matrix_budget)
    return invariants_from_matrix(M, M.cols, primes)


def report(chain: Chain, primes: Sequence[int] = (), refs: ReferenceConstants | None = None,
           matrix_budget: int = DEFAULT_MATRIX_BUDGET) -> ChainReport:
    """Exact per-level b1 over Q and F_p, d(H_1) and Schreier rank bounds."""
    refs = refs or ReferenceConstants()
    primes = sorted(set(int(p) for p in primes))
    rows = []
    truncated, note = chain.truncated, chain.truncation
    for i, q in enumerate(chain.levels):
        try:
            inv = level_invariants(q, primes, matrix_budget)
        except ResourceLimitError as exc:
            truncated = True
            note = f"level {i}: {exc}"
            break
        n = q.order
        rank_upper = q.schreier_rank
        b1_mod = {p: inv.betti(p) for p in primes}
        rank_lower = max([inv.free_rank] + list(b1_mod.values()))
        ratios = {"b1_rational": Fraction(inv.free_rank, n),
                  "d_H1": Fraction(inv.d_H1, n)}
        for p in primes:
            ratios[f"b1_mod_{p}"] = Fraction(b1_mod[p], n)
        gaps = {}
        if refs.b1_l2 is not None:
            gaps = {k: v - refs.b1_l2 for k, v in ratios.items() if k.startswith("b1")}
        rows.append(ReportRow(i, n, inv.free_rank, b1_mod, inv.d_H1, rank_upper, rank_lower,
                              ratios, Fraction(rank_upper - 1, n), gaps))
    return ChainReport(rows, primes, refs, truncated, note, chain.kind)


@dataclass(frozen=True)
class MonotoneCheck:
    monotone: bool
    first_violation: int | None


def check_fp_monotone(rep: ChainReport, p: int) -> MonotoneCheck:
    """b1(G_i; F_p)/[G:G_i] must be non-increasing along a p-chain."""
    if p not in rep.primes:
        raise DomainError(f"report does not contain F_{p} Betti numbers")
    for r in rep.rows:
        if not is_prime_power(r.index, p):
            raise DomainError(f"index {r.index} at level {r.i} is not a power of {p}")
    vals = [r.ratios[f"b1_mod_{p}"] for r in rep.rows]
    for i in range(1, len(vals)):
        if vals[i] > vals[i - 1]:
            return MonotoneCheck(False, rep.rows[i].i)
    return MonotoneCheck(True, None)


def index_inequality_holds(b1_G: int, b1_H: int, index: int) -> bool:
    """b1(H;F_p) - 1 <= [G:H] (b1(G;F_p) - 1) for H normal of p-power index."""
    return b1_H - 1 <= index * (b1_G - 1)


def check_index_inequality(rep: ChainReport, p: int) -> list[tuple[int, bool]]:
    """The inequality between consecutive levels of a p-chain."""
    out = []
    for a, b in zip(rep.rows, rep.rows[1:]):
        out.append((b.i, index_inequality_holds(a.b1_mod[p], b.b1_mod[p], b.index // a.index)))
    return out


def strict_inequality_flags(rep: ChainReport, p: int) -> list[bool]:
    """b1/n < b1(F_p)/n < d(H_1)/n < (rank_upper - 1)/n at each level past the base."""
    flags = []
    for r in rep.rows[1:]:
        a = r.ratios["b1_rational"]
        b = r.ratios[f"b1_mod_{p}"]
        c = r.ratios["d_H1"]
        flags.append(a < b < c < r.rg_upper)
    return flags
