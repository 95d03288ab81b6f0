import random
from math import gcd

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from oracles import EnumeratedCokernel, det, divisors, predicted_count, rank_mod_p_brute, rational_rank
from pgradient import IntMatrix, abelian_invariants, parse_presentation, rank_mod_p, smith_normal_form
from pgradient.homology import cokernel_mod_prime_power, dense_rank_mod_p, rank_rational

small_matrices = st.integers(1, 4).flatmap(
    lambda m: st.integers(1, 4).flatmap(
        lambda n: st.lists(st.lists(st.integers(-5, 5), min_size=n, max_size=n), min_size=m, max_size=m)))


def _cols(M):
    return len(M[0])


def test_snf_known():
    assert smith_normal_form(IntMatrix.from_dense([[2, 4, 4], [-6, 6, 12], [10, -4, -16]])).diagonal == (2, 6, 12)
    assert smith_normal_form(IntMatrix.from_dense([[0, 0], [0, 0]])).diagonal == ()
    assert smith_normal_form(IntMatrix.from_dense([[6]])).diagonal == (6,)


@given(small_matrices)
def test_snf_diagonal_is_a_divisibility_chain(M):
    diag = smith_normal_form(IntMatrix.from_dense(M, _cols(M))).diagonal
    assert all(d > 0 for d in diag)
    assert all(b % a == 0 for a, b in zip(diag, diag[1:]))
    assert len(diag) == rational_rank(M, _cols(M))


@given(small_matrices)
def test_snf_determinant_for_square(M):
    if len(M) != _cols(M):
        return
    diag = smith_normal_form(IntMatrix.from_dense(M)).diagonal
    D = abs(det(M))
    if D:
        prod = 1
        for d in diag:
            prod *= d
        assert prod == D
    else:
        assert len(diag) < len(M)


@given(small_matrices, st.sampled_from([2, 3, 5, 7]))
def test_rank_mod_p_matches_elimination(M, p):
    n = _cols(M)
    assert rank_mod_p(IntMatrix.from_dense(M, n), p) == rank_mod_p_brute(M, p)
    assert dense_rank_mod_p(np.array(M), p) == rank_mod_p_brute(M, p)


def test_sparse_and_dense_rank_agree():
    rng = random.Random(4)
    for _ in range(5):
        rows = [{rng.randrange(250): rng.randrange(-3, 4) for _ in range(4)} for _ in range(220)]
        M = IntMatrix(220, 250, rows)
        dense = M.to_dense()
        for p in (2, 3):
            assert rank_mod_p(M, p) == rank_mod_p_brute(dense, p)
    assert rank_rational(IntMatrix.from_dense([[1, 2], [2, 4]])) == 1


def test_snf_against_enumerated_cokernels():
    rng = random.Random(11)
    checked = 0
    while checked < 60:
        m, n = rng.randint(1, 4), rng.randint(1, 3)
        M = [[rng.randint(-5, 5) for _ in range(n)] for _ in range(m)]
        if rational_rank(M, n) < n:
            continue
        try:
            C = EnumeratedCokernel(M, n, cap=3000)
        except OverflowError:
            continue
        factors = [d for d in smith_normal_form(IntMatrix.from_dense(M, n)).diagonal if d > 1]
        order = 1
        for f in factors:
            order *= f
        assert C.order == order
        for k in divisors(order):
            assert C.count_killed_by(k) == predicted_count(factors, k)
        checked += 1


@pytest.mark.parametrize("p,e", [(2, 1), (2, 3), (3, 2), (5, 1)])
def test_cokernel_mod_prime_power(p, e):
    rng = random.Random(p * 10 + e)
    m = p ** e
    for _ in range(40):
        rows, cols = rng.randint(1, 5), rng.randint(1, 5)
        M = [[rng.randint(-6, 6) for _ in range(cols)] for _ in range(rows)]
        cok = cokernel_mod_prime_power(IntMatrix.from_dense(M, cols), p, e)
        diag = smith_normal_form(IntMatrix.from_dense(M, cols)).diagonal
        expect = m ** (cols - len(diag))
        for d in diag:
            expect *= gcd(d, m)
        assert cok.order == expect
        assert all(mod > 1 and m % mod == 0 for mod in cok.moduli)
        for r in M:
            assert not any(cok.project(r))
        # the images generate: span of the projected unit vectors is everything
        seen = {tuple(0 for _ in cok.moduli)}
        frontier = list(seen)
        units = [cok.images[j] for j in range(cols)]
        while frontier:
            nxt = []
            for x in frontier:
                for u in units:
                    y = tuple((a + b) % md for a, b, md in zip(x, u, cok.moduli))
                    if y not in seen:
                        seen.add(y)
                        nxt.append(y)
            frontier = nxt
        assert len(seen) == cok.order


def test_abelian_invariants_of_presentations():
    inv = abelian_invariants(parse_presentation("< x, y, z | x^2, y^3, z^3 >"), [2, 3])
    assert inv.free_rank == 0 and inv.invariant_factors == (3, 6)
    assert inv.betti_mod == {2: 1, 3: 2} and inv.d_H1 == 2
    inv = abelian_invariants(parse_presentation("< a, b, c, d | [a,b]*[c,d] >"), [2])
    assert inv.free_rank == 4 and inv.betti(2) == 4
    inv = abelian_invariants(parse_presentation("< x, y | x^4, y^6, x^2*y^3 >"))
    # minors 24, 12, -12 give order 12; entry gcd 1 makes it cyclic
    assert str(inv) == "Z/12"
