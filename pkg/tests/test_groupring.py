import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from oracles import group_ring_product, rank_mod_p_brute
from pgradient import DomainError, MalformedInputError
from pgradient.groupring import (DEFAULT_SUITE, GroupRingMatrix, GroupTable, PGroupTable, augmentation,
                                 check_dim_inequality, cyclic_group, element_rep, group_by_name,
                                 load_demo_catalog, named_group, non_p_group_demo, random_suite,
                                 regular_rep, ring_multiply, run_demo)

GROUPS = [(name, p) for name, p in DEFAULT_SUITE]


@pytest.mark.parametrize("name,order", [("C2", 2), ("C4", 4), ("C2xC2", 4), ("D4", 8), ("Q8", 8),
                                        ("C9", 9), ("C3xC3", 9), ("C2xC3", 6)])
def test_named_groups(name, order):
    G = group_by_name(name)
    assert G.order == order
    assert (G.mult[np.arange(order), G.inverse] == G.identity).all()


def test_group_structure():
    D4, Q8 = group_by_name("D4"), group_by_name("Q8")
    # D4 has five involutions, Q8 has one
    invol = lambda G: sum(1 for a in range(G.order) if a != G.identity and G.mult[a, a] == G.identity)
    assert invol(D4) == 5 and invol(Q8) == 1
    assert named_group({"kind": "product", "factors": [{"kind": "cyclic", "n": 2}] * 2}).order == 4


def test_bad_tables():
    with pytest.raises(MalformedInputError):
        GroupTable([[0, 1], [1, 1]])
    with pytest.raises(MalformedInputError):
        GroupTable([[0, 1, 2], [1, 0, 2], [2, 2, 0]])
    # a Latin square that is not associative
    with pytest.raises(MalformedInputError):
        GroupTable([[0, 1, 2, 3, 4], [1, 0, 3, 4, 2], [2, 4, 0, 1, 3], [3, 2, 4, 0, 1], [4, 3, 1, 2, 0]])
    with pytest.raises(DomainError):
        PGroupTable.of(cyclic_group(6), 2)
    with pytest.raises(MalformedInputError):
        GroupRingMatrix(cyclic_group(2), 2, [[[0, 2]]])


@pytest.mark.parametrize("name,p", GROUPS)
def test_element_rep_is_a_homomorphism(name, p):
    G = group_by_name(name)
    rng = np.random.default_rng(3)
    mult = G.mult.tolist()
    for _ in range(10):
        a, b = rng.integers(0, p, G.order), rng.integers(0, p, G.order)
        ab = group_ring_product(mult, a.tolist(), b.tolist(), p)
        assert ring_multiply(G, p, a, b).tolist() == ab
        assert np.array_equal(element_rep(G, p, ab), element_rep(G, p, a) @ element_rep(G, p, b) % p)


@settings(max_examples=40, deadline=None)
@given(st.sampled_from(GROUPS), st.integers(1, 3), st.integers(1, 3), st.integers(0, 2 ** 32 - 1))
def test_dimension_inequality_for_p_groups(group, m, n, seed):
    name, p = group
    G = group_by_name(name)
    M = GroupRingMatrix.random(G, p, m, n, np.random.default_rng(seed))
    r = check_dim_inequality(M)
    assert r.lhs == rank_mod_p_brute(regular_rep(M).tolist(), p)
    assert r.rhs == G.order * rank_mod_p_brute(augmentation(M).tolist(), p)
    assert r.holds


def test_non_p_groups_are_rejected_but_demoable():
    M = GroupRingMatrix(cyclic_group(2), 3, [[[1, 1]]])
    with pytest.raises(DomainError):
        check_dim_inequality(M)
    r = non_p_group_demo(M)
    assert (r.lhs, r.rhs, r.holds) == (1, 2, False)


def test_demo_catalog():
    demos = load_demo_catalog()
    assert len(demos) >= 2
    for entry in demos:
        r = run_demo(entry)
        assert (r.lhs, r.rhs, r.holds) == (entry["expected"]["lhs"], entry["expected"]["rhs"],
                                           entry["expected"]["holds"])


def test_suite_is_seeded():
    a = random_suite(samples=20, seed=9)
    b = random_suite(samples=20, seed=9)
    assert [(r.violations, r.equalities) for r in a] == [(r.violations, r.equalities) for r in b]
    assert all(r.violations == 0 for r in a)


def test_records_roundtrip():
    M = GroupRingMatrix.random(group_by_name("Q8"), 2, 2, 2, np.random.default_rng(0))
    M2 = GroupRingMatrix.from_record(M.to_record())
    assert np.array_equal(M2.entries, M.entries) and np.array_equal(M2.group.mult, M.group.mult)
