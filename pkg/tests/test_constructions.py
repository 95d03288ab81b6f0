import json
from fractions import Fraction

import pytest

from pgradient import DomainError, Presentation, parse_presentation, report, small_cancellation_check
from pgradient.constructions import (CERTIFIED, UNKNOWN, Budgets, ConstructionState, adjoin_power,
                                     counterexample_closed_forms, find_small_cancellation_words,
                                     free_product_counterexample, is_p_regular, kill_excess_homology,
                                     pregular_subgroup, refined_count_check, supermultiplicativity_holds,
                                     staged_driver, verify_certificate)
from pgradient.quotients import abelian_extension, trivial_quotient
from pgradient.verifiers import verify_state


def test_free_product_family_closed_forms():
    P, chain = free_product_counterexample(2, 3, [2, 4])
    assert str(P) == "< x, y, z, t | x^2, y^3, z^3 >"
    rep = report(chain, [2, 3])
    for r in rep.rows:
        cf = counterexample_closed_forms(r.index)
        assert (r.b1_rational, r.b1_mod[2], r.b1_mod[3], r.d_H1, r.rank_upper) == \
               (cf.b1, cf.b1_p, cf.b1_q, cf.d_H1, cf.rank_upper)
    with pytest.raises(DomainError):
        free_product_counterexample(4, 3, [2])


def test_small_cancellation_search():
    res = find_small_cancellation_words(1)
    assert res.status == CERTIFIED
    for w in (res.u, res.v, res.w):
        assert all(s == 0 for s in w.exponent_sums())
        assert len(w) >= 24
    again = small_cancellation_check(res.presentation)
    assert again.satisfied and again.worst_piece_ratio < Fraction(1, 6)
    assert find_small_cancellation_words(1).u == res.u
    with pytest.raises(DomainError):
        find_small_cancellation_words(1, min_length=10)


def test_small_cancellation_search_can_give_up():
    res = find_small_cancellation_words(3, attempts=1, growth=2, max_length=24)
    assert res.status in (CERTIFIED, UNKNOWN)
    if res.status == UNKNOWN:
        assert res.presentation is None and res.best_ratio > 0


@pytest.mark.parametrize("text,index", [("< x, y | x^4 >", 16), ("< x | x^2 >", 2), ("< x, y | [x,y]^2 >", None)])
def test_regular_presentations_are_certified(text, index):
    P = parse_presentation(text)
    cert = is_p_regular(P, 2)
    assert cert.status == CERTIFIED and verify_certificate(P, cert)
    if index:
        assert cert.witness_index == index


def test_vacuous_regularity():
    cert = is_p_regular(parse_presentation("< x, y | [x,y]*x^2 >"), 2)
    assert cert.certified and cert.witness_index == 1


def test_irregular_presentation_stays_unknown():
    # x^2 dies in Z/2 = < x | x^4, x^6 >, so no quotient can certify
    cert = is_p_regular(parse_presentation("< x | x^4, x^6 >"), 2)
    assert cert.status == UNKNOWN and not verify_certificate(parse_presentation("< x | x^4, x^6 >"), cert)


def test_pregular_subgroup_bound():
    P = parse_presentation("< x, y | x^4 >")
    cert = is_p_regular(P, 2)
    sub = pregular_subgroup(P, 2, cert)
    assert sub.holds and sub.ratio == Fraction(3, 4) == P.p_deficiency(2)
    assert refined_count_check(P, cert.witness, 2)
    assert supermultiplicativity_holds(P, cert.witness, 2)


def test_adjoin_commutator_power():
    F = Presentation.free(2)
    cert = is_p_regular(F, 2)
    f = F.word("[x,y]")
    res = adjoin_power(F, f, 2, 1, cert)
    assert res.status == CERTIFIED and res.n_used == 1
    assert res.relator == f ** 2
    assert verify_certificate(res.presentation, res.certificate)


def test_kill_excess_homology():
    F = Presentation.free(2)
    K = trivial_quotient(F)
    H = abelian_extension(K, 2, 2).materialize()
    rels, P2, cert2, rep = kill_excess_homology(F, is_p_regular(F, 2), K, H, Fraction(1, 2))
    assert rep.status == "complete"
    assert (rep.b1_initial, rep.b1_final, rep.d_K) == (17, 2, 2)
    assert rep.spent < Fraction(1, 2)
    for r in rels:
        assert all(s == 0 for s in r.exponent_sums())
    assert verify_certificate(P2, cert2)


def test_driver_argument_checks():
    with pytest.raises(DomainError):
        staged_driver(1, 2, Fraction(1, 2))
    with pytest.raises(DomainError):
        staged_driver(2, 4, Fraction(1, 2))
    with pytest.raises(DomainError):
        staged_driver(2, 2, Fraction(3, 2))
    with pytest.raises(DomainError):
        staged_driver(2, 2, Fraction(1, 2), field_mode=2)


@pytest.fixture(scope="module")
def stage1():
    return staged_driver(2, 2, Fraction(9, 10), stages=1, seed=7)


def test_driver_stage_one(stage1):
    st = stage1.state
    assert st.status == "complete" and st.stage == 1
    actions = [rec["action"] for rec in stage1.log]
    assert actions[0] == "start" and actions[-1] == "done"
    assert [rec["seq"] for rec in stage1.log] == list(range(len(stage1.log)))
    assert all(v.ok for v in verify_state(st.to_json()))


def test_driver_state_roundtrip_and_determinism(stage1):
    rec = json.loads(stage1.state.to_json())
    assert ConstructionState.from_record(rec).to_json() == stage1.state.to_json()
    again = staged_driver(2, 2, Fraction(9, 10), stages=1, seed=7)
    assert again.state.to_json() == stage1.state.to_json()
    assert again.log_lines() == stage1.log_lines()


def test_driver_field_mode():
    res = staged_driver(2, 2, Fraction(9, 10), stages=1, field_mode=3)
    assert res.state.status == "complete"
    assert all(v.ok for v in verify_state(res.state.to_record()))


def test_driver_reports_budget_exhaustion():
    res = staged_driver(2, 2, Fraction(9, 10), stages=1, budgets=Budgets(index_budget=50))
    assert res.state.status == "partial" and res.state.failure
    assert res.log[-1]["action"] == "stop"
