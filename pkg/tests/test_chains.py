import csv
import io
import json
from fractions import Fraction

import pytest

from pgradient import (DomainError, MalformedInputError, Presentation, ReferenceConstants,
                       check_fp_monotone, cyclic_chain, derived_p_series, parse_presentation, report)
from pgradient.chains import (Chain, check_index_inequality, describe_index, index_inequality_holds,
                              strict_inequality_flags)
from pgradient.quotients import quotient_from_images, trivial_quotient


def test_cyclic_chain_validation(surface2):
    with pytest.raises(MalformedInputError):
        cyclic_chain(surface2, [1, 0], [2])
    with pytest.raises(DomainError):
        cyclic_chain(parse_presentation("< x, y | x*y >"), [1, 0], [2])
    with pytest.raises(DomainError):
        cyclic_chain(surface2, [1, 0, 0, 0], [2, 6, 9])
    ch = cyclic_chain(surface2, [1, 0, 0, 0], [2, 4])
    assert ch.indices == [1, 2, 4] and ch.is_p_chain(2)


def test_from_levels_rejects_non_nested():
    F = Presentation.free(2)
    a = quotient_from_images(F, "cyclic", [1, 0], n=2)
    b = quotient_from_images(F, "cyclic", [0, 1], n=4)
    with pytest.raises(Exception):
        Chain.from_levels(F, [trivial_quotient(F), a, b])


def test_derived_series_of_free_groups():
    ch = derived_p_series(Presentation.free(2), 2, 3)
    assert ch.indices == [1, 4, 128] and ch.truncated
    assert "2^136" in ch.truncation
    rep = report(ch, [2])
    # Schreier: H_1 of an index-n subgroup of F_2 is free of rank n + 1
    assert [r.b1_mod[2] for r in rep.rows] == [n + 1 for n in ch.indices]
    assert check_fp_monotone(rep, 2).monotone


def test_stabilizing_derived_series_repeats():
    ch = derived_p_series(parse_presentation("< x | x^4 >"), 2, 4)
    assert ch.indices == [1, 2, 4, 4, 4]


def test_report_columns_and_gaps():
    ch = derived_p_series(Presentation.free(2), 2, 2)
    rep = report(ch, [2, 3], ReferenceConstants(1))
    r = rep.rows[1]
    assert (r.index, r.b1_rational, r.b1_mod, r.d_H1) == (4, 5, {2: 5, 3: 5}, 5)
    assert r.rank_lower == r.rank_upper == 5
    assert r.ref_gap["b1_rational"] == Fraction(1, 4)
    rec = json.loads(rep.to_json())
    assert rec["rows"][1]["ratios"]["b1_mod_2"] == {"num": 5, "den": 4}
    rows = list(csv.DictReader(io.StringIO(rep.to_csv())))
    assert rows[1]["ratio_b1_mod_2"] == "1.25" and rows[1]["display_only"] == "yes"
    assert rep.column("b1_mod", 3) == [2, 5, 129]


def test_report_truncates_on_matrix_budget():
    ch = derived_p_series(Presentation.free(2), 2, 2)
    rep = report(ch, [2], matrix_budget=10)
    assert rep.truncated and len(rep.rows) == 2


def test_reference_constants():
    with pytest.raises(DomainError):
        ReferenceConstants(-1)
    assert ReferenceConstants("3/2").b1_l2 == Fraction(3, 2)


def test_monotone_check_needs_p_chain(surface2):
    rep = report(cyclic_chain(surface2, [1, 0, 0, 0], [3, 9]), [2])
    with pytest.raises(DomainError):
        check_fp_monotone(rep, 2)
    with pytest.raises(DomainError):
        check_fp_monotone(rep, 3)


def test_index_inequality():
    assert index_inequality_holds(2, 5, 4)
    assert not index_inequality_holds(2, 6, 4)
    rep = report(derived_p_series(Presentation.free(3), 2, 1), [2])
    assert check_index_inequality(rep, 2) == [(1, True)]


def test_strict_flags_for_the_free_product():
    P = parse_presentation("< x, y, z, t | x^2, y^3, z^3 >")
    rep = report(cyclic_chain(P, [0, 0, 0, 1], [2, 4]), [2, 3])
    assert strict_inequality_flags(rep, 2) == [True, True]


def test_describe_index():
    assert describe_index(128, 2) == "128"
    assert describe_index(2 ** 136, 2) == "2^136"
    assert describe_index(3 ** 40 + 1, 3) == str(3 ** 40 + 1)
