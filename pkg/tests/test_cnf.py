import random
from itertools import product

import pytest
from hypothesis import given, settings, strategies as st

from artifact.cnf import (
    CnfError,
    CnfFormula,
    DimacsParseError,
    NormalizationRequired,
    all_eight_clauses,
    normalize_distinct,
    normalize_first_clause_complemented,
    parse_dimacs,
    random_formula,
)


def test_parse_e1():
    psi = parse_dimacs("c comment\np cnf 3 1\n1 2 -3 0\n")
    assert psi.n == 3 and psi.m == 1
    assert psi.support_set(0) == (1, 2, 3)
    assert psi.complement_bits(0) == {1: 0, 2: 0, 3: 1}


def test_parse_clause_spanning_lines():
    psi = parse_dimacs("p cnf 4 2\n1 2\n-3 0 2 3 4 0\n")
    assert psi.clauses == ((1, 2, -3), (2, 3, 4))


@pytest.mark.parametrize("text,line", [
    ("p cnf 3 1\n0\n", 2),
    ("1 2 3 0\n", 1),
    ("p cnf 3 1\n1 x 3 0\n", 2),
    ("p cnf 3 1\n1 2 7 0\n", 2),
])
def test_parse_errors_carry_line_numbers(text, line):
    with pytest.raises(DimacsParseError) as e:
        parse_dimacs(text)
    assert e.value.line == line


def test_parse_missing_header():
    with pytest.raises(DimacsParseError):
        parse_dimacs("c nothing here\n")


def test_parse_unterminated():
    with pytest.raises(DimacsParseError):
        parse_dimacs("p cnf 3 1\n1 2 3\n")


def test_repeated_variable_needs_normalization():
    with pytest.raises(NormalizationRequired):
        parse_dimacs("p cnf 2 1\n1 1 2 0\n")
    psi = parse_dimacs("p cnf 2 1\n1 1 2 0\n", strict=False)
    assert not psi.is_normal()


def test_evaluate_and_solve():
    psi = CnfFormula(3, ((1, 2, -3),))
    assert psi.evaluate((1, 0, 0))
    assert not psi.evaluate((0, 0, 1))
    assert psi.solve_small() == (0, 0, 0)
    assert all_eight_clauses().solve_small() is None
    assert CnfFormula(0, ()).solve_small() == ()
    assert CnfFormula(2, ()).solve_small() == (0, 0)


def test_literal_out_of_range():
    with pytest.raises(CnfError):
        CnfFormula(2, ((1, 2, 3),))


def test_dimacs_round_trip():
    psi = random_formula(random.Random(3), 6, 5)
    assert parse_dimacs(psi.to_dimacs()) == psi
    assert CnfFormula.from_json_obj(psi.to_json_obj()) == psi


def _satisfiable(psi):
    return psi.solve_small() is not None


def test_normalize_keeps_normal_formula():
    psi = CnfFormula(3, ((1, -2, 3),))
    out, rec = normalize_distinct(psi)
    assert out == psi and not rec.fresh and not rec.dropped


def test_normalize_repeated_literal():
    psi = CnfFormula(2, ((1, 1, 2),))
    out, rec = normalize_distinct(psi)
    assert out.is_normal()
    assert rec.fresh == (3,)
    assert all(set(map(abs, c)) == {1, 2, 3} for c in out.clauses)


def test_normalize_unit_clause_truth_table():
    psi = CnfFormula(1, ((1,),))
    out, rec = normalize_distinct(psi)
    assert out.is_normal() and out.m == 4
    for u in product((0, 1), repeat=1):
        ext = [out.evaluate(rec.extend(u)[:1] + rest) for rest in product((0, 1), repeat=2)]
        assert all(ext) == psi.evaluate(u)


def test_normalize_drops_tautology():
    out, rec = normalize_distinct(CnfFormula(3, ((1, -1, 2), (1, 2, 3))))
    assert rec.dropped == (1,) and out.m == 1


def test_normalize_rejects_long_clause():
    with pytest.raises(NormalizationRequired):
        normalize_distinct(CnfFormula(4, ((1, 2, 3, 4),)))


clause_st = st.lists(st.integers(1, 4).flatmap(lambda v: st.sampled_from([v, -v])), min_size=1, max_size=3)


@settings(max_examples=150, deadline=None)
@given(st.lists(clause_st, min_size=1, max_size=6))
def test_normalize_is_equisatisfiable(clauses):
    psi = CnfFormula(4, tuple(tuple(c) for c in clauses))
    out, rec = normalize_distinct(psi)
    assert all(len(c) == 3 and len({abs(l) for l in c}) == 3 for c in out.clauses)
    if out.m == 0:
        assert _satisfiable(psi)
        return
    assert _satisfiable(out) == _satisfiable(psi)
    # every model of psi lifts (fresh variables are unconstrained)
    for u in psi.satisfying_assignments():
        assert any(out.evaluate(u + rest) for rest in product((0, 1), repeat=len(rec.fresh)))


def test_first_clause_complemented_unchanged_when_already():
    psi = CnfFormula(3, ((-1, -2, -3), (1, 2, 3)))
    out, rec = normalize_first_clause_complemented(psi)
    assert out == psi and rec.flipped == ()


def test_first_clause_flip_semantics():
    psi = CnfFormula(4, ((1, -2, -3), (1, 2, 4), (-1, 3, -4)))
    out, rec = normalize_first_clause_complemented(psi)
    assert rec.flipped == (1,)
    assert out.complement_bits(0) == {1: 1, 2: 1, 3: 1}
    for u in product((0, 1), repeat=4):
        assert psi.evaluate(u) == out.evaluate(rec.apply(u))
        assert rec.apply(rec.apply(u)) == u


def test_random_formula_distinct():
    psi = random_formula(random.Random(0), 3, 8, distinct_clauses=True)
    assert not psi.has_repeated_clauses()
    assert psi.solve_small() is None
    with pytest.raises(CnfError):
        random_formula(random.Random(0), 3, 9, distinct_clauses=True)
