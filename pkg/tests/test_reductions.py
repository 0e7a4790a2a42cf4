import json
from fractions import Fraction
from math import comb

import pytest

from artifact.algebra import FieldSpec
from artifact.cnf import CnfFormula, NormalizationRequired, parse_dimacs
from artifact.reductions import (
    GapSpec,
    ReductionError,
    Variant,
    build,
    build_etsparse,
    build_etsupport,
    build_setsparse,
    closed_form,
    etsupport_counts,
    exact_statistics,
    instance_from_json_obj,
    select_params,
)
from artifact.sparsepoly import check_degree_separated

Q, F2, F3 = FieldSpec(0), FieldSpec(2), FieldSpec(3)
E1 = parse_dimacs("p cnf 3 1\n1 2 -3 0\n")


@pytest.fixture(scope="module")
def e1():
    return build_etsparse(E1, Q)


# -- parameters ------------------------------------------------------------------


def test_params_etsparse_q():
    P = select_params(Variant.of("etsparse", Q), Q, 3, 1)
    assert (P.d4, P.d3, P.d2, P.d1, P.s) == (1, 5, 10, 29, 29)


def test_params_etsparse_q_m8():
    P = select_params(Variant.of("etsparse", Q), Q, 3, 8)
    assert (P.d4, P.d3, P.d2, P.d1) == (8, 649, 1298, 2605)
    assert P.s == 2605


def test_params_setsparse_f3():
    P = select_params(Variant.of("setsparse", F3), F3, 3, 1)
    assert (P.d3, P.d2, P.d1, P.s) == (2, 26, 728, 94)


@pytest.mark.parametrize("problem", ["etsparse", "etsparse-hom", "setsparse"])
@pytest.mark.parametrize("p", [2, 3, 5])
def test_charp_params_have_pk_minus_1_shape(problem, p):
    F = FieldSpec(p)
    P = select_params(Variant.of(problem, F), F, 4, 3)
    for name, v in P.as_dict().items():
        if problem == "etsparse-hom" and name in ("d1", "d2"):
            continue  # these are differences of powers of p
        assert _is_pk(v + 1, p), (name, v)


def _is_pk(v, p):
    while v % p == 0 and v > 1:
        v //= p
    return v == 1


def test_etsupport_param_errors():
    with pytest.raises(ReductionError):
        select_params(Variant.of("etsupport", Q), Q, 8, 1, sigma=5)
    with pytest.raises(ReductionError):
        select_params(Variant.of("etsupport", FieldSpec(5)), FieldSpec(5), 9, 1, sigma=5)
    with pytest.raises(ReductionError):
        select_params(Variant.of("etsupport", Q), Q, 9, 1, sigma=4)


def test_gap_override_below_minimum():
    gap = GapSpec(Fraction(1, 4), base_degree=1)
    with pytest.raises(ReductionError):
        select_params(Variant.of("etsparse", Q, gap), Q, 3, 4, override_base_degree=1)


def test_gap_spec_validation():
    with pytest.raises(ReductionError):
        GapSpec(Fraction(1, 3), 4)
    with pytest.raises(ReductionError):
        Variant.of("etsparse", Q, GapSpec(Fraction(1, 4), 4), translations_hardened=True)


# -- built instances ------------------------------------------------------------------


def test_e1_expansion(e1):
    assert e1.budget == 29
    assert e1.f.sparsity() == 48
    assert e1.f.degree() == 293
    # the clause exponent is 1 here, so R_1 has no mixed monomials and the
    # largest support comes from the variable gadgets
    assert e1.f.support() == 4
    assert exact_statistics(e1) == (48, 4)
    cf = closed_form(e1)
    assert cf.sparsity_lo == 48 and cf.degree == 293


def test_support_seven_once_clause_exponent_is_two():
    psi = CnfFormula(3, ((1, 2, -3), (-1, 2, 3)))
    inst = build_etsparse(psi, Q)
    assert inst.params.d4 == 2
    assert inst.f.support() == 7
    assert (inst.f.sparsity(), inst.f.support()) == exact_statistics(inst)
    assert inst.f.sparsity() == closed_form(inst).sparsity_lo


def test_e1_separation(e1):
    assert check_degree_separated(e1.summand_polys())
    assert e1.check_separation()


def test_homogeneous_e1():
    inst = build_etsparse(E1, Q, homogeneous=True)
    P = inst.params
    D = P.d1 + P.d2 + (3 * 3 + 1 + 1) * (P.d3 + 1)
    assert inst.f.is_homogeneous() and inst.f.degree() == D
    assert len(inst.summands) == 3 * 3 + 1 + 1
    assert check_degree_separated(inst.summand_polys(), wrt="x0")
    ix0, iy0 = inst.f.vars.index("x0"), inst.f.vars.index("y0")
    assert all(k[ix0] >= P.d1 and k[iy0] >= P.d2 for k in inst.f.terms)


def test_char2_bounds():
    inst = build_etsparse(E1, F2)
    P = inst.params
    assert inst.f.sparsity() <= 1 + 3 * (P.d3 + 3) + (P.d4 + 1) ** 3
    assert 4 <= inst.f.support() <= 7


def test_setsparse_f3_e1():
    inst = build_setsparse(E1, F3)
    assert (inst.f.sparsity(), inst.f.support(), inst.f.degree()) == (190, 4, 728)
    assert inst.budget == 94
    assert check_degree_separated(inst.summand_polys(), wrt="x0")
    assert inst.universe == ("x0", "x1", "x2", "x3")


def test_setsparse_char2_bound():
    inst = build_setsparse(E1, F2)
    P = inst.params
    assert inst.f.sparsity() <= 1 + 3 * (P.d2 + 2) + (P.d3 + 1) ** 3


def test_translation_hardened_separation():
    inst = build_etsparse(E1, Q, translations_hardened=True)
    assert inst.check_separation()
    assert check_degree_separated(inst.summand_polys(), wrt="x0")
    assert inst.f.sparsity() == 48


def test_etsupport_counts_and_support():
    assert etsupport_counts(9, 5) == (comb(9, 5), comb(9, 3) * 3) == (126, 252)
    psi = CnfFormula(9, ((1, 2, 3), (4, -5, 6)))
    inst = build_etsupport(psi, 5, Q)
    assert inst.f.support() == 6
    assert inst.f.sparsity() <= 126 + 252 + 64 * 2
    assert inst.check_separation()
    # the builder complements the first clause
    assert inst.formula.complement_bits(0) == {1: 1, 2: 1, 3: 1}


def test_etsupport_refuses_repeated_clauses():
    psi = CnfFormula(9, ((1, 2, 3), (3, 2, 1)))
    with pytest.raises(ReductionError):
        build_etsupport(psi, 5, Q)


def test_non_normal_formula_needs_flag():
    psi = CnfFormula(3, ((1, 1, 2),))
    with pytest.raises(NormalizationRequired):
        build_etsparse(psi, Q)
    inst = build_etsparse(psi, Q, normalize=True)
    assert inst.formula.is_normal() and inst.distinct_record() is not None


def test_char2_gap_flips_first_clause():
    inst = build("etsparse", E1, F2, gap=GapSpec(Fraction(1, 4), 4))
    assert inst.formula.complement_bits(0) == {1: 1, 2: 1, 3: 1}
    assert inst.flip_record().flipped == (1, 2)
    assert inst.to_source_assignment(inst.to_formula_assignment((1, 0, 1))) == (1, 0, 1)


@pytest.mark.parametrize("problem,field,kw", [
    ("etsparse", Q, {}),
    ("etsparse-hom", F3, {}),
    ("setsparse", F2, {}),
    ("etsparse", Q, {"translations_hardened": True}),
    ("setsparse", F3, {"gap": GapSpec(Fraction(1, 5), 4)}),
])
def test_json_round_trip_and_determinism(problem, field, kw):
    a = build(problem, E1, field, **kw)
    b = build(problem, E1, field, **kw)
    assert a.to_json() == b.to_json()
    back = instance_from_json_obj(json.loads(a.to_json()))
    assert back.f == a.f and back.params == a.params and back.variant == a.variant
    assert back.to_json() == a.to_json()
