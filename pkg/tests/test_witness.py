import json

import pytest

from artifact.algebra import FieldSpec
from artifact.cnf import CnfFormula, all_eight_clauses, parse_dimacs
from artifact.reductions import build, build_etsparse, build_etsupport, build_setsparse
from artifact.sparsepoly import AffineForm, AffineSubstitution, substitute
from artifact.witness import (
    AssignmentRefused,
    ExtractionRefused,
    NotInvertible,
    SearchCapExceeded,
    SearchFamily,
    Witness,
    WitnessError,
    brute_force_search,
    extract_assignment,
    forward_witness,
    verify_witness,
)

Q, F2, F3 = FieldSpec(0), FieldSpec(2), FieldSpec(3)
E1 = parse_dimacs("p cnf 3 1\n1 2 -3 0\n")


@pytest.fixture(scope="module")
def e1():
    return build_etsparse(E1, Q)


def test_identity_witness_fails(e1):
    w = Witness("affine_transform", AffineSubstitution.identity(Q, e1.universe))
    v = verify_witness(e1, w)
    assert (v.measured, v.budget, v.passed) == (48, 29, False)


def test_forward_witness_e1(e1):
    w = forward_witness(e1, (1, 0, 0))
    sub = w.substitution
    assert sub.image("y1") == AffineForm.make(Q, {"y1": 1, "x1": -1})
    assert sub.image("y2") == AffineForm.make(Q, {"y2": 1, "x2": 1})
    assert sub.image("y3") == AffineForm.make(Q, {"y3": 1, "x3": 1})
    v = verify_witness(e1, w)
    assert v.measured == 27 and v.passed
    # 1 + 3 (d3 + 3) + S(R_1) with S(R_1) = 2
    assert v.measured == 1 + 3 * (e1.params.d3 + 3) + 2
    # independent check: expand the whole transformed polynomial
    assert substitute(e1.f, sub).sparsity() == 27
    assert sum(val for _, val in v.per_summand) == 27


def test_forward_refuses_unsatisfying(e1):
    with pytest.raises(AssignmentRefused):
        forward_witness(e1, (0, 0, 1))


def test_non_invertible_rejected(e1):
    images = {w: AffineForm.var(Q, w) for w in e1.universe}
    images["y1"] = AffineForm.var(Q, "x1")
    with pytest.raises(NotInvertible):
        Witness("affine_transform", AffineSubstitution.from_mapping(Q, images, e1.universe))


@pytest.mark.parametrize("problem,field", [
    ("etsparse", Q), ("etsparse", F2), ("etsparse", F3),
    ("etsparse-hom", Q), ("etsparse-hom", F2),
    ("setsparse", Q), ("setsparse", F3), ("setsparse", F2),
])
def test_round_trip_all_models(problem, field):
    psi = CnfFormula(4, ((1, 2, -3), (-1, 3, 4), (2, -4, 1)))
    inst = build(problem, psi, field)
    for u in psi.satisfying_assignments():
        w = forward_witness(inst, u)
        v = verify_witness(inst, w)
        assert v.passed, (u, v.measured, v.budget)
        assert extract_assignment(inst, w) == u


def test_relabelled_witness_extracts_same(e1):
    w = forward_witness(e1, (1, 0, 0))
    perm = {"x1": "x2", "y1": "y2", "x2": "x3", "y2": "y3", "x3": "x1", "y3": "y1"}
    scales = {"x1": 3, "y1": 3, "x2": -1, "y2": -1}
    w2 = w.relabel(perm, scales)
    assert verify_witness(e1, w2).measured == 27
    assert extract_assignment(e1, w2) == (1, 0, 0)


def test_homogeneous_forward_bound():
    inst = build_etsparse(E1, Q, homogeneous=True)
    P = inst.params
    v = verify_witness(inst, forward_witness(inst, (0, 1, 0)))
    assert v.passed and v.measured <= 1 + 3 * (P.d4 + 3) + (P.d5 + 1) ** 2


def test_setsparse_shift_decodes():
    inst = build_setsparse(E1, F3)
    w = Witness("shift_vector", None, (("x0", 0), ("x1", F3.normalize(-1)), ("x2", 1), ("x3", 1)))
    assert verify_witness(inst, w).passed
    assert extract_assignment(inst, w) == (1, 0, 0)
    assert verify_witness(inst, forward_witness(inst, (1, 0, 0))).measured <= 94


def test_setsparse_requires_shift_witness():
    inst = build_setsparse(E1, F3)
    with pytest.raises(WitnessError):
        verify_witness(inst, Witness("affine_transform", AffineSubstitution.identity(F3, inst.universe)))


def test_out_of_family_refused(e1):
    # passes the budget but is not y -> y + c x
    w = forward_witness(e1, (1, 0, 0))
    images = dict(w.substitution.images)
    images["x0"] = AffineForm.make(Q, {"x0": 1}, 0)
    images["x1"] = AffineForm.make(Q, {"x1": 1, "x2": 1})
    w2 = Witness("affine_transform", AffineSubstitution.from_mapping(Q, images, e1.universe))
    with pytest.raises(ExtractionRefused):
        extract_assignment(e1, w2, check_budget=False)


def test_over_budget_refused(e1):
    with pytest.raises(ExtractionRefused):
        extract_assignment(e1, Witness("affine_transform", AffineSubstitution.identity(Q, e1.universe)))


def test_etsupport_forward():
    psi = CnfFormula(9, ((1, 2, 3), (4, -5, 6)))
    inst = build_etsupport(psi, 5, Q)
    u = (1, 0, 0, 1, 0, 0, 0, 0, 0)
    v = verify_witness(inst, forward_witness(inst, u))
    assert v.measured == 5 and v.passed
    assert extract_assignment(inst, forward_witness(inst, u)) == u


def test_witness_json_round_trip(e1):
    w = forward_witness(e1, (1, 0, 0))
    back = Witness.from_json_obj(json.loads(w.to_json()), Q)
    assert back == w
    s = forward_witness(build_setsparse(E1, F3), (1, 0, 0))
    assert Witness.from_json_obj(json.loads(s.to_json()), F3) == s


def test_structured_search_e1(e1):
    fam = SearchFamily("structured_transforms", coefficient_pool=(-2, -1, 0, 1, 2))
    assert fam.size(e1) == 125
    r = brute_force_search(e1, fam)
    assert r.evaluated == 125 and r.min <= 29
    assert verify_witness(e1, r.argmin).measured == r.min


def test_search_determinism_across_workers(e1):
    fam = SearchFamily("structured_transforms", coefficient_pool=(-1, 0, 1), permutation_policy="all_pair_permutations")
    a = brute_force_search(e1, fam, workers=1, keep_values=True)
    b = brute_force_search(e1, fam, workers=3, keep_values=True)
    assert (a.min, a.encoding, a.values) == (b.min, b.encoding, b.values)
    assert a.encoding == min(e for e, v in zip(fam.encodings(e1), a.values) if v == a.min)


def test_all_shifts_setsparse_f3():
    sat = brute_force_search(build_setsparse(E1, F3), SearchFamily("all_shifts"))
    assert sat.evaluated == 81 and sat.min <= 94
    b = dict(sat.argmin.shift)
    assert b["x0"] == 0 and all(b[f"x{i}"] in (1, 2) for i in (1, 2, 3))
    unsat = brute_force_search(build_setsparse(all_eight_clauses(), F3), SearchFamily("all_shifts"))
    assert unsat.budget == 2839 and unsat.min == 3191


def test_search_cap(e1):
    fam = SearchFamily("structured_transforms", coefficient_pool=(-2, -1, 0, 1, 2))
    with pytest.raises(SearchCapExceeded) as e:
        brute_force_search(e1, fam, cap=100)
    assert e.value.size == 125


def test_all_shifts_needs_finite_field():
    with pytest.raises(WitnessError):
        brute_force_search(build_setsparse(E1, Q), SearchFamily("all_shifts"))
