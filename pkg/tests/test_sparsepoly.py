import json
import random
from itertools import product

import pytest
from hypothesis import given, settings, strategies as st

from artifact.algebra import FieldSpec
from artifact.sparsepoly import (
    AffineForm,
    AffineSubstitution,
    PolyError,
    SparsePoly,
    SubstitutionError,
    check_degree_separated,
    factor_product,
    linear_power_sparsity,
    measure,
    pow_poly,
    substitute,
)

Q, F2, F3, F5 = FieldSpec(0), FieldSpec(2), FieldSpec(3), FieldSpec(5)
XY = ("x", "y")


def var(F, name, vars=XY):
    return SparsePoly.variable(F, vars, name)


def naive_pow(f, d):
    out = SparsePoly.constant(f.field, f.vars, 1)
    for _ in range(d):
        out = out * f
    return out


def test_cancellation():
    x = var(Q, "x")
    assert (x + x.scale(-1)).is_zero()
    assert (x * x + x * x).sparsity() == 1
    assert (var(F2, "x") ** 2 + var(F2, "x") ** 2).is_zero()


def test_power_examples():
    assert pow_poly(var(Q, "x") + var(Q, "y"), 3).sparsity() == 4
    assert pow_poly(var(F2, "x") + var(F2, "y"), 2).sparsity() == 2


def test_substitution_examples():
    for F, expected in ((Q, 3), (F2, 1)):
        f = pow_poly(var(F, "y") + var(F, "x"), 2)
        sub = AffineSubstitution.from_mapping(F, {
            "x": AffineForm.var(F, "x"),
            "y": AffineForm.make(F, {"y": 1, "x": 1}),
        })
        assert substitute(f, sub).sparsity() == expected


def test_degree_set():
    V = ("x1", "x2")
    f = SparsePoly.from_terms(Q, V, [({"x1": 2}, 1), ({"x1": 1, "x2": 1}, 1), ({"x2": 1}, 4)])
    assert f.degree_set() == {1, 2}
    assert f.degree() == 2
    assert not f.is_homogeneous()


def test_support_of_product_of_differences():
    V = ("x1", "x2", "x3", "y1", "y2", "y3")
    f = SparsePoly.constant(Q, V, 1)
    for i in (1, 2, 3):
        f = f * pow_poly(var(Q, f"y{i}", V) - var(Q, f"x{i}", V), 3)
    assert f.support() == 6
    assert f.sparsity() == 64


def test_degree_separation():
    x = var(Q, "x")
    assert check_degree_separated([x * x, x * x * x])
    assert not check_degree_separated([x * x + x, x * x * x + x * x])
    with pytest.raises(PolyError):
        check_degree_separated([])


@pytest.mark.parametrize("m,d,F,count", [(2, 5, Q, 6), (2, 3, F2, 4), (3, 2, Q, 6), (2, 3, F3, 2)])
def test_linear_power_sparsity(m, d, F, count):
    V = tuple(f"v{i}" for i in range(m))
    lin = SparsePoly.zero(F, V)
    for v in V:
        lin = lin + SparsePoly.variable(F, V, v)
    assert linear_power_sparsity(m, d, F) == count == pow_poly(lin, d).sparsity()


def _random_poly(rng, F, vars, nterms=4, maxdeg=3):
    terms = {}
    for _ in range(nterms):
        k = tuple(rng.randint(0, maxdeg) for _ in vars)
        terms[k] = rng.randint(-3, 3)
    return SparsePoly(F, vars, terms)


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 10**6), st.sampled_from([Q, F2, F3, F5]), st.integers(0, 9))
def test_pow_matches_repeated_multiplication(seed, F, d):
    f = _random_poly(random.Random(seed), F, ("a", "b", "c"), nterms=3, maxdeg=2)
    assert pow_poly(f, d) == naive_pow(f, d)


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 10**6), st.sampled_from([Q, F2, F3]))
def test_json_round_trip(seed, F):
    f = _random_poly(random.Random(seed), F, ("a", "b", "c"))
    text = f.to_json()
    assert SparsePoly.from_json(text) == f
    assert SparsePoly.from_json(text).to_json() == text
    json.loads(text)


def test_json_is_order_independent():
    terms = [({"x": 2}, 1), ({"y": 1}, 3), ({"x": 1, "y": 1}, -1)]
    a = SparsePoly.from_terms(Q, XY, terms)
    b = SparsePoly.from_terms(Q, XY, list(reversed(terms)))
    assert a.to_json() == b.to_json()


def test_substitution_errors():
    with pytest.raises(SubstitutionError):
        AffineSubstitution.from_mapping(Q, {"x": AffineForm.var(Q, "z")}, ("x",))
    f = var(Q, "x") * var(Q, "y")
    with pytest.raises(SubstitutionError):
        substitute(f, AffineSubstitution.identity(Q, ("x",)))


def test_invertibility():
    ok = AffineSubstitution.from_mapping(Q, {"x": AffineForm.make(Q, {"x": 1, "y": 1}), "y": AffineForm.var(Q, "y")})
    bad = AffineSubstitution.from_mapping(Q, {"x": AffineForm.make(Q, {"x": 1, "y": 1}),
                                              "y": AffineForm.make(Q, {"x": 2, "y": 2})})
    assert ok.is_invertible() and not bad.is_invertible()
    # singular only in characteristic 2
    m = {"x": AffineForm.make(F2, {"x": 1, "y": 1}), "y": AffineForm.make(F2, {"x": 1, "y": -1})}
    assert not AffineSubstitution.from_mapping(F2, m).is_invertible()


def _random_affine(rng, F, vars, pool=(-2, -1, 0, 1, 2)):
    return AffineForm.make(F, {v: rng.choice(pool) for v in rng.sample(vars, rng.randint(1, 2))},
                           rng.choice(pool))


@settings(max_examples=80, deadline=None)
@given(st.integers(0, 10**6), st.sampled_from([Q, F2, F3]), st.sampled_from(["sparsity", "support"]))
def test_measure_matches_full_expansion(seed, F, statistic):
    """The factored measurement agrees with expanding the whole sum."""
    rng = random.Random(seed)
    V = ("a", "b", "c", "d")
    terms, total = [], SparsePoly.zero(F, V)
    for i in range(rng.randint(1, 4)):
        powers = [(_random_affine(rng, F, V), rng.randint(0, 4)) for _ in range(rng.randint(1, 3))]
        coeff = rng.choice([1, -1, 2])
        terms.append(factor_product(F, V, coeff, powers))
        full = SparsePoly.constant(F, V, coeff)
        for form, e in powers:
            full = full * pow_poly(form.to_poly(V), e)
        total = total + full
        assert terms[-1].expand() == full
    got = measure(terms, statistic).value
    assert got == (total.sparsity() if statistic == "sparsity" else total.support())


def test_measure_lazy_member_consults_coefficients():
    # a large lazy factor sharing monomials with a small correction term
    V = ("a", "b", "c", "d")
    big = factor_product(Q, V, 1, [(AffineForm.make(Q, {"a": 1, "b": 1, "c": 1, "d": 1}), 120)])
    assert big.lazy()
    small = factor_product(Q, V, -1, [(AffineForm.var(Q, "a"), 120)])
    assert measure([big, small]).value == big.sparsity() - 1
    assert measure([big, small], "support").value == 4


def test_substitute_agrees_with_pointwise_evaluation():
    rng = random.Random(11)
    V = ("a", "b", "c")
    f = _random_poly(rng, F5, V, nterms=5)
    sub = AffineSubstitution.from_mapping(F5, {v: _random_affine(rng, F5, V) for v in V})
    g = substitute(f, sub)

    def ev(p, point):
        return sum(c * eval_mono(k, point) for k, c in p.terms.items()) % 5

    def eval_mono(k, point):
        out = 1
        for e, x in zip(k, point):
            out *= x**e
        return out

    for point in product(range(5), repeat=3):
        image = [(sum(c * point[V.index(w)] for w, c in sub.image(v).coeffs) + sub.image(v).const) for v in V]
        assert ev(g, point) == ev(f, image)
