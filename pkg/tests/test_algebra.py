from fractions import Fraction
from itertools import product
from math import comb

import pytest
from hypothesis import given, strategies as st

from artifact.algebra import (
    DomainError,
    FieldSpec,
    InvalidBaseError,
    base_p_digits,
    binomial_mod,
    binomial_nonzero,
    binomial_residue,
    is_prime,
    multinomial_mod,
    multinomial_support_count,
    num_digits,
    pk_minus_1_values,
    smallest_pk_minus_1,
)

PRIMES = [2, 3, 5, 7, 11]


@pytest.mark.parametrize("label,char", [("q", 0), ("f2", 2), ("F3", 3), ("fp:7", 7), ("f11", 11)])
def test_field_parse(label, char):
    assert FieldSpec.parse(label).characteristic == char


@pytest.mark.parametrize("bad", ["f4", "fp:1", "z", "fp:x"])
def test_field_parse_rejects(bad):
    with pytest.raises(ValueError):
        FieldSpec.parse(bad)


def test_field_labels_round_trip():
    for c in (0, 2, 3, 101):
        F = FieldSpec(c)
        assert FieldSpec.parse(F.label) == F


def test_raw_arithmetic_char0_stays_exact():
    Q = FieldSpec(0)
    half = Q.div(1, 2)
    assert half == Fraction(1, 2)
    assert Q.add(half, half) == 1 and isinstance(Q.add(half, half), int)
    assert Q.normalize("3/6") == Fraction(1, 2)


def test_raw_arithmetic_mod_p():
    F = FieldSpec(5)
    assert F.normalize(-1) == 4
    assert F.inv(2) == 3
    assert F.normalize(Fraction(1, 2)) == 3
    with pytest.raises(DomainError):
        F.normalize(Fraction(1, 5))
    with pytest.raises(ZeroDivisionError):
        F.inv(0)


def test_field_element_ops():
    F = FieldSpec(7)
    a = F.element(3)
    assert a * a.inverse() == 1
    assert (a - 5).value == 5
    assert -a == 4
    assert a**6 == 1


def test_is_prime_small():
    assert [n for n in range(30) if is_prime(n)] == [2, 3, 5, 7, 11, 13, 17, 19, 23, 29]


@pytest.mark.parametrize("d,p,digits", [(0, 3, [0]), (728, 3, [2] * 6), (5, 2, [1, 0, 1])])
def test_base_p_digits_examples(d, p, digits):
    assert base_p_digits(d, p) == digits


def test_base_p_digits_bad_base():
    with pytest.raises(InvalidBaseError):
        base_p_digits(5, 1)


@given(st.integers(0, 10**30), st.sampled_from(PRIMES))
def test_digits_reassemble(d, p):
    digits = base_p_digits(d, p)
    assert sum(e * p**i for i, e in enumerate(digits)) == d
    assert all(0 <= e < p for e in digits)
    if d:
        assert num_digits(d, p) == len(digits)


def test_binomial_examples():
    assert binomial_mod(4, 2, FieldSpec(2)) == 0
    assert binomial_mod(728, 100, FieldSpec(3)) != 0
    for F in (FieldSpec(0), FieldSpec(2), FieldSpec(5)):
        assert binomial_mod(17, 0, F) == 1
    with pytest.raises(DomainError):
        binomial_mod(2, 3, FieldSpec(0))


@given(st.integers(0, 300), st.integers(0, 300), st.sampled_from(PRIMES))
def test_lucas_matches_exact_binomial(n, k, p):
    if k > n:
        n, k = k, n
    assert binomial_residue(n, k, p) == comb(n, k) % p
    assert binomial_nonzero(n, k, p) == (comb(n, k) % p != 0)


@given(st.lists(st.integers(0, 12), min_size=1, max_size=4), st.sampled_from([0] + PRIMES))
def test_multinomial_mod_matches_factorials(parts, p):
    from math import factorial

    exact = factorial(sum(parts))
    for k in parts:
        exact //= factorial(k)
    F = FieldSpec(p)
    assert multinomial_mod(parts, F) == F.normalize(exact)


@pytest.mark.parametrize("d,m,p,count", [(5, 2, 0, 6), (2, 2, 2, 2), (4, 3, 5, 15)])
def test_multinomial_support_count_examples(d, m, p, count):
    assert multinomial_support_count(d, m, FieldSpec(p)) == count


def test_multinomial_support_count_m0():
    with pytest.raises(DomainError):
        multinomial_support_count(3, 0, FieldSpec(0))


@given(st.integers(0, 25), st.integers(1, 3), st.sampled_from([0] + PRIMES))
def test_support_count_by_enumeration(d, m, p):
    """Count compositions of d whose multinomial survives in the field."""
    F = FieldSpec(p)
    count = sum(1 for ks in product(range(d + 1), repeat=m) if sum(ks) == d and multinomial_mod(ks, F).value)
    assert multinomial_support_count(d, m, F) == count


def test_pk_minus_1_helpers():
    assert smallest_pk_minus_1(0, 3) == 2
    assert smallest_pk_minus_1(27, 3) == 80
    assert smallest_pk_minus_1(26, 3) == 26
    assert list(pk_minus_1_values(1, 100, 2)) == [1, 3, 7, 15, 31, 63]
