"""Exact coefficient arithmetic over Q and prime fields F_p.

Coefficients are kept as raw Python values so that polynomial code can work
on them without wrapper overhead:

  * characteristic 0: ``int`` when integral, otherwise a reduced ``Fraction``;
  * characteristic p: ``int`` in ``[0, p-1]``.

:class:`FieldSpec` owns the arithmetic on raw values; :class:`FieldElement` is
a small immutable wrapper for callers that prefer operator syntax.  Exponents
are plain Python ints (arbitrary precision), so nothing here overflows.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from functools import reduce
from math import comb
from typing import Iterable, Sequence, Union

Raw = Union[int, Fraction]
Exponent = int


class AlgebraError(ValueError):
    """Base class for arithmetic domain errors."""


class InvalidBaseError(AlgebraError):
    pass


class DomainError(AlgebraError):
    pass


class FieldMismatchError(AlgebraError):
    pass


def is_prime(n: int) -> bool:
    """Deterministic trial-division primality test."""
    if n < 2:
        return False
    if n % 2 == 0:
        return n == 2
    f = 3
    while f * f <= n:
        if n % f == 0:
            return False
        f += 2
    return True


@dataclass(frozen=True)
class FieldSpec:
    """The coefficient field: Q (characteristic 0) or F_p."""

    characteristic: int = 0

    def __post_init__(self) -> None:
        c = self.characteristic
        if not isinstance(c, int) or isinstance(c, bool):
            raise DomainError(f"characteristic must be an int, got {c!r}")
        if c != 0 and not is_prime(c):
            raise DomainError(f"characteristic {c} is neither 0 nor prime")

    # -- construction / naming -------------------------------------------
    @classmethod
    def parse(cls, label: str) -> "FieldSpec":
        """Parse ``q``, ``f2``, ``f3``, ``fp:<p>`` (or ``f<p>``)."""
        s = label.strip().lower()
        if s in ("q", "qq", "0"):
            return cls(0)
        if s.startswith("fp:"):
            return cls(int(s[3:]))
        if s.startswith("f") and s[1:].isdigit():
            return cls(int(s[1:]))
        raise DomainError(f"unrecognised field label {label!r}")

    @property
    def label(self) -> str:
        return "q" if self.characteristic == 0 else f"fp:{self.characteristic}"

    @property
    def is_finite(self) -> bool:
        return self.characteristic != 0

    def __repr__(self) -> str:
        return "FieldSpec(Q)" if self.characteristic == 0 else f"FieldSpec(F_{self.characteristic})"

    # -- raw arithmetic -----------------------------------------------------
    def normalize(self, value: Union[int, Fraction, str]) -> Raw:
        """Map an int, Fraction or decimal/fraction string into canonical raw form."""
        if isinstance(value, str):
            value = Fraction(value.strip())
        p = self.characteristic
        if isinstance(value, bool):
            value = int(value)
        if p == 0:
            if isinstance(value, Fraction):
                return value.numerator if value.denominator == 1 else value
            return int(value)
        if isinstance(value, Fraction):
            if value.denominator % p == 0:
                raise DomainError(f"{value} has no image in F_{p}")
            return value.numerator * pow(value.denominator, -1, p) % p
        return int(value) % p

    def zero(self) -> Raw:
        return 0

    def one(self) -> Raw:
        return 1

    def add(self, a: Raw, b: Raw) -> Raw:
        p = self.characteristic
        if p:
            return (a + b) % p
        return _tidy(a + b)

    def sub(self, a: Raw, b: Raw) -> Raw:
        p = self.characteristic
        if p:
            return (a - b) % p
        return _tidy(a - b)

    def neg(self, a: Raw) -> Raw:
        p = self.characteristic
        return (-a) % p if p else -a

    def mul(self, a: Raw, b: Raw) -> Raw:
        p = self.characteristic
        if p:
            return a * b % p
        return _tidy(a * b)

    def inv(self, a: Raw) -> Raw:
        if a == 0:
            raise ZeroDivisionError("inverse of zero")
        p = self.characteristic
        if p:
            return pow(a, -1, p)
        return _tidy(Fraction(1) / a)

    def div(self, a: Raw, b: Raw) -> Raw:
        return self.mul(a, self.inv(b))

    def power(self, a: Raw, e: int) -> Raw:
        if e < 0:
            return self.power(self.inv(a), -e)
        p = self.characteristic
        if p:
            return pow(a, e, p)
        return _tidy(a**e)

    def format(self, a: Raw) -> str:
        return str(a)

    def elements(self) -> list[Raw]:
        if not self.characteristic:
            raise DomainError("Q is infinite")
        return list(range(self.characteristic))

    def sort_key(self, a: Raw):
        return a

    def element(self, value: Union[int, Fraction, str]) -> "FieldElement":
        return FieldElement(self.normalize(value), self)


def _tidy(v: Raw) -> Raw:
    if isinstance(v, Fraction) and v.denominator == 1:
        return v.numerator
    return v


QQ = FieldSpec(0)


@dataclass(frozen=True)
class FieldElement:
    """An element of a :class:`FieldSpec`, stored in canonical raw form."""

    value: Raw
    field: FieldSpec

    def __post_init__(self) -> None:
        object.__setattr__(self, "value", self.field.normalize(self.value))

    def _coerce(self, other) -> "FieldElement":
        if isinstance(other, FieldElement):
            if other.field != self.field:
                raise FieldMismatchError(f"{self.field} vs {other.field}")
            return other
        return FieldElement(other, self.field)

    def __add__(self, other):
        o = self._coerce(other)
        return FieldElement(self.field.add(self.value, o.value), self.field)

    __radd__ = __add__

    def __sub__(self, other):
        o = self._coerce(other)
        return FieldElement(self.field.sub(self.value, o.value), self.field)

    def __rsub__(self, other):
        return self._coerce(other) - self

    def __mul__(self, other):
        o = self._coerce(other)
        return FieldElement(self.field.mul(self.value, o.value), self.field)

    __rmul__ = __mul__

    def __neg__(self):
        return FieldElement(self.field.neg(self.value), self.field)

    def inverse(self) -> "FieldElement":
        return FieldElement(self.field.inv(self.value), self.field)

    def __truediv__(self, other):
        return self * self._coerce(other).inverse()

    def __pow__(self, e: int):
        return FieldElement(self.field.power(self.value, e), self.field)

    def __eq__(self, other) -> bool:
        if isinstance(other, FieldElement):
            return self.field == other.field and self.value == other.value
        try:
            return self.value == self.field.normalize(other)
        except (TypeError, ValueError):
            return NotImplemented

    def __hash__(self) -> int:
        return hash((self.value, self.field))

    def __bool__(self) -> bool:
        return self.value != 0

    def __repr__(self) -> str:
        return f"{self.value}" if not self.field.characteristic else f"{self.value} (mod {self.field.characteristic})"


def base_p_digits(d: Exponent, p: int) -> list[int]:
    """Base-p digits of d, least significant first; ``[0]`` for d = 0."""
    if p < 2:
        raise InvalidBaseError(f"base must be >= 2, got {p}")
    if d < 0:
        raise DomainError("exponent must be non-negative")
    if d == 0:
        return [0]
    out = []
    while d:
        d, r = divmod(d, p)
        out.append(r)
    return out


def num_digits(d: int, p: int) -> int:
    """floor(log_p d) + 1 for d >= 1, computed exactly."""
    if d < 1:
        raise DomainError("num_digits needs d >= 1")
    return len(base_p_digits(d, p))


def binomial_residue(n: Exponent, k: Exponent, p: int) -> int:
    """C(n, k) mod p via Lucas' theorem (p prime)."""
    if k < 0 or k > n:
        raise DomainError(f"binomial({n}, {k}) undefined")
    r = 1
    while n or k:
        n, ni = divmod(n, p)
        k, ki = divmod(k, p)
        if ki > ni:
            return 0
        r = r * comb(ni, ki) % p
        if not r:
            return 0
    return r


def binomial_mod(n: Exponent, k: Exponent, field: FieldSpec) -> FieldElement:
    """C(n, k) as an element of ``field``."""
    if k < 0 or k > n:
        raise DomainError(f"binomial({n}, {k}) undefined")
    p = field.characteristic
    if p == 0:
        return FieldElement(comb(n, k), field)
    return FieldElement(binomial_residue(n, k, p), field)


def binomial_nonzero(n: Exponent, k: Exponent, p: int) -> bool:
    """Whether C(n, k) is nonzero in characteristic p (0 meaning Q)."""
    if p == 0:
        return 0 <= k <= n
    while n or k:
        n, ni = divmod(n, p)
        k, ki = divmod(k, p)
        if ki > ni:
            return False
    return True


def multinomial_mod(parts: Sequence[Exponent], field: FieldSpec) -> FieldElement:
    """Multinomial coefficient (sum parts)! / prod(parts!) in ``field``.

    In characteristic p this is the product of digitwise multinomials, zero as
    soon as adding the parts in base p produces a carry.
    """
    if any(k < 0 for k in parts):
        raise DomainError("multinomial parts must be non-negative")
    p = field.characteristic
    if p == 0:
        total, r = 0, 1
        for k in parts:
            total += k
            r *= comb(total, k)
        return FieldElement(r, field)
    rest = list(parts)
    r = 1
    while any(rest):
        digits = []
        for i, k in enumerate(rest):
            rest[i], d = divmod(k, p)
            digits.append(d)
        if sum(digits) >= p:
            return FieldElement(0, field)
        total = 0
        for d in digits:
            total += d
            r = r * comb(total, d) % p
    return FieldElement(r, field)


def multinomial_support_count(d: Exponent, m: int, field: FieldSpec) -> int:
    """Number of monomials of l^d for a linear form l in exactly m variables."""
    if m < 1:
        raise DomainError("m must be >= 1")
    if d < 0:
        raise DomainError("exponent must be non-negative")
    p = field.characteristic
    if p == 0:
        return comb(d + m - 1, m - 1)
    return reduce(lambda acc, e: acc * comb(e + m - 1, m - 1), base_p_digits(d, p), 1)


def smallest_pk_minus_1(lower: int, p: int) -> int:
    """Smallest number of the form p^j - 1 (j >= 1) that is >= lower."""
    v = p
    while v - 1 < lower:
        v *= p
    return v - 1


def pk_minus_1_values(lo: int, hi: int, p: int) -> Iterable[int]:
    """All p^j - 1 (j >= 1) inside [lo, hi]."""
    v = p
    while v - 1 <= hi:
        if v - 1 >= lo:
            yield v - 1
        v *= p
