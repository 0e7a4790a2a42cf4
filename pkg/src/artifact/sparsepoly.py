"""Exact sparse multivariate polynomials.

A :class:`SparsePoly` stores a dictionary from exponent tuples (aligned with an
ordered tuple of variable names) to nonzero raw coefficients of a
:class:`~artifact.algebra.FieldSpec`.  Exponents are Python ints, so a single
term such as ``x0**(3**400)`` costs nothing to store.

Besides the usual ring operations the module provides affine substitution and
the statistics every reduction is judged by (sparsity, support, degree sets).
The second half of the file is a small measurement engine for sums of
products of affine-form powers; it counts the monomials of such sums exactly
while avoiding expansion of summands that provably cannot share a monomial.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field as dc_field
from fractions import Fraction
from math import comb
from operator import add as _add
from typing import Dict, Iterable, Iterator, Mapping, Optional, Sequence, Tuple

from .algebra import (
    FieldElement,
    FieldMismatchError,
    FieldSpec,
    Raw,
    base_p_digits,
    binomial_residue,
    multinomial_support_count,
)

Key = Tuple[int, ...]


class PolyError(ValueError):
    pass


class SubstitutionError(PolyError):
    pass


class ExpansionTooLarge(PolyError):
    """Raised when an exact expansion would exceed the configured term cap."""


def _raw(field: FieldSpec, c) -> Raw:
    if isinstance(c, FieldElement):
        if c.field != field:
            raise FieldMismatchError(f"{c.field} vs {field}")
        return c.value
    return field.normalize(c)


class SparsePoly:
    """Immutable sparse polynomial over ``field`` in the ordered variables ``vars``."""

    __slots__ = ("field", "vars", "_terms", "_index")

    def __init__(self, field: FieldSpec, vars: Sequence[str], terms: Optional[Mapping[Key, Raw]] = None, *, trusted: bool = False):
        self.field = field
        self.vars = tuple(vars)
        if len(set(self.vars)) != len(self.vars):
            raise PolyError(f"duplicate variable names in {self.vars}")
        self._index = {v: i for i, v in enumerate(self.vars)}
        if terms is None:
            self._terms: Dict[Key, Raw] = {}
        elif trusted:
            self._terms = dict(terms) if not isinstance(terms, dict) else terms
        else:
            n = len(self.vars)
            clean: Dict[Key, Raw] = {}
            for k, c in terms.items():
                k = tuple(int(e) for e in k)
                if len(k) != n or any(e < 0 for e in k):
                    raise PolyError(f"bad exponent vector {k} for variables {self.vars}")
                c = _raw(field, c)
                if c != 0:
                    clean[k] = c
            self._terms = clean

    # -- constructors ---------------------------------------------------------
    @classmethod
    def zero(cls, field: FieldSpec, vars: Sequence[str]) -> "SparsePoly":
        return cls(field, vars, {}, trusted=True)

    @classmethod
    def constant(cls, field: FieldSpec, vars: Sequence[str], c=1) -> "SparsePoly":
        c = _raw(field, c)
        return cls(field, vars, {(0,) * len(tuple(vars)): c} if c else {}, trusted=True)

    @classmethod
    def monomial(cls, field: FieldSpec, vars: Sequence[str], exps: Mapping[str, int], c=1) -> "SparsePoly":
        vars = tuple(vars)
        key = [0] * len(vars)
        for v, e in exps.items():
            if e < 0:
                raise PolyError("negative exponent")
            try:
                key[vars.index(v)] += int(e)
            except ValueError:
                raise PolyError(f"variable {v!r} not in universe {vars}") from None
        c = _raw(field, c)
        return cls(field, vars, {tuple(key): c} if c else {}, trusted=True)

    @classmethod
    def variable(cls, field: FieldSpec, vars: Sequence[str], name: str) -> "SparsePoly":
        return cls.monomial(field, vars, {name: 1})

    @classmethod
    def from_terms(cls, field: FieldSpec, vars: Sequence[str], terms: Iterable[Tuple[Mapping[str, int], object]]) -> "SparsePoly":
        """Build from ``(exponent map, coefficient)`` pairs, summing repeats."""
        out = cls.zero(field, vars)
        for exps, c in terms:
            out = out + cls.monomial(field, vars, exps, c)
        return out

    # -- basic access ------------------------------------------------------------
    @property
    def terms(self) -> Mapping[Key, Raw]:
        return self._terms

    def items(self):
        return self._terms.items()

    def __len__(self) -> int:
        return len(self._terms)

    def __bool__(self) -> bool:
        return bool(self._terms)

    def is_zero(self) -> bool:
        return not self._terms

    def coefficient(self, exps: Mapping[str, int]) -> FieldElement:
        key = [0] * len(self.vars)
        for v, e in exps.items():
            key[self._index[v]] = e
        return FieldElement(self._terms.get(tuple(key), 0), self.field)

    def monomials(self) -> Iterator[Tuple[Dict[str, int], Raw]]:
        """Terms in canonical (graded-lex, descending) order as ``({var: exp}, coeff)``."""
        for k in self.sorted_keys():
            yield {v: e for v, e in zip(self.vars, k) if e}, self._terms[k]

    def sorted_keys(self) -> list:
        return sorted(self._terms, key=lambda k: (sum(k), k), reverse=True)

    def used_vars(self) -> Tuple[str, ...]:
        used = [False] * len(self.vars)
        for k in self._terms:
            for i, e in enumerate(k):
                if e:
                    used[i] = True
        return tuple(v for v, u in zip(self.vars, used) if u)

    # -- statistics -----------------------------------------------------------------
    def sparsity(self) -> int:
        return len(self._terms)

    def support(self) -> int:
        return max((sum(1 for e in k if e) for k in self._terms), default=0)

    def degree(self) -> int:
        """Total degree; -1 for the zero polynomial."""
        return max((sum(k) for k in self._terms), default=-1)

    def degree_set(self) -> set:
        return {sum(k) for k in self._terms}

    def degree_set_wrt(self, v: str) -> set:
        i = self._index[v]
        return {k[i] for k in self._terms}

    def is_homogeneous(self) -> bool:
        return len(self.degree_set()) <= 1

    # -- universes --------------------------------------------------------------------
    def embed(self, vars: Sequence[str]) -> "SparsePoly":
        """Re-express over another variable order containing every used variable."""
        vars = tuple(vars)
        if vars == self.vars:
            return self
        pos = {v: i for i, v in enumerate(vars)}
        for v in self.used_vars():
            if v not in pos:
                raise PolyError(f"variable {v!r} missing from target universe")
        mapping = [(pos[v], i) for i, v in enumerate(self.vars) if v in pos]
        n = len(vars)
        out = {}
        for k, c in self._terms.items():
            nk = [0] * n
            for j, i in mapping:
                nk[j] = k[i]
            out[tuple(nk)] = c
        return SparsePoly(self.field, vars, out, trusted=True)

    def _unify(self, other: "SparsePoly") -> Tuple["SparsePoly", "SparsePoly"]:
        if self.field != other.field:
            raise FieldMismatchError(f"{self.field} vs {other.field}")
        if self.vars == other.vars:
            return self, other
        extra = [v for v in other.vars if v not in self._index]
        u = self.vars + tuple(extra)
        return self.embed(u), other.embed(u)

    # -- arithmetic ----------------------------------------------------------------------
    def __add__(self, other: "SparsePoly") -> "SparsePoly":
        a, b = self._unify(other)
        if len(a._terms) < len(b._terms):
            a, b = b, a
        out = dict(a._terms)
        F = self.field
        for k, c in b._terms.items():
            if k in out:
                s = F.add(out[k], c)
                if s:
                    out[k] = s
                else:
                    del out[k]
            else:
                out[k] = c
        return SparsePoly(F, a.vars, out, trusted=True)

    def __neg__(self) -> "SparsePoly":
        F = self.field
        return SparsePoly(F, self.vars, {k: F.neg(c) for k, c in self._terms.items()}, trusted=True)

    def __sub__(self, other: "SparsePoly") -> "SparsePoly":
        return self + (-other)

    def scale(self, c) -> "SparsePoly":
        F = self.field
        c = _raw(F, c)
        if not c:
            return SparsePoly.zero(F, self.vars)
        return SparsePoly(F, self.vars, {k: F.mul(v, c) for k, v in self._terms.items()}, trusted=True)

    def shift(self, key: Key) -> "SparsePoly":
        """Multiply by the monomial with exponent vector ``key``."""
        if not any(key):
            return self
        return SparsePoly(self.field, self.vars, {tuple(map(_add, k, key)): c for k, c in self._terms.items()}, trusted=True)

    def __mul__(self, other) -> "SparsePoly":
        if not isinstance(other, SparsePoly):
            return self.scale(other)
        a, b = self._unify(other)
        if len(a._terms) < len(b._terms):
            a, b = b, a
        F = self.field
        p = F.characteristic
        out: Dict[Key, Raw] = {}
        get = out.get
        for kb, cb in b._terms.items():
            for ka, ca in a._terms.items():
                k = tuple(map(_add, ka, kb))
                out[k] = get(k, 0) + ca * cb
        if p:
            out = {k: c % p for k, c in out.items() if c % p}
        else:
            out = {k: (c.numerator if isinstance(c, Fraction) and c.denominator == 1 else c) for k, c in out.items() if c}
        return SparsePoly(F, a.vars, out, trusted=True)

    __rmul__ = __mul__

    def __pow__(self, d: int) -> "SparsePoly":
        return pow_poly(self, d)

    def __eq__(self, other) -> bool:
        if not isinstance(other, SparsePoly):
            return NotImplemented
        if self.field != other.field:
            return False
        try:
            a, b = self._unify(other)
        except PolyError:
            return False
        return a._terms == b._terms

    def __hash__(self):
        return hash((self.field, frozenset(
            (tuple((v, e) for v, e in zip(self.vars, k) if e), c) for k, c in self._terms.items())))

    def __repr__(self) -> str:
        if not self._terms:
            return "0"
        parts = []
        for exps, c in list(self.monomials())[:8]:
            mono = "*".join(v if e == 1 else f"{v}^{e}" for v, e in exps.items()) or "1"
            parts.append(f"{c}*{mono}" if c != 1 else mono)
        more = f" + ... ({len(self._terms)} terms)" if len(self._terms) > 8 else ""
        return " + ".join(parts) + more

    # -- serialization ----------------------------------------------------------------------
    def to_json_obj(self) -> dict:
        terms = []
        for k in self.sorted_keys():
            terms.append({
                "coeff": str(self._terms[k]),
                "exps": {v: str(e) for v, e in zip(self.vars, k) if e},
            })
        return {"field": self.field.label, "vars": list(self.vars), "terms": terms}

    def to_json(self) -> str:
        return canonical_dumps(self.to_json_obj())

    @classmethod
    def from_json_obj(cls, obj: Mapping) -> "SparsePoly":
        F = FieldSpec.parse(obj["field"])
        vars = tuple(obj["vars"])
        idx = {v: i for i, v in enumerate(vars)}
        terms: Dict[Key, Raw] = {}
        for t in obj["terms"]:
            k = [0] * len(vars)
            for v, e in t["exps"].items():
                k[idx[v]] = int(e)
            k = tuple(k)
            c = F.normalize(t["coeff"])
            terms[k] = F.add(terms.get(k, 0), c)
        return cls(F, vars, terms)

    @classmethod
    def from_json(cls, text: str) -> "SparsePoly":
        return cls.from_json_obj(json.loads(text))


def canonical_dumps(obj) -> str:
    """Deterministic JSON text used for every artifact the package writes."""
    return json.dumps(obj, indent=1, ensure_ascii=True, separators=(",", ": "))


# ---------------------------------------------------------------------------------
# powers

def _binomial_power(f: SparsePoly, d: int) -> SparsePoly:
    """(a*M + b*N)^d by the binomial theorem, coefficients via Lucas in char p."""
    F = f.field
    p = F.characteristic
    (ka, ca), (kb, cb) = list(f._terms.items())
    out: Dict[Key, Raw] = {}
    if p:
        # Only k digitwise below d survive; enumerate them directly.
        digits = base_p_digits(d, p)
        ks = [0]
        place = 1
        for e in digits:
            ks = [k + j * place for j in range(e + 1) for k in ks]
            place *= p
        for k in ks:
            c = binomial_residue(d, k, p) * pow(ca, k, p) * pow(cb, d - k, p) % p
            if c:
                out[tuple(x * k + y * (d - k) for x, y in zip(ka, kb))] = c
    else:
        binom = 1
        pows_b = [1]
        for _ in range(d):
            pows_b.append(pows_b[-1] * cb)
        pa = 1
        for k in range(d + 1):
            c = binom * pa * pows_b[d - k]
            if isinstance(c, Fraction) and c.denominator == 1:
                c = c.numerator
            out[tuple(x * k + y * (d - k) for x, y in zip(ka, kb))] = c
            binom = binom * (d - k) // (k + 1)
            pa = pa * ca
    return SparsePoly(F, f.vars, out, trusted=True)


def _frobenius(f: SparsePoly, q: int) -> SparsePoly:
    """f^q for q a power of the characteristic: exponents scale, coefficients are fixed by Fermat."""
    return SparsePoly(f.field, f.vars, {tuple(e * q for e in k): c for k, c in f._terms.items()}, trusted=True)


def _binary_pow(f: SparsePoly, d: int) -> SparsePoly:
    result = SparsePoly.constant(f.field, f.vars, 1)
    base = f
    while d:
        if d & 1:
            result = result * base
        d >>= 1
        if d:
            base = base * base
    return result


def _multinomial_power(f: SparsePoly, d: int) -> SparsePoly:
    """f^d over Q by enumerating compositions of d over the terms of f."""
    F = f.field
    items = list(f._terms.items())
    nv = len(f.vars)
    out: Dict[Key, Raw] = {}

    def rec(i: int, left: int, coeff, key: list) -> None:
        k_i, c_i = items[i]
        if i == len(items) - 1:
            c = coeff * c_i**left
            k = tuple(a + left * b for a, b in zip(key, k_i))
            out[k] = out.get(k, 0) + c
            return
        binom = 1
        pw = 1
        for j in range(left + 1):
            rec(i + 1, left - j, coeff * binom * pw, [a + j * b for a, b in zip(key, k_i)])
            binom = binom * (left - j) // (j + 1)
            pw = pw * c_i

    rec(0, d, 1, [0] * nv)
    return SparsePoly(F, f.vars, {k: F.normalize(c) for k, c in out.items() if c}, trusted=True)


def pow_poly(f: SparsePoly, d: int) -> SparsePoly:
    """f^d.  Over F_p this uses f^d = prod_i (f^(p^i))^(e_i) on the base-p digits of d."""
    if d < 0:
        raise PolyError("negative power")
    F = f.field
    if d == 0:
        return SparsePoly.constant(F, f.vars, 1)
    n = len(f._terms)
    if n == 0:
        return f
    if n == 1:
        (k, c), = f._terms.items()
        return SparsePoly(F, f.vars, {tuple(e * d for e in k): F.power(c, d)}, trusted=True)
    if n == 2:
        return _binomial_power(f, d)
    p = F.characteristic
    if not p:
        if comb(d + n - 1, n - 1) <= 4 * HARD_LIMIT:
            return _multinomial_power(f, d)
        return _binary_pow(f, d)
    result = SparsePoly.constant(F, f.vars, 1)
    q = 1
    for e in base_p_digits(d, p):
        if e:
            result = result * _binary_pow(_frobenius(f, q), e)
        q *= p
    return result


# ---------------------------------------------------------------------------------
# free functions mirroring the operation list

def add(f: SparsePoly, g: SparsePoly) -> SparsePoly:
    return f + g


def mul(f: SparsePoly, g: SparsePoly) -> SparsePoly:
    return f * g


def sparsity(f: SparsePoly) -> int:
    return f.sparsity()


def support(f: SparsePoly) -> int:
    return f.support()


def degree_set(f: SparsePoly) -> set:
    return f.degree_set()


def degree_set_wrt(f: SparsePoly, v: str) -> set:
    return f.degree_set_wrt(v) if v in f.vars else {0} if f else set()


def check_degree_separated(polys: Sequence[SparsePoly], wrt: Optional[str] = None) -> bool:
    """True iff the (total or ``wrt``-) degree sets of ``polys`` are pairwise disjoint."""
    if not polys:
        raise PolyError("need at least one polynomial")
    seen: set = set()
    for f in polys:
        ds = f.degree_set() if wrt is None else degree_set_wrt(f, wrt)
        if seen & ds:
            return False
        seen |= ds
    return True


def linear_power_sparsity(m: int, d: int, field: FieldSpec) -> int:
    """Number of monomials of l^d for a linear form in exactly m variables."""
    return multinomial_support_count(d, m, field)


# ---------------------------------------------------------------------------------
# affine forms and substitutions

@dataclass(frozen=True)
class AffineForm:
    """sum_v c_v * v + const, coefficients in raw form, variables kept sorted."""

    field: FieldSpec
    coeffs: Tuple[Tuple[str, Raw], ...] = ()
    const: Raw = 0

    @classmethod
    def make(cls, field: FieldSpec, coeffs: Mapping[str, object] = None, const=0) -> "AffineForm":
        items = []
        for v, c in (coeffs or {}).items():
            c = _raw(field, c)
            if c:
                items.append((v, c))
        items.sort()
        return cls(field, tuple(items), _raw(field, const))

    @classmethod
    def var(cls, field: FieldSpec, v: str, c=1) -> "AffineForm":
        return cls.make(field, {v: c})

    def coeff(self, v: str) -> Raw:
        for w, c in self.coeffs:
            if w == v:
                return c
        return 0

    def variables(self) -> Tuple[str, ...]:
        return tuple(v for v, _ in self.coeffs)

    def is_constant(self) -> bool:
        return not self.coeffs

    def single_variable(self) -> Optional[Tuple[str, Raw]]:
        """``(v, c)`` when the form is exactly c*v (no constant)."""
        if len(self.coeffs) == 1 and self.const == 0:
            return self.coeffs[0]
        return None

    def n_terms(self) -> int:
        return len(self.coeffs) + (1 if self.const else 0)

    def __add__(self, other: "AffineForm") -> "AffineForm":
        F = self.field
        d = dict(self.coeffs)
        for v, c in other.coeffs:
            d[v] = F.add(d.get(v, 0), c)
        return AffineForm.make(F, d, F.add(self.const, other.const))

    def scale(self, c) -> "AffineForm":
        F = self.field
        c = _raw(F, c)
        return AffineForm.make(F, {v: F.mul(a, c) for v, a in self.coeffs}, F.mul(self.const, c))

    def compose(self, sub: "AffineSubstitution") -> "AffineForm":
        F = self.field
        acc: Dict[str, Raw] = {}
        const = self.const
        for v, c in self.coeffs:
            img = sub.image(v)
            for w, a in img.coeffs:
                acc[w] = F.add(acc.get(w, 0), F.mul(c, a))
            const = F.add(const, F.mul(c, img.const))
        return AffineForm.make(F, acc, const)

    def to_poly(self, vars: Sequence[str]) -> SparsePoly:
        vars = tuple(vars)
        n = len(vars)
        idx = {v: i for i, v in enumerate(vars)}
        terms = {}
        for v, c in self.coeffs:
            k = [0] * n
            try:
                k[idx[v]] = 1
            except KeyError:
                raise PolyError(f"variable {v!r} missing from universe") from None
            terms[tuple(k)] = c
        if self.const:
            terms[(0,) * n] = self.const
        return SparsePoly(self.field, vars, terms, trusted=True)

    def to_json_obj(self) -> dict:
        return {"linear": {v: str(c) for v, c in self.coeffs}, "constant": str(self.const)}

    @classmethod
    def from_json_obj(cls, field: FieldSpec, obj: Mapping) -> "AffineForm":
        return cls.make(field, {v: field.normalize(c) for v, c in obj.get("linear", {}).items()}, field.normalize(obj.get("constant", "0")))

    def __str__(self) -> str:
        parts = [f"{c}*{v}" if c != 1 else v for v, c in self.coeffs]
        if self.const or not parts:
            parts.append(str(self.const))
        return " + ".join(parts)


@dataclass(frozen=True)
class AffineSubstitution:
    """Maps each variable of ``domain`` to an affine form over ``codomain``."""

    field: FieldSpec
    images: Tuple[Tuple[str, AffineForm], ...]
    codomain: Tuple[str, ...]
    structured_tag: Optional[Tuple[Tuple[str, object], ...]] = None
    _lookup: Dict[str, AffineForm] = dc_field(default=None, compare=False, hash=False, repr=False)

    def __post_init__(self) -> None:
        object.__setattr__(self, "_lookup", dict(self.images))

    @classmethod
    def from_mapping(cls, field: FieldSpec, images: Mapping[str, AffineForm], codomain: Sequence[str] = None, tag=None) -> "AffineSubstitution":
        dom = tuple(images)
        cod = tuple(codomain) if codomain is not None else dom
        for v, form in images.items():
            for w in form.variables():
                if w not in cod:
                    raise SubstitutionError(f"image of {v} uses {w!r} outside codomain")
        if isinstance(tag, Mapping):
            tag = tuple(sorted(tag.items()))
        return cls(field, tuple(images.items()), cod, tag)

    @classmethod
    def identity(cls, field: FieldSpec, vars: Sequence[str]) -> "AffineSubstitution":
        return cls.from_mapping(field, {v: AffineForm.var(field, v) for v in vars}, vars)

    @classmethod
    def shift(cls, field: FieldSpec, vars: Sequence[str], b: Mapping[str, object]) -> "AffineSubstitution":
        return cls.from_mapping(field, {v: AffineForm.make(field, {v: 1}, b.get(v, 0)) for v in vars}, vars)

    @property
    def domain(self) -> Tuple[str, ...]:
        return tuple(v for v, _ in self.images)

    def image(self, v: str) -> AffineForm:
        try:
            return self._lookup[v]
        except KeyError:
            raise SubstitutionError(f"no image for variable {v!r}") from None

    def translation(self) -> Dict[str, Raw]:
        return {v: f.const for v, f in self.images if f.const}

    def matrix(self) -> list:
        """Rows indexed by domain variables, columns by codomain variables."""
        return [[f.coeff(w) for w in self.codomain] for _, f in self.images]

    def rank(self) -> int:
        return matrix_rank(self.field, self.matrix())

    def is_invertible(self) -> bool:
        return len(self.domain) == len(self.codomain) and self.rank() == len(self.domain)

    def then_relabel(self, perm: Mapping[str, str], scales: Mapping[str, object] = None) -> "AffineSubstitution":
        """Compose on the output side: each codomain variable w becomes scales[w] * perm[w]."""
        F = self.field
        scales = scales or {}
        inner = AffineSubstitution.from_mapping(
            F, {w: AffineForm.var(F, perm.get(w, w), scales.get(w, 1)) for w in self.codomain}, self.codomain)
        return AffineSubstitution.from_mapping(F, {v: f.compose(inner) for v, f in self.images}, self.codomain)

    def to_json_obj(self) -> dict:
        return {v: f.to_json_obj() for v, f in self.images}


def matrix_rank(field: FieldSpec, rows: Sequence[Sequence[Raw]]) -> int:
    """Rank by exact Gaussian elimination."""
    F = field
    m = [list(r) for r in rows]
    if not m:
        return 0
    ncols = len(m[0])
    rank = 0
    for col in range(ncols):
        piv = next((r for r in range(rank, len(m)) if m[r][col] != 0), None)
        if piv is None:
            continue
        m[rank], m[piv] = m[piv], m[rank]
        inv = F.inv(m[rank][col])
        m[rank] = [F.mul(x, inv) for x in m[rank]]
        for r in range(len(m)):
            if r != rank and m[r][col] != 0:
                fac = m[r][col]
                m[r] = [F.sub(x, F.mul(fac, y)) for x, y in zip(m[r], m[rank])]
        rank += 1
        if rank == len(m):
            break
    return rank


def substitute(f: SparsePoly, sub: AffineSubstitution) -> SparsePoly:
    """Exact expansion of f with every variable replaced by its affine image."""
    F = f.field
    if sub.field != F:
        raise FieldMismatchError(f"{sub.field} vs {F}")
    cod = sub.codomain
    used = set(f.used_vars())
    for v in used:
        sub.image(v)
    polys = {v: sub.image(v).to_poly(cod) for v in f.vars if v in used}
    cache: Dict[Tuple[int, int], SparsePoly] = {}

    def power(i: int, e: int) -> SparsePoly:
        key = (i, e)
        if key not in cache:
            cache[key] = pow_poly(polys[f.vars[i]], e)
        return cache[key]

    acc: Dict[Key, Raw] = {}
    for k, c in f._terms.items():
        term = SparsePoly.constant(F, cod, c)
        for i, e in enumerate(k):
            if e:
                term = term * power(i, e)
                if not term:
                    break
        for tk, tc in term._terms.items():
            acc[tk] = F.add(acc.get(tk, 0), tc)
    return SparsePoly(F, cod, {k: c for k, c in acc.items() if c}, trusted=True)


# ---------------------------------------------------------------------------------
# measurement engine for sums of products of affine powers

LAZY_LIMIT = 200_000
HARD_LIMIT = 4_000_000


class Factor:
    """``monomial(shift) * base**exp`` over the small universe ``vars``.

    ``base`` is either an affine form converted to a polynomial (``affine``
    true) or an already expanded polynomial with ``exp == 1``.  Statistics are
    available without expansion when the base is affine; expansion happens
    only on demand and is cached.
    """

    __slots__ = ("field", "vars", "base", "exp", "shift", "affine", "_expanded", "_count")

    def __init__(self, field: FieldSpec, vars: Sequence[str], base: SparsePoly, exp: int, shift: Key, affine: bool):
        self.field = field
        self.vars = tuple(vars)
        self.base = base
        self.exp = exp
        self.shift = tuple(shift)
        self.affine = affine
        self._expanded: Optional[SparsePoly] = None
        self._count: Optional[int] = None

    def count(self) -> int:
        if self._count is None:
            nb = len(self.base)
            if nb == 0:
                self._count = 0 if self.exp else 1
            elif nb == 1 or self.exp == 0:
                self._count = 1
            elif self.exp == 1:
                self._count = nb
            elif self.affine:
                self._count = multinomial_support_count(self.exp, nb, self.field)
            else:
                self._count = len(self.expanded())
        return self._count

    def expanded(self) -> SparsePoly:
        if self._expanded is None:
            n = self.count() if self.affine else 0
            if n > HARD_LIMIT:
                raise ExpansionTooLarge(f"factor would expand to {n} terms")
            self._expanded = pow_poly(self.base, self.exp).shift(self.shift)
        return self._expanded

    def lazy(self) -> bool:
        return self._expanded is None and self.affine and self.count() > LAZY_LIMIT

    def intervals(self) -> Tuple[list, Tuple[int, int]]:
        """Per-variable and total degree ranges of the monomials (exact)."""
        keys = list(self.base._terms)
        e = self.exp
        if not self.affine:
            g = self.expanded()
            keys = list(g._terms)
            per = [(min(k[i] for k in keys), max(k[i] for k in keys)) for i in range(len(self.vars))]
            tot = [sum(k) for k in keys]
            return per, (min(tot), max(tot))
        if len(keys) <= 1 or e == 0:
            k = keys[0] if keys and e else (0,) * len(self.vars)
            per = [(s + e * x, s + e * x) for s, x in zip(self.shift, k)]
            t = sum(self.shift) + e * sum(k)
            return per, (t, t)
        # affine base with >= 2 terms: (c*v)^e and some v-free term^e both occur
        has_const = any(not any(k) for k in keys)
        per = [(s, s + e) if any(k[i] for k in keys) else (s, s) for i, s in enumerate(self.shift)]
        st = sum(self.shift)
        return per, ((st, st + e) if has_const else (st + e, st + e))

    def support(self) -> int:
        keys = list(self.base._terms)
        if not self.affine or len(keys) != 2 or self._expanded is not None:
            return self.expanded().support()
        # two-term base: both extreme terms occur, and a mixed term occurs
        # iff some 0 < k < exp has C(exp, k) != 0
        a, b = keys
        sa = sum(1 for x, s in zip(a, self.shift) if x or s)
        sb = sum(1 for y, s in zip(b, self.shift) if y or s)
        best = max(sa, sb)
        if self.count() > 2:
            best = max(best, sum(1 for x, y, s in zip(a, b, self.shift) if x or y or s))
        return best

    def coefficient_at(self, key: Key) -> Raw:
        """Coefficient of the monomial ``key`` (aligned with ``vars``)."""
        keys = list(self.base._terms.items())
        if not self.lazy() or len(keys) != 2:
            return self.expanded()._terms.get(key, 0)
        (a, ca), (b, cb) = keys
        e = self.exp
        t = [x - s for x, s in zip(key, self.shift)]
        if any(x < 0 for x in t):
            return 0
        k = None
        for x, y, ti in zip(a, b, t):
            if x != y:
                q, r = divmod(ti - e * y, x - y)
                if r:
                    return 0
                k = q
                break
        if k is None or k < 0 or k > e:
            return 0
        if any(x * k + y * (e - k) != ti for x, y, ti in zip(a, b, t)):
            return 0
        F = self.field
        p = F.characteristic
        if p:
            return binomial_residue(e, k, p) * pow(ca, k, p) * pow(cb, e - k, p) % p
        return F.normalize(comb(e, k) * Fraction(ca) ** k * Fraction(cb) ** (e - k))


class FactoredTerm:
    """coeff * prod(factors) with pairwise variable-disjoint factors."""

    __slots__ = ("field", "universe", "coeff", "factors", "label", "_pos")

    def __init__(self, field: FieldSpec, universe: Sequence[str], coeff: Raw, factors: Sequence[Factor], label: str = ""):
        self.field = field
        self.universe = tuple(universe)
        self.coeff = coeff
        self.factors = tuple(factors)
        self.label = label
        idx = {v: i for i, v in enumerate(self.universe)}
        self._pos = tuple(tuple(idx[v] for v in fac.vars) for fac in self.factors)

    def sparsity(self) -> int:
        if not self.coeff:
            return 0
        n = 1
        for fac in self.factors:
            n *= fac.count()
        return n

    def support(self) -> int:
        if not self.sparsity():
            return 0
        return sum(fac.support() for fac in self.factors)

    def box(self) -> Tuple[list, Tuple[int, int]]:
        per = [(0, 0)] * len(self.universe)
        lo = hi = 0
        for fac, pos in zip(self.factors, self._pos):
            fper, (flo, fhi) = fac.intervals()
            for i, iv in zip(pos, fper):
                per[i] = iv
            lo += flo
            hi += fhi
        return per, (lo, hi)

    def lazy(self) -> bool:
        return any(fac.lazy() for fac in self.factors)

    def expand(self) -> SparsePoly:
        if self.sparsity() > HARD_LIMIT:
            raise ExpansionTooLarge(f"term {self.label!r} would expand to {self.sparsity()} terms")
        out = SparsePoly.constant(self.field, self.universe, self.coeff)
        for fac in self.factors:
            out = out * fac.expanded().embed(self.universe)
        return out

    def coefficient_at(self, key: Key) -> Raw:
        F = self.field
        c = self.coeff
        covered = set()
        for fac, pos in zip(self.factors, self._pos):
            covered.update(pos)
            c = F.mul(c, fac.coefficient_at(tuple(key[i] for i in pos)))
            if not c:
                return 0
        if any(key[i] for i in range(len(key)) if i not in covered):
            return 0
        return c


def factor_product(field: FieldSpec, universe: Sequence[str], coeff, powers: Iterable[Tuple[AffineForm, int]], label: str = "") -> FactoredTerm:
    """Group ``coeff * prod(form**e)`` into variable-disjoint :class:`Factor` objects."""
    F = field
    universe = tuple(universe)
    c = _raw(F, coeff)
    mono: Dict[str, int] = {}
    heavy: list = []
    for form, e in powers:
        if e == 0:
            continue
        sv = form.single_variable()
        if form.is_constant():
            c = F.mul(c, F.power(form.const, e))
        elif sv is not None:
            v, a = sv
            mono[v] = mono.get(v, 0) + e
            c = F.mul(c, F.power(a, e))
        else:
            heavy.append((form, e))
    # union-find on shared variables among the non-monomial forms
    parent = list(range(len(heavy)))

    def find(i):
        while parent[i] != i:
            parent[i] = parent[parent[i]]
            i = parent[i]
        return i

    owner: Dict[str, int] = {}
    for i, (form, _) in enumerate(heavy):
        for v in form.variables():
            if v in owner:
                parent[find(i)] = find(owner[v])
            else:
                owner[v] = i
    comps: Dict[int, list] = {}
    for i in range(len(heavy)):
        comps.setdefault(find(i), []).append(i)
    order = {v: j for j, v in enumerate(universe)}
    factors = []
    claimed = set()
    for members in comps.values():
        vs = sorted({v for i in members for v in heavy[i][0].variables()}, key=order.__getitem__)
        claimed.update(vs)
        shift = tuple(mono.get(v, 0) for v in vs)
        if len(members) == 1:
            form, e = heavy[members[0]]
            factors.append(Factor(F, vs, form.to_poly(vs), e, shift, affine=True))
        else:
            prod = SparsePoly.constant(F, vs, 1)
            for i in members:
                form, e = heavy[i]
                prod = prod * pow_poly(form.to_poly(vs), e)
            factors.append(Factor(F, vs, prod, 1, shift, affine=False))
    for v in sorted(mono, key=order.__getitem__):
        if v not in claimed:
            factors.append(Factor(F, (v,), SparsePoly.constant(F, (v,), 1), 1, (mono[v],), affine=True))
    return FactoredTerm(F, universe, c, factors, label)


def _boxes_disjoint(a, b) -> bool:
    (pa, (la, ha)), (pb, (lb, hb)) = a, b
    if ha < lb or hb < la:
        return True
    for (x0, x1), (y0, y1) in zip(pa, pb):
        if x1 < y0 or y1 < x0:
            return True
    return False


@dataclass
class Measurement:
    value: int
    per_term: list
    groups: list


def measure(terms: Sequence[FactoredTerm], statistic: str = "sparsity") -> Measurement:
    """Exact sparsity or support of ``sum(terms)``.

    Terms whose degree boxes are disjoint cannot share a monomial, so their
    counts add (sparsity) or their supports combine by max.  Terms whose boxes
    may meet are expanded and merged; a single oversized member of such a
    group is consulted coefficient-by-coefficient instead of being expanded.
    """
    if statistic not in ("sparsity", "support"):
        raise PolyError(f"unknown statistic {statistic!r}")
    per_term = [t.sparsity() if statistic == "sparsity" else t.support() for t in terms]
    live = [i for i, t in enumerate(terms) if t.sparsity()]
    boxes = {i: terms[i].box() for i in live}
    parent = {i: i for i in live}

    def find(i):
        while parent[i] != i:
            parent[i] = parent[parent[i]]
            i = parent[i]
        return i

    order = sorted(live, key=lambda i: boxes[i][1][0])
    active: list = []
    for i in order:
        lo = boxes[i][1][0]
        active = [j for j in active if boxes[j][1][1] >= lo]
        for j in active:
            if find(i) != find(j) and not _boxes_disjoint(boxes[i], boxes[j]):
                parent[find(i)] = find(j)
        active.append(i)
    groups: Dict[int, list] = {}
    for i in live:
        groups.setdefault(find(i), []).append(i)
    total = 0
    group_list = []
    for members in sorted(groups.values()):
        group_list.append(members)
        if len(members) == 1:
            v = per_term[members[0]]
        else:
            v = _group_value([terms[i] for i in members], statistic)
        total = total + v if statistic == "sparsity" else max(total, v)
    return Measurement(total, per_term, group_list)


def _group_value(members: Sequence[FactoredTerm], statistic: str) -> int:
    F = members[0].field
    members = sorted(members, key=lambda t: t.sparsity(), reverse=True)
    lazy = members[0] if members[0].lazy() else None
    rest = members[1:] if lazy is not None else members
    acc: Dict[Key, Raw] = {}
    for t in rest:
        for k, c in t.expand()._terms.items():
            acc[k] = F.add(acc.get(k, 0), c)
    if lazy is None:
        live = [k for k, c in acc.items() if c]
        if statistic == "sparsity":
            return len(live)
        return max((sum(1 for e in k if e) for k in live), default=0)
    base_count = lazy.sparsity()
    if statistic == "sparsity":
        delta = 0
        for k, c in acc.items():
            lc = lazy.coefficient_at(k)
            delta += (F.add(c, lc) != 0) - (lc != 0)
        return base_count + delta
    lsup = lazy.support()
    best = 0
    cancelled_top = False
    for k, c in acc.items():
        lc = lazy.coefficient_at(k)
        s = sum(1 for e in k if e)
        if F.add(c, lc) != 0:
            best = max(best, s)
        elif lc and s == lsup:
            cancelled_top = True
    if cancelled_top:
        merged = lazy.expand()
        for k, c in acc.items():
            merged = merged + SparsePoly(F, merged.vars, {k: c}, trusted=True)
        return merged.support()
    return max(best, lsup)
