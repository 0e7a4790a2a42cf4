"""Parameter schedules and instance builders for the 3-SAT reductions.

Every builder returns a :class:`ReductionInstance`: the expanded polynomial f,
the budget (sparsity s, or support sigma), the degree parameters, and the list
of summands in factored form (a coefficient times powers of affine forms).  The
factored summands are what witness verification works with; f itself is the
full expansion and is what the closed-form statistics are checked against.

Variable universes:

* etsparse:      x0, x1..xn, y1..yn
* etsparse-hom:  x0, y0, x1..xn, y1..yn
* setsparse:     x0, x1..xn
* etsupport:     z1..z_{sigma-5}, x1..xn, y1..yn
"""

from __future__ import annotations

from dataclasses import dataclass, field as dc_field
from fractions import Fraction
from itertools import combinations
from math import comb
from typing import Dict, List, Optional, Sequence, Tuple

from .algebra import FieldSpec, num_digits, smallest_pk_minus_1
from .cnf import (
    CnfFormula,
    DistinctRecord,
    FlipRecord,
    normalize_distinct,
    normalize_first_clause_complemented,
)
from .sparsepoly import AffineForm, SparsePoly, canonical_dumps, check_degree_separated, pow_poly

PROBLEMS = ("etsparse", "etsparse-hom", "etsupport", "setsparse")


class ReductionError(ValueError):
    pass


def char_regime(field: FieldSpec) -> str:
    p = field.characteristic
    return "char0" if p == 0 else "char2" if p == 2 else "charp"


@dataclass(frozen=True)
class GapSpec:
    """Gap regime request: epsilon in (0, 1/3) and the explicit base-degree floor."""

    epsilon: Fraction
    base_degree: int

    def __post_init__(self) -> None:
        eps = Fraction(self.epsilon)
        object.__setattr__(self, "epsilon", eps)
        if not (0 < eps < Fraction(1, 3)):
            raise ReductionError("epsilon must lie in (0, 1/3)")
        if self.base_degree < 1:
            raise ReductionError("base degree must be positive")


@dataclass(frozen=True)
class Variant:
    problem: str
    char_regime: str
    gap: Optional[GapSpec] = None
    translations_hardened: bool = False

    def __post_init__(self) -> None:
        if self.problem not in PROBLEMS:
            raise ReductionError(f"unknown problem {self.problem!r}")
        if self.translations_hardened and self.problem != "etsparse":
            raise ReductionError("the translation-hardened construction exists only for non-homogeneous etsparse")
        if self.translations_hardened and self.gap is not None:
            raise ReductionError("gap parameters with the translation-hardened construction are not supported")
        if self.problem == "etsupport" and self.gap is not None:
            raise ReductionError("etsupport has no gap regime")

    @classmethod
    def of(cls, problem: str, field: FieldSpec, gap: Optional[GapSpec] = None, translations_hardened: bool = False) -> "Variant":
        return cls(problem, char_regime(field), gap, translations_hardened)

    def to_json_obj(self) -> dict:
        return {
            "problem": self.problem,
            "char_regime": self.char_regime,
            "gap": None if self.gap is None else {"epsilon": str(self.gap.epsilon), "base_degree": str(self.gap.base_degree)},
            "translations_hardened": self.translations_hardened,
        }


@dataclass(frozen=True)
class DegreeParams:
    """Degree parameters.  ``s`` is the instance budget (s_0 in gap regimes)."""

    d1: Optional[int] = None
    d2: Optional[int] = None
    d3: Optional[int] = None
    d4: Optional[int] = None
    d5: Optional[int] = None
    s: Optional[int] = None
    s0: Optional[int] = None
    sigma: Optional[int] = None
    epsilon: Optional[Fraction] = None
    override_base_degree: Optional[int] = None
    power_schedule: Tuple[int, ...] = ()
    schedule: str = "char0"
    sparsity_of_f: Optional[int] = None

    def as_dict(self) -> Dict[str, int]:
        return {k: getattr(self, k) for k in ("d1", "d2", "d3", "d4", "d5") if getattr(self, k) is not None}

    @property
    def gap_exponent(self) -> Optional[Fraction]:
        """alpha = s^(1/3 - epsilon); the exponent is stored exactly."""
        return None if self.epsilon is None else Fraction(1, 3) - self.epsilon

    def to_json_obj(self) -> dict:
        out = {k: str(v) for k, v in self.as_dict().items()}
        for k in ("s", "s0", "sigma", "override_base_degree", "sparsity_of_f"):
            v = getattr(self, k)
            if v is not None:
                out[k] = str(v)
        if self.epsilon is not None:
            out["epsilon"] = str(self.epsilon)
            out["alpha"] = f"s^({self.gap_exponent})"
        if self.power_schedule:
            out["power_schedule"] = [str(x) for x in self.power_schedule]
        out["schedule"] = self.schedule
        return out


# ---------------------------------------------------------------------------------
# parameter selection

def _pk(lower: int, p: int) -> int:
    return smallest_pk_minus_1(lower, p)


def _nonhom_char0(n: int, m: int) -> dict:
    d4 = m
    d3 = m * (m + 1) ** 2 + 1
    d2 = 2 * d3
    s = 1 + n * (3 + d3) + m * (d4 + 1) ** 2
    return dict(d1=max(s, d2 + 1), d2=d2, d3=d3, d4=d4, s=s)


def _nonhom_charp(n: int, m: int, p: int) -> dict:
    d4 = _pk(m, p)
    d3 = _pk(m * (d4 + 1) ** 2 + 1, p)
    d2 = _pk(2 * d3, p)
    s = 1 + n * (3 + d3) + m * (d4 + 1) ** 2
    d1 = _pk(max(s, d2 + 1), p)
    return dict(d1=d1, d2=d2, d3=d3, d4=d4, s=s)


def _translated_char0(n: int, m: int) -> dict:
    d4 = m
    d3 = m * (m + 1) ** 2 + 1
    d2 = 2 * d3
    d1 = 6 * n * (d2 + 1) + 2 * d3 + 2
    s = 1 + n * (d3 + 3) + m * (d4 + 1) ** 2
    return dict(d1=d1, d2=d2, d3=d3, d4=d4, s=s)


def _translated_charp(n: int, m: int, p: int) -> dict:
    d4 = _pk(m, p)
    d3 = _pk(m * (d4 + 1) ** 2 + 1, p)
    d2 = _pk(2 * d3, p)
    d1 = _pk(6 * n * (d2 + 1) + 2 * d3 + 2, p)
    s = 1 + n * (d3 + 3) + m * (d4 + 1) ** 2
    return dict(d1=d1, d2=d2, d3=d3, d4=d4, s=s)


def _hom_tail_char0(n: int, m: int, d3: int, s: int) -> Tuple[int, int]:
    w = (3 * n + m + 1) * (d3 + 1)
    d2 = max(w, s) + 1
    return d2 + w + 1, d2


def _hom_char0(n: int, m: int) -> dict:
    d5 = m
    d4 = m * (d5 + 1) ** 2 + 1
    d3 = 2 * d4
    s = 1 + n * (d4 + 3) + m * (d5 + 1) ** 2
    d1, d2 = _hom_tail_char0(n, m, d3, s)
    return dict(d1=d1, d2=d2, d3=d3, d4=d4, d5=d5, s=s)


def _hom_tail_charp(n: int, m: int, d3: int, k1: int, p: int) -> Tuple[int, int]:
    w = (3 * n + m + 1) * (d3 + 1)
    k2 = num_digits(w, p)
    d2 = p ** (k1 + k2) - p**k2
    k3 = num_digits(d2 + w, p)
    d1 = p ** (k1 + k3) - p**k3
    return d1, d2


def _hom_charp(n: int, m: int, p: int) -> dict:
    d5 = _pk(m, p)
    d4 = _pk(m * (d5 + 1) ** 2 + 1, p)
    d3 = p * d4 + p - 1
    s = 1 + n * (d4 + 3) + m * (d5 + 1) ** 2
    d1, d2 = _hom_tail_charp(n, m, d3, num_digits(s, p), p)
    return dict(d1=d1, d2=d2, d3=d3, d4=d4, d5=d5, s=s)


def _hom_total_degree(n: int, m: int, d: dict) -> int:
    return d["d1"] + d["d2"] + (3 * n + m + 1) * (d["d3"] + 1)


def _shift_char0(n: int, m: int) -> dict:
    d3 = m
    d2 = m * (d3 + 1) ** 2 + 1
    d1 = 4 * n * (d2 + 1) + 2 * d2 + 2
    s = 1 + n * (d2 + 2) + m * (d3 + 1) ** 2
    return dict(d1=d1, d2=d2, d3=d3, s=s)


def _shift_charp(n: int, m: int, p: int) -> dict:
    d3 = _pk(m, p)
    d2 = _pk(m * (d3 + 1) ** 2 + 1, p)
    d1 = _pk(4 * n * (d2 + 1) + 2 * d2 + 2, p)
    s = 1 + n * (d2 + 2) + m * (d3 + 1) ** 2
    return dict(d1=d1, d2=d2, d3=d3, s=s)


# gap regimes ---------------------------------------------------------------------

def _gap_nonhom_char0(n: int, m: int, base: int) -> dict:
    d4 = base
    d3 = m * (d4 + 1) ** 2 + 1
    d2 = d3**2 + 1
    s0 = 1 + n * (d3 + 3) + m * (d4 + 1) ** 2
    return dict(d1=d2 + 1, d2=d2, d3=d3, d4=d4, s0=s0)


def _gap_nonhom_charp(n: int, m: int, base: int, p: int) -> dict:
    d4 = _pk(base, p)
    d3 = _pk(m * (d4 + 1) ** 2 + 1, p)
    d2 = _pk(max((d3 + 1) ** 2 + 1, 2 * d3), p)
    s0 = 1 + n * (d3 + 3) + m * (d4 + 1) ** 2
    d1 = _pk(max(d2 + 1, s0), p)
    return dict(d1=d1, d2=d2, d3=d3, d4=d4, s0=s0)


def _gap_hom_char0(n: int, m: int, base: int) -> dict:
    d5 = base
    d4 = m * (d5 + 1) ** 2 + 1
    d3 = d4**2 + 1
    s0 = 1 + n * (d4 + 3) + m * (d5 + 1) ** 2
    d1, d2 = _hom_tail_char0(n, m, d3, s0)
    return dict(d1=d1, d2=d2, d3=d3, d4=d4, d5=d5, s0=s0)


def _gap_hom_charp(n: int, m: int, base: int, p: int) -> dict:
    d5 = _pk(base, p)
    d4 = _pk(m * (d5 + 1) ** 2 + 1, p)
    d3 = _pk(max((d4 + 1) ** 2 + 1, 2 * d4), p)
    s0 = 1 + n * (d4 + 3) + m * (d5 + 1) ** 2
    k1 = max(num_digits(d3 + 2, p), num_digits(s0, p))
    d1, d2 = _hom_tail_charp(n, m, d3, k1, p)
    return dict(d1=d1, d2=d2, d3=d3, d4=d4, d5=d5, s0=s0)


def _gap_shift_char0(n: int, m: int, base: int) -> dict:
    d3 = base
    d2 = m * (d3 + 1) ** 2 + 1
    d1 = d2**2 + 4 * n * (d2 + 1) + 2 * d2 + 2
    s0 = 1 + n * (d2 + 2) + m * (d3 + 1) ** 2
    return dict(d1=d1, d2=d2, d3=d3, s0=s0)


def _gap_shift_charp(n: int, m: int, base: int, p: int) -> dict:
    d3 = _pk(base, p)
    d2 = _pk(m * (d3 + 1) ** 2 + 1, p)
    d1 = _pk(d2**2 + 4 * n * (d2 + 1) + 2 * d2 + 3, p)
    s0 = 1 + n * (d2 + 2) + m * (d3 + 1) ** 2
    return dict(d1=d1, d2=d2, d3=d3, s0=s0)


def _closed_sparsity(problem: str, n: int, m: int, d: dict) -> int:
    """S(f) for the odd-characteristic constructions (upper bound in char 2)."""
    if problem == "etsparse":
        return 1 + n * (2 * d["d3"] + 3) + m * (d["d4"] + 1) ** 3
    if problem == "etsparse-hom":
        return 1 + n * (2 * d["d4"] + 3) + m * (d["d5"] + 1) ** 3
    if problem == "setsparse":
        return 1 + n * (2 * d["d2"] + 2) + m * (d["d3"] + 1) ** 3
    raise ReductionError(problem)


def etsupport_counts(n: int, sigma: int) -> Tuple[int, int]:
    """(|P|, |Q|) for the support construction."""
    P = comb(n + sigma - 5, sigma)
    if sigma % 2 == 0:
        Q = comb(n, sigma // 2)
    else:
        Q = comb(n, (sigma + 1) // 2) * ((sigma + 1) // 2)
    return P, Q


def etsupport_power_schedule(N: int, sigma: int, field: FieldSpec) -> Tuple[Tuple[int, ...], str]:
    """Powers for the N monomials of P and Q, in order."""
    p = field.characteristic
    if p == 0 or p > sigma + N:
        return tuple(sigma + i for i in range(1, N + 1)), "char0"
    powers = []
    lo, hi = sigma + 1, p * (sigma + 1)
    for _ in range(N):
        v = _pk(lo, p)
        if v > hi:
            raise ReductionError(f"no p^t-1 in interval [{lo}, {hi}]")
        powers.append(v)
        lo, hi = hi + 1, p * hi + p
    return tuple(powers), "pk-1-intervals"


def select_params(variant: Variant, field: FieldSpec, n: int, m: int, override_base_degree: Optional[int] = None,
                  sigma: Optional[int] = None) -> DegreeParams:
    """Deterministic degree parameters for ``variant`` over ``field``."""
    if n < 1 or m < 1:
        raise ReductionError("need n >= 1 and m >= 1")
    p = field.characteristic
    prob = variant.problem
    if variant.char_regime != char_regime(field):
        raise ReductionError("variant regime does not match the field")

    if prob == "etsupport":
        if sigma is None or sigma < 5:
            raise ReductionError("etsupport needs sigma >= 5")
        if p != 0 and p <= sigma + 1:
            raise ReductionError(f"etsupport needs characteristic 0 or > sigma+1 = {sigma + 1}")
        if n < sigma + 4:
            raise ReductionError(f"etsupport needs n >= sigma + 4 = {sigma + 4}")
        P, Q = etsupport_counts(n, sigma)
        powers, sched = etsupport_power_schedule(P + Q, sigma, field)
        return DegreeParams(s=sigma, sigma=sigma, power_schedule=powers, schedule=sched)

    gap = variant.gap
    if gap is None:
        if override_base_degree is not None:
            raise ReductionError("override_base_degree only applies to gap regimes")
        if prob == "etsparse":
            if variant.translations_hardened:
                d = _translated_char0(n, m)
                if p and p <= d["d1"]:
                    d, sched = _translated_charp(n, m, p), "pk-1"
                else:
                    sched = "char0"
            else:
                d = _nonhom_char0(n, m)
                if p and p <= d["d1"]:
                    d, sched = _nonhom_charp(n, m, p), "pk-1"
                else:
                    sched = "char0"
        elif prob == "etsparse-hom":
            d = _hom_char0(n, m)
            if p and p <= _hom_total_degree(n, m, d):
                d, sched = _hom_charp(n, m, p), "pk-1"
            else:
                sched = "char0"
        else:
            d = _shift_char0(n, m)
            if p and p <= d["d1"]:
                d, sched = _shift_charp(n, m, p), "pk-1"
            else:
                sched = "char0"
        s = d.pop("s")
        params = DegreeParams(**d, s=s, schedule=sched)
        _check_invariants(variant, n, m, params, p)
        return params

    base = override_base_degree if override_base_degree is not None else gap.base_degree
    if base < m:
        raise ReductionError(f"base degree {base} is below the structural minimum m = {m}")
    if prob == "etsparse":
        d = _gap_nonhom_char0(n, m, base)
        if p and p <= d["d1"]:
            d, sched = _gap_nonhom_charp(n, m, base, p), "pk-1"
        else:
            sched = "char0"
    elif prob == "etsparse-hom":
        d = _gap_hom_char0(n, m, base)
        if p and p <= d["d1"]:
            d, sched = _gap_hom_charp(n, m, base, p), "pk-1"
        else:
            sched = "char0"
    else:
        d = _gap_shift_char0(n, m, base)
        if p and p <= d["d1"]:
            d, sched = _gap_shift_charp(n, m, base, p), "pk-1"
        else:
            sched = "char0"
    s0 = d.pop("s0")
    params = DegreeParams(**d, s=s0, s0=s0, epsilon=gap.epsilon, override_base_degree=base, schedule=sched,
                          sparsity_of_f=_closed_sparsity(prob, n, m, d))
    _check_invariants(variant, n, m, params, p)
    return params


def _is_pk_minus_1(v: int, p: int) -> bool:
    v += 1
    while v % p == 0:
        v //= p
    return v == 1


def _check_invariants(variant: Variant, n: int, m: int, P: DegreeParams, p: int) -> None:
    """Assert the defining inequalities of the chosen parameter system."""
    prob = variant.problem
    ok = True
    if prob == "etsparse" and not variant.translations_hardened:
        ok = P.d1 >= max(P.s, P.d2 + 1) and P.d2 >= 2 * P.d3 and P.d3 >= m * (P.d4 + 1) ** 2 + 1 and P.d4 >= m
        if P.epsilon is not None:
            ok = ok and P.d2 > (P.d3 + 1) ** 2 - (2 * P.d3 + 1) and P.d1 > P.d2
    elif prob == "etsparse":
        ok = (P.d1 >= 6 * n * (P.d2 + 1) + 2 * P.d3 + 2 and P.d2 >= 2 * P.d3
              and P.d3 >= m * (P.d4 + 1) ** 2 + 1 and P.d4 >= m)
    elif prob == "etsparse-hom":
        w = (3 * n + m + 1) * (P.d3 + 1)
        ok = (P.d1 >= P.d2 + w + 1 and P.d2 >= max(w, P.s) + 1 and P.d3 >= 2 * P.d4
              and P.d4 >= m * (P.d5 + 1) ** 2 + 1 and P.d5 >= m)
    elif prob == "setsparse":
        ok = P.d1 >= 4 * n * (P.d2 + 1) + 2 * P.d2 + 2 and P.d2 >= m * (P.d3 + 1) ** 2 + 1 and P.d3 >= m
        if P.epsilon is not None:
            ok = ok and P.d1 > P.d2**2 + 4 * n * (P.d2 + 1) + 2 * P.d2 + 1
    if P.schedule == "pk-1" and p:
        names = ("d3", "d4", "d5") if prob == "etsparse-hom" else tuple(P.as_dict())
        ok = ok and all(_is_pk_minus_1(getattr(P, k), p) for k in names if getattr(P, k) is not None)
    if not ok:
        raise ReductionError(f"internal error: parameters {P} violate the constraint system")


# ---------------------------------------------------------------------------------
# instances

@dataclass(frozen=True)
class Summand:
    """coeff * prod(form ** exp) plus provenance."""

    label: str
    group: str
    index: int
    powers: Tuple[Tuple[AffineForm, int], ...]
    coeff: int = 1

    def variables(self) -> Tuple[str, ...]:
        seen: List[str] = []
        for form, _ in self.powers:
            for v in form.variables():
                if v not in seen:
                    seen.append(v)
        return tuple(seen)

    def expand(self, field: FieldSpec, universe: Sequence[str]) -> SparsePoly:
        out = SparsePoly.constant(field, universe, self.coeff)
        for form, e in self.powers:
            out = out * pow_poly(form.to_poly(universe), e)
        return out

    def to_json_obj(self) -> dict:
        return {
            "label": self.label,
            "group": self.group,
            "index": self.index,
            "coeff": str(self.coeff),
            "factors": [dict(form.to_json_obj(), exp=str(e)) for form, e in self.powers],
        }


@dataclass
class ReductionInstance:
    f: SparsePoly
    budget: int
    statistic: str
    params: DegreeParams
    variant: Variant
    field: FieldSpec
    source: CnfFormula
    formula: CnfFormula
    records: Tuple[object, ...]
    summands: Tuple[Summand, ...]
    universe: Tuple[str, ...]
    cache: dict = dc_field(default_factory=dict, repr=False, compare=False)

    @property
    def n(self) -> int:
        return self.formula.n

    @property
    def m(self) -> int:
        return self.formula.m

    def flip_record(self) -> FlipRecord:
        for r in self.records:
            if isinstance(r, FlipRecord):
                return r
        return FlipRecord()

    def distinct_record(self) -> Optional[DistinctRecord]:
        for r in self.records:
            if isinstance(r, DistinctRecord):
                return r
        return None

    def to_formula_assignment(self, u: Sequence[int]) -> Tuple[int, ...]:
        """Map an assignment of the source formula to the built (normalized) formula."""
        if len(u) != self.source.n:
            raise ReductionError(f"assignment length {len(u)} != source n {self.source.n}")
        rec = self.distinct_record()
        v = rec.extend(u) if rec else tuple(u)
        return self.flip_record().apply(v)

    def to_source_assignment(self, u: Sequence[int]) -> Tuple[int, ...]:
        v = self.flip_record().apply(u)
        rec = self.distinct_record()
        return rec.restrict(v) if rec else tuple(v)

    def summand_polys(self) -> List[SparsePoly]:
        return [s.expand(self.field, self.universe) for s in self.summands]

    def separation_variable(self) -> Optional[str]:
        if self.variant.problem in ("etsparse-hom", "setsparse") or self.variant.translations_hardened:
            return "x0"
        return None

    def check_separation(self) -> bool:
        """The summands are pairwise degree separated (totally or w.r.t. x0).

        For etsupport the P and Q monomials and the R_k block are separated by
        total degree and every pair R_k, R_l by the degree in some x_j or y_j.
        """
        polys = self.summand_polys()
        if self.variant.problem != "etsupport":
            return check_degree_separated(polys, self.separation_variable())
        pq = [g for g, s in zip(polys, self.summands) if s.group in ("P", "Q")]
        rs = [g for g, s in zip(polys, self.summands) if s.group == "R"]
        r_block = SparsePoly.zero(self.field, self.universe)
        for g in rs:
            r_block = r_block + g
        if not check_degree_separated(pq + ([r_block] if rs else [])):
            return False
        # every monomial pair from distinct R_k differs in some x/y exponent
        xy = [i for i, v in enumerate(self.universe) if v[0] in "xy"]
        seen: Dict[tuple, int] = {}
        for k, g in enumerate(rs):
            for proj in {tuple(key[i] for i in xy) for key in g.terms}:
                if seen.setdefault(proj, k) != k:
                    return False
        return True

    def to_json_obj(self) -> dict:
        obj = self.f.to_json_obj()
        obj["meta"] = {
            "variant": self.variant.to_json_obj(),
            "field": self.field.label,
            "statistic": self.statistic,
            "budget": str(self.budget),
            "params": self.params.to_json_obj(),
            "source": self.source.to_json_obj(),
            "formula": self.formula.to_json_obj(),
            "records": [r.to_json_obj() for r in self.records],
            "summands": [s.to_json_obj() for s in self.summands],
        }
        return obj

    def to_json(self) -> str:
        return canonical_dumps(self.to_json_obj())


def instance_from_json_obj(obj: dict) -> ReductionInstance:
    """Rebuild an instance from its serialized form and check it against the stored f."""
    meta = obj["meta"]
    field = FieldSpec.parse(meta["field"])
    v = meta["variant"]
    gap = None
    if v["gap"] is not None:
        gap = GapSpec(Fraction(v["gap"]["epsilon"]), int(v["gap"]["base_degree"]))
    source = CnfFormula.from_json_obj(meta["source"])
    normalize = any(r.get("kind") == "distinct" for r in meta["records"])
    prob = v["problem"]
    params = meta["params"]
    if prob == "etsupport":
        inst = build_etsupport(source, int(params["sigma"]), field, normalize=normalize)
    elif prob == "setsparse":
        inst = build_setsparse(source, field, gap=gap, normalize=normalize)
    else:
        inst = build_etsparse(source, field, homogeneous=prob == "etsparse-hom",
                              translations_hardened=v["translations_hardened"], gap=gap, normalize=normalize)
    stored = SparsePoly.from_json_obj(obj)
    if stored != inst.f:
        raise ReductionError("serialized polynomial does not match the rebuilt instance")
    return inst


def _prepare(psi: CnfFormula, normalize: bool, complement_first: bool) -> Tuple[CnfFormula, Tuple[object, ...]]:
    records: List[object] = []
    if normalize:
        psi2, rec = normalize_distinct(psi)
        if rec.fresh or rec.dropped:
            records.append(rec)
        psi = psi2
    psi.check_normal()
    if psi.m == 0:
        raise ReductionError("formula has no clauses after normalization")
    if complement_first:
        psi, flip = normalize_first_clause_complemented(psi)
        records.append(flip)
    return psi, tuple(records)


def _var(F: FieldSpec, v: str) -> AffineForm:
    return AffineForm.var(F, v)


def _lin(F: FieldSpec, y: str, x: str, c) -> AffineForm:
    """y + c*x."""
    return AffineForm.make(F, {y: 1, x: c})


def _finish(F, universe, summands, budget, statistic, params, variant, source, psi, records) -> ReductionInstance:
    f = SparsePoly.zero(F, universe)
    for s in summands:
        f = f + s.expand(F, universe)
    return ReductionInstance(f, budget, statistic, params, variant, F, source, psi, records, tuple(summands), tuple(universe))


def build_etsparse(psi: CnfFormula, field: FieldSpec, homogeneous: bool = False, translations_hardened: bool = False,
                   gap: Optional[GapSpec] = None, normalize: bool = False,
                   override_base_degree: Optional[int] = None) -> ReductionInstance:
    """Build the ETsparse polynomial (non-homogeneous, homogeneous or translation-hardened)."""
    F = field
    problem = "etsparse-hom" if homogeneous else "etsparse"
    variant = Variant.of(problem, F, gap, translations_hardened)
    char2 = F.characteristic == 2
    source = psi
    psi, records = _prepare(psi, normalize, complement_first=char2 and gap is not None)
    n, m = psi.n, psi.m
    P = select_params(variant, F, n, m, override_base_degree)
    x = [f"x{i}" for i in range(n + 1)]
    y = [f"y{i}" for i in range(n + 1)]
    universe = ["x0"] + (["y0"] if homogeneous else []) + x[1:] + y[1:]
    X0 = _var(F, "x0")
    summands: List[Summand] = []
    minus = F.neg(1)

    if not homogeneous:
        d1, d2, d3, d4 = P.d1, P.d2, P.d3, P.d4
        if translations_hardened:
            e1 = lambda i: (3 * i - 2) * (d2 + 1)
            e2 = lambda i: (3 * i - 1) * (d2 + 1)
            e3 = lambda i: 3 * i * (d2 + 1)
            er = lambda k: k * (3 * d4 + 1)
            q1exp = d2
        else:
            e1 = lambda i: (3 * i - 2) * d1
            e2 = lambda i: (3 * i - 1) * d1
            e3 = lambda i: 3 * i * d1
            er = lambda k: (3 * n + k) * d1
            q1exp = d2
        summands.append(Summand("x0^d1", "lead", 0, ((X0, d1),)))
        for i in range(1, n + 1):
            xi, yi = x[i], y[i]
            summands.append(Summand(f"Q{i},1", "Q", i, ((X0, e1(i)), (_var(F, xi), q1exp))))
            summands.append(Summand(f"Q{i},2", "Q", i, ((X0, e2(i)), (_lin(F, yi, xi, 1), d3))))
            third = _var(F, yi) if char2 else _lin(F, yi, xi, minus)
            summands.append(Summand(f"Q{i},3", "Q", i, ((X0, e3(i)), (third, d3))))
        for k in range(1, m + 1):
            bits = psi.complement_bits(k - 1)
            factors = [(X0, er(k))]
            for j in psi.support_set(k - 1):
                c = bits[j] if char2 else (minus if bits[j] else 1)
                factors.append((_lin(F, y[j], x[j], c), d4))
            summands.append(Summand(f"R{k}", "R", k, tuple(factors)))
    else:
        d1, d2, d3, d4, d5 = P.d1, P.d2, P.d3, P.d4, P.d5
        Y0 = _var(F, "y0")
        w = 3 * n + m
        summands.append(Summand("x0^d1*y0^..", "lead", 0, ((X0, d1), (Y0, d2 + (w + 1) * (d3 + 1)))))
        for i in range(1, n + 1):
            xi, yi = x[i], y[i]
            summands.append(Summand(f"Q{i},1", "Q", i, (
                (X0, d1 + (3 * i - 2) * (d3 + 1)), (Y0, d2 + (w - 3 * i + 3) * (d3 + 1) - d3), (_var(F, xi), d3))))
            summands.append(Summand(f"Q{i},2", "Q", i, (
                (X0, d1 + (3 * i - 1) * (d3 + 1)), (Y0, d2 + (w - 3 * i + 2) * (d3 + 1) - d4), (_lin(F, yi, xi, 1), d4))))
            third = _var(F, yi) if char2 else _lin(F, yi, xi, minus)
            summands.append(Summand(f"Q{i},3", "Q", i, (
                (X0, d1 + 3 * i * (d3 + 1)), (Y0, d2 + (w - 3 * i + 1) * (d3 + 1) - d4), (third, d4))))
        for k in range(1, m + 1):
            bits = psi.complement_bits(k - 1)
            factors = [(X0, d1 + (3 * n + k) * (d3 + 1)), (Y0, d2 + (m - k + 1) * (d3 + 1) - 3 * d5)]
            for j in psi.support_set(k - 1):
                c = bits[j] if char2 else (minus if bits[j] else 1)
                factors.append((_lin(F, y[j], x[j], c), d5))
            summands.append(Summand(f"R{k}", "R", k, tuple(factors)))
    return _finish(F, universe, summands, P.s, "sparsity", P, variant, source, psi, records)


def build_setsparse(psi: CnfFormula, field: FieldSpec, gap: Optional[GapSpec] = None, normalize: bool = False,
                    override_base_degree: Optional[int] = None) -> ReductionInstance:
    """Build the shift-equivalence (SETsparse) polynomial over x0, x1..xn."""
    F = field
    variant = Variant.of("setsparse", F, gap)
    char2 = F.characteristic == 2
    source = psi
    psi, records = _prepare(psi, normalize, complement_first=char2 and gap is not None)
    n, m = psi.n, psi.m
    P = select_params(variant, F, n, m, override_base_degree)
    d1, d2, d3 = P.d1, P.d2, P.d3
    universe = ["x0"] + [f"x{i}" for i in range(1, n + 1)]
    X0 = _var(F, "x0")
    minus = F.neg(1)
    summands: List[Summand] = [Summand("x0^d1", "lead", 0, ((X0, d1),))]
    for i in range(1, n + 1):
        xi = f"x{i}"
        if char2:
            first = _var(F, xi)
            second = AffineForm.make(F, {xi: 1}, 1)
        else:
            first = AffineForm.make(F, {xi: 1}, 1)
            second = AffineForm.make(F, {xi: 1}, minus)
        summands.append(Summand(f"Q{i},1", "Q", i, ((X0, (2 * i - 1) * (d2 + 1)), (first, d2))))
        summands.append(Summand(f"Q{i},2", "Q", i, ((X0, 2 * i * (d2 + 1)), (second, d2))))
    for k in range(1, m + 1):
        bits = psi.complement_bits(k - 1)
        factors = [(X0, k)]
        for j in psi.support_set(k - 1):
            c = bits[j] if char2 else (minus if bits[j] else 1)
            factors.append((AffineForm.make(F, {f"x{j}": 1}, c), d3))
        summands.append(Summand(f"R{k}", "R", k, tuple(factors)))
    return _finish(F, universe, summands, P.s, "sparsity", P, variant, source, psi, records)


def build_etsupport(psi: CnfFormula, sigma: int, field: FieldSpec, normalize: bool = False) -> ReductionInstance:
    """Build the support-sigma construction over z1..z_{sigma-5}, x1..xn, y1..yn."""
    F = field
    variant = Variant.of("etsupport", F)
    source = psi
    psi, records = _prepare(psi, normalize, complement_first=True)
    if psi.has_repeated_clauses():
        raise ReductionError("etsupport requires pairwise distinct clauses")
    n, m = psi.n, psi.m
    P = select_params(variant, F, n, m, sigma=sigma)
    zs = [f"z{i}" for i in range(1, sigma - 4)]
    xs = [f"x{i}" for i in range(1, n + 1)]
    ys = [f"y{i}" for i in range(1, n + 1)]
    universe = zs + xs + ys
    powers = iter(P.power_schedule)
    summands: List[Summand] = []
    for idx, subset in enumerate(combinations(zs + xs, sigma), start=1):
        e = next(powers)
        summands.append(Summand(f"P{idx}", "P", idx, tuple((_var(F, v), e) for v in subset)))
    idx = 0
    if sigma % 2 == 0:
        for subset in combinations(range(1, n + 1), sigma // 2):
            idx += 1
            e = next(powers)
            facs = []
            for i in subset:
                facs += [(_var(F, f"x{i}"), e), (_var(F, f"y{i}"), e)]
            summands.append(Summand(f"Qs{idx}", "Q", idx, tuple(facs)))
    else:
        h = (sigma + 1) // 2
        for subset in combinations(range(1, n + 1), h):
            for lone in subset:
                idx += 1
                e = next(powers)
                facs = []
                for i in subset:
                    facs.append((_var(F, f"x{i}"), e))
                    if i != lone:
                        facs.append((_var(F, f"y{i}"), e))
                summands.append(Summand(f"Qs{idx}", "Q", idx, tuple(facs)))
    minus = F.neg(1)
    for k in range(1, m + 1):
        bits = psi.complement_bits(k - 1)
        facs = []
        for j in psi.support_set(k - 1):
            a = bits[j]
            facs.append((_lin(F, f"y{j}", f"x{j}", minus if a else 0), 2 + a))
        facs += [(_var(F, z), 1) for z in zs]
        summands.append(Summand(f"R{k}", "R", k, tuple(facs)))
    return _finish(F, universe, summands, sigma, "support", P, variant, source, psi, records)


def build(problem: str, psi: CnfFormula, field: FieldSpec, *, sigma: Optional[int] = None, gap: Optional[GapSpec] = None,
          translations_hardened: bool = False, normalize: bool = False) -> ReductionInstance:
    """Dispatch on the problem name."""
    if problem == "etsupport":
        return build_etsupport(psi, sigma if sigma is not None else 5, field, normalize=normalize)
    if problem == "setsparse":
        return build_setsparse(psi, field, gap=gap, normalize=normalize)
    if problem in ("etsparse", "etsparse-hom"):
        return build_etsparse(psi, field, homogeneous=problem == "etsparse-hom",
                              translations_hardened=translations_hardened, gap=gap, normalize=normalize)
    raise ReductionError(f"unknown problem {problem!r}")


# ---------------------------------------------------------------------------------
# closed forms (used as oracles by tests and reports)

@dataclass(frozen=True)
class ClosedForm:
    sparsity_lo: int
    sparsity_hi: int
    support_lo: int
    support_hi: int
    degree: Optional[int] = None

    @property
    def exact(self) -> bool:
        return self.sparsity_lo == self.sparsity_hi and self.support_lo == self.support_hi


def closed_form(inst: ReductionInstance) -> ClosedForm:
    """Sparsity/support of f predicted by the construction's counting argument."""
    P = inst.params
    n, m = inst.n, inst.m
    prob = inst.variant.problem
    char2 = inst.field.characteristic == 2
    if prob == "etsupport":
        sigma = P.sigma
        Pc, Qc = etsupport_counts(n, sigma)
        return ClosedForm(Pc + Qc + m, Pc + Qc + 64 * m, sigma + 1, sigma + 1)
    if prob == "etsparse":
        d1, d3, d4 = P.d1, P.d3, P.d4
        deg = None if inst.variant.translations_hardened else (3 * n + m) * d1 + 3 * d4
        if char2:
            return ClosedForm(1 + n * (d3 + 3) + m, 1 + n * (d3 + 3) + m * (d4 + 1) ** 3, 4, 7, deg)
        s = 1 + n * (2 * d3 + 3) + m * (d4 + 1) ** 3
        return ClosedForm(s, s, 7, 7, deg)
    if prob == "etsparse-hom":
        d4, d5 = P.d4, P.d5
        deg = P.d1 + P.d2 + (3 * n + m + 1) * (P.d3 + 1)
        if char2:
            return ClosedForm(1 + n * (d4 + 3) + m, 1 + n * (d4 + 3) + m * (d5 + 1) ** 3, 5, 8, deg)
        s = 1 + n * (2 * d4 + 3) + m * (d5 + 1) ** 3
        return ClosedForm(s, s, 8, 8, deg)
    d2, d3 = P.d2, P.d3
    if char2:
        return ClosedForm(1 + n * (d2 + 2) + m, 1 + n * (d2 + 2) + m * (d3 + 1) ** 3, 4, 4, P.d1)
    s = 1 + n * (2 * d2 + 2) + m * (d3 + 1) ** 3
    return ClosedForm(s, s, 4, 4, P.d1)


def _mixed(d: int) -> bool:
    """Whether (y + c x)^d, c != 0, has a monomial containing both variables."""
    return d >= 2


def exact_statistics(inst: ReductionInstance) -> Tuple[int, int]:
    """(S(f), Supp(f)) counted clause by clause from the summand shapes.

    This is finer than :func:`closed_form`: it accounts for the actual
    complement pattern in characteristic 2 and for exponents too small to
    produce mixed monomials (d4 = 1 at m = 1 in characteristic 0).
    """
    P = inst.params
    n = inst.n
    psi = inst.formula
    prob = inst.variant.problem
    char2 = inst.field.characteristic == 2
    clauses = [psi.complement_bits(k) for k in range(psi.m)]

    def clause_terms(bits, ones_term: int, zeros_term: int) -> int:
        out = 1
        for a in bits.values():
            out *= ones_term if a else zeros_term
        return out

    if prob == "etsupport":
        Pc, Qc = etsupport_counts(n, P.sigma)
        S = Pc + Qc + sum(clause_terms(b, 4, 1) for b in clauses)
        zs = P.sigma - 5
        supp_r = max(zs + sum(2 if a else 1 for a in b.values()) for b in clauses)
        return S, max(P.sigma, supp_r)
    if prob in ("etsparse", "etsparse-hom"):
        hom = prob == "etsparse-hom"
        dq, dr = (P.d4, P.d5) if hom else (P.d3, P.d4)
        pair = 2 if _mixed(dr) else 1
        if char2:
            S = 1 + n * (dq + 3) + sum(clause_terms(b, dr + 1, 1) for b in clauses)
            supp_r = max(sum(pair if a else 1 for a in b.values()) for b in clauses)
            qsupp = 2 if _mixed(dq) else 1
        else:
            S = 1 + n * (2 * dq + 3) + len(clauses) * (dr + 1) ** 3
            supp_r = 3 * pair
            qsupp = 2 if _mixed(dq) else 1
        lead = 2 if hom else 1
        return S, lead + max(qsupp, supp_r)
    d2, d3 = P.d2, P.d3
    if char2:
        S = 1 + n * (d2 + 2) + sum(clause_terms(b, d3 + 1, 1) for b in clauses)
    else:
        S = 1 + n * (2 * d2 + 2) + len(clauses) * (d3 + 1) ** 3
    return S, 4
