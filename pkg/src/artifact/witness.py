"""Witnesses: forward construction, exact verification, extraction and search.

A witness is either an invertible affine substitution of the instance
variables or (for the shift problem) a translation vector.  Verification
never expands f(Az) as a whole: each summand is transformed separately,
factored into variable-disjoint pieces, and the pieces are combined by the
measurement engine in :mod:`artifact.sparsepoly`, which only merges summands
whose degree boxes can actually overlap.
"""

from __future__ import annotations

import time
from concurrent.futures import ProcessPoolExecutor
from concurrent.futures import TimeoutError as FutureTimeout
from dataclasses import dataclass, replace
from itertools import permutations, product
from math import factorial
from typing import Dict, Iterator, List, Optional, Sequence, Tuple

from .algebra import FieldSpec, Raw
from .reductions import ReductionInstance, Summand
from .sparsepoly import (
    AffineForm,
    AffineSubstitution,
    FactoredTerm,
    canonical_dumps,
    factor_product,
    measure,
)

DEFAULT_CAP = 10**6
_CACHE_LIMIT = 20_000


class WitnessError(ValueError):
    pass


class NotInvertible(WitnessError):
    pass


class AssignmentRefused(WitnessError):
    pass


class ExtractionRefused(WitnessError):
    pass


class OverBudget(ExtractionRefused):
    pass


class InternalConsistencyError(RuntimeError):
    pass


class SearchCapExceeded(WitnessError):
    def __init__(self, size: int, cap: int):
        self.size, self.cap = size, cap
        super().__init__(f"family size {size} exceeds cap {cap}")


class SearchTimeout(WitnessError):
    pass


@dataclass(frozen=True)
class Witness:
    """``kind`` is ``affine_transform`` (with ``substitution``) or ``shift_vector`` (with ``shift``)."""

    kind: str
    substitution: Optional[AffineSubstitution] = None
    shift: Optional[Tuple[Tuple[str, Raw], ...]] = None
    claimed_assignment: Optional[Tuple[int, ...]] = None

    def __post_init__(self) -> None:
        if self.kind == "affine_transform":
            if self.substitution is None:
                raise WitnessError("affine witness without substitution")
            if not self.substitution.is_invertible():
                raise NotInvertible("substitution is not invertible")
        elif self.kind == "shift_vector":
            if self.shift is None:
                raise WitnessError("shift witness without shift vector")
        else:
            raise WitnessError(f"unknown witness kind {self.kind!r}")

    def as_substitution(self, field: FieldSpec, universe: Sequence[str]) -> AffineSubstitution:
        if self.kind == "affine_transform":
            return self.substitution
        return AffineSubstitution.shift(field, universe, dict(self.shift))

    def relabel(self, perm: Dict[str, str], scales: Optional[Dict[str, Raw]] = None) -> "Witness":
        """Compose with an output-side variable permutation and diagonal scaling."""
        if self.kind != "affine_transform":
            raise WitnessError("only affine witnesses can be relabelled")
        return Witness(self.kind, self.substitution.then_relabel(perm, scales), None, self.claimed_assignment)

    def to_json_obj(self) -> dict:
        obj: dict = {"kind": self.kind}
        if self.kind == "affine_transform":
            obj["images"] = self.substitution.to_json_obj()
            obj["codomain"] = list(self.substitution.codomain)
        else:
            obj["shift"] = {v: str(c) for v, c in self.shift}
        obj["assignment"] = None if self.claimed_assignment is None else list(self.claimed_assignment)
        return obj

    def to_json(self) -> str:
        return canonical_dumps(self.to_json_obj())

    @classmethod
    def from_json_obj(cls, obj: dict, field: FieldSpec) -> "Witness":
        u = obj.get("assignment")
        u = None if u is None else tuple(int(b) for b in u)
        if obj["kind"] == "affine_transform":
            images = {v: AffineForm.from_json_obj(field, f) for v, f in obj["images"].items()}
            cod = obj.get("codomain") or list(images)
            return cls("affine_transform", AffineSubstitution.from_mapping(field, images, cod), None, u)
        if obj["kind"] == "shift_vector":
            return cls("shift_vector", None, tuple((v, field.normalize(c)) for v, c in obj["shift"].items()), u)
        raise WitnessError(f"unknown witness kind {obj.get('kind')!r}")


@dataclass
class Verdict:
    measured: int
    budget: int
    passed: bool
    statistic: str
    per_summand: List[Tuple[str, int]]

    def to_json_obj(self) -> dict:
        return {
            "statistic": self.statistic,
            "measured": str(self.measured),
            "budget": str(self.budget),
            "pass": self.passed,
            "per_summand": [{"label": l, "value": str(v)} for l, v in self.per_summand],
        }


# ---------------------------------------------------------------------------------
# forward direction

def forward_witness(inst: ReductionInstance, u: Sequence[int]) -> Witness:
    """The canonical witness encoding assignment ``u`` of the source formula."""
    u = tuple(int(b) for b in u)
    if any(b not in (0, 1) for b in u):
        raise AssignmentRefused("assignment must be a 0/1 vector")
    v = inst.to_formula_assignment(u)
    if not inst.formula.evaluate(v):
        raise AssignmentRefused("assignment does not satisfy the formula")
    F = inst.field
    char2 = F.characteristic == 2
    prob = inst.variant.problem
    if prob == "setsparse":
        b = {"x0": 0}
        for i, bit in enumerate(v, start=1):
            b[f"x{i}"] = (1 - bit) if char2 else F.normalize(-1 if bit else 1)
        return Witness("shift_vector", None, tuple((x, F.normalize(b.get(x, 0))) for x in inst.universe), u)
    images = {}
    for w in inst.universe:
        if w[0] == "y" and w != "y0":
            i = int(w[1:])
            bit = v[i - 1]
            if prob == "etsupport" or char2:
                c = 1 - bit
            else:
                c = -1 if bit else 1
            images[w] = AffineForm.make(F, {w: 1, f"x{i}": c})
        else:
            images[w] = AffineForm.var(F, w)
    return Witness("affine_transform", AffineSubstitution.from_mapping(F, images, inst.universe), None, u)


# ---------------------------------------------------------------------------------
# verification

def _transformed(inst: ReductionInstance, idx: int, s: Summand, sub: AffineSubstitution) -> FactoredTerm:
    key = (idx, sub.codomain, tuple(sub.image(v) for v in s.variables()))
    cache = inst.cache
    hit = cache.get(key)
    if hit is None:
        if len(cache) > _CACHE_LIMIT:
            cache.clear()
        powers = [(form.compose(sub), e) for form, e in s.powers]
        hit = factor_product(inst.field, sub.codomain, s.coeff, powers, s.label)
        cache[key] = hit
    return hit


def _check_dimensions(inst: ReductionInstance, sub: AffineSubstitution) -> None:
    if set(sub.domain) != set(inst.universe):
        raise WitnessError("witness variables do not match the instance variables")
    if len(sub.codomain) != len(inst.universe):
        raise WitnessError("witness codomain has the wrong dimension")
    if sub.field != inst.field:
        raise WitnessError(f"witness over {sub.field}, instance over {inst.field}")


def evaluate_substitution(inst: ReductionInstance, sub: AffineSubstitution) -> Tuple[int, List[int]]:
    """Exact statistic of f(sub) and the per-summand statistics."""
    terms = [_transformed(inst, i, s, sub) for i, s in enumerate(inst.summands)]
    res = measure(terms, inst.statistic)
    return res.value, res.per_term


def verify_witness(inst: ReductionInstance, w: Witness) -> Verdict:
    """Measure f under the witness and compare against the budget."""
    sub = w.as_substitution(inst.field, inst.universe)
    _check_dimensions(inst, sub)
    if not sub.is_invertible():
        raise NotInvertible("substitution is not invertible")
    if inst.variant.problem == "setsparse" and w.kind != "shift_vector":
        raise WitnessError("the shift problem takes shift-vector witnesses")
    value, per = evaluate_substitution(inst, sub)
    labels = [s.label for s in inst.summands]
    return Verdict(value, inst.budget, value <= inst.budget, inst.statistic, list(zip(labels, per)))


# ---------------------------------------------------------------------------------
# extraction

def _scaled_var(form: AffineForm, what: str) -> Tuple[str, Raw]:
    sv = form.single_variable()
    if sv is None:
        raise ExtractionRefused(f"image of {what} is {form}, not a scaled variable")
    return sv


def _decode_c(inst: ReductionInstance, sub: AffineSubstitution) -> Dict[int, Raw]:
    """c_i from x_i -> gamma X, y_i -> alpha Y + beta X; c_i = beta / gamma."""
    F = inst.field
    used: Dict[str, str] = {}

    def claim(var: str, owner: str) -> None:
        if var in used:
            raise ExtractionRefused(f"{owner} and {used[var]} share the output variable {var}")
        used[var] = owner

    for w in inst.universe:
        if not (w[0] == "y" and w != "y0"):
            var, _ = _scaled_var(sub.image(w), w)
            claim(var, w)
    cs: Dict[int, Raw] = {}
    for i in range(1, inst.n + 1):
        X, gamma = _scaled_var(sub.image(f"x{i}"), f"x{i}")
        img = sub.image(f"y{i}")
        if img.const:
            raise ExtractionRefused(f"image of y{i} has a translation part")
        others = [(v, a) for v, a in img.coeffs if v != X]
        if len(others) != 1:
            raise ExtractionRefused(f"image of y{i} is {img}, not alpha*Y + c*X{i}")
        claim(others[0][0], f"y{i}")
        cs[i] = F.div(img.coeff(X), gamma)
    return cs


def extract_assignment(inst: ReductionInstance, w: Witness, check_budget: bool = True) -> Tuple[int, ...]:
    """Decode a satisfying assignment of the source formula from a passing witness."""
    if check_budget:
        verdict = verify_witness(inst, w)
        if not verdict.passed:
            raise OverBudget(f"witness does not meet the budget ({verdict.measured} > {verdict.budget})")
    F = inst.field
    char2 = F.characteristic == 2
    prob = inst.variant.problem
    v: List[int] = []
    if prob == "setsparse":
        if w.kind != "shift_vector":
            raise ExtractionRefused("shift problem needs a shift vector")
        b = dict(w.shift)
        if b.get("x0", 0) != 0:
            raise ExtractionRefused("shift of x0 is nonzero")
        for i in range(1, inst.n + 1):
            bi = b.get(f"x{i}", 0)
            if char2:
                if bi not in (0, 1):
                    raise ExtractionRefused(f"shift of x{i} is {bi}, expected 0 or 1")
                v.append(1 - bi)
            elif bi == 1:
                v.append(0)
            elif bi == F.normalize(-1):
                v.append(1)
            else:
                raise ExtractionRefused(f"shift of x{i} is {bi}, expected +1 or -1")
    else:
        if w.kind != "affine_transform":
            raise ExtractionRefused("this problem needs an affine witness")
        cs = _decode_c(inst, w.substitution)
        for i in range(1, inst.n + 1):
            c = cs[i]
            if prob == "etsupport":
                # a value outside {0,1} never isolates a clause factor, so u_i is free
                v.append(1 - c if c in (0, 1) else 0)
            elif char2:
                v.append(1 - c)
            elif c == 1:
                v.append(0)
            elif c == F.normalize(-1):
                v.append(1)
            else:
                raise ExtractionRefused(f"y{i} coefficient {c} is not +1 or -1")
    v_t = tuple(v)
    if not inst.formula.evaluate(v_t):
        raise InternalConsistencyError(f"decoded assignment {v_t} does not satisfy the built formula")
    u = inst.to_source_assignment(v_t)
    if not inst.source.evaluate(u):
        raise InternalConsistencyError(f"mapped assignment {u} does not satisfy the source formula")
    return u


# ---------------------------------------------------------------------------------
# search

FAMILIES = ("structured_transforms", "all_shifts", "support_transforms")


@dataclass(frozen=True)
class SearchFamily:
    """A finite family of candidate witnesses.

    structured_transforms / support_transforms: y_i -> s_i*(Y_pi(i) + c_i X_pi(i)),
    x_i -> s_i*X_pi(i), other variables fixed; c ranges over ``coefficient_pool``,
    pi over pair permutations (if requested), s over ``scaling_pool``.
    all_shifts: every b in pool^vars (default pool: all of F_p).
    """

    family: str
    coefficient_pool: Tuple[Raw, ...] = ()
    permutation_policy: str = "identity_only"
    scaling_pool: Tuple[Raw, ...] = (1,)

    def __post_init__(self) -> None:
        if self.family not in FAMILIES:
            raise WitnessError(f"unknown family {self.family!r}")
        if self.permutation_policy not in ("identity_only", "all_pair_permutations"):
            raise WitnessError(f"unknown permutation policy {self.permutation_policy!r}")
        if any(s == 0 for s in self.scaling_pool):
            raise WitnessError("scalings must be nonzero")

    def _pool(self, inst: ReductionInstance) -> Tuple[Raw, ...]:
        F = inst.field
        pool = self.coefficient_pool
        if not pool:
            if self.family == "all_shifts":
                pool = tuple(F.elements())
            else:
                raise WitnessError("structured families need a coefficient pool")
        return tuple(sorted({F.normalize(c) for c in pool}, key=F.sort_key))

    def check(self, inst: ReductionInstance) -> None:
        prob = inst.variant.problem
        if self.family == "all_shifts":
            if not inst.field.is_finite:
                raise WitnessError("all_shifts needs a finite field")
            if prob != "setsparse":
                raise WitnessError("all_shifts applies to the shift problem")
        elif self.family == "support_transforms" and prob != "etsupport":
            raise WitnessError("support_transforms applies to etsupport")
        elif self.family == "structured_transforms" and prob not in ("etsparse", "etsparse-hom"):
            raise WitnessError("structured_transforms applies to etsparse instances")

    def size(self, inst: ReductionInstance) -> int:
        pool = self._pool(inst)
        if self.family == "all_shifts":
            return len(pool) ** len(inst.universe)
        n = inst.n
        perms = factorial(n) if self.permutation_policy == "all_pair_permutations" else 1
        return len(pool) ** n * perms * len(set(self.scaling_pool)) ** n

    def encodings(self, inst: ReductionInstance) -> Iterator[tuple]:
        pool = self._pool(inst)
        if self.family == "all_shifts":
            yield from product(pool, repeat=len(inst.universe))
            return
        n = inst.n
        F = inst.field
        scales = tuple(sorted({F.normalize(s) for s in self.scaling_pool}, key=F.sort_key))
        perms = permutations(range(1, n + 1)) if self.permutation_policy == "all_pair_permutations" else [tuple(range(1, n + 1))]
        perms = list(perms)
        for cs in product(pool, repeat=n):
            for pi in perms:
                for ss in product(scales, repeat=n):
                    yield (cs, pi, ss)

    def witness(self, inst: ReductionInstance, enc: tuple) -> Witness:
        F = inst.field
        if self.family == "all_shifts":
            return Witness("shift_vector", None, tuple(zip(inst.universe, enc)))
        cs, pi, ss = enc
        images = {w: AffineForm.var(F, w) for w in inst.universe}
        for i in range(1, inst.n + 1):
            j = pi[i - 1]
            s = ss[i - 1]
            images[f"x{i}"] = AffineForm.var(F, f"x{j}", s)
            images[f"y{i}"] = AffineForm.make(F, {f"y{j}": s, f"x{j}": F.mul(s, cs[i - 1])})
        return Witness("affine_transform", AffineSubstitution.from_mapping(F, images, inst.universe))

    def to_json_obj(self) -> dict:
        return {
            "family": self.family,
            "coefficient_pool": [str(c) for c in self.coefficient_pool],
            "permutation_policy": self.permutation_policy,
            "scaling_pool": [str(c) for c in self.scaling_pool],
        }


@dataclass
class SearchResult:
    min: int
    argmin: Witness
    encoding: tuple
    evaluated: int
    family_size: int
    budget: int
    values: Optional[List[int]] = None

    def to_json_obj(self) -> dict:
        return {
            "min": str(self.min),
            "budget": str(self.budget),
            "min_within_budget": self.min <= self.budget,
            "evaluated": str(self.evaluated),
            "family_size": str(self.family_size),
            "argmin": self.argmin.to_json_obj(),
        }


def _enc_key(enc) -> tuple:
    # encodings hold ints/Fractions and nested tuples of them; all comparable
    return enc


def _eval_chunk(inst: ReductionInstance, fam: SearchFamily, encs: List[tuple]) -> List[int]:
    out = []
    for enc in encs:
        w = fam.witness(inst, enc)
        value, _ = evaluate_substitution(inst, w.as_substitution(inst.field, inst.universe))
        out.append(value)
    return out


def brute_force_search(inst: ReductionInstance, fam: SearchFamily, cap: int = DEFAULT_CAP, workers: Optional[int] = None,
                       timeout: Optional[float] = None, keep_values: bool = False) -> SearchResult:
    """Exact minimum of the instance statistic over ``fam``.

    Ties are broken by the smallest encoding, so the result does not depend on
    the evaluation order or on ``workers``.
    """
    fam.check(inst)
    size = fam.size(inst)
    if size > cap:
        raise SearchCapExceeded(size, cap)
    encs = list(fam.encodings(inst))
    start = time.monotonic()
    values: List[int]
    if workers and workers > 1 and len(encs) > 1:
        bare = replace(inst, cache={})
        chunk = max(1, len(encs) // (4 * workers))
        parts = [encs[i:i + chunk] for i in range(0, len(encs), chunk)]
        with ProcessPoolExecutor(max_workers=workers) as ex:
            futures = [ex.submit(_eval_chunk, bare, fam, part) for part in parts]
            values = []
            for fut in futures:
                remaining = None if timeout is None else max(0.0, timeout - (time.monotonic() - start))
                try:
                    values.extend(fut.result(timeout=remaining))
                except FutureTimeout:
                    raise SearchTimeout(f"search exceeded {timeout} s") from None
    else:
        values = []
        for enc in encs:
            values.extend(_eval_chunk(inst, fam, [enc]))
            if timeout is not None and time.monotonic() - start > timeout:
                raise SearchTimeout(f"search exceeded {timeout} s after {len(values)} candidates")
    best = min(range(len(encs)), key=lambda i: (values[i], _enc_key(encs[i])))
    return SearchResult(values[best], fam.witness(inst, encs[best]), encs[best], len(encs), size, inst.budget,
                        values if keep_values else None)
