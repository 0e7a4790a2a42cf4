"""The acceptance criteria as plain functions.

Each ``criterion_k(seed)`` returns a :class:`CriterionResult` whose ``details``
hold only strings, ints and bools, so the results serialize to byte-identical
JSON for identical seeds.  Timing is left to the callers (pytest and the CLI).
"""

from __future__ import annotations

import random
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, Dict, List, Optional, Sequence, Tuple

from .algebra import FieldSpec, smallest_pk_minus_1
from .cnf import CnfFormula, all_eight_clauses, random_formula
from .reductions import (
    GapSpec,
    ReductionInstance,
    build,
    closed_form,
    exact_statistics,
)
from .sparsepoly import (
    AffineForm,
    AffineSubstitution,
    SparsePoly,
    check_degree_separated,
    linear_power_sparsity,
    pow_poly,
    substitute,
)
from .witness import (
    SearchFamily,
    brute_force_search,
    extract_assignment,
    forward_witness,
    verify_witness,
)

Q, F2, F3, F5 = FieldSpec(0), FieldSpec(2), FieldSpec(3), FieldSpec(5)

TIME_LIMITS = {1: 60, 2: 300, 3: 300, 4: 600, 5: 600, 6: 300, 7: 600, 8: 120}


@dataclass
class CriterionResult:
    number: int
    name: str
    passed: bool
    details: Dict[str, object] = field(default_factory=dict)
    summary: str = ""

    def line(self) -> str:
        return f"{'PASS' if self.passed else 'FAIL'} criterion {self.number}: {self.name} -- {self.summary}"

    def to_json_obj(self) -> dict:
        return {"number": self.number, "name": self.name, "pass": self.passed, "summary": self.summary,
                "details": self.details}


def _rng(seed: int, tag: str) -> random.Random:
    return random.Random(f"{seed}:{tag}")


def _frac(a: int, b: int) -> str:
    return str(Fraction(a, b))


# ---------------------------------------------------------------------------------
# shared formula suite

@dataclass(frozen=True)
class VariantCase:
    label: str
    problem: str
    field: FieldSpec
    translations: bool = False
    sigma: Optional[int] = None
    gap: Optional[GapSpec] = None

    def build(self, psi: CnfFormula) -> ReductionInstance:
        return build(self.problem, psi, self.field, sigma=self.sigma, gap=self.gap,
                     translations_hardened=self.translations)


BASE_VARIANTS = (
    VariantCase("nonhom-Q", "etsparse", Q),
    VariantCase("nonhom-F3", "etsparse", F3),
    VariantCase("nonhom-F2", "etsparse", F2),
    VariantCase("hom-Q", "etsparse-hom", Q),
    VariantCase("hom-F3", "etsparse-hom", F3),
    VariantCase("hom-F2", "etsparse-hom", F2),
    VariantCase("setsparse-Q", "setsparse", Q),
    VariantCase("setsparse-F3", "setsparse", F3),
    VariantCase("setsparse-F2", "setsparse", F2),
    VariantCase("translations-Q", "etsparse", Q, translations=True),
    VariantCase("etsupport-s5", "etsupport", Q, sigma=5),
)

_GAP = GapSpec(Fraction(1, 4), 4)
GAP_VARIANTS = (
    VariantCase("gap-nonhom-Q", "etsparse", Q, gap=_GAP),
    VariantCase("gap-nonhom-F3", "etsparse", F3, gap=_GAP),
    VariantCase("gap-nonhom-F2", "etsparse", F2, gap=_GAP),
    VariantCase("gap-hom-Q", "etsparse-hom", Q, gap=_GAP),
    VariantCase("gap-hom-F3", "etsparse-hom", F3, gap=_GAP),
    VariantCase("gap-setsparse-Q", "setsparse", Q, gap=_GAP),
    VariantCase("gap-setsparse-F3", "setsparse", F3, gap=_GAP),
    VariantCase("gap-setsparse-F2", "setsparse", F2, gap=_GAP),
)


def suite_formulas(seed: int, case: VariantCase, count: int) -> List[CnfFormula]:
    rng = _rng(seed, f"suite:{case.label}")
    out = []
    for _ in range(count):
        if case.problem == "etsupport":
            out.append(random_formula(rng, 9, rng.randint(1, 4), distinct_clauses=True))
        else:
            out.append(random_formula(rng, rng.randint(3, 5), rng.randint(1, 4)))
    return out


def sample_assignments(psi: CnfFormula, rng: random.Random, k: int = 8) -> List[Tuple[int, ...]]:
    sols = psi.satisfying_assignments()
    if len(sols) <= k:
        return sols
    picked = {0, len(sols) - 1}
    picked.update(rng.sample(range(1, len(sols) - 1), k - 2))
    return [sols[i] for i in sorted(picked)]


# ---------------------------------------------------------------------------------
# 1

def _random_linear_form(rng: random.Random, F: FieldSpec, m: int, names: Sequence[str]) -> AffineForm:
    coeffs = {}
    for v in names[:m]:
        if F.characteristic:
            coeffs[v] = rng.randrange(1, F.characteristic)
        else:
            coeffs[v] = rng.choice([c for c in range(-5, 6) if c])
    return AffineForm.make(F, coeffs)


def criterion_1(seed: int) -> CriterionResult:
    rng = _rng(seed, "c1")
    names = ("a", "b", "c", "d")
    fields = (Q, F2, F3, F5)
    bad = []
    per_field = {f.label: 0 for f in fields}
    for case in range(1000):
        F = fields[case % 4]
        m = rng.randint(1, 4)
        d = rng.randint(0, 50)
        ell = _random_linear_form(rng, F, m, names).to_poly(names[:m])
        predicted = linear_power_sparsity(m, d, F)
        measured = pow_poly(ell, d).sparsity()
        per_field[F.label] += 1
        if predicted != measured:
            bad.append(f"{F.label} m={m} d={d}: {predicted} vs {measured}")
    ok = not bad
    return CriterionResult(1, "linear-form power sparsity closed form", ok,
                           {"cases": 1000, "per_field": per_field, "mismatches": bad[:10]},
                           f"1000 cases, {len(bad)} mismatches")


# ---------------------------------------------------------------------------------
# 2

def _clause_degree(inst: ReductionInstance) -> Optional[int]:
    P = inst.params
    return {"etsparse": P.d4, "etsparse-hom": P.d5, "setsparse": P.d3}.get(inst.variant.problem)


def criterion_2(seed: int, per_variant: int = 30) -> CriterionResult:
    details: Dict[str, object] = {}
    failures: List[str] = []
    explained = 0
    total = 0
    for case in BASE_VARIANTS:
        for idx, psi in enumerate(suite_formulas(seed, case, per_variant)):
            total += 1
            inst = case.build(psi)
            f = inst.f
            S, supp = f.sparsity(), f.support()
            S_ex, supp_ex = exact_statistics(inst)
            cf = closed_form(inst)
            tag = f"{case.label}#{idx} n={psi.n} m={psi.m}"
            if (S, supp) != (S_ex, supp_ex):
                failures.append(f"{tag}: measured ({S},{supp}) vs counted ({S_ex},{supp_ex})")
            if not cf.sparsity_lo <= S <= cf.sparsity_hi:
                failures.append(f"{tag}: sparsity {S} outside [{cf.sparsity_lo},{cf.sparsity_hi}]")
            if not cf.support_lo <= supp <= cf.support_hi:
                # the stated support needs mixed monomials in the clause factors,
                # which a clause exponent of 1 cannot produce
                if _clause_degree(inst) == 1:
                    explained += 1
                else:
                    failures.append(f"{tag}: support {supp} outside [{cf.support_lo},{cf.support_hi}]")
            if cf.degree is not None and f.degree() != cf.degree:
                failures.append(f"{tag}: degree {f.degree()} vs {cf.degree}")
            if not inst.check_separation():
                failures.append(f"{tag}: summands not degree separated")
            if case.problem == "etsparse-hom" and not f.is_homogeneous():
                failures.append(f"{tag}: not homogeneous")
        details[case.label] = str(per_variant)
    details["instances"] = str(total)
    details["support_below_stated_with_clause_exponent_1"] = str(explained)
    details["failures"] = failures[:20]
    return CriterionResult(2, "built-instance statistics and degree separation", not failures, details,
                           f"{total} instances, {len(failures)} failures, {explained} support cases at clause exponent 1")


# ---------------------------------------------------------------------------------
# 3 and 6

def _forward_cases(seed: int) -> List[Tuple[VariantCase, int]]:
    return [(c, 30) for c in BASE_VARIANTS] + [(c, 10) for c in GAP_VARIANTS]


def criterion_3(seed: int) -> CriterionResult:
    failures: List[str] = []
    counts: Dict[str, str] = {}
    checked = 0
    for case, count in _forward_cases(seed):
        rng = _rng(seed, f"c3:{case.label}")
        n_case = 0
        for idx, psi in enumerate(suite_formulas(seed, case, count)):
            us = sample_assignments(psi, rng)
            if not us:
                continue
            inst = case.build(psi)
            for u in us:
                v = verify_witness(inst, forward_witness(inst, u))
                n_case += 1
                if not v.passed or v.measured > inst.budget:
                    failures.append(f"{case.label}#{idx} u={u}: measured {v.measured} > {inst.budget}")
        counts[case.label] = str(n_case)
        checked += n_case
    return CriterionResult(3, "forward witnesses meet the budget", not failures,
                           {"witnesses_per_variant": counts, "failures": failures[:20]},
                           f"{checked} forward witnesses, {len(failures)} over budget")


def _random_relabel(rng: random.Random, inst: ReductionInstance) -> Tuple[Dict[str, str], Dict[str, object]]:
    names = list(inst.universe)
    shuffled = names[:]
    rng.shuffle(shuffled)
    perm = dict(zip(names, shuffled))
    F = inst.field
    if F.characteristic:
        scales = {v: rng.randrange(1, F.characteristic) for v in names}
    else:
        scales = {v: Fraction(rng.choice([-3, -2, -1, 1, 2, 3]), rng.choice([1, 2, 3])) for v in names}
    return perm, scales


def criterion_6(seed: int) -> CriterionResult:
    failures: List[str] = []
    plain = composed = 0
    for case, count in _forward_cases(seed):
        rng = _rng(seed, f"c6:{case.label}")
        for idx, psi in enumerate(suite_formulas(seed, case, count)):
            us = sample_assignments(psi, rng)
            if not us:
                continue
            inst = case.build(psi)
            for u in us:
                w = forward_witness(inst, u)
                plain += 1
                got = extract_assignment(inst, w)
                if got != tuple(u):
                    failures.append(f"{case.label}#{idx}: extracted {got} from witness of {u}")
                if w.kind != "affine_transform":
                    continue
                perm, scales = _random_relabel(rng, inst)
                w2 = w.relabel(perm, scales)
                composed += 1
                m1 = verify_witness(inst, w).measured
                m2 = verify_witness(inst, w2).measured
                if m1 != m2:
                    failures.append(f"{case.label}#{idx}: relabel changed measurement {m1} -> {m2}")
                got2 = extract_assignment(inst, w2)
                if got2 != tuple(u):
                    failures.append(f"{case.label}#{idx}: relabelled witness extracted {got2}, expected {u}")
    return CriterionResult(6, "extraction inverts the forward map", not failures,
                           {"round_trips": str(plain), "relabelled_round_trips": str(composed),
                            "note": "shift witnesses have no permuted form and are checked unrelabelled",
                            "failures": failures[:20]},
                           f"{plain} round trips, {composed} relabelled, {len(failures)} failures")


# ---------------------------------------------------------------------------------
# 4 and 5

def n3_formulas(seed: int, count: int = 50) -> List[CnfFormula]:
    rng = _rng(seed, "n3")
    out = [all_eight_clauses()]
    while len(out) < count:
        out.append(random_formula(rng, 3, rng.randint(1, 8)))
    return out


def criterion_4(seed: int) -> CriterionResult:
    fam = SearchFamily("all_shifts")
    failures: List[str] = []
    sat = unsat = 0
    rows = []
    for idx, psi in enumerate(n3_formulas(seed)):
        inst = build("setsparse", psi, F3)
        res = brute_force_search(inst, fam)
        solution = psi.solve_small()
        within = res.min <= inst.budget
        sat += solution is not None
        unsat += solution is None
        if within != (solution is not None):
            failures.append(f"#{idx} m={psi.m}: min {res.min} vs s {inst.budget}, satisfiable={solution is not None}")
        if within:
            u = extract_assignment(inst, res.argmin)
            if not psi.evaluate(u):
                failures.append(f"#{idx}: argmin decodes to non-satisfying {u}")
        rows.append(f"m={psi.m} s={inst.budget} min={res.min} sat={solution is not None}")
    return CriterionResult(4, "exhaustive shift search over F_3 decides satisfiability", not failures,
                           {"formulas": str(len(rows)), "satisfiable": str(sat), "unsatisfiable": str(unsat),
                            "unsat_8_clause": rows[0], "failures": failures},
                           f"{len(rows)} formulas ({unsat} unsat), {len(failures)} disagreements; {rows[0]}")


def criterion_5(seed: int) -> CriterionResult:
    fam = SearchFamily("structured_transforms", (-2, -1, 0, 1, 2))
    failures: List[str] = []
    unsat_inst = build("etsparse", all_eight_clauses(), Q)
    res = brute_force_search(unsat_inst, fam)
    if not res.min > unsat_inst.budget:
        failures.append(f"unsat min {res.min} <= s {unsat_inst.budget}")
    if unsat_inst.budget != 2605:
        failures.append(f"s = {unsat_inst.budget}, expected 2605")
    sat_checked = 0
    for idx, psi in enumerate(n3_formulas(seed)):
        if psi.solve_small() is None:
            continue
        inst = build("etsparse", psi, Q)
        r = brute_force_search(inst, fam)
        sat_checked += 1
        if r.min > inst.budget:
            failures.append(f"#{idx}: satisfiable but min {r.min} > s {inst.budget}")
            continue
        u = extract_assignment(inst, r.argmin)
        if not psi.evaluate(u):
            failures.append(f"#{idx}: argmin decodes to {u}")
    return CriterionResult(5, "structured-family search separates sat from unsat", not failures,
                           {"family_size": str(res.family_size), "s": str(unsat_inst.budget),
                            "unsat_min": str(res.min), "satisfiable_checked": str(sat_checked),
                            "failures": failures},
                           f"unsat min {res.min} > s {unsat_inst.budget}; {sat_checked} satisfiable formulas within s")


# ---------------------------------------------------------------------------------
# 7

def _sat_companion() -> CnfFormula:
    """Eight clauses over three variables that miss the pattern (-1,-2,-3): satisfiable."""
    clauses = [c for c in all_eight_clauses().clauses if c != (-1, -2, -3)]
    clauses.append(clauses[0])
    return CnfFormula(3, tuple(clauses))


def gap_floor_rows(base_degree: int = 8) -> List[Dict[str, object]]:
    gap = GapSpec(Fraction(1, 4), base_degree)
    rows = []
    for label, problem, F, fam in (
        ("gap-nonhom-Q", "etsparse", Q, SearchFamily("structured_transforms", (-2, -1, 0, 1, 2))),
        ("gap-setsparse-F3", "setsparse", F3, SearchFamily("all_shifts")),
    ):
        unsat = build(problem, all_eight_clauses(), F, gap=gap)
        sat_psi = _sat_companion()
        sat = build(problem, sat_psi, F, gap=gap)
        measured_sat = verify_witness(sat, forward_witness(sat, sat_psi.solve_small())).measured
        unsat_min = brute_force_search(unsat, fam).min
        d = unsat.params.d4 if problem == "etsparse" else unsat.params.d3
        floor = (d + 1) ** 3
        s0 = unsat.params.s0
        rows.append({
            "variant": label, "n": unsat.n, "m": unsat.m, "d": d, "s0": s0, "measured_sat": measured_sat,
            "unsat_min": unsat_min, "floor": floor,
            "unsat_min_ge_floor": unsat_min >= floor,
            "floor_gt_s0": floor > s0,
            "unsat_min_gt_s0": unsat_min > s0,
            "sat_within_s0": measured_sat <= s0,
            "ratio": _frac(unsat_min, s0), "floor_ratio": _frac(floor, s0),
        })
    return rows


def criterion_7(seed: int) -> CriterionResult:
    rows = gap_floor_rows()
    ok = all(r["unsat_min_ge_floor"] and r["floor_gt_s0"] and r["sat_within_s0"] for r in rows)
    parts = []
    for r in rows:
        parts.append(f"{r['variant']}: s0={r['s0']} sat={r['measured_sat']} unsat_min={r['unsat_min']} "
                     f"(d+1)^3={r['floor']} ratio={r['ratio']}")
        if not r["floor_gt_s0"]:
            parts[-1] += " [(d+1)^3 <= s0]"
    details = {r["variant"]: {k: (str(v) if not isinstance(v, bool) else v) for k, v in r.items() if k != "variant"}
               for r in rows}
    return CriterionResult(7, "gap floor at base degree 8", ok, details, "; ".join(parts))


# ---------------------------------------------------------------------------------
# 8

def _random_poly(rng: random.Random, F: FieldSpec, names: Sequence[str], terms: int, maxdeg: int) -> SparsePoly:
    out = SparsePoly.zero(F, names)
    for _ in range(terms):
        exps = {v: rng.randint(0, maxdeg) for v in names}
        c = rng.randrange(1, F.characteristic) if F.characteristic else rng.choice([-3, -2, -1, 1, 2, 3])
        out = out + SparsePoly.monomial(F, names, exps, c)
    return out


def _random_invertible(rng: random.Random, F: FieldSpec, names: Sequence[str]) -> AffineSubstitution:
    while True:
        imgs = {}
        for v in names:
            coeffs = {w: (rng.randrange(F.characteristic) if F.characteristic else rng.randint(-2, 2)) for w in names}
            imgs[v] = AffineForm.make(F, coeffs)
        sub = AffineSubstitution.from_mapping(F, imgs, names)
        if sub.is_invertible():
            return sub


def criterion_8(seed: int) -> CriterionResult:
    rng = _rng(seed, "c8")
    names = ("a", "b", "c")
    counts = {k: 0 for k in ("obs1", "obs2", "obs3", "obs6", "claim1", "claim2")}
    failures: List[str] = []
    fields = (Q, F2, F3, F5)

    for i in range(120):  # Observation 1
        F = fields[i % 4]
        f = _random_poly(rng, F, names, rng.randint(1, 5), 4)
        A = _random_invertible(rng, F, names)
        counts["obs1"] += 1
        if substitute(f, A).degree_set() != f.degree_set():
            failures.append(f"obs1 {F.label}: {f} under {A.to_json_obj()}")

    for i in range(200):  # Observations 2 and 3
        F = fields[i % 4]
        f = _random_poly(rng, F, names, rng.randint(1, 4), 3)
        g = _random_poly(rng, F, names, rng.randint(1, 4), 3).shift((rng.randint(0, 4), 0, 0))
        wrt = rng.choice([None, "a"])
        if not check_degree_separated([f, g], wrt):
            continue
        counts["obs2"] += 1
        if (f + g).sparsity() != f.sparsity() + g.sparsity():
            failures.append(f"obs2 {F.label}")
        if wrt is None:
            f1 = substitute(f, _random_invertible(rng, F, names))
            g1 = substitute(g, _random_invertible(rng, F, names))
            counts["obs3"] += 1
            if (f1 + g1).sparsity() != f1.sparsity() + g1.sparsity():
                failures.append(f"obs3 {F.label}")

    for i in range(200):  # Observation 6
        F = fields[i % 4]
        p = F.characteristic
        m = rng.randint(1, 3)
        if p:
            d = rng.choice([d for d in range(31) if d < p or smallest_pk_minus_1(d, p) == d])
        else:
            d = rng.randint(0, 30)
        ell = _random_linear_form(rng, F, m, names)
        c = rng.randrange(1, p) if p else rng.choice([-2, -1, 1, 2])
        h = AffineForm.make(F, dict(ell.coeffs), c)
        s_h = pow_poly(h.to_poly(names), d).sparsity()
        s_l = pow_poly(ell.to_poly(names), d).sparsity()
        counts["obs6"] += 1
        if d >= 1 and not (s_h >= s_l + 1 and s_h >= d + 1):
            failures.append(f"obs6 {F.label} m={m} d={d}: {s_h} vs {s_l}")

    for i in range(150):  # Claim 1
        F = fields[i % 4]
        p = F.characteristic
        d = rng.randint(1, 10)
        ell = _random_linear_form(rng, F, 2, names).to_poly(names)
        h = _random_poly(rng, F, names, rng.randint(1, 4), 3)
        if p and d + h.degree() >= p:
            continue
        prod = pow_poly(ell, d) * h
        if prod.is_zero():
            continue
        counts["claim1"] += 1
        if prod.sparsity() < d + 1:
            failures.append(f"claim1 {F.label} d={d}: {prod.sparsity()}")

    for i in range(60):  # Claim 2
        F = (Q, F5, FieldSpec(7))[i % 3]
        p = F.characteristic
        n = rng.randint(1, 3)
        vs = names[:n]
        sigma = rng.randint(1, n)
        d = rng.randint(sigma, 7)
        if p and not (p > d or (p > sigma and smallest_pk_minus_1(d, p) == d)):
            continue
        A = _random_invertible(rng, F, vs)
        union = {w for v in vs for w in A.image(v).variables()}
        if len(union) < sigma:
            continue
        mono = SparsePoly.monomial(F, vs, {v: d for v in vs})
        counts["claim2"] += 1
        if substitute(mono, A).support() < sigma:
            failures.append(f"claim2 {F.label} n={n} sigma={sigma} d={d}")

    empty = [k for k, v in counts.items() if v == 0]
    ok = not failures and not empty
    return CriterionResult(8, "preliminary observations and claims", ok,
                           {k: str(v) for k, v in counts.items()} | {"failures": failures[:20], "unexercised": empty},
                           ", ".join(f"{k}={v}" for k, v in counts.items()) + f"; {len(failures)} failures")


CRITERIA: Dict[int, Callable[[int], CriterionResult]] = {
    1: criterion_1, 2: criterion_2, 3: criterion_3, 4: criterion_4,
    5: criterion_5, 6: criterion_6, 7: criterion_7, 8: criterion_8,
}
