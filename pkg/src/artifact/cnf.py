"""3-CNF formulas: DIMACS ingestion, evaluation and the two normalization passes.

Clauses are stored DIMACS-style as tuples of nonzero signed ints.  For a
clause k the index set C_k is the set of variables it mentions and the
complement bit a_{k,j} is 1 exactly when variable j occurs negated, so clause k
is satisfied by u iff some j in C_k has u_j XOR a_{k,j} = 1.
"""

from __future__ import annotations

from dataclasses import dataclass
from itertools import product
from typing import Dict, List, Optional, Sequence, Tuple, Union

Clause = Tuple[int, ...]


class CnfError(ValueError):
    pass


class DimacsParseError(CnfError):
    def __init__(self, msg: str, line: Optional[int] = None):
        self.line = line
        super().__init__(f"line {line}: {msg}" if line is not None else msg)


class NormalizationRequired(CnfError):
    pass


@dataclass(frozen=True)
class CnfFormula:
    """A CNF with variables 1..n; normal form means exactly 3 distinct variables per clause."""

    n: int
    clauses: Tuple[Clause, ...]

    def __post_init__(self) -> None:
        object.__setattr__(self, "clauses", tuple(tuple(int(l) for l in c) for c in self.clauses))
        if self.n < 0:
            raise CnfError("negative variable count")
        for c in self.clauses:
            if not c:
                raise CnfError("empty clause")
            for l in c:
                if l == 0 or abs(l) > self.n:
                    raise CnfError(f"literal {l} out of range 1..{self.n}")

    @property
    def m(self) -> int:
        return len(self.clauses)

    def support_set(self, k: int) -> Tuple[int, ...]:
        """C_k for 0-based clause index k, sorted."""
        return tuple(sorted({abs(l) for l in self.clauses[k]}))

    def complement_bits(self, k: int) -> Dict[int, int]:
        """a_{k,j} for j in C_k (0-based clause index)."""
        return {abs(l): int(l < 0) for l in self.clauses[k]}

    def is_normal(self) -> bool:
        return all(len(c) == 3 and len({abs(l) for l in c}) == 3 for c in self.clauses)

    def check_normal(self) -> None:
        for k, c in enumerate(self.clauses):
            if len(c) != 3:
                raise NormalizationRequired(f"clause {k + 1} has {len(c)} literals, expected 3")
            if len({abs(l) for l in c}) != 3:
                raise NormalizationRequired(f"clause {k + 1} repeats a variable")

    def has_repeated_clauses(self) -> bool:
        keys = [frozenset(c) for c in self.clauses]
        return len(set(keys)) != len(keys)

    # -- semantics ----------------------------------------------------------------
    def evaluate(self, u: Sequence[int]) -> bool:
        if len(u) != self.n:
            raise CnfError(f"assignment has length {len(u)}, expected {self.n}")
        return all(any((u[abs(l) - 1] ^ int(l < 0)) == 1 for l in c) for c in self.clauses)

    def solve_small(self) -> Optional[Tuple[int, ...]]:
        """Lexicographically smallest satisfying assignment, or None (n <= 24)."""
        if self.n > 24:
            raise CnfError("solve_small is limited to n <= 24")
        for u in product((0, 1), repeat=self.n):
            if self.evaluate(u):
                return u
        return None

    def satisfying_assignments(self) -> List[Tuple[int, ...]]:
        if self.n > 24:
            raise CnfError("exhaustive enumeration is limited to n <= 24")
        return [u for u in product((0, 1), repeat=self.n) if self.evaluate(u)]

    # -- io ---------------------------------------------------------------------------
    def to_dimacs(self) -> str:
        lines = [f"p cnf {self.n} {self.m}"]
        lines += [" ".join(str(l) for l in c) + " 0" for c in self.clauses]
        return "\n".join(lines) + "\n"

    def to_json_obj(self) -> dict:
        return {
            "n": self.n,
            "m": self.m,
            "clauses": [
                {"vars": list(self.support_set(k)),
                 "complement": [self.complement_bits(k)[j] for j in self.support_set(k)],
                 "literals": list(c)}
                for k, c in enumerate(self.clauses)
            ],
        }

    @classmethod
    def from_json_obj(cls, obj: dict) -> "CnfFormula":
        return cls(int(obj["n"]), tuple(tuple(c["literals"]) for c in obj["clauses"]))


def parse_dimacs(text: Union[str, bytes], strict: bool = True) -> CnfFormula:
    """Parse DIMACS CNF.

    Positive literal j gives a_{k,j} = 0 and negative gives 1.  With ``strict``
    (the default) a clause that does not have exactly three distinct variables
    raises :class:`NormalizationRequired` rather than being repaired.
    """
    if isinstance(text, bytes):
        text = text.decode("utf-8")
    n = None
    clauses: List[Clause] = []
    current: List[int] = []
    current_line = None
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("c"):
            continue
        if line.startswith("%"):
            break
        if line.startswith("p"):
            parts = line.split()
            if len(parts) != 4 or parts[1] != "cnf":
                raise DimacsParseError("malformed problem line", lineno)
            try:
                n, _ = int(parts[2]), int(parts[3])
            except ValueError:
                raise DimacsParseError("non-integer in problem line", lineno) from None
            continue
        if n is None:
            raise DimacsParseError("clause before problem line", lineno)
        for tok in line.split():
            try:
                lit = int(tok)
            except ValueError:
                raise DimacsParseError(f"bad token {tok!r}", lineno) from None
            if current_line is None:
                current_line = lineno
            if lit == 0:
                if not current:
                    raise DimacsParseError("empty clause", lineno)
                clauses.append(tuple(current))
                current, current_line = [], None
                continue
            if abs(lit) > n:
                raise DimacsParseError(f"literal {lit} exceeds declared n={n}", lineno)
            current.append(lit)
    if n is None:
        raise DimacsParseError("missing problem line")
    if current:
        raise DimacsParseError("last clause not terminated by 0", current_line)
    psi = CnfFormula(n, tuple(clauses))
    if strict:
        for k, c in enumerate(clauses):
            if len(c) != 3 or len({abs(l) for l in c}) != 3:
                raise NormalizationRequired(
                    f"clause {k + 1} ({' '.join(map(str, c))}) needs normalization: "
                    "expected 3 distinct variables")
    return psi


# -- normalization ---------------------------------------------------------------


@dataclass(frozen=True)
class DistinctRecord:
    """What normalize_distinct did: fresh variables, dropped tautologies, scheme name."""

    original_n: int
    fresh: Tuple[int, ...]
    dropped: Tuple[int, ...]
    scheme: str = "dedupe-then-pad-with-fresh-variable-pairs"

    def to_json_obj(self) -> dict:
        return {"kind": "distinct", "scheme": self.scheme, "original_n": self.original_n,
                "fresh": list(self.fresh), "dropped_tautologies": list(self.dropped)}

    def extend(self, u: Sequence[int]) -> Tuple[int, ...]:
        """Lift an assignment of the original formula (fresh variables are free)."""
        return tuple(u) + (0,) * len(self.fresh)

    def restrict(self, u: Sequence[int]) -> Tuple[int, ...]:
        return tuple(u[: self.original_n])


@dataclass(frozen=True)
class FlipRecord:
    """Variables whose polarity was flipped everywhere."""

    flipped: Tuple[int, ...] = ()

    def apply(self, u: Sequence[int]) -> Tuple[int, ...]:
        """Map an assignment between the original and the flipped formula (an involution)."""
        s = set(self.flipped)
        return tuple(1 - b if j + 1 in s else b for j, b in enumerate(u))

    def to_json_obj(self) -> dict:
        return {"kind": "flip", "flipped": list(self.flipped)}


def normalize_distinct(psi: CnfFormula) -> Tuple[CnfFormula, DistinctRecord]:
    """Rewrite every clause to exactly three distinct variables, equisatisfiably.

    Repeated literals are merged and tautological clauses dropped.  A clause
    left with two literals (l1 | l2) becomes (l1 | l2 | v) & (l1 | l2 | ~v) for a
    fresh v; a unit clause (l) becomes the four clauses over two fresh
    variables.  Fresh variables are unconstrained, so any satisfying assignment
    of the original extends by arbitrary values.
    """
    n = psi.n
    out: List[Clause] = []
    fresh: List[int] = []
    dropped: List[int] = []
    for k, c in enumerate(psi.clauses):
        lits: List[int] = []
        for l in c:
            if l not in lits:
                lits.append(l)
        if any(-l in lits for l in lits):
            dropped.append(k + 1)
            continue
        if len(lits) >= 3:
            if len(lits) > 3:
                raise NormalizationRequired(f"clause {k + 1} has more than 3 literals; only 3-CNF is supported")
            out.append(tuple(lits))
            continue
        pads = []
        for _ in range(3 - len(lits)):
            n += 1
            fresh.append(n)
            pads.append(n)
        for signs in product((1, -1), repeat=len(pads)):
            out.append(tuple(lits) + tuple(s * v for s, v in zip(signs, pads)))
    return CnfFormula(n, tuple(out)), DistinctRecord(psi.n, tuple(fresh), tuple(dropped))


def normalize_first_clause_complemented(psi: CnfFormula) -> Tuple[CnfFormula, FlipRecord]:
    """Flip variables globally so that clause 1 has every a_{1,j} = 1."""
    if not psi.clauses:
        return psi, FlipRecord()
    flip = tuple(sorted(l for l in psi.clauses[0] if l > 0))
    if not flip:
        return psi, FlipRecord()
    s = set(flip)
    clauses = tuple(tuple(-l if abs(l) in s else l for l in c) for c in psi.clauses)
    return CnfFormula(psi.n, clauses), FlipRecord(flip)


def evaluate(psi: CnfFormula, u: Sequence[int]) -> bool:
    return psi.evaluate(u)


def solve_small(psi: CnfFormula) -> Optional[Tuple[int, ...]]:
    return psi.solve_small()


def all_eight_clauses(vars: Sequence[int] = (1, 2, 3)) -> CnfFormula:
    """The unsatisfiable formula containing every sign pattern over three variables."""
    a, b, c = vars
    clauses = tuple((sa * a, sb * b, sc * c) for sa, sb, sc in product((1, -1), repeat=3))
    return CnfFormula(max(vars), clauses)


def random_formula(rng, n: int, m: int, distinct_clauses: bool = False) -> CnfFormula:
    """Random normal-form 3-CNF (``rng`` is a ``random.Random``)."""
    if n < 3:
        raise CnfError("normal-form 3-CNF needs n >= 3")
    seen = set()
    clauses = []
    limit = 8 * (n * (n - 1) * (n - 2) // 6)
    if distinct_clauses and m > limit:
        raise CnfError(f"only {limit} distinct clauses exist over {n} variables")
    while len(clauses) < m:
        vs = rng.sample(range(1, n + 1), 3)
        c = tuple(v if rng.random() < 0.5 else -v for v in vs)
        key = frozenset(c)
        if distinct_clauses and key in seen:
            continue
        seen.add(key)
        clauses.append(c)
    return CnfFormula(n, tuple(clauses))
