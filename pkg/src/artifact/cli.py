"""Command-line front end.

Every command writes its JSON/CSV output plus a ``<command>.manifest.json``
into ``--out`` and prints one ``key=value`` status line.  Exit codes:

  0  success
  1  verification failure (the witness does not meet the budget, or a
     selftest criterion failed)
  2  input error (bad flags, unreadable or inconsistent files, refused
     witnesses and assignments)
  3  search cap or timeout exceeded
  4  internal consistency error
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import io
import json
import platform
import sys
import time
from fractions import Fraction
from pathlib import Path
from typing import Dict, List, Optional, Sequence

from . import __version__
from .algebra import AlgebraError, FieldSpec
from .cnf import CnfError, parse_dimacs
from .reductions import GapSpec, ReductionError, ReductionInstance, build, instance_from_json_obj
from .sparsepoly import ExpansionTooLarge, PolyError, canonical_dumps
from .witness import (
    DEFAULT_CAP,
    InternalConsistencyError,
    OverBudget,
    SearchCapExceeded,
    SearchFamily,
    SearchTimeout,
    Witness,
    WitnessError,
    brute_force_search,
    extract_assignment,
    forward_witness,
    verify_witness,
)

EXIT_OK, EXIT_FAIL, EXIT_INPUT, EXIT_CAP, EXIT_INTERNAL = 0, 1, 2, 3, 4


class CliError(Exception):
    def __init__(self, code: int, reason: str, detail: str):
        self.code, self.reason, self.detail = code, reason, detail
        super().__init__(detail)


class _Parser(argparse.ArgumentParser):
    def error(self, message: str):  # argparse's default prints usage; keep it one line
        raise CliError(EXIT_INPUT, "bad_arguments", message)


def _status(**kw) -> str:
    parts = []
    for k, v in kw.items():
        if isinstance(v, bool):
            v = str(v).lower()
        v = str(v)
        parts.append(f"{k}={json.dumps(v) if (' ' in v or not v) else v}")
    return " ".join(parts)


# ---------------------------------------------------------------------------------
# file helpers

def _sha256(data: bytes) -> str:
    return hashlib.sha256(data).hexdigest()


def _read(path: str) -> bytes:
    try:
        return Path(path).read_bytes()
    except OSError as e:
        raise CliError(EXIT_INPUT, "unreadable_input", f"{path}: {e.strerror}") from None


def _load_json(path: str) -> dict:
    try:
        return json.loads(_read(path))
    except json.JSONDecodeError as e:
        raise CliError(EXIT_INPUT, "bad_json", f"{path}: {e}") from None


class Run:
    """Collects inputs and outputs of one command and writes the manifest."""

    def __init__(self, args: argparse.Namespace):
        self.args = args
        self.out = Path(args.out)
        self.inputs: List[dict] = []
        self.outputs: List[dict] = []

    def input(self, path: str) -> bytes:
        data = _read(path)
        self.inputs.append({"name": Path(path).name, "sha256": _sha256(data)})
        return data

    def write(self, name: str, text: str) -> None:
        self.out.mkdir(parents=True, exist_ok=True)
        data = text.encode("utf-8")
        (self.out / name).write_bytes(data)
        self.outputs.append({"name": name, "sha256": _sha256(data)})

    def manifest(self) -> None:
        flags = {}
        for k, v in sorted(vars(self.args).items()):
            if k in ("out", "func") or k in _PATH_FLAGS:
                continue
            flags[k] = v if isinstance(v, (bool, int, str, type(None))) else [str(x) for x in v]
        obj = {
            "command": self.args.command,
            "flags": flags,
            "inputs": self.inputs,
            "outputs": self.outputs,
            "seed": getattr(self.args, "seed", None),
            "versions": {"artifact": __version__, "python": ".".join(platform.python_version_tuple()[:2])},
        }
        self.write(f"{self.args.command}.manifest.json", canonical_dumps(obj) + "\n")


_PATH_FLAGS = ("input", "instance", "witness", "files")


def _field(label: str) -> FieldSpec:
    try:
        return FieldSpec.parse(label)
    except (AlgebraError, ValueError) as e:
        raise CliError(EXIT_INPUT, "bad_field", str(e)) from None


def _gap(args) -> Optional[GapSpec]:
    if args.gap is None:
        if args.base_degree is not None:
            raise CliError(EXIT_INPUT, "bad_arguments", "--base-degree needs --gap")
        return None
    if args.base_degree is None:
        raise CliError(EXIT_INPUT, "bad_arguments", "--gap needs --base-degree")
    try:
        eps = Fraction(args.gap)
    except (ValueError, ZeroDivisionError):
        raise CliError(EXIT_INPUT, "bad_arguments", f"cannot parse epsilon {args.gap!r}") from None
    return GapSpec(eps, args.base_degree)


def _load_instance(run: Run, path: str) -> ReductionInstance:
    return instance_from_json_obj(json.loads(run.input(path)))


def _load_witness(run: Run, path: str, inst: ReductionInstance) -> Witness:
    try:
        return Witness.from_json_obj(json.loads(run.input(path)), inst.field)
    except (KeyError, TypeError) as e:
        raise CliError(EXIT_INPUT, "bad_witness", f"missing or malformed field {e}") from None


def _pool(text: Optional[str], F: FieldSpec) -> tuple:
    if not text:
        return ()
    try:
        return tuple(F.normalize(Fraction(t)) for t in text.split(","))
    except (ValueError, ZeroDivisionError):
        raise CliError(EXIT_INPUT, "bad_arguments", f"cannot parse pool {text!r}") from None


def variant_label(inst: ReductionInstance) -> str:
    v = inst.variant
    parts = [v.problem, inst.field.label]
    if v.translations_hardened:
        parts.append("translations")
    if v.problem == "etsupport":
        parts.append(f"sigma={inst.params.sigma}")
    if v.gap is not None:
        parts.append(f"gap(eps={v.gap.epsilon},base={inst.params.override_base_degree})")
    return "/".join(parts)


def instance_summary(inst: ReductionInstance) -> dict:
    P = inst.params
    clause_degree = {"etsparse": P.d4, "etsparse-hom": P.d5, "setsparse": P.d3}.get(inst.variant.problem)
    sat = None
    if inst.source.n <= 20:
        sat = inst.source.solve_small() is not None
    return {
        "id": _sha256(inst.f.to_json().encode("utf-8"))[:16],
        "variant": variant_label(inst),
        "n": str(inst.n),
        "m": str(inst.m),
        "statistic": inst.statistic,
        "s": str(inst.budget),
        "s0": None if P.s0 is None else str(P.s0),
        "clause_degree": None if clause_degree is None else str(clause_degree),
        "satisfiable": sat,
    }


# ---------------------------------------------------------------------------------
# commands

def cmd_reduce(run: Run) -> int:
    a = run.args
    text = run.input(a.input)
    try:
        psi = parse_dimacs(text, strict=not a.normalize)
    except UnicodeDecodeError:
        raise CliError(EXIT_INPUT, "bad_dimacs", "input is not UTF-8 text") from None
    inst = build(a.problem, psi, _field(a.field), sigma=a.sigma, gap=_gap(a), translations_hardened=a.translations,
                 normalize=a.normalize)
    run.write("instance.json", inst.to_json() + "\n")
    print(_status(status="ok", command="reduce", variant=variant_label(inst), n=inst.n, m=inst.m,
                  budget=inst.budget, sparsity=inst.f.sparsity(), support=inst.f.support()))
    return EXIT_OK


def cmd_witness(run: Run) -> int:
    a = run.args
    inst = _load_instance(run, a.instance)
    try:
        u = tuple(int(b) for b in a.assignment.replace(" ", "").split(","))
    except ValueError:
        raise CliError(EXIT_INPUT, "bad_assignment", f"cannot parse {a.assignment!r}") from None
    w = forward_witness(inst, u)
    run.write("witness.json", w.to_json() + "\n")
    print(_status(status="ok", command="witness", kind=w.kind))
    return EXIT_OK


def cmd_verify(run: Run) -> int:
    inst = _load_instance(run, run.args.instance)
    w = _load_witness(run, run.args.witness, inst)
    v = verify_witness(inst, w)
    obj = v.to_json_obj()
    obj["instance"] = instance_summary(inst)
    run.write("verdict.json", canonical_dumps(obj) + "\n")
    print(_status(status="ok" if v.passed else "fail", command="verify", measured=v.measured, budget=v.budget,
                  passed=v.passed))
    return EXIT_OK if v.passed else EXIT_FAIL


def cmd_extract(run: Run) -> int:
    inst = _load_instance(run, run.args.instance)
    w = _load_witness(run, run.args.witness, inst)
    u = extract_assignment(inst, w)
    run.write("assignment.json", canonical_dumps({"assignment": list(u), "instance": instance_summary(inst)}) + "\n")
    print(_status(status="ok", command="extract", assignment=",".join(map(str, u))))
    return EXIT_OK


_FAMILY = {"structured": "structured_transforms", "all-shifts": "all_shifts", "support": "support_transforms"}


def cmd_search(run: Run) -> int:
    a = run.args
    inst = _load_instance(run, a.instance)
    F = inst.field
    fam = SearchFamily(
        _FAMILY[a.family],
        _pool(a.coeff_pool, F),
        "all_pair_permutations" if a.permutations else "identity_only",
        _pool(a.scaling_pool, F) or (1,),
    )
    res = brute_force_search(inst, fam, cap=a.cap, workers=a.workers, timeout=a.timeout)
    obj = res.to_json_obj()
    obj["family"] = fam.to_json_obj()
    obj["instance"] = instance_summary(inst)
    run.write("search.json", canonical_dumps(obj) + "\n")
    print(_status(status="ok", command="search", min=res.min, budget=res.budget, evaluated=res.evaluated,
                  within_budget=res.min <= res.budget))
    return EXIT_OK


def cmd_selftest(run: Run) -> int:
    from .acceptance import CRITERIA

    a = run.args
    wanted = sorted(CRITERIA) if not a.criteria else sorted({int(x) for x in a.criteria.split(",")})
    unknown = [k for k in wanted if k not in CRITERIA]
    if unknown:
        raise CliError(EXIT_INPUT, "bad_arguments", f"unknown criteria {unknown}")
    results = []
    for k in wanted:
        t0 = time.monotonic()
        r = CRITERIA[k](a.seed)
        print(r.line())
        print(f"criterion {k} took {time.monotonic() - t0:.1f} s", file=sys.stderr)
        results.append(r)
    ok = all(r.passed for r in results)
    run.write("selftest.json", canonical_dumps({"seed": a.seed, "results": [r.to_json_obj() for r in results]}) + "\n")
    print(_status(status="ok" if ok else "fail", command="selftest", passed=sum(r.passed for r in results),
                  total=len(results)))
    return EXIT_OK if ok else EXIT_FAIL


REPORT_COLUMNS = ("variant", "n", "m", "s", "s0", "measured_sat", "measured_unsat_min", "ratio", "floor",
                  "floor_violation")


def report_gap(batch: Sequence[dict]) -> tuple:
    """Aggregate verdict/search outputs into CSV rows, one per instance.

    ratio = measured_unsat_min / s0 and floor = (d+1)^3 / s0 with d the clause
    exponent; a row is flagged when a satisfiable instance exceeds s0 or an
    unsatisfiable one falls below (d+1)^3.
    """
    if not batch:
        raise CliError(EXIT_INPUT, "empty_batch", "report needs at least one verdict or search result")
    rows: Dict[str, dict] = {}
    for obj in batch:
        info = obj.get("instance")
        if not info:
            raise CliError(EXIT_INPUT, "bad_report_input", "input lacks an instance summary")
        row = rows.setdefault(info["id"], {"info": info, "sat": [], "unsat": []})
        value = int(obj["measured"] if "measured" in obj else obj["min"])
        if info["satisfiable"] is False:
            row["unsat"].append(value)
        else:
            row["sat"].append(value)
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(REPORT_COLUMNS)
    flagged = 0
    for key in sorted(rows, key=lambda k: (rows[k]["info"]["variant"], rows[k]["info"]["n"], rows[k]["info"]["m"], k)):
        row = rows[key]
        info = row["info"]
        s0 = int(info["s0"] or info["s"])
        sat = min(row["sat"]) if row["sat"] else None
        unsat = min(row["unsat"]) if row["unsat"] else None
        d = info["clause_degree"]
        floor_num = (int(d) + 1) ** 3 if d is not None else None
        violation = (sat is not None and sat > s0) or (unsat is not None and floor_num is not None and unsat < floor_num)
        flagged += violation
        writer.writerow([
            info["variant"], info["n"], info["m"], info["s"], info["s0"] or "",
            "" if sat is None else sat,
            "" if unsat is None else unsat,
            "" if unsat is None else str(Fraction(unsat, s0)),
            "" if floor_num is None else str(Fraction(floor_num, s0)),
            str(violation).lower(),
        ])
    return buf.getvalue(), {"rows": len(rows), "flagged": flagged}


def cmd_report(run: Run) -> int:
    batch = [json.loads(run.input(p)) for p in run.args.files]
    text, summary = report_gap(batch)
    run.write("report.csv", text)
    run.write("report.summary.json", canonical_dumps(summary) + "\n")
    print(_status(status="ok", command="report", rows=summary["rows"], flagged=summary["flagged"]))
    return EXIT_OK


# ---------------------------------------------------------------------------------
# parser

def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="artifact", description="Build, witness, verify and search 3-SAT sparsity reductions.")
    p.add_argument("--version", action="version", version=__version__)
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def common(sp):
        sp.add_argument("--out", default="artifact_out", help="output directory (default: artifact_out)")
        sp.add_argument("--seed", type=int, default=0)

    r = sub.add_parser("reduce", help="DIMACS CNF -> instance JSON")
    r.add_argument("input")
    r.add_argument("--problem", required=True, choices=("etsparse", "etsparse-hom", "etsupport", "setsparse"))
    r.add_argument("--field", default="q", help="q, f2, f3 or fp:<p>")
    r.add_argument("--sigma", type=int, default=None)
    r.add_argument("--gap", default=None, metavar="NUM/DEN")
    r.add_argument("--base-degree", type=int, default=None)
    r.add_argument("--translations", action="store_true")
    r.add_argument("--normalize", action="store_true", help="repair clauses that lack three distinct variables")
    common(r)
    r.set_defaults(func=cmd_reduce)

    w = sub.add_parser("witness", help="instance + satisfying assignment -> witness JSON")
    w.add_argument("--instance", required=True)
    w.add_argument("--assignment", required=True, help="comma separated bits, e.g. 1,0,0")
    common(w)
    w.set_defaults(func=cmd_witness)

    v = sub.add_parser("verify", help="instance + witness -> verdict JSON")
    v.add_argument("--instance", required=True)
    v.add_argument("--witness", required=True)
    common(v)
    v.set_defaults(func=cmd_verify)

    e = sub.add_parser("extract", help="instance + passing witness -> assignment")
    e.add_argument("--instance", required=True)
    e.add_argument("--witness", required=True)
    common(e)
    e.set_defaults(func=cmd_extract)

    s = sub.add_parser("search", help="exhaustive search over a finite witness family")
    s.add_argument("--instance", required=True)
    s.add_argument("--family", required=True, choices=tuple(_FAMILY))
    s.add_argument("--coeff-pool", default=None, help="comma separated field elements")
    s.add_argument("--scaling-pool", default=None)
    s.add_argument("--permutations", action="store_true", help="also permute the (x_i, y_i) pairs")
    s.add_argument("--cap", type=int, default=DEFAULT_CAP)
    s.add_argument("--timeout", type=float, default=None)
    s.add_argument("--workers", type=int, default=None)
    common(s)
    s.set_defaults(func=cmd_search)

    t = sub.add_parser("selftest", help="run the acceptance suite")
    t.add_argument("--criteria", default=None, help="comma separated subset, default all")
    common(t)
    t.set_defaults(func=cmd_selftest)

    rp = sub.add_parser("report", help="verdict/search JSON files -> gap CSV")
    rp.add_argument("files", nargs="*")
    common(rp)
    rp.set_defaults(func=cmd_report)
    return p


def main(argv: Optional[Sequence[str]] = None) -> int:
    try:
        args = build_parser().parse_args(argv)
        run = Run(args)
        code = args.func(run)
        run.manifest()
        return code
    except CliError as e:
        err = e
    except OverBudget as e:
        err = CliError(EXIT_FAIL, "over_budget", str(e))
    except (SearchCapExceeded, SearchTimeout, ExpansionTooLarge) as e:
        err = CliError(EXIT_CAP, "cap_exceeded" if not isinstance(e, SearchTimeout) else "timeout", str(e))
    except InternalConsistencyError as e:
        err = CliError(EXIT_INTERNAL, "internal_consistency", str(e))
    except (CnfError, ReductionError, WitnessError, AlgebraError, PolyError, KeyError, ValueError) as e:
        err = CliError(EXIT_INPUT, type(e).__name__, str(e))
    print(_status(status="error", exit=err.code, reason=err.reason, detail=err.detail), file=sys.stderr)
    return err.code


if __name__ == "__main__":
    sys.exit(main())
