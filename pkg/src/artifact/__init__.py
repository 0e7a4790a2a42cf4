"""Exact toolkit for sparse-polynomial equivalence reductions from 3-SAT."""

from .algebra import QQ, FieldElement, FieldSpec
from .cnf import CnfFormula, parse_dimacs
from .reductions import (
    GapSpec,
    ReductionInstance,
    build,
    build_etsparse,
    build_etsupport,
    build_setsparse,
    closed_form,
    select_params,
)
from .sparsepoly import AffineForm, AffineSubstitution, SparsePoly, pow_poly, substitute
from .witness import SearchFamily, Witness, brute_force_search, extract_assignment, forward_witness, verify_witness

__version__ = "0.1.0"

__all__ = [
    "QQ", "FieldElement", "FieldSpec", "CnfFormula", "parse_dimacs", "GapSpec", "ReductionInstance",
    "build", "build_etsparse", "build_etsupport", "build_setsparse", "closed_form", "select_params",
    "AffineForm", "AffineSubstitution", "SparsePoly", "pow_poly", "substitute",
    "SearchFamily", "Witness", "brute_force_search", "extract_assignment", "forward_witness", "verify_witness",
]
