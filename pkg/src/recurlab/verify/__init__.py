"""Executable checks of the non-return lemmas and the integral recurrence inequalities."""

from .lemmas import (
    CornerExtraction,
    NonReturningSet,
    ReturnIndexSet,
    UnsupportedRepresentation,
    check_lemma_l_add,
    check_lemma_ll,
    check_union_multiplicity,
    corner_extraction_demo,
    index_family,
    non_returning_counts_pair,
    non_returning_counts_pairs,
    non_returning_counts_single,
    non_returning_pair,
    non_returning_single,
    return_index_set,
)
from .reports import VerificationReport, reports_to_csv
from .sampling import Sampler, blocked_sum, hoeffding_halfwidth
from .stieltjes import (
    FunctionIntegrator,
    IdentityIntegrator,
    StepFunction,
    StepIntegrator,
    StieltjesResult,
    StieltjesSpec,
    stieltjes_integral,
)
from .theorems import (
    RHSResult,
    check_theorem_x2,
    check_theorem_x4,
    covering_integrand,
    report_x1_x3_diagnostic,
    rhs_bound_x2,
    rhs_bound_x4,
    rotation_liminf,
    truncated_profile_integrals,
)

__all__ = [name for name in dir() if not name.startswith("_")]
