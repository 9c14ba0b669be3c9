"""Garding polynomial operators, determinant majorization and discrete
Alexandrov estimates, as executable checks."""

from .abp import (
    EquationSpec,
    Jet2,
    c11_oscillation_check,
    classify_classical,
    classify_grid,
    dual_fiber_contains,
    eps_star,
    fiber_contains,
    max_principle_check,
    modulus_delta,
    oscillation_bound_check,
    parse_rhs,
    semiconvex_pipeline_check,
)
from .majorization import coefficient_condition, dm_gap, dm_gap_ng, dm_sweep, maclaurin_sweep
from .operators import (
    NotHyperbolicAt,
    NumericError,
    PreconditionError,
    cone_contains,
    evaluate,
    garding_eigenvalues,
    is_I_central,
    parse_operator,
    radial_poly_coeffs,
)
from .potential import GridFn, alexandrov_check, sup_convolution, upper_contact_set
from .report import CheckReport
from .solver import solve_ma_2d, solve_trace_2d

__version__ = "0.1.0"

__all__ = [
    "CheckReport",
    "EquationSpec",
    "GridFn",
    "Jet2",
    "NotHyperbolicAt",
    "NumericError",
    "PreconditionError",
    "alexandrov_check",
    "c11_oscillation_check",
    "classify_classical",
    "classify_grid",
    "coefficient_condition",
    "cone_contains",
    "dm_gap",
    "dm_gap_ng",
    "dm_sweep",
    "dual_fiber_contains",
    "eps_star",
    "evaluate",
    "fiber_contains",
    "garding_eigenvalues",
    "is_I_central",
    "maclaurin_sweep",
    "max_principle_check",
    "modulus_delta",
    "oscillation_bound_check",
    "parse_operator",
    "parse_rhs",
    "radial_poly_coeffs",
    "semiconvex_pipeline_check",
    "solve_ma_2d",
    "solve_trace_2d",
    "sup_convolution",
    "upper_contact_set",
]
