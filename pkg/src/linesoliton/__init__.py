"""Numerical laboratory for the pitchfork bifurcation of NLS line solitons
on R x T: closed-form soliton family, Lyapunov-Schmidt reduction with
analytic derivative formulas, and direct Newton continuation of the full
equation for cross-validation.
"""
from .closed_form import (
    DomainError,
    SolitonParams,
    identity_residuals,
    omega_p,
    psi_value,
    sech_power_integral,
    soliton_derivatives,
    soliton_value,
)
from .fields import (
    Grid,
    ModeOperator,
    SymField,
    apply_F,
    assemble_linearized,
    inner_product,
    load_field,
    norm,
    save_field,
)
from .spectral import EigenReport, lowest_eigenpairs, spectrum_scan
from .reduction import DerivativeBundle, LSState, Reduction
from .continuation import (
    Branch,
    BranchPoint,
    newton_full,
    trace_branch,
    trace_trivial,
    uniqueness_probe,
    verify_decay,
)

__version__ = "1.0.0"

__all__ = [
    "DomainError",
    "SolitonParams",
    "identity_residuals",
    "omega_p",
    "psi_value",
    "sech_power_integral",
    "soliton_derivatives",
    "soliton_value",
    "Grid",
    "ModeOperator",
    "SymField",
    "apply_F",
    "assemble_linearized",
    "inner_product",
    "load_field",
    "norm",
    "save_field",
    "EigenReport",
    "lowest_eigenpairs",
    "spectrum_scan",
    "DerivativeBundle",
    "LSState",
    "Reduction",
    "Branch",
    "BranchPoint",
    "newton_full",
    "trace_branch",
    "trace_trivial",
    "uniqueness_probe",
    "verify_decay",
    "__version__",
]
