from .accounting import (
    TraceView,
    amortization_bank,
    gamma_requirement_check,
    leontief_drop_check,
    descent_margin,
    shift_margin,
    phi_with_bank_monotone,
    single_update_progress,
)
from .equilibrium import EquilibriumCertificate, equilibrium_residual, reference_equilibrium, reference_phi_star
from .fit import RateFit, convergence_fit, fit_log_gap
from .harness import is_strict, run_checks, summarize, verdict
from .lipschitz import LipschitzBound, lipschitz_matrix, pairwise_lipschitz_bound
from .reports import InequalityReport, all_passed, worst
