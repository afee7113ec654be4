"""Minimax mean-square-regret treatment rules when welfare is partially identified."""

from .calibration import CalibrationResult, ProblemSpec, foc_residual, solve_a_star, solve_tau_star, tau_star
from .regret import (
    DivergingWorstCaseError,
    RiskReport,
    StatePoint,
    WorstCaseResult,
    bayes_msr_two_point,
    mean_regret,
    mean_square_regret,
    regret_distribution,
    subproblem_worst_case,
    worst_case_msr,
)
from .rho import rho, rho_prime, rho_shifted
from .rules import (
    ConstantHalf,
    CustomLogistic,
    MeanRegretGaussian,
    MeanRegretStep,
    MsrOptimal,
    PointIdLogistic,
    SubproblemSpec,
    TreatmentRule,
    evaluate,
    mean_regret_rule,
    msr_optimal_rule,
    point_id_rule,
    subproblem_rule,
)

__version__ = "0.1.0"
