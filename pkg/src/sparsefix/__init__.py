"""Sparse regularization with the l0 penalty via inexact fixed-point proximity iterations,
plus l1 baselines and kernel-regression, classification and deblurring pipelines."""

from .fidelity import DomainError, PoissonKL, SquaredHinge, SquaredLoss, make_fidelity
from .linops import (
    IdentityOp,
    LinearOp,
    MatrixOp,
    dct_framelet_operator,
    estimate_spectral_norm,
    first_difference_operator,
    gaussian_kernel_matrix,
    motion_blur_operator,
)
from .prox import SupportSet, hard_threshold, project_support, soft_threshold, support
from .solver_l0 import ErrorSequence, L0Config, L0State, solve_l0
from .solver_l1 import L1Config, L1State, solve_l1_general, solve_l1_identity
from .trace import IterationRecord, SolveResult

__version__ = "0.1.0"

__all__ = [
    "DomainError", "PoissonKL", "SquaredHinge", "SquaredLoss", "make_fidelity",
    "IdentityOp", "LinearOp", "MatrixOp", "dct_framelet_operator", "estimate_spectral_norm",
    "first_difference_operator", "gaussian_kernel_matrix", "motion_blur_operator",
    "SupportSet", "hard_threshold", "project_support", "soft_threshold", "support",
    "ErrorSequence", "L0Config", "L0State", "solve_l0",
    "L1Config", "L1State", "solve_l1_general", "solve_l1_identity",
    "IterationRecord", "SolveResult",
]
