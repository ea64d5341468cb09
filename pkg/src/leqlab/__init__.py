"""Risk-sensitive linear-exponential-quadratic control laboratory.

Solve the coupled backward Riccati system of the scalar exponential-quadratic
problem over a fully coupled linear forward-backward system, synthesize the
optimal affine feedback and its cost, and verify optimality numerically
(deterministic exponent oracle, Monte Carlo with change-of-measure weights,
one-step residual diagnostics).
"""

from .errors import (
    AllPathsOverflowed,
    BlowUpBeforeTerminal,
    ConfigParseError,
    GridMismatch,
    LeqLabError,
    MissingPrerequisite,
    NonFiniteValue,
    ValidationError,
)
from .model import (
    CoefficientFunction,
    CVector,
    DMatrices,
    ProblemSpec,
    RunSettings,
    assemble_c,
    assemble_matrix_form,
    build_problem,
    parse_config_text,
    run_settings,
)
from .riccati import (
    MatrixKSolution,
    RiccatiSolution,
    existence_interval,
    partial_from_matrix,
    solve,
    solve_alpha1_beta1,
    solve_alpha2_beta2,
    solve_alpha3,
    solve_matrix_K,
)
from .policy import (
    GammaKappaAnsatz,
    LinearPolicy,
    PolicyFields,
    closed_form_optimal_cost,
    decoupling_fields,
    evaluate_linear_policy,
    gamma_kappa,
    optimal_feedback,
    policy_cost_fields,
    policy_fbsde_fields,
)
from .mc import (
    CostEstimate,
    PathEnsemble,
    ResidualStats,
    bsde_residuals,
    estimate_cost,
    girsanov_check,
    simulate,
)
from .verify import (
    AcceptanceConfig,
    CheckRecord,
    VerificationReport,
    risk_neutral_limit,
    run_acceptance_suite,
    scalar_benchmark_spec,
    verify_optimality,
)

__version__ = "0.1.0"
