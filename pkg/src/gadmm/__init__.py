"""Majorized generalized ADMM for two-block composite convex programs.

Solvers for

    min f1(x) + f2(x) + h1(y) + h2(y)   s.t.   A* x + B* y = c

with smooth convex f1, h1 replaced per iteration by quadratic majorants and
nonsmooth f2, h2 handled through proximal oracles.  Ships the relaxed
(generalized) method, two majorized baselines, per-iteration convergence
certificates, and a reproducible simulated benchmark.
"""

from .bench import (BenchInstance, BenchRow, bench_h1_gradient, emit_report,
                    generate_instance, parse_report, run_benchmark,
                    to_problem_spec)
from .diagnostics import (CertificateRecord, DescentCheckResult,
                          IdentityCheckReport, ReferencePoint,
                          certificate_bundle, certificates_to_csv,
                          check_descent_inequality, check_dual_update_chain,
                          check_operator_identities, eta_consistency,
                          kkt_residual)
from .linops import (BlockQuadratic, BlockSolveError, LinearMap,
                     PowerIterationResult, SelfAdjointOp,
                     estimate_lambda_max, load_matrix, save_matrix,
                     sgs_operator, sgs_sweep)
from .oracles import (ProxOracle, QuadraticMajorant, SmoothTerm, prox_l1,
                      project_nonneg, quadratic_majorant)
from .problem import (IterateTriple, ProblemSpec, RelaxedTriple, SolveReport,
                      SolverConfig, SolveTrajectory, SubproblemError)
from .solver import (relax_step, solve_gadmm_m, solve_m_admm, solve_m_gadmm,
                     x_update, y_update, z_update)

__version__ = "0.1.0"

__all__ = [
    "BenchInstance", "BenchRow", "BlockQuadratic", "BlockSolveError",
    "CertificateRecord", "DescentCheckResult", "IdentityCheckReport",
    "IterateTriple", "LinearMap", "PowerIterationResult", "ProblemSpec",
    "ProxOracle", "QuadraticMajorant", "ReferencePoint", "RelaxedTriple",
    "SelfAdjointOp", "SmoothTerm", "SolveReport", "SolverConfig",
    "SolveTrajectory", "SubproblemError", "bench_h1_gradient",
    "certificate_bundle", "certificates_to_csv", "check_descent_inequality",
    "check_dual_update_chain", "check_operator_identities", "emit_report",
    "estimate_lambda_max", "eta_consistency", "generate_instance",
    "kkt_residual", "load_matrix", "parse_report", "prox_l1",
    "project_nonneg", "quadratic_majorant", "relax_step", "run_benchmark",
    "save_matrix", "sgs_operator", "sgs_sweep", "solve_gadmm_m",
    "solve_m_admm", "solve_m_gadmm", "to_problem_spec", "x_update",
    "y_update", "z_update",
]
