"""Problem description and solver run records for the two-block program

    min f1(x) + f2(x) + h1(y) + h2(y)   s.t.   A* x + B* y = c.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import List, Optional, Sequence, Tuple

import numpy as np

from .linops import BlockQuadratic, LinearMap, SelfAdjointOp, sgs_operator
from .oracles import ProxOracle, SmoothTerm


class SubproblemError(RuntimeError):
    """A block subproblem has no supported exact solve route."""


@dataclass
class ProblemSpec:
    """Data of one two-block instance.

    ``A`` and ``B`` map the constraint space Z into X and Y; their adjoints
    assemble the constraint A* x + B* y = c.  ``S`` and ``T`` are the
    semi-proximal operators; passing ``x_blocks``/``y_blocks`` instead
    declares block-quadratic structure, in which case the corresponding
    sGS operator U Sigma^{-1} U^T is derived from the penalty-augmented
    block quadratic and used as the semi-proximal term.

    ``dual_scale`` enters the KKT residual denominator as 1 + dual_scale;
    instance builders set it to the norm of the dominant linear data.
    """

    f1: SmoothTerm
    h1: SmoothTerm
    f2: Optional[ProxOracle]
    h2: Optional[ProxOracle]
    A: LinearMap
    B: LinearMap
    c: np.ndarray
    S: Optional[SelfAdjointOp] = None
    T: Optional[SelfAdjointOp] = None
    x_blocks: Optional[Tuple[int, ...]] = None
    y_blocks: Optional[Tuple[int, ...]] = None
    dual_scale: float = 0.0

    def __post_init__(self):
        self.c = np.asarray(self.c, dtype=float)
        nz = self.c.shape[0]
        if self.A.cols != nz or self.B.cols != nz:
            raise ValueError("A and B must map the constraint space")
        if self.A.rows != self.f1.dim or self.B.rows != self.h1.dim:
            raise ValueError("operator ranges must match the smooth terms")
        if self.S is not None and self.x_blocks is not None:
            raise ValueError("give either S or x_blocks, not both")
        if self.T is not None and self.y_blocks is not None:
            raise ValueError("give either T or y_blocks, not both")
        if self.S is None and self.x_blocks is None:
            self.S = SelfAdjointOp.zero(self.nx)
        if self.T is None and self.y_blocks is None:
            self.T = SelfAdjointOp.zero(self.ny)

    @property
    def nx(self) -> int:
        return self.f1.dim

    @property
    def ny(self) -> int:
        return self.h1.dim

    @property
    def nz(self) -> int:
        return self.c.shape[0]

    def x_quadratic(self, sigma: float) -> np.ndarray:
        """Dense block quadratic of the x-subproblem before the sGS term."""
        return self.f1.upper_op.mat + sigma * self.A.gram_matrix()

    def y_quadratic(self, sigma: float) -> np.ndarray:
        return self.h1.upper_op.mat + sigma * self.B.gram_matrix()

    def x_structure(self, sigma: float):
        """(dense metric, semi-proximal op, BlockQuadratic or None) for x."""
        q = self.x_quadratic(sigma)
        if self.x_blocks is not None:
            bq = BlockQuadratic(q, self.x_blocks)
            s_op = sgs_operator(bq)
            return q + s_op.mat, s_op, bq
        return q + self.S.mat, self.S, None

    def y_structure(self, sigma: float):
        q = self.y_quadratic(sigma)
        if self.y_blocks is not None:
            bq = BlockQuadratic(q, self.y_blocks)
            t_op = sgs_operator(bq)
            return q + t_op.mat, t_op, bq
        return q + self.T.mat, self.T, None

    def objective(self, x: np.ndarray, y: np.ndarray) -> float:
        total = self.f1.value(x) + self.h1.value(y)
        if self.f2 is not None:
            total += self.f2.value(x)
        if self.h2 is not None:
            total += self.h2.value(y)
        return float(total)

    def primal_residual_vec(self, x: np.ndarray, y: np.ndarray) -> np.ndarray:
        return self.A.adjoint_apply(x) + self.B.adjoint_apply(y) - self.c

    def validate(self, sigma: float, samples: int = 16) -> None:
        """Sampled positive-definiteness checks for the configured sigma.

        Verifies F > 0, H > 0, and upper_h1 + T > 0 on random unit vectors
        (fixed internal seed, so validation is deterministic).
        """
        if sigma <= 0:
            raise ValueError("sigma must be positive")
        rng = np.random.default_rng(20240229)
        f_mat, _, _ = self.x_structure(sigma)
        h_mat, t_op, _ = self.y_structure(sigma)
        st_mat = self.h1.upper_op.mat + t_op.mat
        for name, mat in (("F", f_mat), ("H", h_mat),
                          ("upper_h1 + T", st_mat)):
            dim = mat.shape[0]
            for _ in range(samples):
                v = rng.standard_normal(dim)
                v /= np.linalg.norm(v)
                if float(v @ (mat @ v)) <= 0:
                    raise ValueError(f"operator {name} is not positive "
                                     f"definite for sigma={sigma}")


@dataclass
class SolverConfig:
    """Run parameters; ranges are enforced at construction.

    ``rho`` drives the generalized solvers, ``tau`` only the plain
    majorized ADMM baseline.  ``certificate_lambda`` is the free parameter
    of the descent-certificate split.
    """

    sigma: float = 0.8
    rho: float = 1.9
    tau: float = 1.618
    tol: float = 1e-5
    max_iter: int = 20000
    certificate_lambda: float = 0.75
    record_certificates: bool = False

    def __post_init__(self):
        if self.sigma <= 0:
            raise ValueError("sigma must be positive")
        if not 0 < self.rho < 2:
            raise ValueError("rho must lie in (0, 2)")
        if not 0 < self.tau < (1 + math.sqrt(5)) / 2:
            raise ValueError("tau must lie in (0, (1+sqrt(5))/2)")
        if self.tol < 0:
            raise ValueError("tol must be nonnegative")
        if self.max_iter < 1:
            raise ValueError("max_iter must be at least 1")
        if not 0.5 < self.certificate_lambda <= 1:
            raise ValueError("certificate_lambda must lie in (1/2, 1]")


@dataclass
class IterateTriple:
    x: np.ndarray
    y: np.ndarray
    z: np.ndarray
    k: int = 0

    @classmethod
    def zeros(cls, spec: ProblemSpec) -> "IterateTriple":
        return cls(np.zeros(spec.nx), np.zeros(spec.ny), np.zeros(spec.nz), 0)


@dataclass
class RelaxedTriple:
    x: np.ndarray
    y: np.ndarray
    z: np.ndarray
    k: int = 0

    @classmethod
    def zeros(cls, spec: ProblemSpec) -> "RelaxedTriple":
        return cls(np.zeros(spec.nx), np.zeros(spec.ny), np.zeros(spec.nz), 0)


@dataclass
class SolveTrajectory:
    """Recorded relaxed/accepted iterate pairs of a generalized run.

    ``relaxed[k]`` is the relaxed triple fed into iteration k and
    ``accepted[k]`` the triple it produced; ``relaxed`` carries one extra
    trailing entry when the final relaxation step was taken.
    """

    relaxed: List[RelaxedTriple] = field(default_factory=list)
    accepted: List[IterateTriple] = field(default_factory=list)
    residuals: List[float] = field(default_factory=list)


TERMINATION_CONVERGED = "converged"
TERMINATION_MAX_ITER = "max_iter"
TERMINATION_SUBPROBLEM = "subproblem_failure"


@dataclass
class SolveReport:
    final: Optional[IterateTriple]
    iterations: int
    residual_history: np.ndarray
    wall_time: float
    termination: str
    certificate_history: Optional[list] = None
    trajectory: Optional[SolveTrajectory] = None
    chain_identity_history: Optional[np.ndarray] = None

    @property
    def converged(self) -> bool:
        return self.termination == TERMINATION_CONVERGED
