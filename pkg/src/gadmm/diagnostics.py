"""KKT residuals, convergence certificates, and identity checks.

The certificate quantities are scalar sequences evaluated against a
(near-)optimal reference triple (x_ref, y_ref, z_ref); writing
e.g. ``ze^k = z^k - z_ref``, ``axe^k = A*(x^k - x_ref)``, they are

    psi_k   = ||ze^k + sigma (rho-1) axe^k||^2 / (sigma rho)
              + sigma (2-rho) ||axe^k||^2
              + ||xt^{k+1} - x_ref||^2_{Mf} / rho
              + ||yt^k - y_ref||^2_{Mh} / rho
    theta_k = ||xt^{k+1} - x^{k+1}||^2_{Lf/2 - Uf + (2-rho) Mf}
              + ||yt^k - y^k||^2_{Lh/2 - Uh + (2-rho) Mh}
    xi_k    = ||xt^{k+1} - x^{k+1}||^2_{Uf} + ||yt^k - y^k||^2_{Uh}
    eta_k   = <axe^{k+1}, ze^{k+1}> + <B*(y^k - y_ref), ze^k + sigma r^k>

with Mf = Uf + S, Mh = Uh + T (U/L the upper/lower curvature operators),
r^k the primal residual, and xt/yt the relaxed iterates.  delta_k adds the
lambda-weighted split used by the summable-descent inequality.  The two
descent inequalities checked here are

    psi_k - psi_{k+1} >= theta_k + sigma (2-rho) ||r^k||^2
    phi_k - phi_{k+1} >= delta_k - xi_k,
    phi_k = psi_k + (2-rho) ||xt^k - x^k||^2_{Mf}
            + sigma (1-lambda)(2-rho) ||A* x^k + B* y^{k-1} - c||^2.
"""

from __future__ import annotations

import io
from dataclasses import dataclass
from typing import List, Optional, Tuple

import numpy as np

from .linops import LinearMap
from .problem import IterateTriple, ProblemSpec, SolverConfig, SolveTrajectory


def kkt_residual_parts(spec: ProblemSpec, x: np.ndarray, y: np.ndarray,
                       z: np.ndarray, v: np.ndarray,
                       c_scale: Optional[float] = None,
                       d_scale: Optional[float] = None,
                       grad_y: Optional[np.ndarray] = None
                       ) -> Tuple[float, Tuple[float, float]]:
    """Normalized KKT residual and its (primal, dual) components.

    ``v`` must be a subgradient of the nonsmooth y-term extracted from the
    y-subproblem optimality condition (zero when that term is absent).
    """
    if c_scale is None:
        c_scale = 1.0 + float(np.linalg.norm(spec.c))
    if d_scale is None:
        d_scale = 1.0 + float(spec.dual_scale)
    if grad_y is None:
        grad_y = spec.h1.gradient(y)
    primal = float(np.linalg.norm(spec.primal_residual_vec(x, y))) / c_scale
    dual = float(np.linalg.norm(grad_y + spec.B.apply(z) + v)) / d_scale
    return max(primal, dual), (primal, dual)


def kkt_residual(spec: ProblemSpec, triple: IterateTriple,
                 v: np.ndarray) -> float:
    """max of the normalized primal and dual KKT residuals; 0 at a KKT point."""
    res, _ = kkt_residual_parts(spec, triple.x, triple.y, triple.z, v)
    return res


@dataclass
class ReferencePoint:
    """A (near-)KKT triple anchoring the certificate error quantities."""

    x: np.ndarray
    y: np.ndarray
    z: np.ndarray
    res: Optional[float] = None

    @classmethod
    def from_triple(cls, triple: IterateTriple,
                    res: Optional[float] = None) -> "ReferencePoint":
        return cls(np.array(triple.x, dtype=float),
                   np.array(triple.y, dtype=float),
                   np.array(triple.z, dtype=float), res)


@dataclass
class CertificateRecord:
    k: int
    psi: float
    theta: float
    delta: float
    xi: float
    eta: float
    primal_residual: float
    res: float


def _stack_adjoint(lin: LinearMap, rows: np.ndarray) -> np.ndarray:
    """Apply the adjoint of ``lin`` to every row of a stacked array."""
    if lin.matrix is not None:
        return rows @ lin.matrix
    return np.stack([lin.adjoint_apply(r) for r in rows])


def _qf_rows(mat: np.ndarray, diff: np.ndarray) -> np.ndarray:
    """Row-wise quadratic forms <d_i, M d_i> (M may be indefinite)."""
    if not mat.any():
        return np.zeros(diff.shape[0])
    return np.einsum("ij,ij->i", diff @ mat, diff)


class _CertificateWork:
    """Stacked trajectory arrays and metric matrices shared by the checks."""

    def __init__(self, spec: ProblemSpec, traj: SolveTrajectory,
                 ref: ReferencePoint, cfg: SolverConfig):
        if len(traj.accepted) != len(traj.relaxed):
            raise ValueError("trajectory must pair each accepted iterate "
                             "with its relaxed anchor")
        self.K = len(traj.accepted) - 1
        self.sigma, self.rho = cfg.sigma, cfg.rho
        self.lam = cfg.certificate_lambda

        self.X = np.stack([t.x for t in traj.accepted])
        self.Y = np.stack([t.y for t in traj.accepted])
        self.Z = np.stack([t.z for t in traj.accepted])
        self.Xt = np.stack([t.x for t in traj.relaxed])
        self.Yt = np.stack([t.y for t in traj.relaxed])

        self.AX = _stack_adjoint(spec.A, self.X)
        self.BY = _stack_adjoint(spec.B, self.Y)
        self.ax_ref = spec.A.adjoint_apply(ref.x)
        self.by_ref = spec.B.adjoint_apply(ref.y)

        self.c = spec.c
        self.ze = self.Z - ref.z
        self.axe = self.AX - self.ax_ref
        self.r = self.AX + self.BY - spec.c

        f_metric, s_op, _ = spec.x_structure(cfg.sigma)
        h_metric, t_op, _ = spec.y_structure(cfg.sigma)
        self.f_metric = f_metric
        uf, lf = spec.f1.upper_op.mat, spec.f1.lower_op.mat
        uh, lh = spec.h1.upper_op.mat, spec.h1.lower_op.mat
        self.mf = uf + s_op.mat
        self.mh = uh + t_op.mat
        self.uf, self.lf, self.uh, self.lh = uf, lf, uh, lh

        rho = self.rho
        # psi_k for k = 0..K-1 (needs the relaxed point of iteration k+1)
        zshift = self.ze + self.sigma * (rho - 1.0) * self.axe
        kk = self.K
        self.psi = (
            np.einsum("ij,ij->i", zshift[:kk], zshift[:kk]) / (self.sigma * rho)
            + self.sigma * (2.0 - rho)
            * np.einsum("ij,ij->i", self.axe[:kk], self.axe[:kk])
            + _qf_rows(self.mf, self.Xt[1:kk + 1] - ref.x) / rho
            + _qf_rows(self.mh, self.Yt[:kk] - ref.y) / rho
        )

        dx = self.Xt[1:kk + 1] - self.X[1:kk + 1]   # xt^{k+1} - x^{k+1}
        dy = self.Yt[:kk] - self.Y[:kk]             # yt^k - y^k
        self.theta = (_qf_rows(0.5 * lf - uf + (2.0 - rho) * self.mf, dx)
                      + _qf_rows(0.5 * lh - uh + (2.0 - rho) * self.mh, dy))
        self.xi = _qf_rows(uf, dx) + _qf_rows(uh, dy)
        self._dx, self._dy = dx, dy

    def delta(self) -> np.ndarray:
        """delta_k for k = 1..K-1 (needs y^{k-1})."""
        sigma, rho, lam = self.sigma, self.rho, self.lam
        kk = self.K
        # A* x^{k+1} + B* y^k - c for k = 1..K-1
        r_half = self.AX[2:kk + 1] + self.BY[1:kk] - self.c
        dby = self.BY[1:kk] - self.BY[:kk - 1]      # B*(y^k - y^{k-1})
        dxs = self.X[2:kk + 1] - self.X[1:kk]       # x^{k+1} - x^k
        dxt = self.Xt[1:kk] - self.X[1:kk]          # xt^k - x^k
        return (
            _qf_rows(0.5 * self.lf, self._dx[1:])
            + _qf_rows(0.5 * self.lh + (2.0 - rho) * self.mh, self._dy[1:])
            + (1.0 - lam) * (2.0 - rho) * _qf_rows(self.mf, dxt)
            + sigma * (2.0 * lam - 1.0) * (2.0 - rho)
            * np.einsum("ij,ij->i", r_half, r_half)
            + 0.5 * sigma * (1.0 - lam) * (2.0 - rho)
            * np.einsum("ij,ij->i", dby, dby)
            + lam * (2.0 - rho) ** 2 / rho * _qf_rows(self.f_metric, dxs)
        )

    def eta(self) -> np.ndarray:
        """eta_k for k = 0..K-1, straight from its definition."""
        kk = self.K
        bye = self.BY - self.by_ref
        return (np.einsum("ij,ij->i", self.axe[1:kk + 1], self.ze[1:kk + 1])
                + np.einsum("ij,ij->i", bye[:kk],
                            self.ze[:kk] + self.sigma * self.r[:kk]))

    def eta_expanded(self) -> np.ndarray:
        """The same eta_k written through the multiplier-transport identity."""
        kk = self.K
        sigma, rho = self.sigma, self.rho
        zshift = self.ze + sigma * (rho - 1.0) * self.axe
        zs2 = np.einsum("ij,ij->i", zshift, zshift)
        axe2 = np.einsum("ij,ij->i", self.axe, self.axe)
        r2 = np.einsum("ij,ij->i", self.r, self.r)
        return ((zs2[1:kk + 1] - zs2[:kk]) / (2.0 * sigma * rho)
                + 0.5 * sigma * (2.0 - rho)
                * (r2[:kk] + axe2[1:kk + 1] - axe2[:kk]))

    def phi(self) -> np.ndarray:
        """phi_k for k = 1..K-1."""
        sigma, rho, lam = self.sigma, self.rho, self.lam
        kk = self.K
        dxt = self.Xt[1:kk] - self.X[1:kk]
        # A* x^k + B* y^{k-1} - c for k = 1..K-1
        r_prev = self.AX[1:kk] + self.BY[:kk - 1] - self.c
        return (self.psi[1:kk]
                + (2.0 - rho) * _qf_rows(self.mf, dxt)
                + sigma * (1.0 - lam) * (2.0 - rho)
                * np.einsum("ij,ij->i", r_prev, r_prev))


def certificate_bundle(spec: ProblemSpec, traj: SolveTrajectory,
                       ref: ReferencePoint,
                       cfg: SolverConfig) -> List[CertificateRecord]:
    """Certificate records for k = 1..K-1 of a recorded run.

    Runs shorter than two iterations yield an empty sequence (delta needs
    the previous y, psi the next relaxed point).
    """
    if len(traj.accepted) < 3:
        return []
    work = _CertificateWork(spec, traj, ref, cfg)
    delta = work.delta()
    eta = work.eta()
    r_norm = np.linalg.norm(work.r, axis=1)
    res = list(traj.residuals) if traj.residuals else [np.nan] * (work.K + 1)
    return [CertificateRecord(k=k,
                              psi=float(work.psi[k]),
                              theta=float(work.theta[k]),
                              delta=float(delta[k - 1]),
                              xi=float(work.xi[k]),
                              eta=float(eta[k]),
                              primal_residual=float(r_norm[k]),
                              res=float(res[k]))
            for k in range(1, work.K)]


def eta_consistency(spec: ProblemSpec, traj: SolveTrajectory,
                    ref: ReferencePoint,
                    cfg: SolverConfig) -> Tuple[np.ndarray, np.ndarray]:
    """eta_k evaluated two ways: by definition and via its expansion."""
    work = _CertificateWork(spec, traj, ref, cfg)
    return work.eta(), work.eta_expanded()


@dataclass
class DescentCheckResult:
    """Per-iteration slacks of the two descent inequalities (k = 1..K-2)."""

    ks: np.ndarray
    pivot_slack: np.ndarray
    summable_slack: np.ndarray
    psi: np.ndarray

    def passed(self, eps_scale: float = 1e-6) -> bool:
        eps = eps_scale * (1.0 + self.psi)
        return bool(np.all(self.pivot_slack >= -eps)
                    and np.all(self.summable_slack >= -eps))


def check_descent_inequality(spec: ProblemSpec, traj: SolveTrajectory,
                             ref: ReferencePoint,
                             cfg: SolverConfig) -> DescentCheckResult:
    """Slack of both descent inequalities along a recorded run.

    Nonnegative slack (up to a tolerance scaled by 1 + psi_k, absorbing the
    reference point's own residual) confirms the monotonicity underlying
    the convergence argument.
    """
    if len(traj.accepted) < 4:
        raise ValueError("need at least 4 recorded iterations")
    work = _CertificateWork(spec, traj, ref, cfg)
    kk = work.K
    sigma, rho = cfg.sigma, cfg.rho
    r2 = np.einsum("ij,ij->i", work.r, work.r)
    # pivot inequality for k = 1..K-2
    piv = (work.psi[1:kk - 1] - work.psi[2:kk]
           - work.theta[1:kk - 1]
           - sigma * (2.0 - rho) * r2[1:kk - 1])
    phi = work.phi()
    delta = work.delta()
    summable = (phi[:-1] - phi[1:]) - (delta[:-1] - work.xi[1:kk - 1])
    return DescentCheckResult(ks=np.arange(1, kk - 1),
                              pivot_slack=piv,
                              summable_slack=summable,
                              psi=work.psi[1:kk - 1])


def check_dual_update_chain(spec: ProblemSpec, traj: SolveTrajectory,
                            cfg: SolverConfig) -> np.ndarray:
    """Residuals of the multiplier-transport identity

        z^k = z^{k-1} + sigma rho (A* x^k + B* y^{k-1} - c)
                      + sigma (rho - 1) A* (x^{k-1} - x^k),

    normalized by 1 + ||z^k||, for k = 1..K.  The identity is an algebraic
    consequence of the update scheme, so violations sit at rounding level.
    """
    X = np.stack([t.x for t in traj.accepted])
    Y = np.stack([t.y for t in traj.accepted])
    Z = np.stack([t.z for t in traj.accepted])
    AX = _stack_adjoint(spec.A, X)
    BY = _stack_adjoint(spec.B, Y)
    sigma, rho = cfg.sigma, cfg.rho
    rhs = (Z[:-1]
           + sigma * rho * (AX[1:] + BY[:-1] - spec.c)
           + sigma * (rho - 1.0) * (AX[:-1] - AX[1:]))
    viol = np.linalg.norm(Z[1:] - rhs, axis=1)
    return viol / (1.0 + np.linalg.norm(Z[1:], axis=1))


@dataclass
class IdentityCheckReport:
    trials: int
    dim: int
    max_violation: float
    max_inequality_violation: float
    max_polarization_violation: float
    max_four_point_violation: float
    tol: float = 1e-10

    @property
    def passed(self) -> bool:
        return self.max_violation <= self.tol


def check_operator_identities(trials: int, dim: int,
                              seed: int = 0) -> IdentityCheckReport:
    """Sampled check of the PSD seminorm inequality and identities.

    For random PSD G and random vectors:

        ||u||_G^2 + ||v||_G^2 >= 0.5 ||u - v||_G^2
        2 <u, G v> = ||u||_G^2 + ||v||_G^2 - ||u - v||_G^2
                   = ||u + v||_G^2 - ||u||_G^2 - ||v||_G^2
        2 <u1 - u2, G (v1 - v2)> = ||u1 - v2||_G^2 + ||u2 - v1||_G^2
                                   - ||u1 - v1||_G^2 - ||u2 - v2||_G^2

    Violations are measured relative to the magnitude of the terms; the
    report carries the worst case per family.
    """
    if trials < 1:
        raise ValueError("trials must be at least 1")
    rng = np.random.default_rng(seed)
    max_ineq = max_polar = max_four = 0.0
    for _ in range(trials):
        w = rng.standard_normal((dim, dim))
        g = w.T @ w / dim

        def q(a):
            return float(a @ (g @ a))

        u, v = rng.standard_normal(dim), rng.standard_normal(dim)
        scale = 1.0 + abs(q(u)) + abs(q(v)) + abs(q(u - v)) + abs(q(u + v))
        ineq = max(0.0, 0.5 * q(u - v) - q(u) - q(v)) / scale
        lhs = 2.0 * float(u @ (g @ v))
        polar = max(abs(lhs - (q(u) + q(v) - q(u - v))),
                    abs(lhs - (q(u + v) - q(u) - q(v)))) / scale

        u1, u2 = rng.standard_normal(dim), rng.standard_normal(dim)
        v1, v2 = rng.standard_normal(dim), rng.standard_normal(dim)
        lhs4 = 2.0 * float((u1 - u2) @ (g @ (v1 - v2)))
        rhs4 = q(u1 - v2) + q(u2 - v1) - q(u1 - v1) - q(u2 - v2)
        scale4 = (1.0 + abs(q(u1 - v2)) + abs(q(u2 - v1)) + abs(q(u1 - v1))
                  + abs(q(u2 - v2)))
        four = abs(lhs4 - rhs4) / scale4

        max_ineq = max(max_ineq, ineq)
        max_polar = max(max_polar, polar)
        max_four = max(max_four, four)
    return IdentityCheckReport(trials=trials, dim=dim,
                               max_violation=max(max_ineq, max_polar,
                                                 max_four),
                               max_inequality_violation=max_ineq,
                               max_polarization_violation=max_polar,
                               max_four_point_violation=max_four)


def certificates_to_csv(records: List[CertificateRecord]) -> str:
    """CSV dump of certificate records."""
    buf = io.StringIO()
    buf.write("k,psi,theta,delta,xi,eta,primal_residual,res\n")
    for r in records:
        buf.write(f"{r.k},{r.psi:.12g},{r.theta:.12g},{r.delta:.12g},"
                  f"{r.xi:.12g},{r.eta:.12g},{r.primal_residual:.12g},"
                  f"{r.res:.12g}\n")
    return buf.getvalue()
