"""Majorized generalized ADMM and the two majorized baselines.

All three methods share the same subproblem machinery: at each iteration a
block update minimizes

    g(u) + 0.5 <u, M u> + <w - M u_anchor, u>

where M is the effective metric (upper curvature + semi-proximal term +
sigma * penalty gram) and ``w`` collects the gradient and coupling terms.
The metric is resolved once per solve into one of two exact routes:
a diagonal/scaled-identity prox step, or a declared block-quadratic solved
by the symmetric Gauss-Seidel sweep.
"""

from __future__ import annotations

import time
from typing import Optional

import numpy as np

from .diagnostics import (certificate_bundle, check_dual_update_chain,
                          kkt_residual_parts)
from .linops import BlockQuadratic, BlockSolveError, is_diagonal, sgs_sweep
from .oracles import ProxOracle
from .problem import (
    TERMINATION_CONVERGED,
    TERMINATION_MAX_ITER,
    TERMINATION_SUBPROBLEM,
    IterateTriple,
    ProblemSpec,
    RelaxedTriple,
    SolveReport,
    SolverConfig,
    SolveTrajectory,
    SubproblemError,
)


class _QuadSubsolver:
    """Exact minimizer of g(u) + 0.5 <u, M u> + <w - M anchor, u>."""

    def __init__(self, metric: np.ndarray, prox: Optional[ProxOracle],
                 bq: Optional[BlockQuadratic], side: str):
        self.metric = metric
        self.prox = prox
        self.bq = bq
        self.side = side
        self.diag = None
        if bq is not None:
            return
        if is_diagonal(metric):
            d = np.diag(metric).copy()
            if np.any(d <= 0):
                raise SubproblemError(
                    f"{side}-subproblem metric has nonpositive diagonal")
            self.diag = d
            return
        raise SubproblemError(
            f"{side}-subproblem metric is neither diagonal nor declared "
            f"block-quadratic; no exact solve route available")

    def solve(self, w: np.ndarray, anchor: np.ndarray):
        """Returns (minimizer, metric-form linear term w - M anchor)."""
        if self.diag is not None:
            g = w - self.diag * anchor
            v = -g / self.diag
            u = v if self.prox is None else self.prox.prox(v, self.diag)
            return u, g
        g0 = w - self.bq.q @ anchor
        try:
            u = sgs_sweep(self.bq, self.prox, g0, anchor)
        except BlockSolveError as exc:
            raise SubproblemError(f"{self.side}-subproblem: {exc}") from exc
        return u, w - self.metric @ anchor

    def metric_apply(self, u: np.ndarray) -> np.ndarray:
        if self.diag is not None:
            return self.diag * u
        return self.metric @ u


class _Engine:
    """Precomputed per-solve state shared by the update steps."""

    def __init__(self, spec: ProblemSpec, cfg: SolverConfig):
        spec.validate(cfg.sigma)
        self.spec = spec
        self.cfg = cfg
        f_mat, _, bq_x = spec.x_structure(cfg.sigma)
        h_mat, _, bq_y = spec.y_structure(cfg.sigma)
        self.xsolver = _QuadSubsolver(f_mat, spec.f2, bq_x, "x")
        self.ysolver = _QuadSubsolver(h_mat, spec.h2, bq_y, "y")
        self.c_scale = 1.0 + float(np.linalg.norm(spec.c))
        self.d_scale = 1.0 + float(spec.dual_scale)

    def x_step(self, relaxed: RelaxedTriple) -> np.ndarray:
        spec, sigma = self.spec, self.cfg.sigma
        rt = spec.primal_residual_vec(relaxed.x, relaxed.y)
        w = spec.f1.gradient(relaxed.x) + spec.A.apply(sigma * rt + relaxed.z)
        x, _ = self.xsolver.solve(w, relaxed.x)
        return x

    def z_step(self, relaxed: RelaxedTriple, x_new: np.ndarray) -> np.ndarray:
        spec, sigma = self.spec, self.cfg.sigma
        r = (spec.A.adjoint_apply(x_new) + spec.B.adjoint_apply(relaxed.y)
             - spec.c)
        return relaxed.z + sigma * r

    def y_step(self, relaxed: RelaxedTriple, x_new: np.ndarray,
               z_new: np.ndarray) -> np.ndarray:
        spec, sigma = self.spec, self.cfg.sigma
        r = (spec.A.adjoint_apply(x_new) + spec.B.adjoint_apply(relaxed.y)
             - spec.c)
        w = spec.h1.gradient(relaxed.y) + spec.B.apply(sigma * r + z_new)
        y, _ = self.ysolver.solve(w, relaxed.y)
        return y


def x_update(spec: ProblemSpec, relaxed: RelaxedTriple,
             cfg: SolverConfig) -> np.ndarray:
    """One x-subproblem solve anchored at the relaxed triple."""
    return _Engine(spec, cfg).x_step(relaxed)


def z_update(spec: ProblemSpec, relaxed: RelaxedTriple, x_new: np.ndarray,
             cfg: SolverConfig) -> np.ndarray:
    """Intermediate multiplier step z~ + sigma (A* x_new + B* y~ - c)."""
    return _Engine(spec, cfg).z_step(relaxed, x_new)


def y_update(spec: ProblemSpec, relaxed: RelaxedTriple, x_new: np.ndarray,
             z_new: np.ndarray, cfg: SolverConfig) -> np.ndarray:
    """One y-subproblem solve using the fresh x and multiplier."""
    return _Engine(spec, cfg).y_step(relaxed, x_new, z_new)


def relax_step(relaxed: RelaxedTriple, current: IterateTriple,
               rho: float) -> RelaxedTriple:
    """Over/under-relaxation: relaxed + rho * (current - relaxed)."""
    if not 0 < rho < 2:
        raise ValueError("rho must lie in (0, 2)")
    return RelaxedTriple(
        x=relaxed.x + rho * (current.x - relaxed.x),
        y=relaxed.y + rho * (current.y - relaxed.y),
        z=relaxed.z + rho * (current.z - relaxed.z),
        k=current.k + 1,
    )


def solve_gadmm_m(spec: ProblemSpec, cfg: SolverConfig,
                  init: Optional[RelaxedTriple] = None,
                  reference=None) -> SolveReport:
    """Run the majorized generalized ADMM.

    Each iteration solves the x-subproblem at the relaxed anchor, takes the
    intermediate multiplier step against the relaxed y, solves the
    y-subproblem, evaluates the KKT residual at the accepted triple, and
    finally relaxes the whole triple by ``cfg.rho``.

    With ``cfg.record_certificates`` the report carries the full trajectory
    and the per-iteration multiplier-transport identity residuals; passing
    a ``reference`` triple additionally fills ``certificate_history``.
    """
    if init is None:
        init = RelaxedTriple.zeros(spec)
    t0 = time.perf_counter()
    sigma, rho = cfg.sigma, cfg.rho
    traj = SolveTrajectory() if cfg.record_certificates else None
    residuals = []
    termination = TERMINATION_MAX_ITER
    final = None
    last = None

    try:
        eng = _Engine(spec, cfg)
        xt = np.array(init.x, dtype=float)
        yt = np.array(init.y, dtype=float)
        zt = np.array(init.z, dtype=float)
        A, B, c = spec.A, spec.B, spec.c
        for k in range(cfg.max_iter):
            if traj is not None:
                traj.relaxed.append(RelaxedTriple(xt.copy(), yt.copy(),
                                                  zt.copy(), k))
            ax_t = A.adjoint_apply(xt)
            by_t = B.adjoint_apply(yt)
            rt = ax_t + by_t - c
            wx = spec.f1.gradient(xt) + A.apply(sigma * rt + zt)
            x, _ = eng.xsolver.solve(wx, xt)

            ax = A.adjoint_apply(x)
            r_half = ax + by_t - c
            z = zt + sigma * r_half

            wy = spec.h1.gradient(yt) + B.apply(sigma * r_half + z)
            y, gy = eng.ysolver.solve(wy, yt)
            v = -(eng.ysolver.metric_apply(y) + gy)

            last = IterateTriple(x, y, z, k)
            res, _ = kkt_residual_parts(spec, x, y, z, v,
                                        c_scale=eng.c_scale,
                                        d_scale=eng.d_scale)
            residuals.append(res)
            if traj is not None:
                traj.accepted.append(IterateTriple(x.copy(), y.copy(),
                                                   z.copy(), k))
                traj.residuals.append(res)
            if res <= cfg.tol:
                termination = TERMINATION_CONVERGED
                final = last
                break
            xt += rho * (x - xt)
            yt += rho * (y - yt)
            zt += rho * (z - zt)
    except SubproblemError:
        termination = TERMINATION_SUBPROBLEM

    if final is None:
        final = last
    report = SolveReport(final=final, iterations=len(residuals),
                         residual_history=np.asarray(residuals),
                         wall_time=time.perf_counter() - t0,
                         termination=termination, trajectory=traj)
    if traj is not None and len(traj.accepted) > 1:
        report.chain_identity_history = check_dual_update_chain(spec, traj, cfg)
    if traj is not None and reference is not None:
        report.certificate_history = certificate_bundle(spec, traj,
                                                        reference, cfg)
    return report


def solve_m_admm(spec: ProblemSpec, cfg: SolverConfig,
                 init: Optional[IterateTriple] = None) -> SolveReport:
    """Majorized semi-proximal ADMM baseline.

    Majorization and proximal anchors sit at the previous accepted iterate;
    the x-update uses (y^k, z^k), the y-update (x^{k+1}, z^k), and the
    multiplier moves by tau * sigma times the fresh constraint residual.
    """
    if init is None:
        init = IterateTriple.zeros(spec)
    t0 = time.perf_counter()
    sigma, tau = cfg.sigma, cfg.tau
    residuals = []
    termination = TERMINATION_MAX_ITER
    final = None
    last = None

    try:
        eng = _Engine(spec, cfg)
        x = np.array(init.x, dtype=float)
        y = np.array(init.y, dtype=float)
        z = np.array(init.z, dtype=float)
        A, B, c = spec.A, spec.B, spec.c
        grad_y = spec.h1.gradient(y)
        ax = A.adjoint_apply(x)
        by = B.adjoint_apply(y)
        for k in range(cfg.max_iter):
            wx = spec.f1.gradient(x) + A.apply(sigma * (ax + by - c) + z)
            x1, _ = eng.xsolver.solve(wx, x)
            ax1 = A.adjoint_apply(x1)

            wy = grad_y + B.apply(sigma * (ax1 + by - c) + z)
            y1, gy = eng.ysolver.solve(wy, y)
            v = -(eng.ysolver.metric_apply(y1) + gy)
            by1 = B.adjoint_apply(y1)

            z1 = z + tau * sigma * (ax1 + by1 - c)

            grad_y1 = spec.h1.gradient(y1)
            last = IterateTriple(x1, y1, z1, k)
            res, _ = kkt_residual_parts(spec, x1, y1, z1, v,
                                        c_scale=eng.c_scale,
                                        d_scale=eng.d_scale,
                                        grad_y=grad_y1)
            residuals.append(res)
            x, y, z, ax, by, grad_y = x1, y1, z1, ax1, by1, grad_y1
            if res <= cfg.tol:
                termination = TERMINATION_CONVERGED
                final = last
                break
    except SubproblemError:
        termination = TERMINATION_SUBPROBLEM

    if final is None:
        final = last
    return SolveReport(final=final, iterations=len(residuals),
                       residual_history=np.asarray(residuals),
                       wall_time=time.perf_counter() - t0,
                       termination=termination)


def solve_m_gadmm(spec: ProblemSpec, cfg: SolverConfig,
                  init: Optional[IterateTriple] = None) -> SolveReport:
    """Majorized generalized-ADMM baseline in relaxed-residual form.

    Majorization anchors sit at the previous accepted iterate; the
    relaxation factor rho replaces A* x^{k+1} by
    rho A* x^{k+1} - (1 - rho)(B* y^k - c) inside the y-subproblem and the
    multiplier update.  With rho = 1 this is exactly the tau = 1 majorized
    ADMM.
    """
    if init is None:
        init = IterateTriple.zeros(spec)
    t0 = time.perf_counter()
    sigma, rho = cfg.sigma, cfg.rho
    residuals = []
    termination = TERMINATION_MAX_ITER
    final = None
    last = None

    try:
        eng = _Engine(spec, cfg)
        x = np.array(init.x, dtype=float)
        y = np.array(init.y, dtype=float)
        z = np.array(init.z, dtype=float)
        A, B, c = spec.A, spec.B, spec.c
        grad_y = spec.h1.gradient(y)
        ax = A.adjoint_apply(x)
        by = B.adjoint_apply(y)
        for k in range(cfg.max_iter):
            wx = spec.f1.gradient(x) + A.apply(sigma * (ax + by - c) + z)
            x1, _ = eng.xsolver.solve(wx, x)
            ax1 = A.adjoint_apply(x1)

            ax_relaxed = rho * ax1 - (1.0 - rho) * (by - c)
            wy = grad_y + B.apply(sigma * (ax_relaxed + by - c) + z)
            y1, gy = eng.ysolver.solve(wy, y)
            v = -(eng.ysolver.metric_apply(y1) + gy)
            by1 = B.adjoint_apply(y1)

            z1 = z + sigma * (ax_relaxed + by1 - c)

            grad_y1 = spec.h1.gradient(y1)
            last = IterateTriple(x1, y1, z1, k)
            res, _ = kkt_residual_parts(spec, x1, y1, z1, v,
                                        c_scale=eng.c_scale,
                                        d_scale=eng.d_scale,
                                        grad_y=grad_y1)
            residuals.append(res)
            x, y, z, ax, by, grad_y = x1, y1, z1, ax1, by1, grad_y1
            if res <= cfg.tol:
                termination = TERMINATION_CONVERGED
                final = last
                break
    except SubproblemError:
        termination = TERMINATION_SUBPROBLEM

    if final is None:
        final = last
    return SolveReport(final=final, iterations=len(residuals),
                       residual_history=np.asarray(residuals),
                       wall_time=time.perf_counter() - t0,
                       termination=termination)
