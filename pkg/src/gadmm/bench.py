"""Simulated benchmark family: nonnegatively constrained composite QP.

Instances take the form

    min_{x, y}  0.5 <y, Q y> - <b, y> + 0.5 chi ||P+(D (d - H y))||^2
                + mu ||y||_1 + indicator(x >= 0)
    s.t.        H y + x = c,

with Q = G^T G / n for a standard-normal G (PSD, possibly singular),
standard-normal H, b, c, d = c - 5, mu = 5 sqrt(n), and D the positive
diagonal normalizing each row of H to unit norm.  P+ is the projection
onto the nonnegative orthant.
"""

from __future__ import annotations

import concurrent.futures
import io
import os
import warnings
from dataclasses import dataclass
from typing import Iterable, List, Optional, Sequence, Tuple, Union

import numpy as np

from .linops import LinearMap, SelfAdjointOp, estimate_lambda_max
from .oracles import ProxOracle, SmoothTerm, project_nonneg
from .problem import IterateTriple, ProblemSpec, RelaxedTriple, SolverConfig
from .solver import solve_gadmm_m, solve_m_admm, solve_m_gadmm

SOLVER_NAMES = ("m-admm", "m-gadmm", "gadmm-m")


@dataclass
class BenchInstance:
    m: int
    n: int
    Q: np.ndarray
    H: np.ndarray
    b: np.ndarray
    c: np.ndarray
    d: np.ndarray
    D: np.ndarray          # diagonal entries of the row normalizer
    chi: float
    mu: float
    seed: int


def generate_instance(m: int, n: int, chi: float, seed: int) -> BenchInstance:
    """Deterministic instance draw for a given seed.

    The right-hand side is c = H u + s with u ~ N(0, I/n) and half-normal
    s, so the hard constraint set {H y <= c} always has interior points
    (with c outright standard normal it is empty with high probability once
    m > 2n, leaving nothing for the solvers to converge to).
    """
    if m < 1 or n < 1:
        raise ValueError("dimensions must be positive")
    if chi < 0:
        raise ValueError("chi must be nonnegative")
    rng = np.random.default_rng(seed)
    g = rng.standard_normal((n, n))
    q = g.T @ g / n
    h = rng.standard_normal((m, n))
    b = rng.standard_normal(n)
    u = rng.standard_normal(n) / np.sqrt(n)
    c = h @ u + np.abs(rng.standard_normal(m))
    d = c - 5.0
    row_norms = np.linalg.norm(h, axis=1)
    if np.any(row_norms == 0.0):
        warnings.warn("zero row in H; its normalizer entry set to 1")
        row_norms = np.where(row_norms == 0.0, 1.0, row_norms)
    return BenchInstance(m=m, n=n, Q=q, H=h, b=b, c=c, d=d,
                         D=1.0 / row_norms, chi=float(chi),
                         mu=5.0 * float(np.sqrt(n)), seed=seed)


def resolve_chi(chi: Union[float, str], n: int) -> float:
    """Accepts a number or the shorthand '2mu' (= 10 sqrt(n))."""
    if isinstance(chi, str):
        if chi.strip().lower() in ("2mu", "2*mu"):
            return 10.0 * float(np.sqrt(n))
        return float(chi)
    return float(chi)


def bench_h1_value(y: np.ndarray, inst: BenchInstance) -> float:
    val = 0.5 * float(y @ (inst.Q @ y)) - float(inst.b @ y)
    if inst.chi > 0:
        proj = project_nonneg(inst.D * (inst.d - inst.H @ y))
        val += 0.5 * inst.chi * float(proj @ proj)
    return val


def bench_h1_gradient(y: np.ndarray, inst: BenchInstance) -> np.ndarray:
    """Gradient of the smooth y-term: Q y - b - chi H^T D P+(D(d - H y)).

    At projection kinks the zero branch contributes zero, which selects one
    deterministic element of the generalized gradient.
    """
    y = np.asarray(y, dtype=float)
    if y.shape != (inst.n,):
        raise ValueError(f"y must have length {inst.n}")
    grad = inst.Q @ y - inst.b
    if inst.chi > 0:
        proj = project_nonneg(inst.D * (inst.d - inst.H @ y))
        grad -= inst.chi * (inst.H.T @ (inst.D * proj))
    return grad


def bench_smooth_term(inst: BenchInstance) -> SmoothTerm:
    """Smooth y-term with curvature bounds Q <= hess <= Q + chi H^T D^2 H."""
    upper = inst.Q + inst.chi * (inst.H.T * inst.D ** 2) @ inst.H
    return SmoothTerm(dim=inst.n,
                      value=lambda y: bench_h1_value(y, inst),
                      gradient=lambda y: bench_h1_gradient(y, inst),
                      upper_op=SelfAdjointOp(upper),
                      lower_op=SelfAdjointOp(inst.Q))


def to_problem_spec(inst: BenchInstance, sigma: float) -> ProblemSpec:
    """Assemble the two-block program with the standard operator choices.

    The y-side semi-proximal term is T = lambda I - (upper + sigma H^T H)
    with lambda the (safely over-estimated) largest eigenvalue, so the
    effective y-metric telescopes to lambda I and the subproblem reduces to
    a soft threshold.  The x-side uses S = 0, giving the metric sigma I.
    """
    if sigma <= 0:
        raise ValueError("sigma must be positive")
    h1 = bench_smooth_term(inst)
    hth = inst.H.T @ inst.H
    shifted = h1.upper_op.mat + sigma * hth
    est = estimate_lambda_max(SelfAdjointOp(shifted))
    if not est.converged:
        raise RuntimeError("largest-eigenvalue estimation did not converge")
    t_mat = est.value * np.eye(inst.n) - shifted
    return ProblemSpec(
        f1=SmoothTerm.zero(inst.m),
        h1=h1,
        f2=ProxOracle.nonneg(),
        h2=ProxOracle.l1(inst.mu),
        A=LinearMap.identity(inst.m),
        B=LinearMap.from_matrix(inst.H.T),
        c=inst.c,
        S=SelfAdjointOp.zero(inst.m),
        T=SelfAdjointOp(t_mat),
        dual_scale=float(np.linalg.norm(inst.b)),
    )


@dataclass
class BenchRow:
    m: int
    n: int
    solver: str
    iterations: int
    time_s: float
    res: float
    converged: bool = True
    objective: float = float("nan")


def run_single(inst: BenchInstance, solver: str, cfg: SolverConfig,
               spec: Optional[ProblemSpec] = None) -> BenchRow:
    """One solver on one instance from the zero initial point."""
    if spec is None:
        spec = to_problem_spec(inst, cfg.sigma)
    if solver == "gadmm-m":
        report = solve_gadmm_m(spec, cfg, RelaxedTriple.zeros(spec))
    elif solver == "m-admm":
        report = solve_m_admm(spec, cfg, IterateTriple.zeros(spec))
    elif solver == "m-gadmm":
        report = solve_m_gadmm(spec, cfg, IterateTriple.zeros(spec))
    else:
        raise ValueError(f"unknown solver '{solver}'")
    final = report.final
    obj = spec.objective(final.x, final.y) if final is not None else float("nan")
    res = float(report.residual_history[-1]) if report.iterations else float("nan")
    return BenchRow(m=inst.m, n=inst.n, solver=solver,
                    iterations=report.iterations, time_s=report.wall_time,
                    res=res, converged=report.converged, objective=obj)


def run_benchmark(sizes: Sequence[Tuple[int, int]], chi: Union[float, str],
                  seeds: Iterable[int], cfg: SolverConfig,
                  solvers: Sequence[str] = SOLVER_NAMES,
                  max_workers: Optional[int] = None) -> List[BenchRow]:
    """All (size, seed, solver) combinations, one row each.

    Runs are independent; GADMM_THREADS (or ``max_workers``) caps the
    thread pool, defaulting to sequential execution.  Non-converged runs
    are recorded with their termination state, never dropped.
    """
    jobs = []
    for m, n in sizes:
        for seed in seeds:
            inst = generate_instance(m, n, resolve_chi(chi, n), seed)
            spec = to_problem_spec(inst, cfg.sigma)
            for solver in solvers:
                jobs.append((inst, solver, spec))
    if max_workers is None:
        max_workers = int(os.environ.get("GADMM_THREADS", "1"))
    if max_workers <= 1 or len(jobs) <= 1:
        return [run_single(inst, solver, cfg, spec)
                for inst, solver, spec in jobs]
    with concurrent.futures.ThreadPoolExecutor(max_workers=max_workers) as ex:
        return list(ex.map(lambda job: run_single(job[0], job[1], cfg, job[2]),
                           jobs))


def emit_report(rows: List[BenchRow], format: str = "csv") -> str:
    """Render rows as CSV or as an aligned per-size table."""
    if format == "csv":
        buf = io.StringIO()
        buf.write("m,n,solver,iter,time_s,res\n")
        for r in rows:
            buf.write(f"{r.m},{r.n},{r.solver},{r.iterations},"
                      f"{r.time_s:.6g},{r.res:.6g}\n")
        return buf.getvalue()
    if format == "aligned-table":
        return _aligned_table(rows)
    raise ValueError(f"unknown report format '{format}'")


def parse_report(text: str) -> List[BenchRow]:
    """Inverse of the CSV emitter (row identity up to 6-digit rounding)."""
    lines = [ln for ln in text.strip().splitlines() if ln]
    if not lines or lines[0] != "m,n,solver,iter,time_s,res":
        raise ValueError("not a benchmark CSV report")
    rows = []
    for ln in lines[1:]:
        m, n, solver, iters, time_s, res = ln.split(",")
        rows.append(BenchRow(m=int(m), n=int(n), solver=solver,
                             iterations=int(iters), time_s=float(time_s),
                             res=float(res)))
    return rows


def _aligned_table(rows: List[BenchRow]) -> str:
    groups = {}
    order = []
    for r in rows:
        key = (r.m, r.n)
        if key not in groups:
            groups[key] = {}
            order.append(key)
        groups[key].setdefault(r.solver, []).append(r)
    solvers = []
    for r in rows:
        if r.solver not in solvers:
            solvers.append(r.solver)
    header1 = f"{'m':>6} {'n':>6}"
    header2 = f"{'':>6} {'':>6}"
    for s in solvers:
        header1 += f" | {s:^28}"
        header2 += f" | {'Iter':>8} {'Time':>9} {'Res':>9}"
    lines = [header1, header2, "-" * len(header2)]
    for key in order:
        m, n = key
        line = f"{m:>6} {n:>6}"
        for s in solvers:
            cell = groups[key].get(s)
            if not cell:
                line += f" | {'-':>8} {'-':>9} {'-':>9}"
                continue
            iters = int(np.mean([r.iterations for r in cell]))
            t = float(np.mean([r.time_s for r in cell]))
            res = float(np.max([r.res for r in cell]))
            line += f" | {iters:>8d} {t:>9.2f} {res:>9.2e}"
        lines.append(line)
    return "\n".join(lines) + "\n"
