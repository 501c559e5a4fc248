"""Command-line interface: benchmark runner and diagnostics verifier.

Exit codes: 0 when every run converged (or every check passed), 2 when any
run failed to converge or any check failed, 1 on usage errors.
"""

from __future__ import annotations

import sys
from typing import Optional

import click
import numpy as np

from . import bench as bench_mod
from . import diagnostics as diag
from .linops import BlockQuadratic, sgs_operator, sgs_sweep
from .problem import RelaxedTriple, SolverConfig
from .solver import solve_gadmm_m


@click.group()
def cli():
    """Majorized generalized ADMM benchmark and verification tools."""


def _parse_seeds(text: str):
    try:
        return [int(s) for s in text.split(",") if s.strip() != ""]
    except ValueError:
        raise click.UsageError(f"bad seed list '{text}'")


@cli.command("bench")
@click.option("--m", "ms", type=int, multiple=True, required=True,
              help="Constraint-space dimension; repeat for several sizes.")
@click.option("--n", "ns", type=int, multiple=True, required=True,
              help="Variable dimension; pairs up with --m in order.")
@click.option("--chi", default="0", show_default=True,
              help="Penalty weight: a number or '2mu'.")
@click.option("--seeds", default="0", show_default=True,
              help="Comma-separated instance seeds.")
@click.option("--sigma", default=0.8, show_default=True, type=float)
@click.option("--rho", default=1.9, show_default=True, type=float)
@click.option("--tau", default=1.618, show_default=True, type=float)
@click.option("--tol", default=1e-5, show_default=True, type=float)
@click.option("--max-iter", default=20000, show_default=True, type=int)
@click.option("--solvers", default=",".join(bench_mod.SOLVER_NAMES),
              show_default=True, help="Comma-separated solver names.")
@click.option("--out", type=click.Path(dir_okay=False), default=None,
              help="Write the report here instead of stdout.")
@click.option("--format", "fmt", default="csv", show_default=True,
              type=click.Choice(["csv", "aligned-table"]))
def bench_cmd(ms, ns, chi, seeds, sigma, rho, tau, tol, max_iter, solvers,
              out, fmt):
    """Run the simulated benchmark over sizes, seeds, and solvers."""
    if len(ms) != len(ns):
        raise click.UsageError("--m and --n must come in pairs")
    solver_list = [s.strip() for s in solvers.split(",") if s.strip()]
    for s in solver_list:
        if s not in bench_mod.SOLVER_NAMES:
            raise click.UsageError(
                f"unknown solver '{s}' (choices: {bench_mod.SOLVER_NAMES})")
    cfg = SolverConfig(sigma=sigma, rho=rho, tau=tau, tol=tol,
                       max_iter=max_iter)
    rows = bench_mod.run_benchmark(list(zip(ms, ns)), chi,
                                   _parse_seeds(seeds), cfg,
                                   solvers=solver_list)
    text = bench_mod.emit_report(rows, format=fmt)
    if out:
        with open(out, "w") as fh:
            fh.write(text)
        click.echo(f"wrote {len(rows)} rows to {out}")
    else:
        click.echo(text, nl=False)
    return 0 if all(r.converged for r in rows) else 2


@cli.command("verify")
@click.option("--trials", default=1000, show_default=True, type=int)
@click.option("--dim", default=16, show_default=True, type=int)
@click.option("--seed", default=1, show_default=True, type=int)
@click.option("--size", default="60x90", show_default=True,
              help="mxn of the instance used for run-level checks.")
def verify_cmd(trials, dim, seed, size):
    """Run the diagnostics suites and report pass/fail per check."""
    failures = 0

    def check(name: str, ok: bool, detail: str = ""):
        nonlocal failures
        if ok:
            click.echo(f"PASS  {name}{(': ' + detail) if detail else ''}")
        else:
            failures += 1
            click.echo(f"FAIL  {name}{(': ' + detail) if detail else ''}")

    ident = diag.check_operator_identities(trials, dim, seed)
    check("seminorm inequality and polarization identities", ident.passed,
          f"max violation {ident.max_violation:.3e}")

    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(10):
        dims = rng.integers(2, 8, size=3)
        w = rng.standard_normal((dims.sum(), dims.sum()))
        q = w.T @ w + dims.sum() * np.eye(dims.sum())
        bq = BlockQuadratic(q, dims)
        s = sgs_operator(bq).mat
        rhs = rng.standard_normal(dims.sum())
        anchor = rng.standard_normal(dims.sum())
        got = sgs_sweep(bq, None, rhs, anchor)
        want = np.linalg.solve(q + s, -rhs + s @ anchor)
        worst = max(worst, float(np.linalg.norm(got - want)
                                 / (1.0 + np.linalg.norm(want))))
    check("sGS sweep equals semi-proximal solve", worst <= 1e-10,
          f"max relative error {worst:.3e}")

    try:
        m, n = (int(v) for v in size.lower().split("x"))
    except ValueError:
        raise click.UsageError(f"bad --size '{size}', expected MxN")
    inst = bench_mod.generate_instance(m, n, chi=0.0, seed=seed)
    spec = bench_mod.to_problem_spec(inst, 0.8)
    ref_cfg = SolverConfig(tol=1e-10, max_iter=200000)
    ref_report = solve_gadmm_m(spec, ref_cfg, RelaxedTriple.zeros(spec))
    check("high-accuracy reference run", ref_report.converged,
          f"{ref_report.iterations} iterations")
    ref = diag.ReferencePoint.from_triple(
        ref_report.final, float(ref_report.residual_history[-1]))

    cfg = SolverConfig(tol=1e-5, record_certificates=True)
    report = solve_gadmm_m(spec, cfg, RelaxedTriple.zeros(spec))
    check("benchmark run converged", report.converged,
          f"{report.iterations} iterations")
    chain = report.chain_identity_history
    check("multiplier-transport chain identity",
          chain is not None and float(chain.max()) <= 1e-8,
          f"max residual {float(chain.max()):.3e}")

    descent = diag.check_descent_inequality(spec, report.trajectory, ref, cfg)
    check("descent inequalities", descent.passed(1e-6),
          f"min slacks {descent.pivot_slack.min():.3e} / "
          f"{descent.summable_slack.min():.3e}")

    eta_def, eta_exp = diag.eta_consistency(spec, report.trajectory, ref, cfg)
    eta_err = float(np.max(np.abs(eta_def - eta_exp)
                           / (1.0 + np.abs(eta_def))))
    check("cross-term dual evaluation", eta_err <= 1e-8,
          f"max relative gap {eta_err:.3e}")

    return 0 if failures == 0 else 2


def main(argv: Optional[list] = None) -> int:
    """Entry point with the documented exit-code contract."""
    try:
        rv = cli.main(args=argv, standalone_mode=False)
    except click.UsageError as exc:
        exc.show()
        return 1
    except click.ClickException as exc:
        exc.show()
        return 1
    except click.exceptions.Abort:
        return 1
    return int(rv) if isinstance(rv, int) else 0


if __name__ == "__main__":
    sys.exit(main())
