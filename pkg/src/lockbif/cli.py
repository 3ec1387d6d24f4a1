"""Command-line interface.

Commands: ground-state, spectrum, bifpoints, locked, morse-scan, continue,
sweep, verify.  Configuration comes from a flat INI file (--config); every
artifact embeds the resolved configuration.  Exit codes: 0 success, 2 solver
non-convergence, 3 invalid configuration, 4 degenerate ground state, 5
invariant violation during verify.
"""
from __future__ import annotations

import argparse
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import numpy as np

from . import (
    BranchOrigin,
    Partition,
    SystemState,
    bifurcation_points,
    branch_switch_predictor,
    continue_branch,
    enumerate_pair_partitions,
    hessian_spectrum,
    locked_morse_index,
    locked_solution,
    plan_bifurcations,
    sample_locked_branch,
    solve_ground_state,
    tail_mass_fraction,
    weighted_spectrum,
)
from .config import RunConfig, load_config
from .errors import (
    ConfigError,
    DegenerateGroundStateError,
    EigensolverError,
    InvalidDomainError,
    LambdaRangeError,
    LockBifError,
    NoConvergenceError,
    NonpositiveOperatorError,
    NotPairPartitionError,
    OutOfDomainError,
    PartitionFormatError,
    PositivityLostError,
    TooFewPointsError,
)
from .locked import LockedBranchDomain
from .output import SCHEMA_VERSION, write_csv, write_dat, write_json

EXIT_OK = 0
EXIT_SOLVER = 2
EXIT_CONFIG = 3
EXIT_DEGENERATE = 4
EXIT_VERIFY = 5

_CONFIG_ERRORS = (
    ConfigError,
    InvalidDomainError,
    TooFewPointsError,
    PartitionFormatError,
    NotPairPartitionError,
    OutOfDomainError,
    LambdaRangeError,
    NonpositiveOperatorError,
)
_SOLVER_ERRORS = (NoConvergenceError, PositivityLostError, EigensolverError)


def _parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="lockbif",
        description=__doc__,
        formatter_class=argparse.RawDescriptionHelpFormatter,
    )
    parser.add_argument("--config", help="INI configuration file")
    parser.add_argument("--out", help="output directory (overrides config)")
    sub = parser.add_subparsers(dest="command", required=True)

    sub.add_parser("ground-state", help="solve the scalar problem, write profile")
    sub.add_parser("spectrum", help="weighted eigenvalues (k, lambda_k, n_k)")
    sub.add_parser(
        "bifpoints",
        help="bifurcation table: CSV columns k, lambda_k, n_k, beta_k, kernel_dim",
    )
    p_locked = sub.add_parser("locked", help="sample the locked branch with Morse data")
    p_locked.add_argument("--samples", type=int, default=40)
    p_locked.add_argument("--beta-lo", type=float, default=None)
    p_locked.add_argument("--beta-hi", type=float, default=None)
    p_scan = sub.add_parser(
        "morse-scan", help="direct vs closed-form Morse index over a beta grid"
    )
    p_scan.add_argument("--samples", type=int, default=25)
    p_cont = sub.add_parser("continue", help="follow one bifurcating branch")
    p_cont.add_argument("--k", type=int, default=2, help="bifurcation index (>= 2)")
    p_cont.add_argument("--partition", default=None, help='pair partition, e.g. "1|2,3"')
    p_cont.add_argument("--dir", choices=["+", "-"], default="+")
    p_cont.add_argument("--eps", type=float, default=None, help="kick size")
    p_sweep = sub.add_parser("sweep", help="all planned branches at all beta_k")
    p_sweep.add_argument("--k", type=int, default=None, help="restrict to one bifurcation index")
    p_sweep.add_argument("--dir", choices=["+", "-"], default="+")
    p_sweep.add_argument("--eps", type=float, default=None)
    p_sweep.add_argument("--jobs", type=int, default=os.cpu_count() or 1)
    sub.add_parser("verify", help="run the invariant suite, report pass/fail rows")
    return parser


def _outdir(config: RunConfig, args) -> Path:
    out = Path(args.out if args.out else config.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _solve_stack(config: RunConfig):
    op = config.operator()
    ground = solve_ground_state(op, config.solver_options())
    spectrum = weighted_spectrum(op, ground, kmax=config.kmax, cluster_tol=config.cluster_tol)
    return op, ground, spectrum


def _spectrum_covering(config, op, ground, coupling, beta_lo):
    """Weighted spectrum long enough to certify Morse counts down to beta_lo
    (the transverse eigenvalue must stay inside the computed range)."""
    from .locked import transverse_eigenvalue

    needed = transverse_eigenvalue(coupling, beta_lo)
    kmax = config.kmax
    while True:
        spectrum = weighted_spectrum(op, ground, kmax=kmax, cluster_tol=config.cluster_tol)
        if spectrum.eigenvalues[-1] > needed or spectrum.count < kmax:
            return spectrum
        if kmax >= op.size // 4:
            return spectrum
        kmax = min(2 * kmax, op.size // 4)


def _cmd_ground_state(config, args) -> int:
    out = _outdir(config, args)
    op = config.operator()
    ground = solve_ground_state(op, config.solver_options())
    grid = op.grid
    doc = {
        "schema": SCHEMA_VERSION,
        "config": config.resolved(),
        "residual_norm": ground.residual_norm,
        "newton_iterations": ground.newton_iterations,
        "min_w": float(ground.w.min()),
        "max_w": float(ground.w.max()),
        "tail_mass_fraction": tail_mass_fraction(grid, ground.w),
        "nondegenerate": ground.nondegenerate,
    }
    if "json" in config.formats:
        write_json(out / "ground_state.json", doc)
    rows = list(zip(grid.nodes, ground.w))
    if "csv" in config.formats:
        write_csv(out / "ground_state.csv", ["r", "w"], rows, config.resolved())
    if "dat" in config.formats:
        write_dat(out / "ground_state.dat", ["r", "w"], rows, config.resolved())
    print(
        f"ground state: residual {ground.residual_norm:.3e} in "
        f"{ground.newton_iterations} Newton steps -> {out}"
    )
    return EXIT_OK


def _cmd_spectrum(config, args) -> int:
    out = _outdir(config, args)
    _, ground, spectrum = _solve_stack(config)
    rows = [
        (k + 1, float(spectrum.eigenvalues[k]), int(spectrum.multiplicities[k]))
        for k in range(spectrum.count)
    ]
    if "csv" in config.formats:
        write_csv(out / "spectrum.csv", ["k", "lambda_k", "n_k"], rows, config.resolved())
    if "json" in config.formats:
        write_json(
            out / "spectrum.json",
            {
                "schema": SCHEMA_VERSION,
                "config": config.resolved(),
                "ground_residual": ground.residual_norm,
                "degenerate": spectrum.degenerate,
                "clusters": [
                    {"k": r[0], "lambda": r[1], "multiplicity": r[2]} for r in rows
                ],
            },
        )
    for r in rows:
        print(f"k={r[0]:2d}  lambda={r[1]:.12g}  multiplicity={r[2]}")
    return EXIT_OK


def _cmd_bifpoints(config, args) -> int:
    out = _outdir(config, args)
    _, _, spectrum = _solve_stack(config)
    points = bifurcation_points(config.coupling(), spectrum)
    rows = [
        (p.order, p.eigenvalue, p.multiplicity, p.beta, p.kernel_dim) for p in points
    ]
    if "csv" in config.formats:
        write_csv(
            out / "bifpoints.csv",
            ["k", "lambda_k", "n_k", "beta_k", "kernel_dim"],
            rows,
            config.resolved(),
        )
    if "json" in config.formats:
        write_json(
            out / "bifpoints.json",
            {
                "schema": SCHEMA_VERSION,
                "config": config.resolved(),
                "points": [
                    {
                        "k": p.order,
                        "lambda_k": p.eigenvalue,
                        "n_k": p.multiplicity,
                        "beta_k": p.beta,
                        "kernel_dim": p.kernel_dim,
                    }
                    for p in points
                ],
            },
        )
    for p in points:
        print(
            f"k={p.order:2d}  lambda={p.eigenvalue:.10g}  beta_k={p.beta:.12g}  "
            f"kernel_dim={p.kernel_dim}"
        )
    return EXIT_OK


def _branch_rows(branch):
    return [
        (
            p.beta,
            p.s,
            p.residual_norm,
            p.full_residual_norm,
            p.min_value,
            p.dist_locked,
            p.morse_index,
        )
        for p in branch.points
    ]


_BRANCH_COLUMNS = ["beta", "s", "residual", "full_residual", "min_u", "dist_locked", "morse_index"]


def _cmd_locked(config, args) -> int:
    out = _outdir(config, args)
    op = config.operator()
    ground = solve_ground_state(op, config.solver_options())
    coupling = config.coupling()
    domain = LockedBranchDomain.from_coupling(coupling)
    margin = 1e-3 * (coupling.mu_min - domain.lower_limit)
    lo = args.beta_lo if args.beta_lo is not None else domain.lower_limit + margin
    hi = args.beta_hi if args.beta_hi is not None else coupling.mu_min - margin
    spectrum = (
        _spectrum_covering(config, op, ground, coupling, lo)
        if lo < coupling.mu_min
        else weighted_spectrum(op, ground, kmax=config.kmax, cluster_tol=config.cluster_tol)
    )
    branch = sample_locked_branch(ground, coupling, spectrum, op, lo, hi, args.samples)
    rows = _branch_rows(branch)
    if "csv" in config.formats:
        write_csv(out / "locked.csv", _BRANCH_COLUMNS, rows, config.resolved())
    if "dat" in config.formats:
        write_dat(out / "locked.dat", _BRANCH_COLUMNS, rows, config.resolved())
    if "json" in config.formats:
        write_json(out / "locked.json", _branch_doc(config, branch))
    print(f"sampled locked branch: {len(rows)} points on [{lo:.6g}, {hi:.6g}] -> {out}")
    return EXIT_OK


def _cmd_morse_scan(config, args) -> int:
    out = _outdir(config, args)
    op = config.operator()
    ground = solve_ground_state(op, config.solver_options())
    coupling = config.coupling()
    domain = LockedBranchDomain.from_coupling(coupling)
    margin = 1e-3 * (coupling.mu_min - domain.lower_limit)
    spectrum = _spectrum_covering(
        config, op, ground, coupling, domain.lower_limit + margin
    )
    points = bifurcation_points(coupling, spectrum)
    betas = np.linspace(domain.lower_limit + margin, coupling.mu_min - margin, args.samples)
    rows = []
    for beta in betas:
        beta = float(beta)
        for _ in range(3):  # nudge off exact bifurcation parameters
            if all(abs(beta - p.beta) > 1e-6 for p in points):
                break
            beta += 1e-5 * (coupling.mu_min - domain.lower_limit)
        formula = locked_morse_index(coupling, beta, spectrum)
        state = SystemState(beta=beta, u=locked_solution(ground, coupling, beta))
        spec = hessian_spectrum(
            state, coupling, op, count=formula + coupling.n + 6, zero_tol=1e-7
        )
        rows.append((beta, spec.morse_index, formula, spec.kernel_dim))
    if "csv" in config.formats:
        write_csv(
            out / "morse_scan.csv",
            ["beta", "morse_index_direct", "morse_index_formula", "kernel_dim"],
            rows,
            config.resolved(),
        )
    if "json" in config.formats:
        write_json(
            out / "morse_scan.json",
            {
                "schema": SCHEMA_VERSION,
                "config": config.resolved(),
                "rows": [
                    {
                        "beta": r[0],
                        "morse_index_direct": r[1],
                        "morse_index_formula": r[2],
                        "kernel_dim": r[3],
                    }
                    for r in rows
                ],
            },
        )
    mismatches = sum(1 for r in rows if r[1] != r[2])
    print(f"morse scan: {len(rows)} samples, {mismatches} direct/formula mismatches")
    return EXIT_OK if mismatches == 0 else EXIT_VERIFY


def _branch_doc(config: RunConfig, branch, opts=None):
    doc = {
        "schema": SCHEMA_VERSION,
        "config": config.resolved(),
        "origin": None
        if branch.origin is None
        else {
            "k": branch.origin.order,
            "beta_k": branch.origin.beta,
            "lambda_k": branch.origin.eigenvalue,
            "n_k": branch.origin.multiplicity,
        },
        "partition": branch.partition.to_string(),
        "direction": "+" if branch.direction >= 0 else "-",
        "termination": branch.termination,
        "opts": None
        if opts is None
        else {
            "ds0": opts.ds0,
            "ds_min": opts.ds_min,
            "ds_max": opts.ds_max,
            "newton_tol": opts.newton_tol,
            "max_newton_iter": opts.max_newton_iter,
            "max_steps": opts.max_steps,
            "kick": opts.kick,
        },
        "points": [
            {
                "beta": p.beta,
                "s": p.s,
                "residual": p.residual_norm,
                "full_residual": p.full_residual_norm,
                "min_u": p.min_value,
                "dist_locked": p.dist_locked,
                "morse_index": p.morse_index,
            }
            for p in branch.points
        ],
    }
    return doc


def _partition_tag(partition: Partition) -> str:
    return partition.to_string().replace("|", "_").replace(",", "")


def _run_one_branch(config, op, ground, spectrum, point, partition, direction, eps):
    basis = spectrum.bases[point.order - 1]
    pred = branch_switch_predictor(
        partition, config.coupling(), ground, point, basis, op,
        eps=eps, direction=direction,
    )
    opts = config.continuation_opts(kick=eps)
    origin = BranchOrigin(point.order, point.beta, point.eigenvalue, point.multiplicity)
    return (
        continue_branch(
            pred, partition, config.coupling(), ground, op, opts,
            origin=origin, direction=direction,
        ),
        opts,
    )


def _write_branch(config, out, branch, opts, point, partition, dir_char):
    stem = f"branch_k{point.order}_{_partition_tag(partition)}_{dir_char}"
    rows = _branch_rows(branch)
    written = []
    if "json" in config.formats:
        written.append(write_json(out / f"{stem}.json", _branch_doc(config, branch, opts)))
    if "csv" in config.formats:
        written.append(
            write_csv(out / f"{stem}.csv", _BRANCH_COLUMNS, rows, config.resolved())
        )
    if "dat" in config.formats:
        written.append(
            write_dat(out / f"{stem}.dat", _BRANCH_COLUMNS, rows, config.resolved())
        )
    return stem


def _cmd_continue(config, args) -> int:
    out = _outdir(config, args)
    op, ground, spectrum = _solve_stack(config)
    coupling = config.coupling()
    points = bifurcation_points(coupling, spectrum)
    match = [p for p in points if p.order == args.k]
    if not match:
        raise ConfigError(f"no bifurcation point with k={args.k} (have k=2..{points[-1].order})")
    point = match[0]
    partition = (
        Partition.from_string(args.partition, coupling.n)
        if args.partition
        else enumerate_pair_partitions(coupling.n)[0]
    )
    direction = +1 if args.dir == "+" else -1
    eps = args.eps if args.eps is not None else config.kick
    branch, opts = _run_one_branch(
        config, op, ground, spectrum, point, partition, direction, eps
    )
    stem = _write_branch(config, out, branch, opts, point, partition, args.dir)
    print(
        f"{stem}: {len(branch.points)} points, termination {branch.termination}"
    )
    return EXIT_OK


def _cmd_sweep(config, args) -> int:
    out = _outdir(config, args)
    op, ground, spectrum = _solve_stack(config)
    coupling = config.coupling()
    plans = plan_bifurcations(coupling, spectrum)
    if args.k is not None:
        plans = [plan for plan in plans if plan.point.order == args.k]
        if not plans:
            raise ConfigError(f"no bifurcation point with k={args.k}")
    direction = +1 if args.dir == "+" else -1
    eps = args.eps if args.eps is not None else config.kick
    tasks = [
        (plan.point, partition) for plan in plans for partition in plan.partitions
    ]

    def job(task):
        point, partition = task
        return _run_one_branch(config, op, ground, spectrum, point, partition, direction, eps)

    with ThreadPoolExecutor(max_workers=max(1, args.jobs)) as pool:
        results = list(pool.map(job, tasks))
    index = []
    for (point, partition), (branch, opts) in zip(tasks, results):
        stem = _write_branch(config, out, branch, opts, point, partition, args.dir)
        index.append(
            {
                "file": stem,
                "k": point.order,
                "partition": partition.to_string(),
                "points": len(branch.points),
                "termination": branch.termination,
            }
        )
        print(
            f"{stem}: {len(branch.points)} points, termination {branch.termination}"
        )
    if "json" in config.formats:
        write_json(
            out / "sweep.json",
            {"schema": SCHEMA_VERSION, "config": config.resolved(), "branches": index},
        )
    return EXIT_OK


def _cmd_verify(config, args) -> int:
    from .verify import run_suite

    out = _outdir(config, args)
    results = run_suite(config)
    rows = [(r.name, "pass" if r.passed else "FAIL", r.detail) for r in results]
    width = max(len(r.name) for r in results)
    for name, status, detail in rows:
        print(f"{name:<{width}}  {status:4}  {detail}")
    write_json(
        out / "verify.json",
        {
            "schema": SCHEMA_VERSION,
            "config": config.resolved(),
            "checks": [
                {"name": r.name, "passed": r.passed, "detail": r.detail} for r in results
            ],
        },
    )
    failed = [r for r in results if not r.passed]
    print(f"{len(results) - len(failed)}/{len(results)} checks passed")
    return EXIT_OK if not failed else EXIT_VERIFY


_COMMANDS = {
    "ground-state": _cmd_ground_state,
    "spectrum": _cmd_spectrum,
    "bifpoints": _cmd_bifpoints,
    "locked": _cmd_locked,
    "morse-scan": _cmd_morse_scan,
    "continue": _cmd_continue,
    "sweep": _cmd_sweep,
    "verify": _cmd_verify,
}


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    try:
        config = load_config(args.config) if args.config else RunConfig()
        config.validate()
        return _COMMANDS[args.command](config, args)
    except DegenerateGroundStateError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DEGENERATE
    except _CONFIG_ERRORS as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except _SOLVER_ERRORS as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_SOLVER
    except LockBifError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
