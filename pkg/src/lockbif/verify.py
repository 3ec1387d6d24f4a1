"""Self-verification: the module-invariant suite run end to end on a config.

Each check returns (name, passed, detail); the CLI renders one row per check
and exits nonzero when any fails.  The suite covers the discretization
contract, the closed-form branch algebra and its brute-force oracles, kernel
and Morse counts at the planned bifurcation parameters, the hidden-symmetry
transfer identity, and a short continuation run.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import (
    BranchOrigin,
    ContinuationOpts,
    CouplingSpec,
    DomainSpec,
    LockedBranchDomain,
    Partition,
    PotentialSpec,
    SystemState,
    amplitude_scale,
    assemble_operator,
    bifurcation_points,
    branch_switch_predictor,
    build_grid,
    continue_branch,
    coupling_for_eigenvalue,
    coupling_lower_limit,
    coupling_matrices,
    distance_to_locked,
    enumerate_pair_partitions,
    extrapolate_origin,
    embed,
    hessian_spectrum,
    lock_coefficients,
    lock_ratio,
    locked_morse_index,
    locked_solution,
    operator_smallest_eigenvalue,
    project,
    reduced_hessian_spectrum,
    residual_norm,
    residual_transfer_defect,
    solve_ground_state,
    transverse_eigenvalue,
    weighted_inner,
    weighted_norm,
    weighted_spectrum,
)
from .config import RunConfig
from .errors import NonpositiveOperatorError


@dataclass
class CheckResult:
    name: str
    passed: bool
    detail: str


class _Context:
    """Shared expensive objects for the suite."""

    def __init__(self, config: RunConfig):
        self.config = config
        self.grid = config.grid()
        self.op = config.operator()
        self.ground = solve_ground_state(self.op, config.solver_options())
        self.spectrum = weighted_spectrum(
            self.op, self.ground, kmax=config.kmax, cluster_tol=config.cluster_tol
        )
        self.coupling = config.coupling()
        self.domain = LockedBranchDomain.from_coupling(self.coupling)
        self.points = bifurcation_points(self.coupling, self.spectrum)


def _check_operator_symmetry(ctx):
    rng = np.random.default_rng(20240801)
    worst = 0.0
    for _ in range(10):
        u = rng.standard_normal(ctx.op.size)
        v = rng.standard_normal(ctx.op.size)
        lhs = weighted_inner(ctx.grid, ctx.op.apply(u), v)
        rhs = weighted_inner(ctx.grid, u, ctx.op.apply(v))
        worst = max(worst, abs(lhs - rhs) / (np.linalg.norm(u) * np.linalg.norm(v)))
    return worst <= 1e-12, f"max symmetry defect {worst:.3e} (tol 1e-12)"


def _check_consistency_order(ctx):
    errs = []
    for M in (399, 799):
        dom = DomainSpec(kind="interval", dimension=1, r_inner=0.0, r_outer=np.pi)
        op = assemble_operator(build_grid(dom, M), PotentialSpec(kind="constant", value=0.0))
        import scipy.linalg as sla

        d, e = op.symmetric_tridiagonal
        vals = sla.eigh_tridiagonal(d, e, select="i", select_range=(0, 3), eigvals_only=True)
        exact = np.arange(1, 5) ** 2
        errs.append(np.max(np.abs(vals - exact)))
    ratio = errs[0] / errs[1]
    ok = abs(ratio - 4.0) <= 0.8
    return ok, f"eigenvalue error ratio {ratio:.3f} (expect 4 +- 20%)"


def _check_positivity_gate(ctx):
    dom = DomainSpec(kind="interval", dimension=1, r_inner=0.0, r_outer=np.pi)
    op = assemble_operator(
        build_grid(dom, 64), PotentialSpec(kind="constant", value=-10.0)
    )
    ev = operator_smallest_eigenvalue(op)
    try:
        solve_ground_state(op)
        return False, "nonpositive operator was not rejected"
    except NonpositiveOperatorError:
        return ev < 0, f"smallest eigenvalue {ev:.3f} rejected downstream"


def _check_ground_state(ctx):
    gs = ctx.ground
    pos = bool(np.all(gs.w > 0))
    cap = ctx.config.newton_tol * 50
    ok = pos and gs.residual_norm <= cap
    return ok, (
        f"residual {gs.residual_norm:.3e} (<= 50x tol {cap:.1e}), "
        f"min w {gs.w.min():.3e}, {gs.newton_iterations} Newton steps"
    )


def _check_scheme_self_convergence(ctx):
    """Ground state at nested resolutions: O(h^2) self-consistency."""
    dom = DomainSpec(kind="interval", dimension=1, r_inner=0.0, r_outer=np.pi)
    pot = PotentialSpec(kind="constant", value=1.0)
    ws = {}
    for M in (199, 399, 799):
        op = assemble_operator(build_grid(dom, M), pot)
        ws[M] = solve_ground_state(op).w
    e_coarse = np.max(np.abs(ws[199] - ws[399][1::2]))
    e_fine = np.max(np.abs(ws[399] - ws[799][1::2]))
    ratio = e_coarse / e_fine
    ok = abs(ratio - 4.0) <= 1.2
    return ok, f"ground-state error ratio {ratio:.2f} (expect 4 +- 30%)"


def _check_first_eigenpair(ctx):
    lam1 = ctx.spectrum.eigenvalues[0]
    psi1 = ctx.spectrum.bases[0][0]
    w = ctx.ground.w
    cosang = abs(weighted_inner(ctx.grid, psi1, w)) / (
        weighted_norm(ctx.grid, psi1) * weighted_norm(ctx.grid, w)
    )
    angle = np.sqrt(max(0.0, 2 * (1 - min(1.0, cosang))))
    ok = abs(lam1 - 1.0) <= 1e-9 and angle < 1e-6
    return ok, f"lambda1-1 = {lam1 - 1:.3e}, angle to w = {angle:.3e}"


def _check_coupling_spectrum(ctx):
    rng = np.random.default_rng(42)
    worst = 0.0
    for _ in range(100):
        n = int(rng.integers(2, 7))
        mu = np.sort(rng.uniform(0.5, 4.0, n))
        coup = CouplingSpec(mu=mu)
        lower = coupling_lower_limit(coup)
        beta = rng.uniform(lower + 1e-3 * (coup.mu_min - lower), coup.mu_min - 1e-6)
        full, _ = coupling_matrices(coup, beta)
        vals = np.linalg.eigvalsh(full)
        expected = np.sort(
            np.concatenate(([3.0], np.full(n - 1, transverse_eigenvalue(coup, beta))))
        )
        worst = max(worst, float(np.max(np.abs(vals - expected))))
    coup2 = CouplingSpec(mu=np.array([1.0, 2.0]))
    c0, _ = coupling_matrices(coup2, 0.0)
    exact_at_zero = np.array_equal(c0, 3.0 * np.eye(2))
    ok = worst <= 1e-10 and exact_at_zero
    return ok, f"max eigenvalue defect {worst:.3e} over 100 draws; C(0)=3I {exact_at_zero}"


def _check_closed_forms(ctx):
    # sample over the preimage of the meaningful eigenvalue range (1, 50];
    # toward the pole the absolute defect of any evaluation grows like eps*f^2
    coup = CouplingSpec(mu=np.array([1.0, 1.0]))
    bb = coupling_lower_limit(coup)
    worst = abs(bb + 1.0)
    for beta in np.linspace(-0.92, 0.985, 100):
        worst = max(worst, abs(transverse_eigenvalue(coup, beta) - (3 - beta) / (1 + beta)))
    for lam in np.linspace(1.01, 50.0, 100):
        worst = max(
            worst, abs(coupling_for_eigenvalue(coup, lam) - (3 - lam) / (1 + lam))
        )
    return worst <= 1e-11, f"max closed-form defect {worst:.3e} (tol 1e-11)"


def _check_monotonicity(ctx):
    coup = ctx.coupling
    lower = ctx.domain.lower_limit
    betas = np.linspace(lower + 1e-4, coup.mu_min - 1e-4, 50)
    g = [amplitude_scale(coup, b) for b in betas]
    f = [transverse_eigenvalue(coup, b) for b in betas]
    mono = np.all(np.diff(g) > 0) and np.all(np.diff(f) < 0)
    worst = 0.0
    for lam in np.linspace(1.01, 50.0, 25):
        beta = coupling_for_eigenvalue(coup, lam)
        worst = max(worst, abs(transverse_eigenvalue(coup, beta) - lam))
    return bool(mono and worst <= 1e-11), (
        f"monotone {bool(mono)}, max round-trip defect {worst:.3e}"
    )


def _check_locked_exactness(ctx):
    """System residual of the synchronized construction, sampled away from the
    amplitude blow-up at the branch limit (float64 floor, see README)."""
    coup, gs = ctx.coupling, ctx.ground
    lower = ctx.domain.lower_limit
    span = coup.mu_min - lower
    worst = 0.0
    for beta in np.linspace(lower + 0.05 * span, coup.mu_min - 0.01 * span, 20):
        state = SystemState(beta=float(beta), u=locked_solution(gs, coup, float(beta)))
        worst = max(worst, residual_norm(state, coup, ctx.op))
    for beta in np.linspace(coup.mu_max + 0.1, coup.mu_max + 5.0, 10):
        state = SystemState(beta=float(beta), u=locked_solution(gs, coup, float(beta)))
        worst = max(worst, residual_norm(state, coup, ctx.op))
    return worst <= 1e-10, f"max locked residual {worst:.3e} (tol 1e-10)"


def _check_amplitude_identities(ctx):
    coup = ctx.coupling
    lower = ctx.domain.lower_limit
    worst = 0.0
    for beta in np.linspace(lower + 1e-3, coup.mu_min - 1e-3, 25):
        _, alpha = lock_coefficients(coup, float(beta))
        sq = alpha**2
        for j in range(coup.n):
            worst = max(
                worst, abs(coup.mu[j] * sq[j] + beta * (sq.sum() - sq[j]) - 1.0)
            )
        prods = (coup.mu - beta) * sq
        worst = max(worst, float(np.max(np.abs(prods - prods[0]))))
    return worst <= 1e-12, f"max identity defect {worst:.3e} (tol 1e-12)"


def _check_kernel_dimensions(ctx):
    coup, gs = ctx.coupling, ctx.ground
    details = []
    ok = True
    for pt in ctx.points[:2]:
        state = SystemState(beta=pt.beta, u=locked_solution(gs, coup, pt.beta))
        count = locked_morse_index(coup, pt.beta - 1e-8, ctx.spectrum) + pt.kernel_dim + 6
        hs = hessian_spectrum(state, coup, ctx.op, count=count, zero_tol=1e-7)
        ok &= hs.kernel_dim == pt.kernel_dim
        details.append(f"k={pt.order}: {hs.kernel_dim}/{pt.kernel_dim}")
    if len(ctx.points) >= 2:
        mid = 0.5 * (ctx.points[0].beta + ctx.points[1].beta)
        state = SystemState(beta=mid, u=locked_solution(gs, coup, mid))
        hs = hessian_spectrum(state, coup, ctx.op, count=16, zero_tol=1e-7)
        ok &= hs.kernel_dim == 0
        details.append(f"midpoint: {hs.kernel_dim}/0")
    return bool(ok), ", ".join(details)


def _check_morse_formula(ctx):
    coup, gs = ctx.coupling, ctx.ground
    lower = ctx.domain.lower_limit
    eps = 1e-3 * (coup.mu_min - lower)
    ok = True
    details = []
    rng = np.random.default_rng(5)
    # stay where the computed spectrum certifies the count
    certifiable = coupling_for_eigenvalue(coup, 0.9 * float(ctx.spectrum.eigenvalues[-1]))
    betas = rng.uniform(max(lower + 2 * eps, certifiable), coup.mu_min - 2 * eps, 5)
    for beta in betas:
        if any(abs(beta - p.beta) < 2 * eps for p in ctx.points):
            continue
        state = SystemState(beta=float(beta), u=locked_solution(gs, coup, float(beta)))
        formula = locked_morse_index(coup, float(beta), ctx.spectrum)
        direct = hessian_spectrum(
            state, coup, ctx.op, count=formula + coup.n + 6, zero_tol=1e-7
        ).morse_index
        ok &= formula == direct
    pt = ctx.points[0]
    jump = locked_morse_index(coup, pt.beta - eps, ctx.spectrum) - locked_morse_index(
        coup, pt.beta + eps, ctx.spectrum
    )
    ok &= jump == pt.kernel_dim
    details.append(f"full jump at k=2: {jump}/{pt.kernel_dim}")
    part = enumerate_pair_partitions(coup.n)[0]
    red = []
    for side in (-1, +1):
        beta = pt.beta + side * eps
        v = project(part, locked_solution(gs, coup, beta))
        spec = reduced_hessian_spectrum(
            part, coup, beta, v, ctx.op, count=12, zero_tol=1e-7
        )
        red.append(spec.morse_index)
    rjump = red[0] - red[1]
    ok &= rjump == pt.multiplicity * (part.size - 1)
    details.append(f"reduced jump: {rjump}/{pt.multiplicity * (part.size - 1)}")
    return bool(ok), ", ".join(details)


def _check_hidden_symmetry(ctx):
    coup = ctx.coupling
    lower = ctx.domain.lower_limit
    rng = np.random.default_rng(11)
    r = ctx.grid.nodes
    span = r[-1] - r[0]
    worst = 0.0
    for _ in range(100):
        beta = float(rng.uniform(lower + 1e-3, coup.mu_min - 1e-3))
        u = np.zeros((coup.n, ctx.grid.size))
        for j in range(coup.n):
            # moderate smooth amplitudes: the defect is pure representation
            # noise scaling like eps * |u| / h^2, so the 1e-12 budget caps |u|
            coeffs = rng.normal(0.0, 0.015, 5)
            for k, ck in enumerate(coeffs):
                u[j] += ck * np.sin((k + 1) * np.pi * (r - r[0]) / span)
        i, j = sorted(rng.choice(coup.n, size=2, replace=False))
        u[j] = lock_ratio(coup, beta, int(i), int(j)) * u[i]
        worst = max(
            worst,
            residual_transfer_defect(coup, beta, int(i), int(j), u, ctx.op),
        )
    return worst <= 1e-12, f"max transfer defect {worst:.3e} over 100 states (tol 1e-12)"


def _check_partition_combinatorics(ctx):
    ok = True
    for n in range(2, 9):
        ok &= len(enumerate_pair_partitions(n)) == 2 ** (n - 1) - 1
    part = enumerate_pair_partitions(ctx.coupling.n)[0]
    rng = np.random.default_rng(3)
    v = rng.standard_normal((part.size, ctx.grid.size))
    beta = 0.5 * (ctx.domain.lower_limit + ctx.coupling.mu_min)
    u = embed(part, ctx.coupling, beta, v)
    round_trip = float(np.max(np.abs(project(part, u) - v)))
    ok &= round_trip == 0.0
    return bool(ok), f"pair counts 2..8 OK, project(embed) defect {round_trip:.1e}"


def _check_branch_smoke(ctx):
    coup, gs = ctx.coupling, ctx.ground
    pt = ctx.points[0]
    part = enumerate_pair_partitions(coup.n)[0]
    basis = ctx.spectrum.bases[pt.order - 1]
    pred = branch_switch_predictor(part, coup, gs, pt, basis, ctx.op, eps=1e-2)
    opts = ContinuationOpts(ds0=2e-2, max_steps=8, newton_tol=1e-10, kick=1e-2)
    branch = continue_branch(
        pred, part, coup, gs, ctx.op, opts,
        origin=BranchOrigin(pt.order, pt.beta, pt.eigenvalue, pt.multiplicity),
    )
    if len(branch.points) < 5:
        return False, f"branch stopped early: {branch.termination}"
    dists = [p.dist_locked for p in branch.points[:5]]
    grows = all(b > a for a, b in zip(dists, dists[1:]))
    worst_res = max(p.full_residual_norm for p in branch.points)
    origin_err = abs(extrapolate_origin(branch) - pt.beta)
    ok = grows and worst_res <= 10 * opts.newton_tol and origin_err < 5e-3
    return bool(ok), (
        f"departure {grows}, max full residual {worst_res:.2e}, "
        f"origin error {origin_err:.2e}"
    )


def _check_determinism(ctx):
    from .output import write_csv
    import tempfile, os, filecmp

    rows = [
        (p.order, p.eigenvalue, p.multiplicity, p.beta, p.kernel_dim)
        for p in ctx.points
    ]
    with tempfile.TemporaryDirectory() as tmp:
        a = write_csv(os.path.join(tmp, "a.csv"), ["k"] * 5, rows, ctx.config.resolved())
        b = write_csv(os.path.join(tmp, "b.csv"), ["k"] * 5, rows, ctx.config.resolved())
        same = filecmp.cmp(a, b, shallow=False)
    return same, "repeated serialization byte-identical"


_CHECKS = [
    ("operator-symmetry", _check_operator_symmetry),
    ("consistency-order", _check_consistency_order),
    ("positivity-gate", _check_positivity_gate),
    ("ground-state", _check_ground_state),
    ("self-convergence", _check_scheme_self_convergence),
    ("first-eigenpair", _check_first_eigenpair),
    ("coupling-spectrum-oracle", _check_coupling_spectrum),
    ("closed-forms-equal-mu", _check_closed_forms),
    ("monotonicity-roundtrip", _check_monotonicity),
    ("locked-exactness", _check_locked_exactness),
    ("amplitude-identities", _check_amplitude_identities),
    ("kernel-dimensions", _check_kernel_dimensions),
    ("morse-formula", _check_morse_formula),
    ("hidden-symmetry", _check_hidden_symmetry),
    ("partition-combinatorics", _check_partition_combinatorics),
    ("branch-smoke", _check_branch_smoke),
    ("determinism", _check_determinism),
]


def run_suite(config: RunConfig) -> list[CheckResult]:
    ctx = _Context(config)
    results = []
    for name, fn in _CHECKS:
        try:
            passed, detail = fn(ctx)
        except Exception as exc:  # noqa: BLE001 - report, don't crash the suite
            passed, detail = False, f"raised {type(exc).__name__}: {exc}"
        results.append(CheckResult(name=name, passed=bool(passed), detail=detail))
    return results
