"""Branch following in (beta, state) space.

Samples the analytic locked branch, plans bifurcation points with the
partitions to switch onto, builds kick predictors from the explicit kernel
intersected with the partially-synchronized subspace, and runs pseudo-arclength
continuation with Newton correction on the reduced unknowns (one profile per
partition block, plus beta).

The corrector solves the bordered system

    [ dG/dv  dG/dbeta ] [dv]     [ -G ]
    [ tau_v' tau_beta ] [db]  =  [ -N ]

with G the reduced gradient and N the arclength plane constraint; the matrix
is sparse (bandwidth |P| blocks plus the border) and factorized directly.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla
from scipy.optimize import minimize_scalar

from .errors import (
    EmptyKernelError,
    NotPairPartitionError,
    OutOfDomainError,
)
from .locked import (
    BifurcationPoint,
    CouplingSpec,
    LockedBranchDomain,
    bifurcation_points,
    lock_coefficients,
    locked_solution,
)
from .partitions import (
    Partition,
    embed,
    enumerate_pair_partitions,
    project,
    reduced_hessian_spectrum,
    reduced_residual,
)
from .radial import SchrodingerOperator, weighted_inner, weighted_norm
from .scalar import GroundState, WeightedSpectrum
from .system import SystemState, hessian_apply, residual_norm, system_residual

TERMINATIONS = (
    "max-steps",
    "beta-bound",
    "positivity-lost",
    "newton-failure",
    "returned-to-locked",
)


@dataclass
class ContinuationOpts:
    """Step control and tolerances for one branch run."""

    ds0: float = 2e-2
    ds_min: float = 1e-5
    ds_max: float = 1e-1
    newton_tol: float = 1e-10
    max_newton_iter: int = 10
    max_steps: int = 60
    beta_min: float | None = None
    beta_max: float | None = None
    kick: float = 1e-2
    morse_every: int = 0
    morse_count: int = 24

    def __post_init__(self):
        if not (0 < self.ds_min <= self.ds0 <= self.ds_max):
            raise ValueError("need 0 < ds_min <= ds0 <= ds_max")
        if self.newton_tol <= 0 or self.kick <= 0:
            raise ValueError("tolerances and kick must be positive")


@dataclass(frozen=True)
class BranchOrigin:
    order: int
    beta: float
    eigenvalue: float
    multiplicity: int


@dataclass(eq=False)
class BranchPoint:
    beta: float
    u: np.ndarray
    s: float
    residual_norm: float
    full_residual_norm: float
    min_value: float
    dist_locked: float
    morse_index: int | None = None


@dataclass(eq=False)
class Branch:
    points: list[BranchPoint]
    partition: Partition
    origin: BranchOrigin | None
    direction: int
    termination: str | None
    opts: ContinuationOpts | None = None

    @property
    def betas(self) -> np.ndarray:
        return np.array([p.beta for p in self.points])


def distance_to_locked(
    ground: GroundState,
    coupling: CouplingSpec,
    u: np.ndarray,
    op: SchrodingerOperator,
    domain: LockedBranchDomain,
    beta_hint: float | None = None,
) -> float:
    """Weighted distance from a state to the locked branch.

    Decomposes exactly: per-component projection onto the scalar profile plus
    a one-dimensional fit of the projection coefficients to the amplitude
    curve (the cross terms vanish by construction of the projection).
    """
    grid = op.grid
    w = ground.w
    wnorm2 = weighted_inner(grid, w, w)
    coeff = np.array([weighted_inner(grid, u[j], w) for j in range(coupling.n)]) / wnorm2
    misfit2 = sum(
        weighted_inner(grid, u[j] - coeff[j] * w, u[j] - coeff[j] * w)
        for j in range(coupling.n)
    )

    def amplitude_gap(beta):
        _, alpha = lock_coefficients(coupling, beta)
        return float(np.sum((coeff - alpha) ** 2))

    lo, hi = domain.lower_limit, coupling.mu_min
    pad = 1e-9 * (hi - lo)
    best = minimize_scalar(
        amplitude_gap, bounds=(lo + pad, hi - pad), method="bounded",
        options={"xatol": 1e-10},
    ).fun
    if beta_hint is None or beta_hint > coupling.mu_max:
        right_lo = coupling.mu_max * (1 + 1e-12) + 1e-12
        right_hi = max(coupling.mu_max + 10.0, 2 * abs(beta_hint or 0.0))
        res = minimize_scalar(
            amplitude_gap, bounds=(right_lo, right_hi), method="bounded",
            options={"xatol": 1e-10},
        )
        best = min(best, res.fun)
    return float(np.sqrt(max(misfit2, 0.0) + max(best, 0.0) * wnorm2))


def sample_locked_branch(
    ground: GroundState,
    coupling: CouplingSpec,
    spectrum: WeightedSpectrum,
    op: SchrodingerOperator,
    beta_lo: float,
    beta_hi: float,
    samples: int,
) -> Branch:
    """Analytic locked states on [beta_lo, beta_hi] with Morse annotation.

    The range must stay inside one admissible interval.  Morse indices come
    from the closed-form count (None on the right interval and exactly at
    bifurcation parameters, where the count is undefined).
    """
    from .system import locked_morse_index
    from .errors import AtBifurcationError, InsufficientSpectrumError

    domain = LockedBranchDomain.from_coupling(coupling)
    if not (domain.contains(beta_lo) and domain.contains(beta_hi)):
        raise OutOfDomainError(f"range [{beta_lo}, {beta_hi}] leaves the locked branch")
    if beta_lo < coupling.mu_min < beta_hi:
        raise OutOfDomainError("range spans the forbidden coupling interval")
    points = []
    for beta in np.linspace(beta_lo, beta_hi, samples):
        u = locked_solution(ground, coupling, float(beta))
        state = SystemState(beta=float(beta), u=u)
        rn = residual_norm(state, coupling, op)
        morse = None
        if beta < coupling.mu_min:
            try:
                morse = locked_morse_index(coupling, float(beta), spectrum)
            except (AtBifurcationError, InsufficientSpectrumError):
                morse = None
        dist = distance_to_locked(ground, coupling, u, op, domain, beta_hint=float(beta))
        points.append(
            BranchPoint(
                beta=float(beta),
                u=u,
                s=float(beta - beta_lo),
                residual_norm=rn,
                full_residual_norm=rn,
                min_value=float(u.min()),
                dist_locked=dist,
                morse_index=morse,
            )
        )
    return Branch(
        points=points,
        partition=Partition.single(coupling.n),
        origin=None,
        direction=+1,
        termination=None,
    )


@dataclass(frozen=True)
class BranchPlan:
    """One bifurcation parameter with the partitions worth switching to."""

    point: BifurcationPoint
    partitions: tuple[Partition, ...]


def plan_bifurcations(
    coupling: CouplingSpec, spectrum: WeightedSpectrum
) -> list[BranchPlan]:
    """Bifurcation points k >= 2 with the canonical pair partitions
    (first-component side listed; 2^(n-1) - 1 of them per point)."""
    pairs = tuple(enumerate_pair_partitions(coupling.n))
    return [
        BranchPlan(point=pt, partitions=pairs)
        for pt in bifurcation_points(coupling, spectrum)
    ]


@dataclass(eq=False)
class Predictor:
    """Initial guess for a bifurcating branch: kicked state at the branch point."""

    beta: float
    u: np.ndarray
    v: np.ndarray
    tangent_v: np.ndarray | None
    kick: float
    ambiguous: bool = False


def branch_switch_predictor(
    partition: Partition,
    coupling: CouplingSpec,
    ground: GroundState,
    point: BifurcationPoint,
    basis: np.ndarray,
    op: SchrodingerOperator,
    eps: float,
    direction: int = +1,
) -> Predictor:
    """Kick the locked state along the kernel direction lying in the
    partially-synchronized subspace of a pair partition.

    Within each block the kernel component is proportional to the detuning
    weights; the two block coefficients are fixed (up to scale) by pointwise
    orthogonality to the synchronized direction, giving coefficients
    +-gamma_j / sum_{block} gamma^2.  For multiplicity > 1 the first
    eigenfunction is used and the ambiguity flagged.
    """
    if not partition.is_pair:
        raise NotPairPartitionError(f"partition {partition.to_string()!r} is not a pair")
    basis = np.atleast_2d(np.asarray(basis, dtype=float))
    if basis.shape[0] == 0:
        raise EmptyKernelError("no eigenfunctions supplied for the kernel direction")
    if eps <= 0:
        raise ValueError("kick size must be positive")
    gamma, _ = lock_coefficients(coupling, point.beta)
    coeffs = np.empty(coupling.n)
    for b, block in enumerate(partition.blocks):
        sign = 1.0 if b == 0 else -1.0
        weight = float(np.sum(gamma[list(block)] ** 2))
        for j in block:
            coeffs[j] = sign * gamma[j] / weight
    psi = basis[0]
    kick_field = np.outer(coeffs, psi)
    nrm = np.sqrt(
        sum(weighted_inner(op.grid, kick_field[j], kick_field[j]) for j in range(coupling.n))
    )
    kick_field /= nrm
    u = locked_solution(ground, coupling, point.beta) + direction * eps * kick_field
    v = project(partition, u)
    tangent = project(partition, kick_field)
    tnorm = np.sqrt(
        sum(weighted_inner(op.grid, tangent[b], tangent[b]) for b in range(partition.size))
    )
    return Predictor(
        beta=point.beta,
        u=u,
        v=v,
        tangent_v=direction * tangent / tnorm,
        kick=eps,
        ambiguous=basis.shape[0] > 1,
    )


def locked_start_predictor(
    partition: Partition,
    coupling: CouplingSpec,
    ground: GroundState,
    beta: float,
) -> Predictor:
    """Start on the locked branch itself (no kick): continuation then traces
    the analytic branch, which is the standard machinery sanity check."""
    u = locked_solution(ground, coupling, beta)
    return Predictor(
        beta=beta, u=u, v=project(partition, u), tangent_v=None, kick=0.0
    )


# ---------------------------------------------------------------------------
# reduced Jacobian assembly


def _plain_reduced_jacobian(partition, coupling, beta, v, op):
    """Sparse matrix dG/dv in node-major interleaved ordering (m*M square)."""
    from .partitions import reduced_pointwise_matrix

    m, M = partition.size, op.size
    u = embed(partition, coupling, beta, v)
    Q, s = reduced_pointwise_matrix(partition, coupling, beta, u)
    ab = op._plain_bands
    diag_a, upper, lower = ab[1], ab[0, 1:], ab[2, :-1]

    rows, cols, vals = [], [], []
    node = np.arange(M)
    for b in range(m):
        base = node * m + b
        rows.append(base)
        cols.append(base)
        vals.append(s[b] * diag_a - Q[b, b])
        rows.append(base[:-1])
        cols.append(base[:-1] + m)
        vals.append(s[b] * upper)
        rows.append(base[1:])
        cols.append(base[1:] - m)
        vals.append(s[b] * lower)
        for b2 in range(m):
            if b2 != b:
                rows.append(base)
                cols.append(node * m + b2)
                vals.append(-Q[b, b2])
    rows = np.concatenate(rows)
    cols = np.concatenate(cols)
    vals = np.concatenate(vals)
    return sp.coo_matrix((vals, (rows, cols)), shape=(m * M, m * M)), u


def _beta_derivative(partition, coupling, beta, v, op, u, res_full):
    """Analytic d/dbeta of the reduced gradient at fixed v.

    Three pieces: drift of the embedding weights hitting the residual, the
    Hessian acting on the embedding drift of the state, and the explicit
    beta-dependence of the coupling terms.
    """
    from .partitions import _ratio_vector

    m, M = partition.size, op.size
    gamma_sq = 1.0 / (coupling.mu - beta)
    c = _ratio_vector(partition, coupling, beta)
    cprime = np.empty(coupling.n)
    for b, block in enumerate(partition.blocks):
        rep = block[0]
        for j in block:
            cprime[j] = 0.5 * c[j] * (gamma_sq[j] - gamma_sq[rep])
    udot = np.empty_like(u)
    for b, block in enumerate(partition.blocks):
        for j in block:
            udot[j] = cprime[j] * v[b]
    state = SystemState(beta=beta, u=u)
    hdot = hessian_apply(state, coupling, op, udot)
    sq = u**2
    total = sq.sum(axis=0)
    dres = np.empty_like(u)
    for j in range(coupling.n):
        dres[j] = -(total - sq[j]) * u[j]
    out = np.zeros((m, M))
    for b, block in enumerate(partition.blocks):
        for j in block:
            out[b] += cprime[j] * res_full[j] + c[j] * (hdot[j] + dres[j])
    return out


def _solve_bordered(K, gbeta, tau_row, rhs):
    """Solve [[K, gbeta],[tau_row]] x = rhs via one sparse LU."""
    size = K.shape[0]
    K = K.tocoo()
    rows = np.concatenate([K.row, np.arange(size), np.full(size + 1, size)])
    cols = np.concatenate([K.col, np.full(size, size), np.arange(size + 1)])
    vals = np.concatenate([K.data, gbeta, tau_row])
    mat = sp.csc_matrix((vals, (rows, cols)), shape=(size + 1, size + 1))
    lu = spla.splu(mat)
    return lu.solve(rhs)


class _ReducedProblem:
    """Bundles the reduced residual/Jacobian evaluations for one branch run."""

    def __init__(self, partition, coupling, op, grid_weights):
        self.partition = partition
        self.coupling = coupling
        self.op = op
        self.m = partition.size
        self.M = op.size
        self.wgt = grid_weights

    def gradient(self, beta, v):
        return reduced_residual(self.partition, self.coupling, beta, v, self.op)

    def gradient_norm(self, G):
        return float(
            np.sqrt(sum(weighted_inner(self.op.grid, G[b], G[b]) for b in range(self.m)))
        )

    def jacobian(self, beta, v):
        K, u = _plain_reduced_jacobian(self.partition, self.coupling, beta, v, self.op)
        res_full = system_residual(
            SystemState(beta=beta, u=u), self.coupling, self.op
        )
        gb = _beta_derivative(self.partition, self.coupling, beta, v, self.op, u, res_full)
        return K, gb

    def metric_dot(self, dv, db, tv, tb):
        return float(
            sum(weighted_inner(self.op.grid, dv[b], tv[b]) for b in range(self.m))
            + db * tb
        )

    def constraint_row(self, tv, tb):
        # node-major interleaving: block index fastest
        row = (self.wgt[None, :] * tv).T.reshape(-1)
        return np.concatenate([row, [tb]])

    def corrector(self, beta, v, tv, tb, ref_beta, ref_v, ds, tol, max_iter):
        """Newton on [gradient; arclength plane] from (v, beta)."""
        for it in range(max_iter):
            G = self.gradient(beta, v)
            rn = self.gradient_norm(G)
            ncon = self.metric_dot(v - ref_v, beta - ref_beta, tv, tb) - ds
            if rn <= tol and abs(ncon) <= 1e-9 * max(1.0, abs(ds)):
                return v, beta, rn, it, True
            K, gb = self.jacobian(beta, v)
            rhs = -np.concatenate([G.T.reshape(-1), [ncon]])
            try:
                delta = _solve_bordered(
                    K, gb.T.reshape(-1), self.constraint_row(tv, tb), rhs
                )
            except RuntimeError:
                return v, beta, rn, it, False
            v = v + delta[:-1].reshape(self.M, self.m).T
            beta = beta + delta[-1]
        G = self.gradient(beta, v)
        rn = self.gradient_norm(G)
        ok = rn <= tol
        return v, beta, rn, max_iter, ok

    def tangent(self, beta, v, tv_prev, tb_prev):
        K, gb = self.jacobian(beta, v)
        rhs = np.zeros(self.m * self.M + 1)
        rhs[-1] = 1.0
        t = _solve_bordered(
            K, gb.T.reshape(-1), self.constraint_row(tv_prev, tb_prev), rhs
        )
        tv = t[:-1].reshape(self.M, self.m).T
        tb = t[-1]
        nrm = np.sqrt(self.metric_dot(tv, tb, tv, tb))
        return tv / nrm, tb / nrm


def continue_branch(
    predictor: Predictor,
    partition: Partition,
    coupling: CouplingSpec,
    ground: GroundState,
    op: SchrodingerOperator,
    opts: ContinuationOpts,
    origin: BranchOrigin | None = None,
    direction: int = +1,
) -> Branch:
    """Pseudo-arclength continuation of a partially-synchronized branch.

    Starts from a (possibly kicked) predictor; the first corrector moves in
    the plane orthogonal to the kick, which prevents sliding back onto the
    locked branch.  Steps halve on corrector failure and double after fast
    convergence.  Termination reasons follow the Branch contract; a first
    corrector that lands back on the locked branch reports returned-to-locked
    with no accepted points.
    """
    domain = LockedBranchDomain.from_coupling(coupling)
    margin = 1e-3 * (coupling.mu_min - domain.lower_limit)
    beta_lo = opts.beta_min if opts.beta_min is not None else domain.lower_limit + margin
    beta_hi = opts.beta_max if opts.beta_max is not None else coupling.mu_min - margin
    if beta_lo < domain.lower_limit or beta_hi > coupling.mu_min:
        raise OutOfDomainError("continuation bounds must stay inside the locked interval")

    prob = _ReducedProblem(partition, coupling, op, op.grid.weights)
    kicked = predictor.tangent_v is not None and predictor.kick > 0

    if kicked:
        tv0, tb0 = predictor.tangent_v, 0.0
    else:
        tv0, tb0 = np.zeros_like(predictor.v), float(direction)

    def make_point(beta, v, rn, s, morse):
        u = embed(partition, coupling, beta, v)
        full_rn = residual_norm(SystemState(beta=beta, u=u), coupling, op)
        dist = distance_to_locked(ground, coupling, u, op, domain, beta_hint=beta)
        return BranchPoint(
            beta=beta,
            u=u,
            s=s,
            residual_norm=rn,
            full_residual_norm=full_rn,
            min_value=float(u.min()),
            dist_locked=dist,
            morse_index=morse,
        )

    def morse_at(beta, v, index):
        if opts.morse_every > 0 and index % opts.morse_every == 0:
            spec = reduced_hessian_spectrum(
                partition, coupling, beta, v, op, count=opts.morse_count
            )
            return spec.morse_index
        return None

    branch = Branch(
        points=[], partition=partition, origin=origin,
        direction=direction, termination=None, opts=opts,
    )

    # first corrector: stay in the plane through the predictor
    v, beta, rn, _, ok = prob.corrector(
        predictor.beta, predictor.v, tv0, tb0,
        predictor.beta, predictor.v, 0.0, opts.newton_tol, opts.max_newton_iter,
    )
    if not ok:
        branch.termination = "newton-failure"
        return branch
    first = make_point(beta, v, rn, 0.0, morse_at(beta, v, 0))
    if kicked and first.dist_locked < 0.5 * predictor.kick:
        branch.termination = "returned-to-locked"
        return branch
    branch.points.append(first)

    tv, tb = prob.tangent(beta, v, tv0, tb0)
    ds = opts.ds0
    s = 0.0
    return_tol = 1e-3 * predictor.kick if kicked else 0.0
    for step in range(1, opts.max_steps + 1):
        accepted = False
        while ds >= opts.ds_min:
            v_new, b_new, rn, iters, ok = prob.corrector(
                beta + ds * tb, v + ds * tv, tv, tb, beta, v, ds,
                opts.newton_tol, opts.max_newton_iter,
            )
            if ok:
                accepted = True
                break
            ds *= 0.5
        if not accepted:
            branch.termination = "newton-failure"
            return branch
        v, beta = v_new, b_new
        s += ds
        if not (beta_lo <= beta <= beta_hi):
            branch.termination = "beta-bound"
            return branch
        pt = make_point(beta, v, rn, s, morse_at(beta, v, step))
        branch.points.append(pt)
        if pt.min_value <= 0.0:
            branch.termination = "positivity-lost"
            return branch
        if kicked and pt.dist_locked < return_tol:
            branch.termination = "returned-to-locked"
            return branch
        if iters <= 3:
            ds = min(2.0 * ds, opts.ds_max)
        tv, tb = prob.tangent(beta, v, tv, tb)
    branch.termination = "max-steps"
    return branch


def extrapolate_origin(branch: Branch, n_points: int = 6) -> float:
    """Estimate the bifurcation parameter by extrapolating beta against the
    squared distance to the locked branch over the first few points."""
    pts = branch.points[: max(2, n_points)]
    if len(pts) < 2:
        if not pts:
            raise ValueError("branch has no points")
        return pts[0].beta
    d2 = np.array([p.dist_locked**2 for p in pts])
    betas = np.array([p.beta for p in pts])
    slope, intercept = np.polyfit(d2, betas, 1)
    return float(intercept)


def branch_separation(a: Branch, b: Branch) -> float:
    """Largest relative pointwise state distance over the overlapping
    beta-range (0 when the ranges do not overlap)."""
    if not a.points or not b.points:
        return 0.0
    bb = b.betas
    order = np.argsort(bb)
    bb_sorted = bb[order]
    ub = np.array([b.points[i].u for i in order])
    lo, hi = bb_sorted[0], bb_sorted[-1]
    best = 0.0
    for p in a.points:
        if not (lo <= p.beta <= hi):
            continue
        j = int(np.searchsorted(bb_sorted, p.beta))
        j = min(max(j, 1), len(bb_sorted) - 1)
        b0, b1 = bb_sorted[j - 1], bb_sorted[j]
        t = 0.0 if b1 == b0 else (p.beta - b0) / (b1 - b0)
        u_interp = (1 - t) * ub[j - 1] + t * ub[j]
        dist = float(np.max(np.abs(p.u - u_interp)))
        scale = max(float(np.max(np.abs(p.u))), float(np.max(np.abs(u_interp))), 1e-300)
        best = max(best, dist / scale)
    return best
