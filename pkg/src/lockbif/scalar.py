"""Scalar ground state and its weighted linearization spectrum.

Solves -Laplace w + a w = w^3, w > 0 by a globalized Newton iteration and
computes the weighted eigenvalue problem -Laplace psi + a psi = lambda w^2 psi
whose eigenvalues drive the whole bifurcation analysis.  The discrete solution
w reproduces the eigenpair (1, w) of the weighted problem exactly, because
A w = w^3 = diag(w^2) w holds at the level of the stored matrix.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as sla

from .errors import (
    EigensolverError,
    NoConvergenceError,
    PositivityLostError,
    SizeMismatchError,
)
from .radial import SchrodingerOperator, weighted_inner, weighted_norm

#: |lambda_k - 3| below this means the scalar solution is degenerate.
DEGENERACY_TOL = 1e-6


@dataclass
class SolverOptions:
    """Newton options for the scalar solve."""

    tol: float = 1e-11
    max_iter: int = 50
    max_backtracks: int = 30
    #: A stalled iterate (no representable neighbour improves the residual) is
    #: accepted when its residual is below stall_factor * tol.  At fine grids
    #: the float64 floor of ||Aw - w^3|| sits near eps*|w|/h^2, which can
    #: exceed tol itself; see README.
    stall_factor: float = 50.0


@dataclass
class GroundState:
    """Positive solution of the scalar cubic problem.

    ``nondegenerate`` is filled in by :func:`weighted_spectrum`; it stays None
    until a spectrum has been computed.
    """

    w: np.ndarray
    residual_norm: float
    newton_iterations: int
    nondegenerate: bool | None = None


def scalar_residual(op: SchrodingerOperator, w: np.ndarray) -> np.ndarray:
    """Pointwise residual A w - w^3."""
    w = op.grid.check_field(w)
    return op.apply(w) - w**3


def _newton_loop(op, w0, coeff, opts):
    """Newton with backtracking on ||A w - coeff*w^3||_w; returns (w, rn, iters).

    Raises PositivityLostError if an accepted iterate changes sign, and
    NoConvergenceError if the budget runs out away from the tolerance.  A
    stall (no decrease found along the Newton direction) within
    opts.stall_factor * opts.tol counts as converged: at that point the
    iterate is within roundoff of the representable root.
    """
    grid = op.grid
    w = w0.copy()
    ab0 = op._plain_bands

    def fval(u):
        return op.apply(u) - coeff * u**3

    F = fval(w)
    rn = weighted_norm(grid, F)
    for it in range(opts.max_iter):
        if rn <= opts.tol:
            return w, rn, it
        ab = ab0.copy()
        ab[1] -= 3.0 * coeff * w**2
        delta = sla.solve_banded((1, 1), ab, -F)
        t, base = 1.0, rn * rn
        trial_F = None
        for _ in range(opts.max_backtracks):
            trial = w + t * delta
            trial_F = fval(trial)
            if weighted_inner(grid, trial_F, trial_F) < base:
                break
            t *= 0.5
        else:
            # no decrease anywhere along the direction: float64 stall
            if rn <= opts.stall_factor * opts.tol:
                return w, rn, it
            raise NoConvergenceError(
                f"Newton stalled at residual {rn:.3e} (tol {opts.tol:.1e})"
            )
        w = w + t * delta
        F = trial_F
        rn = weighted_norm(grid, F)
        if np.any(w <= 0.0):
            raise PositivityLostError(
                f"iterate lost positivity at Newton step {it + 1}"
            )
    if rn <= opts.tol or rn <= opts.stall_factor * opts.tol:
        return w, rn, opts.max_iter
    raise NoConvergenceError(
        f"no convergence in {opts.max_iter} Newton steps (residual {rn:.3e})"
    )


def _initial_guess(op: SchrodingerOperator) -> np.ndarray:
    """Galerkin-optimal multiple of the first operator eigenfunction.

    w0 = s*phi1 with s chosen so the projected equation <A w0 - w0^3, phi1>
    vanishes; deterministic, so repeated solves are bit-reproducible.
    """
    d, e = op.symmetric_tridiagonal
    try:
        nu, z = sla.eigh_tridiagonal(d, e, select="i", select_range=(0, 0))
    except (sla.LinAlgError, ValueError) as exc:  # pragma: no cover
        raise EigensolverError(f"initial-guess eigensolve failed: {exc}") from exc
    phi = z[:, 0] / np.sqrt(op.grid.weights)
    if phi.sum() < 0:
        phi = -phi
    grid = op.grid
    s = np.sqrt(nu[0] * weighted_inner(grid, phi, phi) / weighted_inner(grid, phi**3, phi))
    return s * phi


def solve_ground_state(
    op: SchrodingerOperator, opts: SolverOptions | None = None
) -> GroundState:
    """Solve A w = w^3, w > 0.

    Falls back to a short homotopy in the cubic coefficient (solving
    A w = c w^3 for decreasing c, rescaling exactly between levels) if the
    direct Newton run loses positivity or stalls high.
    """
    opts = opts or SolverOptions()
    op.require_positive()
    w0 = _initial_guess(op)
    try:
        w, rn, its = _newton_loop(op, w0, 1.0, opts)
    except (PositivityLostError, NoConvergenceError):
        w, rn, its = _homotopy_fallback(op, w0, opts)
    if np.any(w <= 0.0):
        raise PositivityLostError("converged iterate is not strictly positive")
    return GroundState(w=w, residual_norm=rn, newton_iterations=its)


def _homotopy_fallback(op, w0, opts):
    """Damped path: solve A w = c w^3 for c = 8, 4, 2, 1.

    The cubic problem rescales exactly (if A w = c w^3 then sqrt(2) w solves
    the c/2 problem), so each level starts from an essentially converged guess
    of smaller amplitude where Newton is docile.
    """
    levels = (8.0, 4.0, 2.0, 1.0)
    total = 0
    w = w0 / np.sqrt(levels[0])
    for i, coeff in enumerate(levels):
        w, rn, its = _newton_loop(op, w, coeff, opts)
        total += its
        if i + 1 < len(levels):
            w = w * np.sqrt(2.0)
    return w, rn, total


@dataclass
class WeightedSpectrum:
    """Clustered spectrum of A psi = lambda w^2 psi.

    ``bases[k]`` holds the k-th cluster eigenvectors (rows), orthonormal in
    the product sum_i w_i w(r_i)^2 psi_i phi_i (the pencil's natural one).
    """

    eigenvalues: np.ndarray
    multiplicities: np.ndarray
    bases: list[np.ndarray]
    cluster_tol: float

    @property
    def count(self) -> int:
        return len(self.eigenvalues)

    @property
    def degenerate(self) -> bool:
        return bool(np.any(np.abs(self.eigenvalues - 3.0) < DEGENERACY_TOL))

    def require_nondegenerate(self) -> None:
        if self.degenerate:
            from .errors import DegenerateSpectrumError

            bad = self.eigenvalues[np.abs(self.eigenvalues - 3.0) < DEGENERACY_TOL]
            raise DegenerateSpectrumError(
                f"weighted eigenvalue(s) {bad} within {DEGENERACY_TOL} of 3; "
                "the scalar solution is degenerate and bifurcation analysis "
                "is not defined"
            )


def weighted_spectrum(
    op: SchrodingerOperator,
    ground: GroundState,
    kmax: int = 8,
    cluster_tol: float | None = None,
) -> WeightedSpectrum:
    """Lowest ``kmax`` eigenvalue clusters of A psi = lambda w^2 psi.

    Solved in the inverted generalized form eigh(Mass, Stiffness): LAPACK
    factors the well-conditioned stiffness side, which keeps the small
    eigenvalues accurate to ~eps*lambda^2 even though w^2 nearly vanishes at
    the boundary (the direct diag(1/w) congruence loses ~8 digits there).
    Sets ``ground.nondegenerate`` as a side effect.
    """
    if kmax < 2:
        raise ValueError("kmax must be at least 2")
    w = op.grid.check_field(ground.w)
    if np.any(w <= 0):
        raise PositivityLostError("weighted spectrum needs a positive state")
    M = op.size
    T = op.stiffness_dense()
    mass = op.grid.weights * w**2

    want = min(M, max(3 * kmax + 8, kmax + 4))
    while True:
        try:
            nu, Z = sla.eigh(
                np.diag(mass), T, subset_by_index=(M - want, M - 1)
            )
        except sla.LinAlgError as exc:
            raise EigensolverError(f"generalized eigensolver failed: {exc}") from exc
        lam = 1.0 / nu[::-1]
        vecs = Z[:, ::-1]
        clusters = _cluster(lam, cluster_tol)
        if len(clusters) > kmax or want == M:
            break
        want = min(M, 2 * want)

    clusters = clusters[:kmax]
    tol_used = cluster_tol if cluster_tol is not None else _default_cluster_tol(lam)
    eigenvalues, mult, bases = [], [], []
    for members in clusters:
        lam_k = float(np.mean(lam[members]))
        basis = []
        for j in members:
            psi = vecs[:, j] / np.sqrt(np.dot(mass, vecs[:, j] ** 2))
            basis.append(psi)
        eigenvalues.append(lam_k)
        mult.append(len(members))
        bases.append(np.array(basis))
    spec = WeightedSpectrum(
        eigenvalues=np.array(eigenvalues),
        multiplicities=np.array(mult, dtype=int),
        bases=bases,
        cluster_tol=tol_used,
    )
    ground.nondegenerate = not spec.degenerate
    return spec


def _default_cluster_tol(lam: np.ndarray) -> float:
    return 1e-7


def _cluster(lam: np.ndarray, cluster_tol: float | None) -> list[list[int]]:
    """Group sorted eigenvalues into clusters of relative width cluster_tol."""
    groups: list[list[int]] = []
    for j, v in enumerate(lam):
        scale = max(1.0, abs(v))
        tol = (cluster_tol if cluster_tol is not None else 1e-7) * scale
        if groups and v - lam[groups[-1][-1]] <= tol:
            groups[-1].append(j)
        else:
            groups.append([j])
    return groups
