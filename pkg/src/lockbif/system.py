"""Variational core of the n-component system.

Energy, gradient (system residual), Hessian action and spectrum, Morse index
and the explicit kernel basis at bifurcation parameters.  The Hessian in the
weighted-symmetric representation is a banded matrix of bandwidth n when the
unknowns are interleaved node-major, which keeps full spectral slices cheap
even at n*M of a few thousand.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg as sla

from .errors import (
    AtBifurcationError,
    EigensolverError,
    OutOfDomainError,
    SizeMismatchError,
    WrongMultiplicityError,
)
from .locked import (
    CouplingSpec,
    coupling_eigenbasis,
    coupling_lower_limit,
    transverse_eigenvalue,
)
from .radial import RadialGrid, SchrodingerOperator, weighted_inner
from .scalar import WeightedSpectrum

#: Morse formula refuses within this relative distance of a spectrum value.
_BIF_GUARD = 1e-9


@dataclass(eq=False)
class SystemState:
    """A candidate solution (beta, u_1..u_n); u has shape (n, M)."""

    beta: float
    u: np.ndarray
    residual_norm: float | None = None

    def __post_init__(self):
        self.u = np.asarray(self.u, dtype=float)
        if self.u.ndim != 2:
            raise SizeMismatchError("state fields must form an (n, M) array")

    @property
    def n(self) -> int:
        return self.u.shape[0]

    @property
    def min_value(self) -> float:
        return float(self.u.min())

    @property
    def positive(self) -> bool:
        return self.min_value > 0.0


def _check_state(state: SystemState, coupling: CouplingSpec, op: SchrodingerOperator):
    if state.u.shape != (coupling.n, op.size):
        raise SizeMismatchError(
            f"state shape {state.u.shape} != ({coupling.n}, {op.size})"
        )


def energy(state: SystemState, coupling: CouplingSpec, op: SchrodingerOperator) -> float:
    """J_beta(u) = 1/2 sum ||u_j||_E^2 - 1/4 sum mu_j ||u_j||_L4^4
    - beta/2 sum_{i<j} int u_i^2 u_j^2, with weighted discrete integrals."""
    _check_state(state, coupling, op)
    grid, beta, u = op.grid, state.beta, state.u
    quad = sum(weighted_inner(grid, op.apply(u[j]), u[j]) for j in range(coupling.n))
    quart = sum(
        coupling.mu[j] * weighted_inner(grid, u[j] ** 2, u[j] ** 2)
        for j in range(coupling.n)
    )
    cross = 0.0
    for i in range(coupling.n):
        for j in range(i + 1, coupling.n):
            cross += weighted_inner(grid, u[i] ** 2, u[j] ** 2)
    return 0.5 * quad - 0.25 * quart - 0.5 * beta * cross


def system_residual(
    state: SystemState, coupling: CouplingSpec, op: SchrodingerOperator
) -> np.ndarray:
    """Gradient of the energy in the weighted metric:
    component j is A u_j - mu_j u_j^3 - beta sum_{k!=j} u_k^2 u_j."""
    _check_state(state, coupling, op)
    u, beta = state.u, state.beta
    sq = u**2
    total = sq.sum(axis=0)
    out = np.empty_like(u)
    for j in range(coupling.n):
        out[j] = op.apply(u[j]) - coupling.mu[j] * u[j] ** 3 - beta * (total - sq[j]) * u[j]
    return out


def residual_norm(
    state: SystemState, coupling: CouplingSpec, op: SchrodingerOperator
) -> float:
    res = system_residual(state, coupling, op)
    return float(
        np.sqrt(sum(weighted_inner(op.grid, res[j], res[j]) for j in range(coupling.n)))
    )


def pointwise_hessian_matrix(
    state: SystemState, coupling: CouplingSpec
) -> np.ndarray:
    """(n, n, M) multiplication part of the Hessian:
    diagonal 3 mu_j u_j^2 + beta sum_{k!=j} u_k^2, off-diagonal 2 beta u_j u_k."""
    u, beta = state.u, state.beta
    n = coupling.n
    sq = u**2
    total = sq.sum(axis=0)
    P = np.empty((n, n, u.shape[1]))
    for j in range(n):
        P[j, j] = 3.0 * coupling.mu[j] * sq[j] + beta * (total - sq[j])
        for k in range(j + 1, n):
            P[j, k] = P[k, j] = 2.0 * beta * u[j] * u[k]
    return P


def hessian_apply(
    state: SystemState,
    coupling: CouplingSpec,
    op: SchrodingerOperator,
    phi: np.ndarray,
) -> np.ndarray:
    """Second derivative of the energy applied to a direction phi (n, M)."""
    _check_state(state, coupling, op)
    phi = np.asarray(phi, dtype=float)
    if phi.shape != state.u.shape:
        raise SizeMismatchError(f"direction shape {phi.shape} != {state.u.shape}")
    P = pointwise_hessian_matrix(state, coupling)
    out = np.empty_like(phi)
    for j in range(coupling.n):
        out[j] = op.apply(phi[j]) - np.einsum("km,km->m", P[j], phi)
    return out


def assemble_symmetric_banded(
    op: SchrodingerOperator,
    P: np.ndarray,
    block_scales: np.ndarray | None = None,
) -> np.ndarray:
    """Lower-form banded storage of the weighted-symmetrized block operator
    blockdiag(A) - P(x), interleaved node-major.

    With block_scales s_b the assembled matrix is the symmetric reduction of
    the pencil (block operator, diag(s_b) metric): within-block tridiagonal
    (d_i - P_bb,i/s_b, e_i), cross-block couplings -P_bb',i/sqrt(s_b s_b').
    """
    m, M = P.shape[0], op.size
    s = np.ones(m) if block_scales is None else np.asarray(block_scales, dtype=float)
    d, e = op.symmetric_tridiagonal
    root = np.sqrt(s)
    band = np.zeros((m + 1, m * M))
    for b in range(m):
        rows = b + m * np.arange(M)
        band[0, rows] = d - P[b, b] / s[b]
        for b2 in range(b + 1, m):
            band[b2 - b, rows] = -P[b2, b] / (root[b] * root[b2])
        band[m, rows[:-1]] = e
    return band


@dataclass(eq=False)
class HessianSpectrum:
    """Lowest eigenvalues of the (weighted-symmetric) Hessian with counts."""

    eigenvalues: np.ndarray
    morse_index: int
    kernel_dim: int
    zero_tol: float
    vectors: np.ndarray | None = None  # (count, m, M) when requested


def default_zero_tol(op: SchrodingerOperator) -> float:
    """Kernel detection threshold: discrete eigenvalues at a bifurcation sit
    O(h^2) from zero unless the discrete parameter is used, so the default
    scales with the grid."""
    return max(1e-7, 5.0 * op.grid.h ** 2)


def _count_spectrum(vals, zero_tol):
    scale = float(np.abs(vals).max()) if len(vals) else 1.0
    thresh = zero_tol * max(scale, np.finfo(float).tiny)
    morse = int(np.sum(vals < -thresh))
    kernel = int(np.sum(np.abs(vals) <= thresh))
    return morse, kernel


def banded_spectrum(
    band: np.ndarray,
    count: int,
    zero_tol: float,
    op: SchrodingerOperator,
    m: int,
    return_vectors: bool = False,
    block_scales: np.ndarray | None = None,
) -> HessianSpectrum:
    size = band.shape[1]
    count = min(count, size)
    try:
        if return_vectors:
            vals, vecs = sla.eig_banded(
                band, lower=True, select="i", select_range=(0, count - 1)
            )
        else:
            vals = sla.eig_banded(
                band, lower=True, select="i", select_range=(0, count - 1),
                eigvals_only=True,
            )
            vecs = None
    except (sla.LinAlgError, ValueError) as exc:
        raise EigensolverError(f"banded eigensolver failed: {exc}") from exc
    morse, kernel = _count_spectrum(vals, zero_tol)
    vectors = None
    if vecs is not None:
        # undo the interleaving and the metric symmetrization per component
        root_w = np.sqrt(op.grid.weights)
        root_s = np.ones(m) if block_scales is None else np.sqrt(block_scales)
        vectors = np.empty((count, m, op.size))
        for i in range(count):
            vectors[i] = vecs[:, i].reshape(op.size, m).T / root_w / root_s[:, None]
    return HessianSpectrum(
        eigenvalues=vals,
        morse_index=morse,
        kernel_dim=kernel,
        zero_tol=zero_tol,
        vectors=vectors,
    )


def hessian_spectrum(
    state: SystemState,
    coupling: CouplingSpec,
    op: SchrodingerOperator,
    count: int = 24,
    zero_tol: float | None = None,
    return_vectors: bool = False,
) -> HessianSpectrum:
    """Lowest `count` Hessian eigenvalues, Morse index and kernel dimension.

    zero_tol is relative to the largest computed magnitude; the default grows
    with h^2 (see default_zero_tol), pass an explicit value for sharper cuts.
    """
    _check_state(state, coupling, op)
    zt = default_zero_tol(op) if zero_tol is None else zero_tol
    P = pointwise_hessian_matrix(state, coupling)
    band = assemble_symmetric_banded(op, P)
    return banded_spectrum(band, count, zt, op, coupling.n, return_vectors)


def locked_morse_index(
    coupling: CouplingSpec,
    beta: float,
    spectrum: WeightedSpectrum,
    blocks: int | None = None,
) -> int:
    """Closed-form Morse index of the locked state at beta:

        m(beta) = sum_{lambda_k < 3} n_k
                  + (blocks-1) * sum_{lambda_k < f(beta)} n_k

    with f the transverse eigenvalue and blocks = n for the full system (the
    same count with blocks = |partition| gives the reduced index).  Undefined
    (raises) when f(beta) collides with a spectrum value.
    """
    spectrum.require_nondegenerate()
    lower = coupling_lower_limit(coupling)
    if not (lower < beta < coupling.mu_min):
        raise OutOfDomainError(
            f"Morse formula defined on ({lower:.6g}, {coupling.mu_min:.6g})"
        )
    nblocks = coupling.n if blocks is None else blocks
    fval = transverse_eigenvalue(coupling, beta)
    lam = spectrum.eigenvalues
    if fval >= lam[-1]:
        from .errors import InsufficientSpectrumError

        raise InsufficientSpectrumError(
            f"transverse eigenvalue {fval:.6g} beyond the computed spectrum "
            f"(last eigenvalue {lam[-1]:.6g}); increase kmax"
        )
    if np.any(np.abs(lam - fval) <= _BIF_GUARD * np.maximum(1.0, np.abs(lam))):
        raise AtBifurcationError(
            f"transverse eigenvalue {fval:.12g} collides with the weighted spectrum"
        )
    mult = spectrum.multiplicities
    return int(mult[lam < 3.0].sum() + (nblocks - 1) * mult[lam < fval].sum())


def bifurcation_kernel_basis(
    coupling: CouplingSpec,
    beta_k: float,
    basis: np.ndarray,
    grid: RadialGrid,
) -> np.ndarray:
    """Explicit kernel of the locked-state Hessian at a bifurcation parameter.

    Every kernel element has all components in the matching weighted
    eigenspace and is pointwise orthogonal to the synchronized direction; the
    basis is built as (transverse direction) x (eigenfunction) products and
    orthonormalized blockwise in the weighted product.  Returns an array of
    shape ((n-1)*n_k, n, M).
    """
    basis = np.atleast_2d(np.asarray(basis, dtype=float))
    if basis.ndim != 2 or basis.shape[1] != grid.size:
        raise WrongMultiplicityError(
            f"eigenbasis shape {basis.shape} incompatible with grid size {grid.size}"
        )
    eb = coupling_eigenbasis(coupling, beta_k)
    n = coupling.n
    n_k = basis.shape[0]
    out = []
    for trans in eb.transverse_directions:
        for psi in basis:
            out.append(np.outer(trans, psi))
    # blockwise weighted Gram-Schmidt
    ortho: list[np.ndarray] = []
    for cand in out:
        v = cand.copy()
        for q in ortho:
            v -= sum(weighted_inner(grid, v[j], q[j]) for j in range(n)) * q
        nrm = np.sqrt(sum(weighted_inner(grid, v[j], v[j]) for j in range(n)))
        if nrm <= 1e-12:
            raise WrongMultiplicityError("kernel candidates are linearly dependent")
        ortho.append(v / nrm)
    if len(ortho) != (n - 1) * n_k:
        raise WrongMultiplicityError(
            f"expected {(n - 1) * n_k} kernel elements, built {len(ortho)}"
        )
    return np.array(ortho)
