"""Closed-form algebra of the fully synchronized (locked) solution branch.

For couplings mu_1..mu_n > 0 and interaction strength beta, the locked states
u_j = alpha_j(beta) * w are governed by two scalar functions:

    amplitude_scale(beta) = 1 + beta * sum_k 1/(mu_k - beta)
    alpha_j(beta)         = ((mu_j - beta) * amplitude_scale(beta))^(-1/2)

The amplitude_scale has a unique negative root (the left end of the branch),
and the linearization along the branch reduces to an n x n symmetric matrix
whose spectrum is {3 (simple)} + {transverse_eigenvalue(beta) (n-1 fold)}.
Bifurcation can happen only where the transverse eigenvalue meets the weighted
spectrum of the scalar problem; those couplings are computed here.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import (
    LambdaRangeError,
    NonpositiveDirectionError,
    OutOfDomainError,
    PoleError,
    UnequalMuError,
)
from .scalar import GroundState, WeightedSpectrum

_ROOT_TOL = 1e-13
_INVERSE_TOL = 1e-12
_GS_PIVOT_TOL = 1e-8


@dataclass(frozen=True, eq=False)
class CouplingSpec:
    """Component count and self-interaction coefficients (any order)."""

    mu: np.ndarray

    def __post_init__(self):
        mu = np.atleast_1d(np.asarray(self.mu, dtype=float))
        if mu.ndim != 1 or len(mu) < 2:
            raise ValueError("need at least two components")
        if not np.all(np.isfinite(mu)) or np.any(mu <= 0):
            raise ValueError("all couplings must be finite and > 0")
        object.__setattr__(self, "mu", mu)

    @property
    def n(self) -> int:
        return len(self.mu)

    @property
    def mu_min(self) -> float:
        return float(self.mu.min())

    @property
    def mu_max(self) -> float:
        return float(self.mu.max())

    @property
    def equal(self) -> bool:
        return self.mu_min == self.mu_max


def amplitude_scale(coupling: CouplingSpec, beta: float) -> float:
    """1 + beta * sum_k 1/(mu_k - beta); poles at beta = mu_k."""
    if np.any(coupling.mu == beta):
        raise PoleError(f"beta={beta} coincides with a coupling coefficient")
    return float(1.0 + beta * np.sum(1.0 / (coupling.mu - beta)))


def coupling_lower_limit(coupling: CouplingSpec) -> float:
    """Unique negative root of amplitude_scale: left end of the locked branch.

    amplitude_scale equals 1 at beta=0, tends to 1-n < 0 as beta -> -infinity
    and is strictly increasing below mu_min, so plain bisection from an
    expanding bracket is unconditional.
    """
    lo = -1.0
    while amplitude_scale(coupling, lo) >= 0.0:
        lo *= 2.0
    hi = 0.0
    best, best_val = lo, amplitude_scale(coupling, lo)
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        val = amplitude_scale(coupling, mid)
        if abs(val) < abs(best_val):
            best, best_val = mid, val
        if abs(val) <= _ROOT_TOL:
            return mid
        if val < 0.0:
            lo = mid
        else:
            hi = mid
        if hi - lo <= np.finfo(float).eps * max(1.0, abs(lo)):
            break
    return best


@dataclass(frozen=True)
class LockedBranchDomain:
    """Admissible parameter set of the locked branch:
    (lower_limit, mu_min) union (mu_max, +infinity)."""

    coupling: CouplingSpec
    lower_limit: float

    @classmethod
    def from_coupling(cls, coupling: CouplingSpec) -> "LockedBranchDomain":
        return cls(coupling=coupling, lower_limit=coupling_lower_limit(coupling))

    def contains(self, beta: float) -> bool:
        return (self.lower_limit < beta < self.coupling.mu_min) or (
            beta > self.coupling.mu_max
        )

    @property
    def intervals(self) -> tuple[tuple[float, float], tuple[float, float]]:
        return (
            (self.lower_limit, self.coupling.mu_min),
            (self.coupling.mu_max, np.inf),
        )


def _require_admissible(coupling: CouplingSpec, beta: float, lower: float | None = None):
    lower = coupling_lower_limit(coupling) if lower is None else lower
    if not ((lower < beta < coupling.mu_min) or beta > coupling.mu_max):
        raise OutOfDomainError(
            f"beta={beta} outside ({lower:.6g}, {coupling.mu_min:.6g}) "
            f"union ({coupling.mu_max:.6g}, inf)"
        )


def lock_coefficients(
    coupling: CouplingSpec, beta: float
) -> tuple[np.ndarray | None, np.ndarray]:
    """(gamma, alpha): detuning weights gamma_j = (mu_j-beta)^(-1/2) and locked
    amplitudes alpha_j = ((mu_j-beta)*amplitude_scale)^(-1/2).

    gamma is None for beta > mu_max (not real there); alpha is real on both
    admissible intervals because (mu_j-beta) and the amplitude scale change
    sign together.
    """
    _require_admissible(coupling, beta)
    scale = amplitude_scale(coupling, beta)
    alpha = 1.0 / np.sqrt((coupling.mu - beta) * scale)
    gamma = None
    if beta < coupling.mu_min:
        gamma = 1.0 / np.sqrt(coupling.mu - beta)
    return gamma, alpha


def locked_solution(
    ground: GroundState, coupling: CouplingSpec, beta: float
) -> np.ndarray:
    """Locked state u_j = alpha_j(beta) * w as an (n, M) array."""
    _, alpha = lock_coefficients(coupling, beta)
    return np.outer(alpha, ground.w)


def locked_family_equal_mu(
    ground: GroundState, coupling: CouplingSpec, direction: np.ndarray
) -> np.ndarray:
    """Locked states at the special point beta = mu (all couplings equal).

    There the amplitudes are a free positive direction normalized by
    sum alpha_j^2 = 1/mu rather than a function of beta.
    """
    if not coupling.equal:
        raise UnequalMuError("the locked family at beta=mu needs equal couplings")
    direction = np.asarray(direction, dtype=float)
    if direction.shape != (coupling.n,):
        raise NonpositiveDirectionError(
            f"direction must have shape ({coupling.n},), got {direction.shape}"
        )
    if np.any(direction <= 0):
        raise NonpositiveDirectionError("direction must be strictly positive")
    mu = coupling.mu_min
    alpha = direction / np.sqrt(mu * np.sum(direction**2))
    return np.outer(alpha, ground.w)


def coupling_matrices(
    coupling: CouplingSpec, beta: float
) -> tuple[np.ndarray, np.ndarray]:
    """(full, interaction): the n x n linearization coupling matrix and the
    interaction matrix it is built from.

    interaction[i][j] = beta*gamma_i*gamma_j off the diagonal, mu_i*gamma_i^2
    on it; full = I + (2/amplitude_scale) * interaction.  Only defined left of
    mu_min where the detuning weights are real.
    """
    lower = coupling_lower_limit(coupling)
    if not (lower < beta < coupling.mu_min):
        raise OutOfDomainError(
            f"beta={beta} outside ({lower:.6g}, {coupling.mu_min:.6g})"
        )
    gamma = 1.0 / np.sqrt(coupling.mu - beta)
    interaction = beta * np.outer(gamma, gamma)
    # mu/(mu - beta) rather than mu*gamma^2: exact identity matrix at beta=0
    np.fill_diagonal(interaction, coupling.mu / (coupling.mu - beta))
    scale = amplitude_scale(coupling, beta)
    full = np.eye(coupling.n) + (2.0 / scale) * interaction
    return full, interaction


def transverse_eigenvalue(coupling: CouplingSpec, beta: float) -> float:
    """The (n-1)-fold eigenvalue 1 + 2/amplitude_scale of the coupling matrix.

    On (lower_limit, mu_min) it decreases strictly from +infinity to 1.
    """
    scale = amplitude_scale(coupling, beta)
    if scale == 0.0:
        raise PoleError("transverse eigenvalue has a pole at the branch limit")
    return 1.0 + 2.0 / scale


def coupling_for_eigenvalue(coupling: CouplingSpec, value: float) -> float:
    """Inverse of the transverse eigenvalue map on (lower_limit, mu_min).

    Monotone bisection; |transverse_eigenvalue(beta) - value| <= 1e-12 at the
    returned point.
    """
    if not value > 1.0:
        raise LambdaRangeError(f"no preimage: need value > 1, got {value}")
    lower = coupling_lower_limit(coupling)
    width = coupling.mu_min - lower
    lo = lower + 0.25 * width
    while transverse_eigenvalue(coupling, lo) < value:
        lo = lower + 0.25 * (lo - lower)
    hi = coupling.mu_min - 1e-14 * max(1.0, abs(coupling.mu_min))
    if transverse_eigenvalue(coupling, hi) > value:
        return hi  # value indistinguishable from 1 at float resolution
    best, best_err = lo, abs(transverse_eigenvalue(coupling, lo) - value)
    for _ in range(300):
        mid = 0.5 * (lo + hi)
        fv = transverse_eigenvalue(coupling, mid)
        err = abs(fv - value)
        if err < best_err:
            best, best_err = mid, err
        if err <= _INVERSE_TOL:
            return mid
        if fv > value:
            lo = mid
        else:
            hi = mid
        if hi - lo <= np.finfo(float).eps * max(1.0, abs(lo)):
            break
    return best


@dataclass(frozen=True, eq=False)
class CouplingEigenbasis:
    """Eigen-decomposition of the coupling matrix at one beta.

    The synchronized direction (the detuning-weight vector) carries the
    eigenvalue 3; every direction orthogonal to it carries the transverse
    eigenvalue.  ``rotation`` is special orthogonal with the normalized
    synchronized direction as first column, so rotation^T C rotation =
    diag(3, f, ..., f).  At beta = 0 the matrix is 3*I and the split is
    degenerate (flagged; rotation = identity).
    """

    beta: float
    transverse_value: float
    sync_direction: np.ndarray
    transverse_directions: np.ndarray
    rotation: np.ndarray
    degenerate: bool = False

    locked_value: float = 3.0

    @property
    def eigenvalues(self) -> np.ndarray:
        n = len(self.sync_direction)
        return np.concatenate(([self.locked_value], np.full(n - 1, self.transverse_value)))


def coupling_eigenbasis(coupling: CouplingSpec, beta: float) -> CouplingEigenbasis:
    """Closed-form eigenpairs of the coupling matrix on (lower_limit, mu_min).

    The transverse rows are gamma_j e_1 - gamma_1 e_j (j = 2..n), each
    orthogonal to the synchronized direction; a deterministic Gram-Schmidt
    pass (with coordinate-vector fallback on pivot loss) completes them to an
    orthonormal frame.
    """
    lower = coupling_lower_limit(coupling)
    if not (lower < beta < coupling.mu_min):
        raise OutOfDomainError(
            f"beta={beta} outside ({lower:.6g}, {coupling.mu_min:.6g})"
        )
    n = coupling.n
    gamma = 1.0 / np.sqrt(coupling.mu - beta)
    raw = np.zeros((n - 1, n))
    for j in range(2, n + 1):
        raw[j - 2, 0] = gamma[j - 1]
        raw[j - 2, j - 1] = -gamma[0]

    degenerate = beta == 0.0
    fval = 3.0 if degenerate else transverse_eigenvalue(coupling, beta)
    if degenerate:
        rotation = np.eye(n)
    else:
        cols = [gamma / np.linalg.norm(gamma)]
        candidates = list(raw) + [np.eye(n)[j] for j in range(n)]
        for cand in candidates:
            if len(cols) == n:
                break
            v = cand.astype(float).copy()
            for q in cols:
                v -= np.dot(q, v) * q
            nrm = np.linalg.norm(v)
            if nrm > _GS_PIVOT_TOL:
                cols.append(v / nrm)
        rotation = np.column_stack(cols)
        if np.linalg.det(rotation) < 0:
            rotation[:, -1] = -rotation[:, -1]
    return CouplingEigenbasis(
        beta=beta,
        transverse_value=fval,
        sync_direction=gamma,
        transverse_directions=raw,
        rotation=rotation,
        degenerate=degenerate,
    )


@dataclass(frozen=True)
class BifurcationPoint:
    """One candidate bifurcation along the locked branch."""

    order: int  # index k >= 2 into the weighted spectrum
    eigenvalue: float  # lambda_k
    multiplicity: int  # n_k
    beta: float  # transverse eigenvalue inverse of lambda_k
    kernel_dim: int  # (n-1) * n_k


def bifurcation_points(
    coupling: CouplingSpec, spectrum: WeightedSpectrum
) -> list[BifurcationPoint]:
    """All bifurcation parameters beta_k = inverse-transverse(lambda_k), k >= 2.

    The first weighted eigenvalue (lambda_1 = 1) never yields a branch point;
    the list is sorted by decreasing beta (increasing lambda).  Refuses to run
    on a degenerate spectrum.
    """
    spectrum.require_nondegenerate()
    n = coupling.n
    points = []
    for k in range(2, spectrum.count + 1):
        lam = float(spectrum.eigenvalues[k - 1])
        n_k = int(spectrum.multiplicities[k - 1])
        beta_k = coupling_for_eigenvalue(coupling, lam)
        points.append(
            BifurcationPoint(
                order=k,
                eigenvalue=lam,
                multiplicity=n_k,
                beta=beta_k,
                kernel_dim=(n - 1) * n_k,
            )
        )
    return points
