"""Partitions of the component index set and the locked-subspace reduction.

A partition P of {1..n} defines the subspace of states whose components are
synchronized within each block (ratio fixed by the detuning weights).  The
block representatives carry independent profiles; embedding them back into the
full system and pulling the energy gradient through the embedding reduces the
problem to |P| components.  The reduction is exact at the discrete level:
if one component of a synchronized pair satisfies its equation, the partner
equation follows identically (the hidden-symmetry transfer), so reduced
critical points are genuine full solutions.

Indices are 0-based in the API; partition strings are 1-based with blocks
separated by '|' and members by ',' (e.g. "1|2,3").
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import (
    OutOfDomainError,
    PartitionFormatError,
    RatioViolatedError,
    SizeMismatchError,
    ZeroComponentError,
)
from .locked import CouplingSpec
from .radial import RadialGrid, SchrodingerOperator, weighted_inner, weighted_norm
from .system import (
    HessianSpectrum,
    SystemState,
    assemble_symmetric_banded,
    banded_spectrum,
    default_zero_tol,
    pointwise_hessian_matrix,
    system_residual,
)


@dataclass(frozen=True)
class Partition:
    """Disjoint blocks covering range(n), canonically sorted by representative."""

    blocks: tuple[tuple[int, ...], ...]
    n: int

    @classmethod
    def of(cls, blocks, n: int) -> "Partition":
        cleaned = []
        seen: set[int] = set()
        for block in blocks:
            members = tuple(sorted(int(j) for j in block))
            if not members:
                raise PartitionFormatError("empty block")
            for j in members:
                if j < 0 or j >= n:
                    raise PartitionFormatError(f"index {j + 1} outside 1..{n}")
                if j in seen:
                    raise PartitionFormatError(f"index {j + 1} repeated")
                seen.add(j)
            cleaned.append(members)
        if len(seen) != n:
            missing = sorted(set(range(n)) - seen)
            raise PartitionFormatError(
                f"indices {[j + 1 for j in missing]} missing from partition"
            )
        cleaned.sort(key=lambda b: b[0])
        return cls(blocks=tuple(cleaned), n=n)

    @classmethod
    def from_string(cls, text: str, n: int) -> "Partition":
        try:
            blocks = [
                [int(tok) - 1 for tok in part.split(",") if tok.strip() != ""]
                for part in text.split("|")
            ]
        except ValueError as exc:
            raise PartitionFormatError(f"cannot parse partition {text!r}") from exc
        return cls.of(blocks, n)

    @classmethod
    def discrete(cls, n: int) -> "Partition":
        return cls.of([[j] for j in range(n)], n)

    @classmethod
    def single(cls, n: int) -> "Partition":
        return cls.of([list(range(n))], n)

    @property
    def size(self) -> int:
        return len(self.blocks)

    @property
    def representatives(self) -> tuple[int, ...]:
        return tuple(b[0] for b in self.blocks)

    @property
    def is_pair(self) -> bool:
        return self.size == 2

    def block_of(self, j: int) -> int:
        for b, block in enumerate(self.blocks):
            if j in block:
                return b
        raise IndexError(j)

    def refines(self, other: "Partition") -> bool:
        """True when every block of self lies inside a block of other."""
        if self.n != other.n:
            return False
        return all(
            set(block) <= set(other.blocks[other.block_of(block[0])])
            for block in self.blocks
        )

    def to_string(self) -> str:
        return "|".join(",".join(str(j + 1) for j in block) for block in self.blocks)

    def __str__(self) -> str:  # pragma: no cover
        return self.to_string()


def enumerate_pair_partitions(n: int) -> list[Partition]:
    """The 2^(n-1) - 1 two-block partitions {A, complement}, A containing
    component 1, in deterministic bitmask order over components 2..n."""
    out = []
    for mask in range(2 ** (n - 1) - 1):
        a = [0] + [j for j in range(1, n) if mask >> (j - 1) & 1]
        b = [j for j in range(1, n) if not (mask >> (j - 1) & 1)]
        out.append(Partition.of([a, b], n))
    return out


@dataclass(eq=False)
class ReducedState:
    """Representative profiles, one per block; shape (|P|, M)."""

    beta: float
    v: np.ndarray

    def __post_init__(self):
        self.v = np.atleast_2d(np.asarray(self.v, dtype=float))


def lock_ratio(coupling: CouplingSpec, beta: float, i: int, j: int) -> float:
    """Synchronization ratio u_j / u_i = sqrt((mu_i - beta)/(mu_j - beta))."""
    if not beta < coupling.mu_min:
        raise OutOfDomainError(f"lock ratio needs beta < {coupling.mu_min}")
    return float(np.sqrt((coupling.mu[i] - beta) / (coupling.mu[j] - beta)))


def residual_transfer_defect(
    coupling: CouplingSpec,
    beta: float,
    i: int,
    j: int,
    u: np.ndarray,
    op: SchrodingerOperator,
) -> float:
    """Weighted norm of residual_j - ratio * residual_i for a state with
    u_j = ratio * u_i.

    This is identically zero in exact arithmetic for *any* profile u_i (not
    only solutions): multiplying the i-th equation by the ratio reproduces the
    j-th one because (mu_i - beta) = ratio^2 (mu_j - beta).  The returned
    defect is pure floating-point noise and the module's core probe.
    """
    u = np.asarray(u, dtype=float)
    if u.shape != (coupling.n, op.size):
        raise SizeMismatchError(f"state shape {u.shape} != ({coupling.n}, {op.size})")
    ratio = lock_ratio(coupling, beta, i, j)
    scale = max(weighted_norm(op.grid, u[j]), weighted_norm(op.grid, u[i]), 1e-300)
    gap = weighted_norm(op.grid, u[j] - ratio * u[i])
    if gap > 1e-12 * max(1.0, scale):
        raise RatioViolatedError(
            f"components {i + 1},{j + 1} violate the lock ratio by {gap:.3e}"
        )
    res = system_residual(SystemState(beta=beta, u=u), coupling, op)
    return weighted_norm(op.grid, res[j] - ratio * res[i])


def _ratio_vector(partition: Partition, coupling: CouplingSpec, beta: float) -> np.ndarray:
    """Per-component ratio to the block representative."""
    c = np.empty(coupling.n)
    for b, block in enumerate(partition.blocks):
        rep = block[0]
        for j in block:
            c[j] = lock_ratio(coupling, beta, rep, j)
    return c


def embed(
    partition: Partition,
    coupling: CouplingSpec,
    beta: float,
    v: np.ndarray,
) -> np.ndarray:
    """Expand representative profiles to a full synchronized state (n, M)."""
    v = np.atleast_2d(np.asarray(v, dtype=float))
    if v.shape[0] != partition.size:
        raise SizeMismatchError(f"{v.shape[0]} profiles for {partition.size} blocks")
    c = _ratio_vector(partition, coupling, beta)
    u = np.empty((coupling.n, v.shape[1]))
    for b, block in enumerate(partition.blocks):
        for j in block:
            u[j] = c[j] * v[b]
    return u


def project(partition: Partition, u: np.ndarray) -> np.ndarray:
    """Keep the representative component of each block."""
    u = np.asarray(u, dtype=float)
    if u.ndim != 2 or u.shape[0] != partition.n:
        raise SizeMismatchError(f"state shape {u.shape} != ({partition.n}, M)")
    return u[list(partition.representatives)].copy()


def reduced_residual(
    partition: Partition,
    coupling: CouplingSpec,
    beta: float,
    v: np.ndarray,
    op: SchrodingerOperator,
) -> np.ndarray:
    """Gradient of the reduced energy: the embedding adjoint applied to the
    full residual (chain rule), so Newton on it is the true reduced Newton."""
    u = embed(partition, coupling, beta, v)
    res = system_residual(SystemState(beta=beta, u=u), coupling, op)
    c = _ratio_vector(partition, coupling, beta)
    out = np.zeros((partition.size, op.size))
    for b, block in enumerate(partition.blocks):
        for j in block:
            out[b] += c[j] * res[j]
    return out


def reduced_pointwise_matrix(
    partition: Partition,
    coupling: CouplingSpec,
    beta: float,
    u: np.ndarray,
) -> tuple[np.ndarray, np.ndarray]:
    """(Q, s): compressed multiplication part Q_bb' = sum c_j c_k P_jk over
    the blocks, and the block weights s_b = sum_{j in b} c_j^2."""
    c = _ratio_vector(partition, coupling, beta)
    P = pointwise_hessian_matrix(SystemState(beta=beta, u=u), coupling)
    m = partition.size
    Q = np.zeros((m, m, u.shape[1]))
    s = np.zeros(m)
    for b, block in enumerate(partition.blocks):
        s[b] = float(np.sum(c[list(block)] ** 2))
        for b2, block2 in enumerate(partition.blocks):
            acc = np.zeros(u.shape[1])
            for j in block:
                for k in block2:
                    acc += c[j] * c[k] * P[j, k]
            Q[b, b2] = acc
    return Q, s


def reduced_hessian_spectrum(
    partition: Partition,
    coupling: CouplingSpec,
    beta: float,
    v: np.ndarray,
    op: SchrodingerOperator,
    count: int = 24,
    zero_tol: float | None = None,
    return_vectors: bool = False,
) -> HessianSpectrum:
    """Spectrum of the reduced Hessian in the pullback metric.

    The metric on block b is s_b times the weighted product, which makes the
    discrete-partition case agree exactly with the full Hessian spectrum.
    """
    v = np.atleast_2d(np.asarray(v, dtype=float))
    u = embed(partition, coupling, beta, v)
    Q, s = reduced_pointwise_matrix(partition, coupling, beta, u)
    zt = default_zero_tol(op) if zero_tol is None else zero_tol
    band = assemble_symmetric_banded(op, Q, block_scales=s)
    return banded_spectrum(
        band, count, zt, op, partition.size, return_vectors, block_scales=s
    )


def detect_partition(u: np.ndarray, grid: RadialGrid, tol: float = 1e-6) -> Partition:
    """Finest partition under which the state is synchronized.

    Two components share a block when the weighted standard deviation of their
    pointwise ratio is below tol relative to the mean ratio; the relation is
    closed transitively.  Diagnostic only.
    """
    u = np.asarray(u, dtype=float)
    if u.ndim != 2:
        raise SizeMismatchError("state must be an (n, M) array")
    n = u.shape[0]
    for j in range(n):
        if np.all(u[j] == 0.0):
            raise ZeroComponentError(f"component {j + 1} is identically zero")
    parent = list(range(n))

    def find(x):
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    for i in range(n):
        for j in range(i + 1, n):
            mask = u[i] != 0.0
            if np.any(~mask & (u[j] != 0.0)):
                continue
            ratio = u[j][mask] / u[i][mask]
            wts = grid.weights[mask]
            mean = float(np.dot(wts, ratio) / wts.sum())
            var = float(np.dot(wts, (ratio - mean) ** 2) / wts.sum())
            if mean != 0.0 and np.sqrt(max(var, 0.0)) <= tol * abs(mean):
                parent[find(i)] = find(j)
    groups: dict[int, list[int]] = {}
    for j in range(n):
        groups.setdefault(find(j), []).append(j)
    return Partition.of(list(groups.values()), n)
