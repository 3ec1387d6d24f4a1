"""Radial discretization of -Laplace + a(x) with Dirichlet conditions.

Domains are radially symmetric (interval, ball, annulus, or a Dirichlet
truncation of R^N with a confining potential), reduced to a one-dimensional
problem on the radius.  The discrete operator uses the conservative flux form

    (A u)_i = -(c_{i+1/2} (u_{i+1}-u_i) - c_{i-1/2} (u_i-u_{i-1})) / (r_i^{N-1} h^2)
              + a(r_i) u_i,       c_e = r_e^{N-1},

which agrees with the central-difference stencil for the radial Laplacian up
to O(h^2) (exactly for N=1,2) and, unlike the non-conservative stencil, is
*exactly* self-adjoint in the weighted inner product <u,v> = sum_i w_i u_i v_i
with w_i = r_i^{N-1} h.  For balls and truncated spaces the inner edge carries
zero flux, which encodes the regularity condition u'(0)=0; all other artificial
boundaries are homogeneous Dirichlet.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property

import numpy as np
import scipy.linalg as sla

from .errors import (
    InvalidDomainError,
    NonpositiveOperatorError,
    SizeMismatchError,
    TooFewPointsError,
)

DOMAIN_KINDS = ("interval", "ball", "annulus", "truncated-space")
POTENTIAL_KINDS = ("constant", "harmonic", "tabulated")

#: Domains whose inner boundary is the regular origin rather than Dirichlet.
_REGULAR_ORIGIN = ("ball", "truncated-space")

MIN_GRID_POINTS = 16


@dataclass(frozen=True)
class DomainSpec:
    """Radially symmetric domain: kind, dimension and radii."""

    kind: str
    dimension: int = 1
    r_inner: float = 0.0
    r_outer: float = 1.0

    def __post_init__(self):
        if self.kind not in DOMAIN_KINDS:
            raise InvalidDomainError(f"unknown domain kind {self.kind!r}")
        if self.dimension not in (1, 2, 3):
            raise InvalidDomainError("dimension must be 1, 2 or 3")
        if self.kind == "interval" and self.dimension != 1:
            raise InvalidDomainError("interval domains are one-dimensional")
        if self.kind in _REGULAR_ORIGIN and self.r_inner != 0.0:
            raise InvalidDomainError(f"{self.kind} requires inner radius 0")
        if self.r_inner < 0.0:
            raise InvalidDomainError("inner radius must be >= 0")
        if not self.r_outer > self.r_inner:
            raise InvalidDomainError("outer radius must exceed inner radius")

    @property
    def regular_origin(self) -> bool:
        return self.kind in _REGULAR_ORIGIN


@dataclass(frozen=True, eq=False)
class PotentialSpec:
    """Radial potential a(r): constant, harmonic scale*r^2, or tabulated."""

    kind: str
    value: float = 0.0
    scale: float = 1.0
    table: np.ndarray | None = None

    def __post_init__(self):
        if self.kind not in POTENTIAL_KINDS:
            raise InvalidDomainError(f"unknown potential kind {self.kind!r}")
        if self.kind == "harmonic" and not self.scale > 0:
            raise InvalidDomainError("harmonic potential needs scale > 0")
        if self.kind == "tabulated":
            if self.table is None:
                raise InvalidDomainError("tabulated potential needs a table")
            tab = np.asarray(self.table, dtype=float)
            if not np.all(np.isfinite(tab)):
                raise InvalidDomainError("tabulated potential has non-finite values")
            object.__setattr__(self, "table", tab)

    @property
    def unbounded(self) -> bool:
        """True when a(r) -> infinity as r grows (confining potential)."""
        return self.kind == "harmonic"

    def values(self, r: np.ndarray) -> np.ndarray:
        if self.kind == "constant":
            return np.full_like(r, self.value)
        if self.kind == "harmonic":
            return self.scale * r**2
        if len(self.table) != len(r):
            raise SizeMismatchError(
                f"potential table has {len(self.table)} entries, grid has {len(r)}"
            )
        return self.table


def default_truncation_radius(scale: float) -> float:
    """Default outer radius for truncated-space runs with a(r)=scale*r^2.

    The confined states live on the oscillator length scale^(-1/4); eight of
    those lengths put the Dirichlet wall far into the exponential tail.
    """
    return 8.0 * scale ** (-0.25)


@dataclass(frozen=True, eq=False)
class RadialGrid:
    """Uniform interior nodes of (r_inner, r_outer) with radial weights."""

    domain: DomainSpec
    nodes: np.ndarray
    h: float
    weights: np.ndarray

    @property
    def size(self) -> int:
        return len(self.nodes)

    @property
    def dimension(self) -> int:
        return self.domain.dimension

    def check_field(self, u: np.ndarray) -> np.ndarray:
        u = np.asarray(u, dtype=float)
        if u.shape != (self.size,):
            raise SizeMismatchError(f"field shape {u.shape} != ({self.size},)")
        return u


def build_grid(domain: DomainSpec, points: int) -> RadialGrid:
    """Uniform grid of `points` interior nodes; Dirichlet endpoints excluded."""
    if points < MIN_GRID_POINTS:
        raise TooFewPointsError(f"need at least {MIN_GRID_POINTS} points, got {points}")
    h = (domain.r_outer - domain.r_inner) / (points + 1)
    nodes = domain.r_inner + h * np.arange(1, points + 1)
    weights = nodes ** (domain.dimension - 1) * h
    return RadialGrid(domain=domain, nodes=nodes, h=h, weights=weights)


def weighted_inner(grid: RadialGrid, u: np.ndarray, v: np.ndarray) -> float:
    """Discrete radial L2 product sum_i w_i u_i v_i."""
    u = grid.check_field(u)
    v = grid.check_field(v)
    return float(np.dot(grid.weights * u, v))


def weighted_norm(grid: RadialGrid, u: np.ndarray) -> float:
    return np.sqrt(max(0.0, weighted_inner(grid, u, u)))


def tail_mass_fraction(grid: RadialGrid, u: np.ndarray) -> float:
    """Weighted mass fraction on the outer 10% of the grid.

    Truncation diagnostic for truncated-space runs: values above ~1e-6 mean
    the Dirichlet wall is biting into the state.
    """
    u = grid.check_field(u)
    cut = int(np.ceil(0.9 * grid.size))
    total = np.dot(grid.weights, u**2)
    if total == 0.0:
        return 0.0
    return float(np.dot(grid.weights[cut:], u[cut:] ** 2) / total)


@dataclass(frozen=True, eq=False)
class SchrodingerOperator:
    """Discrete -Laplace + a(r), self-adjoint in the weighted product.

    ``edge_coeffs`` holds c_e = r_e^{N-1} on the M+1 cell edges (the inner one
    zeroed for regular-origin domains).  The operator is applied in flux form,
    which keeps the evaluation noise at the level of the underlying second
    differences instead of eps/h^2.
    """

    grid: RadialGrid
    potential: PotentialSpec
    potential_values: np.ndarray
    edge_coeffs: np.ndarray

    @property
    def size(self) -> int:
        return self.grid.size

    def apply(self, u: np.ndarray) -> np.ndarray:
        u = self.grid.check_field(u)
        c, h = self.edge_coeffs, self.grid.h
        flux = np.empty(self.size + 1)
        flux[1:-1] = c[1:-1] * np.diff(u)
        flux[0] = c[0] * u[0]
        flux[-1] = -c[-1] * u[-1]
        rpow = self.grid.nodes ** (self.grid.dimension - 1)
        return -(flux[1:] - flux[:-1]) / (h * h * rpow) + self.potential_values * u

    @cached_property
    def _plain_bands(self) -> np.ndarray:
        """Rows (super, diag, sub) of the plain matrix for solve_banded."""
        c, h, w = self.edge_coeffs, self.grid.h, self.grid.weights
        off = -c[1:-1] / h
        ab = np.zeros((3, self.size))
        ab[1] = (c[:-1] + c[1:]) / h / w + self.potential_values
        ab[0, 1:] = off / w[:-1]
        ab[2, :-1] = off / w[1:]
        return ab

    def plain_bands(self) -> np.ndarray:
        return self._plain_bands.copy()

    @cached_property
    def symmetric_tridiagonal(self) -> tuple[np.ndarray, np.ndarray]:
        """(diag, offdiag) of W^(1/2) A W^(-1/2), a standard symmetric matrix."""
        c, h, w = self.edge_coeffs, self.grid.h, self.grid.weights
        d = (c[:-1] + c[1:]) / h / w + self.potential_values
        e = (-c[1:-1] / h) / np.sqrt(w[:-1] * w[1:])
        return d, e

    def stiffness_dense(self) -> np.ndarray:
        """Dense W*A (symmetric, positive when the operator is positive)."""
        c, h, w = self.edge_coeffs, self.grid.h, self.grid.weights
        T = np.zeros((self.size, self.size))
        idx = np.arange(self.size)
        T[idx, idx] = (c[:-1] + c[1:]) / h + w * self.potential_values
        off = -c[1:-1] / h
        T[idx[:-1], idx[:-1] + 1] = off
        T[idx[:-1] + 1, idx[:-1]] = off
        return T

    @cached_property
    def smallest_eigenvalue(self) -> float:
        d, e = self.symmetric_tridiagonal
        try:
            _, vecs = sla.eigh_tridiagonal(d, e, select="i", select_range=(0, 0))
        except (sla.LinAlgError, ValueError) as exc:  # pragma: no cover
            from .errors import EigensolverError

            raise EigensolverError(f"tridiagonal eigensolver failed: {exc}") from exc
        # Rayleigh-quotient polish: squares the O(eps*||A||) solver error
        v = vecs[:, 0] / np.sqrt(self.grid.weights)
        num = float(np.dot(self.grid.weights * self.apply(v), v))
        den = float(np.dot(self.grid.weights * v, v))
        return num / den

    def require_positive(self) -> None:
        if self.smallest_eigenvalue <= 0.0:
            raise NonpositiveOperatorError(
                f"operator not positive (smallest eigenvalue "
                f"{self.smallest_eigenvalue:.6g}); adjust the potential"
            )


def assemble_operator(grid: RadialGrid, potential: PotentialSpec) -> SchrodingerOperator:
    """Assemble the flux-form operator on the grid.

    Positivity is not checked eagerly; downstream constructions gate on
    ``require_positive`` so that the smallest eigenvalue stays observable.
    """
    dom = grid.domain
    if dom.kind == "truncated-space" and not potential.unbounded:
        raise InvalidDomainError(
            "truncated-space domains need a potential unbounded at infinity"
        )
    edges = dom.r_inner + grid.h * (np.arange(grid.size + 1) + 0.5)
    c = edges ** (dom.dimension - 1)
    if dom.regular_origin:
        c = c.copy()
        c[0] = 0.0  # zero inner flux: u'(0)=0 regularity closure
    vals = potential.values(grid.nodes)
    return SchrodingerOperator(
        grid=grid, potential=potential, potential_values=vals, edge_coeffs=c
    )


def operator_smallest_eigenvalue(op: SchrodingerOperator) -> float:
    """Smallest eigenvalue of the weighted-symmetric operator (positivity gate)."""
    return op.smallest_eigenvalue
