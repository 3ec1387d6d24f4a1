import numpy as np
import pytest
import scipy.linalg as sla

import lockbif as lb
from lockbif.errors import (
    InvalidDomainError,
    NonpositiveOperatorError,
    SizeMismatchError,
    TooFewPointsError,
)


def test_grid_interval_nodes():
    dom = lb.DomainSpec(kind="interval", dimension=1, r_inner=0.0, r_outer=np.pi)
    grid = lb.build_grid(dom, 16)
    assert grid.h == pytest.approx(np.pi / 17)
    assert np.allclose(grid.nodes, np.pi / 17 * np.arange(1, 17))
    assert np.allclose(grid.weights, grid.h)
    # the spacing/node formulas at the documented 3-point desk case
    # (the builder itself enforces the 16-point minimum)
    h = np.pi / 4
    nodes = h * np.arange(1, 4)
    assert np.allclose(nodes, [np.pi / 4, np.pi / 2, 3 * np.pi / 4])


def test_grid_ball_weights():
    dom = lb.DomainSpec(kind="ball", dimension=3, r_inner=0.0, r_outer=1.0)
    grid = lb.build_grid(dom, 19)
    assert grid.h == pytest.approx(0.05)
    assert np.allclose(grid.weights, grid.nodes**2 * 0.05)
    # the documented M=4 case, checked via the defining formulas
    h = 1.0 / 5
    nodes = h * np.arange(1, 5)
    assert np.allclose(nodes, [0.2, 0.4, 0.6, 0.8])
    assert np.allclose(nodes**2 * h, nodes**2 * 0.2)


def test_grid_annulus():
    dom = lb.DomainSpec(kind="annulus", dimension=2, r_inner=1.0, r_outer=2.0)
    grid = lb.build_grid(dom, 99)
    assert grid.size == 99
    assert grid.h == pytest.approx(0.01)
    assert np.allclose(grid.weights, grid.nodes * 0.01)


def test_domain_validation():
    with pytest.raises(InvalidDomainError):
        lb.DomainSpec(kind="interval", dimension=1, r_inner=2.0, r_outer=1.0)
    with pytest.raises(InvalidDomainError):
        lb.DomainSpec(kind="interval", dimension=2, r_inner=0.0, r_outer=1.0)
    with pytest.raises(InvalidDomainError):
        lb.DomainSpec(kind="ball", dimension=3, r_inner=0.5, r_outer=1.0)
    with pytest.raises(InvalidDomainError):
        lb.DomainSpec(kind="pretzel", dimension=2, r_inner=0.0, r_outer=1.0)
    with pytest.raises(TooFewPointsError):
        lb.build_grid(
            lb.DomainSpec(kind="interval", dimension=1, r_inner=0.0, r_outer=1.0), 15
        )


def test_truncated_space_requires_confinement():
    dom = lb.DomainSpec(kind="truncated-space", dimension=2, r_inner=0.0, r_outer=8.0)
    grid = lb.build_grid(dom, 64)
    with pytest.raises(InvalidDomainError):
        lb.assemble_operator(grid, lb.PotentialSpec(kind="constant", value=1.0))
    op = lb.assemble_operator(grid, lb.PotentialSpec(kind="harmonic", scale=1.0))
    assert lb.operator_smallest_eigenvalue(op) > 0


def test_default_truncation_radius():
    from lockbif.radial import default_truncation_radius

    assert default_truncation_radius(1.0) == pytest.approx(8.0)
    assert default_truncation_radius(16.0) == pytest.approx(4.0)


def test_fd_laplacian_closed_form():
    dom = lb.DomainSpec(kind="interval", dimension=1, r_inner=0.0, r_outer=np.pi)
    op = lb.assemble_operator(
        lb.build_grid(dom, 799), lb.PotentialSpec(kind="constant", value=0.0)
    )
    h = op.grid.h
    exact = 4.0 / h**2 * np.sin(h / 2) ** 2
    assert abs(lb.operator_smallest_eigenvalue(op) - exact) < 1e-12


def test_constant_potential_shifts_spectrum():
    dom = lb.DomainSpec(kind="interval", dimension=1, r_inner=0.0, r_outer=np.pi)
    grid = lb.build_grid(dom, 200)
    op0 = lb.assemble_operator(grid, lb.PotentialSpec(kind="constant", value=0.0))
    op1 = lb.assemble_operator(grid, lb.PotentialSpec(kind="constant", value=1.0))
    d0, e0 = op0.symmetric_tridiagonal
    d1, e1 = op1.symmetric_tridiagonal
    v0 = sla.eigh_tridiagonal(d0, e0, eigvals_only=True)
    v1 = sla.eigh_tridiagonal(d1, e1, eigvals_only=True)
    assert np.max(np.abs(v1 - (v0 + 1.0))) < 1e-10


def test_ball_operator_annihilates_constants_interior():
    dom = lb.DomainSpec(kind="ball", dimension=3, r_inner=0.0, r_outer=1.0)
    op = lb.assemble_operator(
        lb.build_grid(dom, 50), lb.PotentialSpec(kind="constant", value=1.0)
    )
    out = op.apply(np.ones(50))
    # zero inner flux keeps the origin row exact too; only the Dirichlet row
    # at the outer wall deviates
    assert np.max(np.abs(out[:-1] - 1.0)) < 1e-12
    assert out[-1] > 1.0


def test_weighted_inner_examples(grid800):
    dom = lb.DomainSpec(kind="interval", dimension=1, r_inner=0.0, r_outer=np.pi)
    grid = lb.build_grid(dom, 16)
    ones = np.ones(16)
    assert lb.weighted_inner(grid, ones, ones) == pytest.approx(16 * grid.h)
    assert lb.weighted_inner(grid, ones, np.zeros(16)) == 0.0
    with pytest.raises(SizeMismatchError):
        lb.weighted_inner(grid, ones, np.ones(17))
    # int_0^pi sin^2 = pi/2, midpoint-rule accurate to O(h^2)
    s = np.sin(grid800.nodes)
    assert lb.weighted_inner(grid800, s, s) == pytest.approx(np.pi / 2, abs=1e-5)


def test_shifted_operator_smallest_eigenvalue():
    dom = lb.DomainSpec(kind="interval", dimension=1, r_inner=0.0, r_outer=np.pi)
    grid = lb.build_grid(dom, 400)
    op = lb.assemble_operator(grid, lb.PotentialSpec(kind="constant", value=1.0))
    h = grid.h
    exact = 1.0 + 4.0 / h**2 * np.sin(h / 2) ** 2
    assert lb.operator_smallest_eigenvalue(op) == pytest.approx(exact, abs=1e-11)


def test_nonpositive_operator_gated():
    dom = lb.DomainSpec(kind="interval", dimension=1, r_inner=0.0, r_outer=np.pi)
    op = lb.assemble_operator(
        lb.build_grid(dom, 64), lb.PotentialSpec(kind="constant", value=-10.0)
    )
    assert lb.operator_smallest_eigenvalue(op) < 0
    with pytest.raises(NonpositiveOperatorError):
        op.require_positive()
    with pytest.raises(NonpositiveOperatorError):
        lb.solve_ground_state(op)


def test_operator_symmetry(op800):
    rng = np.random.default_rng(0)
    grid = op800.grid
    for _ in range(5):
        u = rng.standard_normal(800)
        v = rng.standard_normal(800)
        lhs = lb.weighted_inner(grid, op800.apply(u), v)
        rhs = lb.weighted_inner(grid, u, op800.apply(v))
        assert abs(lhs - rhs) <= 1e-12 * np.linalg.norm(u) * np.linalg.norm(v)


@pytest.mark.parametrize("kind,N", [("ball", 2), ("ball", 3), ("annulus", 2)])
def test_operator_symmetry_radial(kind, N):
    r0 = 0.0 if kind == "ball" else 0.5
    dom = lb.DomainSpec(kind=kind, dimension=N, r_inner=r0, r_outer=2.0)
    grid = lb.build_grid(dom, 120)
    op = lb.assemble_operator(grid, lb.PotentialSpec(kind="constant", value=1.0))
    rng = np.random.default_rng(1)
    u = rng.standard_normal(120)
    v = rng.standard_normal(120)
    lhs = lb.weighted_inner(grid, op.apply(u), v)
    rhs = lb.weighted_inner(grid, u, op.apply(v))
    assert abs(lhs - rhs) <= 1e-12 * np.linalg.norm(u) * np.linalg.norm(v)


def test_interval_eigenvalue_second_order():
    errs = []
    for M in (199, 399):
        dom = lb.DomainSpec(kind="interval", dimension=1, r_inner=0.0, r_outer=np.pi)
        op = lb.assemble_operator(
            lb.build_grid(dom, M), lb.PotentialSpec(kind="constant", value=0.0)
        )
        d, e = op.symmetric_tridiagonal
        vals = sla.eigh_tridiagonal(
            d, e, select="i", select_range=(0, 4), eigvals_only=True
        )
        errs.append(np.max(np.abs(vals - np.arange(1, 6) ** 2)))
    ratio = errs[0] / errs[1]
    assert abs(ratio - 4.0) < 0.8


def test_tail_mass_diagnostic():
    dom = lb.DomainSpec(kind="truncated-space", dimension=2, r_inner=0.0, r_outer=8.0)
    grid = lb.build_grid(dom, 400)
    op = lb.assemble_operator(grid, lb.PotentialSpec(kind="harmonic", scale=1.0))
    gs = lb.solve_ground_state(op)
    assert lb.tail_mass_fraction(grid, gs.w) < 1e-6
    # a flat field has mass in the tail
    assert lb.tail_mass_fraction(grid, np.ones(400)) > 0.05
