import numpy as np
import pytest

import lockbif as lb
from lockbif.errors import NonpositiveOperatorError, PositivityLostError


def test_ground_state_reference(ground800):
    gs = ground800
    assert np.all(gs.w > 0)
    # single bump: strictly rising before the max, strictly falling after
    # (the max is a two-node plateau on even grids)
    d = np.diff(gs.w)
    i = int(np.argmax(gs.w))
    assert np.all(d[:i] > 0)
    assert np.all(d[i + 1 :] < 0)
    # float64 floor of ||Aw - w^3||_w at M=800 sits near 1.3e-11 (the iterate
    # is within one ulp of the discrete root); the solver converges to it
    assert gs.residual_norm <= 2e-11
    assert gs.newton_iterations <= 20


def test_ground_state_grid_self_consistency():
    dom = lb.DomainSpec(kind="interval", dimension=1, r_inner=0.0, r_outer=np.pi)
    pot = lb.PotentialSpec(kind="constant", value=1.0)
    ws = {}
    for M in (199, 399, 799):
        op = lb.assemble_operator(lb.build_grid(dom, M), pot)
        ws[M] = lb.solve_ground_state(op).w
    # nested nodes: coarse node i sits at fine node 2i+1
    e1 = np.max(np.abs(ws[199] - ws[399][1::2]))
    e2 = np.max(np.abs(ws[399] - ws[799][1::2]))
    assert e1 / e2 == pytest.approx(4.0, rel=0.2)


def test_ground_state_rejects_nonpositive():
    dom = lb.DomainSpec(kind="interval", dimension=1, r_inner=0.0, r_outer=np.pi)
    op = lb.assemble_operator(
        lb.build_grid(dom, 64), lb.PotentialSpec(kind="constant", value=-10.0)
    )
    with pytest.raises(NonpositiveOperatorError):
        lb.solve_ground_state(op)


def test_scalar_residual_identities(op800, ground800):
    w = ground800.w
    grid = op800.grid
    res = lb.scalar_residual(op800, w)
    assert np.sqrt(lb.weighted_inner(grid, res, res)) <= 2e-11
    assert np.all(lb.scalar_residual(op800, np.zeros(800)) == 0.0)
    # cubic scaling: residual of 2w is 2(Aw - w^3) - 6w^3 = 2 res - 6 w^3
    res2 = lb.scalar_residual(op800, 2.0 * w)
    assert np.allclose(res2, 2.0 * res - 6.0 * w**3, atol=1e-9)
    gap = res2 + 6.0 * w**3
    assert np.sqrt(lb.weighted_inner(grid, gap, gap)) < 1e-9


def test_first_weighted_eigenpair_is_exact(op800, ground800, spectrum800):
    spec = spectrum800
    assert abs(spec.eigenvalues[0] - 1.0) <= 1e-9
    psi1 = spec.bases[0][0]
    w = ground800.w
    grid = op800.grid
    cos = abs(lb.weighted_inner(grid, psi1, w)) / (
        lb.weighted_norm(grid, psi1) * lb.weighted_norm(grid, w)
    )
    angle = np.sqrt(max(0.0, 2.0 * (1.0 - min(1.0, cos))))
    assert angle < 1e-6


def test_weighted_spectrum_simple_increasing(spectrum800, ground800):
    spec = spectrum800
    assert spec.count == 8
    assert np.all(np.diff(spec.eigenvalues) > 0)
    assert np.all(spec.multiplicities == 1)
    assert ground800.nondegenerate is True
    assert not spec.degenerate


def test_weighted_spectrum_orthonormality(op800, ground800, spectrum800):
    grid = op800.grid
    w2 = ground800.w**2
    vecs = [b[0] for b in spectrum800.bases]
    for i, vi in enumerate(vecs):
        for j, vj in enumerate(vecs):
            val = lb.weighted_inner(grid, w2 * vi, vj)
            assert abs(val - (1.0 if i == j else 0.0)) < 1e-10


def test_weighted_spectrum_eigen_residuals(op800, ground800, spectrum800):
    grid = op800.grid
    w2 = ground800.w**2
    for lam, basis in zip(spectrum800.eigenvalues, spectrum800.bases):
        for psi in basis:
            res = op800.apply(psi) - lam * w2 * psi
            rel = lb.weighted_norm(grid, res) / lb.weighted_norm(grid, psi)
            assert rel < 1e-8 * max(1.0, lam)


def test_ball_radial_ground_state_and_spectrum():
    dom = lb.DomainSpec(kind="ball", dimension=3, r_inner=0.0, r_outer=1.0)
    grid = lb.build_grid(dom, 300)
    op = lb.assemble_operator(grid, lb.PotentialSpec(kind="constant", value=1.0))
    gs = lb.solve_ground_state(op)
    assert np.all(gs.w > 0)
    spec = lb.weighted_spectrum(op, gs, kmax=4)
    assert abs(spec.eigenvalues[0] - 1.0) <= 1e-9
    assert spec.multiplicities[0] == 1
    assert np.all(np.diff(spec.eigenvalues) > 0)


def test_kmax_validation(op800, ground800):
    with pytest.raises(ValueError):
        lb.weighted_spectrum(op800, ground800, kmax=1)


def test_spectrum_requires_positive_state(op800, ground800):
    bad = lb.GroundState(
        w=-ground800.w, residual_norm=0.0, newton_iterations=0
    )
    with pytest.raises(PositivityLostError):
        lb.weighted_spectrum(op800, bad, kmax=2)
