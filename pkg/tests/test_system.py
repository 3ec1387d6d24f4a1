import numpy as np
import pytest

import lockbif as lb
from lockbif.errors import AtBifurcationError, SizeMismatchError


def smooth_fields(grid, n, seed, amp=1.0):
    rng = np.random.default_rng(seed)
    r = grid.nodes
    span = r[-1] - r[0]
    out = np.zeros((n, grid.size))
    for j in range(n):
        for k, c in enumerate(rng.normal(0.0, amp / 4, 4)):
            out[j] += c * np.sin((k + 1) * np.pi * (r - r[0]) / span)
    return out


def test_energy_zero_state(op800, coupling2):
    state = lb.SystemState(beta=-0.3, u=np.zeros((2, 800)))
    assert lb.energy(state, coupling2, op800) == 0.0


def test_energy_scalar_identity(op800, ground800):
    # with u = (w, 0) and mu_1 = 1 the energy reduces to the scalar value
    # 1/2 ||w||_E^2 - 1/4 ||w||_L4^4 = 1/4 ||w||_E^2 (multiply the scalar
    # equation by w and integrate)
    coup = lb.CouplingSpec(mu=np.array([1.0, 2.0]))
    w = ground800.w
    state = lb.SystemState(beta=0.7, u=np.vstack([w, np.zeros(800)]))
    e = lb.energy(state, coup, op800)
    normE2 = lb.weighted_inner(op800.grid, op800.apply(w), w)
    assert e == pytest.approx(0.25 * normE2, rel=1e-10)


def test_energy_gradient_consistency(op800, coupling2):
    grid = op800.grid
    u = 0.5 + smooth_fields(grid, 2, seed=3, amp=0.5)
    state = lb.SystemState(beta=-0.4, u=u)
    res = lb.system_residual(state, coupling2, op800)
    phi = smooth_fields(grid, 2, seed=4)
    pairing = sum(lb.weighted_inner(grid, res[j], phi[j]) for j in range(2))
    errs = []
    for eps in (2e-3, 1e-3):  # large enough that eps^2 truncation beats roundoff
        ep = lb.energy(lb.SystemState(beta=-0.4, u=u + eps * phi), coupling2, op800)
        em = lb.energy(lb.SystemState(beta=-0.4, u=u - eps * phi), coupling2, op800)
        errs.append(abs((ep - em) / (2 * eps) - pairing))
    assert errs[0] / errs[1] == pytest.approx(4.0, rel=0.3)
    assert errs[1] < 1e-4 * max(1.0, abs(pairing))


def test_system_residual_locked_and_zero(op800, ground800, coupling3, snorm):
    u = lb.locked_solution(ground800, coupling3, -0.3)
    assert snorm(op800.grid, lb.system_residual(lb.SystemState(beta=-0.3, u=u), coupling3, op800)) <= 1e-10
    z = np.zeros((3, 800))
    assert np.all(lb.system_residual(lb.SystemState(beta=-0.3, u=z), coupling3, op800) == 0.0)
    with pytest.raises(SizeMismatchError):
        lb.system_residual(lb.SystemState(beta=0.0, u=np.zeros((2, 10))), coupling3, op800)


def test_residual_beta_zero_decoupled(op800, ground800, coupling2, snorm):
    u = np.vstack([ground800.w / np.sqrt(m) for m in coupling2.mu])
    res = lb.system_residual(lb.SystemState(beta=0.0, u=u), coupling2, op800)
    assert snorm(op800.grid, res) <= 1e-10


def test_hessian_symmetry(op800, coupling2):
    grid = op800.grid
    u = 0.4 + smooth_fields(grid, 2, seed=5, amp=0.3)
    state = lb.SystemState(beta=-0.5, u=u)
    phi = smooth_fields(grid, 2, seed=6)
    psi = smooth_fields(grid, 2, seed=7)
    hphi = lb.hessian_apply(state, coupling2, op800, phi)
    hpsi = lb.hessian_apply(state, coupling2, op800, psi)
    lhs = sum(lb.weighted_inner(grid, hphi[j], psi[j]) for j in range(2))
    rhs = sum(lb.weighted_inner(grid, phi[j], hpsi[j]) for j in range(2))
    scale = np.linalg.norm(phi) * np.linalg.norm(psi)
    assert abs(lhs - rhs) <= 1e-11 * max(1.0, scale)


def test_hessian_locked_reduction(op800, ground800, coupling3, snorm):
    beta = -0.35
    u = lb.locked_solution(ground800, coupling3, beta)
    state = lb.SystemState(beta=beta, u=u)
    full, _ = lb.coupling_matrices(coupling3, beta)
    w2 = ground800.w**2
    phi = smooth_fields(op800.grid, 3, seed=8)
    hphi = lb.hessian_apply(state, coupling3, op800, phi)
    expect = np.array(
        [op800.apply(phi[j]) - w2 * sum(full[j, k] * phi[k] for k in range(3)) for j in range(3)]
    )
    assert snorm(op800.grid, hphi - expect) <= 1e-10 * max(1.0, float(np.max(np.abs(phi))))


def test_hessian_finite_difference_oracle(op800, coupling2, snorm):
    grid = op800.grid
    u = 0.5 + smooth_fields(grid, 2, seed=9, amp=0.4)
    phi = smooth_fields(grid, 2, seed=10)
    state = lb.SystemState(beta=-0.6, u=u)
    hphi = lb.hessian_apply(state, coupling2, op800, phi)
    errs = []
    for eps in (2e-3, 1e-3):  # truncation-dominated regime
        rp = lb.system_residual(lb.SystemState(beta=-0.6, u=u + eps * phi), coupling2, op800)
        rm = lb.system_residual(lb.SystemState(beta=-0.6, u=u - eps * phi), coupling2, op800)
        errs.append(snorm(grid, (rp - rm) / (2 * eps) - hphi))
    assert errs[0] / errs[1] == pytest.approx(4.0, rel=0.3)


def test_kernel_dimension_at_bifurcations(op800, ground800, coupling2, points2):
    for pt in points2[:3]:
        u = lb.locked_solution(ground800, coupling2, pt.beta)
        spec = lb.hessian_spectrum(
            lb.SystemState(beta=pt.beta, u=u), coupling2, op800, count=20, zero_tol=1e-7
        )
        assert spec.kernel_dim == pt.kernel_dim


def test_kernel_zero_between_bifurcations(op800, ground800, coupling2, points2):
    mid = 0.5 * (points2[0].beta + points2[1].beta)
    u = lb.locked_solution(ground800, coupling2, mid)
    spec = lb.hessian_spectrum(
        lb.SystemState(beta=mid, u=u), coupling2, op800, count=20, zero_tol=1e-7
    )
    assert spec.kernel_dim == 0


def test_morse_jump(op800, ground800, coupling2, spectrum800, points2):
    bb = lb.coupling_lower_limit(coupling2)
    eps = 1e-3 * (coupling2.mu_min - bb)
    pt = points2[0]
    sides = []
    for beta in (pt.beta - eps, pt.beta + eps):
        u = lb.locked_solution(ground800, coupling2, beta)
        spec = lb.hessian_spectrum(
            lb.SystemState(beta=beta, u=u), coupling2, op800, count=20, zero_tol=1e-7
        )
        sides.append(spec.morse_index)
    assert sides[0] - sides[1] == pt.kernel_dim


def test_morse_formula_beta_zero(coupling3, spectrum800):
    below3 = int(spectrum800.multiplicities[spectrum800.eigenvalues < 3.0].sum())
    assert lb.locked_morse_index(coupling3, 0.0, spectrum800) == 3 * below3


def test_morse_formula_matches_direct(op800, ground800, coupling2, spectrum800, points2):
    rng = np.random.default_rng(12)
    # the formula is certified only while the transverse eigenvalue stays
    # inside the computed spectrum
    floor = lb.coupling_for_eigenvalue(coupling2, 0.9 * float(spectrum800.eigenvalues[-1]))
    tried = 0
    for beta in rng.uniform(floor, coupling2.mu_min - 0.02, 20):
        beta = float(beta)
        if any(abs(beta - p.beta) < 5e-3 for p in points2):
            continue
        tried += 1
        formula = lb.locked_morse_index(coupling2, beta, spectrum800)
        u = lb.locked_solution(ground800, coupling2, beta)
        direct = lb.hessian_spectrum(
            lb.SystemState(beta=beta, u=u), coupling2, op800,
            count=formula + 8, zero_tol=1e-7,
        ).morse_index
        assert formula == direct
    assert tried >= 10


def test_morse_formula_at_bifurcation_raises(coupling2, spectrum800, points2):
    with pytest.raises(AtBifurcationError):
        lb.locked_morse_index(coupling2, points2[0].beta, spectrum800)


def test_kernel_basis_properties(op800, ground800, coupling3, spectrum800, points3, snorm):
    grid = op800.grid
    pt = points3[0]
    basis = spectrum800.bases[pt.order - 1]
    kb = lb.bifurcation_kernel_basis(coupling3, pt.beta, basis, grid)
    assert kb.shape == (pt.kernel_dim, 3, 800)
    gamma, _ = lb.lock_coefficients(coupling3, pt.beta)
    u = lb.locked_solution(ground800, coupling3, pt.beta)
    state = lb.SystemState(beta=pt.beta, u=u)
    for el in kb:
        # pointwise orthogonality to the synchronized direction
        combo = np.tensordot(gamma, el, axes=(0, 0))
        assert np.max(np.abs(combo)) <= 1e-12 * max(1.0, float(np.max(np.abs(el))))
        # numerical kernel membership
        h = lb.hessian_apply(state, coupling3, op800, el)
        assert snorm(grid, h) <= 1e-8
    # orthonormal in the blockwise weighted product
    for i in range(len(kb)):
        for j in range(len(kb)):
            val = sum(lb.weighted_inner(grid, kb[i][c], kb[j][c]) for c in range(3))
            assert abs(val - (1.0 if i == j else 0.0)) <= 1e-10


def test_kernel_basis_spans_numeric_kernel(op800, ground800, coupling3, spectrum800, points3):
    grid = op800.grid
    pt = points3[0]
    u = lb.locked_solution(ground800, coupling3, pt.beta)
    spec = lb.hessian_spectrum(
        lb.SystemState(beta=pt.beta, u=u), coupling3, op800,
        count=12, zero_tol=1e-7, return_vectors=True,
    )
    assert spec.kernel_dim == pt.kernel_dim
    scale = float(np.abs(spec.eigenvalues).max())
    mask = np.abs(spec.eigenvalues) <= spec.zero_tol * scale
    numeric = spec.vectors[mask]
    kb = lb.bifurcation_kernel_basis(coupling3, pt.beta, spectrum800.bases[pt.order - 1], grid)

    # principal angles via the weighted Gram structure
    def flat(vs):
        cols = []
        for v in vs:
            x = (v * grid.weights**0.5).reshape(-1)
            cols.append(x / np.linalg.norm(x))
        return np.array(cols).T

    qa, _ = np.linalg.qr(flat(numeric))
    qb, _ = np.linalg.qr(flat(kb))
    sv = np.linalg.svd(qa.T @ qb, compute_uv=False)
    angles = np.arccos(np.clip(sv, -1.0, 1.0))
    assert np.max(angles) < 1e-4
