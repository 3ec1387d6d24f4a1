"""Bifurcation structure of locked states in coupled cubic Schrodinger systems.

The library discretizes -Laplace + a(x) on radially symmetric domains, solves
the scalar ground state, builds the fully synchronized (locked) solution
branch in closed form, locates its bifurcation points from the weighted
linearization spectrum, verifies kernel-dimension and Morse-index counts, and
follows the partially synchronized branches by pseudo-arclength continuation.
"""

from .continuation import (
    Branch,
    BranchOrigin,
    BranchPlan,
    BranchPoint,
    ContinuationOpts,
    Predictor,
    branch_separation,
    branch_switch_predictor,
    continue_branch,
    distance_to_locked,
    extrapolate_origin,
    locked_start_predictor,
    plan_bifurcations,
    sample_locked_branch,
)
from .locked import (
    BifurcationPoint,
    CouplingEigenbasis,
    CouplingSpec,
    LockedBranchDomain,
    amplitude_scale,
    bifurcation_points,
    coupling_eigenbasis,
    coupling_for_eigenvalue,
    coupling_lower_limit,
    coupling_matrices,
    lock_coefficients,
    locked_family_equal_mu,
    locked_solution,
    transverse_eigenvalue,
)
from .partitions import (
    Partition,
    ReducedState,
    detect_partition,
    embed,
    enumerate_pair_partitions,
    lock_ratio,
    project,
    reduced_hessian_spectrum,
    reduced_residual,
    residual_transfer_defect,
)
from .radial import (
    DomainSpec,
    PotentialSpec,
    RadialGrid,
    SchrodingerOperator,
    assemble_operator,
    build_grid,
    operator_smallest_eigenvalue,
    tail_mass_fraction,
    weighted_inner,
    weighted_norm,
)
from .scalar import (
    GroundState,
    SolverOptions,
    WeightedSpectrum,
    scalar_residual,
    solve_ground_state,
    weighted_spectrum,
)
from .system import (
    HessianSpectrum,
    SystemState,
    bifurcation_kernel_basis,
    energy,
    hessian_apply,
    hessian_spectrum,
    locked_morse_index,
    residual_norm,
    system_residual,
)

__version__ = "0.1.0"
