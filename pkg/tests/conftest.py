"""Shared fixtures: the reference interval problem at M=800 is expensive
enough (dense generalized eigensolve) that the whole suite shares one copy."""
import numpy as np
import pytest

import lockbif as lb


@pytest.fixture(scope="session")
def interval_domain():
    return lb.DomainSpec(kind="interval", dimension=1, r_inner=0.0, r_outer=np.pi)


@pytest.fixture(scope="session")
def grid800(interval_domain):
    return lb.build_grid(interval_domain, 800)


@pytest.fixture(scope="session")
def op800(grid800):
    return lb.assemble_operator(grid800, lb.PotentialSpec(kind="constant", value=1.0))


@pytest.fixture(scope="session")
def ground800(op800):
    return lb.solve_ground_state(op800)


@pytest.fixture(scope="session")
def spectrum800(op800, ground800):
    return lb.weighted_spectrum(op800, ground800, kmax=8)


@pytest.fixture(scope="session")
def coupling2():
    return lb.CouplingSpec(mu=np.array([1.0, 2.0]))


@pytest.fixture(scope="session")
def coupling3():
    return lb.CouplingSpec(mu=np.array([1.0, 2.0, 3.0]))


@pytest.fixture(scope="session")
def points2(coupling2, spectrum800):
    return lb.bifurcation_points(coupling2, spectrum800)


@pytest.fixture(scope="session")
def points3(coupling3, spectrum800):
    return lb.bifurcation_points(coupling3, spectrum800)


def system_norm(grid, fields):
    return float(
        np.sqrt(sum(lb.weighted_inner(grid, f, f) for f in fields))
    )


@pytest.fixture(scope="session")
def snorm():
    return system_norm
