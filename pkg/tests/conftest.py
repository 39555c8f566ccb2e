import numpy as np
import pytest

from planar_mk.instances import gaussian_2d, smooth_random_density_2d
from planar_mk.measures import Grid1D, marginals_2d
from planar_mk.optimizer import ipfp_project


@pytest.fixture
def unit_grid_8():
    return Grid1D.uniform(0.0, 1.0, 8)


@pytest.fixture
def correlated_pair_8(unit_grid_8):
    f = gaussian_2d(unit_grid_8, unit_grid_8, rho=0.4, sigma=(0.25, 0.22))
    f_tilde = gaussian_2d(
        unit_grid_8, unit_grid_8, rho=-0.3, sigma=(0.24, 0.28), mean=(0.45, 0.55)
    )
    return f, f_tilde


@pytest.fixture
def independent_coupling_8(correlated_pair_8):
    f, f_tilde = correlated_pair_8
    f1, _ = marginals_2d(f)
    _, f2 = marginals_2d(f_tilde)
    return ipfp_project(np.outer(f1.values, f2.values), f1, f2)


def make_smooth_feasible_coupling(f, f_tilde, seed, amplitude=0.6):
    """Feasible coupling from a fixed-frequency log-perturbation of the
    independent one; resolution-consistent, so refinement studies make sense."""
    f1, _ = marginals_2d(f)
    _, f2 = marginals_2d(f_tilde)
    bump = smooth_random_density_2d(f.grid_x, f_tilde.grid_y, seed=seed, amplitude=amplitude)
    return ipfp_project(np.outer(f1.values, f2.values) * bump.values, f1, f2)
