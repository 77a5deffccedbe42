import os
import sys

import numpy as np
import pytest

sys.path.insert(0, os.path.join(os.path.dirname(__file__), "..", "src"))

from spcert.core_model import Grid, ProblemParams  # noqa: E402
from spcert.oracles import SelfSimilarProfile  # noqa: E402


@pytest.fixture(scope="session")
def profile_p15_n1():
    """Fast-diffusion source profile for p=1.5 in 1D, unit mass (shared: slow to build)."""
    return SelfSimilarProfile.build(p=1.5, dim_n=1, total_mass=1.0)


@pytest.fixture(scope="session")
def plap_params():
    return ProblemParams(dim_n=1, p=1.5)


@pytest.fixture(scope="session")
def dnl_params():
    return ProblemParams(dim_n=1, p=1.5, m=1.3, equation="doubly_nonlinear")


def make_grid(cells=64, L=1.0, dt=1e-3, steps=20, bc="periodic", dim_n=1):
    return Grid(dim_n=dim_n, cells_per_axis=cells, domain_half_width=L,
                dt=dt, n_steps=steps, bc=bc)


@pytest.fixture()
def rng():
    return np.random.default_rng(20240817)
