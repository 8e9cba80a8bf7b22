import numpy as np
import pytest

import parapack as pp


@pytest.fixture(scope="session")
def nmc_curve():
    return pp.builtin_ocv("nmc")


@pytest.fixture(scope="session")
def lfp_curve():
    return pp.builtin_ocv("lfp")


@pytest.fixture(scope="session")
def flat36():
    # constant 3.6 V curve: handy when only resistances should matter
    return pp.OcvCurve.from_points([(0.0, 3.6), (1.0, 3.6)])


@pytest.fixture
def nmc_cell(nmc_curve):
    return pp.CellParams(9925.0, 0.102, (), nmc_curve)


@pytest.fixture
def nmc_cell_rc(nmc_curve):
    return pp.CellParams(9925.0, 0.102,
                         ((9.4e-3, 6330.0), (3.63e-2, 6797.0)), nmc_curve)


@pytest.fixture
def lfp_cell(lfp_curve):
    return pp.CellParams(4579.0, 0.261, (), lfp_curve)


def linear_curve(v0=3.0, v1=4.2):
    """Two-point curve: constant slope v1 - v0 everywhere."""
    return pp.OcvCurve.from_points([(0.0, v0), (1.0, v1)])


def cell_with_eigenvalue(lam, gamma=1.0, rs=1.0, curve=None):
    """First-order cell whose relaxation eigenvalue is exactly lam (< 0)
    when linearized with the given gamma."""
    q = gamma / (abs(lam) * rs)
    return pp.CellParams(q, rs, (), curve if curve is not None else
                         linear_curve(3.0, 3.0 + gamma))


@pytest.fixture(scope="session")
def rng():
    return np.random.default_rng(20250823)
