import numpy as np
import pytest

from gmlattice import SurfaceParams, omega_max, spectral_data


@pytest.fixture(scope="session")
def params():
    return SurfaceParams(2.0, 1.3)


@pytest.fixture(scope="session")
def wm(params):
    return omega_max(params)


@pytest.fixture(scope="session")
def sd_half(params, wm):
    """Spectral data at omega = 0.5 * omega_max, shared across tests."""
    return spectral_data(params, 0.5 * wm)


@pytest.fixture()
def rng():
    return np.random.default_rng(20240810)
