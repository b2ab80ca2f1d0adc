import numpy as np
import pytest

from jumpfield.kernel import bump_kernel, gaussian_kernel
from jumpfield.spectral import SpectralGrid


@pytest.fixture(scope="session")
def gauss():
    return gaussian_kernel(1)


@pytest.fixture(scope="session")
def shifted_gauss():
    return gaussian_kernel(1, center=[1.0])


@pytest.fixture(scope="session")
def bump_kern():
    return bump_kernel(1, radius=1.0)


@pytest.fixture(scope="session")
def grid40():
    return SpectralGrid(1, 40.0, 1 << 12)


@pytest.fixture(scope="session")
def grid10():
    return SpectralGrid(1, 10.0, 1 << 10)


@pytest.fixture()
def rng():
    return np.random.default_rng(20240817)
