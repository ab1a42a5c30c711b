import numpy as np
import pytest

from nlklausmeier import Discretization, KernelSpec


@pytest.fixture
def laplace_half():
    return KernelSpec("laplace", epsilon=0.5)


@pytest.fixture
def gaussian_unit():
    return KernelSpec("gaussian", epsilon=1.0)


@pytest.fixture
def disc8():
    return Discretization.create(8, 1.0)


@pytest.fixture
def rng():
    return np.random.default_rng(20240817)
