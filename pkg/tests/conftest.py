import numpy as np
import pytest
from hypothesis import settings

from latgibbs.lattice import build_lattice
from latgibbs.potentials import build_gaussian, build_model1

settings.register_profile("default", deadline=None, max_examples=40)
settings.load_profile("default")

NN = {(1,): 1.0}


@pytest.fixture
def model1():
    return build_model1(1, NN, 0.02)


@pytest.fixture
def gauss():
    return build_gaussian(1.0, NN, 0.1)


@pytest.fixture
def ring16():
    return build_lattice(1, [16], "torus", 1)


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)
