import numpy as np
import pytest

from sphere_surgery.lattice import DomainSpec
from sphere_surgery.presets import make_map


@pytest.fixture
def box2():
    return DomainSpec(2, 'box')


@pytest.fixture
def box3():
    return DomainSpec(3, 'box')


@pytest.fixture
def ball2():
    return DomainSpec(2, 'ball')


@pytest.fixture
def ball3():
    return DomainSpec(3, 'ball')


@pytest.fixture
def rng():
    return np.random.default_rng(20171101)


@pytest.fixture
def constant3(box3):
    return make_map(box3, 16, 'constant')


@pytest.fixture
def hedgehog_ball3(ball3):
    return make_map(ball3, 16, 'hedgehog')


@pytest.fixture
def vortex_pair(box2):
    # charges 0.055 apart, off the nodes and in separate detection squares
    return make_map(box2, 256, 'dipole', plus=(0.4725, 0.5013),
        minus=(0.5275, 0.5013))


def random_units(rng, count, n):
    x = rng.normal(size=(count, n))
    return x / np.linalg.norm(x, axis=1, keepdims=True)
