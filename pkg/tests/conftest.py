import numpy as np
import pytest

from nvc13 import GAMMA_E, HyperfineTensor, MicrowaveField, SpinSystemParams

GAMMA_E_B = 63.3
B_MT = GAMMA_E_B / GAMMA_E

SOL = {
    1: HyperfineTensor(189.3, 128.4, 128.9, 24.1),
    2: HyperfineTensor(-189.3, 128.4, -128.9, -24.1),
    3: HyperfineTensor(-163.0, -128.4, 85.7, -99.3),
    4: HyperfineTensor(163.0, -128.4, -85.7, 99.3),
}


@pytest.fixture
def sysp():
    return SpinSystemParams()


@pytest.fixture
def sys0():
    return SpinSystemParams(gamma_n=0.0)


@pytest.fixture
def sol1():
    return SOL[1]


@pytest.fixture
def mw_x(sysp):
    return MicrowaveField.along([1.0, 0.0, 0.0], sysp)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def random_tensor(rng, scale=200.0):
    return HyperfineTensor(*rng.uniform(-scale, scale, size=4))


def random_unit(rng):
    v = rng.normal(size=3)
    return v / np.linalg.norm(v)
