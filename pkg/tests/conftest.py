import numpy as np
import pytest

from hopfkit.problems import Example1Config, Example2Config, ex1_build, ex2_build


@pytest.fixture(scope="session")
def ex2():
    return ex2_build(Example2Config(nx=32))


@pytest.fixture(scope="session")
def ex1():
    # coarse grid: fast, and every qualitative property already holds
    return ex1_build(Example1Config(L=20.0, nx=200))


@pytest.fixture
def rng():
    return np.random.default_rng(1234)
