import numpy as np
import pytest

from tickchain.chain import ChainSpec, stream
from tickchain.optimize import expand_profile


@pytest.fixture(scope="session")
def spec_n1():
    return ChainSpec(1, [])


@pytest.fixture(scope="session")
def spec_n20():
    """A hand-rolled apodized 20-site profile (fast to build, close in
    character to an optimized one)."""
    g = expand_profile(20, 0.184, np.array([0.351, 0.222, 0.199, 0.191, 0.187, 0.186]))
    return ChainSpec(20, g)


@pytest.fixture(scope="session")
def spec_n40():
    g = expand_profile(
        40,
        0.149,
        np.array([0.332, 0.196, 0.169, 0.159, 0.155, 0.152, 0.151, 0.150, 0.150, 0.150]),
    )
    return ChainSpec(40, g)


@pytest.fixture(scope="session")
def rng():
    return stream(2024)


def random_spec(seed: int, n_min=2, n_max=12) -> ChainSpec:
    r = stream(seed, 555)
    n = int(r.integers(n_min, n_max + 1))
    return ChainSpec(n, r.uniform(0.15, 0.9, n - 1))
