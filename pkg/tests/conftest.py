import numpy as np
import pytest

from rwre import environment as envm
from rwre import generators as gen


@pytest.fixture(scope="session")
def stream_env():
    spec = gen.GeneratorSpec("stream_tensor", d=2, L=16, seed=5, s_jitter=0.5)
    env, tensor = gen.gen_stream_tensor(spec)
    return env, tensor


@pytest.fixture(scope="session")
def stream_dec(stream_env):
    return envm.decompose(stream_env[0])


@pytest.fixture(scope="session")
def manhattan_env():
    return gen.gen_manhattan(gen.GeneratorSpec("manhattan", d=2, L=16, seed=9))


@pytest.fixture(scope="session")
def cyclic_env():
    return gen.gen_cyclic(gen.GeneratorSpec("cyclic", d=2, L=16, seed=7,
                                            cycle_density=0.08))


@pytest.fixture(scope="session")
def symmetric_env():
    return gen.gen_symmetric(gen.GeneratorSpec("symmetric", d=2, L=8, seed=1))


@pytest.fixture(scope="session")
def two_rate_env():
    """Hand-built d=2 environment whose total jump rate takes the three
    values {4, 5, 6} in stripes; used for holding-time statistics."""
    L = 8
    x2 = np.arange(L)
    pattern = ((x2 % 4) // 2).astype(float)          # 0,0,1,1,...
    s1 = np.ones((L, L))
    s2 = 1.0 + np.tile(pattern, (L, 1))
    rates = np.empty((4, L, L))
    rates[0] = s1
    rates[1] = np.roll(s1, 1, axis=0)
    rates[2] = s2
    rates[3] = np.roll(s2, 1, axis=1)
    return envm.Environment(2, L, rates, 1.0, 2.0, "two-rate", 0)
