import numpy as np
import pytest

from hardylab.cone import ConeSpec

SPEC_LIST = [(3, 1), (3, 2), (3, 3), (4, 2), (5, 3)]


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def specs(pairs=SPEC_LIST):
    return [ConeSpec(n, k) for n, k in pairs]
