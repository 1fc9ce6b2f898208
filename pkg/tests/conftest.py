import numpy as np
import pytest

from loopsparse.dictionary import Dictionary
from loopsparse.features import unit_feature


def random_dictionary(rng, n, m):
    d = Dictionary(n)
    for _ in range(m):
        d.append(unit_feature(rng.standard_normal(n)))
    return d


def random_unit(rng, n):
    return unit_feature(rng.standard_normal(n))


@pytest.fixture
def rng():
    return np.random.default_rng(20240817)
