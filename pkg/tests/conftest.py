import numpy as np
import pytest

from lqts.corpus import FaceSet, Gallery


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def random_set(rng, set_id="s", n=5, d=8, positive=False):
    x = rng.normal(size=(n, d))
    if positive:
        x = np.abs(x) + 0.05
    return FaceSet(set_id=set_id, exemplars=x)


def tiny_gallery(rng, n_sets=6, n=4, d=8, labels=None):
    sets = tuple(random_set(rng, f"set{i}", n=n, d=d) for i in range(n_sets))
    return Gallery(sets=sets, labels=labels)
