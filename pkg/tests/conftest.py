import numpy as np
import pytest

from bayesmerge import DiscreteMeasure, FiniteLabeled, RealLine


@pytest.fixture
def rng():
    return np.random.default_rng(20260811)


@pytest.fixture
def real_line():
    return RealLine()


@pytest.fixture
def labels3():
    return FiniteLabeled.unit(("a", "b", "c"))


def random_real_measure(rng, max_atoms=8, scale=1.0):
    k = int(rng.integers(1, max_atoms + 1))
    atoms = rng.normal(scale=scale, size=k)
    return DiscreteMeasure(RealLine(), atoms, rng.dirichlet(np.ones(k)))


def random_label_measure(rng, space):
    k = len(space.labels)
    return DiscreteMeasure(space, space.labels, rng.dirichlet(np.ones(k)))
