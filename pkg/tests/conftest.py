import numpy as np
import pytest

from userside.core import TableOracle, catalog_from_groups, walk_counterexample_oracle


@pytest.fixture
def pentagon_oracle():
    return walk_counterexample_oracle()


@pytest.fixture
def pentagon_catalog():
    # groups irrelevant to the counterexample; two groups for fairness paths
    return catalog_from_groups([0, 0, 1, 1, 0])


@pytest.fixture
def four_item_oracle():
    # page 1 drives the hand-traced run; other pages are simple cycles
    return TableOracle({1: (2, 3), 2: (3, 4), 3: (4, 1), 4: (1, 2)})


@pytest.fixture
def four_item_catalog():
    return catalog_from_groups([0, 0, 1, 1])


def random_points(n, d=2, seed=0):
    return np.random.default_rng(seed).standard_normal((n, d))
