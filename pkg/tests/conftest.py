import numpy as np
import pytest

from hgcondense import synthetic
from hgcondense.hetgraph import save_graph


@pytest.fixture
def toy():
    return synthetic.toy()


@pytest.fixture
def shared_leaf():
    return synthetic.shared_leaf()


@pytest.fixture
def toy_dir(tmp_path, toy):
    d = tmp_path / "toy"
    save_graph(toy, d)
    return d


@pytest.fixture
def rng():
    return np.random.default_rng(1234)
