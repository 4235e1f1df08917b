import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from smoothgc import build_graph, two_clique_fixture


@pytest.fixture
def two_node_graph():
    """Single undirected edge between two nodes, identity features."""
    return build_graph([(0, 1)], np.eye(2))


@pytest.fixture
def path3_graph():
    """Path graph 0-1-2 with one-hot features."""
    return build_graph([(0, 1), (1, 2)], np.eye(3))


@pytest.fixture
def two_cliques():
    """Two disjoint 10-cliques with orthogonal block-indicator features."""
    return two_clique_fixture(10)


@pytest.fixture
def rng():
    return np.random.default_rng(20240817)
