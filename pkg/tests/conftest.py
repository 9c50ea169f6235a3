import itertools

import numpy as np
import pytest

from pubgoods.core import DirectedGraph


def random_digraph(rng: np.random.Generator, n: int, p: float = 0.3, max_degree: int | None = None) -> DirectedGraph:
    """Random simple digraph; with max_degree, edges breaking the bound are skipped."""
    pairs = [(j, i) for j, i in itertools.permutations(range(n), 2)]
    rng.shuffle(pairs)
    deg = [set() for _ in range(n)]
    edges = []
    for j, i in pairs:
        if rng.random() >= p:
            continue
        if max_degree is not None and i not in deg[j] and (len(deg[j]) >= max_degree or len(deg[i]) >= max_degree):
            continue
        deg[j].add(i)
        deg[i].add(j)
        edges.append((int(j), int(i)))
    return DirectedGraph(n, tuple(edges))


@pytest.fixture
def rng():
    return np.random.default_rng(0)
