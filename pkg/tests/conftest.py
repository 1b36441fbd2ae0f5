import math

import numpy as np
import pytest

from tspnn.core import build_instance, random_instance

SQRT2 = math.sqrt(2.0)


@pytest.fixture
def square():
    return build_instance([(0, 0), (1, 0), (1, 1), (0, 1)], "square")


@pytest.fixture
def triangle():
    return build_instance([(0, 0), (1, 0), (0.5, math.sqrt(3) / 2)], "triangle")


def permutation_length(dist, order):
    """Edge-by-edge accumulation used as an independent oracle."""
    total = 0.0
    for i in range(len(order)):
        a = order[i]
        b = order[(i + 1) % len(order)]
        total += dist[a][b]
    return total


def seeded(n, seed):
    return random_instance(n, seed)


def random_orders(n, count, seed):
    rng = np.random.default_rng(seed)
    return [rng.permutation(n) for _ in range(count)]
