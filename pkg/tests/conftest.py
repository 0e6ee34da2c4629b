import numpy as np
import pytest

from fvsim.geometry import interval


@pytest.fixture
def unit_interval():
    return interval(-1.0, 1.0)


def cosine_cdf(x):
    """CDF of the normalized cos(pi x / 2) profile on (-1, 1)."""
    return 0.5 * (1.0 - np.cos(np.pi * (np.asarray(x) + 1.0) / 2.0))


def cosine_bin_masses(edges):
    m = np.diff(cosine_cdf(edges))
    return m / m.sum()


def brute_force_w1(xs, ys, truncate=False):
    """Optimal matching cost between equal-weight point sets, by enumeration."""
    from itertools import permutations

    xs = np.asarray(xs, dtype=float)
    ys = np.asarray(ys, dtype=float)
    assert xs.shape == ys.shape and xs.ndim == 1
    best = np.inf
    for perm in permutations(range(len(ys))):
        c = np.abs(xs - ys[list(perm)])
        if truncate:
            c = np.minimum(c, 1.0)
        best = min(best, c.mean())
    return best
