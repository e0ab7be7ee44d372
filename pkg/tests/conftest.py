import itertools

import numpy as np
import pytest


def brute_force_max_matching(ref, est, tol):
    """Exhaustive maximum matching size, for small instances."""
    edges = [[j for j in range(len(est)) if abs(ref[i] - est[j]) <= tol] for i in range(len(ref))]
    best = 0

    def search(i, used, size):
        nonlocal best
        if size + (len(ref) - i) <= best:
            return
        if i == len(ref):
            best = max(best, size)
            return
        for j in edges[i]:
            if j not in used:
                used.add(j)
                search(i + 1, used, size + 1)
                used.remove(j)
        search(i + 1, used, size)

    search(0, set(), 0)
    return best


def naive_peaks(x, w1, w2, w3, w4, w5, delta):
    """Direct per-index evaluation of the three peak conditions."""
    n = len(x)
    out = []
    for i in range(n):
        lo, hi = max(0, i - w1), min(n, i + w2 + 1)
        is_max = x[i] == max(x[lo:hi])
        lo, hi = max(0, i - w3), min(n, i + w4 + 1)
        above = x[i] >= sum(x[lo:hi]) / (hi - lo) + delta
        spaced = not out or i - out[-1] >= w5
        if is_max and above and spaced:
            out.append(i)
    return out


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
