import numpy as np
import pytest

from svahdp import kernels
from svahdp.combinatorics import CrfCounts

BACKEND_NAMES = sorted(kernels.BACKENDS)


@pytest.fixture(params=BACKEND_NAMES)
def backend(request):
    return request.param


def random_crf_counts(rng, max_customers=6, max_restaurants=3, max_dishes=3):
    """Random consistent (t, C) with at most ``max_customers`` customers in total."""
    while True:
        N = int(rng.integers(1, max_restaurants + 1))
        K = int(rng.integers(1, max_dishes + 1))
        C = rng.integers(0, 3, size=(N, K))
        if C.sum() == 0 or C.sum() > max_customers or (C.sum(axis=0) == 0).any():
            continue
        t = np.where(C > 0, rng.integers(1, 4, size=C.shape), 0)
        t = np.minimum(t, C)
        return CrfCounts(t, C)
