import numpy as np
from hypothesis import HealthCheck, settings
from hypothesis import strategies as st

from structhash.data import QueryNeighborhood

settings.register_profile("default", max_examples=60, deadline=None,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")


def mixture(n, seed, classes=5, radius=4.0):
    """Gaussian blobs with unit covariance on a circle; returns (X, labels)."""
    rng = np.random.default_rng(seed)
    y = rng.integers(0, classes, n)
    ang = 2 * np.pi * y / classes
    X = radius * np.c_[np.cos(ang), np.sin(ang)] + rng.standard_normal((n, 2))
    return X, y


@st.composite
def neighbourhoods(draw, max_rel=3, max_irr=4, bits=8, min_total=2):
    """(codes, gt, w) with the query at row 0 and random 0/1 codes."""
    p = draw(st.integers(1, max_rel))
    q = draw(st.integers(max(1, min_total - p), max_irr))
    n = p + q + 1
    seed = draw(st.integers(0, 2**32 - 1))
    rng = np.random.default_rng(seed)
    codes = rng.integers(0, 2, size=(n, bits)).astype(np.uint8)
    perm = rng.permutation(np.arange(1, n))
    gt = QueryNeighborhood(0, np.sort(perm[:p]), np.sort(perm[p:]))
    w = rng.exponential(1.0, bits) * draw(st.sampled_from([0.0, 0.05, 0.3, 1.0, 5.0]))
    return codes, gt, w


def pytest_terminal_summary(terminalreporter):
    import sys

    mod = sys.modules.get("test_acceptance")
    if mod is not None and mod.RESULTS:
        terminalreporter.section("acceptance criteria")
        for line in mod.RESULTS:
            terminalreporter.write_line(line)
