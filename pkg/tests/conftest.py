import numpy as np
import pytest

from ricci3.catalog import catalog_metric

FRAMED = ("flat", "round-sphere", "hyperbolic", "nil", "sol", "euclidean-e2-group",
          "su2-berger", "s2xr", "cosh-warped")


@pytest.fixture(scope="session")
def entries():
    return {name: catalog_metric(name) for name in FRAMED}


def sample(chart, n=10, seed=0):
    return chart.sample(n, seed)


def max_abs(a):
    return float(np.max(np.abs(a)))
