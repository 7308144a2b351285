import numpy as np
import pytest
from hypothesis import settings

from ftg import DataSet, binary, const, var
from ftg.genomes import warmup

settings.register_profile("suite", deadline=None, derandomize=True)
settings.load_profile("suite")


@pytest.fixture(scope="session", autouse=True)
def _compiled_kernels():
    # pay the JIT cost once, outside timed assertions
    warmup()


def koza1_tree():
    """x^4 + x^3 + x^2 + x built from explicit nodes."""
    x = var(0)
    x2 = binary("*", x, x)
    x3 = binary("*", x2, x)
    x4 = binary("*", x3, x)
    return binary("+", binary("+", x4, x3), binary("+", x2, x))


def toy_dataset(n=20, seed=0, target_fn=None, bounds=(-1.0, 1.0)):
    rng = np.random.default_rng(seed)
    pts = rng.uniform(bounds[0], bounds[1], size=(n, 1))
    if target_fn is None:
        targets = np.zeros(n)
    else:
        targets = target_fn(pts[:, 0])
    return DataSet(pts, targets, (bounds,))
