import numpy as np
import pytest
from numba import njit

from transportcv.dynamics import ModelSpec


@njit(cache=False)
def _zero_fill(x, out):
    for i in range(x.shape[0]):
        out[i] = 0.0


def zero_drift_model(dim: int) -> ModelSpec:
    """A model with b = 0 in the given dimension (pure noise)."""
    return ModelSpec(name="zero", dim=dim, drift_fill=_zero_fill)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
