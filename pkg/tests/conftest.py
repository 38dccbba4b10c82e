import numpy as np
import pytest

from memebg.data import DEFAULT_SCHEMAS, SyntheticSpec, generate_synthetic
from memebg.numerics import Rng

BALANCED_PRIORS = {
    "TE": (0.5, 0.5),
    "ICM": (0.5, 0.5),
    "EXP": (1 / 3, 1 / 3, 1 / 3),
}


def balanced_spec(n, d, k, noise_sigma, coupling) -> SyntheticSpec:
    return SyntheticSpec(
        n=n, d=d, k=k, noise_sigma=noise_sigma, coupling=coupling,
        class_priors=BALANCED_PRIORS,
    )


@pytest.fixture
def small_dataset():
    """200 samples, 32 dims, mildly noisy, strongly coupled tasks."""
    return generate_synthetic(balanced_spec(200, 32, 8, 0.2, 0.9), Rng(5))


def assert_arrays_equal(a, b):
    np.testing.assert_array_equal(np.asarray(a), np.asarray(b))
