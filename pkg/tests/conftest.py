import numpy as np
import pytest

from blindchan import (
    FrequencyGrid,
    PathParameterSet,
    canonicalize,
    default_array,
    make_signal,
    synthesize,
    table1_truth,
)


@pytest.fixture(scope="session")
def array():
    return default_array()


@pytest.fixture(scope="session")
def truth():
    return canonicalize(table1_truth())


@pytest.fixture(scope="session")
def grid128():
    return FrequencyGrid(128)


@pytest.fixture(scope="session")
def noiseless_obs(truth, array, grid128):
    signal = make_signal("flat", grid128)
    return synthesize(truth, array, grid128, signal, float("inf"), seed=0)


def random_params(rng, path_count):
    """Random feasible parameter set in canonical gauge."""
    azimuth = rng.uniform(-np.pi, np.pi, path_count)
    elevation = rng.uniform(-1.2, 1.2, path_count)
    weight_h = rng.standard_normal(path_count) + 1j * rng.standard_normal(path_count)
    weight_v = rng.standard_normal(path_count) + 1j * rng.standard_normal(path_count)
    delay = np.sort(rng.uniform(0.0, 0.8, path_count))
    delay -= delay[0]
    return PathParameterSet(azimuth, elevation, weight_h, weight_v, delay)
