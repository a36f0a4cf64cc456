import logging

import numpy as np
import pytest

from shapecox import SurvivalDataset

logging.getLogger("shapecox").setLevel(logging.ERROR)


@pytest.fixture
def two_subject_data():
    """t=(1,2), both events; the workhorse toy example."""
    return SurvivalDataset([1.0, 2.0], [True, True], np.zeros((2, 1)))


def random_instance(seed, n=12, p=3, censor_scale=1.0):
    """Random survival data with a dense covariate matrix; >=1 event."""
    rng = np.random.default_rng(seed)
    time = rng.exponential(1.0, n) + 1e-3
    event = rng.random(n) < 0.7
    if not event.any():
        event[0] = True
    if censor_scale != 1.0:
        time = time * censor_scale
    X = rng.standard_normal((n, p))
    return SurvivalDataset(time, event, X), X
