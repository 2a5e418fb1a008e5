from __future__ import annotations

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from minvariance.core import Dataset

settings.register_profile("default", deadline=None, suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")


def line(points, colors=None) -> Dataset:
    """1-D dataset; colors default to all distinct."""
    pts = np.asarray(points, dtype=float).reshape(-1, 1)
    if colors is None:
        colors = list(range(len(points)))
    return Dataset.from_arrays(pts, colors)


@pytest.fixture
def four_points() -> Dataset:
    return line([0, 1, 10, 11])


def random_instance(rng: np.random.Generator, p: int, d: int, n_colors: int) -> Dataset:
    return Dataset.from_arrays(rng.random((p, d)), rng.integers(0, n_colors, size=p))
