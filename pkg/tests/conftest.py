import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from wirecal.kinematics import DHParams, MeasurementRig, jr680_nominal  # noqa: E402


@pytest.fixture
def nominal():
    return jr680_nominal()


@pytest.fixture
def s1_rig():
    return MeasurementRig([1000.0, 0.0, 0.0], [0.0, 0.0, 100.0])


def random_params(rng, scale_mm=1000.0):
    g = np.empty(24)
    g[0:6] = rng.uniform(-np.pi, np.pi, 6)
    g[6:18] = rng.uniform(-scale_mm, scale_mm, 12)
    g[18:24] = rng.uniform(-np.pi, np.pi, 6)
    return DHParams.from_flat(g)


def random_rig(rng):
    return MeasurementRig(rng.uniform(-2000, 2000, 3), rng.uniform(-200, 200, 3))
