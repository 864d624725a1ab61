import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from uwbpdr.world import ImuSample, NoiseParams, Scenario

SQUARE_ANCHORS = [[-1.0, -1.0], [11.0, -1.0], [11.0, 9.0], [-1.0, 9.0]]
LOOP_WAYPOINTS = [[0.0, 0.0], [10.0, 0.0], [10.0, 8.0], [0.0, 8.0], [0.0, 0.0]]


def make_imu(t, accel=None, gyro=None):
    t = np.asarray(t, dtype=float)
    accel = np.zeros_like(t) if accel is None else np.asarray(accel, dtype=float)
    gyro = np.zeros_like(t) if gyro is None else np.asarray(gyro, dtype=float)
    return [ImuSample(float(ti), float(ai), float(wi))
            for ti, ai, wi in zip(t, accel, gyro)]


@pytest.fixture
def clean_scenario():
    """Straight 10 m walk, no zones, no noise."""
    return Scenario(anchors=SQUARE_ANCHORS,
                    waypoints=[[0.0, 0.0], [10.0, 0.0]],
                    walk_speed=1.0, imu_rate=100.0, uwb_rate=10.0,
                    noise=NoiseParams(), seed=0, name="clean")


@pytest.fixture
def loop_scenario():
    """Closed rectangle with one blocking zone and moderate noise."""
    return Scenario(anchors=SQUARE_ANCHORS,
                    waypoints=LOOP_WAYPOINTS,
                    walk_speed=1.0, imu_rate=100.0, uwb_rate=10.0,
                    nlos_zones=(((4.0, 3.0), (6.0, 5.0)),),
                    noise=NoiseParams(sigma_range_los=0.05, sigma_range_nlos=0.3,
                                      nlos_bias_mean=3.0, sigma_accel=0.3,
                                      gyro_bias=0.01, sigma_gyro=0.01),
                    seed=0, name="loop")
