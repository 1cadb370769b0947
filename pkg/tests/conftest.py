import sys
from pathlib import Path

import numpy as np
import pytest
from hypothesis import settings

from tailsitter.aero import AnalyticAeroModel, VehicleParams
from tailsitter.planner import plan
from tailsitter.timeopt import OptimizerConfig

sys.path.insert(0, str(Path(__file__).parent))

settings.register_profile("default", max_examples=60, deadline=None)
settings.load_profile("default")

SCENARIOS = Path(__file__).resolve().parent.parent / "scenarios"

# 80 m x 20 m climbing scenario through two waypoints in the vertical plane
CLIMB_GOAL = np.array([80.0, 0.0, -20.0])
CLIMB_WAYPOINTS = np.array([[30.0, 0.0, -5.0], [55.0, 0.0, -18.0]])
CLIMB_VMAX = 8.0


@pytest.fixture(scope="session")
def params():
    return VehicleParams()


@pytest.fixture(scope="session")
def model():
    return AnalyticAeroModel()


def climb_boundaries():
    s0 = np.zeros((4, 3))
    sf = np.zeros((4, 3))
    sf[0] = CLIMB_GOAL
    return s0, sf


@pytest.fixture(scope="session")
def climb_plan(params, model):
    s0, sf = climb_boundaries()
    return plan(s0, sf, CLIMB_WAYPOINTS, OptimizerConfig(v_max=CLIMB_VMAX), params, model)


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)

# four-waypoint weaving instance used for the speed-cap checks
WEAVE_GOAL = np.array([100.0, 0.0, -5.0])
WEAVE_WAYPOINTS = np.array([[20.0, 10.0, 0.0], [40.0, -5.0, -5.0], [60.0, 15.0, -10.0], [80.0, 0.0, -5.0]])
WEAVE_VMAX = 10.0
