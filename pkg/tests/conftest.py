import numpy as np
import pytest

from nspregen.geometry import ObstacleSet
from nspregen.physics import BoundarySetup, FlowKind, FluidParams
from nspregen.solver import SolverParams, build_case
from nspregen.trajio import CHANNELS, Trajectory, TrajectoryMeta


@pytest.fixture
def fluid():
    return FluidParams()


@pytest.fixture
def empty_obstacles():
    return ObstacleSet((), 1, (2.0, 2.0))


def make_case(kind=FlowKind.FPO, re=100.0, grid=(32, 32), obstacles=None,
              speed=None, **solver_kw):
    """Small helper: assemble a case with sensible defaults for tests."""
    from nspregen.physics import lid_speed_from_re, umax_from_re_fpo

    fluid = FluidParams()
    obs = obstacles if obstacles is not None else ObstacleSet((), 1, (2.0, 2.0))
    if speed is None:
        speed = (umax_from_re_fpo(re, fluid) if kind is FlowKind.FPO
                 else lid_speed_from_re(re, fluid))
    boundary = BoundarySetup(kind, speed, re)
    return build_case(obs, boundary, fluid, SolverParams(grid_dims=grid, **solver_kw))


def make_trajectory(frames: np.ndarray, kind="FPO", re=500.0, seed=7,
                    t_end=1800.0) -> Trajectory:
    meta = TrajectoryMeta(kind=kind, re=re, seed=seed, t_end=t_end,
                          write_interval=t_end / frames.shape[0],
                          n_frames=frames.shape[0])
    return Trajectory(frames.astype(np.float32), meta)


def random_trajectory(rng, shape=(4, 8, 8, len(CHANNELS)), seed=7, kind="FPO"):
    return make_trajectory(rng.standard_normal(shape), kind=kind, seed=seed)
