import numpy as np
import pytest

from aoisim.config import make_config


@pytest.fixture
def desk_cfg():
    return make_config("desk")


@pytest.fixture
def paper_cfg():
    return make_config("paper")


@pytest.fixture
def tiny_cfg():
    """1 UAV, 2 users, 2 subchannels, small tasks: the learning scenario."""
    return make_config(
        "desk", num_uavs=1, num_users=2, num_subchannels=2,
        max_tasks_per_user=1, task_size=1e5, horizon=40, d_min=1.0)


@pytest.fixture
def rng():
    return np.random.default_rng(0)
