"""World geometry, kinematics and mobility.

Positions are plain numpy arrays: users (M, 2) on the ground, UAVs (U, 3)
with altitude clamped to [h_min, h_max], and a fixed HAP at (hap_x, hap_y,
h_hap). Constraint handling is project-or-reject so that the collision and
coverage constraints hold at every slot by construction.
"""

import numpy as np

from .errors import ConfigurationError

PLACEMENT_RETRIES = 1000


def hap_position(cfg):
    return np.array([cfg.hap_x, cfg.hap_y, cfg.h_hap], dtype=float)


def _min_pairwise_distance(points):
    if len(points) < 2:
        return np.inf
    diff = points[:, None, :] - points[None, :, :]
    dist = np.sqrt((diff ** 2).sum(-1))
    iu = np.triu_indices(len(points), k=1)
    return dist[iu].min()


def init_positions(cfg, rng):
    """Draw initial user and UAV positions.

    Users are uniform in the area; UAVs are uniform in the area at a uniform
    altitude in [h_min, h_max], resampled (bounded retries) until every pair
    is at least d_min apart.
    """
    user_xy = np.column_stack([
        rng.uniform(0.0, cfg.area_x, cfg.num_users),
        rng.uniform(0.0, cfg.area_y, cfg.num_users),
    ])
    for _ in range(PLACEMENT_RETRIES):
        uav_pos = np.column_stack([
            rng.uniform(0.0, cfg.area_x, cfg.num_uavs),
            rng.uniform(0.0, cfg.area_y, cfg.num_uavs),
            rng.uniform(cfg.h_min, cfg.h_max, cfg.num_uavs),
        ])
        if _min_pairwise_distance(uav_pos) >= cfg.d_min:
            return user_xy, uav_pos
    raise ConfigurationError(
        f"could not place {cfg.num_uavs} UAVs at pairwise distance >= "
        f"{cfg.d_min} m in a {cfg.area_x} x {cfg.area_y} m area "
        f"after {PLACEMENT_RETRIES} attempts")


def move_users(user_xy, cfg, rng):
    """Gaussian random-walk step per axis, clamped to the area bounds."""
    step = rng.normal(0.0, 1.0, size=user_xy.shape) * cfg.user_speed_std
    moved = user_xy + step
    moved[:, 0] = np.clip(moved[:, 0], 0.0, cfg.area_x)
    moved[:, 1] = np.clip(moved[:, 1], 0.0, cfg.area_y)
    return moved


def user_bounding_box(user_xy):
    """Axis-aligned box (xmin, xmax, ymin, ymax) of current user positions."""
    return (user_xy[:, 0].min(), user_xy[:, 0].max(),
            user_xy[:, 1].min(), user_xy[:, 1].max())


def move_uav(pose, velocity, other_uav_pos, bbox, cfg):
    """Apply one slot of UAV motion under speed, coverage, and collision limits.

    The velocity is scaled down to at most v_max, the candidate position is
    clamped to the users' bounding box and the altitude band, and a move that
    would come within d_min of another UAV is rejected (the UAV holds its
    position). The speed cap is final: if the box clamp asks for a jump
    longer than v_max (UAV still outside the coverage box), the UAV flies
    toward the clamped target at v_max instead of teleporting.
    """
    pose = np.asarray(pose, dtype=float)
    velocity = np.asarray(velocity, dtype=float)
    speed = float(np.linalg.norm(velocity))
    if speed > cfg.v_max and speed > 0.0:
        velocity = velocity * (cfg.v_max / speed)
    candidate = pose + velocity  # slot duration = 1
    xmin, xmax, ymin, ymax = bbox
    candidate[0] = np.clip(candidate[0], xmin, xmax)
    candidate[1] = np.clip(candidate[1], ymin, ymax)
    candidate[2] = np.clip(candidate[2], cfg.h_min, cfg.h_max)
    disp = candidate - pose
    disp_len = float(np.linalg.norm(disp))
    if disp_len > cfg.v_max and disp_len > 0.0:
        candidate = pose + disp * (cfg.v_max / disp_len)
    if len(other_uav_pos):
        dists = np.linalg.norm(other_uav_pos - candidate[None, :], axis=1)
        if dists.min() < cfg.d_min:
            return np.asarray(pose, dtype=float).copy()
    return candidate


def move_uavs(uav_pos, velocities, user_xy, cfg):
    """Move all UAVs sequentially so the collision invariant is never broken."""
    bbox = user_bounding_box(user_xy)
    pos = uav_pos.copy()
    for u in range(len(pos)):
        others = np.delete(pos, u, axis=0)
        pos[u] = move_uav(pos[u], velocities[u], others, bbox, cfg)
    return pos
