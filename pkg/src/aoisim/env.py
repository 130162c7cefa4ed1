"""MDP wrapper: observation encoding, action decoding with feasibility
projection, and the per-slot transition pipeline.

Observation layouts (own documented field order; entries normalized):

UAV agent u:
    [own pose (3)] [user xy (2M)] [task flags (M*S)] [own CPU usage (1)]
    [user remaining bits (M*S)] [own remnant total (1)] [ages (M)]
    -> length 3 + 2M + 2MS + 2 + M

HAP agent:
    [all UAV poses (3U)] [task flags (M*S)] [HAP CPU usage (1)]
    [HAP buffered total (1)] [per-UAV remnant totals at t-1 (U)] [ages (M)]
    -> length 4U + MS + 2 + M

The published state-size formulas are reproduced in
`published_uav_state_size` / `published_hap_state_size`; they do not track
the field lists one-for-one (3D UAV poses vs 2D user positions), so the
encoder asserts its own computed lengths instead.

Raw action layouts, every entry in [-1, 1]:

UAV agent u: [velocity (3)] [SC flags (M*N)] [SC powers (M*N)] [theta (M*S)]
HAP agent:   [backhaul power (M*U, averaged per UAV)] [eta (M*S)]
"""

from dataclasses import dataclass

import numpy as np

from . import aoi as aoi_mod
from . import channel, scheduler, world
from .errors import InterfaceError

HAP_AGENT = "hap"


def published_uav_state_size(M, S, U):
    """State-size formula as published: 2M + 4MS + 3U + M."""
    return 2 * M + 4 * (M * S) + 3 * U + M


def published_hap_state_size(M, S, U):
    """State-size formula as published: 3U + 3MS + M + UMS."""
    return 3 * U + 3 * (M * S) + M + (U * M * S)


def uav_obs_size(cfg):
    M, S = cfg.num_users, cfg.max_tasks_per_user
    return 3 + 2 * M + 2 * M * S + 2 + M


def hap_obs_size(cfg):
    M, S, U = cfg.num_users, cfg.max_tasks_per_user, cfg.num_uavs
    return 4 * U + M * S + 2 + M


def uav_action_size(cfg):
    """3 + 2MN + MS, matching the published action-size formula."""
    M, N, S = cfg.num_users, cfg.num_subchannels, cfg.max_tasks_per_user
    return 3 + 2 * M * N + M * S


def hap_action_size(cfg):
    """MU + MS, matching the published action-size formula."""
    M, U, S = cfg.num_users, cfg.num_uavs, cfg.max_tasks_per_user
    return M * U + M * S


@dataclass
class WorldState:
    t: int
    user_xy: np.ndarray      # (M, 2)
    uav_pos: np.ndarray      # (U, 3)
    hap_pos: np.ndarray      # (3,)
    ledger: scheduler.TaskLedger
    tracker: aoi_mod.AoiTracker
    uav_cpu_usage: np.ndarray    # (U,) cycles spent last slot
    hap_cpu_usage: float
    prev_uav_remnant: np.ndarray  # (U,) remnant totals at the previous slot

    def copy(self):
        return WorldState(
            t=self.t, user_xy=self.user_xy.copy(), uav_pos=self.uav_pos.copy(),
            hap_pos=self.hap_pos.copy(), ledger=self.ledger.copy(),
            tracker=self.tracker.copy(), uav_cpu_usage=self.uav_cpu_usage.copy(),
            hap_cpu_usage=self.hap_cpu_usage,
            prev_uav_remnant=self.prev_uav_remnant.copy())


@dataclass
class JointAction:
    velocities: np.ndarray   # (U, 3) m/s
    assignment: np.ndarray   # (M, U, N) bool
    user_power: np.ndarray   # (M, U, N) W
    theta: np.ndarray        # (U, M, S) in [0, 1]
    hap_power: np.ndarray    # (U,) W
    eta: np.ndarray          # (M, S) in [0, 1]


def init_world(cfg, rng):
    user_xy, uav_pos = world.init_positions(cfg, rng)
    return WorldState(
        t=0,
        user_xy=user_xy,
        uav_pos=uav_pos,
        hap_pos=world.hap_position(cfg),
        ledger=scheduler.new_ledger(cfg),
        tracker=aoi_mod.new_tracker(cfg.num_users),
        uav_cpu_usage=np.zeros(cfg.num_uavs),
        hap_cpu_usage=0.0,
        prev_uav_remnant=np.zeros(cfg.num_uavs),
    )


def _norm_pose(pos, cfg):
    span_z = max(cfg.h_hap, 1.0)
    return np.array([pos[0] / cfg.area_x, pos[1] / cfg.area_y, pos[2] / span_z])


def encode_state(w, agent_id, cfg):
    """Flatten the observation of one agent in the documented field order."""
    led = w.ledger
    alpha = cfg.task_size
    flags = (led.active.astype(float)).ravel()
    ages = w.tracker.age / max(cfg.horizon, 1)
    if agent_id == HAP_AGENT:
        obs = np.concatenate([
            np.concatenate([_norm_pose(p, cfg) for p in w.uav_pos]),
            flags,
            [w.hap_cpu_usage / cfg.C_max_hap],
            [led.hap_pool.sum() / (alpha * led.total.size)],
            w.prev_uav_remnant / (alpha * led.total.size),
            ages,
        ])
        expected = hap_obs_size(cfg)
    else:
        u = int(agent_id)
        if not 0 <= u < cfg.num_uavs:
            raise InterfaceError(f"unknown agent id {agent_id!r}")
        obs = np.concatenate([
            _norm_pose(w.uav_pos[u], cfg),
            (w.user_xy / [cfg.area_x, cfg.area_y]).ravel(),
            flags,
            [w.uav_cpu_usage[u] / cfg.C_max_uav],
            led.user_remaining.ravel() / alpha,
            [led.uav_remnant[u].sum() / (alpha * led.total.size)],
            ages,
        ])
        expected = uav_obs_size(cfg)
    assert obs.shape == (expected,)
    return obs


def _binary_flags(raw):
    # closed lower bracket: raw in [0, 1] -> 1, raw in [-1, 0) -> 0
    return raw >= 0.0


def decode_action(raws, w, cfg):
    """Decode per-agent raw vectors in [-1, 1] into a feasible JointAction.

    `raws` is a list of U UAV vectors followed by the HAP vector. Binary
    flags threshold at zero; continuous entries map affinely onto their
    ranges; the subchannel caps and power cap C3 are then enforced by
    projection (keep the highest-raw flags, scale powers).
    """
    M, U = cfg.num_users, cfg.num_uavs
    N, S = cfg.num_subchannels, cfg.max_tasks_per_user
    if len(raws) != U + 1:
        raise InterfaceError(f"expected {U + 1} action vectors, got {len(raws)}")
    velocities = np.zeros((U, 3))
    flag_raw = np.full((M, U, N), -1.0)
    assignment = np.zeros((M, U, N), dtype=bool)
    user_power = np.zeros((M, U, N))
    theta = np.zeros((U, M, S))
    for u in range(U):
        raw = np.asarray(raws[u], dtype=float)
        if raw.shape != (uav_action_size(cfg),):
            raise InterfaceError(
                f"UAV action must have length {uav_action_size(cfg)}, got {raw.shape}")
        velocities[u] = raw[:3] * cfg.v_max
        fr = raw[3:3 + M * N].reshape(M, N)
        pr = raw[3 + M * N:3 + 2 * M * N].reshape(M, N)
        flag_raw[:, u, :] = fr
        assignment[:, u, :] = _binary_flags(fr)
        user_power[:, u, :] = (pr + 1.0) / 2.0 * cfg.p_max_user
        theta[u] = ((raw[3 + 2 * M * N:] + 1.0) / 2.0).reshape(M, S)
    raw_hap = np.asarray(raws[U], dtype=float)
    if raw_hap.shape != (hap_action_size(cfg),):
        raise InterfaceError(
            f"HAP action must have length {hap_action_size(cfg)}, got {raw_hap.shape}")
    hap_power = (raw_hap[:M * U].reshape(U, M).mean(axis=1) + 1.0) / 2.0 * cfg.p_max_uav
    eta = ((raw_hap[M * U:] + 1.0) / 2.0).reshape(M, S)

    # (a) per-user subchannel cap: keep the top-raw flags, ties by (n, u)
    for m in range(M):
        picked = [(u, n) for u in range(U) for n in range(N) if assignment[m, u, n]]
        if len(picked) > cfg.sc_per_user_cap:
            picked.sort(key=lambda un: (-flag_raw[m, un[0], un[1]], un[1], un[0]))
            for u, n in picked[cfg.sc_per_user_cap:]:
                assignment[m, u, n] = False
    # (b) per-subchannel user cap: keep the top-raw users, ties by user index
    for u in range(U):
        for n in range(N):
            users = np.nonzero(assignment[:, u, n])[0]
            if len(users) > cfg.users_per_sc_cap:
                order = sorted(users, key=lambda m: (-flag_raw[m, u, n], m))
                for m in order[cfg.users_per_sc_cap:]:
                    assignment[m, u, n] = False
    # (c) per-user power scaled to satisfy C3
    spent = np.where(assignment, user_power, 0.0).sum(axis=(1, 2))
    for m in range(M):
        if spent[m] > cfg.p_max_user:
            user_power[m] *= cfg.p_max_user / spent[m]
    user_power[~assignment] = 0.0
    return JointAction(velocities=velocities, assignment=assignment,
                       user_power=user_power, theta=theta,
                       hap_power=hap_power, eta=eta)


def step(w, action, cfg, rng, fixed_task=False, check=False):
    """Advance one slot. Returns (world', reward, done, info).

    Pipeline: move UAVs, move users, realize channels, user->UAV
    transmission, UAV CPU, UAV->HAP forwarding of pre-existing remnants,
    HAP CPU, completion detection + AoI update, task generation, reward.
    With `fixed_task` the non-separable baseline scheduler replaces the
    elastic transmission/CPU path (see `baselines`).
    """
    w = w.copy()
    led = w.ledger
    t = w.t + 1
    prev_uav_pos = w.uav_pos.copy()

    # (1) UAV kinematics, (2) user mobility
    w.uav_pos = world.move_uavs(w.uav_pos, action.velocities, w.user_xy, cfg)
    bbox_used = world.user_bounding_box(w.user_xy)
    w.user_xy = world.move_users(w.user_xy, cfg, rng)

    # (3) channels with robust effective gains
    realization = channel.realize_channels(w.user_xy, w.uav_pos, cfg)
    rates = channel.noma_rates(realization, action.assignment, action.user_power, cfg)
    backhaul = np.array([
        channel.uav_hap_rate(w.uav_pos[u], w.hap_pos, action.hap_power[u], cfg)
        for u in range(cfg.num_uavs)])

    if fixed_task:
        from . import baselines
        cpu_uav, cpu_hap = baselines.fixed_task_slot(
            led, rates, action.assignment, backhaul, cfg, t)
    else:
        # (4) elastic transmission
        arrived = scheduler.transmit_user_bits(led, rates, action.assignment)
        # (5) UAV CPU allocation
        cpu_uav = np.zeros(cfg.num_uavs)
        for u in range(cfg.num_uavs):
            processed, cycles, remnant = scheduler.allocate_uav_cpu(
                arrived[u], action.theta[u], cfg)
            scheduler.record_processed(led, processed)
            scheduler.enqueue_remnants(led, u, remnant, t)
            cpu_uav[u] = cycles
        # (6) forwarding of pre-existing remnants
        forwarded = np.zeros_like(led.hap_pool)
        for u in range(cfg.num_uavs):
            beta, phi = scheduler.forward_to_hap(led, u, backhaul[u], t)
            forwarded += beta
        # (7) HAP CPU over forwarded + buffered bits
        pool = led.hap_pool + forwarded
        processed, cpu_hap, led.hap_pool = scheduler.allocate_hap_cpu(
            pool, action.eta, cfg)
        scheduler.record_processed(led, processed)

    w.uav_cpu_usage = cpu_uav
    w.hap_cpu_usage = float(cpu_hap)

    # (8) completion detection + AoI update
    completions = scheduler.detect_completions(led)
    aoi_mod.update_aoi(w.tracker, completions, led.gen_time, t)
    # (9) task generation
    scheduler.maybe_generate_task(led, rng, cfg, t)
    # (10) shared cooperative reward
    r = aoi_mod.reward(w.tracker)

    w.prev_uav_remnant = led.uav_remnant.sum(axis=(1, 2))
    w.t = t
    done = t >= cfg.horizon or led.all_done()
    info = {
        "rates": rates,
        "backhaul": backhaul,
        "completions": completions,
        "uav_cpu": cpu_uav,
        "hap_cpu": cpu_hap,
    }
    if check:
        info["constraints"] = check_constraints(
            w, action, prev_uav_pos, bbox_used, cfg)
        scheduler.check_conservation(led)
    return w, r, done, info


def check_constraints(w, action, prev_uav_pos, bbox, cfg):
    """Machine-check C1-C6 and the box/speed/cap constraints post-projection."""
    tol = 1e-9
    checks = {}
    # C1 collision avoidance
    ok = True
    for u in range(cfg.num_uavs):
        for v in range(u + 1, cfg.num_uavs):
            if np.linalg.norm(w.uav_pos[u] - w.uav_pos[v]) < cfg.d_min - tol:
                ok = False
    checks["C1"] = ok
    # C2 coverage box. A UAV may legally sit outside the box if it held its
    # position (rejected move) or is flying toward the box at the speed cap.
    xmin, xmax, ymin, ymax = bbox
    ok = True
    for u in range(cfg.num_uavs):
        inside = (xmin - tol <= w.uav_pos[u, 0] <= xmax + tol
                  and ymin - tol <= w.uav_pos[u, 1] <= ymax + tol)
        held = np.allclose(w.uav_pos[u], prev_uav_pos[u])
        en_route = np.linalg.norm(w.uav_pos[u] - prev_uav_pos[u]) >= cfg.v_max - 1e-6
        if not (inside or held or en_route):
            ok = False
    checks["C2"] = ok
    spent = np.where(action.assignment, action.user_power, 0.0).sum(axis=(1, 2))
    checks["C3"] = bool(np.all(spent <= cfg.p_max_user * (1 + 1e-9)))
    checks["C4"] = bool(np.all(action.hap_power <= cfg.p_max_uav * (1 + 1e-9)))
    checks["C5"] = bool(np.all(w.uav_cpu_usage <= cfg.C_max_uav * (1 + 1e-9)))
    checks["C6"] = bool(w.hap_cpu_usage <= cfg.C_max_hap * (1 + 1e-9))
    checks["sc_per_user"] = bool(
        action.assignment.sum(axis=(1, 2)).max(initial=0) <= cfg.sc_per_user_cap)
    checks["users_per_sc"] = bool(
        action.assignment.sum(axis=0).max(initial=0) <= cfg.users_per_sc_cap)
    checks["altitude"] = bool(
        np.all((cfg.h_min - tol <= w.uav_pos[:, 2])
               & (w.uav_pos[:, 2] <= cfg.h_max + tol)))
    disp = np.linalg.norm(w.uav_pos - prev_uav_pos, axis=1)
    checks["speed"] = bool(np.all(disp <= cfg.v_max + 1e-6))
    checks["theta_range"] = bool(
        np.all((action.theta >= 0) & (action.theta <= 1)))
    checks["eta_range"] = bool(np.all((action.eta >= 0) & (action.eta <= 1)))
    checks["ok"] = all(checks.values())
    return checks


class AerialEnv:
    """Episode wrapper owning the world state and an RNG stream."""

    def __init__(self, cfg, rng=None, fixed_task=False):
        self.cfg = cfg
        self.rng = rng if rng is not None else np.random.default_rng(cfg.rng_seed)
        self.fixed_task = fixed_task
        self.world = None

    @property
    def agent_ids(self):
        return list(range(self.cfg.num_uavs)) + [HAP_AGENT]

    def reset(self):
        self.world = init_world(self.cfg, self.rng)
        return self.observations()

    def observations(self):
        return [encode_state(self.world, a, self.cfg) for a in self.agent_ids]

    def step(self, action, check=False):
        self.world, r, done, info = step(
            self.world, action, self.cfg, self.rng,
            fixed_task=self.fixed_task, check=check)
        return self.observations(), r, done, info
