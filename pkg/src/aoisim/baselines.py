"""Reference policies and the non-separable (fixed) transmission scheme."""

import numpy as np

from . import env as env_mod, scheduler

POLICY_KINDS = ("random_feasible", "full_power", "fixed_task", "learned")


def random_feasible_policy(world, cfg, rng):
    """Uniform raw actions pushed through the feasibility projection."""
    raws = [rng.uniform(-1.0, 1.0, env_mod.uav_action_size(cfg))
            for _ in range(cfg.num_uavs)]
    raws.append(rng.uniform(-1.0, 1.0, env_mod.hap_action_size(cfg)))
    return env_mod.decode_action(raws, world, cfg)


def full_power_policy(action, cfg):
    """Overlay: every assigned link gets p_max split equally over the user's
    subchannels (C3 with equality) and every UAV backhaul runs at p_max."""
    K = action.assignment
    power = np.zeros_like(action.user_power)
    counts = K.sum(axis=(1, 2))
    for m in range(cfg.num_users):
        if counts[m]:
            power[m][K[m]] = cfg.p_max_user / counts[m]
    action.user_power = power
    action.hap_power = np.full_like(action.hap_power, cfg.p_max_uav)
    return action


def fixed_task_slot(ledger, rates, assignment, backhaul, cfg, t):
    """One slot of the non-separable baseline scheduler.

    A task moves only as an atomic whole: sent only if one slot's rate
    covers it, processed at the UAV only if the spare CPU covers the whole
    task, else forwarded whole (later slots) only if the backhaul slot
    capacity covers it, and processed at the HAP only if its spare CPU
    covers it. Returns (uav cycles used, hap cycles used).
    """
    K = np.asarray(assignment, dtype=bool)
    U = K.shape[1]
    M, S = ledger.total.shape
    link_bits = np.where(K, rates, 0.0).sum(axis=2).T  # (U, M)
    cpu_spare = np.full(U, cfg.C_max_uav)

    # forwarding of whole-task remnants stored in earlier slots, FIFO
    hap_arrivals = np.zeros((M, S))
    for u in range(U):
        budget = float(backhaul[u])
        keep = []
        for entry in ledger.uav_queues[u]:
            arrival, m, s, bits = entry
            if arrival < t and bits <= budget:
                budget -= bits
                hap_arrivals[m, s] += bits
                ledger.uav_remnant[u, m, s] -= bits
            else:
                keep.append(entry)
        ledger.uav_queues[u] = keep

    # atomic transmission + atomic UAV processing decision
    for m in range(M):
        s = ledger.active_task(m)
        if s is None or ledger.user_remaining[m, s] <= 0.0:
            continue
        alpha = float(ledger.user_remaining[m, s])
        totals = link_bits[:, m]
        u = int(np.argmax(totals))
        if totals[u] < alpha:
            continue  # transmission fail this slot, task stays at the user
        ledger.user_remaining[m, s] = 0.0
        need = cfg.c_u * alpha
        if need <= cpu_spare[u]:
            cpu_spare[u] -= need
            ledger.processed[m, s] += alpha
        else:
            scheduler.enqueue_remnants(
                ledger, u, _one_hot(M, S, m, s, alpha), t)

    # atomic HAP processing over buffered whole tasks
    ledger.hap_pool += hap_arrivals
    hap_spare = cfg.C_max_hap
    for m, s in zip(*np.nonzero(ledger.hap_pool > 0.0)):
        bits = float(ledger.hap_pool[m, s])
        need = cfg.c_hap * bits
        if need <= hap_spare:
            hap_spare -= need
            ledger.processed[m, s] += bits
            ledger.hap_pool[m, s] = 0.0
    cpu_uav = cfg.C_max_uav - cpu_spare
    return cpu_uav, cfg.C_max_hap - hap_spare


def _one_hot(M, S, m, s, value):
    out = np.zeros((M, S))
    out[m, s] = value
    return out


def has_transmission_fail(ledger, cfg):
    """True when some generated task was never transmitted (still whole at
    the user), the fixed scheme's terminal failure signature."""
    started = ledger.gen_time >= 0
    return bool(np.any(started & (ledger.user_remaining >= ledger.total - 1e-9)
                       & ~ledger.completed))


def max_single_slot_rate(cfg):
    """Upper bound on one user's single-slot uplink volume, for sizing the
    guaranteed-transmission-fail scenario."""
    # best case: closest possible user, full power, no interference
    g = cfg.beta0 / (cfg.h_min ** 2) / cfg.noise_power
    snr = g * cfg.p_max_user
    return cfg.sc_per_user_cap * cfg.subchannel_bandwidth * np.log2(1.0 + snr)
