"""Uplink NOMA channel model with robust gains under CSI uncertainty.

All user-UAV gains are normalized to the subchannel noise power, so SNR
terms are simply gain * power and the rate denominators carry a "+1".
Robustness is constructive: rates are computed from the epsilon-quantile
of the Gaussian gain error, so the realized rate exceeds the computed one
with probability >= 1 - epsilon.
"""

from dataclasses import dataclass

import numpy as np
from scipy.stats import norm

from .errors import PreconditionError

SPEED_OF_LIGHT = 299_792_458.0


def path_gain(uav_pos, user_xy, beta0):
    """Free-space power gain beta0 / d^2 with d the 3D UAV-user distance."""
    dx = uav_pos[0] - user_xy[0]
    dy = uav_pos[1] - user_xy[1]
    d2 = dx * dx + dy * dy + uav_pos[2] * uav_pos[2]
    if d2 <= 0.0:
        raise PreconditionError("UAV-user distance must be positive")
    return beta0 / d2


def robust_effective_gain(est, err_std, eps):
    """Gain value exceeded with probability 1 - eps (clipped at zero)."""
    return np.maximum(0.0, est + norm.ppf(eps) * err_std)


def sic_order(assigned_users, eff_gains):
    """SIC decode order: effective gain descending, ties by user index."""
    users = list(assigned_users)
    if not users:
        raise PreconditionError("sic_order needs at least one assigned user")
    return tuple(sorted(users, key=lambda m: (-float(eff_gains[m]), m)))


@dataclass
class ChannelRealization:
    """Per-slot channel state for all (user, uav, subchannel) triples."""
    est_gain: np.ndarray   # (M, U, N), normalized to noise power
    err_std: np.ndarray    # (M, U, N)
    eff_gain: np.ndarray   # (M, U, N)


def realize_channels(user_xy, uav_pos, cfg):
    """Deterministic estimated gains from geometry plus robust quantile gains."""
    M, U = len(user_xy), len(uav_pos)
    est = np.empty((M, U, cfg.num_subchannels))
    for u in range(U):
        for m in range(M):
            g = path_gain(uav_pos[u], user_xy[m], cfg.beta0)
            est[m, u, :] = g / cfg.noise_power
    err_std = cfg.csi_uncertainty_bound * est
    eff = robust_effective_gain(est, err_std, cfg.epsilon_outage)
    return ChannelRealization(est_gain=est, err_std=err_std, eff_gain=eff)


def check_assignment(assignment, powers, cfg):
    """Raise if the assignment caps or the per-user power cap C3 are violated."""
    K = np.asarray(assignment, dtype=bool)
    per_user = K.sum(axis=(1, 2))
    if per_user.max(initial=0) > cfg.sc_per_user_cap:
        raise PreconditionError("per-user subchannel cap violated")
    per_sc = K.sum(axis=0)
    if per_sc.max(initial=0) > cfg.users_per_sc_cap:
        raise PreconditionError("per-subchannel user cap violated")
    spent = np.where(K, powers, 0.0).sum(axis=(1, 2))
    if spent.max(initial=0) > cfg.p_max_user * (1 + 1e-9):
        raise PreconditionError("per-user power cap C3 violated")
    if np.any(powers < 0):
        raise PreconditionError("negative transmit power")


def noma_rates(realization, assignment, powers, cfg):
    """Uplink NOMA rates R[m, u, n] in bit/s.

    The user decoded at SIC position m on (u, n) sees intra-cell
    interference from users at later positions on the same (u, n) and
    inter-cell interference from users of other UAVs on subchannel n at
    later positions of their own decode orders.
    """
    check_assignment(assignment, powers, cfg)
    K = np.asarray(assignment, dtype=bool)
    M, U, N = K.shape
    eff = realization.eff_gain
    B_n = cfg.subchannel_bandwidth
    # Per (u, n): decode order and the received-power chain G*p per position.
    orders = {}
    for u in range(U):
        for n in range(N):
            users = np.nonzero(K[:, u, n])[0]
            if len(users):
                orders[(u, n)] = sic_order(users, eff[:, u, n])
    rates = np.zeros((M, U, N))
    for (u, n), order in orders.items():
        for pos, m in enumerate(order):
            signal = eff[m, u, n] * powers[m, u, n]
            intra = sum(eff[j, u, n] * powers[j, u, n]
                        for j in order[pos + 1:])
            inter = 0.0
            for (u2, n2), order2 in orders.items():
                if n2 != n or u2 == u:
                    continue
                inter += sum(eff[j, u2, n2] * powers[j, u2, n2]
                             for j in order2[pos + 1:])
            rates[m, u, n] = B_n * np.log2(1.0 + signal / (intra + inter + 1.0))
    return rates


def free_space_loss(distance, freq):
    """(c / (4 pi d f))^2, linear."""
    return (SPEED_OF_LIGHT / (4.0 * np.pi * distance * freq)) ** 2


def uav_hap_rate(uav_pos, hap_pos, p_uav, cfg):
    """Backhaul rate of one UAV to the HAP, bit/s. Links are orthogonal."""
    if p_uav < 0 or p_uav > cfg.p_max_uav * (1 + 1e-9):
        raise PreconditionError(
            f"UAV power {p_uav} outside [0, {cfg.p_max_uav}] (C4)")
    d = float(np.linalg.norm(np.asarray(uav_pos) - np.asarray(hap_pos)))
    L_s = free_space_loss(d, cfg.carrier_freq)
    noise = cfg.k_B * cfg.T_temp * cfg.uav_hap_bandwidth
    snr = p_uav * cfg.antenna_gain * L_s * cfg.line_loss / noise
    return cfg.uav_hap_bandwidth * np.log2(1.0 + snr)
