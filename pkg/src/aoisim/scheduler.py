"""Elastic task transmission, CPU allocation, and the remaining-bit ledgers.

Bits of one task live in exactly four places: at the user (not yet sent),
as remnants inside a UAV store-and-forward queue, buffered at the HAP, or
counted as processed. `check_conservation` asserts the sum is the task size
at every slot boundary.
"""

from dataclasses import dataclass, field

import numpy as np

from .errors import PreconditionError

CONSERVATION_RTOL = 1e-6


@dataclass
class TaskLedger:
    total: np.ndarray          # (M, S) bits
    user_remaining: np.ndarray  # (M, S) bits still at the user
    gen_time: np.ndarray       # (M, S) slot the task was generated, -1 if not yet
    active: np.ndarray         # (M, S) bool, task currently being served
    processed: np.ndarray      # (M, S) bits processed at UAVs + HAP
    completed: np.ndarray      # (M, S) bool
    uav_remnant: np.ndarray    # (U, M, S) bits waiting in UAV memory
    hap_pool: np.ndarray       # (M, S) bits buffered at the HAP
    # FIFO queues per UAV: entries [arrival_slot, m, s, bits]
    uav_queues: list = field(default_factory=list)

    @property
    def num_users(self):
        return self.total.shape[0]

    def active_task(self, m):
        idx = np.nonzero(self.active[m])[0]
        return int(idx[0]) if len(idx) else None

    def tasks_generated(self, m):
        return int((self.gen_time[m] >= 0).sum())

    def all_done(self):
        return bool(self.completed.all())

    def copy(self):
        return TaskLedger(
            total=self.total.copy(),
            user_remaining=self.user_remaining.copy(),
            gen_time=self.gen_time.copy(),
            active=self.active.copy(),
            processed=self.processed.copy(),
            completed=self.completed.copy(),
            uav_remnant=self.uav_remnant.copy(),
            hap_pool=self.hap_pool.copy(),
            uav_queues=[[list(e) for e in q] for q in self.uav_queues],
        )


def new_ledger(cfg):
    """All users start with task 1 generated and active at slot 0."""
    M, S, U = cfg.num_users, cfg.max_tasks_per_user, cfg.num_uavs
    ledger = TaskLedger(
        total=np.full((M, S), float(cfg.task_size)),
        user_remaining=np.zeros((M, S)),
        gen_time=np.full((M, S), -1, dtype=int),
        active=np.zeros((M, S), dtype=bool),
        processed=np.zeros((M, S)),
        completed=np.zeros((M, S), dtype=bool),
        uav_remnant=np.zeros((U, M, S)),
        hap_pool=np.zeros((M, S)),
        uav_queues=[[] for _ in range(U)],
    )
    ledger.user_remaining[:, 0] = ledger.total[:, 0]
    ledger.gen_time[:, 0] = 0
    ledger.active[:, 0] = True
    return ledger


def transmit_user_bits(ledger, rates, assignment):
    """Send bits of each user's active task over its assigned links.

    The per-slot sendable volume is the summed rate over the user's links,
    capped by the bits remaining at the user; when capped, the per-link
    contributions are scaled proportionally. Returns arrived bits as an
    (U, M, S) array.
    """
    K = np.asarray(assignment, dtype=bool)
    U = K.shape[1]
    M, S = ledger.total.shape
    arrived = np.zeros((U, M, S))
    link_bits = np.where(K, rates, 0.0).sum(axis=2).T  # (U, M), 1-slot volume
    for m in range(M):
        s = ledger.active_task(m)
        if s is None:
            continue
        total_rate = float(link_bits[:, m].sum())
        if total_rate <= 0.0:
            continue
        sent = min(total_rate, float(ledger.user_remaining[m, s]))
        scale = sent / total_rate
        arrived[:, m, s] = link_bits[:, m] * scale
        ledger.user_remaining[m, s] -= sent
    return arrived


def _proportional_cpu(arrived_bits, fraction, cycles_per_bit, cycle_cap):
    """Scale the requested fractions so total cycle usage fits the cap."""
    fraction = np.asarray(fraction, dtype=float)
    if np.any(fraction < 0) or np.any(fraction > 1 + 1e-12):
        raise PreconditionError("CPU fraction outside [0, 1]")
    fraction = np.clip(fraction, 0.0, 1.0)
    requested = fraction * cycles_per_bit * arrived_bits
    total = requested.sum()
    eff = fraction if total <= cycle_cap else fraction * (cycle_cap / total)
    processed = eff * arrived_bits
    cycles_used = float((eff * cycles_per_bit * arrived_bits).sum())
    return processed, cycles_used, eff


def allocate_uav_cpu(arrived_bits, theta, cfg):
    """CPU allocation at one UAV for this slot's arrivals.

    Returns (processed bits, cycles used, remnant bits), all shaped like
    `arrived_bits`. Oversubscription is resolved by proportional scaling of
    theta so C5 holds by construction.
    """
    processed, cycles, eff = _proportional_cpu(
        np.asarray(arrived_bits, dtype=float), theta, cfg.c_u, cfg.C_max_uav)
    remnant = arrived_bits - processed
    return processed, cycles, remnant


def allocate_hap_cpu(pool_bits, eta, cfg):
    """CPU allocation at the HAP over forwarded plus previously buffered bits.

    Returns (processed bits, cycles used, new buffered pool).
    """
    processed, cycles, eff = _proportional_cpu(
        np.asarray(pool_bits, dtype=float), eta, cfg.c_hap, cfg.C_max_hap)
    return processed, cycles, pool_bits - processed


def enqueue_remnants(ledger, u, remnant, t):
    """Store this slot's unprocessed arrivals at UAV u for later forwarding."""
    for m, s in zip(*np.nonzero(remnant > 0.0)):
        bits = float(remnant[m, s])
        ledger.uav_queues[u].append([t, int(m), int(s), bits])
        ledger.uav_remnant[u, m, s] += bits


def forward_to_hap(ledger, u, backhaul_rate, t):
    """Forward stored remnants of UAV u to the HAP, FIFO, store-and-forward.

    Only remnants that arrived in slots before t are eligible. Returns
    (forwarded bits beta (M, S), flags phi (M, S)).
    """
    M, S = ledger.total.shape
    beta = np.zeros((M, S))
    phi = np.zeros((M, S), dtype=bool)
    budget = float(backhaul_rate)  # bits per slot, slot duration = 1
    queue = ledger.uav_queues[u]
    remaining_queue = []
    for entry in queue:
        arrival, m, s, bits = entry
        if budget <= 0.0 or arrival >= t:
            remaining_queue.append(entry)
            continue
        sent = min(bits, budget)
        beta[m, s] += sent
        phi[m, s] = True
        # queue entries and the remnant array accumulate separately, so the
        # subtraction can leave ~1e-9 float residue; snap it out
        ledger.uav_remnant[u, m, s] = max(0.0, ledger.uav_remnant[u, m, s] - sent)
        budget -= sent
        if sent < bits:
            remaining_queue.append([arrival, m, s, bits - sent])
    ledger.uav_queues[u] = remaining_queue
    return beta, phi


def record_processed(ledger, processed_ms):
    ledger.processed += processed_ms


def detect_completions(ledger):
    """Tasks whose processed total reached the task size this slot."""
    tol = CONSERVATION_RTOL * ledger.total
    done = ledger.active & (ledger.processed >= ledger.total - tol)
    completions = [(int(m), int(s)) for m, s in zip(*np.nonzero(done))]
    for m, s in completions:
        ledger.active[m, s] = False
        ledger.completed[m, s] = True
    return completions


def maybe_generate_task(ledger, rng, cfg, t):
    """Bernoulli task generation once the previous task has been processed.

    Every eligible user consumes one RNG draw per slot so trajectories stay
    aligned across config tweaks that do not change eligibility.
    """
    M, S = ledger.total.shape
    for m in range(M):
        if ledger.active_task(m) is not None:
            continue
        nxt = ledger.tasks_generated(m)
        if nxt >= S:
            continue
        if rng.random() < cfg.task_gen_prob:
            ledger.user_remaining[m, nxt] = ledger.total[m, nxt]
            ledger.gen_time[m, nxt] = t
            ledger.active[m, nxt] = True
    return ledger


def check_conservation(ledger):
    """Per-task bit balance: user + in-flight + processed == total."""
    in_flight = ledger.uav_remnant.sum(axis=0) + ledger.hap_pool
    started = ledger.gen_time >= 0
    balance = ledger.user_remaining + in_flight + ledger.processed
    tol = CONSERVATION_RTOL * ledger.total
    ok = np.abs(balance - ledger.total) <= tol
    if not np.all(ok[started]):
        bad = np.argwhere(started & ~ok)
        m, s = bad[0]
        raise AssertionError(
            f"bit conservation violated for task ({m},{s}): "
            f"balance={balance[m, s]}, total={ledger.total[m, s]}")
    if np.any(ledger.user_remaining < -1e-9) or np.any(in_flight < -1e-9):
        raise AssertionError("negative ledger entry")
    return True
