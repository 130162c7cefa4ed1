"""Per-user Age of Information tracking and the shared reward."""

from dataclasses import dataclass, field

import numpy as np

from .errors import PreconditionError


@dataclass
class AoiTracker:
    age: np.ndarray                 # (M,) slots
    cumulative: float = 0.0         # sum over slots and users, episode objective
    history: list = field(default_factory=list)   # per-slot copies of age

    def copy(self):
        return AoiTracker(age=self.age.copy(), cumulative=self.cumulative,
                          history=[a.copy() for a in self.history])


def new_tracker(num_users):
    return AoiTracker(age=np.zeros(num_users, dtype=int))


def update_aoi(tracker, completions, gen_time, t):
    """Advance ages one slot; a completed task resets its user's age to t - F.

    `completions` is an iterable of (m, s) pairs satisfied this slot and
    `gen_time` the (M, S) generation-slot array.
    """
    tracker.age += 1
    for m, s in completions:
        f = int(gen_time[m, s])
        if f < 0:
            raise PreconditionError(f"completion for ungenerated task ({m},{s})")
        tracker.age[m] = t - f
    tracker.cumulative += float(tracker.age.sum())
    tracker.history.append(tracker.age.copy())
    return tracker


def reward(tracker):
    """Negative mean age over users; always <= 0."""
    return -float(tracker.age.mean())
