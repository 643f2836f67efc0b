"""Residual computation and schedule-set policies: RBP, GRBP, GRBPp, full."""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

import numpy as np


class Policy(str, Enum):
    RBP = "rbp"       # single device with the largest residual
    GRBP = "grbp"     # top-k residual group, drained one device per iteration
    GRBPP = "grbpp"   # GRBP plus a full parallel refresh when the group empties
    FULL = "full"     # flooding (HyGAMP) schedule


@dataclass(frozen=True)
class ScheduleSet:
    """Ordered set of device indices (0-based) eligible for update."""

    indices: tuple[int, ...]
    policy: Policy = Policy.FULL

    def __post_init__(self):
        if len(set(self.indices)) != len(self.indices):
            raise ValueError("duplicate device indices in schedule")
        if self.indices and min(self.indices) < 0:
            raise ValueError("negative device index in schedule")

    def __len__(self) -> int:
        return len(self.indices)


def full_schedule(n_devices: int, policy: Policy = Policy.FULL) -> ScheduleSet:
    return ScheduleSet(tuple(range(n_devices)), policy)


def _indices(s) -> tuple[int, ...]:
    if isinstance(s, ScheduleSet):
        return s.indices
    return tuple(int(i) for i in s)


def compute_residuals(h_hat_new, h_hat_old, rho_nm_new=None, rho_nm_old=None) -> np.ndarray:
    """Per-device residual: Euclidean norm across antennas of the change in
    posterior means.

    The rho arguments are accepted so a (mean, variance, rho) composite metric
    can be swapped in; the default metric ignores them. Devices whose beliefs
    did not move get residual 0; the engine keeps their previously computed
    residual instead.
    """
    d = np.asarray(h_hat_new) - np.asarray(h_hat_old)
    return np.sqrt(np.sum(d.real ** 2 + d.imag ** 2, axis=1))


def update_rbp(residuals) -> ScheduleSet:
    """Single-device schedule: the argmax residual, ties to the lowest index."""
    return ScheduleSet((int(np.argmax(np.asarray(residuals))),), Policy.RBP)


def _top_k(residuals, k: int) -> tuple[int, ...]:
    order = np.argsort(-np.asarray(residuals), kind="stable")  # ties -> lower index first
    return tuple(int(i) for i in order[:k])


def update_grbp(s_prev, residuals, detected_count: int) -> ScheduleSet:
    """Group-residual schedule: form a top-k group when none is left, else drop
    the group's first element. k = max(detected_count, 1) so the group never
    forms empty."""
    prev = _indices(s_prev)
    if len(prev) == 0:
        k = max(int(detected_count), 1)
        return ScheduleSet(_top_k(residuals, k), Policy.GRBP)
    return ScheduleSet(prev[1:], Policy.GRBP)


def update_grbpp(s_prev, residuals, detected_count: int, n_devices: int) -> ScheduleSet:
    """GRBP with a full parallel refresh each time the group empties.

    An empty previous set yields the full schedule; a full previous set means
    the refresh just ran, so the next group forms from its residuals; anything
    else drains like GRBP.
    """
    prev = _indices(s_prev)
    if len(prev) == 0:
        return ScheduleSet(tuple(range(n_devices)), Policy.GRBPP)
    if len(prev) == n_devices:
        k = max(int(detected_count), 1)
        return ScheduleSet(_top_k(residuals, k), Policy.GRBPP)
    return ScheduleSet(prev[1:], Policy.GRBPP)


def update_count(s, n_antennas: int) -> int:
    """Message-update cost of one iteration: antennas times schedule size."""
    return int(n_antennas) * len(_indices(s))
