"""Antenna movement: delays, trajectories, collision checks and renumbering."""

from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np


class KinematicsError(ValueError):
    pass


@dataclass(frozen=True)
class MovePlan:
    """Straight constant-speed moves from ``cpv`` to ``dpv``."""

    cpv: np.ndarray
    dpv: np.ndarray
    speed: float

    def __post_init__(self):
        object.__setattr__(self, "cpv", np.asarray(self.cpv, dtype=float))
        object.__setattr__(self, "dpv", np.asarray(self.dpv, dtype=float))
        if self.cpv.shape != self.dpv.shape:
            raise KinematicsError("cpv and dpv must have the same length")
        if not self.speed > 0:
            raise KinematicsError("speed must be positive")

    @property
    def delays(self) -> np.ndarray:
        return np.abs(self.dpv - self.cpv) / self.speed

    @property
    def max_delay(self) -> float:
        return float(self.delays.max()) if self.delays.size else 0.0


@dataclass(frozen=True)
class Collision:
    i: int
    j: int
    time: float


def movement_delays(cpv, dpv, v: float):
    """Per-antenna delays and the overall movement time."""
    plan = MovePlan(cpv, dpv, v)
    tau = plan.delays
    return tau, float(tau.max()) if tau.size else 0.0


def trajectory_position(plan: MovePlan, n: int, t: float) -> float:
    if t < 0 or t > plan.max_delay * (1 + 1e-12) + 1e-15:
        raise KinematicsError(f"time {t} outside [0, {plan.max_delay}]")
    x0, x1 = plan.cpv[n], plan.dpv[n]
    if t < plan.delays[n]:
        return float(x0 + plan.speed * t * np.sign(x1 - x0))
    return float(x1)


def _positions_at(plan: MovePlan, t: float) -> np.ndarray:
    # Clipped form of the piecewise trajectory; equal to trajectory_position.
    step = plan.speed * t
    return plan.cpv + np.clip(plan.dpv - plan.cpv, -step, step)


def check_collision_free(plan: MovePlan, d_th: float, tol: float = 1e-12):
    """Return ``None`` when every pair stays ``d_th`` apart, else the earliest :class:`Collision`.

    Pairwise distances are piecewise linear in time with breakpoints at the
    individual arrival times, so checking each linear segment is exact.
    """
    n = plan.cpv.size
    tau = plan.delays
    horizon = plan.max_delay
    worst = None
    for i in range(n):
        for j in range(i + 1, n):
            knots = sorted({0.0, float(tau[i]), float(tau[j]), horizon})
            for ta, tb in zip(knots[:-1] or [0.0], knots[1:] or [0.0]):
                hit = _segment_violation(plan, i, j, ta, tb, d_th, tol)
                if hit is not None and (worst is None or hit < worst.time):
                    worst = Collision(i, j, hit)
                    break
    return worst


def _segment_violation(plan, i, j, ta, tb, d_th, tol):
    pa = _positions_at(plan, ta)
    pb = _positions_at(plan, tb)
    da = pa[i] - pa[j]
    db = pb[i] - pb[j]
    if abs(da) < d_th - tol:
        return ta
    crosses = da * db < 0
    if not crosses and abs(db) >= d_th - tol:
        return None
    if tb == ta:
        return ta
    slope = (db - da) / (tb - ta)
    target = np.sign(da) * d_th
    return ta + (target - da) / slope


def renumber_sorted(dpv, W=None):
    """Sort destinations ascending and permute precoder rows to match.

    Returns ``(dpv_sorted, W_permuted, q)`` with ``dpv_sorted = dpv[q]`` and
    ``W_permuted[n] = W[q[n]]``.
    """
    dpv = np.asarray(dpv, dtype=float)
    q = np.argsort(dpv, kind="stable")
    if np.any(np.diff(dpv[q]) == 0):
        raise KinematicsError("destination positions must be distinct")
    W_perm = None if W is None else np.asarray(W)[q]
    return dpv[q], W_perm, q


def min_total_delay_oracle(cpv, dpv, v: float):
    """Brute-force the assignment of destinations to antennas minimising total delay."""
    cpv = np.asarray(cpv, dtype=float)
    dpv = np.asarray(dpv, dtype=float)
    n = cpv.size
    if n > 8:
        raise KinematicsError("enumeration is limited to N <= 8")
    best, best_cost = None, np.inf
    for perm in itertools.permutations(range(n)):
        cost = float(np.sum(np.abs(dpv[list(perm)] - cpv)))
        if cost < best_cost:
            best, best_cost = perm, cost
    return np.array(best), best_cost / v


def lemma1_check(a: float, b: float, c: float, d: float) -> bool:
    """Uncrossed pairing never costs more than the crossed one (non-strict)."""
    if not (0 < a < b and 0 < c < d):
        raise KinematicsError("need 0 < a < b and 0 < c < d")
    return abs(a - c) + abs(b - d) <= abs(a - d) + abs(b - c)


def min_spacing(x) -> float:
    x = np.sort(np.asarray(x, dtype=float))
    return float(np.min(np.diff(x))) if x.size > 1 else np.inf
