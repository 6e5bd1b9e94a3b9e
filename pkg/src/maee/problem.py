"""Per-realization problem data, solutions and the feasibility audit.

Positions are handled internally as integer indices into the candidate grid,
which makes spacing and grid-membership checks exact.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import kinematics
from .channel import CandidateGrid, ChannelRealization, Scenario, candidate_grid, initial_indices
from .metrics import EEBreakdown, energy_efficiency
from .motor import MotorParams, motor_power

LN2 = np.log(2.0)


@dataclass
class Problem:
    scenario: Scenario
    motor: MotorParams
    realization: ChannelRealization
    grid: CandidateGrid
    cpv_idx: np.ndarray
    table: np.ndarray  # (M, K) channel at every grid point
    min_gap: int  # grid steps between neighbours
    max_travel: int  # grid steps reachable within T at v_max

    @classmethod
    def build(cls, scenario: Scenario, motor: MotorParams, realization: ChannelRealization,
              cpv_idx=None) -> "Problem":
        grid = candidate_grid(scenario, motor.step_size)
        cpv = initial_indices(scenario, grid) if cpv_idx is None else np.asarray(cpv_idx, int)
        return cls(scenario=scenario, motor=motor, realization=realization, grid=grid,
                   cpv_idx=cpv, table=realization.grid_table(grid),
                   min_gap=grid.steps_for(scenario.d_min),
                   max_travel=grid.steps_within(motor.v_max * scenario.coherence_time))

    @property
    def n(self) -> int:
        return self.cpv_idx.size

    @property
    def k(self) -> int:
        return self.table.shape[1]

    @property
    def v_max(self) -> float:
        return self.motor.v_max

    @property
    def motor_power_vmax(self) -> float:
        return motor_power(self.motor, self.motor.v_max)

    def positions(self, idx) -> np.ndarray:
        return np.asarray(idx) * self.grid.step

    @property
    def cpv(self) -> np.ndarray:
        return self.positions(self.cpv_idx)

    def channel(self, idx) -> np.ndarray:
        """Channel matrix for index array(s) of shape (..., N) -> (..., N, K)."""
        return self.table[np.asarray(idx)]

    def timing(self, idx, conventional: bool = False):
        """Transmit time ``a = T - tau`` and motor energy for index array(s) at v_max.

        ``conventional`` drops the movement entirely (full block, no motor energy).
        """
        idx = np.asarray(idx)
        T = self.scenario.coherence_time
        if conventional:
            shape = idx.shape[:-1]
            return np.full(shape, 1.0), np.zeros(shape)
        tau_n = np.abs(idx - self.cpv_idx) * self.grid.step / self.v_max
        a = T - tau_n.max(axis=-1)
        e_motor = self.motor_power_vmax * tau_n.sum(axis=-1)
        return np.maximum(a, 0.0), e_motor

    def evaluate(self, idx, W) -> EEBreakdown:
        """True block EE of grid indices ``idx`` with precoder ``W`` at v_max."""
        return energy_efficiency(self.scenario, self.motor, self.cpv, self.positions(idx),
                                 self.v_max, W, self.channel(idx))

    def mrt(self, idx, total_power: float) -> np.ndarray:
        H = self.channel(idx)
        W = H / np.linalg.norm(H, axis=0, keepdims=True)
        return W * np.sqrt(total_power / W.shape[1])


@dataclass
class Solution:
    scheme: str
    dpv: np.ndarray
    dpv_idx: np.ndarray
    W: np.ndarray
    speed: float
    breakdown: EEBreakdown
    diagnostics: dict = field(default_factory=dict)

    @property
    def ee(self) -> float:
        return self.breakdown.ee


def finalize(problem: Problem, scheme: str, idx, W, diagnostics=None) -> Solution:
    """Renumber to ascending order, evaluate the true EE and attach an audit."""
    idx = np.asarray(idx, int)
    _, W_sorted, q = kinematics.renumber_sorted(idx.astype(float), W)
    idx = idx[q]
    breakdown = problem.evaluate(idx, W_sorted)
    diagnostics = dict(diagnostics or {})
    diagnostics["permutation"] = q.tolist()
    sol = Solution(scheme=scheme, dpv=problem.positions(idx), dpv_idx=idx, W=W_sorted,
                   speed=problem.v_max, breakdown=breakdown, diagnostics=diagnostics)
    sol.diagnostics["violations"] = audit(problem, sol)
    return sol


def audit(problem: Problem, sol: Solution) -> list[str]:
    """List every violated constraint of the original problem (empty when feasible)."""
    sc = problem.scenario
    issues = []
    if np.real(np.vdot(sol.W, sol.W)) > sc.p_max * (1 + 1e-9):
        issues.append("transmit power above p_max")
    idx = np.asarray(sol.dpv_idx)
    if np.any(idx < 0) or np.any(idx >= problem.grid.count) or \
            not np.allclose(sol.dpv, problem.positions(idx), rtol=0, atol=1e-15):
        issues.append("position off the candidate grid")
    if idx.size > 1 and kinematics.min_spacing(sol.dpv) < sc.d_min - 1e-12:
        issues.append("minimum spacing violated")
    travel = np.abs(sol.dpv - problem.cpv)
    if travel.max(initial=0.0) > sol.speed * sc.coherence_time * (1 + 1e-12):
        issues.append("movement exceeds coherence time")
    if sol.speed > problem.v_max * (1 + 1e-12):
        issues.append("speed above v_max")
    if travel.max(initial=0.0) > 0:
        plan = kinematics.MovePlan(problem.cpv, sol.dpv, sol.speed)
        hit = kinematics.check_collision_free(plan, sc.d_th)
        if hit is not None:
            issues.append(f"collision between {hit.i} and {hit.j} at t={hit.time:.6g}")
    return issues


# ---------------------------------------------------------------------------
# batched objectives: each maps index arrays (C, N) to values (C,)
# ---------------------------------------------------------------------------

def dinkelbach_batch(gain, a, b, p_max: float, eps: float = 1e-6, max_iter: int = 50,
                     trace: list | None = None):
    """Single-user EE power control for many contexts at once.

    ``gain`` is the normalised channel gain ``||h||^2 / sigma^2``.  Iterates the
    closed-form power update from ``p = 0`` until the EE changes by less than
    ``eps``.  Contexts with ``a <= 0`` get zero power and zero EE.
    Returns ``(p, eta, iterations)``.
    """
    gain = np.asarray(gain, dtype=float)
    a = np.broadcast_to(np.asarray(a, dtype=float), gain.shape)
    b = np.broadcast_to(np.asarray(b, dtype=float), gain.shape)
    live = (a > 0) & (gain > 0)
    p = np.zeros_like(gain)
    eta = np.zeros_like(gain)
    if trace is not None:
        trace.append(eta.copy())
    it = 0
    for it in range(1, max_iter + 1):
        with np.errstate(divide="ignore"):
            p_hat = np.where(eta > 0, 1.0 / (eta * LN2) - 1.0 / np.where(live, gain, 1.0), np.inf)
        p_new = np.where(live, np.clip(p_hat, 0.0, p_max), 0.0)
        eta_new = np.where(live, a * np.log2(1.0 + p_new * gain) / (a * p_new + b), 0.0)
        done = np.max(np.abs(eta_new - eta), initial=0.0) < eps
        # at the fixed point rounding can lower eta by an ulp; the newest p is still
        # the better stationary point, only the reported eta keeps the maximum
        p, eta = p_new, np.maximum(eta_new, eta)
        if trace is not None:
            trace.append(eta.copy())
        if done:
            break
    return p, eta, it


def su_objective(problem: Problem, conventional: bool = False, eps: float = 1e-6):
    """EE with optimal MRT power for each candidate DPV (single user)."""
    sc = problem.scenario

    def value(idx):
        h = problem.channel(idx)[..., 0]
        gain = np.sum(np.abs(h) ** 2, axis=-1) / sc.noise_power
        a, e_motor = problem.timing(idx, conventional)
        b = a * sc.p_static + e_motor
        _, eta, _ = dinkelbach_batch(gain, a, b, sc.p_max, eps)
        return eta

    return value


def fixed_precoder_objective(problem: Problem, W, conventional: bool = False,
                             rate_only: bool = False):
    """EE (or sum rate) of candidate DPVs with the precoder held fixed."""
    sc = problem.scenario
    W = np.asarray(W)
    p_tx = float(np.real(np.vdot(W, W)))

    def value(idx):
        H = problem.channel(idx)
        G = np.abs(np.einsum("...nk,ni->...ki", H.conj(), W)) ** 2
        signal = np.diagonal(G, axis1=-2, axis2=-1)
        interference = G.sum(axis=-1) - signal
        rate = np.sum(np.log2(1.0 + signal / (interference + sc.noise_power)), axis=-1)
        if rate_only:
            return rate
        a, e_motor = problem.timing(idx, conventional)
        return a * rate / (a * (p_tx + sc.p_static) + e_motor)

    return value
