"""Single-user solver: maximum speed, closed-form power control, sequential positions."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .channel import ChannelRealization, Scenario
from .motor import MotorParams
from .problem import Problem, Solution, dinkelbach_batch, finalize, su_objective
from .search import sequential_update


@dataclass(frozen=True)
class DinkelbachContext:
    a: float  # transmit time T - tau
    b: float  # a * P_s + motor energy
    channel_gain: float  # ||h||^2
    sigma2: float
    p_max: float
    tolerance: float = 1e-6

    def __post_init__(self):
        if not (self.a > 0 and self.b > 0):
            raise ValueError("need a > 0 and b > 0")

    def ee(self, p):
        p = np.asarray(p, dtype=float)
        return self.a * np.log2(1.0 + p * self.channel_gain / self.sigma2) / (self.a * p + self.b)


def mrt_direction(h) -> np.ndarray:
    h = np.asarray(h)
    norm = np.linalg.norm(h)
    if norm == 0:
        raise ValueError("zero channel has no MRT direction")
    return h / norm


def dinkelbach_power(ctx: DinkelbachContext, max_iter: int = 50):
    """Optimal transmit power for one context.

    Returns ``(p_star, eta_star, eta_trace)``; the trace starts at 0 (``p = 0``).
    """
    trace = []
    p, eta, _ = dinkelbach_batch(np.array([ctx.channel_gain / ctx.sigma2]), ctx.a, ctx.b,
                                 ctx.p_max, ctx.tolerance, max_iter, trace)
    return float(p[0]), float(eta[0]), [float(t[0]) for t in trace]


def su_position_search(problem: Problem, eps: float = 1e-4, conventional: bool = False,
                       max_rounds: int = 50):
    return sequential_update(problem, su_objective(problem, conventional), eps=eps,
                             max_rounds=max_rounds)


def beamformer(problem: Problem, idx, conventional: bool = False, eps: float = 1e-6):
    """Optimal beamformer ``sqrt(p*) h / ||h||`` at the given DPV."""
    sc = problem.scenario
    h = problem.channel(idx)[:, 0]
    a, e_motor = problem.timing(np.asarray(idx)[None, :], conventional)
    gain = np.sum(np.abs(h) ** 2) / sc.noise_power
    p, eta, iters = dinkelbach_batch(np.array([gain]), a, a * sc.p_static + e_motor,
                                     sc.p_max, eps)
    return (np.sqrt(p[0]) * mrt_direction(h))[:, None], float(eta[0]), iters


def su_solve(scenario: Scenario, motor: MotorParams, realization: ChannelRealization,
             cpv_idx=None, eps: float = 1e-4, conventional: bool = False,
             scheme: str = "proposed") -> Solution:
    """Single-user EE maximisation at ``v = v_max``.

    With ``conventional=True`` the internal objective ignores movement time and
    motor energy; the returned breakdown is always the true block EE.
    """
    problem = Problem.build(scenario, motor, realization, cpv_idx)
    res = su_position_search(problem, eps, conventional)
    W, eta, iters = beamformer(problem, res.idx, conventional)
    diag = {"ee_trace": res.trace, "rounds": res.rounds, "evaluations": res.evaluations,
            "converged": res.converged, "internal_ee": eta}
    return finalize(problem, scheme, res.idx, W, diag)


def su_fpa(problem: Problem) -> Solution:
    W, eta, iters = beamformer(problem, problem.cpv_idx)
    return finalize(problem, "fpa", problem.cpv_idx, W,
                    {"converged": True, "internal_ee": eta, "dinkelbach_iterations": iters})
