"""Multi-user solver: Dinkelbach outer loop, SCA precoding, sequential positions, AO."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import kinematics
from .barrier import BarrierResult, InfeasibleLinearization, LinearizedSubproblem, solve
from .channel import ChannelRealization, Scenario
from .metrics import sum_rate, transmit_power
from .motor import MotorParams
from .problem import Problem, Solution, finalize, fixed_precoder_objective
from .search import sequential_update

XI_FLOOR = 1e-12


@dataclass
class ScaState:
    W: np.ndarray
    chi: np.ndarray  # SINR slacks
    xi: np.ndarray  # interference-plus-noise slacks (W)
    eta: float
    objective: float = float("nan")  # a sum log2(1+chi) - eta (a Tr(WW^H) + b)


@dataclass
class PrecodingResult:
    W: np.ndarray
    eta: float
    eta_trace: list = field(default_factory=list)
    sca_traces: list = field(default_factory=list)  # per outer iteration, true g(W) per SCA step
    converged: bool = False
    subproblems: int = 0
    newton_steps: int = 0
    restores: int = 0
    slack_gap: float = 0.0  # max_k gamma_k - chi_k at the last subproblem


def rotate_real(h, w):
    """Rotate ``w`` so that ``h^H w`` is real and non-negative."""
    w = np.asarray(w, dtype=complex)
    inner = np.vdot(h, w)
    if inner == 0:
        return w.copy()
    return w * np.exp(-1j * np.angle(inner))


def rotate_columns(H, W):
    W = np.array(W, dtype=complex)
    for k in range(W.shape[1]):
        W[:, k] = rotate_real(H[:, k], W[:, k])
    return W


def _sinr_parts(H, W, sigma2):
    power = np.abs(np.asarray(H).conj().T @ W) ** 2
    signal = np.diag(power)
    return signal, power.sum(axis=1) - signal + sigma2


def sca_subproblem(H, eta, a, b, sigma2, p_max, chi_lin, xi_lin, W_start,
                   tol: float = 1e-10) -> tuple[ScaState, BarrierResult]:
    """Solve one linearised precoding subproblem.

    ``chi_lin`` are SINRs and ``xi_lin`` interference-plus-noise powers (W) of
    the linearisation point; ``W_start`` must be (close to) feasible for it,
    e.g. the precoder the point was computed from.
    """
    if a <= 0:
        raise ValueError("transmit time must be positive")
    sigma = np.sqrt(sigma2)
    sub = LinearizedSubproblem(np.asarray(H) / sigma, eta, p_max, np.asarray(chi_lin),
                               np.asarray(xi_lin) / sigma2, XI_FLOOR)
    res = solve(sub, sub.strict_start(W_start), tol=tol)
    obj = a * res.objective - eta * b
    state = ScaState(W=res.W, chi=res.chi, xi=res.xi * sigma2, eta=eta, objective=obj)
    return state, res


def precoding_ee(H, W, a, b, sigma2):
    return a * sum_rate(H, W, sigma2) / (a * transmit_power(W) + b)


def dinkelbach_precoding(H, a, b, sigma2, p_max, W0, eps1: float = 1e-4, eps2: float = 1e-4,
                         max_outer: int = 30, max_sca: int = 30) -> PrecodingResult:
    """EE-maximising precoder for fixed positions.

    Maximises ``a R(W) / (a Tr(WW^H) + b)`` over the power ball.  The outer loop
    updates the ratio ``eta``; the inner loop runs SCA on
    ``g(W) = a R(W) - eta (a Tr(WW^H) + b)``, accepting only steps that raise the
    true ``g``.  Because ``g`` is close to zero at the start of every inner loop
    its relative increase is measured against ``a R(W)``.
    """
    H = np.asarray(H)
    W = rotate_columns(H, W0)
    if transmit_power(W) > p_max * (1 + 1e-12):
        raise ValueError("initial precoder violates the power budget")
    eta = precoding_ee(H, W, a, b, sigma2)
    out = PrecodingResult(W=W, eta=eta, eta_trace=[eta])

    def g(Wx, eta_x):
        return a * sum_rate(H, Wx, sigma2) - eta_x * (a * transmit_power(Wx) + b)

    for _ in range(max_outer):
        g_cur = g(W, eta)
        trace = [g_cur]
        for _ in range(max_sca):
            signal, noise = _sinr_parts(H, W, sigma2)
            if np.any(signal <= 0):
                break
            try:
                state, res = sca_subproblem(H, eta, a, b, sigma2, p_max, signal / noise,
                                            noise, W)
            except InfeasibleLinearization:
                out.restores += 1
                break
            out.subproblems += 1
            out.newton_steps += res.newton_steps
            W_new = rotate_columns(H, state.W)
            g_new = g(W_new, eta)
            if g_new <= g_cur:
                break
            sig_new, noise_new = _sinr_parts(H, W_new, sigma2)
            out.slack_gap = float(np.max(sig_new / noise_new - state.chi))
            gain = g_new - g_cur
            W, g_cur = W_new, g_new
            trace.append(g_cur)
            if gain <= eps2 * a * sum_rate(H, W, sigma2):
                break
        out.sca_traces.append(trace)
        eta_new = precoding_ee(H, W, a, b, sigma2)
        out.eta_trace.append(eta_new)
        done = abs(eta_new - eta) < eps1
        eta = max(eta, eta_new)
        if done:
            out.converged = True
            break
    out.W, out.eta = W, eta
    return out


def mu_position_search(problem: Problem, W, start=None, eps: float = 1e-4,
                       conventional: bool = False, max_rounds: int = 50):
    """Sequential position update with the precoder held fixed."""
    return sequential_update(problem, fixed_precoder_objective(problem, W, conventional),
                             start=start, eps=eps, max_rounds=max_rounds)


def precode_at(problem: Problem, idx, W0, conventional: bool = False,
               eps1: float = 1e-4, eps2: float = 1e-4) -> PrecodingResult:
    sc = problem.scenario
    a, e_motor = problem.timing(np.asarray(idx)[None, :], conventional)
    a, e_motor = float(a[0]), float(e_motor[0])
    return dinkelbach_precoding(problem.channel(idx), a, a * sc.p_static + e_motor,
                                sc.noise_power, sc.p_max, W0, eps1, eps2)


def internal_ee(problem: Problem, idx, W, conventional: bool = False) -> float:
    return float(fixed_precoder_objective(problem, W, conventional)(np.asarray(idx)[None, :])[0])


def alternating_optimization(problem: Problem, position_block, conventional: bool = False,
                             eps: float = 1e-4, max_iter: int = 20, W0=None,
                             eps1: float = 1e-4, eps2: float = 1e-4,
                             initial: PrecodingResult | None = None):
    """Precoding / position alternation starting at the initial positions.

    ``position_block(problem, W, idx)`` returns new grid indices for a fixed
    precoder.  ``initial`` may carry an already computed precoding at the
    initial positions (it does not depend on ``conventional`` because both
    objectives are proportional there).  Returns ``(idx, W, diagnostics)``.
    """
    sc = problem.scenario
    idx = problem.cpv_idx.copy()
    if initial is not None:
        prec = initial
    else:
        if W0 is None:
            W0 = problem.mrt(idx, sc.p_max / 2)
        prec = precode_at(problem, idx, W0, conventional, eps1, eps2)
    W = prec.W
    value = internal_ee(problem, idx, W, conventional)
    diag = {"ao_trace": [value], "eta_traces": [prec.eta_trace], "subproblems": prec.subproblems,
            "newton_steps": prec.newton_steps, "position_evaluations": 0,
            "precoding_converged": [prec.converged], "restores": prec.restores,
            "slack_gap": prec.slack_gap, "converged": False}
    for it in range(1, max_iter + 1):
        new_idx, evaluations = position_block(problem, W, idx)
        diag["position_evaluations"] += evaluations
        _, W_perm, q = kinematics.renumber_sorted(new_idx.astype(float), W)
        new_idx = new_idx[q]
        prec = precode_at(problem, new_idx, W_perm, conventional, eps1, eps2)
        new_value = internal_ee(problem, new_idx, prec.W, conventional)
        diag["subproblems"] += prec.subproblems
        diag["newton_steps"] += prec.newton_steps
        diag["restores"] += prec.restores
        diag["eta_traces"].append(prec.eta_trace)
        diag["precoding_converged"].append(prec.converged)
        diag["slack_gap"] = prec.slack_gap
        if new_value < value:
            # numerical safeguard; each block is an ascent step so this should not trigger
            break
        idx, W = new_idx, prec.W
        diag["ao_trace"].append(new_value)
        diag["iterations"] = it
        if abs(new_value - value) <= eps * max(abs(value), 1e-300):
            diag["converged"] = True
            value = new_value
            break
        value = new_value
    return idx, W, diag


def sequential_block(eps: float = 1e-4, conventional: bool = False, rate_only: bool = False):
    def block(problem, W, idx):
        obj = fixed_precoder_objective(problem, W, conventional, rate_only)
        res = sequential_update(problem, obj, start=idx, eps=eps)
        return res.idx, res.evaluations
    return block


def mu_solve(scenario: Scenario, motor: MotorParams, realization: ChannelRealization,
             cpv_idx=None, eps: float = 1e-4, conventional: bool = False,
             scheme: str = "proposed", initial: PrecodingResult | None = None) -> Solution:
    """Joint precoding and position design at ``v = v_max`` for K users."""
    problem = Problem.build(scenario, motor, realization, cpv_idx)
    idx, W, diag = alternating_optimization(problem, sequential_block(eps, conventional),
                                            conventional, eps, initial=initial)
    return finalize(problem, scheme, idx, W, diag)


def initial_precoding(problem: Problem) -> PrecodingResult:
    """Precoding at the initial positions from the MRT start (shared by several schemes)."""
    idx = problem.cpv_idx
    return precode_at(problem, idx, problem.mrt(idx, problem.scenario.p_max / 2))


def mu_fpa(problem: Problem, initial: PrecodingResult | None = None) -> Solution:
    prec = initial_precoding(problem) if initial is None else initial
    return finalize(problem, "fpa", problem.cpv_idx, prec.W,
                    {"eta_trace": prec.eta_trace, "converged": prec.converged,
                     "subproblems": prec.subproblems})
