"""Comparison schemes: fixed positions, conventional EE, sum-rate, PSO and zero-forcing."""

from __future__ import annotations

import enum

import numpy as np

from .channel import ChannelRealization, Scenario
from .kinematics import renumber_sorted
from .mu import PrecodingResult, alternating_optimization, mu_fpa, mu_solve
from .problem import (LN2, Problem, Solution, dinkelbach_batch, finalize,
                      fixed_precoder_objective, su_objective)
from .search import sequential_update
from .su import beamformer, su_fpa, su_solve
from .motor import MotorParams


class BaselineKind(enum.Enum):
    FPA = "fpa"
    CONV_EE = "convee"
    SM = "sm"
    PSO = "pso"
    ZF = "zf"


# ---------------------------------------------------------------------------
# FPA and ConvEE
# ---------------------------------------------------------------------------

def fpa_solve(scenario: Scenario, motor: MotorParams, realization: ChannelRealization,
              cpv_idx=None, initial: PrecodingResult | None = None) -> Solution:
    problem = Problem.build(scenario, motor, realization, cpv_idx)
    return su_fpa(problem) if problem.k == 1 else mu_fpa(problem, initial)


def conv_ee_solve(scenario: Scenario, motor: MotorParams, realization: ChannelRealization,
                  cpv_idx=None, initial: PrecodingResult | None = None) -> Solution:
    """Optimise the EE without movement time and motor power, then report the true EE."""
    if scenario.num_users == 1:
        return su_solve(scenario, motor, realization, cpv_idx, conventional=True,
                        scheme="convee")
    return mu_solve(scenario, motor, realization, cpv_idx, conventional=True, scheme="convee",
                    initial=initial)


# ---------------------------------------------------------------------------
# SM: sum-rate maximisation with WMMSE precoding
# ---------------------------------------------------------------------------

def _power(W) -> float:
    return float(np.real(np.vdot(W, W)))


def _precoder_for_mu(Hn, m, u, mu):
    N = Hn.shape[0]
    A = (Hn * (m * np.abs(u) ** 2)) @ Hn.conj().T + mu * np.eye(N)
    B = Hn * (m * u)
    if mu > 0:
        try:
            W = np.linalg.solve(A, B)
            if np.all(np.isfinite(W)):
                return W
        except np.linalg.LinAlgError:
            pass
    # A has rank K < N as mu -> 0; the minimum-norm solution is the limit
    return np.linalg.lstsq(A, B, rcond=None)[0]


def wmmse(H, sigma2: float, p_max: float, W0=None, max_iter: int = 100, tol: float = 1e-5):
    """Weighted-MMSE sum-rate precoder at total power ``p_max``.

    Returns ``(W, rate_trace)``.  The rate trace is non-decreasing.
    """
    Hn = np.asarray(H) / np.sqrt(sigma2)
    N, K = Hn.shape
    if W0 is None:
        W0 = Hn / np.linalg.norm(Hn, axis=0, keepdims=True)
    W = np.asarray(W0, dtype=complex)
    W = W * np.sqrt(p_max / _power(W))

    def rate(Wx):
        G = np.abs(Hn.conj().T @ Wx) ** 2
        s = np.diag(G)
        return float(np.sum(np.log2(1.0 + s / (G.sum(axis=1) - s + 1.0))))

    trace = [rate(W)]
    for _ in range(max_iter):
        G = Hn.conj().T @ W  # [k, i] = h_k^H w_i
        total = np.sum(np.abs(G) ** 2, axis=1) + 1.0
        u = np.diag(G) / total
        m = 1.0 / (1.0 - np.real(np.conj(u) * np.diag(G)))
        lo, hi = 0.0, 1.0
        W_new = None
        try:
            W_new = _precoder_for_mu(Hn, m, u, 0.0)
        except np.linalg.LinAlgError:
            pass
        if W_new is None or not np.all(np.isfinite(W_new)) or _power(W_new) > p_max:
            while _power(_precoder_for_mu(Hn, m, u, hi)) > p_max:
                hi *= 2.0
            for _ in range(100):
                mid = 0.5 * (lo + hi)
                Wm = _precoder_for_mu(Hn, m, u, mid)
                if _power(Wm) > p_max:
                    lo = mid
                else:
                    hi = mid
                if hi - lo <= 1e-12 * hi:
                    break
            W_new = _precoder_for_mu(Hn, m, u, hi)
        # sum-rate optimum uses the full budget
        W_new = W_new * np.sqrt(p_max / _power(W_new))
        r = rate(W_new)
        if r < trace[-1]:
            break
        W = W_new
        trace.append(r)
        if r - trace[-2] <= tol * abs(trace[-2]):
            break
    return W, trace


def sm_solve(scenario: Scenario, motor: MotorParams, realization: ChannelRealization,
             cpv_idx=None, eps: float = 1e-4, max_iter: int = 20) -> Solution:
    """Sum-rate maximisation at full power; the reported EE is the true block EE."""
    problem = Problem.build(scenario, motor, realization, cpv_idx)
    sc = problem.scenario
    if problem.k == 1:
        def rate(idx):
            h = problem.channel(idx)[..., 0]
            return np.log2(1.0 + sc.p_max * np.sum(np.abs(h) ** 2, axis=-1) / sc.noise_power)

        res = sequential_update(problem, rate, eps=eps)
        h = problem.channel(res.idx)[:, 0]
        W = (np.sqrt(sc.p_max) * h / np.linalg.norm(h))[:, None]
        diag = {"rate_trace": res.trace, "converged": res.converged}
        return finalize(problem, "sm", res.idx, W, diag)

    idx = problem.cpv_idx.copy()
    W, wtrace = wmmse(problem.channel(idx), sc.noise_power, sc.p_max)
    value = wtrace[-1]
    diag = {"ao_trace": [value], "wmmse_traces": [wtrace], "converged": False}
    for _ in range(max_iter):
        obj = fixed_precoder_objective(problem, W, rate_only=True)
        res = sequential_update(problem, obj, start=idx, eps=eps)
        _, W_perm, q = renumber_sorted(res.idx.astype(float), W)
        new_idx = res.idx[q]
        W_new, wtrace = wmmse(problem.channel(new_idx), sc.noise_power, sc.p_max, W_perm)
        diag["wmmse_traces"].append(wtrace)
        new_value = wtrace[-1]
        if new_value < value:
            break
        idx, W = new_idx, W_new
        diag["ao_trace"].append(new_value)
        if new_value - value <= eps * abs(value):
            diag["converged"] = True
            break
        value = new_value
    return finalize(problem, "sm", idx, W, diag)


# ---------------------------------------------------------------------------
# ZF: zero-forcing directions, Dinkelbach water-filling, sequential positions
# ---------------------------------------------------------------------------

def zf_directions(H, cond_limit: float = 1e10):
    """Unit-norm ZF directions and effective gains ``|h_k^H d_k|^2`` for channel
    stacks of shape (..., N, K).  Rank-deficient stacks get NaN gains."""
    H = np.asarray(H)
    gram = np.swapaxes(H.conj(), -1, -2) @ H
    cond = np.linalg.cond(gram)
    ok = np.isfinite(cond) & (cond < cond_limit)
    safe = np.where(ok[..., None, None], gram, np.eye(H.shape[-1]))
    D = H @ np.linalg.inv(safe)
    norms = np.linalg.norm(D, axis=-2)
    gains = np.where(ok[..., None], 1.0 / norms ** 2, np.nan)
    return D / norms[..., None, :], gains


def water_fill_level(inv_gain, total: float):
    """Water level ``L`` with ``sum_k max(L - inv_gain_k, 0) = total`` (batched)."""
    s = np.sort(inv_gain, axis=-1)
    K = s.shape[-1]
    csum = np.cumsum(s, axis=-1)
    j = np.arange(1, K + 1)
    levels = (total + csum) / j
    valid = levels > s
    last = K - 1 - np.argmax(valid[..., ::-1], axis=-1)
    return np.take_along_axis(levels, last[..., None], axis=-1)[..., 0]


def zf_power(gain, a, b, p_max: float, eps: float = 1e-6, max_iter: int = 50):
    """Dinkelbach power allocation for interference-free users.

    ``gain`` (..., K) are normalised gains ``|h_k^H d_k|^2 / sigma^2``.
    Maximises ``a sum log2(1 + p_k g_k) / (a sum p_k + b)`` with ``sum p_k <= p_max``.
    Returns ``(p, eta)``.
    """
    gain = np.asarray(gain, dtype=float)
    shape = gain.shape[:-1]
    a = np.broadcast_to(np.asarray(a, dtype=float), shape)
    b = np.broadcast_to(np.asarray(b, dtype=float), shape)
    live = (a > 0) & np.all(np.isfinite(gain), axis=-1)
    g = np.where(live[..., None], gain, 1.0)
    inv = 1.0 / g
    full = water_fill_level(inv, p_max)
    eta = np.zeros(shape)
    p = np.zeros_like(g)
    for _ in range(max_iter):
        with np.errstate(divide="ignore"):
            free = np.where(eta > 0, 1.0 / (eta * LN2), np.inf)
        level = np.minimum(free, full)
        p = np.maximum(level[..., None] - inv, 0.0)
        eta_new = np.where(live, a * np.sum(np.log2(1.0 + p * g), axis=-1)
                           / (a * p.sum(axis=-1) + b), -np.inf)
        done = np.max(np.abs(np.where(live, eta_new - eta, 0.0)), initial=0.0) < eps
        eta = np.where(live, eta_new, -np.inf)
        if done:
            break
    return np.where(live[..., None], p, 0.0), eta


def zf_objective(problem: Problem, eps: float = 1e-6):
    sc = problem.scenario

    def value(idx):
        _, gains = zf_directions(problem.channel(idx))
        a, e_motor = problem.timing(idx)
        _, eta = zf_power(gains / sc.noise_power, a, a * sc.p_static + e_motor, sc.p_max, eps)
        return eta

    return value


def zf_precoder(problem: Problem, idx):
    sc = problem.scenario
    D, gains = zf_directions(problem.channel(idx))
    if not np.all(np.isfinite(gains)):
        raise np.linalg.LinAlgError("channel is rank deficient")
    a, e_motor = problem.timing(np.asarray(idx)[None, :])
    p, eta = zf_power(gains[None, :] / sc.noise_power, a, a * sc.p_static + e_motor, sc.p_max)
    return D * np.sqrt(p[0])[None, :], float(eta[0])


def zf_solve(scenario: Scenario, motor: MotorParams, realization: ChannelRealization,
             cpv_idx=None, eps: float = 1e-4) -> Solution:
    problem = Problem.build(scenario, motor, realization, cpv_idx)
    if problem.k > problem.n:
        raise ValueError("zero forcing needs at least as many antennas as users")
    res = sequential_update(problem, zf_objective(problem), eps=eps)
    W, eta = zf_precoder(problem, res.idx)
    diag = {"ee_trace": res.trace, "converged": res.converged, "internal_ee": eta}
    return finalize(problem, "zf", res.idx, W, diag)


# ---------------------------------------------------------------------------
# PSO over continuous positions with quantisation and repair
# ---------------------------------------------------------------------------

def quantize_repair(problem: Problem, x):
    """Map continuous positions (C, N) to feasible sorted grid indices.

    Returns ``(idx_sorted, order)`` where ``order[c, j]`` is the antenna whose
    coordinate landed in sorted slot ``j``.  Rounds to the grid, sorts, pushes
    neighbours apart to the minimum spacing (forward then backward) and finally
    clamps each slot to the travel radius of the matching initial position;
    the clamp keeps the spacing because both sequences are sorted with at
    least the minimum gap.
    """
    x = np.atleast_2d(np.asarray(x, dtype=float))
    M, gap, n = problem.grid.count, problem.min_gap, problem.n
    if (n - 1) * gap > M - 1:
        raise ValueError("grid too short for the minimum spacing")
    idx = np.clip(np.rint(x / problem.grid.step), 0, M - 1).astype(int)
    order = np.argsort(idx, axis=1, kind="stable")
    idx = np.take_along_axis(idx, order, axis=1)
    for j in range(1, n):
        idx[:, j] = np.maximum(idx[:, j], idx[:, j - 1] + gap)
    idx[:, -1] = np.minimum(idx[:, -1], M - 1)
    for j in range(n - 2, -1, -1):
        idx[:, j] = np.minimum(idx[:, j], idx[:, j + 1] - gap)
    c = problem.cpv_idx
    idx = np.clip(idx, c - problem.max_travel, c + problem.max_travel)
    return idx, order


def pso_violation(problem: Problem, x):
    """Relative spacing and travel violation of continuous positions (C, N)."""
    sc = problem.scenario
    xs = np.sort(x, axis=1)
    spacing = np.maximum(sc.d_min - np.diff(xs, axis=1), 0.0).sum(axis=1) / sc.d_min
    reach = problem.v_max * sc.coherence_time
    travel = np.maximum(np.abs(x - problem.cpv) - reach, 0.0).sum(axis=1) / reach
    return spacing + travel


def continuous_timing(problem: Problem, x):
    """Transmit time and motor energy of continuous positions (C, N); antenna ``n``
    travels from its own initial position."""
    T = problem.scenario.coherence_time
    tau = np.abs(x - problem.cpv) / problem.v_max
    return np.maximum(T - tau.max(axis=-1), 0.0), problem.motor_power_vmax * tau.sum(axis=-1)


def pso(problem: Problem, fitness, rng: np.random.Generator, seeds=(), swarm: int | None = None,
        iterations: int = 100, inertia: float = 0.72, c1: float = 1.49, c2: float = 1.49,
        clamp: float = 0.2, penalty: float = 1e3):
    """Global-best PSO over continuous positions in ``[0, A]^N``.

    ``fitness`` maps positions (C, N) to values (C,); spacing and travel
    violations are subtracted as ``penalty`` times their relative size.  The
    initial positions and any ``seeds`` join the swarm.
    Returns ``(gbest, value, trace)``.
    """
    sc = problem.scenario
    n, A = problem.n, sc.array_length
    S = swarm or 8 * n
    start = np.array([problem.cpv] + [np.asarray(x, dtype=float) for x in seeds])
    X = rng.uniform(0.0, A, size=(S, n))
    X[: len(start)] = start[:S]
    vmax = clamp * A
    V = rng.uniform(-vmax, vmax, size=(S, n))

    def score(X):
        return fitness(X) - penalty * pso_violation(problem, X)

    f = score(X)
    pbest, pval = X.copy(), f.copy()
    g = int(np.argmax(f))
    gbest, gval = X[g].copy(), float(f[g])
    trace = [gval]
    for _ in range(iterations):
        r1 = rng.random((S, n))
        r2 = rng.random((S, n))
        V = inertia * V + c1 * r1 * (pbest - X) + c2 * r2 * (gbest[None, :] - X)
        V = np.clip(V, -vmax, vmax)
        X = np.clip(X + V, 0.0, A)
        f = score(X)
        better = f > pval
        pbest[better], pval[better] = X[better], f[better]
        g = int(np.argmax(f))
        if f[g] > gval:
            gbest, gval = X[g].copy(), float(f[g])
        trace.append(gval)
    return gbest, gval, trace


def _unsort(idx_sorted, order):
    out = np.empty_like(idx_sorted)
    np.put_along_axis(out, order, idx_sorted, axis=-1)
    return out


def pso_position_solve(scenario: Scenario, motor: MotorParams, realization: ChannelRealization,
                       cpv_idx=None, rng: np.random.Generator | None = None,
                       iterations: int = 100, eps: float = 1e-4,
                       initial: PrecodingResult | None = None) -> Solution:
    """PSO positions with the same inner precoding as the proposed scheme.

    The swarm scores continuous positions; the best one is quantised and
    repaired at the end and kept only if it beats the incumbent on the grid.
    """
    rng = np.random.default_rng(0) if rng is None else rng
    problem = Problem.build(scenario, motor, realization, cpv_idx)
    sc = problem.scenario
    if problem.k == 1:
        def fitness(X):
            h = realization.response(X)[..., 0]
            a, e_motor = continuous_timing(problem, X)
            gain = np.sum(np.abs(h) ** 2, axis=-1) / sc.noise_power
            return dinkelbach_batch(gain, a, a * sc.p_static + e_motor, sc.p_max)[1]

        best, value, trace = pso(problem, fitness, rng, iterations=iterations)
        idx = quantize_repair(problem, best)[0][0]
        obj = su_objective(problem)
        if obj(idx[None, :])[0] < obj(problem.cpv_idx[None, :])[0]:
            idx = problem.cpv_idx.copy()
        W, eta, _ = beamformer(problem, idx)
        return finalize(problem, "pso", idx, W, {"pso_trace": trace, "converged": True,
                                                 "internal_ee": eta})

    def block(problem, W, idx):
        p_d = np.real(np.vdot(W, W)) + sc.p_static

        def fitness(X):
            H = realization.response(X)
            G = np.abs(np.einsum("cnk,ni->cki", H.conj(), W)) ** 2
            signal = np.diagonal(G, axis1=-2, axis2=-1)
            rate = np.sum(np.log2(1.0 + signal / (G.sum(axis=-1) - signal + sc.noise_power)),
                          axis=-1)
            a, e_motor = continuous_timing(problem, X)
            return a * rate / (a * p_d + e_motor)

        best, _, _ = pso(problem, fitness, rng, seeds=[problem.positions(idx)],
                         iterations=iterations)
        idx_sorted, order = quantize_repair(problem, best)
        cand = _unsort(idx_sorted, order)[0]
        obj = fixed_precoder_objective(problem, W)
        idx = np.asarray(idx)
        if obj(cand[None, :])[0] <= obj(idx[None, :])[0]:
            cand = idx.copy()
        return cand, (iterations + 1) * 8 * problem.n

    idx, W, diag = alternating_optimization(problem, block, eps=eps, initial=initial)
    return finalize(problem, "pso", idx, W, diag)


SOLVERS = {
    BaselineKind.FPA: fpa_solve,
    BaselineKind.CONV_EE: conv_ee_solve,
    BaselineKind.SM: sm_solve,
    BaselineKind.PSO: pso_position_solve,
    BaselineKind.ZF: zf_solve,
}
