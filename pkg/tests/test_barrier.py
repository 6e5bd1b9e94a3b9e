"""Convex precoding subproblem: KKT accuracy, an independent conic oracle and limits."""

import numpy as np
import pytest

from maee.barrier import InfeasibleLinearization, LinearizedSubproblem, solve
from maee.channel import Scenario, sample_channel
from maee.mu import XI_FLOOR, rotate_columns

LN2 = np.log(2.0)


def random_instance(rng, N=None, K=None):
    """Noise-normalised channel, a feasible precoder and the matching subproblem."""
    N = N or int(rng.integers(2, 7))
    K = K or int(rng.integers(1, min(N, 3) + 1))
    sc = Scenario(num_antennas=N, num_users=K)
    real = sample_channel(sc, int(rng.integers(1 << 31)))
    x = np.sort(rng.choice(np.arange(0, 0.36, 0.03), N, replace=False))
    Hn = real.response(x) / np.sqrt(sc.noise_power)
    W = rng.standard_normal((N, K)) + 1j * rng.standard_normal((N, K))
    W *= np.sqrt(rng.uniform(0.05, 1.0)) / np.linalg.norm(W)
    W = rotate_columns(Hn, W)
    G = np.abs(Hn.conj().T @ W) ** 2
    sig = np.diag(G)
    noise = G.sum(axis=1) - sig + 1.0
    eta = 10 ** rng.uniform(-1, 2)
    sub = LinearizedSubproblem(Hn, eta, 1.0, sig / noise, noise, XI_FLOOR)
    return sub, W


def cvx_oracle(sub):
    cp = pytest.importorskip("cvxpy")
    N, K = sub.N, sub.K
    Hn = sub.A[:, :N].T + 1j * sub.A[:, N:].T
    Wr, Wi = cp.Variable((N, K)), cp.Variable((N, K))
    chi, xi = cp.Variable(K), cp.Variable(K)
    cons = [cp.sum_squares(Wr) + cp.sum_squares(Wi) <= sub.p_max, xi >= sub.xi_floor]
    for k in range(K):
        hr, hi = Hn[:, k].real, Hn[:, k].imag
        # h^H w = (hr - j hi)^T (wr + j wi)
        re = [hr @ Wr[:, i] + hi @ Wi[:, i] for i in range(K)]
        im = [hr @ Wi[:, i] - hi @ Wr[:, i] for i in range(K)]
        interf = sum(cp.square(re[i]) + cp.square(im[i]) for i in range(K) if i != k)
        cons.append(interf + 1 <= xi[k])
        cons.append(sub.c0[k] + sub.c1[k] * (xi[k] - sub.xi0[k])
                    + sub.c2[k] * (chi[k] - sub.chi0[k]) <= re[k])
    obj = cp.sum(cp.log(1 + chi)) / LN2 - sub.eta * (cp.sum_squares(Wr) + cp.sum_squares(Wi))
    prob = cp.Problem(cp.Maximize(obj), cons)
    prob.solve(solver=cp.CLARABEL, tol_gap_abs=1e-10, tol_gap_rel=1e-10, tol_feas=1e-10)
    return prob.value


def test_kkt_residuals_on_random_instances(rng):
    for _ in range(60):
        sub, W = random_instance(rng)
        res = solve(sub, sub.strict_start(W))
        assert res.stationarity < 1e-7
        assert res.complementarity < 1e-7
        assert res.violation < 1e-9
        assert np.all(res.multipliers > 0)


def test_matches_conic_oracle(rng):
    for _ in range(15):
        sub, W = random_instance(rng)
        res = solve(sub, sub.strict_start(W))
        ref = cvx_oracle(sub)
        assert res.objective == pytest.approx(ref, rel=1e-6, abs=1e-7)


def test_incumbent_is_feasible_start(rng):
    """The precoder that produced the linearisation point is feasible for it."""
    for _ in range(50):
        sub, W = random_instance(rng)
        z = sub.pack(W, sub.chi0, sub.xi0)
        assert np.max(sub.constraints(z)) <= 1e-9 * (1 + np.max(sub.xi0))
        z0 = sub.strict_start(W)
        assert sub.in_domain(z0)
        # the solution never loses against the incumbent's own objective
        res = solve(sub, z0)
        assert res.objective >= -sub.objective(z) - 1e-9


def test_single_user_reduces_to_closed_form(rng):
    for _ in range(40):
        sub, _ = random_instance(rng, K=1)
        g = float(np.sum(sub.A[0] ** 2))
        eta = sub.eta
        p = min(max(1.0 / (eta * LN2) - 1.0 / g, 1e-3), sub.p_max)
        eta = 1.0 / (LN2 * (p + 1.0 / g)) if p < sub.p_max else eta
        h = sub.A[0, : sub.N] + 1j * sub.A[0, sub.N:]
        w = np.sqrt(p) * h / np.linalg.norm(h)
        # linearise at the closed-form optimum for this eta
        at_opt = LinearizedSubproblem(h[:, None], eta, sub.p_max, [p * g], [1.0], XI_FLOOR)
        res = solve(at_opt, at_opt.strict_start(w[:, None]))
        closed = np.log2(1 + p * g) - eta * p
        assert res.objective == pytest.approx(closed, rel=1e-5)


def test_large_price_switches_transmitter_off(rng):
    """Re-linearising at each solution drives the power to zero once the price
    exceeds the best marginal rate of every user."""
    for _ in range(5):
        sub, W = random_instance(rng)
        Hn = sub.A[:, : sub.N].T + 1j * sub.A[:, sub.N:].T
        eta = 2.0 * np.max(np.sum(np.abs(Hn) ** 2, axis=0)) / LN2
        powers, values = [], []
        for _ in range(30):
            G = np.abs(Hn.conj().T @ W) ** 2
            s = np.diag(G)
            noise = G.sum(axis=1) - s + 1.0
            values.append(np.sum(np.log2(1 + s / noise)) - eta * np.linalg.norm(W) ** 2)
            step = LinearizedSubproblem(Hn, eta, 1.0, s / noise, noise, XI_FLOOR)
            W = rotate_columns(Hn, solve(step, step.strict_start(W)).W)
            powers.append(np.linalg.norm(W) ** 2)
        # the true objective climbs; the power itself need not fall every step
        assert np.all(np.diff(values) >= -1e-9 * np.abs(values[:-1]) - 1e-12)
        assert powers[-1] < 1e-10


def test_two_by_two_brute_force(rng):
    """Random feasible points never beat the solver and the finest cloud reaches it (N=2, K=2)."""
    for _ in range(5):
        sub, W = random_instance(rng, N=2, K=2)
        res = solve(sub, sub.strict_start(W))
        Hn = sub.A[:, :2].T + 1j * sub.A[:, 2:].T
        best = -np.inf
        for radius in (0.3, 0.03, 3e-4):
            for _ in range(7000):
                Wc = res.W + radius * np.linalg.norm(res.W) * (
                    rng.standard_normal((2, 2)) + 1j * rng.standard_normal((2, 2)))
                if np.linalg.norm(Wc) ** 2 > sub.p_max:
                    continue
                Wc = rotate_columns(Hn, Wc)
                G = np.abs(Hn.conj().T @ Wc) ** 2
                xi = np.maximum(G.sum(axis=1) - np.diag(G) + 1.0, XI_FLOOR)
                s = np.real(np.diag(Hn.conj().T @ Wc))
                # largest chi allowed by the linear cut
                chi = sub.chi0 + (s - sub.c0 - sub.c1 * (xi - sub.xi0)) / sub.c2
                if np.any(chi <= -1):
                    continue
                best = max(best, np.sum(np.log2(1 + chi)) - sub.eta * np.linalg.norm(Wc) ** 2)
        assert best <= res.objective + 1e-9
        assert best >= res.objective - 1e-3 * (1 + abs(res.objective))


def test_nonpositive_linearisation_rejected():
    with pytest.raises(InfeasibleLinearization):
        LinearizedSubproblem(np.ones((2, 1)), 1.0, 1.0, [0.0], [1.0])
