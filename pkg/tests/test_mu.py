import numpy as np
import pytest

from conftest import build_problem, toy_scenario
from maee.baselines import fpa_solve
from maee.channel import Scenario, sample_channel
from maee.metrics import sinrs, sum_rate
from maee.mu import (alternating_optimization, dinkelbach_precoding, initial_precoding,
                     internal_ee, mu_fpa, mu_position_search, mu_solve, precoding_ee,
                     rotate_columns, rotate_real, sca_subproblem, sequential_block)
from maee.problem import audit, fixed_precoder_objective
from maee.search import exhaustive_search
from maee.su import DinkelbachContext, dinkelbach_power


def random_channel(rng, N=6, K=2, scale=1e-5):
    return (rng.standard_normal((N, K)) + 1j * rng.standard_normal((N, K))) * scale


def test_rotate_real(rng):
    h = rng.standard_normal(4) + 1j * rng.standard_normal(4)
    w = rng.standard_normal(4) + 1j * rng.standard_normal(4)
    r = rotate_real(h, w)
    inner = np.vdot(h, r)
    assert abs(inner.imag) < 1e-12 and inner.real > 0
    assert abs(inner) == pytest.approx(abs(np.vdot(h, w)), rel=1e-12)
    # already real: unchanged
    assert np.allclose(rotate_real(h, r), r, atol=1e-15)
    assert np.array_equal(rotate_real(h, np.zeros(4)), np.zeros(4))


def test_rotation_keeps_sinr(rng):
    for _ in range(20):
        H = random_channel(rng)
        W = random_channel(rng, scale=0.3)
        R = rotate_columns(H, W)
        assert np.allclose(sinrs(H, R, 1e-11), sinrs(H, W, 1e-11), rtol=1e-12)
        assert np.max(np.abs(np.diag(H.conj().T @ R).imag)) < 1e-12 * np.abs(H.conj().T @ R).max()


def test_sca_step_does_not_lower_true_objective(rng):
    sigma2 = 1e-11
    for _ in range(20):
        H = random_channel(rng)
        W = rotate_columns(H, random_channel(rng, scale=0.3))
        eta = precoding_ee(H, W, 0.2, 0.2, sigma2)
        G = np.abs(H.conj().T @ W) ** 2
        s = np.diag(G)
        noise = G.sum(axis=1) - s + sigma2
        state, res = sca_subproblem(H, eta, 0.2, 0.2, sigma2, 1.0, s / noise, noise, W)
        g = lambda X: 0.2 * sum_rate(H, X, sigma2) - eta * (0.2 * np.linalg.norm(X) ** 2 + 0.2)
        assert g(state.W) >= g(W) - 1e-9 * abs(g(W))
        assert res.stationarity < 1e-7
        # the surrogate rate never exceeds the true rate
        assert state.objective <= g(state.W) + 1e-9


def test_dinkelbach_traces_monotone(rng):
    for _ in range(15):
        H = random_channel(rng, K=int(rng.integers(1, 4)))
        W0 = H / np.linalg.norm(H) * np.sqrt(0.5)
        res = dinkelbach_precoding(H, 0.2, 0.2 * rng.uniform(0.5, 2.0), 1e-11, 1.0, W0)
        assert np.all(np.diff(res.eta_trace) >= 0)
        for trace in res.sca_traces:
            assert np.all(np.diff(trace) > 0)
        assert np.linalg.norm(res.W) ** 2 <= 1.0 + 1e-9


def test_eta_matches_reported_precoder(rng):
    for _ in range(10):
        H = random_channel(rng)
        b = 0.2 * rng.uniform(0.5, 2.0)
        res = dinkelbach_precoding(H, 0.2, b, 1e-11, 1.0, H / np.linalg.norm(H) * 0.5)
        assert res.eta == pytest.approx(precoding_ee(H, res.W, 0.2, b, 1e-11), rel=1e-12)
        assert res.eta >= res.eta_trace[0]


def test_single_user_matches_closed_form(rng):
    for _ in range(20):
        h = random_channel(rng, K=1, scale=10 ** rng.uniform(-6, -4))
        a = rng.uniform(0.05, 0.25)
        b = a * rng.uniform(0.1, 2.0) + rng.uniform(0, 0.05)
        res = dinkelbach_precoding(h, a, b, 1e-11, 1.0, h / np.linalg.norm(h) * 0.5)
        ctx = DinkelbachContext(a=a, b=b, channel_gain=float(np.sum(np.abs(h) ** 2)),
                                sigma2=1e-11, p_max=1.0, tolerance=1e-12)
        _, eta, _ = dinkelbach_power(ctx)
        assert res.eta == pytest.approx(eta, rel=1e-4)
        assert res.eta <= eta * (1 + 1e-9)


def test_rejects_precoder_over_budget(rng):
    H = random_channel(rng)
    with pytest.raises(ValueError):
        dinkelbach_precoding(H, 0.2, 0.2, 1e-11, 1.0, H / np.linalg.norm(H) * 2.0)


def test_fixed_precoder_search_on_toy_grid():
    """Two antennas on the twenty-point grid: sequential search against full enumeration."""
    sc = toy_scenario(num_users=2, num_antennas=2)
    misses = []
    for seed in range(20):
        problem = build_problem(sc, seed)
        W = initial_precoding(problem).W
        obj = fixed_precoder_objective(problem, W)
        _, best = exhaustive_search(problem, obj)
        res = mu_position_search(problem, W)
        assert np.all(np.diff(res.trace) >= -1e-15)
        assert res.value <= best * (1 + 1e-12)
        if res.value < best * (1 - 1e-12):
            misses.append((seed, round(res.value / best, 4)))
    assert not misses, f"coordinate-wise optimum below enumeration: {misses}"


def test_mu_solve_feasible_and_monotone(motor):
    sc = Scenario()
    for seed in range(10):
        real = sample_channel(sc, seed)
        sol = mu_solve(sc, motor, real)
        problem = build_problem(sc, seed)
        assert audit(problem, sol) == []
        assert sol.diagnostics["violations"] == []
        trace = sol.diagnostics["ao_trace"]
        assert np.all(np.diff(trace) >= 0)
        assert sol.ee >= fpa_solve(sc, motor, real).ee * (1 - 1e-12)
        assert np.linalg.norm(sol.W) ** 2 <= sc.p_max * (1 + 1e-9)


def test_reported_ee_matches_internal_objective(motor):
    sc = Scenario()
    problem = build_problem(sc, 3)
    idx, W, diag = alternating_optimization(problem, sequential_block())
    assert internal_ee(problem, idx, W) == pytest.approx(diag["ao_trace"][-1], rel=1e-12)
    assert problem.evaluate(idx, W).ee == pytest.approx(diag["ao_trace"][-1], rel=1e-9)


def test_diagnostic_counters(motor):
    sc = Scenario()
    sol = mu_solve(sc, motor, sample_channel(sc, 2))
    d = sol.diagnostics
    assert d["subproblems"] > 0 and d["newton_steps"] >= d["subproblems"]
    assert d["position_evaluations"] > 0
    assert len(d["eta_traces"]) == len(d["precoding_converged"])
    assert d["slack_gap"] >= -1e-9


def test_fpa_uses_shared_initial_precoding(motor):
    sc = Scenario()
    problem = build_problem(sc, 5)
    init = initial_precoding(problem)
    sol = mu_fpa(problem, init)
    assert np.array_equal(sol.W, init.W)
    assert sol.breakdown.e_motor == 0.0
    again = mu_solve(sc, motor, problem.realization, initial=init)
    assert again.ee >= sol.ee * (1 - 1e-12)
