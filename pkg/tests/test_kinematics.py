import itertools

import numpy as np
import pytest
from hypothesis import given, strategies as st

from maee import kinematics as km
from maee.metrics import energy_efficiency, sum_rate


def random_spaced(rng, n, length, gap):
    """``n`` sorted integer coordinates in [0, length] with pairwise gap >= ``gap``."""
    free = length - (n - 1) * gap
    base = np.sort(rng.integers(0, free + 1, size=n))
    return base + gap * np.arange(n)


def test_static_delays_are_zero():
    tau, tmax = km.movement_delays([0.0, 0.1], [0.0, 0.1], 2.76)
    assert tau.tolist() == [0.0, 0.0] and tmax == 0.0


def test_single_delay():
    _, tmax = km.movement_delays([0.0], [0.01], 2.76)
    assert tmax == pytest.approx(3.623e-3, rel=1e-3)


def test_delays_halve_with_double_speed(rng):
    cpv, dpv = rng.uniform(0, 0.36, 5), rng.uniform(0, 0.36, 5)
    tau1, _ = km.movement_delays(cpv, dpv, 1.0)
    tau2, _ = km.movement_delays(cpv, dpv, 2.0)
    assert np.allclose(tau2, tau1 / 2, rtol=1e-15)


def test_trajectory_endpoints_and_midpoint():
    plan = km.MovePlan([0.0, 0.2], [0.1, 0.05], 2.0)
    assert km.trajectory_position(plan, 0, 0.0) == 0.0
    assert km.trajectory_position(plan, 1, plan.max_delay) == 0.05
    assert km.trajectory_position(plan, 0, plan.delays[0] / 2) == pytest.approx(0.05)
    assert km.trajectory_position(plan, 1, plan.delays[1] / 2) == pytest.approx(0.125)
    with pytest.raises(km.KinematicsError):
        km.trajectory_position(plan, 0, 1.0)


def test_crossing_pair_collides():
    # two antennas exchange sides: they must meet
    plan = km.MovePlan([0.0, 0.1], [0.12, 0.02], 2.76)
    hit = km.check_collision_free(plan, 0.03)
    assert hit is not None and (hit.i, hit.j) == (0, 1)
    assert 0 < hit.time < plan.max_delay
    # the distance at the reported time is exactly the threshold
    gap = abs(km.trajectory_position(plan, 1, hit.time) - km.trajectory_position(plan, 0, hit.time))
    assert gap == pytest.approx(0.03, abs=1e-12)


def test_renumbered_pair_is_safe():
    dpv, _, q = km.renumber_sorted([0.12, 0.02])
    assert dpv.tolist() == [0.02, 0.12] and q.tolist() == [1, 0]
    plan = km.MovePlan([0.0, 0.1], dpv, 2.76)
    assert km.check_collision_free(plan, 0.03) is None
    before = km.movement_delays([0.0, 0.1], [0.12, 0.02], 1.0)[0].sum()
    after = km.movement_delays([0.0, 0.1], dpv, 1.0)[0].sum()
    assert before == pytest.approx(0.20) and after == pytest.approx(0.04)


def test_static_spaced_antennas_are_safe():
    plan = km.MovePlan([0.0, 0.03, 0.07], [0.0, 0.03, 0.07], 1.0)
    assert km.check_collision_free(plan, 0.03) is None


def test_final_gap_below_threshold_found():
    # antenna 0 stops 0.029 short of its neighbour; 0.03 is just enough
    plan = km.MovePlan([0.0, 0.2], [0.141, 0.17], 1.0)
    hit = km.check_collision_free(plan, 0.03)
    assert hit is not None
    assert km.check_collision_free(km.MovePlan([0.0, 0.2], [0.14, 0.17], 1.0), 0.03) is None


def test_sorted_input_gives_identity():
    dpv, W, q = km.renumber_sorted([0.01, 0.05, 0.2], np.eye(3))
    assert q.tolist() == [0, 1, 2]
    assert np.array_equal(W, np.eye(3))


def test_rows_follow_permutation(rng):
    dpv = rng.permutation(np.arange(6) * 0.04)
    W = rng.standard_normal((6, 2)) + 1j * rng.standard_normal((6, 2))
    out, Wp, q = km.renumber_sorted(dpv, W)
    for n in range(6):
        assert np.array_equal(Wp[n], W[q[n]])
        assert out[n] == dpv[q[n]]


def test_duplicate_destinations_rejected():
    with pytest.raises(km.KinematicsError):
        km.renumber_sorted([0.1, 0.1])


def test_oracle_identity_for_sorted_targets():
    perm, cost = km.min_total_delay_oracle([0, 1, 2], [0.5, 1.5, 2.5], 1.0)
    assert perm.tolist() == [0, 1, 2] and cost == pytest.approx(1.5)
    with pytest.raises(km.KinematicsError):
        km.min_total_delay_oracle(np.arange(9), np.arange(9), 1.0)


@given(st.lists(st.integers(0, 400), min_size=1, max_size=6, unique=True),
       st.lists(st.integers(0, 400), min_size=6, max_size=6, unique=True))
def test_oracle_never_worse_than_given_order(cpv, dpv):
    cpv = np.sort(np.array(cpv, dtype=float))
    dpv = np.array(dpv[: cpv.size], dtype=float)
    _, cost = km.min_total_delay_oracle(cpv, dpv, 1.0)
    assert cost <= np.abs(dpv - cpv).sum()


def test_sorting_matches_permutation_oracle(rng):
    for _ in range(300):
        n = int(rng.integers(1, 7))
        cpv = random_spaced(rng, n, 275, 23).astype(float)
        dpv = rng.permutation(random_spaced(rng, n, 275, 23)).astype(float)
        _, oracle = km.min_total_delay_oracle(cpv, dpv, 1.0)
        sorted_dpv, _, _ = km.renumber_sorted(dpv)
        tau_s, tmax_s = km.movement_delays(cpv, sorted_dpv, 1.0)
        _, tmax = km.movement_delays(cpv, dpv, 1.0)
        assert tau_s.sum() == oracle  # integer coordinates: exact
        assert tmax_s <= tmax
        assert km.check_collision_free(km.MovePlan(cpv, sorted_dpv, 1.0), 23.0) is None


def test_uncrossed_pairing_examples():
    assert km.lemma1_check(1, 4, 2, 3)
    assert abs(1 - 2) + abs(4 - 3) < abs(1 - 3) + abs(4 - 2)
    assert km.lemma1_check(1, 2, 3, 4)
    assert abs(1 - 3) + abs(2 - 4) == abs(1 - 4) + abs(2 - 3)
    with pytest.raises(km.KinematicsError):
        km.lemma1_check(2, 1, 3, 4)


def test_uncrossed_pairing_exhaustive():
    values = range(1, 21)
    pairs = [(a, b) for a, b in itertools.combinations(values, 2)]
    assert all(km.lemma1_check(a, b, c, d) for a, b in pairs for c, d in pairs)


def test_renumbering_preserves_rate_and_improves_ee(rng, motor):
    from maee.channel import Scenario, sample_channel
    sc = Scenario()
    for s in range(100):
        real = sample_channel(sc, s)
        cpv = np.sort(rng.choice(np.arange(0, 0.33, 0.03), 6, replace=False))
        dpv = rng.permutation(np.sort(rng.choice(np.arange(0, 0.33, 0.03), 6, replace=False)))
        W = rng.standard_normal((6, 2)) + 1j * rng.standard_normal((6, 2))
        W *= 0.5 / np.linalg.norm(W)
        H = real.response(dpv)
        sorted_dpv, Wp, q = km.renumber_sorted(dpv, W)
        assert sum_rate(H[q], Wp, sc.noise_power) == pytest.approx(
            sum_rate(H, W, sc.noise_power), rel=1e-12)
        before = energy_efficiency(sc, motor, cpv, dpv, motor.v_max, W, H)
        after = energy_efficiency(sc, motor, cpv, sorted_dpv, motor.v_max, Wp, H[q])
        assert after.ee >= before.ee * (1 - 1e-12)
        assert after.e_motor <= before.e_motor * (1 + 1e-12)
