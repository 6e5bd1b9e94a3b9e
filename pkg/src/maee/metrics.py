"""SINR, sum rate and the block energy-efficiency objective.

Channel matrices are N x K with column k the channel of user k; precoders are
N x K with column k the beamformer of user k.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass

import numpy as np

from .channel import Scenario
from .motor import MotorParams, motor_power, speed_penalty


class InfeasibleSpeed(ValueError):
    pass


@dataclass(frozen=True)
class EEBreakdown:
    sum_rate: float  # bits/s/Hz
    tau: float  # s
    e_motor: float  # J
    e_transmit: float  # J
    ee: float  # bits/Hz/J

    def to_dict(self) -> dict:
        return asdict(self)


def _gram(H, W):
    # G[k, i] = h_k^H w_i
    return np.asarray(H).conj().T @ np.asarray(W)


def sinrs(H, W, sigma2: float) -> np.ndarray:
    power = np.abs(_gram(H, W)) ** 2
    signal = np.diag(power)
    interference = power.sum(axis=1) - signal
    return signal / (interference + sigma2)


def sinr(H, W, sigma2: float, k: int) -> float:
    return float(sinrs(H, W, sigma2)[k])


def sum_rate(H, W, sigma2: float) -> float:
    return float(np.sum(np.log2(1.0 + sinrs(H, W, sigma2))))


def transmit_power(W) -> float:
    return float(np.real(np.vdot(W, W)))


def energy_efficiency(scenario: Scenario, motor: MotorParams, cpv, dpv, v: float,
                      W, H) -> EEBreakdown:
    """Energy efficiency of moving to ``dpv`` at speed ``v`` then transmitting with ``W``.

    ``H`` must be the channel evaluated at ``dpv``.
    """
    cpv = np.asarray(cpv, dtype=float)
    dpv = np.asarray(dpv, dtype=float)
    T = scenario.coherence_time
    travel = np.abs(dpv - cpv)
    if v > motor.v_max * (1 + 1e-12):
        raise InfeasibleSpeed(f"speed {v} exceeds v_max {motor.v_max}")
    if travel.max(initial=0.0) > v * T * (1 + 1e-12):
        raise InfeasibleSpeed("movement does not finish within the coherence time")
    tau_n = travel / v
    tau = min(float(tau_n.max(initial=0.0)), T)
    rate = sum_rate(H, W, scenario.noise_power)
    e_motor = float(motor_power(motor, v) * tau_n.sum())
    e_tx = (T - tau) * (transmit_power(W) + scenario.p_static)
    ee = (T - tau) * rate / (e_motor + e_tx)
    return EEBreakdown(sum_rate=rate, tau=tau, e_motor=e_motor, e_transmit=e_tx, ee=ee)


def energy_efficiency_rewrite(scenario: Scenario, motor: MotorParams, cpv, dpv, v: float,
                              W, H) -> float:
    """Same quantity via the per-unit-time form ``R / (f(v) sum|dx| + P_D)``."""
    travel = np.abs(np.asarray(dpv, dtype=float) - np.asarray(cpv, dtype=float))
    dx = float(travel.max(initial=0.0))
    p_d = transmit_power(W) + scenario.p_static
    rate = sum_rate(H, W, scenario.noise_power)
    if v * scenario.coherence_time - dx <= 0:
        return 0.0
    f = speed_penalty(motor, v, scenario.coherence_time, dx)
    return rate / (f * float(travel.sum()) + p_d)


def asymptotic_ee(H, W, p_static: float, sigma2: float) -> float:
    """Conventional EE without mechanical power: ``sum R / (Tr(W W^H) + P_s)``."""
    return sum_rate(H, W, sigma2) / (transmit_power(W) + p_static)

