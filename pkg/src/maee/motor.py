"""Stepper-motor torque and mechanical power model.

The antenna carriage is driven through a lead screw of radius ``l0``, so a
linear speed ``v`` corresponds to the rotor angular speed ``omega = v / l0``.
All functions are pure and accept scalars or numpy arrays.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np


class MotorError(ValueError):
    """Raised for invalid motor parameters or out-of-range operating points."""


@dataclass(frozen=True)
class MotorParams:
    """Electrical and mechanical constants of one stepper motor.

    Defaults are those of the AM2224 high-speed stepper motor.
    """

    rotor_teeth: int = 6
    flux: float = 0.023  # Wb, peak magnet flux linking each winding
    voltage: float = 11.94  # V
    resistance: float = 75.0  # ohm, per phase
    inductance: float = 65.6e-3  # H, per phase
    lead_radius: float = 5e-3  # m
    step_angle: float = math.pi / 12  # rad
    omega_max: float = 552.0  # rad/s

    def __post_init__(self):
        for name in ("rotor_teeth", "flux", "voltage", "resistance", "inductance",
                     "lead_radius", "step_angle", "omega_max"):
            if not getattr(self, name) > 0:
                raise MotorError(f"{name} must be strictly positive, got {getattr(self, name)!r}")
        omega_m = max_no_load_speed(self)
        if not self.omega_max < omega_m:
            raise MotorError(
                f"omega_max={self.omega_max} must be below the no-load speed {omega_m:.6g} rad/s")

    @property
    def v_max(self) -> float:
        """Maximum linear antenna speed in m/s."""
        return self.omega_max * self.lead_radius

    @property
    def step_size(self) -> float:
        """Linear displacement per motor step in m."""
        return self.step_angle * self.lead_radius


def pull_out_torque(params: MotorParams, omega):
    """Pull-out torque in N*m at angular speed ``omega`` (rad/s).

    Negative above the no-load speed; callers decide whether that is meaningful.
    """
    omega = np.asarray(omega, dtype=float)
    if np.any(omega < 0):
        raise MotorError("angular speed must be non-negative")
    p, psi, V, R, L = (params.rotor_teeth, params.flux, params.voltage,
                       params.resistance, params.inductance)
    z2 = R * R + (omega * L) ** 2
    torque = p * psi * V / np.sqrt(z2) - p * omega * psi * psi * R / z2
    return torque if torque.ndim else float(torque)


def torque_slope(params: MotorParams, omega):
    """Analytic derivative dM/domega of the pull-out torque."""
    omega = np.asarray(omega, dtype=float)
    p, psi, V, R, L = (params.rotor_teeth, params.flux, params.voltage,
                       params.resistance, params.inductance)
    z2 = R * R + (omega * L) ** 2
    d = (-p * psi * V * omega * L * L / z2 ** 1.5
         - p * psi * psi * R * (z2 - 2.0 * omega * omega * L * L) / (z2 * z2))
    return d if d.ndim else float(d)


def max_no_load_speed(params: MotorParams) -> float:
    """Angular speed at which the pull-out torque vanishes.

    Closed form ``V R / sqrt(psi^2 R^2 - V^2 L^2)``; requires ``psi R > V L``.
    """
    a = params.flux * params.resistance
    b = params.voltage * params.inductance
    if not a > b:
        raise MotorError("no real no-load speed: need flux*resistance > voltage*inductance")
    return params.voltage * params.resistance / math.sqrt(a * a - b * b)


def no_load_speed_bisection(params: MotorParams, hi: float = 1e4, tol: float = 1e-12) -> float:
    """Root of the pull-out torque on (0, hi) by bisection, to ``|M| < tol``."""
    lo = 0.0
    if pull_out_torque(params, hi) > 0:
        raise MotorError("torque has no sign change on the bracket")
    mid = 0.5 * (lo + hi)
    for _ in range(400):
        mid = 0.5 * (lo + hi)
        m = pull_out_torque(params, mid)
        if abs(m) < tol:
            break
        if m > 0:
            lo = mid
        else:
            hi = mid
    return mid


def motor_power(params: MotorParams, v, check_range: bool = True):
    """Mechanical power (W) drawn while moving the antenna at speed ``v`` (m/s).

    With ``check_range=False`` speeds above ``v_max`` are evaluated too, which is
    only useful for inspecting the curve up to the no-load speed.
    """
    v = np.asarray(v, dtype=float)
    if np.any(v < 0):
        raise MotorError("speed must be non-negative")
    if check_range and np.any(v > params.v_max * (1 + 1e-12)):
        raise MotorError(f"speed exceeds v_max={params.v_max:.6g} m/s")
    omega = v / params.lead_radius
    power = omega * pull_out_torque(params, omega)
    return power if np.ndim(power) else float(power)


def speed_penalty(params: MotorParams, v, T: float, delta_x: float):
    """Motor power per unit of remaining transmit time, ``P_M(v) / (v T - dx)``.

    ``delta_x`` is the largest single-antenna travel distance.
    """
    v = np.asarray(v, dtype=float)
    slack = v * T - delta_x
    if delta_x < 0 or np.any(slack <= 0):
        raise MotorError("infeasible speed: movement does not finish within T")
    f = motor_power(params, v) / slack
    return f if np.ndim(f) else float(f)


def speed_penalty_slope(params: MotorParams, v, T: float, delta_x: float):
    """Analytic derivative of :func:`speed_penalty` with respect to ``v``."""
    v = np.asarray(v, dtype=float)
    l0 = params.lead_radius
    omega = v / l0
    slack = v * T - delta_x
    num = v * torque_slope(params, omega) * slack - l0 * pull_out_torque(params, omega) * delta_x
    d = num / (l0 * l0 * slack * slack)
    return d if np.ndim(d) else float(d)


def motor_curves(params: MotorParams, num: int = 200):
    """Torque and power sampled on ``[0, omega_M]`` for plotting or CSV export."""
    omega = np.linspace(0.0, max_no_load_speed(params), num)
    torque = pull_out_torque(params, omega)
    power = omega * torque
    return omega, torque, power
