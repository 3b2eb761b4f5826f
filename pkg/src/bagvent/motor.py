"""Sawtooth reference trajectory and the position-velocity-current servo.

The reference is a piecewise-linear sawtooth per breath: up-ramp over the
inspiratory window, down-ramp back to phi_0 over the expiratory window. A
cascade of three PI loops tracks it on a gearbox-output-referred DC motor
(first-order electrical + first-order mechanical). All controller and plant
updates run on the same fixed step.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

CONTROL_DT = 0.001  # controller and plant step [s]


@dataclass(frozen=True)
class VentSettings:
    bpm: float  # breaths per minute
    ie_i: float  # inspiratory part of the I:E ratio
    ie_e: float  # expiratory part of the I:E ratio
    v_ref: float  # reference tidal volume [mL]
    peep: float  # PEEP valve setting [mBar], forwarded to the circuit

    def __post_init__(self) -> None:
        if self.bpm <= 0 or self.ie_i <= 0 or self.ie_e <= 0 or self.v_ref <= 0:
            raise ValueError("settings must be positive")

    @property
    def inhale_fraction(self) -> float:
        return self.ie_i / (self.ie_i + self.ie_e)


def breath_period(settings: VentSettings) -> float:
    """Duration of one breath cycle [s]: 60 / BPM."""
    return 60.0 / settings.bpm


def inhale_duration(settings: VentSettings) -> float:
    return breath_period(settings) * settings.inhale_fraction


def reference_trajectory(
    settings: VentSettings, phi_0: float, phi_tgt: float, t: float
) -> tuple[float, float]:
    """Reference position and velocity at time t within one breath.

    Inhale slope (phi_tgt - phi_0) / (T_b * I/(I+E)); exhale slope
    (phi_0 - phi_tgt) / (T_b * E/(I+E)). The trajectory starts and ends at
    phi_0 and peaks at phi_tgt exactly at the phase boundary.
    """
    t_b = breath_period(settings)
    t_inh = t_b * settings.inhale_fraction
    if not 0.0 <= t < t_b:
        raise ValueError(f"t={t} outside breath period [0, {t_b})")
    if t < t_inh:
        slope = (phi_tgt - phi_0) / t_inh
        return phi_0 + slope * t, slope
    slope = (phi_0 - phi_tgt) / (t_b - t_inh)
    return phi_tgt + slope * (t - t_inh), slope


@dataclass(frozen=True)
class PiGains:
    kp_pos: float = 150.0  # [1/s]
    ki_pos: float = 300.0  # [1/s^2]
    kp_vel: float = 4.0  # [A s/rad]
    ki_vel: float = 900.0  # [A/rad]
    kp_cur: float = 1.8  # [V/A]
    ki_cur: float = 900.0  # [V/(A s)]
    v_cmd_max: float = 2.5  # velocity command clamp [rad/s]
    clamp_pos: float = 0.005  # position integrator clamp [rad s] (~1.5 rad/s authority)
    clamp_vel: float = 0.02  # velocity integrator clamp [rad] (~18 A authority)
    clamp_cur: float = 0.02  # current integrator clamp [A s] (~18 V authority)

    def __post_init__(self) -> None:
        if min(self.kp_pos, self.ki_pos, self.kp_vel, self.ki_vel, self.kp_cur, self.ki_cur) < 0:
            raise ValueError("gains must be nonnegative")
        if min(self.v_cmd_max, self.clamp_pos, self.clamp_vel, self.clamp_cur) <= 0:
            raise ValueError("command and anti-windup clamps must be positive and finite")


@dataclass(frozen=True)
class MotorPlant:
    """Gearbox-output-referred DC motor constants."""

    resistance: float = 0.8  # winding resistance [Ohm]
    inductance: float = 0.002  # winding inductance [H]
    k_torque: float = 1.2  # torque constant at the output [N m/A]
    k_emf: float = 1.2  # back-EMF constant at the output [V s/rad]
    inertia: float = 0.004  # output-referred inertia [kg m^2]
    damping: float = 0.08  # viscous damping [N m s/rad]
    v_max: float = 12.0  # supply voltage bound [V]
    i_max: float = 15.0  # stall current limit [A]


@dataclass(frozen=True)
class MotorState:
    phi: float = 0.0  # position after gearbox [rad]
    phi_dot: float = 0.0  # [rad/s]
    current: float = 0.0  # [A]
    applied_voltage: float = 0.0  # [V]
    int_pos: float = 0.0  # position PI integrator
    int_vel: float = 0.0  # velocity PI integrator
    int_cur: float = 0.0  # current PI integrator


def _clamp(value: float, bound: float) -> float:
    if value > bound:
        return bound
    if value < -bound:
        return -bound
    return value


def pi_cascade_step(
    gains: PiGains,
    plant: MotorPlant,
    state: MotorState,
    phi_ref: float,
    phi_dot_ref: float,
    load_torque: float,
    dt: float = CONTROL_DT,
) -> MotorState:
    """One servo + plant update; load_torque in N mm, resistive at the output.

    Outer loop commands velocity (with reference-velocity feedforward), middle
    loop commands current, inner loop commands voltage saturated at +/-v_max.
    The electrical state integrates exactly over the step; the mechanical
    state uses semi-implicit Euler.
    """
    e_pos = phi_ref - state.phi
    int_pos = _clamp(state.int_pos + e_pos * dt, gains.clamp_pos)
    v_cmd = _clamp(phi_dot_ref + gains.kp_pos * e_pos + gains.ki_pos * int_pos,
                   gains.v_cmd_max)

    e_vel = v_cmd - state.phi_dot
    int_vel = _clamp(state.int_vel + e_vel * dt, gains.clamp_vel)
    i_cmd = _clamp(gains.kp_vel * e_vel + gains.ki_vel * int_vel, plant.i_max)

    e_cur = i_cmd - state.current
    int_cur = _clamp(state.int_cur + e_cur * dt, gains.clamp_cur)
    u = _clamp(gains.kp_cur * e_cur + gains.ki_cur * int_cur, plant.v_max)

    decay = math.exp(-plant.resistance * dt / plant.inductance)
    i_ss = (u - plant.k_emf * state.phi_dot) / plant.resistance
    current = i_ss + (state.current - i_ss) * decay
    current = _clamp(current, plant.i_max)

    torque = plant.k_torque * current - plant.damping * state.phi_dot - load_torque / 1000.0
    phi_dot = state.phi_dot + dt * torque / plant.inertia
    phi = state.phi + dt * phi_dot

    return MotorState(phi, phi_dot, current, u, int_pos, int_vel, int_cur)
