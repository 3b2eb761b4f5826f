"""Geometric model of a cylindrical resuscitator bag squeezed by two paddles.

The bag is a cylinder of radius ``r_ambu`` and length ``l_ambu``. Two mirrored
paddles, each on an arm of length ``l_pad``, press in from opposite sides; the
motor angle ``phi`` maps to the paddle penetration depth ``x = l_pad * phi``.
Everything here is pure geometry: volumes in mL, pressures in mBar, angles in
rad, flows in mL/s. Losses and valve behavior live in the circuit module.
"""

from __future__ import annotations

import math
from dataclasses import dataclass


class BagGeometryError(ValueError):
    """Raised when a paddle position or chord argument leaves the valid range."""


@dataclass(frozen=True)
class BagGeometry:
    r_ambu: float  # cylinder radius [mm]
    l_ambu: float  # cylinder length [mm]
    l_pad: float  # paddle arm length, rotation axis to bag surface [mm]
    phi_0: float  # motor position at start of inhalation [rad]
    phi_max: float  # mechanical end stop [rad]
    p_inf: float = 1013.25  # ambient reference pressure [mBar absolute]
    x_bar_tol: float = 0.02  # tolerance on the normalized chord coordinate

    def __post_init__(self) -> None:
        if self.r_ambu <= 0 or self.l_ambu <= 0 or self.l_pad <= 0:
            raise BagGeometryError("bag dimensions must be positive")
        if not (0 <= self.phi_0 < self.phi_max):
            raise BagGeometryError("need 0 <= phi_0 < phi_max")
        if self.l_pad * self.phi_max > self.r_ambu * (1 + 1e-12):
            raise BagGeometryError("paddle travel exceeds bag radius (paddle cannot pass center)")

    @property
    def full_volume(self) -> float:
        """Volume of the untouched cylinder [mL]."""
        return math.pi * self.r_ambu**2 * self.l_ambu / 1000.0

    def x_bar(self, phi: float) -> float:
        """Normalized paddle-to-center distance (1 untouched, 0 flattened)."""
        return (self.r_ambu - self.l_pad * phi) / self.r_ambu


def chord_deficit(x_bar: float, tol: float = 1e-9) -> float:
    """Area deficit of one circular segment, in units of r^2.

    psi(x_bar) = arccos(x_bar) - x_bar * sqrt(1 - x_bar^2); monotone decreasing
    from pi/2 at x_bar = 0 to 0 at x_bar = 1.
    """
    if x_bar < -tol or x_bar > 1.0 + tol:
        raise BagGeometryError(f"x_bar={x_bar!r} outside [0, 1]")
    x = min(max(x_bar, 0.0), 1.0)
    return math.acos(x) - x * math.sqrt(1.0 - x * x)


def _x_bar_checked(geom: BagGeometry, phi: float) -> float:
    xb = geom.x_bar(phi)
    if xb < -geom.x_bar_tol or xb > 1.0 + geom.x_bar_tol:
        raise BagGeometryError(
            f"paddle position l_pad*phi={geom.l_pad * phi:.3f} mm outside bag "
            f"(r={geom.r_ambu} mm, x_bar={xb:.4f})"
        )
    return min(max(xb, 0.0), 1.0)


def bag_volume(geom: BagGeometry, phi: float) -> float:
    """Bag volume [mL] at motor angle phi: l * r^2 * (pi - 2*psi)."""
    xb = _x_bar_checked(geom, phi)
    return geom.l_ambu * geom.r_ambu**2 * (math.pi - 2.0 * chord_deficit(xb)) / 1000.0


def geometric_tidal_volume(geom: BagGeometry, phi_tgt: float) -> float:
    """Volume expelled when squeezing from phi_0 to phi_tgt [mL]."""
    return bag_volume(geom, geom.phi_0) - bag_volume(geom, phi_tgt)


def bag_flow_rate(geom: BagGeometry, phi: float, phi_dot: float) -> float:
    """Rate of change of bag volume [mL/s]; negative while squeezing.

    dV/dt = 4 * l * r^2 * d(x_bar)/dt * sqrt(1 - x_bar^2), with
    d(x_bar)/dt = -(l_pad / r) * phi_dot.
    """
    xb = _x_bar_checked(geom, phi)
    xb_dot = -(geom.l_pad / geom.r_ambu) * phi_dot
    return 4.0 * geom.l_ambu * geom.r_ambu**2 * xb_dot * math.sqrt(1.0 - xb * xb) / 1000.0


def bag_pressure(geom: BagGeometry, phi: float, v_lung: float) -> float:
    """Isothermal compression estimate of bag pressure [mBar absolute].

    Treats the downstream volume v_lung [mL] as rigid, so this is a worst-case
    (no-outflow) estimate; the closed loop uses the circuit pressure instead.
    """
    if v_lung < 0:
        raise BagGeometryError("v_lung must be nonnegative")
    v_full = bag_volume(geom, 0.0)
    v_now = bag_volume(geom, phi)
    denom = v_lung + v_now
    assert denom > 0.0, "total gas volume must stay positive"
    return geom.p_inf * (v_lung + v_full) / denom


def paddle_surface(geom: BagGeometry, phi: float) -> float:
    """Contact surface of one paddle [mm^2]: 2 * l * r * sqrt(1 - x_bar^2)."""
    xb = _x_bar_checked(geom, phi)
    return 2.0 * geom.l_ambu * geom.r_ambu * math.sqrt(1.0 - xb * xb)


def paddle_torque(geom: BagGeometry, phi: float, p_gauge: float) -> float:
    """Torque on one paddle [N mm] from gauge pressure p_gauge [mBar].

    tau = l_pad * A_pad * p; 1 mBar = 1e-4 N/mm^2.
    """
    return geom.l_pad * paddle_surface(geom, phi) * p_gauge * 1e-4
