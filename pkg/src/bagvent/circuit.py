"""Breathing-circuit elements: patient valve routing, losses, PEEP valve.

During inhalation the bag feeds the lung through the patient valve; part of
the bag flow is lost to a pressure-proportional leak and to gas compression in
the tubing. During exhalation the patient valve switches the lung onto the
passive PEEP valve and the bag refills from ambient. A disconnected setup
replaces the lung with an orifice open to ambient.
"""

from __future__ import annotations

from dataclasses import dataclass

PEEP_CHOICES = (5.0, 10.0, 15.0, 20.0)


class CircuitConfigError(ValueError):
    pass


@dataclass(frozen=True)
class CircuitParameters:
    inhale_dead_volume: float = 195.0  # [mL]
    exhale_dead_volume: float = 120.0  # [mL]
    leak_coefficient: float = 5.5  # inspiratory leak [mL/s per mBar]
    compression_compliance: float = 0.2  # tubing gas compression [mL/mBar]
    peep_setting: float = 5.0  # [mBar]
    peep_resistance: float = 5.0  # relief-valve slope [mBar/(L/s)]
    valve_crack_margin: float = 0.0  # PEEP valve hysteresis width [mBar]

    def __post_init__(self) -> None:
        if self.inhale_dead_volume < 0 or self.exhale_dead_volume < 0:
            raise CircuitConfigError("dead volumes must be nonnegative")
        if self.leak_coefficient < 0 or self.compression_compliance < 0:
            raise CircuitConfigError("loss coefficients must be nonnegative")
        if self.peep_setting not in PEEP_CHOICES:
            raise CircuitConfigError(
                f"peep_setting must be one of {PEEP_CHOICES}, got {self.peep_setting}"
            )
        if self.peep_resistance <= 0:
            raise CircuitConfigError("peep_resistance must be positive")


@dataclass(frozen=True)
class InhaleSplit:
    lung_flow: float  # [mL/s]
    leak_flow: float  # [mL/s]
    compression_flow: float  # [mL/s]
    p_aw: float  # airway pressure at the sensor port [mBar]


def patient_valve(phase: str) -> tuple[bool, bool]:
    """Ideal check-valve routing: (bag path open, PEEP path open)."""
    if phase == "inhale":
        return True, False
    if phase == "exhale":
        return False, True
    raise CircuitConfigError(f"unknown phase {phase!r}")


def route_inhale(
    circuit: CircuitParameters,
    bag_flow: float,
    p_alv: float,
    r_aw: float,
    p_aw_prev: float,
    dt: float,
) -> InhaleSplit:
    """Split the bag flow into lung, leak and compression components.

    Solves the linear node equation for the airway pressure p:

        lung_flow = bag_flow - leak(p) - comp(p)
        p = p_alv + (r_aw/1000) * lung_flow
        leak(p) = leak_coefficient * p
        comp(p) = compression_compliance * (p - p_aw_prev) / dt

    The split is exact: bag_flow == lung_flow + leak_flow + compression_flow.
    """
    r = r_aw / 1000.0  # mBar per mL/s
    g_comp = circuit.compression_compliance / dt
    g_loss = circuit.leak_coefficient + g_comp
    lung_flow = (bag_flow - circuit.leak_coefficient * p_alv - g_comp * (p_alv - p_aw_prev)) / (
        1.0 + r * g_loss
    )
    p_aw = p_alv + r * lung_flow
    leak_flow = circuit.leak_coefficient * p_aw
    compression_flow = g_comp * (p_aw - p_aw_prev)
    return InhaleSplit(lung_flow, leak_flow, compression_flow, p_aw)


def peep_valve_flow(circuit: CircuitParameters, p_aw: float) -> float:
    """Relief flow [mL/s] through the PEEP valve at airway pressure p_aw.

    Closed at or below the set pressure plus the crack margin; above it the
    flow rises linearly with the over-pressure.
    """
    crack = circuit.peep_setting + circuit.valve_crack_margin
    if p_aw <= crack:
        return 0.0
    return (p_aw - crack) / (circuit.peep_resistance / 1000.0)


def exhale_flow(circuit: CircuitParameters, p_alv: float, r_aw: float) -> tuple[float, float]:
    """Flow out of the lung through airway resistance and PEEP valve.

    Returns (flow_out [mL/s], p_aw [mBar]); the airway pressure is taken at
    the sensor port between the lung and the PEEP valve.
    """
    crack = circuit.peep_setting + circuit.valve_crack_margin
    if p_alv <= crack:
        return 0.0, p_alv
    r_total = (r_aw + circuit.peep_resistance) / 1000.0
    flow_out = (p_alv - crack) / r_total
    p_aw = p_alv - (r_aw / 1000.0) * flow_out
    return flow_out, p_aw


@dataclass(frozen=True)
class DisconnectedOutlet:
    """Open outlet replacing the patient: p_aw = r_lin*q + k_quad*q^2 (q in L/s)."""

    r_lin: float = 0.3  # [mBar/(L/s)]
    k_quad: float = 7.0  # [mBar/(L/s)^2]

    def route_inhale(
        self, circuit: CircuitParameters, bag_flow: float, p_aw_prev: float, dt: float
    ) -> InhaleSplit:
        """Same node equation as route_inhale with the orifice as the load.

        The orifice makes the node equation quadratic; solved by a few Newton
        steps on the outlet flow (monotone, well conditioned).
        """
        g_comp = circuit.compression_compliance / dt
        lc = circuit.leak_coefficient

        def pressure(q_out: float) -> float:
            ql = q_out / 1000.0
            return self.r_lin * ql + self.k_quad * ql * ql

        q = max(0.0, bag_flow)
        for _ in range(20):
            p = pressure(q)
            resid = q - (bag_flow - lc * p - g_comp * (p - p_aw_prev))
            dp_dq = (self.r_lin + 2.0 * self.k_quad * q / 1000.0) / 1000.0
            slope = 1.0 + (lc + g_comp) * dp_dq
            step = resid / slope
            q -= step
            if abs(step) < 1e-12:
                break
        p = pressure(q)
        leak = lc * p
        comp = g_comp * (p - p_aw_prev)
        # Close the balance exactly in the reported split.
        return InhaleSplit(bag_flow - leak - comp, leak, comp, p)
