"""bagvent: deterministic closed-loop simulator of a bag-squeezing ventilator.

Subsystems: bag (paddle/bag geometry), lung (static mechanics), circuit
(valves and losses), motor (trajectory + servo), adaptation (per-breath
set-point law), sensing (sensors and alarms), engine (orchestration),
scenarios (file format and bundled presets), cli (command line front end).
"""

__version__ = "0.1.0"

from .adaptation import (
    AdaptationState,
    SensitivityCase,
    SensitivityGrid,
    adapt_setpoint,
    estimate_sensitivity,
    gain_from_sensitivity,
    verify_convergence,
)
from .bag import BagGeometry, bag_flow_rate, bag_pressure, bag_volume, chord_deficit, \
    geometric_tidal_volume, paddle_torque
from .engine import Scenario, SimulationTrace, run_parameter_study, run_scenario, \
    run_tracking_study
from .lung import LungParameters, LungState, airway_pressure, pressure_from_volume, \
    step_lung, volume_from_pressure
from .motor import PiGains, VentSettings, breath_period, pi_cascade_step, \
    reference_trajectory

__all__ = [
    "AdaptationState",
    "BagGeometry",
    "LungParameters",
    "LungState",
    "PiGains",
    "Scenario",
    "SensitivityCase",
    "SensitivityGrid",
    "SimulationTrace",
    "VentSettings",
    "adapt_setpoint",
    "airway_pressure",
    "bag_flow_rate",
    "bag_pressure",
    "bag_volume",
    "breath_period",
    "chord_deficit",
    "estimate_sensitivity",
    "gain_from_sensitivity",
    "geometric_tidal_volume",
    "paddle_torque",
    "pi_cascade_step",
    "pressure_from_volume",
    "reference_trajectory",
    "run_parameter_study",
    "run_scenario",
    "run_tracking_study",
    "step_lung",
    "verify_convergence",
    "volume_from_pressure",
]
