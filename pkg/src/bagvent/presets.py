"""Calibrated defaults shared by the bundled scenarios.

The bag geometry was fitted once (least squares on relative error) so that
the geometric tidal volume over set-points 0.20..0.50 rad stays within +/-15%
of the bench grid's disconnected column; servo gains were tuned once against
the default plant for the step-response and ramp-tracking budgets. Loss
coefficients reproduce the bench ordering and separations. Values are frozen
here; scenario files may override any of them.
"""

from __future__ import annotations

import csv
from importlib import resources

from .adaptation import SensitivityCase, SensitivityGrid
from .bag import BagGeometry
from .circuit import CircuitParameters, DisconnectedOutlet
from .engine import AdaptationConfig, PatientConfig, Scenario, StudyCase
from .lung import preset as lung_preset
from .motor import MotorPlant, PiGains, VentSettings
from .sensing import AlarmThresholds, FlowSensorModel, PressureSensorModel

# Bag geometry (effective squeezed-region dimensions from the fit).
DEFAULT_GEOMETRY = BagGeometry(
    r_ambu=50.0,
    l_ambu=82.0,
    l_pad=95.0,
    phi_0=0.0,
    phi_max=0.526,
    p_inf=1013.25,
)

# Circuit defaults: the bench rig used for the fixed-set-point study.
DEFAULT_CIRCUIT = CircuitParameters(
    inhale_dead_volume=195.0,
    exhale_dead_volume=120.0,
    leak_coefficient=5.5,
    compression_compliance=0.2,
    peep_setting=5.0,
    peep_resistance=5.0,
    valve_crack_margin=0.0,
)

# The tracking experiments ran on a reassembled, tighter circuit.
TRACKING_CIRCUIT = CircuitParameters(
    inhale_dead_volume=195.0,
    exhale_dead_volume=120.0,
    leak_coefficient=3.5,
    compression_compliance=0.2,
    peep_setting=5.0,
    peep_resistance=5.0,
    valve_crack_margin=0.0,
)

DEFAULT_PLANT = MotorPlant()
DEFAULT_GAINS = PiGains()

DEFAULT_FLOW_SENSOR = FlowSensorModel()
IDEAL_FLOW_SENSOR = FlowSensorModel(accuracy_pct=0.0, repeatability_pct=0.0)
DEFAULT_PRESSURE_SENSOR = PressureSensorModel()
IDEAL_PRESSURE_SENSOR = PressureSensorModel(noise_sd=0.0)

DEFAULT_GAIN = 5e-4  # rad/mL, from the bench grid with safety rounding
DEFAULT_PHI_INIT = 0.35

# Hardware-variation overrides for the bench study columns (each column is a
# separate physical setup: TestChest detached / PEEP valve swapped).
DISCONNECTED_OUTLET = DisconnectedOutlet(r_lin=0.3, k_quad=5.0)
STUDY_LEAK_ARDS10 = 6.5


def default_thresholds(settings: VentSettings) -> AlarmThresholds:
    return AlarmThresholds.from_settings(settings.v_ref, settings.bpm)


def make_scenario(
    name: str,
    settings: VentSettings,
    patient: PatientConfig,
    *,
    circuit: CircuitParameters | None = None,
    adaptation: AdaptationConfig | None = None,
    ideal_sensors: bool = False,
    thresholds: AlarmThresholds | None = None,
    n_breaths: int = 20,
    seed: int = 1234,
    events: tuple = (),
    warmup_breaths: int = 5,
    record_trace: bool = True,
    anchor_breath: int | None = None,
) -> Scenario:
    """Assemble a scenario from the calibrated defaults."""
    circuit = circuit if circuit is not None else DEFAULT_CIRCUIT
    if circuit.peep_setting != settings.peep:
        from dataclasses import replace

        circuit = replace(circuit, peep_setting=settings.peep)
    return Scenario(
        name=name,
        settings=settings,
        patient=patient,
        circuit=circuit,
        geometry=DEFAULT_GEOMETRY,
        gains=DEFAULT_GAINS,
        plant=DEFAULT_PLANT,
        adaptation=adaptation
        if adaptation is not None
        else AdaptationConfig(True, DEFAULT_GAIN, DEFAULT_PHI_INIT),
        flow_sensor=IDEAL_FLOW_SENSOR if ideal_sensors else DEFAULT_FLOW_SENSOR,
        pressure_sensor=IDEAL_PRESSURE_SENSOR if ideal_sensors else DEFAULT_PRESSURE_SENSOR,
        thresholds=thresholds if thresholds is not None else default_thresholds(settings),
        n_breaths=n_breaths,
        seed=seed,
        events=events,
        warmup_breaths=warmup_breaths,
        record_trace=record_trace,
        anchor_breath=anchor_breath,
    )


def lung_patient(name: str) -> PatientConfig:
    return PatientConfig("lung", lung=lung_preset(name))


def disconnected_patient() -> PatientConfig:
    return PatientConfig("disconnected", outlet=DISCONNECTED_OUTLET)


def study_cases() -> list[StudyCase]:
    """The four bench configurations of the fixed-set-point study."""
    return [
        StudyCase("disconnected", disconnected_patient(), 5.0, {}),
        StudyCase("healthy_peep5", lung_patient("healthy"), 5.0, {}),
        StudyCase("ards_peep5", lung_patient("ards"), 5.0, {}),
        StudyCase("ards_peep10", lung_patient("ards"), 10.0,
                  {"leak_coefficient": STUDY_LEAK_ARDS10}),
    ]


PHI_GRID = (0.20, 0.25, 0.30, 0.35, 0.40, 0.45, 0.50)


def load_bench_grid() -> SensitivityGrid:
    """Measured set-point/volume grid shipped with the package."""
    by_case: dict[str, list[tuple[float, float]]] = {}
    text = resources.files("bagvent.data").joinpath("setpoint_volume_grid.csv").read_text()
    for row in csv.DictReader(text.splitlines()):
        by_case.setdefault(row["case"], []).append(
            (float(row["phi_tgt_rad"]), float(row["tidal_volume_ml"]))
        )
    cases = []
    for label, pts in by_case.items():
        pts.sort()
        cases.append(
            SensitivityCase(
                label,
                tuple(p for p, _ in pts),
                tuple(v for _, v in pts),
            )
        )
    return SensitivityGrid(tuple(cases), delta_phi=0.05)
