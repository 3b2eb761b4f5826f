"""Fixed-step closed-loop engine: trajectory -> servo -> bag -> circuit ->
lung -> sensors, with per-breath adaptation, alarms and scheduled events.

One scenario is one deterministic sequential simulation at a 1 ms step.
Scheduled events (PEEP, patient, v_ref, ...) apply at breath boundaries;
routing between the inhale and exhale paths follows the bag (the patient
valve opens whichever side the pressure difference pushes), so a truncated
or servo-rounded breath still conserves volume exactly.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Callable, Sequence

import numpy as np

from . import bag as bag_model
from .adaptation import AdaptationState, adapt_setpoint
from .bag import BagGeometry
from .circuit import CircuitParameters, DisconnectedOutlet, PEEP_CHOICES
from .lung import LungParameters, LungState, make_state, preset as lung_preset
from .motor import (
    CONTROL_DT,
    MotorPlant,
    MotorState,
    PiGains,
    VentSettings,
    breath_period,
    pi_cascade_step,
)
from .sensing import (
    AlarmEvent,
    AlarmThresholds,
    BreathRecord,
    FlowSensor,
    FlowSensorModel,
    PressureSensor,
    PressureSensorModel,
    check_breath_alarms,
    minute_volume,
)


class ScenarioConfigError(ValueError):
    pass


class EngineInvariantError(RuntimeError):
    pass


@dataclass(frozen=True)
class PatientConfig:
    """Either a mechanical-lung preset or an open outlet (disconnected)."""

    kind: str  # "lung" | "disconnected"
    lung: LungParameters | None = None
    outlet: DisconnectedOutlet | None = None

    def __post_init__(self) -> None:
        if self.kind == "lung" and self.lung is None:
            raise ScenarioConfigError("lung patient needs lung parameters")
        if self.kind == "disconnected" and self.outlet is None:
            raise ScenarioConfigError("disconnected patient needs an outlet model")
        if self.kind not in ("lung", "disconnected"):
            raise ScenarioConfigError(f"unknown patient kind {self.kind!r}")


@dataclass(frozen=True)
class AdaptationConfig:
    enabled: bool = True
    g_i: float = 5e-4  # [rad/mL]
    phi_tgt_init: float = 0.35  # [rad]


@dataclass(frozen=True)
class Scenario:
    name: str
    settings: VentSettings
    patient: PatientConfig
    circuit: CircuitParameters
    geometry: BagGeometry
    gains: PiGains
    plant: MotorPlant
    adaptation: AdaptationConfig
    flow_sensor: FlowSensorModel
    pressure_sensor: PressureSensorModel
    thresholds: AlarmThresholds
    n_breaths: int
    seed: int
    events: tuple[tuple[int, dict[str, object]], ...] = ()
    warmup_breaths: int = 5
    record_trace: bool = True
    anchor_breath: int | None = None  # breath written as relative index 0

    def validate(self) -> None:
        if self.n_breaths < 1:
            raise ScenarioConfigError("n_breaths must be >= 1")
        indices = [b for b, _ in self.events]
        if indices != sorted(indices):
            raise ScenarioConfigError("events must be sorted by breath index")
        geo = self.geometry
        adapt = self.adaptation
        if not (geo.phi_0 <= adapt.phi_tgt_init <= geo.phi_max):
            raise ScenarioConfigError("phi_tgt_init outside [phi_0, phi_max]")
        if self.warmup_breaths < 0:
            raise ScenarioConfigError("warmup_breaths must be >= 0")


@dataclass
class BreathDiagnostics:
    """Per-breath volume bookkeeping, exact to arithmetic."""

    expelled: float = 0.0  # bag volume pushed out [mL]
    delivered: float = 0.0  # net volume into the patient side [mL]
    leak: float = 0.0  # [mL]
    compression: float = 0.0  # [mL]
    v_tidal_true: float = 0.0  # positive-part integral of the true flow [mL]
    lung_clamped: bool = False


@dataclass
class SimulationTrace:
    scenario: Scenario
    breaths: list[BreathRecord] = field(default_factory=list)
    diagnostics: list[BreathDiagnostics] = field(default_factory=list)
    alarm_log: list[AlarmEvent] = field(default_factory=list)
    applied_events: list[tuple[int, str]] = field(default_factory=list)
    t: np.ndarray | None = None
    phi: np.ndarray | None = None
    phi_ref: np.ndarray | None = None
    flow_true: np.ndarray | None = None
    flow_meas: np.ndarray | None = None
    p_aw: np.ndarray | None = None
    v_lung: np.ndarray | None = None
    v_bag: np.ndarray | None = None

    def k_rel(self, k: int) -> int:
        anchor = self.scenario.anchor_breath or 0
        return k - anchor


def _apply_event(
    change: dict[str, object],
    settings: VentSettings,
    circuit: CircuitParameters,
    patient: PatientConfig,
    adapt_state: AdaptationState,
) -> tuple[VentSettings, CircuitParameters, PatientConfig, AdaptationState, bool]:
    """Apply one scheduled change at a breath boundary."""
    patient_swapped = False
    for key, value in change.items():
        if key == "peep":
            peep = float(value)  # type: ignore[arg-type]
            if peep not in PEEP_CHOICES:
                raise ScenarioConfigError(f"event peep={peep} not in {PEEP_CHOICES}")
            settings = replace(settings, peep=peep)
            circuit = replace(circuit, peep_setting=peep)
        elif key == "v_ref":
            settings = replace(settings, v_ref=float(value))  # type: ignore[arg-type]
        elif key == "bpm":
            settings = replace(settings, bpm=float(value))  # type: ignore[arg-type]
        elif key == "ie":
            i_part, e_part = value  # type: ignore[misc]
            settings = replace(settings, ie_i=float(i_part), ie_e=float(e_part))
        elif key == "patient":
            name = str(value)
            if name == "disconnected":
                patient = PatientConfig("disconnected", outlet=DisconnectedOutlet())
            else:
                patient = PatientConfig("lung", lung=lung_preset(name))
            patient_swapped = True
        elif key == "leak_coefficient":
            circuit = replace(circuit, leak_coefficient=float(value))  # type: ignore[arg-type]
        elif key == "compression_compliance":
            circuit = replace(circuit, compression_compliance=float(value))  # type: ignore[arg-type]
        elif key == "phi_tgt":
            adapt_state = replace(adapt_state, phi_tgt=float(value))  # type: ignore[arg-type]
        elif key == "adaptation_enabled":
            adapt_state = replace(adapt_state, enabled=bool(value))
        else:
            raise ScenarioConfigError(f"unknown event key {key!r}")
    return settings, circuit, patient, adapt_state, patient_swapped


def run_scenario(scenario: Scenario) -> SimulationTrace:
    """Run one scenario to completion; deterministic for a given seed."""
    scenario.validate()
    dt = CONTROL_DT
    rng = np.random.default_rng(scenario.seed)

    geom = scenario.geometry
    settings = scenario.settings
    circuit = scenario.circuit
    patient = scenario.patient
    thresholds = scenario.thresholds
    gains = scenario.gains
    plant = scenario.plant

    flow_sensor = FlowSensor(scenario.flow_sensor, rng)
    pressure_sensor = PressureSensor(scenario.pressure_sensor, rng)

    adapt_state = AdaptationState(
        phi_tgt=scenario.adaptation.phi_tgt_init,
        g_i=scenario.adaptation.g_i,
        phi_min=geom.phi_0,
        phi_max=geom.phi_max,
        enabled=scenario.adaptation.enabled,
    )

    lung_state: LungState | None = None
    if patient.kind == "lung":
        lung_state = make_state(patient.lung, settings.peep)

    motor_state = MotorState(phi=geom.phi_0)
    trace = SimulationTrace(scenario=scenario)
    record = scenario.record_trace
    if record:
        tr_t: list[float] = []
        tr_phi: list[float] = []
        tr_phi_ref: list[float] = []
        tr_flow_true: list[float] = []
        tr_flow_meas: list[float] = []
        tr_p_aw: list[float] = []
        tr_v_lung: list[float] = []
        tr_v_bag: list[float] = []

    events = list(scenario.events)
    event_pos = 0

    t_start = 0.0
    step_global = 0
    p_aw_true = settings.peep if patient.kind == "lung" else 0.0
    v_bag_prev = bag_model.bag_volume(geom, motor_state.phi)

    bag_volume = bag_model.bag_volume
    paddle_torque = bag_model.paddle_torque

    for k in range(scenario.n_breaths):
        while event_pos < len(events) and events[event_pos][0] == k:
            change = events[event_pos][1]
            settings, circuit, patient, adapt_state, swapped = _apply_event(
                change, settings, circuit, patient, adapt_state
            )
            if swapped:
                lung_state = (
                    make_state(patient.lung, settings.peep) if patient.kind == "lung" else None
                )
            trace.applied_events.append((k, ", ".join(f"{kk}={vv}" for kk, vv in change.items())))
            event_pos += 1

        t_b = breath_period(settings)
        t_inh = t_b * settings.inhale_fraction
        t_end = t_start + t_b
        s0 = step_global
        s1 = round(t_end / dt)
        n_steps = s1 - s0
        phi_tgt = adapt_state.phi_tgt
        slope_in = (phi_tgt - geom.phi_0) / t_inh
        slope_ex = (geom.phi_0 - phi_tgt) / (t_b - t_inh)

        # Pre-drawn sensor noise for this breath (order fixed for determinism).
        rep = scenario.flow_sensor.repeatability_pct / 100.0
        flow_noise = rng.uniform(-rep, rep, n_steps) if rep > 0 else None
        p_sd = scenario.pressure_sensor.noise_sd
        p_noise = rng.normal(0.0, p_sd, n_steps) if p_sd > 0 else None

        diag = BreathDiagnostics()
        breath_alarms: list[AlarmEvent] = []
        truncated = False
        trunc_t = 0.0
        trunc_phi = 0.0
        p_peak = -math.inf
        p_meas = 0.0
        v_tidal_meas = 0.0
        comp_ref = 0.0  # stored tubing pressure, bled to ambient between breaths
        inhaled_yet = False

        r_aw = patient.lung.r_aw if patient.kind == "lung" else 0.0
        lc = circuit.leak_coefficient
        g_comp = circuit.compression_compliance / dt

        for i in range(n_steps):
            t_now = (s0 + i) * dt
            t_loc = t_now - t_start
            t_loc_next = t_loc + dt

            # Reference with one-step lookahead for the velocity feedforward.
            if truncated:
                ref_now = max(geom.phi_0, trunc_phi + slope_ex * (t_loc - trunc_t))
                ref_next = max(geom.phi_0, trunc_phi + slope_ex * (t_loc_next - trunc_t))
            else:
                ref_now = (
                    geom.phi_0 + slope_in * t_loc
                    if t_loc < t_inh
                    else phi_tgt + slope_ex * (t_loc - t_inh)
                )
                if t_loc_next < t_inh:
                    ref_next = geom.phi_0 + slope_in * t_loc_next
                elif t_loc_next >= t_b:
                    ref_next = geom.phi_0
                else:
                    ref_next = phi_tgt + slope_ex * (t_loc_next - t_inh)
            ff = (ref_next - ref_now) / dt

            load = 2.0 * paddle_torque(geom, motor_state.phi, max(p_aw_true, 0.0))
            motor_state = pi_cascade_step(gains, plant, motor_state, ref_next, ff, load, dt)

            v_bag_now = bag_volume(geom, motor_state.phi)
            dv_expelled = v_bag_prev - v_bag_now
            v_bag_prev = v_bag_now

            if dv_expelled > 0.0:
                # Bag pushing: patient valve routes bag -> patient side.
                if not inhaled_yet:
                    comp_ref = 0.0  # limb re-pressurizes from ambient
                    inhaled_yet = True
                q_bag = dv_expelled / dt
                if patient.kind == "lung":
                    p_alv = lung_state.p_alv
                    lung_flow = (q_bag - lc * p_alv - g_comp * (p_alv - comp_ref)) / (
                        1.0 + (r_aw / 1000.0) * (lc + g_comp)
                    )
                    p_aw_true = p_alv + (r_aw / 1000.0) * lung_flow
                else:
                    split = patient.outlet.route_inhale(circuit, q_bag, comp_ref, dt)
                    lung_flow = split.lung_flow
                    p_aw_true = split.p_aw
                leak_flow = lc * p_aw_true
                comp_flow = g_comp * (p_aw_true - comp_ref)
                comp_ref = p_aw_true
                flow_at_sensor = lung_flow
                diag.expelled += dv_expelled
                diag.delivered += lung_flow * dt
                diag.leak += leak_flow * dt
                diag.compression += comp_flow * dt
                if patient.kind == "lung":
                    v_new = lung_state.v_lung + lung_flow * dt
                    if v_new < patient.lung.frc_zeep:
                        v_new = patient.lung.frc_zeep
                        diag.lung_clamped = True
                    lung_state = LungState(
                        v_new, _pressure_from_volume_fast(patient.lung, v_new)
                    )
            else:
                # Bag idle or refilling from ambient: lung vents via PEEP valve.
                if patient.kind == "lung":
                    p_alv = lung_state.p_alv
                    crack = circuit.peep_setting + circuit.valve_crack_margin
                    if p_alv > crack:
                        q_out = (p_alv - crack) / ((r_aw + circuit.peep_resistance) / 1000.0)
                        p_aw_true = p_alv - (r_aw / 1000.0) * q_out
                    else:
                        q_out = 0.0
                        p_aw_true = p_alv
                    flow_at_sensor = -q_out
                    if q_out > 0.0:
                        v_new = lung_state.v_lung - q_out * dt
                        if v_new < patient.lung.frc_zeep:
                            v_new = patient.lung.frc_zeep
                            diag.lung_clamped = True
                        lung_state = LungState(
                            v_new, _pressure_from_volume_fast(patient.lung, v_new)
                        )
                else:
                    flow_at_sensor = 0.0
                    p_aw_true = 0.0

            noise = flow_noise[i] if flow_noise is not None else None
            flow_meas = flow_sensor.sample_fast(flow_at_sensor, noise)
            p_meas = pressure_sensor.sample_fast(
                p_aw_true, p_noise[i] if p_noise is not None else None
            )
            if flow_meas > 0.0:
                v_tidal_meas += flow_meas * dt
                diag.v_tidal_true += max(flow_at_sensor, 0.0) * dt
            if dv_expelled > 0.0 and p_meas > p_peak:
                p_peak = p_meas

            if (
                not truncated
                and dv_expelled > 0.0
                and p_meas > thresholds.p_insp_max
            ):
                truncated = True
                trunc_t = t_loc
                trunc_phi = ref_now
                breath_alarms.append(
                    AlarmEvent("c", k, t_now, p_meas, thresholds.p_insp_max)
                )

            if record:
                tr_t.append(t_now)
                tr_phi.append(motor_state.phi)
                tr_phi_ref.append(ref_now)
                tr_flow_true.append(flow_at_sensor)
                tr_flow_meas.append(flow_meas)
                tr_p_aw.append(p_aw_true)
                tr_v_lung.append(lung_state.v_lung if lung_state is not None else 0.0)
                tr_v_bag.append(v_bag_now)

        if not math.isfinite(motor_state.phi) or not math.isfinite(p_aw_true):
            raise EngineInvariantError(f"non-finite state at breath {k}")

        rec = BreathRecord(
            k=k,
            t_start=t_start,
            t_end=t_end,
            t_inh_end=t_start + t_inh,
            phi_tgt_used=phi_tgt,
            v_tidal=v_tidal_meas,
            p_peak=p_peak if math.isfinite(p_peak) else 0.0,
            p_end_exp=p_meas,
            truncated=truncated,
        )
        trace.breaths.append(rec)
        trace.diagnostics.append(diag)
        mv = minute_volume(trace.breaths, rec.t_end)
        rec.alarms = breath_alarms + check_breath_alarms(
            thresholds, rec, mv, window_complete=rec.t_end >= 60.0
        )
        trace.alarm_log.extend(rec.alarms)

        if adapt_state.enabled:
            adapt_state = adapt_setpoint(adapt_state, settings.v_ref, rec.v_tidal)

        t_start = t_end
        step_global = s1

    if record:
        trace.t = np.asarray(tr_t)
        trace.phi = np.asarray(tr_phi)
        trace.phi_ref = np.asarray(tr_phi_ref)
        trace.flow_true = np.asarray(tr_flow_true)
        trace.flow_meas = np.asarray(tr_flow_meas)
        trace.p_aw = np.asarray(tr_p_aw)
        trace.v_lung = np.asarray(tr_v_lung)
        trace.v_bag = np.asarray(tr_v_bag)
    return trace


def _pressure_from_volume_fast(params: LungParameters, v: float) -> float:
    """Inline static-curve inversion (hot path; mirrors lung.pressure_from_volume)."""
    if v <= params.v_lip:
        p = (v - params.frc_zeep) / params.c_1
        return p if p > 0.0 else 0.0
    if v <= params.v_uip:
        return params.lip + (v - params.v_lip) / params.c_rs
    return params.uip + (v - params.v_uip) / params.c_2


# ---------------------------------------------------------------------------
# Study runners
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class StudyCase:
    """One column of the parameter study: a physical bench configuration."""

    label: str
    patient: PatientConfig
    peep: float
    circuit_overrides: dict[str, float] = field(default_factory=dict)


@dataclass
class ParameterStudyResult:
    phi_grid: list[float]
    case_labels: list[str]
    volumes: dict[str, list[float]]  # label -> mean tidal volume per phi


def _case_scenario(base: Scenario, case: StudyCase, phi_tgt: float, n_breaths: int) -> Scenario:
    circuit = replace(base.circuit, peep_setting=case.peep, **case.circuit_overrides)
    settings = replace(base.settings, peep=case.peep)
    return replace(
        base,
        name=f"{base.name}/{case.label}/phi={phi_tgt:.2f}",
        settings=settings,
        patient=case.patient,
        circuit=circuit,
        adaptation=AdaptationConfig(enabled=False, g_i=base.adaptation.g_i,
                                    phi_tgt_init=phi_tgt),
        n_breaths=n_breaths,
        record_trace=False,
    )


def run_parameter_study(
    base: Scenario,
    phi_grid: Sequence[float],
    cases: Sequence[StudyCase],
    breaths_to_average: int = 10,
    warmup: int = 2,
) -> ParameterStudyResult:
    """Fixed-set-point sweep: mean tidal volume per (case, phi_tgt)."""
    if not phi_grid:
        raise ScenarioConfigError("phi_grid must be nonempty")
    result = ParameterStudyResult(list(phi_grid), [c.label for c in cases], {})
    for case in cases:
        col: list[float] = []
        for phi_tgt in phi_grid:
            scen = _case_scenario(base, case, phi_tgt, warmup + breaths_to_average)
            trace = run_scenario(scen)
            vols = [r.v_tidal for r in trace.breaths[warmup:]]
            col.append(sum(vols) / len(vols))
        result.volumes[case.label] = col
    return result


@dataclass
class TrackingCell:
    v_ref: float
    bpm: float
    mean_error: float
    rms_error: float
    max_abs_error: float


def run_tracking_study(
    base: Scenario,
    v_refs: Sequence[float] = (350.0, 400.0, 450.0),
    bpms: Sequence[float] = (10.0, 20.0, 30.0),
    breaths: int = 100,
) -> list[TrackingCell]:
    """Adaptive tracking statistics over `breaths` post-warm-up breath cycles."""
    cells: list[TrackingCell] = []
    warmup = base.warmup_breaths
    for v_ref in v_refs:
        for bpm in bpms:
            scen = replace(
                base,
                name=f"{base.name}/vref={v_ref:.0f}/bpm={bpm:.0f}",
                settings=replace(base.settings, v_ref=v_ref, bpm=bpm),
                adaptation=replace(base.adaptation, enabled=True),
                n_breaths=warmup + breaths,
                record_trace=False,
            )
            trace = run_scenario(scen)
            errors = [v_ref - r.v_tidal for r in trace.breaths[warmup:]]
            n = len(errors)
            mean = sum(errors) / n
            rms = math.sqrt(sum(e * e for e in errors) / n)
            cells.append(TrackingCell(v_ref, bpm, mean, rms, max(abs(e) for e in errors)))
    return cells
